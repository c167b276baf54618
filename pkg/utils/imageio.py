"""Grayscale image I/O, intensity normalization and the synthetic print generator.

Synthetic prints follow the phase-dislocation ridge model::

    phi(x, y) = 2*pi*f*(x*cos(theta0) + y*sin(theta0)) + phase
                + sum_k sign_k * atan2(y - y_k, x - x_k)
    I(x, y)   = 127.5 * (1 + cos(phi)) + noise

Each dislocation plants one minutia whose ground-truth direction is
``theta0 + sign * 90`` degrees.
"""
import logging
import math
import os
import re
from dataclasses import replace
from typing import Iterable, List, Optional, Tuple

import numpy as np

from models.gray_image import Dislocation, GrayImage, GroundTruth, SyntheticSpec
from utils.errors import ImageFormatError, SpecFormatError
from utils.geometry import RigidTransform, normalize_direction

logger = logging.getLogger(__name__)

PGM_MAGIC = b'P5'
PGM_MAXVAL = 255

_WHITESPACE = b' \t\r\n'


def _read_header_tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping '#' comments.

    Returns the tokens and the offset of the single whitespace byte that ends
    the last token.
    """
    tokens = []
    pos = 0
    size = len(data)
    while len(tokens) < count:
        while pos < size and data[pos:pos + 1] in (b' ', b'\t', b'\r', b'\n'):
            pos += 1
        if pos >= size:
            raise ImageFormatError('header ends before all fields were read', 'MALFORMED_HEADER')
        if data[pos:pos + 1] == b'#':
            end = data.find(b'\n', pos)
            if end < 0:
                raise ImageFormatError('unterminated comment in header', 'MALFORMED_HEADER')
            pos = end + 1
            continue
        start = pos
        while pos < size and data[pos] not in _WHITESPACE and data[pos:pos + 1] != b'#':
            pos += 1
        tokens.append(data[start:pos])
    if pos >= size or data[pos] not in _WHITESPACE:
        raise ImageFormatError('header must end with a single whitespace byte', 'MALFORMED_HEADER')
    return tokens, pos


def decode_pgm(data: bytes) -> GrayImage:
    """Decode the bytes of a binary 8-bit PGM file"""
    if data[:2] != PGM_MAGIC:
        raise ImageFormatError('not a binary PGM file (magic "P5" expected)', 'MALFORMED_HEADER')

    tokens, end = _read_header_tokens(data, 4)
    if tokens[0] != PGM_MAGIC:
        raise ImageFormatError(f'unexpected magic {tokens[0]!r}', 'MALFORMED_HEADER')
    try:
        width, height, maxval = (int(token.decode('ascii')) for token in tokens[1:])
    except (UnicodeDecodeError, ValueError):
        raise ImageFormatError(f'non-numeric header field in {tokens[1:]}', 'MALFORMED_HEADER')

    if width <= 0 or height <= 0:
        raise ImageFormatError(f'invalid dimensions {width}x{height}', 'MALFORMED_HEADER')
    if maxval != PGM_MAXVAL:
        raise ImageFormatError(f'unsupported maxval {maxval}', 'UNSUPPORTED_MAXVAL')

    payload = data[end + 1:]
    expected = width * height
    if len(payload) < expected:
        raise ImageFormatError(
            f'truncated payload: expected {expected} bytes, got {len(payload)}', 'TRUNCATED_PAYLOAD'
        )

    pixels = np.frombuffer(payload[:expected], dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels)


def encode_pgm(image: GrayImage) -> bytes:
    header = f'P5\n{image.width} {image.height}\n{PGM_MAXVAL}\n'.encode('ascii')
    return header + image.pixels.tobytes()


def load_pgm(path: str) -> GrayImage:
    """Load a binary PGM (P5, maxval 255) file"""
    with open(path, 'rb') as handle:
        data = handle.read()
    image = decode_pgm(data)
    logger.debug(f'Loaded {path}: {image.width}x{image.height}')
    return image


def save_pgm(image: GrayImage, path: str) -> None:
    """Write an image as binary PGM; raises OSError for unwritable paths"""
    with open(path, 'wb') as handle:
        handle.write(encode_pgm(image))


def is_pgm_data(data: bytes) -> bool:
    return data[:2] == PGM_MAGIC


def normalize_intensity(image: GrayImage, target_mean: float = 128.0,
                        target_std: float = 40.0) -> Tuple[GrayImage, bool]:
    """
    Shift and scale intensities to the requested mean and standard deviation

    Args:
        image: Input image
        target_mean: Desired mean intensity
        target_std: Desired intensity standard deviation, must be positive

    Returns:
        Tuple of (normalized image, degenerate flag). A constant image is
        returned unchanged with the flag set.
    """
    if target_std <= 0:
        raise ValueError(f'target_std must be positive, got {target_std}')

    values = image.as_float()
    std = float(values.std())
    if std == 0.0:
        logger.warning('Constant image, intensity normalization skipped')
        return image, True

    scaled = target_mean + (values - values.mean()) * (target_std / std)
    return GrayImage(np.clip(np.rint(scaled), 0, 255).astype(np.uint8), image.dpi), False


def ridge_phase(spec: SyntheticSpec) -> np.ndarray:
    """Phase field phi of the ridge model, shape (height, width)"""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    theta = math.radians(spec.base_orientation)
    k = 2.0 * math.pi * spec.ridge_frequency
    phi = k * (xs * math.cos(theta) + ys * math.sin(theta)) + spec.phase
    for d in spec.dislocations + spec.outside_dislocations:
        phi += d.sign * np.arctan2(ys - d.y, xs - d.x)
    return phi


def synthesize_fingerprint(spec: SyntheticSpec) -> Tuple[GrayImage, GroundTruth]:
    """Render the ridge model of ``spec``; identical specs give identical images"""
    intensity = 127.5 * (1.0 + np.cos(ridge_phase(spec)))

    rng = np.random.default_rng(spec.rng_seed)
    if spec.noise_std > 0:
        intensity = intensity + rng.normal(0.0, spec.noise_std, size=intensity.shape)

    pixels = np.clip(np.rint(intensity), 0, 255).astype(np.uint8)
    truth = GroundTruth(tuple(
        (float(d.x), float(d.y), normalize_direction(spec.base_orientation + d.sign * 90.0))
        for d in spec.dislocations
    ))
    return GrayImage(pixels), truth


def perturb_spec(spec: SyntheticSpec, rotation: float = 0.0,
                 translation: Tuple[float, float] = (0.0, 0.0),
                 noise_std: Optional[float] = None, seed: Optional[int] = None,
                 name: Optional[str] = None) -> SyntheticSpec:
    """
    Describe a new impression of the same finger: the ridge pattern rotated by
    ``rotation`` degrees about the image centre, then translated.

    The rendered result is an exact rigid copy of the original pattern.
    Dislocations that leave the frame keep shaping the pattern but are no
    longer part of the ground truth.
    """
    cx, cy = (spec.width - 1) / 2.0, (spec.height - 1) / 2.0
    tx, ty = translation
    transform = RigidTransform.about_point(rotation, cx, cy, tx, ty)

    delta = math.radians(rotation)
    k = 2.0 * math.pi * spec.ridge_frequency
    theta = math.radians(spec.base_orientation)
    normal = np.array([math.cos(theta), math.sin(theta)])
    moved_normal = np.array([math.cos(theta + delta), math.sin(theta + delta)])
    centre = np.array([cx, cy])

    all_dislocations = spec.dislocations + spec.outside_dislocations
    phase = spec.phase + k * float((normal - moved_normal) @ centre)
    phase -= k * float(moved_normal @ np.array([tx, ty]))
    phase -= sum(d.sign for d in all_dislocations) * delta

    inside, outside = [], []
    for d in all_dislocations:
        x, y = transform.apply_point(d.x, d.y)
        moved = Dislocation(x, y, d.sign)
        if 0 <= x <= spec.width - 1 and 0 <= y <= spec.height - 1:
            inside.append(moved)
        else:
            outside.append(moved)

    return replace(
        spec,
        base_orientation=normalize_direction(spec.base_orientation + rotation),
        dislocations=tuple(inside),
        outside_dislocations=tuple(outside),
        phase=float(math.remainder(phase, 2.0 * math.pi)),
        noise_std=spec.noise_std if noise_std is None else noise_std,
        rng_seed=spec.rng_seed if seed is None else seed,
        name=name or spec.name
    )


_SECTION = re.compile(r'^\[(?P<name>[A-Za-z0-9_.\-]+)\]$')

_SPEC_KEYS = {
    'width': ('width', int),
    'height': ('height', int),
    'freq': ('ridge_frequency', float),
    'theta0': ('base_orientation', float),
    'noise_std': ('noise_std', float),
    'seed': ('rng_seed', int),
    'phase': ('phase', float),
}


def _parse_dislocation(value: str, line_number: int) -> Dislocation:
    parts = [p.strip() for p in value.split(',')]
    if len(parts) != 3:
        raise SpecFormatError(f'dislocation must be "x,y,sign", got "{value}"', line_number)
    try:
        return Dislocation(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as e:
        raise SpecFormatError(f'bad dislocation "{value}": {e}', line_number)


def parse_spec_text(text: str) -> List[SyntheticSpec]:
    """
    Parse a synthetic spec file.

    Entries start with a ``[name]`` line; keys before the first section form
    a single entry named ``print``. Keys: width, height, freq, theta0,
    noise_std, seed, phase and repeated ``dislocation = x,y,sign``.
    """
    entries = []
    current = None

    def close(entry):
        if entry is None:
            return
        fields, start_line = entry
        try:
            entries.append(SyntheticSpec(**fields))
        except ValueError as e:
            raise SpecFormatError(str(e), start_line)

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue

        section = _SECTION.match(line)
        if section:
            close(current)
            current = ({'name': section.group('name'), 'dislocations': []}, line_number)
            continue

        if '=' not in line:
            raise SpecFormatError(f'expected "key = value", got "{line}"', line_number)
        key, value = (part.strip() for part in line.split('=', 1))

        if current is None:
            current = ({'name': 'print', 'dislocations': []}, line_number)
        fields = current[0]

        if key == 'dislocation':
            fields['dislocations'].append(_parse_dislocation(value, line_number))
        elif key in _SPEC_KEYS:
            field_name, cast = _SPEC_KEYS[key]
            try:
                fields[field_name] = cast(value)
            except ValueError:
                raise SpecFormatError(f'invalid value "{value}" for {key}', line_number)
        else:
            raise SpecFormatError(f'unknown key "{key}"', line_number)

    close(current)
    return entries


def load_spec_file(path: str) -> List[SyntheticSpec]:
    with open(path, 'r', encoding='utf-8') as handle:
        return parse_spec_text(handle.read())


def format_spec(spec: SyntheticSpec) -> str:
    """Render one spec as a ``[name]`` section readable by parse_spec_text"""
    lines = [
        f'[{spec.name}]',
        f'width = {spec.width}',
        f'height = {spec.height}',
        f'freq = {spec.ridge_frequency!r}',
        f'theta0 = {spec.base_orientation!r}',
        f'noise_std = {spec.noise_std!r}',
        f'seed = {spec.rng_seed}',
        f'phase = {spec.phase!r}',
    ]
    lines.extend(f'dislocation = {d.x!r},{d.y!r},{d.sign}' for d in spec.dislocations)
    return '\n'.join(lines) + '\n'


def write_spec_file(specs: Iterable[SyntheticSpec], path: str) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write('\n'.join(format_spec(spec) for spec in specs))


def write_ground_truth(truth: GroundTruth, path: str) -> None:
    """One "x y direction" line per planted minutia"""
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(f'# {len(truth)} planted minutiae: x y direction\n')
        for x, y, direction in truth.minutiae:
            handle.write(f'{x!r} {y!r} {direction:.2f}\n')


def read_ground_truth(path: str) -> GroundTruth:
    points = []
    with open(path, 'r', encoding='utf-8') as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            try:
                x, y, direction = (float(v) for v in line.split())
            except ValueError:
                raise SpecFormatError(f'expected "x y direction", got "{line}"', line_number)
            points.append((x, y, direction))
    return GroundTruth(tuple(points))


def write_synthetic(spec: SyntheticSpec, out_dir: str) -> Tuple[str, str]:
    """Render ``spec`` to ``<name>.pgm`` and ``<name>.truth`` in ``out_dir``"""
    image, truth = synthesize_fingerprint(spec)
    image_path = os.path.join(out_dir, f'{spec.name}.pgm')
    truth_path = os.path.join(out_dir, f'{spec.name}.truth')
    save_pgm(image, image_path)
    write_ground_truth(truth, truth_path)
    return image_path, truth_path
