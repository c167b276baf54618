"""Ridge-texture matcher: Gabor bank, FingerCode and overlap-weighted alignment.

The image is filtered with 8 even-symmetric Gabor kernels, the responses
are tessellated into square cells and every (cell, orientation) keeps the
standard deviation of its response. Two codes are aligned by the integer
cell offset with the best zero-mean normalized correlation over the cells
valid in both, and compared by Euclidean distance over those cells. No
rotation compensation.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.signal import fftconvolve

from models.fingercode import ORIENTATION_COUNT, AlignmentOffset, FingerCode
from models.gray_image import GrayImage
from utils.errors import FingerCodeFormatError, NoAdmissibleOffsetError

logger = logging.getLogger(__name__)

# distance reported when two codes cannot be aligned or share no cell
MAX_RIDGE_DISTANCE = 1e3

FINGERCODE_MAGIC = 'FC'

STATISTICS = ('std', 'variance')
ALIGNMENT_METHODS = ('fft', 'direct')


@dataclass(frozen=True)
class GaborBankParams:
    frequency: float = 0.1
    sigma_x: float = 4.0
    sigma_y: float = 4.0

    def __post_init__(self):
        if not 0 < self.frequency <= 0.5:
            raise ValueError(f'frequency must be in (0, 0.5], got {self.frequency}')
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError('Gabor sigmas must be positive')

    @property
    def orientations(self) -> Tuple[float, ...]:
        return tuple(index * 180.0 / ORIENTATION_COUNT for index in range(ORIENTATION_COUNT))


@dataclass(frozen=True)
class RidgeConfig:
    cell_size: int = 16
    statistic: str = 'std'
    min_coverage: float = 0.5
    min_overlap: float = 0.25
    alignment: str = 'fft'

    def __post_init__(self):
        if self.cell_size < 8:
            raise ValueError(f'cell_size must be at least 8, got {self.cell_size}')
        if self.statistic not in STATISTICS:
            raise ValueError(f'statistic must be one of {STATISTICS}')
        if self.alignment not in ALIGNMENT_METHODS:
            raise ValueError(f'alignment must be one of {ALIGNMENT_METHODS}')
        if not 0 <= self.min_coverage <= 1 or not 0 <= self.min_overlap <= 1:
            raise ValueError('min_coverage and min_overlap must be in [0, 1]')


@lru_cache(maxsize=64)
def gabor_kernel(theta: float, frequency: float, sigma_x: float, sigma_y: float) -> np.ndarray:
    """Zero-mean even Gabor kernel; x' runs along the wave normal at ``theta`` degrees"""
    radius = int(math.ceil(3.0 * max(sigma_x, sigma_y)))
    steps = np.arange(-radius, radius + 1, dtype=np.float64)
    ys, xs = np.meshgrid(steps, steps, indexing='ij')
    angle = math.radians(theta)
    x_rot = xs * math.cos(angle) + ys * math.sin(angle)
    y_rot = -xs * math.sin(angle) + ys * math.cos(angle)
    envelope = np.exp(-0.5 * (x_rot ** 2 / sigma_x ** 2 + y_rot ** 2 / sigma_y ** 2))
    carrier = np.cos(2.0 * math.pi * frequency * x_rot)
    dc = np.sum(envelope * carrier) / np.sum(envelope)
    kernel = envelope * (carrier - dc)
    kernel.setflags(write=False)
    return kernel


def gabor_bank(image: GrayImage, params: GaborBankParams = GaborBankParams()) -> np.ndarray:
    """Magnitudes of the 8 filtered images, shape (8, height, width)"""
    values = image.as_float()
    filtered = []
    for theta in params.orientations:
        kernel = gabor_kernel(theta, params.frequency, params.sigma_x, params.sigma_y)
        radius = kernel.shape[0] // 2
        padded = np.pad(values, radius, mode='reflect')
        filtered.append(np.abs(fftconvolve(padded, kernel, mode='valid')))
    return np.stack(filtered)


def _cell_range(origin: int, cells: int, cell_size: int, extent: int) -> Tuple[int, int]:
    """Indices [first, last) of the cells lying fully inside [0, extent)"""
    first = max(0, -(origin // cell_size)) if origin < 0 else 0
    while first < cells and origin + first * cell_size < 0:
        first += 1
    last = first
    while last < cells and origin + (last + 1) * cell_size <= extent:
        last += 1
    return first, last


def extract_fingercode(filtered: np.ndarray, mask: Optional[np.ndarray] = None, cell_size: int = 16,
                       statistic: str = 'std', min_coverage: float = 0.5,
                       grid: Optional[Tuple[int, int]] = None,
                       origin: Tuple[int, int] = (0, 0)) -> FingerCode:
    """
    Per-cell, per-orientation spread of the filtered responses.

    Cells start at ``origin`` (x, y) in pixels; a cell is valid when it lies
    inside the image and at least ``min_coverage`` of it is foreground.
    """
    _, height, width = filtered.shape
    if mask is None:
        mask = np.ones((height, width), dtype=bool)
    ox, oy = origin
    grid_h, grid_w = grid if grid is not None else (height // cell_size, width // cell_size)

    values = np.zeros((grid_h, grid_w, filtered.shape[0]))
    valid = np.zeros((grid_h, grid_w), dtype=bool)
    r0, r1 = _cell_range(oy, grid_h, cell_size, height)
    c0, c1 = _cell_range(ox, grid_w, cell_size, width)
    if r1 > r0 and c1 > c0:
        rows = slice(oy + r0 * cell_size, oy + r1 * cell_size)
        cols = slice(ox + c0 * cell_size, ox + c1 * cell_size)
        n_rows, n_cols = r1 - r0, c1 - c0
        cells = filtered[:, rows, cols].reshape(filtered.shape[0], n_rows, cell_size, n_cols, cell_size)
        spread = cells.var(axis=(2, 4)) if statistic == 'variance' else cells.std(axis=(2, 4))
        values[r0:r1, c0:c1, :] = np.moveaxis(spread, 0, -1)
        coverage = mask[rows, cols].reshape(n_rows, cell_size, n_cols, cell_size).mean(axis=(1, 3))
        valid[r0:r1, c0:c1] = coverage >= min_coverage

    return FingerCode(values, valid, cell_size)


def _offset_range(fa: FingerCode, fb: FingerCode):
    return range(-(fa.grid_h - 1), fb.grid_h), range(-(fa.grid_w - 1), fb.grid_w)


def _overlap_views(fa: FingerCode, fb: FingerCode, dx: int, dy: int):
    """Matching slices: cell c of A against cell c + (dx, dy) of B"""
    row_start, col_start = max(0, -dy), max(0, -dx)
    a_rows = slice(row_start, max(row_start, min(fa.grid_h, fb.grid_h - dy)))
    a_cols = slice(col_start, max(col_start, min(fa.grid_w, fb.grid_w - dx)))
    b_rows = slice(a_rows.start + dy, a_rows.stop + dy)
    b_cols = slice(a_cols.start + dx, a_cols.stop + dx)
    return (a_rows, a_cols), (b_rows, b_cols)


def _correlate(b_map: np.ndarray, a_map: np.ndarray) -> np.ndarray:
    """Full 2-D correlation of A over B, indexed like the score maps"""
    return fftconvolve(b_map, a_map[::-1, ::-1], mode='full')


def correlation_maps(fa: FingerCode, fb: FingerCode, method: str = 'fft') -> Dict[str, np.ndarray]:
    """
    Sums over the cells valid in both codes at every offset.

    ``products`` is the sum of elementwise products, ``overlap`` the count of
    shared valid cells, ``sum_a``/``sum_b`` and ``energy_a``/``energy_b`` the
    sums and squared sums of each side's entries on those cells. All maps are
    indexed ``[dy + grid_h(A) - 1, dx + grid_w(A) - 1]``.
    """
    if method == 'fft':
        valid_a, valid_b = fa.valid.astype(float), fb.valid.astype(float)
        return {
            'products': fftconvolve(fb.values, fa.values[::-1, ::-1, :], mode='full', axes=(0, 1)).sum(axis=2),
            'overlap': np.rint(_correlate(valid_b, valid_a)),
            'sum_a': _correlate(valid_b, fa.values.sum(axis=2)),
            'sum_b': _correlate(fb.values.sum(axis=2), valid_a),
            'energy_a': _correlate(valid_b, (fa.values ** 2).sum(axis=2)),
            'energy_b': _correlate((fb.values ** 2).sum(axis=2), valid_a),
        }

    dys, dxs = _offset_range(fa, fb)
    maps = {name: np.zeros((len(dys), len(dxs)))
            for name in ('products', 'overlap', 'sum_a', 'sum_b', 'energy_a', 'energy_b')}
    for row, dy in enumerate(dys):
        for col, dx in enumerate(dxs):
            (ar, ac), (br, bc) = _overlap_views(fa, fb, dx, dy)
            both = fa.valid[ar, ac] & fb.valid[br, bc]
            a, b = fa.values[ar, ac][both], fb.values[br, bc][both]
            maps['products'][row, col] = np.sum(a * b)
            maps['overlap'][row, col] = both.sum()
            maps['sum_a'][row, col] = a.sum()
            maps['sum_b'][row, col] = b.sum()
            maps['energy_a'][row, col] = np.sum(a ** 2)
            maps['energy_b'][row, col] = np.sum(b ** 2)
    return maps


def alignment_scores(fa: FingerCode, fb: FingerCode, min_overlap: float = 0.25,
                     method: str = 'fft') -> np.ndarray:
    """
    Zero-mean normalized correlation per offset, in [-1, 1]; NaN where the
    offset is not admissible.

    Means and energies are taken over the shared valid cells only, so every
    offset is weighted by its own overlap and a code scores exactly 1 against
    itself at (0, 0). Offsets where either side is flat score 0.
    """
    if fa.cell_size != fb.cell_size or fa.orientation_count != fb.orientation_count:
        raise ValueError('FingerCodes differ in cell size or orientation count')

    maps = correlation_maps(fa, fb, method)
    overlap = maps['overlap']
    required = min_overlap * min(fa.valid_count, fb.valid_count)
    admissible = (overlap >= required) & (overlap > 0)

    entries = np.where(admissible, overlap * fa.orientation_count, 1.0)
    covariance = maps['products'] - maps['sum_a'] * maps['sum_b'] / entries
    spread_a = np.maximum(maps['energy_a'] - maps['sum_a'] ** 2 / entries, 0.0)
    spread_b = np.maximum(maps['energy_b'] - maps['sum_b'] ** 2 / entries, 0.0)
    denominator = np.sqrt(spread_a * spread_b)
    # FFT round-off leaves tiny spreads on flat overlaps
    scale = np.sqrt(np.maximum(maps['energy_a'] * maps['energy_b'], 0.0))
    flat = denominator <= 1e-8 * scale

    scores = np.full(overlap.shape, np.nan)
    defined = admissible & ~flat
    scores[defined] = covariance[defined] / denominator[defined]
    scores[admissible & flat] = 0.0
    return scores


def align_fingercodes(fa: FingerCode, fb: FingerCode, min_overlap: float = 0.25,
                      method: str = 'fft') -> AlignmentOffset:
    """Offset with the highest score; ties go to the smallest |dx| + |dy|"""
    scores = alignment_scores(fa, fb, min_overlap, method)
    if np.all(np.isnan(scores)):
        raise NoAdmissibleOffsetError()

    best_score = np.nanmax(scores)
    # FFT round-off must not split exact ties
    rows, cols = np.nonzero(scores >= best_score - 1e-9 * max(1.0, abs(best_score)))
    candidates = sorted(
        (abs(int(c) - (fa.grid_w - 1)) + abs(int(r) - (fa.grid_h - 1)), int(r) - (fa.grid_h - 1), int(c) - (fa.grid_w - 1))
        for r, c in zip(rows, cols)
    )
    _, dy, dx = candidates[0]
    return AlignmentOffset(dx, dy)


def compare_fingercodes(fa: FingerCode, fb: FingerCode, offset: AlignmentOffset) -> float:
    """Euclidean distance over cells valid in both, divided by their count"""
    (ar, ac), (br, bc) = _overlap_views(fa, fb, offset.dx, offset.dy)
    both = fa.valid[ar, ac] & fb.valid[br, bc]
    count = int(both.sum())
    if count == 0:
        return MAX_RIDGE_DISTANCE
    diff = fa.values[ar, ac][both] - fb.values[br, bc][both]
    return float(np.sqrt(np.sum(diff ** 2)) / count)


def fingercode_distance(fa: FingerCode, fb: FingerCode, cfg: RidgeConfig = RidgeConfig()) -> float:
    """Align two stored codes and compare them; sentinel distance when alignment fails"""
    try:
        offset = align_fingercodes(fa, fb, cfg.min_overlap, cfg.alignment)
    except NoAdmissibleOffsetError:
        logger.debug('Ridge match without admissible offset')
        return MAX_RIDGE_DISTANCE
    return compare_fingercodes(fa, fb, offset)


def match_ridge(image_a: GrayImage, image_b: GrayImage, params: GaborBankParams = GaborBankParams(),
                cfg: RidgeConfig = RidgeConfig(), mask_a: Optional[np.ndarray] = None,
                mask_b: Optional[np.ndarray] = None) -> float:
    """
    Extract both codes, align them, re-extract B on the shifted tessellation
    and return the per-cell Euclidean distance
    """
    filtered_a = gabor_bank(image_a, params)
    filtered_b = gabor_bank(image_b, params)
    fa = extract_fingercode(filtered_a, mask_a, cfg.cell_size, cfg.statistic, cfg.min_coverage)
    fb = extract_fingercode(filtered_b, mask_b, cfg.cell_size, cfg.statistic, cfg.min_coverage)
    try:
        offset = align_fingercodes(fa, fb, cfg.min_overlap, cfg.alignment)
    except NoAdmissibleOffsetError:
        return MAX_RIDGE_DISTANCE

    shifted = extract_fingercode(
        filtered_b, mask_b, cfg.cell_size, cfg.statistic, cfg.min_coverage,
        grid=(fa.grid_h, fa.grid_w),
        origin=(offset.dx * cfg.cell_size, offset.dy * cfg.cell_size)
    )
    return compare_fingercodes(fa, shifted, AlignmentOffset(0, 0))


def format_fingercode(code: FingerCode) -> str:
    lines = [f'{FINGERCODE_MAGIC} {code.grid_w} {code.grid_h} {code.cell_size}']
    for cy in range(code.grid_h):
        for cx in range(code.grid_w):
            values = ' '.join(repr(float(v)) for v in code.values[cy, cx])
            lines.append(f'{cx} {cy} {int(code.valid[cy, cx])} {values}')
    return '\n'.join(lines) + '\n'


def parse_fingercode(text: str) -> FingerCode:
    lines = text.splitlines()
    header = lines[0].split() if lines else []
    if len(header) != 4 or header[0] != FINGERCODE_MAGIC:
        raise FingerCodeFormatError('expected "FC grid_w grid_h cell_size"', 1)
    try:
        grid_w, grid_h, cell_size = (int(v) for v in header[1:])
    except ValueError:
        raise FingerCodeFormatError('non-integer header field', 1)

    values = np.zeros((grid_h, grid_w, ORIENTATION_COUNT))
    valid = np.zeros((grid_h, grid_w), dtype=bool)
    seen: Dict[Tuple[int, int], int] = {}
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 3 + ORIENTATION_COUNT:
            raise FingerCodeFormatError(f'expected {3 + ORIENTATION_COUNT} fields', line_number)
        try:
            cx, cy, flag = int(fields[0]), int(fields[1]), int(fields[2])
            cell = [float(v) for v in fields[3:]]
        except ValueError:
            raise FingerCodeFormatError(f'malformed cell "{line}"', line_number)
        if not (0 <= cx < grid_w and 0 <= cy < grid_h) or flag not in (0, 1) or min(cell) < 0:
            raise FingerCodeFormatError(f'cell out of range "{line}"', line_number)
        if (cx, cy) in seen:
            raise FingerCodeFormatError(f'cell {cx},{cy} repeated from line {seen[(cx, cy)]}', line_number)
        seen[(cx, cy)] = line_number
        values[cy, cx] = cell
        valid[cy, cx] = bool(flag)

    if len(seen) != grid_w * grid_h:
        raise FingerCodeFormatError(f'expected {grid_w * grid_h} cells, found {len(seen)}', len(lines))
    return FingerCode(values, valid, cell_size)


def write_fingercode(code: FingerCode, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(format_fingercode(code))


def read_fingercode(path: str) -> FingerCode:
    with open(path, 'r', encoding='utf-8') as handle:
        return parse_fingercode(handle.read())


def is_fingercode_data(data: bytes) -> bool:
    return data[:3] == FINGERCODE_MAGIC.encode('ascii') + b' '
