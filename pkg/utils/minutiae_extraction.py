"""Minutiae detectors.

Two routes to a MinutiaTemplate:

* the symmetry detector, peaks of the inhibited parabolic symmetry |PSi|
  surrounded by strong linear symmetry;
* the skeleton detector, crossing numbers on a thinned binarized image
  followed by false-minutiae removal and quality assessment.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Set, Tuple

import numpy as np
from scipy import ndimage
from skimage.morphology import thin as skimage_thin

from models.gray_image import GrayImage
from models.minutia import Minutia, MinutiaKind, MinutiaTemplate, TemplateSource
from utils.errors import NoFingerprintAreaError
from utils.geometry import normalize_direction, wrap_angle
from utils.symmetry import ComplexField, QualityMap, SymmetryFields, ridge_direction

logger = logging.getLogger(__name__)

# clockwise 8-neighbourhood starting east, as (drow, dcol)
NEIGHBOUR_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))

RING_SAMPLES = 32
MERGE_RADIUS = 2.0
TRACE_LENGTH = 10
QUALITY_WINDOW = 11


@dataclass(frozen=True)
class ExtractionConfig:
    nms_window: int = 9
    surround_radius: float = 8.0
    surround_ls_min: float = 0.4
    max_minutiae: int = 60
    psi_min: float = 0.02
    binarization_block: int = 16
    spur_max_len: int = 8
    lake_max_perimeter: int = 30
    min_separation: float = 6.0

    def __post_init__(self):
        if self.nms_window < 3 or self.nms_window % 2 == 0:
            raise ValueError(f'nms_window must be odd and at least 3, got {self.nms_window}')
        if self.max_minutiae < 1:
            raise ValueError('max_minutiae must be positive')


def _ring_passes(ls_magnitude: np.ndarray, x: float, y: float, cfg: ExtractionConfig) -> bool:
    """Full-surround test: every ring sample inside the image with |LS| >= surround_ls_min"""
    height, width = ls_magnitude.shape
    angles = np.linspace(0.0, 2.0 * math.pi, RING_SAMPLES, endpoint=False)
    xs = x + cfg.surround_radius * np.cos(angles)
    ys = y + cfg.surround_radius * np.sin(angles)
    if xs.min() < 0 or ys.min() < 0 or xs.max() > width - 1 or ys.max() > height - 1:
        return False
    ring = ndimage.map_coordinates(ls_magnitude, [ys, xs], order=1)
    return bool(ring.min() >= cfg.surround_ls_min)


def _subpixel_offset(before: float, centre: float, after: float) -> float:
    """Vertex of the parabola through three samples, clamped to half a pixel"""
    curvature = before - 2.0 * centre + after
    if curvature >= 0:
        return 0.0
    return float(np.clip(0.5 * (before - after) / curvature, -0.5, 0.5))


def detect_minutiae_symmetry(psi: ComplexField, ls: ComplexField, mask: np.ndarray,
                             cfg: ExtractionConfig = ExtractionConfig()) -> MinutiaTemplate:
    """
    Local maxima of |PSi| inside the mask with a full surround of linear symmetry

    Args:
        psi: Inhibited parabolic symmetry
        ls: Linear symmetry of the same image
        mask: Foreground mask
        cfg: Extraction configuration

    Returns:
        Template ordered by descending |PSi|, at most cfg.max_minutiae long
    """
    if not mask.any():
        raise NoFingerprintAreaError()

    height, width = psi.shape
    magnitude = np.abs(psi)
    ls_magnitude = np.abs(ls)
    peaks = ((magnitude == ndimage.maximum_filter(magnitude, size=cfg.nms_window, mode='constant'))
             & (magnitude >= cfg.psi_min) & mask)

    rows, cols = np.nonzero(peaks)
    order = np.lexsort((cols, rows, -magnitude[rows, cols]))

    accepted: List[Minutia] = []
    suppression = cfg.nms_window / 2.0
    for index in order:
        row, col = int(rows[index]), int(cols[index])
        dx = dy = 0.0
        if 0 < col < width - 1:
            dx = _subpixel_offset(magnitude[row, col - 1], magnitude[row, col], magnitude[row, col + 1])
        if 0 < row < height - 1:
            dy = _subpixel_offset(magnitude[row - 1, col], magnitude[row, col], magnitude[row + 1, col])
        x, y = col + dx, row + dy

        if any(math.hypot(x - m.x, y - m.y) <= suppression for m in accepted):
            continue
        if not _ring_passes(ls_magnitude, x, y, cfg):
            continue

        value = psi[row, col]
        accepted.append(Minutia(
            x, y, math.degrees(math.atan2(value.imag, value.real)),
            MinutiaKind.UNKNOWN, min(1.0, float(magnitude[row, col]))
        ))
        if len(accepted) == cfg.max_minutiae:
            break

    logger.debug(f'Symmetry detector kept {len(accepted)} of {len(rows)} peaks')
    return MinutiaTemplate(tuple(accepted), width, height, TemplateSource.SYMMETRY)


def binarize(image: GrayImage, mask: Optional[np.ndarray] = None,
             cfg: ExtractionConfig = ExtractionConfig()) -> np.ndarray:
    """Ridge (True) where the pixel is darker than its local mean; background outside the mask"""
    values = image.as_float()
    local_mean = ndimage.uniform_filter(values, size=cfg.binarization_block, mode='reflect')
    ridges = values < local_mean
    if mask is not None:
        ridges &= mask
    return ridges


def thin(binary: np.ndarray) -> np.ndarray:
    """One-pixel-wide 8-connected skeleton; repeated until nothing changes"""
    skeleton = skimage_thin(np.asarray(binary, dtype=bool))
    while True:
        again = skimage_thin(skeleton)
        if np.array_equal(again, skeleton):
            return skeleton
        skeleton = again


def crossing_numbers(skeleton: np.ndarray) -> np.ndarray:
    """Crossing number of every skeleton pixel (0 elsewhere)"""
    padded = np.pad(np.asarray(skeleton, dtype=np.int8), 1)
    height, width = skeleton.shape
    ring = [padded[1 + dr:1 + dr + height, 1 + dc:1 + dc + width] for dr, dc in NEIGHBOUR_OFFSETS]
    transitions = sum(np.abs(ring[i] - ring[(i + 1) % 8]) for i in range(8))
    return np.where(skeleton, transitions // 2, 0)


def _neighbours(skeleton: np.ndarray, row: int, col: int) -> List[Tuple[int, int]]:
    height, width = skeleton.shape
    found = []
    for dr, dc in NEIGHBOUR_OFFSETS:
        r, c = row + dr, col + dc
        if 0 <= r < height and 0 <= c < width and skeleton[r, c]:
            found.append((r, c))
    return found


def trace_branch(skeleton: np.ndarray, start: Tuple[int, int], first: Tuple[int, int],
                 max_len: int, blocked: Optional[Set[Tuple[int, int]]] = None) -> Tuple[List[Tuple[int, int]], str]:
    """
    Walk along the skeleton from ``start`` through ``first``.

    Returns the visited path (excluding ``start``) and why the walk stopped:
    'junction' (more than one way on), 'end' (dead end) or 'length'.
    """
    visited = {start} | (blocked or set())
    path = [first]
    visited.add(first)
    current = first
    while len(path) < max_len:
        options = [p for p in _neighbours(skeleton, *current) if p not in visited]
        if not options:
            return path, 'end'
        if len(options) > 1:
            # two options touching each other are one way on
            if len(options) > 2 or max(abs(options[0][0] - options[1][0]),
                                       abs(options[0][1] - options[1][1])) > 1:
                return path, 'junction'
            options = sorted(options, key=lambda p: abs(p[0] - current[0]) + abs(p[1] - current[1]))
        current = options[0]
        visited.add(current)
        path.append(current)
    return path, 'length'


def _branch_starts(skeleton: np.ndarray, row: int, col: int) -> List[Tuple[int, int]]:
    """One neighbour per connected run of the 8-neighbourhood ring"""
    height, width = skeleton.shape

    def on(index):
        dr, dc = NEIGHBOUR_OFFSETS[index % 8]
        r, c = row + dr, col + dc
        return 0 <= r < height and 0 <= c < width and bool(skeleton[r, c])

    starts = []
    for index in range(8):
        if on(index) and not on(index - 1):
            run = [index]
            while on(run[-1] + 1) and len(run) < 8:
                run.append(run[-1] + 1)
            # prefer the 4-connected member of the run
            chosen = next((i for i in run if NEIGHBOUR_OFFSETS[i % 8][0] == 0 or NEIGHBOUR_OFFSETS[i % 8][1] == 0), run[0])
            dr, dc = NEIGHBOUR_OFFSETS[chosen % 8]
            starts.append((row + dr, col + dc))
    return starts


def _branch_vector(skeleton: np.ndarray, row: int, col: int) -> Optional[np.ndarray]:
    """Sum of unit vectors towards the traced end of every branch, in (x, y)"""
    starts = _branch_starts(skeleton, row, col)
    total = np.zeros(2)
    for start in starts:
        blocked = set(starts) - {start}
        path, _ = trace_branch(skeleton, (row, col), start, TRACE_LENGTH, blocked)
        end_row, end_col = path[-1]
        vector = np.array([end_col - col, end_row - row], dtype=float)
        norm = np.hypot(*vector)
        if norm > 0:
            total += vector / norm
    if np.hypot(*total) < 1e-9:
        return None
    return total


def detect_minutiae_skeleton(skeleton: np.ndarray, ls: ComplexField,
                             cfg: ExtractionConfig = ExtractionConfig()) -> MinutiaTemplate:
    """
    Crossing-number candidates: CN = 1 is a termination, CN >= 3 a bifurcation.

    Direction is the ridge orientation at the point, turned towards the ridge
    continuation (the traced branches).
    """
    height, width = skeleton.shape
    cn = crossing_numbers(skeleton)
    orientation = np.degrees(ridge_direction(ls))
    ls_magnitude = np.abs(ls)

    candidates: List[Minutia] = []
    rows, cols = np.nonzero((cn == 1) | (cn >= 3))
    for row, col in zip(rows.tolist(), cols.tolist()):
        kind = MinutiaKind.TERMINATION if cn[row, col] == 1 else MinutiaKind.BIFURCATION
        if any(m.kind is kind and math.hypot(m.x - col, m.y - row) <= MERGE_RADIUS for m in candidates):
            continue

        vector = _branch_vector(skeleton, row, col)
        flow = float(orientation[row, col])
        if vector is None:
            direction = flow
        else:
            traced = math.degrees(math.atan2(vector[1], vector[0]))
            if ls_magnitude[row, col] < 1e-6:
                direction = traced
            elif abs(wrap_angle(flow - traced)) <= 90.0:
                direction = flow
            else:
                direction = flow + 180.0
        candidates.append(Minutia(float(col), float(row), normalize_direction(direction), kind, 1.0))

    logger.debug(f'Crossing numbers gave {len(candidates)} candidates')
    return MinutiaTemplate(tuple(candidates), width, height, TemplateSource.SKELETON)


def _drop_low_quality(minutiae: List[Minutia], qmap: QualityMap) -> List[Minutia]:
    return [m for m in minutiae if qmap.level_at(m.x, m.y) > 1]


def _drop_facing_terminations(minutiae: List[Minutia], cfg: ExtractionConfig) -> List[Minutia]:
    """Broken ridges and bridges: close termination pairs pointing in opposite directions"""
    removed = set()
    terminations = [i for i, m in enumerate(minutiae) if m.kind is MinutiaKind.TERMINATION]
    for a_index, i in enumerate(terminations):
        for j in terminations[a_index + 1:]:
            a, b = minutiae[i], minutiae[j]
            if (math.hypot(a.x - b.x, a.y - b.y) < cfg.min_separation
                    and abs(wrap_angle(a.direction - b.direction)) >= 135.0):
                removed.update((i, j))
    return [m for i, m in enumerate(minutiae) if i not in removed]


def _drop_spurs(minutiae: List[Minutia], skeleton: np.ndarray, cfg: ExtractionConfig) -> List[Minutia]:
    """Short branches ending in a junction (spurs) or nowhere (islands)"""
    removed = set()
    for i, m in enumerate(minutiae):
        if m.kind is not MinutiaKind.TERMINATION:
            continue
        row, col = int(round(m.y)), int(round(m.x))
        if not skeleton[row, col]:
            continue
        starts = _neighbours(skeleton, row, col)
        if not starts:
            removed.add(i)
            continue
        path, reason = trace_branch(skeleton, (row, col), starts[0], cfg.spur_max_len)
        if reason == 'end':
            removed.add(i)
        elif reason == 'junction':
            removed.add(i)
            junction_row, junction_col = path[-1]
            for j, other in enumerate(minutiae):
                if (other.kind is MinutiaKind.BIFURCATION
                        and math.hypot(other.x - junction_col, other.y - junction_row) <= MERGE_RADIUS + 1):
                    removed.add(j)
    return [m for i, m in enumerate(minutiae) if i not in removed]


def _drop_lakes(minutiae: List[Minutia], skeleton: np.ndarray, cfg: ExtractionConfig) -> List[Minutia]:
    """Minutiae on the rim of small enclosed holes (lakes)"""
    holes, count = ndimage.label(~skeleton)
    if count == 0:
        return minutiae

    border_labels = set(np.unique(np.concatenate([
        holes[0, :], holes[-1, :], holes[:, 0], holes[:, -1]
    ])).tolist())
    rim = np.zeros_like(skeleton, dtype=bool)
    for label in range(1, count + 1):
        if label in border_labels:
            continue
        hole = holes == label
        boundary = ndimage.binary_dilation(hole, structure=np.ones((3, 3), dtype=bool)) & skeleton
        if boundary.sum() < cfg.lake_max_perimeter:
            rim |= boundary

    if not rim.any():
        return minutiae
    distance = ndimage.distance_transform_edt(~rim)
    return [m for m in minutiae if distance[int(round(m.y)), int(round(m.x))] > MERGE_RADIUS]


def _drop_border(minutiae: List[Minutia], mask: np.ndarray, cfg: ExtractionConfig) -> List[Minutia]:
    distance = ndimage.distance_transform_edt(np.pad(mask, 1))[1:-1, 1:-1]
    return [m for m in minutiae if distance[int(round(m.y)), int(round(m.x))] >= cfg.surround_radius]


def remove_false_minutiae(candidates: MinutiaTemplate, skeleton: np.ndarray, qmap: QualityMap,
                          cfg: ExtractionConfig = ExtractionConfig(),
                          mask: Optional[np.ndarray] = None) -> MinutiaTemplate:
    """
    Remove, in order: minutiae in quality level 0/1 blocks, facing termination
    pairs, spurs and islands, minutiae on small lakes and minutiae near the
    foreground edge (the image frame when no mask is given).
    """
    if mask is None:
        mask = np.ones(skeleton.shape, dtype=bool)

    survivors = _drop_low_quality(list(candidates), qmap)
    survivors = _drop_facing_terminations(survivors, cfg)
    survivors = _drop_spurs(survivors, skeleton, cfg)
    survivors = _drop_lakes(survivors, skeleton, cfg)
    survivors = _drop_border(survivors, mask, cfg)

    logger.debug(f'False-minutiae removal kept {len(survivors)} of {len(candidates)}')
    return candidates.with_minutiae(survivors)


def assess_minutia_quality(minutia: Minutia, image: GrayImage, qmap: QualityMap) -> float:
    """0.5 * level / 4 + 0.5 * min(1, std / 64) over the 11x11 neighbourhood"""
    half = QUALITY_WINDOW // 2
    row, col = int(round(minutia.y)), int(round(minutia.x))
    window = image.pixels[max(0, row - half):row + half + 1, max(0, col - half):col + half + 1]
    contrast_score = min(1.0, float(window.astype(np.float64).std()) / 64.0)
    return 0.5 * qmap.level_at(minutia.x, minutia.y) / 4.0 + 0.5 * contrast_score


def extract_symmetry_template(fields: SymmetryFields,
                              cfg: ExtractionConfig = ExtractionConfig()) -> MinutiaTemplate:
    return detect_minutiae_symmetry(fields.psi, fields.ls, fields.mask, cfg)


def extract_skeleton_template(fields: SymmetryFields,
                              cfg: ExtractionConfig = ExtractionConfig()) -> MinutiaTemplate:
    """Binarize, thin, detect, clean and grade; keeps the best cfg.max_minutiae"""
    skeleton = thin(binarize(fields.image, fields.mask, cfg))
    candidates = detect_minutiae_skeleton(skeleton, fields.ls, cfg)
    cleaned = remove_false_minutiae(candidates, skeleton, fields.quality, cfg, fields.mask)

    graded = [
        Minutia(m.x, m.y, m.direction, m.kind, assess_minutia_quality(m, fields.image, fields.quality))
        for m in cleaned
    ]
    graded.sort(key=lambda m: (-m.quality, m.y, m.x))
    return cleaned.with_minutiae(graded[:cfg.max_minutiae])
