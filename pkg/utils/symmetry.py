"""Orientation tensor, linear and parabolic symmetry, quality map and segmentation.

Fields are complex numpy arrays indexed ``[row, col]`` with the same shape as
the source image. Offsets inside filters use x = column and y = row, so a
complex value ``x + iy`` follows the image coordinate convention used by the
minutiae and the matchers.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from models.gray_image import GrayImage
from utils.errors import FieldShapeError, NoFingerprintAreaError
from utils.imageio import save_pgm

logger = logging.getLogger(__name__)

ComplexField = np.ndarray

# averaged |z| below this carries no orientation evidence
ZERO_ENERGY = 1e-10


@dataclass(frozen=True)
class FilterParams:
    sigma_deriv: float = 1.0
    sigma_avg: float = 4.0
    sigma_para: float = 3.0
    filter_order: int = 1

    def __post_init__(self):
        for name in ('sigma_deriv', 'sigma_avg', 'sigma_para'):
            if getattr(self, name) <= 0:
                raise ValueError(f'{name} must be positive')
        if self.filter_order not in (0, 1):
            raise ValueError(f'filter_order must be 0 or 1, got {self.filter_order}')


@dataclass(frozen=True)
class QualityThresholds:
    t_contrast: float = 8.0
    t_low: float = 0.3
    t_high: float = 0.5
    t_curvature: float = 30.0

    def __post_init__(self):
        if not 0 <= self.t_low < self.t_high <= 1:
            raise ValueError('quality thresholds require 0 <= t_low < t_high <= 1')


@dataclass(frozen=True)
class QualityMap:
    """Five-level block quality grid: 0 is background or worst, 4 is best"""
    block_size: int
    levels: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=np.int8)
        levels.setflags(write=False)
        object.__setattr__(self, 'levels', levels)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.levels.shape

    def level_at(self, x: float, y: float) -> int:
        row = min(max(int(y) // self.block_size, 0), self.levels.shape[0] - 1)
        col = min(max(int(x) // self.block_size, 0), self.levels.shape[1] - 1)
        return int(self.levels[row, col])


@dataclass(frozen=True)
class SymmetryFields:
    """Everything the minutiae detectors and the HH matcher need from one image"""
    image: GrayImage
    ls: ComplexField
    ps: ComplexField
    psi: ComplexField
    mask: np.ndarray
    quality: QualityMap


def _radius(sigma: float) -> int:
    return max(1, int(4.0 * sigma + 0.5))


@lru_cache(maxsize=32)
def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian sampled on [-4 sigma, 4 sigma]"""
    t = np.arange(-_radius(sigma), _radius(sigma) + 1, dtype=np.float64)
    kernel = np.exp(-t ** 2 / (2.0 * sigma ** 2))
    kernel /= kernel.sum()
    kernel.setflags(write=False)
    return kernel


@lru_cache(maxsize=32)
def gaussian_derivative_kernel(sigma: float) -> np.ndarray:
    """``t * g(t)`` scaled so that correlating with it estimates the first derivative"""
    t = np.arange(-_radius(sigma), _radius(sigma) + 1, dtype=np.float64)
    weighted = t * np.exp(-t ** 2 / (2.0 * sigma ** 2))
    kernel = weighted / np.sum(t * weighted)
    kernel.setflags(write=False)
    return kernel


@lru_cache(maxsize=32)
def _moment_kernel(sigma: float) -> np.ndarray:
    t = np.arange(-_radius(sigma), _radius(sigma) + 1, dtype=np.float64)
    kernel = t * gaussian_kernel(sigma)
    kernel.setflags(write=False)
    return kernel


@lru_cache(maxsize=32)
def _radial_kernel(sigma: float) -> np.ndarray:
    """|q| g(q) as a 2D kernel, the magnitude of h_1"""
    g = gaussian_kernel(sigma)
    t = np.arange(-_radius(sigma), _radius(sigma) + 1, dtype=np.float64)
    kernel = np.hypot(t[None, :], t[:, None]) * np.outer(g, g)
    kernel.setflags(write=False)
    return kernel


def separable_filter(values: np.ndarray, kernel_x: np.ndarray, kernel_y: np.ndarray) -> np.ndarray:
    """Correlate with ``outer(kernel_y, kernel_x)`` as two 1D passes (reflect borders)"""
    if np.iscomplexobj(values):
        return (separable_filter(values.real, kernel_x, kernel_y)
                + 1j * separable_filter(values.imag, kernel_x, kernel_y))
    rows = ndimage.correlate1d(np.asarray(values, dtype=np.float64), kernel_x, axis=1, mode='reflect')
    return ndimage.correlate1d(rows, kernel_y, axis=0, mode='reflect')


def orientation_tensor(image: GrayImage, params: FilterParams = FilterParams()) -> ComplexField:
    """z = (f_x + i f_y)^2 from Gaussian-derivative gradients"""
    image.require_pipeline_size()
    values = image.as_float()
    g = gaussian_kernel(params.sigma_deriv)
    dg = gaussian_derivative_kernel(params.sigma_deriv)
    fx = separable_filter(values, dg, g)
    fy = separable_filter(values, g, dg)
    return (fx + 1j * fy) ** 2


def linear_symmetry(z: ComplexField, params: FilterParams = FilterParams()) -> ComplexField:
    """Averaged z divided by averaged |z|; 0 where there is no gradient energy"""
    g = gaussian_kernel(params.sigma_avg)
    numerator = separable_filter(z, g, g)
    denominator = separable_filter(np.abs(z), g, g)

    ls = np.zeros_like(numerator)
    energetic = denominator > ZERO_ENERGY
    ls[energetic] = numerator[energetic] / denominator[energetic]
    magnitude = np.abs(ls)
    # rounding may push |LS| a hair above 1
    overshoot = magnitude > 1.0
    ls[overshoot] /= magnitude[overshoot]
    return ls


def parabolic_symmetry(z: ComplexField, params: FilterParams = FilterParams()) -> ComplexField:
    """
    Complex correlation of z with h_1 = (x + iy) g, normalized by the
    correlation of |z| with |h_1|.

    The normalization makes the ideal parabolic pattern respond with exactly 1
    and bounds |PS| by 1. The argument at a minutia is its direction.
    """
    if params.filter_order == 0:
        return linear_symmetry(z, params)

    g = gaussian_kernel(params.sigma_para)
    tg = _moment_kernel(params.sigma_para)
    # complex correlation conjugates the filter: sum z(p + q) (q_x - i q_y) g(q)
    numerator = separable_filter(z, tg, g) - 1j * separable_filter(z, g, tg)
    denominator = ndimage.correlate(np.abs(z), _radial_kernel(params.sigma_para), mode='reflect')

    ps = np.zeros_like(numerator)
    energetic = denominator > ZERO_ENERGY
    ps[energetic] = numerator[energetic] / denominator[energetic]
    magnitude = np.abs(ps)
    overshoot = magnitude > 1.0
    ps[overshoot] /= magnitude[overshoot]
    return ps


def inhibit(ps: ComplexField, ls: ComplexField) -> ComplexField:
    """PSi = PS * (1 - |LS|)"""
    if ps.shape != ls.shape:
        raise FieldShapeError(f'PS shape {ps.shape} does not match LS shape {ls.shape}')
    return ps * (1.0 - np.abs(ls))


def ridge_direction(ls: ComplexField) -> np.ndarray:
    """Ridge flow angle in radians, perpendicular to the gradient orientation arg(LS)/2"""
    return np.angle(ls) / 2.0 + math.pi / 2.0


def enhance(image: GrayImage, ls: ComplexField, sigma: float = 1.5) -> GrayImage:
    """One pass of 1D Gaussian smoothing along the local ridge direction"""
    values = image.as_float()
    height, width = values.shape
    direction = ridge_direction(ls)
    ux, uy = np.cos(direction), np.sin(direction)
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)

    weights = gaussian_kernel(sigma)
    radius = (len(weights) - 1) // 2
    smoothed = np.zeros_like(values)
    for step, weight in zip(range(-radius, radius + 1), weights):
        coords = np.array([rows + step * uy, cols + step * ux])
        smoothed += weight * ndimage.map_coordinates(values, coords, order=1, mode='reflect')

    return GrayImage(np.clip(np.rint(smoothed), 0, 255).astype(np.uint8), image.dpi)


def _block_slices(height: int, width: int, block_size: int):
    for row in range(math.ceil(height / block_size)):
        for col in range(math.ceil(width / block_size)):
            yield row, col, (slice(row * block_size, (row + 1) * block_size),
                             slice(col * block_size, (col + 1) * block_size))


def quality_map(image: GrayImage, ls: ComplexField, block_size: int = 16,
                thresholds: QualityThresholds = QualityThresholds(),
                mask: Optional[np.ndarray] = None) -> QualityMap:
    """
    Grade each block by contrast, ridge-flow coherence and curvature.

    Level 0 for background blocks (under half covered by ``mask``) or contrast
    below t_contrast; otherwise 4 minus one for coherence < t_high, one for
    curvature > t_curvature and one more for coherence < t_low.
    """
    if block_size < 8:
        raise ValueError(f'block_size must be at least 8, got {block_size}')

    values = image.as_float()
    height, width = values.shape
    grid = (math.ceil(height / block_size), math.ceil(width / block_size))
    contrast = np.zeros(grid)
    coherence = np.zeros(grid)
    mean_ls = np.zeros(grid, dtype=complex)
    foreground = np.ones(grid, dtype=bool)

    for row, col, block in _block_slices(height, width, block_size):
        contrast[row, col] = values[block].std()
        coherence[row, col] = np.abs(ls[block]).mean()
        mean_ls[row, col] = ls[block].mean()
        if mask is not None:
            foreground[row, col] = mask[block].mean() >= 0.5

    # doubled angles; the orientation difference is half the wrapped doubled difference
    doubled = np.degrees(np.angle(mean_ls))
    curvature = np.zeros(grid)
    padded = np.pad(doubled, 1, mode='constant', constant_values=np.nan)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            neighbour = padded[1 + dr:1 + dr + grid[0], 1 + dc:1 + dc + grid[1]]
            diff = np.abs(np.remainder(doubled - neighbour + 180.0, 360.0) - 180.0) / 2.0
            curvature = np.fmax(curvature, np.nan_to_num(diff, nan=0.0))

    levels = (4
              - (coherence < thresholds.t_high).astype(int)
              - (curvature > thresholds.t_curvature).astype(int)
              - (coherence < thresholds.t_low).astype(int))
    levels[(contrast < thresholds.t_contrast) | ~foreground] = 0
    return QualityMap(block_size, levels)


def segment(ls: ComplexField, threshold: float = 0.3) -> np.ndarray:
    """Foreground where |LS| >= threshold, reduced to the largest component with holes filled"""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f'segmentation threshold must be in [0, 1], got {threshold}')

    raw = np.abs(ls) >= threshold
    labels, count = ndimage.label(raw, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        raise NoFingerprintAreaError()

    sizes = ndimage.sum_labels(raw, labels, index=np.arange(1, count + 1))
    largest = labels == (int(np.argmax(sizes)) + 1)
    mask = ndimage.binary_fill_holes(largest)
    logger.debug(f'Segmented {int(mask.sum())} foreground pixels out of {mask.size}')
    return mask


def symmetry_fields(image: GrayImage, params: FilterParams = FilterParams(),
                    thresholds: QualityThresholds = QualityThresholds(),
                    segment_threshold: float = 0.3, quality_block: int = 16,
                    enhance_sigma: Optional[float] = None) -> SymmetryFields:
    """Run the full field computation; optionally enhance before recomputing LS"""
    image.require_pipeline_size()
    z = orientation_tensor(image, params)
    ls = linear_symmetry(z, params)
    if enhance_sigma:
        image = enhance(image, ls, enhance_sigma)
        z = orientation_tensor(image, params)
        ls = linear_symmetry(z, params)

    ps = parabolic_symmetry(z, params)
    psi = inhibit(ps, ls)
    mask = segment(ls, segment_threshold)
    quality = quality_map(image, ls, quality_block, thresholds, mask)
    return SymmetryFields(image, ls, ps, psi, mask, quality)


def dump_field(field: ComplexField, magnitude_path: str, argument_path: str) -> None:
    """Write magnitude (scaled to its maximum) and argument of a field as two PGMs"""
    magnitude = np.abs(field)
    peak = magnitude.max()
    scaled = magnitude / peak * 255.0 if peak > 0 else magnitude
    argument = (np.angle(field) + math.pi) / (2.0 * math.pi) * 255.0
    save_pgm(GrayImage(np.clip(np.rint(scaled), 0, 255).astype(np.uint8)), magnitude_path)
    save_pgm(GrayImage(np.clip(np.rint(argument), 0, 255).astype(np.uint8)), argument_path)
