from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from utils.errors import ImageSizeError

MIN_PIPELINE_SIZE = 16


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster; ``pixels[row, col]`` with shape (height, width)"""
    pixels: np.ndarray
    dpi: Optional[int] = None

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise ImageSizeError(f'expected a 2D raster, got shape {pixels.shape}')
        if pixels.dtype != np.uint8:
            pixels = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
        pixels = pixels.copy()
        pixels.setflags(write=False)
        object.__setattr__(self, 'pixels', pixels)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def require_pipeline_size(self) -> 'GrayImage':
        """Reject images smaller than the pipeline minimum"""
        if self.width < MIN_PIPELINE_SIZE or self.height < MIN_PIPELINE_SIZE:
            raise ImageSizeError(
                f'image {self.width}x{self.height} is smaller than '
                f'{MIN_PIPELINE_SIZE}x{MIN_PIPELINE_SIZE}'
            )
        return self

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.dpi == other.dpi and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.shape, self.pixels.tobytes(), self.dpi))

    def __repr__(self):
        return f'<GrayImage {self.width}x{self.height}>'


@dataclass(frozen=True)
class Dislocation:
    x: float
    y: float
    sign: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f'dislocation sign must be +1 or -1, got {self.sign}')


@dataclass(frozen=True)
class SyntheticSpec:
    """Phase-dislocation ridge model parameters"""
    width: int = 256
    height: int = 256
    ridge_frequency: float = 0.1
    base_orientation: float = 0.0
    dislocations: Tuple[Dislocation, ...] = ()
    noise_std: float = 0.0
    rng_seed: int = 0
    phase: float = 0.0
    name: str = 'print'
    # shape the pattern but lie outside the frame; never part of the ground truth
    outside_dislocations: Tuple[Dislocation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'dislocations', tuple(self.dislocations))
        object.__setattr__(self, 'outside_dislocations', tuple(self.outside_dislocations))
        if not 0.0 < self.ridge_frequency <= 0.25:
            raise ValueError(f'ridge_frequency must be in (0, 0.25], got {self.ridge_frequency}')
        if self.width < 1 or self.height < 1:
            raise ValueError('image dimensions must be positive')
        if self.noise_std < 0:
            raise ValueError('noise_std must be non-negative')
        for d in self.dislocations:
            if not (0 <= d.x <= self.width - 1 and 0 <= d.y <= self.height - 1):
                raise ValueError(f'dislocation ({d.x}, {d.y}) lies outside the image')


@dataclass(frozen=True)
class GroundTruth:
    """Planted minutiae, one (x, y, direction) entry per dislocation"""
    minutiae: Tuple[Tuple[float, float, float], ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.minutiae)

    def positions(self) -> np.ndarray:
        if not self.minutiae:
            return np.zeros((0, 2))
        return np.array([[x, y] for x, y, _ in self.minutiae], dtype=float)
