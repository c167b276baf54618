from dataclasses import dataclass

import numpy as np

ORIENTATION_COUNT = 8


@dataclass(frozen=True)
class FingerCode:
    """Per-cell, per-orientation Gabor response statistics over a square tessellation.

    ``values`` has shape (grid_h, grid_w, 8); ``valid`` has shape (grid_h, grid_w).
    Invalid cells carry zeros.
    """
    values: np.ndarray
    valid: np.ndarray
    cell_size: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if values.ndim != 3 or values.shape[:2] != valid.shape:
            raise ValueError(f'values {values.shape} and validity {valid.shape} disagree')
        values[~valid] = 0.0
        values.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'valid', valid)

    @property
    def grid_h(self) -> int:
        return int(self.valid.shape[0])

    @property
    def grid_w(self) -> int:
        return int(self.valid.shape[1])

    @property
    def orientation_count(self) -> int:
        return int(self.values.shape[2])

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    def __eq__(self, other):
        if not isinstance(other, FingerCode):
            return NotImplemented
        return (self.cell_size == other.cell_size
                and np.array_equal(self.valid, other.valid)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.cell_size, self.valid.tobytes(), self.values.tobytes()))


@dataclass(frozen=True)
class AlignmentOffset:
    """Cell offset such that cell c of A corresponds to cell c + (dx, dy) of B"""
    dx: int
    dy: int

    def to_dict(self):
        return {'dx': self.dx, 'dy': self.dy}
