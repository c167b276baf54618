"""Angle and rigid-motion helpers shared by the three minutiae matchers.

Coordinates are image coordinates (x = column, y = row, y pointing down);
angles are degrees measured with ``atan2(dy, dx)`` in that frame, so a
rotation by ``rot`` adds ``rot`` to every direction and every bearing.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np


def wrap_angle(angle: float) -> float:
    """Wrap an angle in degrees to (-180, 180]"""
    wrapped = math.remainder(angle, 360.0)
    if wrapped <= -180.0:
        wrapped += 360.0
    return wrapped


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorized wrap_angle"""
    wrapped = np.remainder(np.asarray(angles, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(wrapped <= -180.0, wrapped + 360.0, wrapped)


def normalize_direction(angle: float) -> float:
    """Map an angle in degrees to [0, 360)"""
    direction = angle % 360.0
    return 0.0 if direction >= 360.0 else direction


def bearing(x0: float, y0: float, x1: float, y1: float) -> float:
    """Angle of the vector from (x0, y0) to (x1, y1), in degrees"""
    return math.degrees(math.atan2(y1 - y0, x1 - x0))


def circular_mean(angles_deg: np.ndarray) -> float:
    """Circular mean of a set of angles in degrees, wrapped to (-180, 180]"""
    radians = np.radians(np.asarray(angles_deg, dtype=float))
    return wrap_angle(math.degrees(math.atan2(np.sin(radians).sum(), np.cos(radians).sum())))


@dataclass(frozen=True)
class RigidTransform:
    """Translation plus rotation mapping A-coordinates onto B-coordinates.

    ``apply(p) = R(rot) @ p + (dx, dy)``; directions gain ``rot``.
    """
    dx: float = 0.0
    dy: float = 0.0
    rot: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'rot', wrap_angle(self.rot))

    @classmethod
    def identity(cls) -> 'RigidTransform':
        return cls(0.0, 0.0, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        theta = math.radians(self.rot)
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s], [s, c]])

    def apply_points(self, xy: np.ndarray) -> np.ndarray:
        """Transform an (N, 2) array of points"""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return xy @ self.matrix.T + np.array([self.dx, self.dy])

    def apply_point(self, x: float, y: float) -> Tuple[float, float]:
        px, py = self.apply_points(np.array([[x, y]]))[0]
        return float(px), float(py)

    def inverse(self) -> 'RigidTransform':
        rot_inv = self.matrix.T
        dx, dy = -(rot_inv @ np.array([self.dx, self.dy]))
        return RigidTransform(float(dx), float(dy), -self.rot)

    @classmethod
    def about_point(cls, rot: float, cx: float, cy: float, tx: float = 0.0, ty: float = 0.0) -> 'RigidTransform':
        """Rotation by ``rot`` about (cx, cy) followed by translation (tx, ty)"""
        theta = math.radians(rot)
        c, s = math.cos(theta), math.sin(theta)
        dx = cx - (c * cx - s * cy) + tx
        dy = cy - (s * cx + c * cy) + ty
        return cls(dx, dy, rot)

    def to_dict(self):
        return {'dx': self.dx, 'dy': self.dy, 'rot': self.rot}
