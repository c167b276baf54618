from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, List, Tuple

import numpy as np

from utils.geometry import RigidTransform, normalize_direction


class MinutiaKind(str, Enum):
    TERMINATION = 'termination'
    BIFURCATION = 'bifurcation'
    UNKNOWN = 'unknown'

    @property
    def code(self) -> str:
        return {'termination': 'T', 'bifurcation': 'B', 'unknown': 'U'}[self.value]

    @classmethod
    def from_code(cls, code: str) -> 'MinutiaKind':
        mapping = {'T': cls.TERMINATION, 'B': cls.BIFURCATION, 'U': cls.UNKNOWN}
        return mapping[code]


class TemplateSource(str, Enum):
    SYMMETRY = 'symmetry'
    SKELETON = 'skeleton'


@dataclass(frozen=True)
class Minutia:
    x: float
    y: float
    direction: float
    kind: MinutiaKind = MinutiaKind.UNKNOWN
    quality: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'direction', normalize_direction(float(self.direction)))
        object.__setattr__(self, 'quality', float(min(1.0, max(0.0, self.quality))))

    def to_dict(self):
        return {
            'x': self.x,
            'y': self.y,
            'direction': self.direction,
            'kind': self.kind.value,
            'quality': self.quality
        }


@dataclass(frozen=True)
class MinutiaTemplate:
    """Ordered minutiae of one impression"""
    minutiae: Tuple[Minutia, ...]
    width: int
    height: int
    source: TemplateSource = TemplateSource.SYMMETRY

    def __post_init__(self):
        object.__setattr__(self, 'minutiae', tuple(self.minutiae))

    def __len__(self):
        return len(self.minutiae)

    def __iter__(self):
        return iter(self.minutiae)

    def __getitem__(self, index):
        return self.minutiae[index]

    def positions(self) -> np.ndarray:
        if not self.minutiae:
            return np.zeros((0, 2))
        return np.array([[m.x, m.y] for m in self.minutiae], dtype=float)

    def directions(self) -> np.ndarray:
        return np.array([m.direction for m in self.minutiae], dtype=float)

    def with_minutiae(self, minutiae: Iterable[Minutia]) -> 'MinutiaTemplate':
        return replace(self, minutiae=tuple(minutiae))

    def transformed(self, transform: RigidTransform) -> 'MinutiaTemplate':
        """Apply a rigid motion to every minutia (positions and directions)"""
        if not self.minutiae:
            return self
        moved = transform.apply_points(self.positions())
        return self.with_minutiae(
            replace(m, x=float(px), y=float(py), direction=m.direction + transform.rot)
            for m, (px, py) in zip(self.minutiae, moved)
        )

    def to_dict(self):
        return {
            'width': self.width,
            'height': self.height,
            'source': self.source.value,
            'count': len(self.minutiae),
            'minutiae': [m.to_dict() for m in self.minutiae]
        }


def template_from_points(points: List[Tuple[float, float, float]], width: int = 512, height: int = 512,
                         source: TemplateSource = TemplateSource.SKELETON,
                         kind: MinutiaKind = MinutiaKind.UNKNOWN) -> MinutiaTemplate:
    """Build a template from (x, y, direction) tuples"""
    return MinutiaTemplate(
        tuple(Minutia(x, y, d, kind) for x, y, d in points), width, height, source
    )
