from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np


class TrialLabel(str, Enum):
    GENUINE = 'genuine'
    IMPOSTOR = 'impostor'


@dataclass(frozen=True)
class ScoreRecord:
    matcher_id: str
    template_id: str
    probe_id: str
    label: TrialLabel
    raw: float
    normalized: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'label', TrialLabel(self.label))
        if self.normalized is not None and not 0.0 <= self.normalized <= 1.0:
            raise ValueError(f'normalized score {self.normalized} outside [0, 1]')

    @property
    def trial_key(self) -> Tuple[str, str, str]:
        return self.template_id, self.probe_id, self.label.value

    @property
    def score(self) -> float:
        """Score used for rate computation: normalized when present"""
        return self.raw if self.normalized is None else self.normalized

    @property
    def is_genuine(self) -> bool:
        return self.label is TrialLabel.GENUINE

    def with_normalized(self, value: float) -> 'ScoreRecord':
        return replace(self, normalized=value)

    def to_dict(self):
        return {
            'matcher': self.matcher_id,
            'template_id': self.template_id,
            'probe_id': self.probe_id,
            'label': self.label.value,
            'raw': self.raw,
            'normalized': self.normalized
        }


@dataclass(frozen=True)
class RateCurve:
    """FMR/FNMR at ascending thresholds; FMR non-increasing, FNMR non-decreasing"""
    thresholds: np.ndarray
    fmr: np.ndarray
    fnmr: np.ndarray

    def __post_init__(self):
        for name in ('thresholds', 'fmr', 'fnmr'):
            array = np.array(getattr(self, name), dtype=np.float64)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if not (len(self.thresholds) == len(self.fmr) == len(self.fnmr)):
            raise ValueError('threshold and rate arrays must have equal length')

    def __len__(self):
        return len(self.thresholds)

    def rows(self):
        return zip(self.thresholds.tolist(), self.fmr.tolist(), self.fnmr.tolist())


@dataclass(frozen=True)
class FingerRoles:
    template: str
    impostor: str
    probes: Tuple[str, ...]


@dataclass(frozen=True)
class Protocol:
    """Per finger: the template impression, genuine probes and the impostor impression"""
    fingers: Dict[str, FingerRoles] = field(default_factory=dict)
    include_genuine: bool = True
    include_impostor: bool = True

    def __post_init__(self):
        for finger_id, roles in self.fingers.items():
            if roles.template in roles.probes:
                raise ValueError(f'finger {finger_id}: template {roles.template} listed as its own probe')

    def finger_ids(self):
        return sorted(self.fingers)
