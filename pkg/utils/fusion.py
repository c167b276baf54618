"""Score normalization into [0, 1] similarities and max/sum fusion"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Sequence

import numpy as np

from utils.errors import CalibrationError, LineFormatError, ScoreDomainError

logger = logging.getLogger(__name__)

MIN_CALIBRATION_SCORES = 10


class NormalizerKind(str, Enum):
    IDENTITY = 'identity'
    TANH_SIM = 'tanh_sim'
    EXP_DISSIM = 'exp_dissim'


class FusionRule(str, Enum):
    MAX = 'max'
    SUM = 'sum'


@dataclass(frozen=True)
class Normalizer:
    kind: NormalizerKind
    c: float = 1.0
    matcher_id: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'kind', NormalizerKind(self.kind))
        if self.kind is not NormalizerKind.IDENTITY and not self.c > 0:
            raise ValueError(f'normalizer scale must be positive, got {self.c}')

    def __call__(self, s: float) -> float:
        return normalize(s, self)

    def to_line(self) -> str:
        return f'NORM {self.matcher_id} {self.kind.value} {self.c!r}'

    def to_dict(self):
        return {'matcher': self.matcher_id, 'kind': self.kind.value, 'c': self.c}


# kind each matcher's raw score needs
MATCHER_NORMALIZERS: Dict[str, NormalizerKind] = {
    'hh': NormalizerKind.IDENTITY,
    'compat': NormalizerKind.TANH_SIM,
    'elastic': NormalizerKind.TANH_SIM,
    'ridge': NormalizerKind.EXP_DISSIM,
}


def calibrate_c(raw_scores: Sequence[float], kind: NormalizerKind) -> float:
    """
    Scale that sends the pooled median raw score to 0.5.

    Args:
        raw_scores: development scores of one matcher, genuine and impostor pooled
        kind: tanh_sim or exp_dissim

    Returns:
        float: c > 0
    """
    kind = NormalizerKind(kind)
    scores = np.asarray(list(raw_scores), dtype=np.float64)
    if len(scores) < MIN_CALIBRATION_SCORES:
        raise CalibrationError(
            f'insufficient calibration data: {len(scores)} scores, need {MIN_CALIBRATION_SCORES}'
        )
    if kind is NormalizerKind.IDENTITY:
        return 1.0
    if np.any(scores < 0):
        raise CalibrationError(f'{kind.value} calibration needs non-negative scores', 'INVALID_SCORE')

    scale = math.atanh(0.5) if kind is NormalizerKind.TANH_SIM else math.log(2.0)
    median = float(np.median(scores))
    if median > 0:
        return median / scale

    positive = scores[scores > 0]
    if len(positive) == 0:
        raise CalibrationError('all calibration scores are zero', 'ALL_ZERO_SCORES')
    logger.warning(f'Median {kind.value} score is 0; calibrating on the smallest positive score')
    return float(positive.min()) / math.log(2.0)


def normalize(s: float, n: Normalizer) -> float:
    if n.kind is NormalizerKind.IDENTITY:
        return float(s)
    if s < 0:
        raise ScoreDomainError(f'raw score {s} is negative for a {n.kind.value} normalizer')
    if n.kind is NormalizerKind.TANH_SIM:
        value = math.tanh(s / n.c)
    else:
        value = math.exp(-s / n.c)
    return min(1.0, max(0.0, value))


def fuse(scores: Sequence[float], rule: FusionRule) -> float:
    """Max rule takes the maximum, sum rule the arithmetic mean"""
    if len(scores) == 0:
        raise ValueError('cannot fuse an empty score list')
    for s in scores:
        if not 0.0 <= s <= 1.0:
            raise ScoreDomainError(f'fusion input {s} outside [0, 1]')
    if FusionRule(rule) is FusionRule.MAX:
        return float(max(scores))
    return float(math.fsum(scores) / len(scores))


def calibrate_normalizer(matcher_id: str, raw_scores: Iterable[float]) -> Normalizer:
    """Normalizer of the kind the matcher needs, calibrated on its pooled scores"""
    kind = MATCHER_NORMALIZERS.get(matcher_id)
    if kind is None:
        raise ValueError(f'unknown matcher {matcher_id}')
    if kind is NormalizerKind.IDENTITY:
        return Normalizer(kind, 1.0, matcher_id)
    c = calibrate_c(list(raw_scores), kind)
    logger.info(f'Calibrated {matcher_id} normalizer: {kind.value} c={c:.6f}')
    return Normalizer(kind, c, matcher_id)


def format_normalizers(normalizers: Iterable[Normalizer]) -> str:
    return ''.join(n.to_line() + '\n' for n in normalizers)


def parse_normalizers(text: str) -> Dict[str, Normalizer]:
    normalizers: Dict[str, Normalizer] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        fields = stripped.split()
        if len(fields) != 4 or fields[0] != 'NORM':
            raise LineFormatError('expected "NORM matcher kind c"', line_number, 'MALFORMED_NORMALIZER')
        try:
            normalizer = Normalizer(NormalizerKind(fields[2]), float(fields[3]), fields[1])
        except ValueError as e:
            raise LineFormatError(str(e), line_number, 'MALFORMED_NORMALIZER')
        normalizers[normalizer.matcher_id] = normalizer
    return normalizers


def write_normalizers(normalizers: List[Normalizer], path: str) -> None:
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(format_normalizers(normalizers))


def read_normalizers(path: str) -> Dict[str, Normalizer]:
    with open(path, 'r', encoding='utf-8') as handle:
        return parse_normalizers(handle.read())
