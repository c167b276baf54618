"""Elastic minutiae matcher with a size-adaptive tolerance box.

Alignment tries every anchor pair (a, b); the transform that brings the
most B minutiae into the tolerance boxes of A minutiae wins. Matching then
pairs minutiae one-to-one and scores ``2 * matched / (|A| + |B|)``.

The box around an A minutia grows with its distance r from the alignment
centre: half-widths ``w0 + k*r`` and ``h0 + k*r``, axis-aligned in A's frame.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from models.minutia import MinutiaTemplate
from utils.geometry import RigidTransform, wrap_angles

logger = logging.getLogger(__name__)

ASSIGNMENTS = ('greedy', 'optimal')

# cost of a forbidden pairing in the optimal assignment
FORBIDDEN = 1e9


@dataclass(frozen=True)
class ToleranceBox:
    w0: float = 8.0
    h0: float = 8.0
    k: float = 0.05

    def __post_init__(self):
        if self.w0 < 0 or self.h0 < 0 or self.k < 0:
            raise ValueError('tolerance box parameters must be non-negative')

    def half_sizes(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        return self.w0 + self.k * r, self.h0 + self.k * r


@dataclass(frozen=True)
class ElasticConfig:
    w0: float = 8.0
    h0: float = 8.0
    k: float = 0.05
    angle_tol: float = 30.0
    assignment: str = 'greedy'

    def __post_init__(self):
        if self.angle_tol < 0:
            raise ValueError('angle_tol must be non-negative')
        if self.assignment not in ASSIGNMENTS:
            raise ValueError(f'assignment must be one of {ASSIGNMENTS}')
        ToleranceBox(self.w0, self.h0, self.k)

    @property
    def box(self) -> ToleranceBox:
        return ToleranceBox(self.w0, self.h0, self.k)


def _admissible(a: MinutiaTemplate, b: MinutiaTemplate, transform: RigidTransform,
                center: Tuple[float, float], cfg: ElasticConfig):
    """
    Admissibility matrix (|A| x |B|) of B minutiae mapped into A's frame, with
    the position residual of every pairing.
    """
    to_a = transform.inverse()
    a_xy = a.positions()
    b_xy = to_a.apply_points(b.positions())

    r = np.hypot(a_xy[:, 0] - center[0], a_xy[:, 1] - center[1])
    half_w, half_h = cfg.box.half_sizes(r)
    dx = np.abs(b_xy[None, :, 0] - a_xy[:, None, 0])
    dy = np.abs(b_xy[None, :, 1] - a_xy[:, None, 1])
    dtheta = np.abs(wrap_angles(b.directions()[None, :] - transform.rot - a.directions()[:, None]))

    inside = (dx <= half_w[:, None]) & (dy <= half_h[:, None]) & (dtheta <= cfg.angle_tol)
    residual = np.hypot(dx, dy)
    return inside, residual


def _assign(inside: np.ndarray, residual: np.ndarray, method: str) -> List[Tuple[int, int]]:
    rows, cols = np.nonzero(inside)
    if len(rows) == 0:
        return []

    if method == 'optimal':
        cost = np.where(inside, residual, FORBIDDEN)
        assigned_rows, assigned_cols = linear_sum_assignment(cost)
        return [(int(r), int(c)) for r, c in zip(assigned_rows, assigned_cols) if inside[r, c]]

    # greedy nearest-first
    order = np.lexsort((cols, rows, residual[rows, cols]))
    used_a, used_b = set(), set()
    pairs = []
    for index in order:
        r, c = int(rows[index]), int(cols[index])
        if r in used_a or c in used_b:
            continue
        used_a.add(r)
        used_b.add(c)
        pairs.append((r, c))
    return pairs


def count_matches(a: MinutiaTemplate, b: MinutiaTemplate, transform: RigidTransform,
                  center: Tuple[float, float], cfg: ElasticConfig = ElasticConfig()) -> List[Tuple[int, int]]:
    """One-to-one (a, b) index pairs under a fixed alignment"""
    if len(a) == 0 or len(b) == 0:
        return []
    inside, residual = _admissible(a, b, transform, center, cfg)
    return _assign(inside, residual, cfg.assignment)


def _anchor_transform(ax: float, ay: float, adir: float, bx: float, by: float, bdir: float) -> RigidTransform:
    """Rotation by the direction change, then translation taking a onto b"""
    rot = bdir - adir
    theta = math.radians(rot)
    c, s = math.cos(theta), math.sin(theta)
    return RigidTransform(bx - (c * ax - s * ay), by - (s * ax + c * ay), rot)


def _search_anchors(a: MinutiaTemplate, b: MinutiaTemplate,
                    cfg: ElasticConfig) -> Tuple[RigidTransform, Tuple[float, float]]:
    """Best anchor transform and its alignment centre (the A anchor)"""
    if len(a) == 0 or len(b) == 0:
        raise ValueError('alignment needs two nonempty templates')

    best: Optional[Tuple[Tuple[int, float], RigidTransform, Tuple[float, float]]] = None
    for ma in a:
        for mb in b:
            transform = _anchor_transform(ma.x, ma.y, ma.direction, mb.x, mb.y, mb.direction)
            center = (ma.x, ma.y)
            inside, residual = _admissible(a, b, transform, center, cfg)
            # any A box holding the B minutia counts; each B minutia counted once
            hit = inside.any(axis=0)
            count = int(hit.sum())
            if count == 0:
                continue
            mean_residual = float(np.where(inside, residual, np.inf).min(axis=0)[hit].mean())
            key = (-count, mean_residual)
            if best is None or key < best[0]:
                best = (key, transform, center)

    # the anchor pair itself always lands in its own box, so best is set
    return best[1], best[2]


def align_minutiae(a: MinutiaTemplate, b: MinutiaTemplate,
                   cfg: ElasticConfig = ElasticConfig()) -> RigidTransform:
    """
    Exhaustive anchor search: the transform mapping A onto B that puts the
    most B minutiae in A's tolerance boxes (ties: smallest mean residual,
    then first anchor)
    """
    return _search_anchors(a, b, cfg)[0]


def elastic_match(a: MinutiaTemplate, b: MinutiaTemplate, cfg: ElasticConfig = ElasticConfig()) -> float:
    """Edit-distance similarity 2n / (|A| + |B|) after alignment"""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    transform, center = _search_anchors(a, b, cfg)
    matched = count_matches(a, b, transform, center, cfg)
    score = 2.0 * len(matched) / (len(a) + len(b))
    logger.debug(f'Elastic match: {len(matched)} pairs, rot {transform.rot:.2f}, score {score:.4f}')
    return score
