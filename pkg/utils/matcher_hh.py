"""Triangular minutiae pairing, rigid alignment and LS-area correlation.

Pipeline: corresponding couples (pairs of minutiae whose distance and
relative angles agree across prints) are grown into triangles; the best
supported couple fixes a rigid transform; the score is the mean normalized
correlation of linear-symmetry patches around the minutiae of A.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

import numpy as np
from scipy import ndimage

from models.minutia import Minutia, MinutiaTemplate
from utils.errors import AlignmentError, CoincidentMinutiaeError, NoConsistentPairingError
from utils.geometry import RigidTransform, bearing, circular_mean, wrap_angle, wrap_angles
from utils.symmetry import ComplexField

logger = logging.getLogger(__name__)

# pair comparisons evaluated per vectorized chunk
COUPLE_CHUNK = 256

PATCH_SIMILARITIES = ('magnitude', 'real')


@dataclass(frozen=True)
class HHConfig:
    lambda_dist: float = 8.0
    lambda_angle: float = 20.0
    gamma_tol: float = 15.0
    area_half: int = 10
    ls_area_min: float = 0.4
    patch_similarity: str = 'magnitude'

    def __post_init__(self):
        for name in ('lambda_dist', 'lambda_angle', 'gamma_tol', 'area_half', 'ls_area_min'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be non-negative')
        if self.patch_similarity not in PATCH_SIMILARITIES:
            raise ValueError(f'patch_similarity must be one of {PATCH_SIMILARITIES}')


@dataclass(frozen=True)
class PairAttributes:
    d: float
    alpha_ij: float
    alpha_ji: float


@dataclass(frozen=True, order=True)
class Couple:
    """Pair (i, j) of A corresponding to pair (k, l) of B"""
    i: int
    j: int
    k: int
    l: int
    residual: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class PairingList:
    """Reference couple plus mated neighbours; ``pairs[0]`` is the first minutia pair"""
    reference: Couple
    pairs: Tuple[Tuple[int, int], ...]

    def __len__(self):
        return len(self.pairs)

    def to_dict(self):
        return {
            'reference': [self.reference.i, self.reference.j, self.reference.k, self.reference.l],
            'pairs': [list(p) for p in self.pairs]
        }


@dataclass(frozen=True)
class HHFeatures:
    """What the HH matcher needs from one impression"""
    template: MinutiaTemplate
    ls: ComplexField


def pair_attributes(m_i: Minutia, m_j: Minutia) -> PairAttributes:
    """Distance and signed angles of each minutia's direction against the joining line"""
    d = math.hypot(m_j.x - m_i.x, m_j.y - m_i.y)
    if d == 0.0:
        raise CoincidentMinutiaeError(f'pair attributes are undefined for coincident minutiae at ({m_i.x}, {m_i.y})')
    alpha_ij = wrap_angle(m_i.direction - bearing(m_i.x, m_i.y, m_j.x, m_j.y))
    alpha_ji = wrap_angle(m_j.direction - bearing(m_j.x, m_j.y, m_i.x, m_i.y))
    return PairAttributes(d, alpha_ij, alpha_ji)


def _pair_tables(template: MinutiaTemplate, ordered: bool):
    """Vectorized ``pair_attributes`` over index pairs; coincident minutiae are left out"""
    n = len(template)
    if ordered:
        first, second = np.nonzero(~np.eye(n, dtype=bool))
    else:
        first, second = np.triu_indices(n, k=1)
    xy = template.positions()
    directions = template.directions()
    delta = xy[second] - xy[first]
    d = np.hypot(delta[:, 0], delta[:, 1])
    distinct = d > 0.0
    if not distinct.all():
        logger.debug(f'Skipping {int((~distinct).sum())} coincident minutia pairs')
        first, second, delta, d = first[distinct], second[distinct], delta[distinct], d[distinct]
    line = np.degrees(np.arctan2(delta[:, 1], delta[:, 0]))
    alpha_first = wrap_angles(directions[first] - line)
    alpha_second = wrap_angles(directions[second] - (line + 180.0))
    return first, second, d, alpha_first, alpha_second


def corresponding_couples(a: MinutiaTemplate, b: MinutiaTemplate, cfg: HHConfig = HHConfig()) -> List[Couple]:
    """
    Every (i, j, k, l) with |d_ij - d_kl| < lambda_dist and
    |alpha_ij - alpha_kl| + |alpha_ji - alpha_lk| < lambda_angle (wrapped)
    """
    if len(a) < 2 or len(b) < 2:
        return []

    a_i, a_j, a_d, a_first, a_second = _pair_tables(a, ordered=False)
    b_k, b_l, b_d, b_first, b_second = _pair_tables(b, ordered=True)

    couples: List[Couple] = []
    for start in range(0, len(a_i), COUPLE_CHUNK):
        chunk = slice(start, start + COUPLE_CHUNK)
        dist_residual = np.abs(a_d[chunk, None] - b_d[None, :])
        angle_residual = (np.abs(wrap_angles(a_first[chunk, None] - b_first[None, :]))
                          + np.abs(wrap_angles(a_second[chunk, None] - b_second[None, :])))
        rows, cols = np.nonzero((dist_residual < cfg.lambda_dist) & (angle_residual < cfg.lambda_angle))
        residual = dist_residual[rows, cols] + angle_residual[rows, cols]
        for row, col, res in zip(rows.tolist(), cols.tolist(), residual.tolist()):
            i, j = int(a_i[start + row]), int(a_j[start + row])
            k, l = int(b_k[col]), int(b_l[col])
            couples.append(Couple(i, j, k, l, res))
            couples.append(Couple(j, i, l, k, res))

    couples.sort()
    logger.debug(f'{len(couples)} corresponding couples for {len(a)}x{len(b)} minutiae')
    return couples


def _corner_angle(template: MinutiaTemplate, apex: int, first: int, second: int) -> float:
    """Signed angle at ``apex`` from the ray towards ``first`` to the ray towards ``second``"""
    p, q, r = template[apex], template[first], template[second]
    return wrap_angle(bearing(p.x, p.y, r.x, r.y) - bearing(p.x, p.y, q.x, q.y))


def grow_triangles(couples: List[Couple], a: MinutiaTemplate, b: MinutiaTemplate,
                   cfg: HHConfig = HHConfig()) -> PairingList:
    """
    For every reference couple (i, j, k, l) count the minutiae o, p forming
    corresponding couples with both ends and agreeing closing angles; keep the
    reference with the most one-to-one neighbours (ties: smallest residual).
    """
    neighbours: Dict[Tuple[int, int], Dict[Tuple[int, int], float]] = defaultdict(dict)
    for c in couples:
        neighbours[(c.i, c.k)][(c.j, c.l)] = c.residual

    best = None
    for ref in couples:
        from_first = neighbours[(ref.i, ref.k)]
        from_second = neighbours[(ref.j, ref.l)]
        shared: Set[Tuple[int, int]] = set(from_first) & set(from_second)

        scored = []
        for o, p in shared:
            if o in (ref.i, ref.j) or p in (ref.k, ref.l):
                continue
            gamma_1 = abs(wrap_angle(_corner_angle(a, o, ref.i, ref.j) - _corner_angle(b, p, ref.k, ref.l)))
            gamma_2 = abs(wrap_angle(_corner_angle(a, ref.i, ref.j, o) - _corner_angle(b, ref.k, ref.l, p)))
            if gamma_1 <= cfg.gamma_tol and gamma_2 <= cfg.gamma_tol:
                scored.append((from_first[(o, p)] + from_second[(o, p)] + gamma_1 + gamma_2, o, p))

        scored.sort()
        used_a, used_b = {ref.i, ref.j}, {ref.k, ref.l}
        mates = []
        for _, o, p in scored:
            if o in used_a or p in used_b:
                continue
            used_a.add(o)
            used_b.add(p)
            mates.append((o, p))

        key = (-len(mates), ref.residual, (ref.i, ref.j, ref.k, ref.l))
        if mates and (best is None or key < best[0]):
            best = (key, ref, mates)

    if best is None:
        raise NoConsistentPairingError()

    _, ref, mates = best
    pairs = ((ref.i, ref.k), (ref.j, ref.l)) + tuple(mates)
    logger.debug(f'Reference couple {ref.i},{ref.j} -> {ref.k},{ref.l} with {len(mates)} neighbours')
    return PairingList(ref, pairs)


def estimate_alignment(pairing: PairingList, a: MinutiaTemplate, b: MinutiaTemplate) -> RigidTransform:
    """
    Rigid transform mapping A onto B: rotation is the circular mean of the
    angle change of the vectors from the first pair to every other pair;
    translation takes A's first minutia onto B's.
    """
    if len(pairing) < 2:
        raise AlignmentError(f'pairing of size {len(pairing)} cannot fix a rotation')

    a0, b0 = pairing.pairs[0]
    ma0, mb0 = a[a0], b[b0]
    changes = [
        bearing(mb0.x, mb0.y, b[pb].x, b[pb].y) - bearing(ma0.x, ma0.y, a[pa].x, a[pa].y)
        for pa, pb in pairing.pairs[1:]
    ]
    rot = circular_mean(np.array(changes))
    rotated = RigidTransform(0.0, 0.0, rot).apply_point(ma0.x, ma0.y)
    return RigidTransform(mb0.x - rotated[0], mb0.y - rotated[1], rot)


def _patch_offsets(half: int) -> np.ndarray:
    steps = np.arange(-half, half + 1, dtype=float)
    ys, xs = np.meshgrid(steps, steps, indexing='ij')
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def _sample(field: ComplexField, xy: np.ndarray) -> np.ndarray:
    """Bilinear samples of a complex field at (x, y) points; zero outside"""
    coords = [xy[..., 1], xy[..., 0]]
    real = ndimage.map_coordinates(field.real, coords, order=1, mode='constant', cval=0.0)
    imag = ndimage.map_coordinates(field.imag, coords, order=1, mode='constant', cval=0.0)
    return real + 1j * imag


def correlation_score(ls_a: ComplexField, ls_b: ComplexField, template_a: MinutiaTemplate,
                      transform: RigidTransform, cfg: HHConfig = HHConfig()) -> float:
    """Mean normalized correlation of LS patches around A's minutiae and their images in B"""
    if len(template_a) == 0:
        return 0.0

    offsets = _patch_offsets(cfg.area_half)
    centres = template_a.positions()
    points_a = centres[:, None, :] + offsets[None, :, :]
    points_b = transform.apply_points(points_a.reshape(-1, 2)).reshape(points_a.shape)

    patches_a = _sample(ls_a, points_a)
    # bring B's double-angle arguments back into A's frame
    patches_b = _sample(ls_b, points_b) * np.exp(-2j * math.radians(transform.rot))

    admitted = ((np.abs(patches_a).mean(axis=1) >= cfg.ls_area_min)
                & (np.abs(patches_b).mean(axis=1) >= cfg.ls_area_min))
    if not admitted.any():
        return 0.0

    a, b = patches_a[admitted], patches_b[admitted]
    inner = np.sum(a * np.conj(b), axis=1)
    energy = np.sqrt(np.sum(np.abs(a) ** 2, axis=1) * np.sum(np.abs(b) ** 2, axis=1))
    normalized = inner / energy
    if cfg.patch_similarity == 'real':
        similarity = np.maximum(0.0, normalized.real)
    else:
        similarity = np.abs(normalized)
    return float(np.clip(similarity.mean(), 0.0, 1.0))


def match_hh(a: HHFeatures, b: HHFeatures, cfg: HHConfig = HHConfig()) -> float:
    """Pair, align and correlate; failures to pair score 0"""
    if len(a.template) < 2 or len(b.template) < 2:
        return 0.0
    try:
        couples = corresponding_couples(a.template, b.template, cfg)
        pairing = grow_triangles(couples, a.template, b.template, cfg)
        transform = estimate_alignment(pairing, a.template, b.template)
    except (NoConsistentPairingError, AlignmentError) as e:
        logger.debug(f'HH match scored 0: {e.message}')
        return 0.0
    return correlation_score(a.ls, b.ls, a.template, transform, cfg)
