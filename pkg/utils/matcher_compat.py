"""Compatibility-table minutiae matcher.

Intra-print tables describe every minutia pair by its distance and the
angles of both minutiae against the joining line; an inter-print
compatibility table lists pair correspondences within tolerance, and the
score counts the largest rotation-consistent, one-to-one cluster of them.
The score uses only minutia location and direction, so it is invariant to
rotation and translation.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from models.minutia import MinutiaTemplate
from utils.geometry import wrap_angles

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompatConfig:
    tol_dist: float = 10.0
    tol_angle: float = 11.25
    tol_cluster_rot: float = 22.5
    top_k: int = 1

    def __post_init__(self):
        for name in ('tol_dist', 'tol_angle', 'tol_cluster_rot'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be non-negative')
        if self.top_k < 1:
            raise ValueError('top_k must be at least 1')


@dataclass(frozen=True)
class IntraEntry:
    i: int
    j: int
    d: float
    beta_i: float
    beta_j: float
    # bearing of the line from i to j, in degrees
    line: float


@dataclass(frozen=True)
class CompatEntry:
    pair_a: Tuple[int, int]
    pair_b: Tuple[int, int]
    implied_rotation: float
    residual: float = 0.0


def intra_table(template: MinutiaTemplate) -> List[IntraEntry]:
    """One entry per unordered pair i < j"""
    n = len(template)
    if n < 2:
        return []
    first, second = np.triu_indices(n, k=1)
    xy = template.positions()
    directions = template.directions()
    delta = xy[second] - xy[first]
    d = np.hypot(delta[:, 0], delta[:, 1])
    line = np.degrees(np.arctan2(delta[:, 1], delta[:, 0]))
    beta_i = wrap_angles(directions[first] - line)
    beta_j = wrap_angles(directions[second] - (line + 180.0))
    return [
        IntraEntry(int(i), int(j), float(dd), float(bi), float(bj), float(ln))
        for i, j, dd, bi, bj, ln in zip(first, second, d, beta_i, beta_j, line)
    ]


def _table_arrays(table: List[IntraEntry]):
    return (np.array([[e.i, e.j] for e in table], dtype=int).reshape(-1, 2),
            np.array([e.d for e in table]),
            np.array([e.beta_i for e in table]),
            np.array([e.beta_j for e in table]),
            np.array([e.line for e in table]))


def compatibility_table(ta: List[IntraEntry], tb: List[IntraEntry],
                        cfg: CompatConfig = CompatConfig()) -> List[CompatEntry]:
    """
    Pair correspondences within tolerance, testing both the straight
    assignment (i->k, j->l) and the swapped one (i->l, j->k).
    """
    if not ta or not tb:
        return []

    pa, da, bia, bja, la = _table_arrays(ta)
    pb, db, bib, bjb, lb = _table_arrays(tb)

    dist_residual = np.abs(da[:, None] - db[None, :])
    close = dist_residual <= cfg.tol_dist
    entries: List[CompatEntry] = []

    # straight: i<->k, j<->l; the swapped B pair (l, k) has its betas exchanged and its line reversed
    for swapped in (False, True):
        if swapped:
            first_b, second_b, line_b = bjb, bib, lb + 180.0
        else:
            first_b, second_b, line_b = bib, bjb, lb
        delta_i = np.abs(wrap_angles(bia[:, None] - first_b[None, :]))
        delta_j = np.abs(wrap_angles(bja[:, None] - second_b[None, :]))
        hits = close & (delta_i <= cfg.tol_angle) & (delta_j <= cfg.tol_angle)
        rows, cols = np.nonzero(hits)
        rotation = wrap_angles(line_b[cols] - la[rows])
        residual = dist_residual[rows, cols] + delta_i[rows, cols] + delta_j[rows, cols]
        for row, col, rot, res in zip(rows.tolist(), cols.tolist(), rotation.tolist(), residual.tolist()):
            k, l = int(pb[col, 0]), int(pb[col, 1])
            pair_b = (l, k) if swapped else (k, l)
            entries.append(CompatEntry((int(pa[row, 0]), int(pa[row, 1])), pair_b, float(rot), float(res)))

    entries.sort(key=lambda e: (e.pair_a, e.pair_b))
    return entries


def _links(entries: List[CompatEntry], cfg: CompatConfig):
    """Edges between entries sharing an A minutia mapped to the same B minutia with agreeing rotation"""
    by_assignment: Dict[Tuple[int, int], List[int]] = {}
    for index, entry in enumerate(entries):
        for a_index, b_index in zip(entry.pair_a, entry.pair_b):
            by_assignment.setdefault((a_index, b_index), []).append(index)

    rotations = np.array([e.implied_rotation for e in entries])
    rows, cols = [], []
    for members in by_assignment.values():
        if len(members) < 2:
            continue
        members = np.array(members)
        diff = np.abs(wrap_angles(rotations[members][:, None] - rotations[members][None, :]))
        left, right = np.nonzero(np.triu(diff <= cfg.tol_cluster_rot, k=1))
        rows.extend(members[left].tolist())
        cols.extend(members[right].tolist())
    return rows, cols


def _consistent_count(entries: List[CompatEntry], members: List[int]) -> int:
    """Greedy sweep keeping entries whose minutia assignments agree with those already kept"""
    a_to_b: Dict[int, int] = {}
    b_to_a: Dict[int, int] = {}
    kept = 0
    ordered = sorted(members, key=lambda m: (round(entries[m].residual, 9), entries[m].pair_a, entries[m].pair_b))
    for index in ordered:
        entry = entries[index]
        assignments = list(zip(entry.pair_a, entry.pair_b))
        if all(a_to_b.get(a, b) == b and b_to_a.get(b, a) == a for a, b in assignments):
            for a, b in assignments:
                a_to_b[a] = b
                b_to_a[b] = a
            kept += 1
    return kept


def cluster_score(entries: List[CompatEntry], cfg: CompatConfig = CompatConfig()) -> int:
    """Size of the largest consistent cluster (sum of the top_k clusters when top_k > 1)"""
    if not entries:
        return 0

    rows, cols = _links(entries, cfg)
    n = len(entries)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, labels = connected_components(graph, directed=False)

    components: List[List[int]] = [[] for _ in range(count)]
    for index, label in enumerate(labels.tolist()):
        components[label].append(index)

    sizes = sorted((_consistent_count(entries, members) for members in components), reverse=True)
    return int(sum(sizes[:cfg.top_k]))


def match_compat(a: MinutiaTemplate, b: MinutiaTemplate, cfg: CompatConfig = CompatConfig()) -> int:
    """Raw integer similarity; higher means more linked compatible pairs"""
    entries = compatibility_table(intra_table(a), intra_table(b), cfg)
    score = cluster_score(entries, cfg)
    logger.debug(f'Compat match: {len(entries)} compatible pairs, score {score}')
    return score
