"""Verification protocol, error-rate curves and fusion comparison reports.

Scores follow the similarity convention throughout: higher means more
likely genuine. Dissimilarity matchers are normalized before they get here.
"""
import csv
import io
import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from models.scores import FingerRoles, Protocol, RateCurve, ScoreRecord, TrialLabel
from utils.errors import CorpusError, FingerprintError, ScoreDomainError, TrialKeyMismatchError
from utils.fusion import FusionRule, fuse

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.txt'
IMPRESSION_SUFFIX = '.pgm'
DET_HEADER = ('threshold', 'fmr', 'fnmr')
SCORE_HEADER = ('matcher', 'template_id', 'probe_id', 'label', 'raw', 'normalized')


@dataclass(frozen=True)
class Corpus:
    """Impressions grouped by finger; keys are ``<finger_id>/<impression_id>``"""
    root: str
    protocol: Protocol
    paths: Dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.paths)


@dataclass(frozen=True)
class Trial:
    template_id: str
    probe_id: str
    label: TrialLabel


@dataclass(frozen=True)
class TrialMatcher:
    """Feature preparation per impression plus a score per (template, probe) pair"""
    matcher_id: str
    prepare: Callable[[str], Any]
    compare: Callable[[Any, Any], float]


def impression_key(finger_id: str, impression_id: str) -> str:
    return f'{finger_id}/{impression_id}'


def _parse_manifest(path: str) -> Dict[str, Dict[str, str]]:
    roles: Dict[str, Dict[str, str]] = {}
    problems = []
    with open(path, 'r', encoding='utf-8') as handle:
        for line_number, line in enumerate(handle, start=1):
            stripped = line.split('#', 1)[0].strip()
            if not stripped:
                continue
            finger_id, *assignments = stripped.split()
            entry = {}
            for assignment in assignments:
                key, sep, value = assignment.partition('=')
                if not sep or key not in ('template', 'impostor') or not value:
                    problems.append(f'{MANIFEST_NAME} line {line_number}: bad role "{assignment}"')
                    continue
                entry[key] = value
            roles[finger_id] = entry
    if problems:
        raise CorpusError('malformed manifest', problems)
    return roles


def load_corpus(corpus_dir: str, include_genuine: bool = True, include_impostor: bool = True) -> Corpus:
    """
    Read ``corpus/<finger_id>/<impression_id>.pgm`` plus the optional manifest.

    Without a manifest entry the first sorted impression of a finger is its
    template and the last one its impostor impression. Every problem found is
    reported in one CorpusError.
    """
    if not os.path.isdir(corpus_dir):
        raise CorpusError(f'corpus directory {corpus_dir} does not exist')

    fingers: Dict[str, List[str]] = {}
    for finger_id in sorted(os.listdir(corpus_dir)):
        finger_dir = os.path.join(corpus_dir, finger_id)
        if not os.path.isdir(finger_dir):
            continue
        fingers[finger_id] = sorted(
            name[:-len(IMPRESSION_SUFFIX)] for name in os.listdir(finger_dir) if name.endswith(IMPRESSION_SUFFIX)
        )
    fingers = {finger_id: impressions for finger_id, impressions in fingers.items() if impressions}
    if not fingers:
        raise CorpusError(f'no fingers found in {corpus_dir}')

    manifest_path = os.path.join(corpus_dir, MANIFEST_NAME)
    manifest = _parse_manifest(manifest_path) if os.path.isfile(manifest_path) else {}

    problems = []
    for finger_id in sorted(set(manifest) - set(fingers)):
        problems.append(f'manifest lists finger {finger_id} with no impressions')

    finger_roles: Dict[str, FingerRoles] = {}
    paths: Dict[str, str] = {}
    for finger_id, impressions in fingers.items():
        if len(impressions) < 2:
            problems.append(f'finger {finger_id} has {len(impressions)} impression(s), need at least 2')
            continue
        entry = manifest.get(finger_id, {})
        template = entry.get('template', impressions[0])
        impostor = entry.get('impostor', impressions[-1])
        missing = [name for name in (template, impostor) if name not in impressions]
        for name in missing:
            problems.append(f'missing file {os.path.join(corpus_dir, finger_id, name + IMPRESSION_SUFFIX)}')
        if missing:
            continue
        probes = tuple(name for name in impressions if name != template)
        finger_roles[finger_id] = FingerRoles(template, impostor, probes)
        for name in impressions:
            paths[impression_key(finger_id, name)] = os.path.join(corpus_dir, finger_id, name + IMPRESSION_SUFFIX)

    if problems:
        raise CorpusError(f'corpus {corpus_dir} is incomplete', problems)

    protocol = Protocol(finger_roles, include_genuine, include_impostor)
    logger.info(f'Loaded corpus {corpus_dir}: {len(finger_roles)} fingers, {len(paths)} impressions')
    return Corpus(corpus_dir, protocol, paths)


def protocol_trials(protocol: Protocol) -> List[Trial]:
    """Genuine trials against the other impressions, impostor trials against every other finger"""
    trials = []
    finger_ids = protocol.finger_ids()
    for finger_id in finger_ids:
        roles = protocol.fingers[finger_id]
        template_id = impression_key(finger_id, roles.template)
        if protocol.include_genuine:
            for probe in roles.probes:
                trials.append(Trial(template_id, impression_key(finger_id, probe), TrialLabel.GENUINE))
        if protocol.include_impostor:
            for other_id in finger_ids:
                if other_id != finger_id:
                    other = protocol.fingers[other_id]
                    trials.append(Trial(template_id, impression_key(other_id, other.impostor), TrialLabel.IMPOSTOR))
    return trials


def _record_order(record: ScoreRecord):
    return record.template_id, record.probe_id, record.label.value


def run_protocol(corpus: Corpus, matcher: TrialMatcher, workers: int = 1) -> List[ScoreRecord]:
    """
    Score every protocol trial.

    Features are prepared once per impression used. Results are sorted by
    (template, probe, label), so the output does not depend on ``workers``.
    """
    trials = protocol_trials(corpus.protocol)
    needed = sorted({t.template_id for t in trials} | {t.probe_id for t in trials})
    logger.info(f'Running {matcher.matcher_id}: {len(trials)} trials over {len(needed)} impressions')

    problems = [f'missing file {corpus.paths.get(key, key)}' for key in needed
                if key not in corpus.paths or not os.path.isfile(corpus.paths[key])]
    if problems:
        raise CorpusError(f'{matcher.matcher_id}: corpus files missing', problems)

    features: Dict[str, Any] = {}
    failures: List[str] = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = {executor.submit(matcher.prepare, corpus.paths[key]): key for key in needed}
        for future in as_completed(futures):
            key = futures[future]
            try:
                features[key] = future.result()
            except FingerprintError as e:
                logger.error(f'{matcher.matcher_id}: feature extraction failed for {key}: {e.message}')
                failures.append(f'{key}: {e.message}')

        runnable = [t for t in trials if t.template_id in features and t.probe_id in features]
        futures = {
            executor.submit(matcher.compare, features[t.template_id], features[t.probe_id]): t for t in runnable
        }
        records = []
        for future in as_completed(futures):
            trial = futures[future]
            try:
                raw = float(future.result())
            except FingerprintError as e:
                failures.append(f'{trial.template_id} vs {trial.probe_id}: {e.message}')
                continue
            records.append(ScoreRecord(matcher.matcher_id, trial.template_id, trial.probe_id, trial.label, raw))

    if failures:
        raise CorpusError(f'{matcher.matcher_id}: {len(failures)} failure(s)', sorted(failures))

    records.sort(key=_record_order)
    return records


def _split_scores(records: Iterable[ScoreRecord]) -> Tuple[np.ndarray, np.ndarray]:
    genuine, impostor = [], []
    for record in records:
        (genuine if record.is_genuine else impostor).append(record.score)
    return np.asarray(genuine, dtype=np.float64), np.asarray(impostor, dtype=np.float64)


def compute_rates(records: Sequence[ScoreRecord]) -> RateCurve:
    """
    FMR and FNMR at every distinct score plus -inf and +inf.

    FMR(t) is the share of impostor scores >= t, FNMR(t) the share of
    genuine scores < t.
    """
    genuine, impostor = _split_scores(records)
    if len(genuine) == 0 or len(impostor) == 0:
        raise ScoreDomainError(
            f'rates need both classes: {len(genuine)} genuine, {len(impostor)} impostor', 'ONE_CLASS_INPUT'
        )

    thresholds = np.concatenate(([-np.inf], np.unique(np.concatenate((genuine, impostor))), [np.inf]))
    genuine.sort()
    impostor.sort()
    fmr = (len(impostor) - np.searchsorted(impostor, thresholds, side='left')) / len(impostor)
    fnmr = np.searchsorted(genuine, thresholds, side='left') / len(genuine)
    return RateCurve(thresholds, fmr, fnmr)


def eer(curve: RateCurve) -> float:
    """
    Rate where FMR and FNMR cross, linearly interpolated between the two
    thresholds around the crossing; where they coincide over several
    thresholds, the midpoint of that stretch.
    """
    if len(curve) == 0:
        raise ValueError('empty rate curve')
    diff = curve.fnmr - curve.fmr
    touching = np.nonzero(diff == 0)[0]
    if len(touching):
        return float((curve.fmr[touching[0]] + curve.fmr[touching[-1]]) / 2.0)

    above = np.nonzero(diff > 0)[0]
    if len(above) == 0:
        return float(curve.fmr[-1])
    k = int(above[0])
    if k == 0:
        return float(curve.fmr[0])
    d0, d1 = diff[k - 1], diff[k]
    s = -d0 / (d1 - d0)
    return float(curve.fmr[k - 1] + s * (curve.fmr[k] - curve.fmr[k - 1]))


def auc(records: Sequence[ScoreRecord]) -> float:
    """Probability that a genuine score outranks an impostor score, ties counting half"""
    genuine, impostor = _split_scores(records)
    if len(genuine) == 0 or len(impostor) == 0:
        raise ScoreDomainError('AUC needs both classes', 'ONE_CLASS_INPUT')
    ranks = rankdata(np.concatenate((genuine, impostor)))
    u = ranks[:len(genuine)].sum() - len(genuine) * (len(genuine) + 1) / 2.0
    return float(u / (len(genuine) * len(impostor)))


def relative_variation(fused_eer: float, best_individual_eer: float) -> float:
    """Signed percentage change of the fused EER against the best single matcher"""
    if best_individual_eer <= 0:
        raise ScoreDomainError('relative variation against a zero baseline', 'ZERO_BASELINE')
    return 100.0 * (fused_eer - best_individual_eer) / best_individual_eer


def summarize(records: Sequence[ScoreRecord]) -> Dict[str, Any]:
    genuine, impostor = _split_scores(records)
    summary: Dict[str, Any] = {'genuine': int(len(genuine)), 'impostor': int(len(impostor)), 'eer': None, 'auc': None}
    if len(genuine) and len(impostor):
        summary['eer'] = eer(compute_rates(records))
        summary['auc'] = auc(records)
    return summary


def format_det(curve: RateCurve) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(DET_HEADER)
    for threshold, fmr, fnmr in curve.rows():
        writer.writerow([f'{threshold:.6f}', f'{fmr:.6f}', f'{fnmr:.6f}'])
    return buffer.getvalue()


def det_export(curve: RateCurve, path: str) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(format_det(curve))


def parse_det(text: str) -> RateCurve:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != DET_HEADER:
        raise ValueError(f'DET file must start with {",".join(DET_HEADER)}')
    values = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=np.float64).reshape(-1, 3)
    return RateCurve(values[:, 0], values[:, 1], values[:, 2])


def read_det(path: str) -> RateCurve:
    with open(path, 'r', encoding='utf-8') as handle:
        return parse_det(handle.read())


def _format_score(value: Optional[float]) -> str:
    return '' if value is None else f'{value:.6f}'


def format_scores(records: Iterable[ScoreRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(SCORE_HEADER)
    for r in records:
        writer.writerow([r.matcher_id, r.template_id, r.probe_id, r.label.value,
                         _format_score(r.raw), _format_score(r.normalized)])
    return buffer.getvalue()


def write_scores(records: Iterable[ScoreRecord], path: str) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(format_scores(records))


def read_scores(path: str) -> List[ScoreRecord]:
    with open(path, 'r', encoding='utf-8', newline='') as handle:
        reader = csv.DictReader(handle)
        return [
            ScoreRecord(row['matcher'], row['template_id'], row['probe_id'], TrialLabel(row['label']),
                        float(row['raw']), float(row['normalized']) if row['normalized'] else None)
            for row in reader
        ]


def score_histogram(records: Sequence[ScoreRecord], bins: int = 20,
                    value_range: Tuple[float, float] = (0.0, 1.0)) -> Dict[str, np.ndarray]:
    """Genuine and impostor counts over shared bins"""
    genuine, impostor = _split_scores(records)
    edges = np.histogram_bin_edges(np.concatenate((genuine, impostor)), bins=bins, range=value_range)
    return {
        'edges': edges,
        'genuine': np.histogram(genuine, bins=edges)[0],
        'impostor': np.histogram(impostor, bins=edges)[0]
    }


def write_histogram(histogram: Dict[str, np.ndarray], path: str) -> None:
    edges = histogram['edges']
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(('bin_low', 'bin_high', 'genuine', 'impostor'))
        for index in range(len(edges) - 1):
            writer.writerow([f'{edges[index]:.6f}', f'{edges[index + 1]:.6f}',
                             int(histogram['genuine'][index]), int(histogram['impostor'][index])])


@dataclass(frozen=True)
class FusionRow:
    matchers: Tuple[str, ...]
    rule: FusionRule
    eer: float
    best_matcher: str
    best_eer: float
    # None when the best matcher in the subset already has zero EER
    variation: Optional[float]

    @property
    def name(self) -> str:
        return '+'.join(self.matchers)

    def to_dict(self):
        return {
            'matchers': list(self.matchers),
            'rule': self.rule.value,
            'eer': self.eer,
            'best_matcher': self.best_matcher,
            'best_eer': self.best_eer,
            'variation': self.variation
        }


@dataclass(frozen=True)
class FusionReport:
    individual: Dict[str, float]
    rows: Tuple[FusionRow, ...]

    def to_dict(self):
        return {'individual': dict(self.individual), 'rows': [row.to_dict() for row in self.rows]}


def _trial_scores(records: Sequence[ScoreRecord]) -> Dict[Tuple[str, str, str], float]:
    return {r.trial_key: r.score for r in records}


def fuse_records(per_matcher: Dict[str, Sequence[ScoreRecord]], matchers: Sequence[str],
                 rule: FusionRule) -> List[ScoreRecord]:
    """One fused record per trial key; every matcher must cover the same trials"""
    tables = {m: _trial_scores(per_matcher[m]) for m in matchers}
    keys = set(tables[matchers[0]])
    for m in matchers[1:]:
        if set(tables[m]) != keys:
            raise TrialKeyMismatchError(f'matchers {matchers[0]} and {m} were scored on different trials')

    fused_id = f'{FusionRule(rule).value}:' + '+'.join(matchers)
    return [
        ScoreRecord(fused_id, template_id, probe_id, TrialLabel(label),
                    fuse([tables[m][(template_id, probe_id, label)] for m in matchers], rule))
        for template_id, probe_id, label in sorted(keys)
    ]


def fusion_report(per_matcher: Dict[str, Sequence[ScoreRecord]],
                  rules: Sequence[FusionRule] = (FusionRule.MAX, FusionRule.SUM)) -> FusionReport:
    """
    Fused EER of every subset of two or more matchers under every rule,
    with the change against the best matcher of the subset; rows ordered by
    EER.
    """
    matcher_ids = sorted(per_matcher)
    individual = {m: eer(compute_rates(per_matcher[m])) for m in matcher_ids}

    rows = []
    for size in range(2, len(matcher_ids) + 1):
        for subset in itertools.combinations(matcher_ids, size):
            best = min(subset, key=lambda m: (individual[m], m))
            for rule in rules:
                rule = FusionRule(rule)
                fused_eer = eer(compute_rates(fuse_records(per_matcher, subset, rule)))
                variation = relative_variation(fused_eer, individual[best]) if individual[best] > 0 else None
                rows.append(FusionRow(subset, rule, fused_eer, best, individual[best], variation))

    rows.sort(key=lambda row: (row.eer, row.rule.value, len(row.matchers), row.matchers))
    logger.info(f'Fusion report: {len(rows)} rows over {len(matcher_ids)} matchers')
    return FusionReport(individual, tuple(rows))


def best_combinations(report: FusionReport) -> Dict[Tuple[str, int], FusionRow]:
    """Lowest-EER subset per (rule, subset size)"""
    best: Dict[Tuple[str, int], FusionRow] = {}
    for row in report.rows:
        key = (row.rule.value, len(row.matchers))
        if key not in best:
            best[key] = row
    return best


def _percent(value: Optional[float], signed: bool = False) -> str:
    if value is None:
        return 'n/a'
    return f'{value:+.2f}%' if signed else f'{100.0 * value:.2f}%'


def format_report(report: FusionReport) -> str:
    """Aligned plain-text table: individual EERs, then fused subsets"""
    lines = ['Individual matchers', '']
    width = max([len(m) for m in report.individual] + [7])
    lines.append(f'{"matcher":<{width}}  {"EER":>8}')
    for matcher_id, value in report.individual.items():
        lines.append(f'{matcher_id:<{width}}  {_percent(value):>8}')

    if report.rows:
        name_width = max(len(row.name) for row in report.rows)
        lines += ['', 'Fusion', '',
                  f'{"matchers":<{name_width}}  {"rule":<4}  {"EER":>8}  {"best":<{width}}  {"variation":>10}']
        for row in report.rows:
            lines.append(
                f'{row.name:<{name_width}}  {row.rule.value:<4}  {_percent(row.eer):>8}  '
                f'{row.best_matcher:<{width}}  {_percent(row.variation, signed=True):>10}'
            )
    return '\n'.join(lines) + '\n'


def write_report(report: FusionReport, text_path: str, csv_path: str) -> None:
    with open(text_path, 'w', encoding='utf-8') as handle:
        handle.write(format_report(report))
    with open(csv_path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(('matchers', 'rule', 'eer', 'best_matcher', 'best_eer', 'variation'))
        for row in report.rows:
            writer.writerow([row.name, row.rule.value, f'{row.eer:.6f}', row.best_matcher, f'{row.best_eer:.6f}',
                             '' if row.variation is None else f'{row.variation:.4f}'])
