import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from config.pipeline import PipelineConfig
from models import ScoreRecord
from services.matching_service import MatchingService
from utils.errors import CorpusError, FingerprintError
from utils.evaluation import (Corpus, FusionReport, auc, best_combinations, compute_rates, det_export, eer,
                              fusion_report, load_corpus, run_protocol, score_histogram, write_histogram,
                              write_report, write_scores)
from utils.fusion import FusionRule, Normalizer, calibrate_normalizer, write_normalizers

logger = logging.getLogger(__name__)

FUSION_MODES = {
    'none': (),
    'max': (FusionRule.MAX,),
    'sum': (FusionRule.SUM,),
    'all-subsets': (FusionRule.MAX, FusionRule.SUM),
}

@dataclass
class EvaluationResult:
    records: Dict[str, List[ScoreRecord]] = field(default_factory=dict)
    normalizers: Dict[str, Normalizer] = field(default_factory=dict)
    eer: Dict[str, float] = field(default_factory=dict)
    auc: Dict[str, float] = field(default_factory=dict)
    report: Optional[FusionReport] = None
    files: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'matchers': sorted(self.records),
            'trials': {m: len(r) for m, r in self.records.items()},
            'eer': dict(self.eer),
            'auc': dict(self.auc),
            'normalizers': {m: n.to_dict() for m, n in self.normalizers.items()},
            'fusion': self.report.to_dict() if self.report else None,
            'files': list(self.files)
        }

class EvaluationService:
    """Runs the verification experiment over a corpus and writes every artifact"""

    def __init__(self, pipeline_config: Optional[PipelineConfig] = None,
                 matching: Optional[MatchingService] = None):
        self.config = pipeline_config or PipelineConfig()
        self.matching = matching or MatchingService(self.config)

    def score_matcher(self, corpus: Corpus, matcher_id: str, workers: int) -> Tuple[List[ScoreRecord], Normalizer]:
        """Run the protocol, calibrate on the pooled scores and attach normalized values"""
        raw_records = run_protocol(corpus, self.matching.trial_matcher(matcher_id), workers)
        normalizer = calibrate_normalizer(matcher_id, [r.raw for r in raw_records])
        return [r.with_normalized(normalizer(r.raw)) for r in raw_records], normalizer

    def run(self, corpus_dir: str, out_dir: str, matchers: Optional[Sequence[str]] = None,
            fusion: Optional[str] = None, workers: Optional[int] = None) -> EvaluationResult:
        """
        Score every matcher on the corpus, then fuse

        Args:
            corpus_dir: Corpus root (one directory per finger)
            out_dir: Destination of score, DET, histogram and report files
            matchers: Matcher ids; defaults to eval.matchers
            fusion: none, max, sum or all-subsets; defaults to fusion.rule
            workers: Worker threads; defaults to eval.workers

        Returns:
            EvaluationResult: records, calibrated normalizers, EER/AUC and written files
        """
        matchers = tuple(matchers or self.config['eval.matchers'])
        fusion = fusion or self.config['fusion.rule']
        workers = workers or self.config['eval.workers']
        if fusion not in FUSION_MODES:
            raise ValueError(f'fusion must be one of {", ".join(FUSION_MODES)}')

        corpus = load_corpus(corpus_dir)
        os.makedirs(out_dir, exist_ok=True)
        result = EvaluationResult()
        problems: List[str] = []

        for matcher_id in matchers:
            try:
                records, normalizer = self.score_matcher(corpus, matcher_id, workers)
            except CorpusError as e:
                problems.extend(e.problems or [e.message])
                continue
            except FingerprintError as e:
                problems.append(f'{matcher_id}: {e.message}')
                continue

            result.records[matcher_id] = records
            result.normalizers[matcher_id] = normalizer
            result.eer[matcher_id] = eer(compute_rates(records))
            result.auc[matcher_id] = auc(records)
            logger.info(f'{matcher_id}: EER {100 * result.eer[matcher_id]:.2f}%, AUC {result.auc[matcher_id]:.4f}')
            result.files.extend(self._write_matcher(out_dir, matcher_id, records))

        if result.normalizers:
            path = os.path.join(out_dir, 'normalizers.txt')
            write_normalizers([result.normalizers[m] for m in sorted(result.normalizers)], path)
            result.files.append(path)

        rules = FUSION_MODES[fusion]
        if rules and len(result.records) >= 2 and not problems:
            result.report = fusion_report(result.records, rules)
            result.files.extend(self._write_report(out_dir, result.report))

        if problems:
            raise CorpusError(f'evaluation of {corpus_dir} had failures', problems)
        return result

    def _write_matcher(self, out_dir: str, matcher_id: str, records: List[ScoreRecord]) -> List[str]:
        scores_path = os.path.join(out_dir, f'scores_{matcher_id}.csv')
        det_path = os.path.join(out_dir, f'det_{matcher_id}.csv')
        histogram_path = os.path.join(out_dir, f'histogram_{matcher_id}.csv')
        write_scores(records, scores_path)
        det_export(compute_rates(records), det_path)
        write_histogram(score_histogram(records, self.config['eval.histogram_bins']), histogram_path)
        return [scores_path, det_path, histogram_path]

    def _write_report(self, out_dir: str, report: FusionReport) -> List[str]:
        text_path = os.path.join(out_dir, 'fusion_report.txt')
        csv_path = os.path.join(out_dir, 'fusion_report.csv')
        best_path = os.path.join(out_dir, 'best_combinations.csv')
        write_report(report, text_path, csv_path)
        with open(best_path, 'w', encoding='utf-8') as handle:
            handle.write('rule,size,matchers,eer\n')
            for (rule, size), row in sorted(best_combinations(report).items()):
                handle.write(f'{rule},{size},{row.name},{row.eer:.6f}\n')
        return [text_path, csv_path, best_path]

# Global instance
evaluation_service = EvaluationService()
