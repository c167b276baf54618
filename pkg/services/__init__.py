from .extraction_service import extraction_service, ExtractionService
from .matching_service import matching_service, MatchingService
from .corpus_service import corpus_service, CorpusService, CorpusPlan
from .evaluation_service import evaluation_service, EvaluationService

__all__ = [
    'extraction_service',
    'ExtractionService',
    'matching_service',
    'MatchingService',
    'corpus_service',
    'CorpusService',
    'CorpusPlan',
    'evaluation_service',
    'EvaluationService'
]
