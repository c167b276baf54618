from .score_log import ScoreLog, db
from .gray_image import GrayImage, Dislocation, SyntheticSpec, GroundTruth
from .minutia import Minutia, MinutiaKind, MinutiaTemplate, TemplateSource
from .fingercode import FingerCode, AlignmentOffset
from .scores import ScoreRecord, RateCurve, Protocol, FingerRoles, TrialLabel

__all__ = [
    'db',
    'ScoreLog',
    'GrayImage',
    'Dislocation',
    'SyntheticSpec',
    'GroundTruth',
    'Minutia',
    'MinutiaKind',
    'MinutiaTemplate',
    'TemplateSource',
    'FingerCode',
    'AlignmentOffset',
    'ScoreRecord',
    'RateCurve',
    'Protocol',
    'FingerRoles',
    'TrialLabel'
]
