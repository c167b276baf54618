from typing import Any, Dict, Iterable, Optional


class FingerprintError(Exception):
    """Base class for every domain error raised by the toolkit"""

    error_code = 'FINGERPRINT_ERROR'

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if error_code is not None:
            self.error_code = error_code

    def to_dict(self) -> Dict[str, Any]:
        """Convert the error to the API error response shape"""
        return {
            'success': False,
            'error': self.message,
            'error_code': self.error_code
        }


class ImageFormatError(FingerprintError):
    error_code = 'MALFORMED_HEADER'


class ImageSizeError(FingerprintError):
    error_code = 'IMAGE_TOO_SMALL'


class NoFingerprintAreaError(FingerprintError):
    error_code = 'NO_FINGERPRINT_AREA'

    def __init__(self, message: str = 'no fingerprint area'):
        super().__init__(message)


class LineFormatError(FingerprintError):
    """Parse error that knows which line of a text file is at fault"""

    def __init__(self, message: str, line_number: int, error_code: Optional[str] = None):
        super().__init__(f'line {line_number}: {message}', error_code)
        self.line_number = line_number

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['line_number'] = self.line_number
        return data


class TemplateFormatError(LineFormatError):
    error_code = 'MALFORMED_TEMPLATE'


class SpecFormatError(LineFormatError):
    error_code = 'MALFORMED_SPEC'


class ConfigError(FingerprintError):
    error_code = 'INVALID_CONFIG'

    def __init__(self, errors: Iterable[Dict[str, Any]]):
        self.errors = list(errors)
        summary = '; '.join(f"{e['field']}: {e['error']}" for e in self.errors)
        super().__init__(f'invalid configuration: {summary}')

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['validation_errors'] = self.errors
        return data


class NoConsistentPairingError(FingerprintError):
    error_code = 'NO_CONSISTENT_PAIRING'

    def __init__(self, message: str = 'no consistent pairing'):
        super().__init__(message)


class CoincidentMinutiaeError(FingerprintError):
    error_code = 'COINCIDENT_MINUTIAE'


class AlignmentError(FingerprintError):
    error_code = 'ALIGNMENT_FAILED'


class NoAdmissibleOffsetError(AlignmentError):
    error_code = 'NO_ADMISSIBLE_OFFSET'

    def __init__(self, message: str = 'no admissible offset'):
        super().__init__(message)


class CalibrationError(FingerprintError):
    error_code = 'INSUFFICIENT_CALIBRATION_DATA'


class ScoreDomainError(FingerprintError):
    error_code = 'INVALID_SCORE'


class TrialKeyMismatchError(FingerprintError):
    error_code = 'TRIAL_KEY_MISMATCH'


class CorpusError(FingerprintError):
    error_code = 'CORPUS_ERROR'

    def __init__(self, message: str, problems: Optional[Iterable[str]] = None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + ':\n  ' + '\n  '.join(self.problems)
        super().__init__(message)


class InputTypeError(FingerprintError):
    error_code = 'INPUT_TYPE_MISMATCH'


class PipelineStageError(FingerprintError):
    """Wraps a domain error with the pipeline stage it came from"""

    def __init__(self, stage: str, cause: FingerprintError):
        super().__init__(f'{stage}: {cause.message}', cause.error_code)
        self.stage = stage
        self.cause = cause

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data['stage'] = self.stage
        return data


class FieldShapeError(FingerprintError):
    error_code = 'FIELD_SHAPE_MISMATCH'


class FingerCodeFormatError(LineFormatError):
    error_code = 'MALFORMED_FINGERCODE'
