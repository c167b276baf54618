from .errors import FingerprintError
from .validation import input_validator

__all__ = [
    'FingerprintError',
    'input_validator'
]
