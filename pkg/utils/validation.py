from typing import Any, Dict, Optional, Sequence

class InputValidator:
    """Utility for validating configuration values and API inputs"""

    def __init__(self):
        self.true_words = {'true', 'yes', 'on', '1'}
        self.false_words = {'false', 'no', 'off', '0'}

        # Matchers and extraction methods known to the pipeline
        self.matcher_ids = ('hh', 'compat', 'elastic', 'ridge')
        self.extraction_methods = ('symmetry', 'skeleton')

        # Trial labels accepted by the score log
        self.labels = ('genuine', 'impostor')

    def validate_int(self, value: Any, field_name: str, minimum: Optional[int] = None,
                     maximum: Optional[int] = None) -> Dict[str, Any]:
        """Validate an integer, optionally inside [minimum, maximum]"""
        try:
            if isinstance(value, bool):
                raise TypeError
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            number = int(value)
        except (ValueError, TypeError):
            return {
                'valid': False,
                'error': f'{field_name} must be a valid integer',
                'error_code': 'INVALID_INTEGER'
            }

        return self._check_range(number, field_name, minimum, maximum)

    def validate_float(self, value: Any, field_name: str, minimum: Optional[float] = None,
                       maximum: Optional[float] = None, exclusive_minimum: bool = False) -> Dict[str, Any]:
        """Validate a finite number, optionally inside a range"""
        try:
            if isinstance(value, bool):
                raise TypeError
            number = float(value)
        except (ValueError, TypeError):
            return {
                'valid': False,
                'error': f'{field_name} must be a number',
                'error_code': 'INVALID_NUMBER'
            }

        if number != number or number in (float('inf'), float('-inf')):
            return {
                'valid': False,
                'error': f'{field_name} must be finite',
                'error_code': 'INVALID_NUMBER'
            }

        if exclusive_minimum and minimum is not None and number <= minimum:
            return {
                'valid': False,
                'error': f'{field_name} must be greater than {minimum}',
                'error_code': 'VALUE_OUT_OF_RANGE'
            }

        return self._check_range(number, field_name, minimum, maximum)

    def _check_range(self, number, field_name, minimum, maximum) -> Dict[str, Any]:
        if minimum is not None and number < minimum:
            return {
                'valid': False,
                'error': f'{field_name} must be at least {minimum}',
                'error_code': 'VALUE_OUT_OF_RANGE'
            }

        if maximum is not None and number > maximum:
            return {
                'valid': False,
                'error': f'{field_name} cannot exceed {maximum}',
                'error_code': 'VALUE_OUT_OF_RANGE'
            }

        return {'valid': True, 'value': number}

    def validate_bool(self, value: Any, field_name: str) -> Dict[str, Any]:
        """Validate a boolean or one of the usual true/false words"""
        if isinstance(value, bool):
            return {'valid': True, 'value': value}

        word = str(value).strip().lower()
        if word in self.true_words:
            return {'valid': True, 'value': True}
        if word in self.false_words:
            return {'valid': True, 'value': False}

        return {
            'valid': False,
            'error': f'{field_name} must be true or false',
            'error_code': 'INVALID_BOOLEAN'
        }

    def validate_choice(self, value: Any, field_name: str, choices: Sequence[str]) -> Dict[str, Any]:
        """Validate a value against a fixed set of choices"""
        if not isinstance(value, str) or value.strip() not in choices:
            return {
                'valid': False,
                'error': f'{field_name} must be one of: {", ".join(choices)}',
                'error_code': 'INVALID_CHOICE'
            }

        return {'valid': True, 'value': value.strip()}

    def validate_matcher_list(self, value: Any, field_name: str = 'matchers') -> Dict[str, Any]:
        """Validate a comma-separated (or list) selection of matchers; duplicates are dropped"""
        items = value if isinstance(value, (list, tuple)) else str(value).split(',')
        matchers = []
        for item in items:
            item = str(item).strip()
            if not item:
                continue
            if item not in self.matcher_ids:
                return {
                    'valid': False,
                    'error': f'unknown matcher "{item}"; expected {", ".join(self.matcher_ids)}',
                    'error_code': 'INVALID_MATCHER'
                }
            if item not in matchers:
                matchers.append(item)

        if not matchers:
            return {
                'valid': False,
                'error': f'{field_name} must name at least one matcher',
                'error_code': 'INVALID_MATCHER'
            }

        return {'valid': True, 'value': tuple(matchers)}

    def validate_matcher_id(self, matcher_id: Any) -> Dict[str, Any]:
        """Validate a single matcher id"""
        return self.validate_choice(matcher_id, 'matcher', self.matcher_ids)

    def validate_method(self, method: Any) -> Dict[str, Any]:
        """Validate a minutiae extraction method"""
        return self.validate_choice(method, 'method', self.extraction_methods)

    def validate_label(self, label: Any) -> Dict[str, Any]:
        """Validate an optional trial label"""
        if label is None or label == '':
            return {'valid': True, 'value': None}
        return self.validate_choice(label, 'label', self.labels)

    def validate_identifier(self, value: Any, field_name: str, max_length: int = 200) -> Dict[str, Any]:
        """Validate a template or probe identifier"""
        if value is None:
            return {'valid': True, 'value': None}

        if not isinstance(value, str):
            return {
                'valid': False,
                'error': f'{field_name} must be a string',
                'error_code': 'INVALID_IDENTIFIER'
            }

        value = value.strip()
        if len(value) > max_length:
            return {
                'valid': False,
                'error': f'{field_name} must be {max_length} characters or less',
                'error_code': 'IDENTIFIER_TOO_LONG'
            }

        return {'valid': True, 'value': value or None}

# Global validator instance
input_validator = InputValidator()
