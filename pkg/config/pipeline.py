"""Namespaced pipeline configuration.

A plain-text file of ``key = value`` lines (``#`` starts a comment) plus
``key=value`` overrides. Every key has a default; unknown keys and invalid
values are reported together in one ConfigError.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from utils.errors import ConfigError
from utils.matcher_compat import CompatConfig
from utils.matcher_elastic import ElasticConfig
from utils.matcher_hh import HHConfig
from utils.matcher_ridge import GaborBankParams, RidgeConfig
from utils.minutiae_extraction import ExtractionConfig
from utils.symmetry import FilterParams, QualityThresholds
from utils.validation import input_validator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Key:
    kind: str
    default: Any
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    choices: Tuple[str, ...] = ()
    # minimum itself not allowed
    exclusive: bool = False


KEYS: Dict[str, Key] = {
    'imageio.normalize': Key('bool', True),
    'imageio.target_mean': Key('float', 128.0, 0, 255),
    'imageio.target_std': Key('float', 40.0, 0, None, exclusive=True),

    'symmetry.sigma_deriv': Key('float', 1.0, 0, None, exclusive=True),
    'symmetry.sigma_avg': Key('float', 4.0, 0, None, exclusive=True),
    'symmetry.sigma_para': Key('float', 3.0, 0, None, exclusive=True),
    'symmetry.filter_order': Key('int', 1, 0, 1),
    'symmetry.segment_threshold': Key('float', 0.3, 0, 1),
    'symmetry.quality_block': Key('int', 16, 8, None),
    'symmetry.t_contrast': Key('float', 8.0, 0, None),
    'symmetry.t_low': Key('float', 0.3, 0, 1),
    'symmetry.t_high': Key('float', 0.5, 0, 1),
    'symmetry.t_curvature': Key('float', 30.0, 0, 90),
    'symmetry.enhance_sigma': Key('float', 0.0, 0, None),

    'extract.method': Key('choice', 'symmetry', choices=('symmetry', 'skeleton')),
    'extract.nms_window': Key('int', 9, 3, None),
    'extract.surround_radius': Key('float', 8.0, 0, None),
    'extract.surround_ls_min': Key('float', 0.4, 0, 1),
    'extract.max_minutiae': Key('int', 60, 1, None),
    'extract.psi_min': Key('float', 0.02, 0, 1),
    'extract.binarization_block': Key('int', 16, 3, None),
    'extract.spur_max_len': Key('int', 8, 0, None),
    'extract.lake_max_perimeter': Key('int', 30, 0, None),
    'extract.min_separation': Key('float', 6.0, 0, None),

    'hh.lambda_dist': Key('float', 8.0, 0, None),
    'hh.lambda_angle': Key('float', 20.0, 0, 360),
    'hh.gamma_tol': Key('float', 15.0, 0, 180),
    'hh.area_half': Key('int', 10, 0, None),
    'hh.ls_area_min': Key('float', 0.4, 0, 1),
    'hh.patch_similarity': Key('choice', 'magnitude', choices=('magnitude', 'real')),

    'compat.tol_dist': Key('float', 10.0, 0, None),
    'compat.tol_angle': Key('float', 11.25, 0, 180),
    'compat.tol_cluster_rot': Key('float', 22.5, 0, 180),
    'compat.top_k': Key('int', 1, 1, None),

    'elastic.w0': Key('float', 8.0, 0, None),
    'elastic.h0': Key('float', 8.0, 0, None),
    'elastic.k': Key('float', 0.05, 0, None),
    'elastic.angle_tol': Key('float', 30.0, 0, 180),
    'elastic.assignment': Key('choice', 'greedy', choices=('greedy', 'optimal')),

    'ridge.frequency': Key('float', 0.1, 0, 0.5, exclusive=True),
    'ridge.sigma_x': Key('float', 4.0, 0, None, exclusive=True),
    'ridge.sigma_y': Key('float', 4.0, 0, None, exclusive=True),
    'ridge.cell_size': Key('int', 16, 8, None),
    'ridge.statistic': Key('choice', 'std', choices=('std', 'variance')),
    'ridge.min_coverage': Key('float', 0.5, 0, 1),
    'ridge.min_overlap': Key('float', 0.25, 0, 1),
    'ridge.alignment': Key('choice', 'fft', choices=('fft', 'direct')),

    'fusion.rule': Key('choice', 'all-subsets', choices=('none', 'max', 'sum', 'all-subsets')),

    'eval.matchers': Key('matchers', ('hh', 'compat', 'elastic', 'ridge')),
    'eval.workers': Key('int', 1, 1, 64),
    'eval.histogram_bins': Key('int', 20, 1, 1000),
}


def _coerce(name: str, key: Key, value: Any) -> Dict[str, Any]:
    if key.kind == 'bool':
        return input_validator.validate_bool(value, name)
    if key.kind == 'int':
        return input_validator.validate_int(value, name, key.minimum, key.maximum)
    if key.kind == 'float':
        return input_validator.validate_float(value, name, key.minimum, key.maximum, key.exclusive)
    if key.kind == 'matchers':
        return input_validator.validate_matcher_list(value, name)
    return input_validator.validate_choice(value, name, key.choices)


def parse_assignments(text: str, origin: str = 'config') -> Tuple[List[Tuple[str, str]], List[Dict[str, Any]]]:
    """Split ``key = value`` lines; malformed lines become error entries"""
    pairs, errors = [], []
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition('=')
        if not sep or not key.strip():
            errors.append({'field': f'{origin}:{line_number}', 'error': f'expected "key = value", got "{stripped}"'})
            continue
        pairs.append((key.strip(), value.strip()))
    return pairs, errors


class PipelineConfig:
    """Validated pipeline settings with builders for each module's parameter type"""

    def __init__(self, values: Optional[Dict[str, Any]] = None):
        self.values = {name: key.default for name, key in KEYS.items()}
        errors = []
        for name, raw in (values or {}).items():
            if name not in KEYS:
                errors.append({'field': name, 'error': 'unknown configuration key'})
                continue
            result = _coerce(name, KEYS[name], raw)
            if result['valid']:
                self.values[name] = result['value']
            else:
                errors.append({'field': name, 'error': result['error']})
        if not errors:
            errors = self._check_builders()
        if errors:
            raise ConfigError(errors)

    def __getitem__(self, name: str) -> Any:
        return self.values[name]

    def get(self, name: str, default: Any = None) -> Any:
        return self.values.get(name, default)

    def _check_builders(self) -> List[Dict[str, Any]]:
        errors = []
        for section, build in (('symmetry', self.quality_thresholds), ('symmetry', self.filter_params),
                               ('extract', self.extraction_config), ('hh', self.hh_config),
                               ('compat', self.compat_config), ('elastic', self.elastic_config),
                               ('ridge', self.gabor_params), ('ridge', self.ridge_config)):
            try:
                build()
            except ValueError as e:
                errors.append({'field': section, 'error': str(e)})
        return errors

    def section(self, prefix: str) -> Dict[str, Any]:
        return {name.split('.', 1)[1]: value for name, value in self.values.items() if name.startswith(prefix + '.')}

    def filter_params(self) -> FilterParams:
        s = self.section('symmetry')
        return FilterParams(s['sigma_deriv'], s['sigma_avg'], s['sigma_para'], s['filter_order'])

    def quality_thresholds(self) -> QualityThresholds:
        s = self.section('symmetry')
        return QualityThresholds(s['t_contrast'], s['t_low'], s['t_high'], s['t_curvature'])

    def extraction_config(self) -> ExtractionConfig:
        s = self.section('extract')
        s.pop('method')
        return ExtractionConfig(**s)

    def hh_config(self) -> HHConfig:
        return HHConfig(**self.section('hh'))

    def compat_config(self) -> CompatConfig:
        return CompatConfig(**self.section('compat'))

    def elastic_config(self) -> ElasticConfig:
        return ElasticConfig(**self.section('elastic'))

    def gabor_params(self) -> GaborBankParams:
        s = self.section('ridge')
        return GaborBankParams(s['frequency'], s['sigma_x'], s['sigma_y'])

    def ridge_config(self) -> RidgeConfig:
        s = self.section('ridge')
        return RidgeConfig(s['cell_size'], s['statistic'], s['min_coverage'], s['min_overlap'], s['alignment'])

    def to_text(self) -> str:
        lines = []
        for name in sorted(self.values):
            value = self.values[name]
            if isinstance(value, bool):
                value = 'true' if value else 'false'
            elif isinstance(value, tuple):
                value = ','.join(value)
            lines.append(f'{name} = {value}')
        return '\n'.join(lines) + '\n'


def load_pipeline_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> PipelineConfig:
    """
    Build the configuration from defaults, an optional file and overrides

    Args:
        path: "key = value" file; None or '' for defaults only
        overrides: "key=value" strings applied after the file

    Returns:
        PipelineConfig: validated configuration
    """
    values: Dict[str, str] = {}
    errors: List[Dict[str, Any]] = []
    if path:
        with open(path, 'r', encoding='utf-8') as handle:
            pairs, errors = parse_assignments(handle.read(), path)
        values.update(pairs)

    for override in overrides:
        pairs, bad = parse_assignments(override, '--set')
        errors.extend(bad)
        values.update(pairs)

    if errors:
        raise ConfigError(errors)
    config = PipelineConfig(values)
    logger.debug(f'Pipeline configuration loaded from {path or "defaults"} with {len(values)} explicit keys')
    return config


def matcher_list(config: PipelineConfig, override: Optional[Sequence[str]] = None) -> Tuple[str, ...]:
    if override is None:
        return config['eval.matchers']
    result = input_validator.validate_matcher_list(list(override))
    if not result['valid']:
        raise ConfigError([{'field': 'matchers', 'error': result['error']}])
    return result['value']
