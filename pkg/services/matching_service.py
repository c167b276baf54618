import logging
from typing import Any, Dict, List, Optional, Tuple

from config.pipeline import PipelineConfig
from models import FingerCode, GrayImage, MinutiaTemplate
from services.extraction_service import ExtractionService
from utils.errors import InputTypeError
from utils.evaluation import TrialMatcher
from utils.fusion import Normalizer
from utils.imageio import decode_pgm, is_pgm_data
from utils.matcher_compat import match_compat
from utils.matcher_elastic import elastic_match
from utils.matcher_hh import HHFeatures, match_hh
from utils.matcher_ridge import fingercode_distance, is_fingercode_data, match_ridge, parse_fingercode
from utils.template_io import is_template_data, parse_template

logger = logging.getLogger(__name__)

IMAGE = 'image'
TEMPLATE = 'template'
FINGERCODE = 'fingercode'

# input kinds each matcher can work from
MATCHER_INPUTS = {
    'hh': (IMAGE,),
    'compat': (IMAGE, TEMPLATE),
    'elastic': (IMAGE, TEMPLATE),
    'ridge': (IMAGE, FINGERCODE),
}

def detect_input_kind(data: bytes) -> str:
    """Classify file content by its leading magic"""
    if is_pgm_data(data):
        return IMAGE
    if is_template_data(data):
        return TEMPLATE
    if is_fingercode_data(data):
        return FINGERCODE
    raise InputTypeError('unrecognized input: expected a P5 image, an FPT1 template or an FC FingerCode')

def feature_size(features: Any) -> Optional[int]:
    """Minutiae count, or valid cells of a FingerCode"""
    if isinstance(features, HHFeatures):
        return len(features.template)
    if isinstance(features, MinutiaTemplate):
        return len(features)
    if isinstance(features, FingerCode):
        return features.valid_count
    return None

class MatchingService:
    """Dispatches comparisons to the four matchers"""

    def __init__(self, pipeline_config: Optional[PipelineConfig] = None,
                 extraction: Optional[ExtractionService] = None):
        self.config = pipeline_config or PipelineConfig()
        self.extraction = extraction or ExtractionService(self.config)

    def parse_input(self, data: bytes) -> Tuple[str, Any]:
        kind = detect_input_kind(data)
        if kind == IMAGE:
            return kind, decode_pgm(data)
        text = data.decode('utf-8')
        if kind == TEMPLATE:
            return kind, parse_template(text)
        return kind, parse_fingercode(text)

    def features(self, matcher_id: str, kind: str, value: Any) -> Any:
        """Bring a parsed input to the feature type the matcher compares"""
        if kind not in MATCHER_INPUTS[matcher_id]:
            accepted = ' or '.join(MATCHER_INPUTS[matcher_id])
            raise InputTypeError(f'matcher {matcher_id} needs {accepted} input, got {kind}')
        if kind != IMAGE:
            return value
        if matcher_id == 'hh':
            return self.extraction.hh_features(value)
        if matcher_id == 'ridge':
            return self.extraction.fingercode(value)
        return self.extraction.extract_template(value)

    def compare(self, matcher_id: str, a: Any, b: Any) -> float:
        """Raw score of two feature objects of the matcher's type"""
        if matcher_id == 'hh':
            return match_hh(a, b, self.config.hh_config())
        if matcher_id == 'compat':
            return float(match_compat(a, b, self.config.compat_config()))
        if matcher_id == 'elastic':
            return elastic_match(a, b, self.config.elastic_config())
        if matcher_id == 'ridge':
            # whole-cell offsets: the re-extracted grid reads the same cells as the stored code
            return fingercode_distance(a, b, self.config.ridge_config())
        raise InputTypeError(f'unknown matcher {matcher_id}')

    def match(self, matcher_id: str, data_a: bytes, data_b: bytes,
              normalizer: Optional[Normalizer] = None) -> Dict[str, Any]:
        """
        Compare two inputs given as file contents

        Args:
            matcher_id: hh, compat, elastic or ridge
            data_a: First input (image, template or FingerCode)
            data_b: Second input
            normalizer: Optional calibrated normalizer for the matcher

        Returns:
            Dict: matcher, raw, normalized (None without a normalizer) and feature counts
        """
        if matcher_id not in MATCHER_INPUTS:
            raise InputTypeError(f'unknown matcher {matcher_id}')
        inputs = [self.parse_input(data) for data in (data_a, data_b)]
        if matcher_id == 'ridge' and all(kind == IMAGE for kind, _ in inputs):
            raw, counts = self.match_ridge_images(inputs[0][1], inputs[1][1])
        else:
            features = [self.features(matcher_id, kind, value) for kind, value in inputs]
            raw = self.compare(matcher_id, features[0], features[1])
            counts = [feature_size(f) for f in features]
        normalized = normalizer(raw) if normalizer is not None else None
        logger.info(f'Matched with {matcher_id}: raw={raw:.6f}')
        return {
            'matcher': matcher_id,
            'raw': raw,
            'normalized': normalized,
            'counts': counts
        }

    def match_ridge_images(self, image_a: GrayImage, image_b: GrayImage) -> Tuple[float, List[int]]:
        """Ridge distance with B re-extracted on the aligned tessellation"""
        prepared = [self.extraction.prepare_image(image) for image in (image_a, image_b)]
        masks = [self.extraction.compute_fields(image).mask for image in (image_a, image_b)]
        distance = match_ridge(prepared[0], prepared[1], self.config.gabor_params(), self.config.ridge_config(),
                               masks[0], masks[1])
        counts = [self.extraction.fingercode(image, mask).valid_count
                  for image, mask in zip((image_a, image_b), masks)]
        return distance, counts

    def match_files(self, matcher_id: str, path_a: str, path_b: str,
                    normalizer: Optional[Normalizer] = None) -> Dict[str, Any]:
        with open(path_a, 'rb') as handle:
            data_a = handle.read()
        with open(path_b, 'rb') as handle:
            data_b = handle.read()
        return self.match(matcher_id, data_a, data_b, normalizer)

    def trial_matcher(self, matcher_id: str) -> TrialMatcher:
        """Protocol adapter: corpus images in, raw scores out"""
        def prepare(path: str) -> Any:
            return self.features(matcher_id, IMAGE, self.extraction.load_image(path))

        def compare(a: Any, b: Any) -> float:
            return self.compare(matcher_id, a, b)

        return TrialMatcher(matcher_id, prepare, compare)

# Global instance
matching_service = MatchingService()
