import logging
from typing import Optional

import numpy as np

from config.pipeline import PipelineConfig
from models import FingerCode, GrayImage, MinutiaTemplate
from utils.errors import FingerprintError, PipelineStageError
from utils.imageio import load_pgm, normalize_intensity
from utils.matcher_hh import HHFeatures
from utils.matcher_ridge import extract_fingercode, gabor_bank
from utils.minutiae_extraction import extract_skeleton_template, extract_symmetry_template
from utils.symmetry import SymmetryFields, symmetry_fields

logger = logging.getLogger(__name__)

class ExtractionService:
    """Turns images into the features each matcher consumes"""

    def __init__(self, pipeline_config: Optional[PipelineConfig] = None):
        self.config = pipeline_config or PipelineConfig()

    def prepare_image(self, image: GrayImage) -> GrayImage:
        """Size check and optional intensity normalization"""
        image.require_pipeline_size()
        if not self.config['imageio.normalize']:
            return image
        normalized, degenerate = normalize_intensity(
            image, self.config['imageio.target_mean'], self.config['imageio.target_std']
        )
        if degenerate:
            logger.warning(f'Degenerate image {image!r} passed through unnormalized')
        return normalized

    def compute_fields(self, image: GrayImage) -> SymmetryFields:
        try:
            return symmetry_fields(
                self.prepare_image(image),
                self.config.filter_params(),
                self.config.quality_thresholds(),
                self.config['symmetry.segment_threshold'],
                self.config['symmetry.quality_block'],
                self.config['symmetry.enhance_sigma'] or None
            )
        except FingerprintError as e:
            raise PipelineStageError('symmetry', e)

    def extract_template(self, image: GrayImage, method: Optional[str] = None,
                         fields: Optional[SymmetryFields] = None) -> MinutiaTemplate:
        """
        Extract a minutiae template

        Args:
            image: Input fingerprint
            method: 'symmetry' or 'skeleton'; defaults to extract.method
            fields: Precomputed symmetry fields of the same image

        Returns:
            MinutiaTemplate: template in image coordinates
        """
        method = method or self.config['extract.method']
        fields = fields or self.compute_fields(image)
        cfg = self.config.extraction_config()
        try:
            if method == 'skeleton':
                template = extract_skeleton_template(fields, cfg)
            else:
                template = extract_symmetry_template(fields, cfg)
        except FingerprintError as e:
            raise PipelineStageError('extraction', e)

        logger.info(f'Extracted {len(template)} minutiae from {image!r} with the {method} method')
        return template

    def hh_features(self, image: GrayImage) -> HHFeatures:
        """Symmetry-detected minutiae plus the LS field used for patch correlation"""
        fields = self.compute_fields(image)
        template = self.extract_template(image, 'symmetry', fields)
        return HHFeatures(template, fields.ls)

    def fingercode(self, image: GrayImage, mask: Optional[np.ndarray] = None) -> FingerCode:
        """FingerCode over the foreground found by segmentation"""
        if mask is None:
            mask = self.compute_fields(image).mask
        cfg = self.config.ridge_config()
        filtered = gabor_bank(self.prepare_image(image), self.config.gabor_params())
        code = extract_fingercode(filtered, mask, cfg.cell_size, cfg.statistic, cfg.min_coverage)
        logger.debug(f'FingerCode {code.grid_w}x{code.grid_h} with {code.valid_count} valid cells')
        return code

    def load_image(self, path: str) -> GrayImage:
        return load_pgm(path)

# Global instance
extraction_service = ExtractionService()
