import logging
import os
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from models import Dislocation, SyntheticSpec
from utils.evaluation import MANIFEST_NAME
from utils.imageio import perturb_spec, synthesize_fingerprint, save_pgm, write_ground_truth

logger = logging.getLogger(__name__)

@dataclass(frozen=True)
class CorpusPlan:
    """Size and perturbation ranges of a synthetic corpus"""
    fingers: int = 20
    impressions: int = 5
    width: int = 256
    height: int = 256
    seed: int = 0
    max_rotation: float = 10.0
    max_translation: float = 12.0
    max_noise: float = 20.0
    min_minutiae: int = 1
    max_minutiae: int = 8
    # planted minutiae stay this far from the border
    margin: int = 48

    def __post_init__(self):
        if self.fingers < 1 or self.impressions < 2:
            raise ValueError('a corpus needs at least 1 finger with 2 impressions')
        if not 1 <= self.min_minutiae <= self.max_minutiae:
            raise ValueError('minutiae range must satisfy 1 <= min <= max')
        if min(self.width, self.height) <= 2 * self.margin:
            raise ValueError('image too small for the planting margin')

class CorpusService:
    """Generates seeded synthetic corpora in the layout the evaluation reads"""

    def finger_spec(self, plan: CorpusPlan, index: int, rng: np.random.Generator) -> SyntheticSpec:
        count = int(rng.integers(plan.min_minutiae, plan.max_minutiae + 1))
        dislocations = []
        while len(dislocations) < count:
            x = float(rng.uniform(plan.margin, plan.width - 1 - plan.margin))
            y = float(rng.uniform(plan.margin, plan.height - 1 - plan.margin))
            # keep planted minutiae apart so each one stays detectable
            if all(np.hypot(x - d.x, y - d.y) >= 24.0 for d in dislocations):
                dislocations.append(Dislocation(x, y, int(rng.choice([-1, 1]))))
        return SyntheticSpec(
            width=plan.width,
            height=plan.height,
            ridge_frequency=float(rng.uniform(0.09, 0.11)),
            base_orientation=float(rng.uniform(0.0, 180.0)),
            dislocations=tuple(dislocations),
            phase=float(rng.uniform(-np.pi, np.pi)),
            name=f'f{index:03d}'
        )

    def impression_specs(self, plan: CorpusPlan, base: SyntheticSpec,
                         rng: np.random.Generator) -> List[SyntheticSpec]:
        specs = []
        for impression in range(plan.impressions):
            specs.append(perturb_spec(
                base,
                rotation=float(rng.uniform(-plan.max_rotation, plan.max_rotation)),
                translation=(float(rng.uniform(-plan.max_translation, plan.max_translation)),
                             float(rng.uniform(-plan.max_translation, plan.max_translation))),
                noise_std=float(rng.uniform(0.0, plan.max_noise)),
                seed=int(rng.integers(0, 2 ** 31 - 1)),
                name=f'i{impression:02d}'
            ))
        return specs

    def generate(self, out_dir: str, plan: CorpusPlan = CorpusPlan()) -> Tuple[int, int]:
        """
        Write ``<out_dir>/<finger>/<impression>.pgm`` with ground truth and a manifest

        Args:
            out_dir: Corpus root, created if missing
            plan: Corpus size and perturbation ranges

        Returns:
            Tuple of (finger count, impression count)
        """
        rng = np.random.default_rng(plan.seed)
        os.makedirs(out_dir, exist_ok=True)
        manifest = []
        written = 0
        for index in range(plan.fingers):
            base = self.finger_spec(plan, index, rng)
            finger_dir = os.path.join(out_dir, base.name)
            os.makedirs(finger_dir, exist_ok=True)
            specs = self.impression_specs(plan, base, rng)
            for spec in specs:
                image, truth = synthesize_fingerprint(spec)
                save_pgm(image, os.path.join(finger_dir, f'{spec.name}.pgm'))
                write_ground_truth(truth, os.path.join(finger_dir, f'{spec.name}.truth'))
                written += 1
            manifest.append(f'{base.name} template={specs[0].name} impostor={specs[-1].name}')

        with open(os.path.join(out_dir, MANIFEST_NAME), 'w', encoding='utf-8') as handle:
            handle.write('# finger template impostor\n')
            handle.write('\n'.join(manifest) + '\n')

        logger.info(f'Wrote corpus {out_dir}: {plan.fingers} fingers, {written} impressions')
        return plan.fingers, written

# Global instance
corpus_service = CorpusService()
