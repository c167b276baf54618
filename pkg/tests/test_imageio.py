import os

import numpy as np
import pytest

from models.gray_image import Dislocation, GrayImage, SyntheticSpec
from utils.errors import ImageFormatError, ImageSizeError, SpecFormatError
from utils.imageio import (decode_pgm, encode_pgm, format_spec, is_pgm_data, load_pgm, normalize_intensity,
                           parse_spec_text, perturb_spec, read_ground_truth, save_pgm, synthesize_fingerprint,
                           write_synthetic)

class TestPgm:

    @pytest.fixture
    def image(self):
        """Small gradient image"""
        return GrayImage(np.arange(12 * 20, dtype=np.uint8).reshape(12, 20))

    def test_save_and_load(self, image, tmp_path):
        """Test that a saved image loads back identically"""
        path = str(tmp_path / 'gradient.pgm')
        save_pgm(image, path)
        assert is_pgm_data((tmp_path / 'gradient.pgm').read_bytes())
        assert load_pgm(path) == image

    def test_header_comments(self):
        """Test that comments inside the header are skipped"""
        data = b'P5\n# made by hand\n3 2\n# depth\n255\n' + bytes(range(6))
        image = decode_pgm(data)
        assert image.shape == (2, 3)
        assert image.pixels[1, 2] == 5

    def test_wrong_magic(self):
        """Test that ASCII PGM is rejected"""
        with pytest.raises(ImageFormatError) as exc:
            decode_pgm(b'P2\n2 2\n255\n0 0 0 0')
        assert exc.value.error_code == 'MALFORMED_HEADER'

    def test_unsupported_maxval(self):
        """Test that 16-bit files are rejected"""
        with pytest.raises(ImageFormatError) as exc:
            decode_pgm(b'P5\n2 2\n65535\n' + bytes(8))
        assert exc.value.error_code == 'UNSUPPORTED_MAXVAL'

    def test_truncated_payload(self, image):
        """Test that a short payload is reported"""
        with pytest.raises(ImageFormatError) as exc:
            decode_pgm(encode_pgm(image)[:-1])
        assert exc.value.error_code == 'TRUNCATED_PAYLOAD'

    def test_missing_file(self, tmp_path):
        """Test that a missing file surfaces as OSError"""
        with pytest.raises(OSError):
            load_pgm(str(tmp_path / 'nope.pgm'))

    def test_pipeline_minimum_size(self):
        """Test that tiny images are refused by the pipeline"""
        with pytest.raises(ImageSizeError):
            GrayImage(np.zeros((8, 64), dtype=np.uint8)).require_pipeline_size()

class TestNormalization:

    def test_target_moments(self):
        """Test that normalization reaches the requested mean and deviation"""
        rng = np.random.default_rng(7)
        image = GrayImage(np.clip(rng.normal(90, 15, size=(64, 64)), 0, 255))
        normalized, degenerate = normalize_intensity(image, 128.0, 40.0)
        assert not degenerate
        assert normalized.as_float().mean() == pytest.approx(128.0, abs=1.0)
        assert normalized.as_float().std() == pytest.approx(40.0, abs=1.5)

    def test_constant_image_flagged(self):
        """Test that a constant image is returned unchanged and flagged"""
        image = GrayImage(np.full((32, 32), 77, dtype=np.uint8))
        normalized, degenerate = normalize_intensity(image)
        assert degenerate
        assert normalized == image

class TestSynthesis:

    @pytest.fixture
    def spec(self):
        """Print with two opposite dislocations"""
        return SyntheticSpec(
            width=128, height=128, ridge_frequency=0.1, base_orientation=30.0,
            dislocations=(Dislocation(40.0, 50.0, 1), Dislocation(90.0, 80.0, -1)),
            noise_std=5.0, rng_seed=11, name='pair'
        )

    def test_deterministic(self, spec):
        """Test that identical specs render identical images"""
        first, truth_a = synthesize_fingerprint(spec)
        second, truth_b = synthesize_fingerprint(spec)
        assert first == second
        assert truth_a == truth_b

    def test_ground_truth_directions(self, spec):
        """Test planted minutiae directions are theta0 +/- 90"""
        _, truth = synthesize_fingerprint(spec)
        assert len(truth) == 2
        assert truth.minutiae[0] == (40.0, 50.0, pytest.approx(120.0))
        assert truth.minutiae[1][2] == pytest.approx(300.0)

    def test_noise_free_intensity_range(self):
        """Test a noise-free print spans the whole intensity range"""
        image, truth = synthesize_fingerprint(SyntheticSpec(width=64, height=64))
        assert len(truth) == 0
        assert image.pixels.min() <= 2
        assert image.pixels.max() >= 253

    def test_perturbed_impression_is_rigid_copy(self):
        """Test that a rotated impression matches the rotated pattern"""
        spec = SyntheticSpec(width=96, height=96, dislocations=(Dislocation(48.3, 47.6, 1),))
        moved = perturb_spec(spec, rotation=90.0)
        original, _ = synthesize_fingerprint(spec)
        rotated, truth = synthesize_fingerprint(moved)

        # 90 degrees about the centre of a square grid maps pixels onto pixels
        expected = np.rot90(original.as_float(), k=-1)
        assert np.abs(rotated.as_float() - expected).max() <= 1.0
        assert len(truth) == 1
        assert truth.minutiae[0][:2] == (pytest.approx(47.4), pytest.approx(48.3))

    def test_dislocations_leaving_frame_drop_from_truth(self):
        """Test that translated-out dislocations leave the ground truth"""
        spec = SyntheticSpec(width=64, height=64, dislocations=(Dislocation(60.0, 30.0, 1),))
        moved = perturb_spec(spec, translation=(10.0, 0.0))
        assert moved.dislocations == ()
        assert len(moved.outside_dislocations) == 1

    def test_write_synthetic(self, spec, tmp_path):
        """Test image and ground truth are written side by side"""
        image_path, truth_path = write_synthetic(spec, str(tmp_path))
        assert os.path.basename(image_path) == 'pair.pgm'
        assert load_pgm(image_path).shape == (128, 128)
        assert len(read_ground_truth(truth_path)) == 2

class TestSpecFiles:

    def test_sections(self):
        """Test multi-entry spec parsing"""
        text = (
            '[one]\n'
            'freq = 0.12\n'
            'dislocation = 10, 20, 1\n'
            '\n'
            '[two]  # second print\n'
            'width = 64\n'
            'height = 48\n'
        )
        specs = parse_spec_text(text)
        assert [s.name for s in specs] == ['one', 'two']
        assert specs[0].ridge_frequency == 0.12
        assert specs[0].dislocations == (Dislocation(10.0, 20.0, 1),)
        assert (specs[1].width, specs[1].height) == (64, 48)

    def test_anonymous_entry(self):
        """Test that keys before any section form one entry named print"""
        specs = parse_spec_text('theta0 = 45\nseed = 3\n')
        assert len(specs) == 1
        assert specs[0].name == 'print'
        assert specs[0].rng_seed == 3

    def test_format_parses_back(self):
        """Test that formatted specs parse to the same spec"""
        spec = SyntheticSpec(width=80, height=90, ridge_frequency=0.11, base_orientation=12.5,
                             dislocations=(Dislocation(5.5, 6.0, -1),), noise_std=2.0, rng_seed=4,
                             phase=0.25, name='x')
        assert parse_spec_text(format_spec(spec)) == [spec]

    @pytest.mark.parametrize('text, line_number', [
        ('width = 64\nbogus = 1\n', 2),
        ('[a]\nfreq = 0.5\n', 1),
        ('[a]\n\nfreq = fast\n', 3),
        ('[a]\ndislocation = 1,2\n', 2),
        ('[a]\nwidth 64\n', 2),
    ])
    def test_errors_cite_line(self, text, line_number):
        """Test that malformed spec files cite the offending line"""
        with pytest.raises(SpecFormatError) as exc:
            parse_spec_text(text)
        assert exc.value.line_number == line_number

if __name__ == '__main__':
    pytest.main([__file__])
