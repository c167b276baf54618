import math
from dataclasses import replace

import numpy as np
import pytest

from models.fingercode import AlignmentOffset, FingerCode
from models.gray_image import GrayImage, SyntheticSpec
from services.corpus_service import CorpusPlan, CorpusService
from utils.errors import FingerCodeFormatError, NoAdmissibleOffsetError
from utils.imageio import perturb_spec, synthesize_fingerprint
from utils.matcher_ridge import (MAX_RIDGE_DISTANCE, GaborBankParams, RidgeConfig, align_fingercodes,
                                 alignment_scores, compare_fingercodes, extract_fingercode, fingercode_distance,
                                 format_fingercode, gabor_bank, gabor_kernel, is_fingercode_data, match_ridge,
                                 parse_fingercode, read_fingercode, write_fingercode)

def unit_cells(grid_h, grid_w, seed):
    """Random non-negative 8-vectors of unit length per cell"""
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, 1.0, size=(grid_h, grid_w, 8))
    return values / np.linalg.norm(values, axis=2, keepdims=True)

def code(values, valid=None, cell_size=16):
    if valid is None:
        valid = np.ones(values.shape[:2], dtype=bool)
    return FingerCode(values, valid, cell_size)

def patchwork(width, height, seed, block=32, frequency=0.1):
    """Canvas of square blocks, each filled with a wave of its own orientation"""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    canvas = np.zeros((height, width))
    for top in range(0, height, block):
        for left in range(0, width, block):
            theta = math.radians(rng.uniform(0.0, 180.0))
            rows, cols = slice(top, top + block), slice(left, left + block)
            phase = 2 * math.pi * frequency * (xs[rows, cols] * math.cos(theta) + ys[rows, cols] * math.sin(theta))
            canvas[rows, cols] = 127.5 * (1.0 + np.cos(phase))
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)

class TestGaborBank:

    def test_kernel_zero_mean(self):
        """Test that every kernel of the bank ignores constant brightness"""
        params = GaborBankParams()
        for theta in params.orientations:
            kernel = gabor_kernel(theta, params.frequency, params.sigma_x, params.sigma_y)
            assert abs(kernel.sum()) < 1e-9
            assert kernel.shape == (25, 25)

    def test_orientations(self):
        """Test the eight filter orientations"""
        assert GaborBankParams().orientations == (0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5)

    @pytest.mark.parametrize('theta, strongest', [(0.0, 0), (90.0, 4), (45.0, 2)])
    def test_tuned_to_wave_orientation(self, theta, strongest):
        """Test that the filter aligned with the wave responds most"""
        image, _ = synthesize_fingerprint(SyntheticSpec(width=96, height=96, base_orientation=theta))
        fc = extract_fingercode(gabor_bank(image))
        centre = fc.values[2, 2]
        assert int(np.argmax(centre)) == strongest
        if theta == 90.0:
            assert int(np.argmin(centre)) == 0

    def test_constant_image_no_response(self):
        """Test that a flat image gives no texture"""
        image = GrayImage(np.full((64, 64), 100, dtype=np.uint8))
        fc = extract_fingercode(gabor_bank(image))
        assert fc.values.max() < 1e-6

    def test_bank_shape(self):
        """Test the filtered stack keeps the image size"""
        image, _ = synthesize_fingerprint(SyntheticSpec(width=70, height=50))
        assert gabor_bank(image).shape == (8, 50, 70)

class TestFingerCode:

    def test_tessellation(self):
        """Test grid size and validity from the mask coverage"""
        filtered = np.random.default_rng(1).uniform(size=(8, 64, 80))
        mask = np.zeros((64, 80), dtype=bool)
        mask[:, :40] = True
        fc = extract_fingercode(filtered, mask, cell_size=16)
        assert (fc.grid_h, fc.grid_w) == (4, 5)
        assert fc.valid[:, :2].all()
        assert fc.valid[:, 2].all()
        assert not fc.valid[:, 3:].any()
        assert not fc.values[:, 3:].any()

    def test_variance_statistic(self):
        """Test that the variance statistic squares the deviation"""
        filtered = np.random.default_rng(2).uniform(size=(8, 32, 32))
        std = extract_fingercode(filtered, statistic='std')
        variance = extract_fingercode(filtered, statistic='variance')
        assert np.allclose(variance.values, std.values ** 2)

    def test_shifted_origin(self):
        """Test that a shifted tessellation equals the code of the shifted image"""
        filtered = np.random.default_rng(3).uniform(size=(8, 64, 64))
        shifted = extract_fingercode(filtered, grid=(4, 4), origin=(16, 0))
        direct = extract_fingercode(filtered[:, :, 16:])
        assert np.allclose(shifted.values[:, :3], direct.values)
        assert not shifted.valid[:, 3].any()

    def test_negative_origin(self):
        """Test that cells falling off the image are invalid"""
        filtered = np.random.default_rng(4).uniform(size=(8, 48, 48))
        fc = extract_fingercode(filtered, grid=(3, 3), origin=(0, -20))
        assert not fc.valid[:2].any()
        assert fc.valid[2].all()

    def test_invalid_cells_are_zeroed(self):
        """Test that invalid cells carry no values"""
        values = np.ones((2, 2, 8))
        valid = np.array([[True, False], [True, True]])
        assert not code(values, valid).values[0, 1].any()

class TestAlignment:

    def test_self_alignment(self):
        """Test that a code aligns with itself at the zero offset"""
        fc = code(unit_cells(6, 8, seed=5))
        assert align_fingercodes(fc, fc) == AlignmentOffset(0, 0)

    def test_one_cell_shift(self):
        """Test that content shifted one cell right aligns at dx = 1"""
        values = unit_cells(6, 8, seed=6)
        shifted = unit_cells(6, 8, seed=7)
        shifted[:, 1:] = values[:, :-1]
        assert align_fingercodes(code(values), code(shifted)) == AlignmentOffset(1, 0)

    def test_vertical_shift(self):
        """Test a shift of two rows up"""
        values = unit_cells(7, 5, seed=8)
        shifted = unit_cells(7, 5, seed=9)
        shifted[:-2] = values[2:]
        assert align_fingercodes(code(values), code(shifted)) == AlignmentOffset(0, -2)

    def test_ties_prefer_small_offsets(self):
        """Test that a uniform code resolves ties to the zero offset"""
        values = np.ones((4, 4, 8)) / math.sqrt(8)
        assert align_fingercodes(code(values), code(values)) == AlignmentOffset(0, 0)

    def test_fft_and_direct_agree(self):
        """Test both correlation methods give the same score map"""
        rng = np.random.default_rng(10)
        fa = code(rng.uniform(size=(5, 7, 8)), rng.uniform(size=(5, 7)) > 0.2)
        fb = code(rng.uniform(size=(6, 4, 8)), rng.uniform(size=(6, 4)) > 0.2)
        fft = alignment_scores(fa, fb, method='fft')
        direct = alignment_scores(fa, fb, method='direct')
        assert np.array_equal(np.isnan(fft), np.isnan(direct))
        admissible = ~np.isnan(direct)
        assert np.allclose(fft[admissible], direct[admissible], atol=1e-6)

    def test_no_admissible_offset(self):
        """Test that a code without valid cells cannot be aligned"""
        empty = code(np.zeros((4, 4, 8)), np.zeros((4, 4), dtype=bool))
        other = code(unit_cells(4, 4, seed=11))
        with pytest.raises(NoAdmissibleOffsetError):
            align_fingercodes(empty, other)
        assert fingercode_distance(empty, other) == MAX_RIDGE_DISTANCE

    def test_scores_are_bounded(self):
        """Test that the self offset scores 1 and no offset scores above it"""
        rng = np.random.default_rng(17)
        fc = code(rng.uniform(size=(6, 5, 8)) * 40.0, rng.uniform(size=(6, 5)) > 0.3)
        scores = alignment_scores(fc, fc)
        assert scores[fc.grid_h - 1, fc.grid_w - 1] == pytest.approx(1.0, abs=1e-9)
        assert np.nanmax(scores) <= 1.0 + 1e-9
        assert np.nanmin(scores) >= -1.0 - 1e-9

    def test_high_energy_cells_do_not_win(self):
        """Test that a bright corner elsewhere does not pull the self alignment"""
        values = unit_cells(6, 6, seed=18)
        values[4:, 4:] *= 50.0
        fc = code(values)
        assert align_fingercodes(fc, fc) == AlignmentOffset(0, 0)
        assert align_fingercodes(fc, fc, method='direct') == AlignmentOffset(0, 0)

    def test_cell_size_mismatch(self):
        """Test that codes from different tessellations are not compared"""
        with pytest.raises(ValueError):
            alignment_scores(code(unit_cells(2, 2, 1), cell_size=16), code(unit_cells(2, 2, 1), cell_size=12))

class TestDistance:

    def test_known_distance(self):
        """Test the Euclidean distance over common cells divided by their count"""
        a = np.zeros((1, 2, 8))
        b = np.zeros((1, 2, 8))
        b[0, 0, 0] = 3.0
        b[0, 1, 0] = 4.0
        assert compare_fingercodes(code(a), code(b), AlignmentOffset(0, 0)) == pytest.approx(5.0 / 2)

    def test_no_common_cells(self):
        """Test the sentinel distance when nothing overlaps"""
        fa = code(unit_cells(2, 2, seed=12))
        assert compare_fingercodes(fa, fa, AlignmentOffset(5, 0)) == MAX_RIDGE_DISTANCE

    def test_identical_codes(self):
        """Test that a code is at distance 0 from itself"""
        fa = code(unit_cells(3, 3, seed=13))
        assert fingercode_distance(fa, fa) == 0.0

    def test_translated_images(self):
        """Test that alignment finds the translation and shrinks the distance"""
        canvas = patchwork(288, 256, seed=14)
        image_a = GrayImage(canvas[:, 32:288])
        image_b = GrayImage(canvas[:, 0:256])

        fa = extract_fingercode(gabor_bank(image_a))
        fb = extract_fingercode(gabor_bank(image_b))
        assert align_fingercodes(fa, fb) == AlignmentOffset(2, 0)

        aligned = match_ridge(image_a, image_b)
        unaligned = compare_fingercodes(fa, fb, AlignmentOffset(0, 0))
        assert aligned < 0.5 * unaligned

    def test_direct_alignment_matches_fft(self):
        """Test that the matcher gives the same distance with either alignment method"""
        canvas = patchwork(160, 128, seed=15)
        image_a = GrayImage(canvas[:, 32:160])
        image_b = GrayImage(canvas[:, 0:128])
        fft = match_ridge(image_a, image_b, cfg=RidgeConfig(alignment='fft'))
        direct = match_ridge(image_a, image_b, cfg=RidgeConfig(alignment='direct'))
        assert fft == pytest.approx(direct)

    def test_config_validation(self):
        """Test ridge configuration limits"""
        with pytest.raises(ValueError):
            RidgeConfig(cell_size=4)
        with pytest.raises(ValueError):
            RidgeConfig(statistic='mean')
        with pytest.raises(ValueError):
            GaborBankParams(frequency=0.0)

class TestSyntheticPrints:

    @pytest.fixture
    def plan(self):
        return CorpusPlan(width=160, height=160, margin=32, min_minutiae=2, max_minutiae=5)

    def corpus_print(self, plan, seed, size=None):
        """Noisy seeded print drawn the way the corpus generator draws fingers"""
        if size is not None:
            plan = replace(plan, width=size, height=size)
        spec = CorpusService().finger_spec(plan, seed, np.random.default_rng(seed))
        image, _ = synthesize_fingerprint(replace(spec, noise_std=8.0, rng_seed=seed))
        return spec, image

    @pytest.mark.parametrize('size, seed', [(160, 1), (200, 2), (128, 3), (160, 4)])
    def test_self_match_is_exact(self, plan, size, seed):
        """Test that a Gabor-filtered print aligns with itself at (0, 0) and scores 0"""
        _, image = self.corpus_print(plan, seed, size)
        fc = extract_fingercode(gabor_bank(image))
        assert align_fingercodes(fc, fc) == AlignmentOffset(0, 0)
        assert align_fingercodes(fc, fc, method='direct') == AlignmentOffset(0, 0)
        assert fingercode_distance(fc, fc) == 0.0
        assert match_ridge(image, image) <= 1e-9

    def test_self_match_with_mask(self, plan):
        """Test the self identity when only part of the grid is foreground"""
        _, image = self.corpus_print(plan, 5)
        mask = np.zeros((160, 160), dtype=bool)
        mask[16:150, 24:140] = True
        fc = extract_fingercode(gabor_bank(image), mask)
        assert 0 < fc.valid_count < fc.grid_w * fc.grid_h
        assert align_fingercodes(fc, fc) == AlignmentOffset(0, 0)
        assert match_ridge(image, image, mask_a=mask, mask_b=mask) <= 1e-9

    @pytest.mark.parametrize('seed', [6, 7, 8])
    def test_symmetric(self, plan, seed):
        """Test that swapping the two impressions keeps the distance within 5%"""
        spec, image_a = self.corpus_print(plan, seed)
        other = perturb_spec(spec, rotation=4.0, translation=(9.0, -6.0), noise_std=8.0, seed=seed + 100)
        image_b, _ = synthesize_fingerprint(other)
        forward = match_ridge(image_a, image_b)
        backward = match_ridge(image_b, image_a)
        assert forward == pytest.approx(backward, rel=0.05)

    def test_stored_codes_match_reextraction(self, plan):
        """Test that comparing stored codes equals re-extracting on the aligned grid"""
        spec, image_a = self.corpus_print(plan, 9)
        image_b, _ = synthesize_fingerprint(perturb_spec(spec, translation=(32.0, 16.0), noise_std=8.0, seed=3))
        fa = extract_fingercode(gabor_bank(image_a))
        fb = extract_fingercode(gabor_bank(image_b))
        assert fingercode_distance(fa, fb) == pytest.approx(match_ridge(image_a, image_b), abs=1e-9)

    def test_self_closer_than_translated_copy(self, plan):
        """Test that no genuine pair beats a self match"""
        spec, image = self.corpus_print(plan, 10)
        moved, _ = synthesize_fingerprint(perturb_spec(spec, translation=(16.0, 0.0), noise_std=8.0, seed=10))
        assert match_ridge(image, image) < match_ridge(image, moved)

class TestFingerCodeFile:

    @pytest.fixture
    def fingercode(self):
        """Small code with one invalid cell"""
        values = unit_cells(2, 3, seed=16)
        valid = np.array([[True, True, False], [True, True, True]])
        return code(values, valid)

    def test_write_and_read(self, fingercode, tmp_path):
        """Test that a written code reads back identically"""
        path = str(tmp_path / 'print.fc')
        write_fingercode(fingercode, path)
        assert is_fingercode_data((tmp_path / 'print.fc').read_bytes())
        assert read_fingercode(path) == fingercode

    def test_header(self, fingercode):
        """Test the header line layout"""
        assert format_fingercode(fingercode).splitlines()[0] == 'FC 3 2 16'

    @pytest.mark.parametrize('mutate, line_number', [
        (lambda lines: ['FC 3 two 16'] + lines[1:], 1),
        (lambda lines: ['FPT1 3 2 16'] + lines[1:], 1),
        (lambda lines: lines[:2] + ['0 0 1 1 2 3'] + lines[3:], 3),
        (lambda lines: lines[:2] + [lines[1]] + lines[3:], 3),
        (lambda lines: lines[:2] + ['9 0 1 0 0 0 0 0 0 0 0'] + lines[3:], 3),
        (lambda lines: lines[:2] + ['1 0 1 -1 0 0 0 0 0 0 0'] + lines[3:], 3),
        (lambda lines: lines[:-1], 6),
    ])
    def test_malformed(self, fingercode, mutate, line_number):
        """Test that malformed FingerCode files cite the offending line"""
        text = '\n'.join(mutate(format_fingercode(fingercode).splitlines())) + '\n'
        with pytest.raises(FingerCodeFormatError) as exc:
            parse_fingercode(text)
        assert exc.value.line_number == line_number

if __name__ == '__main__':
    pytest.main([__file__])
