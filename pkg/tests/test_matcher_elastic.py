import numpy as np
import pytest

from models.minutia import template_from_points
from utils.geometry import RigidTransform
from utils.matcher_elastic import ElasticConfig, ToleranceBox, align_minutiae, count_matches, elastic_match

def scattered_template(count, seed, size=300):
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < count:
        x, y = rng.uniform(20, size - 20, size=2)
        if all(np.hypot(x - px, y - py) >= 30 for px, py, _ in points):
            points.append((float(x), float(y), float(rng.uniform(0, 360))))
    return template_from_points(points, size, size)

class TestToleranceBox:

    def test_grows_with_radius(self):
        """Test half sizes w0 + k r and h0 + k r"""
        half_w, half_h = ToleranceBox(4.0, 6.0, 0.1).half_sizes(np.array([0.0, 100.0]))
        assert np.allclose(half_w, [4.0, 14.0])
        assert np.allclose(half_h, [6.0, 16.0])

    def test_invalid_parameters(self):
        """Test that negative sizes and unknown assignments are rejected"""
        with pytest.raises(ValueError):
            ToleranceBox(-1.0, 8.0, 0.0)
        with pytest.raises(ValueError):
            ElasticConfig(assignment='hungarian')

    def test_adaptive_box_absorbs_distortion(self):
        """Test that a growing box tolerates displacement proportional to the radius"""
        radii = [100.0, 150.0, 200.0, 250.0, 300.0]
        a = template_from_points([(r, 0.0, 0.0) for r in radii], 600, 600)
        b = template_from_points([(1.03 * r, 0.0, 0.0) for r in radii], 600, 600)
        identity = RigidTransform.identity()

        rigid = count_matches(a, b, identity, (0.0, 0.0), ElasticConfig(w0=2.0, h0=2.0, k=0.0))
        adaptive = count_matches(a, b, identity, (0.0, 0.0), ElasticConfig(w0=2.0, h0=2.0, k=0.05))
        assert len(rigid) == 0
        assert sorted(adaptive) == [(i, i) for i in range(5)]

    def test_direction_tolerance(self):
        """Test that a minutia pointing the wrong way is not matched"""
        a = template_from_points([(50.0, 50.0, 0.0)])
        b = template_from_points([(50.0, 50.0, 90.0)])
        assert count_matches(a, b, RigidTransform.identity(), (50.0, 50.0)) == []

class TestAlignment:

    def test_recovers_rigid_motion(self):
        """Test that the anchor search finds the transform mapping A onto B"""
        a = scattered_template(8, seed=1)
        truth = RigidTransform(-20.0, 35.0, 47.0)
        estimate = align_minutiae(a, a.transformed(truth))
        assert estimate.rot == pytest.approx(47.0, abs=1e-6)
        assert estimate.dx == pytest.approx(-20.0, abs=1e-6)
        assert estimate.dy == pytest.approx(35.0, abs=1e-6)

    def test_empty_template_rejected(self):
        """Test that alignment needs minutiae on both sides"""
        with pytest.raises(ValueError):
            align_minutiae(scattered_template(3, seed=2), template_from_points([]))

class TestElasticMatch:

    def test_identical(self):
        """Test that a template matches itself perfectly"""
        template = scattered_template(9, seed=3)
        assert elastic_match(template, template) == pytest.approx(1.0)

    def test_rigidly_moved(self):
        """Test that rotation and translation do not lower the score"""
        template = scattered_template(9, seed=4)
        moved = template.transformed(RigidTransform(15.0, -8.0, -120.0))
        assert elastic_match(template, moved) == pytest.approx(1.0)

    def test_partial_overlap(self):
        """Test 2 * matched / (|A| + |B|) on a subset"""
        a = scattered_template(6, seed=5)
        b = a.with_minutiae(a.minutiae[:4])
        assert elastic_match(a, b) == pytest.approx(0.8)

    def test_extra_minutiae_lower_the_score(self):
        """Test that adding unmatched minutiae never raises the score"""
        cfg = ElasticConfig(assignment='optimal')
        a = scattered_template(6, seed=6)
        base = elastic_match(a, a, cfg)
        cluttered = a.with_minutiae(a.minutiae + scattered_template(3, seed=7, size=900).minutiae)
        assert elastic_match(a, cluttered, cfg) <= base
        assert elastic_match(a, cluttered, cfg) >= 2 * 6 / (6 + 9) - 1e-12

    def test_empty_scores_zero(self):
        """Test that an empty template scores 0"""
        assert elastic_match(template_from_points([]), scattered_template(3, seed=8)) == 0.0

    def test_greedy_and_optimal_agree_on_clean_data(self):
        """Test both assignment strategies on a well-separated template"""
        a = scattered_template(7, seed=9)
        moved = a.transformed(RigidTransform(3.0, 4.0, 10.0))
        assert elastic_match(a, moved, ElasticConfig(assignment='greedy')) == \
            elastic_match(a, moved, ElasticConfig(assignment='optimal'))

if __name__ == '__main__':
    pytest.main([__file__])
