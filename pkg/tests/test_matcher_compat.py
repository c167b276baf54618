import numpy as np
import pytest

from models.minutia import template_from_points
from utils.geometry import RigidTransform
from utils.matcher_compat import (CompatConfig, CompatEntry, cluster_score, compatibility_table, intra_table,
                                  match_compat)

def scattered_template(count, seed, size=300):
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < count:
        x, y = rng.uniform(20, size - 20, size=2)
        if all(np.hypot(x - px, y - py) >= 25 for px, py, _ in points):
            points.append((float(x), float(y), float(rng.uniform(0, 360))))
    return template_from_points(points, size, size)

def entry(pair_a, pair_b, rotation, residual=0.0):
    return CompatEntry(pair_a, pair_b, rotation, residual)

class TestTables:

    def test_intra_table_size(self):
        """Test one entry per unordered pair"""
        table = intra_table(scattered_template(6, seed=1))
        assert len(table) == 15
        assert all(e.i < e.j for e in table)

    def test_intra_table_small(self):
        """Test that fewer than two minutiae give an empty table"""
        assert intra_table(scattered_template(1, seed=2)) == []

    def test_self_compatibility(self):
        """Test that every pair is compatible with itself at zero rotation"""
        table = intra_table(scattered_template(5, seed=3))
        entries = compatibility_table(table, table)
        identity = [e for e in entries if e.pair_a == e.pair_b]
        assert len(identity) == 10
        assert all(e.implied_rotation == pytest.approx(0.0, abs=1e-9) for e in identity)

    def test_swapped_assignment(self):
        """Test that a pair listed in the other order is still found"""
        a = template_from_points([(0.0, 0.0, 30.0), (40.0, 0.0, 200.0)])
        # the same two minutiae in reverse order, shifted
        b = template_from_points([(100.0, 100.0, 200.0), (60.0, 100.0, 30.0)])
        entries = compatibility_table(intra_table(a), intra_table(b))
        assert any(e.pair_b == (1, 0) and e.implied_rotation == pytest.approx(0.0, abs=1e-9) for e in entries)

class TestClusterScore:

    def test_largest_cluster_wins(self):
        """Test that a cluster of five beats a cluster of three"""
        entries = [
            entry((0, 1), (0, 1), 0.0), entry((0, 2), (0, 2), 1.0), entry((0, 3), (0, 3), -1.0),
            entry((0, 4), (0, 4), 2.0), entry((1, 2), (1, 2), 0.5),
            entry((5, 6), (5, 6), 90.0), entry((5, 7), (5, 7), 91.0), entry((6, 7), (6, 7), 89.0),
        ]
        assert cluster_score(entries) == 5
        assert cluster_score(entries, CompatConfig(top_k=2)) == 8

    def test_rotation_disagreement_splits(self):
        """Test that entries implying different rotations are not clustered"""
        entries = [entry((0, 1), (0, 1), 0.0), entry((0, 2), (0, 2), 90.0)]
        assert cluster_score(entries) == 1

    def test_inconsistent_assignment_dropped(self):
        """Test that the one-to-one sweep drops a conflicting entry"""
        entries = [
            entry((0, 1), (0, 1), 0.0, 0.0),
            entry((0, 2), (0, 3), 0.0, 1.0),
            entry((1, 2), (1, 2), 0.0, 0.0),
        ]
        assert cluster_score(entries) == 2

    def test_empty(self):
        """Test that no entries score 0"""
        assert cluster_score([]) == 0

class TestMatchCompat:

    def test_self_match(self):
        """Test that a template matched with itself links every pair"""
        template = scattered_template(6, seed=4)
        assert match_compat(template, template) == 15

    def test_rigid_invariance(self):
        """Test that the score ignores rotation and translation"""
        a = scattered_template(7, seed=5)
        b = scattered_template(7, seed=6)
        moved = b.transformed(RigidTransform(-30.0, 45.0, 123.0))
        assert match_compat(a, moved) == match_compat(a, b)
        assert match_compat(a, a.transformed(RigidTransform(10.0, 10.0, -70.0))) == 21

    def test_rigid_invariance_sweep(self):
        """Test exact score equality over 100 random rigid motions"""
        rng = np.random.default_rng(21)
        a = scattered_template(12, seed=22)
        jittered = template_from_points([
            (m.x + rng.normal(0, 1.5), m.y + rng.normal(0, 1.5), m.direction + rng.normal(0, 3))
            for m in a
        ], 300, 300)
        reference = match_compat(a, jittered)
        for _ in range(100):
            dx, dy = rng.uniform(-60.0, 60.0, size=2)
            transform = RigidTransform(float(dx), float(dy), float(rng.uniform(-180.0, 180.0)))
            assert match_compat(a, a.transformed(transform)) == 66
            assert match_compat(a, jittered.transformed(transform)) == reference

    def test_genuine_beats_impostor(self):
        """Test that a jittered copy scores above an unrelated template"""
        rng = np.random.default_rng(7)
        a = scattered_template(10, seed=8)
        jittered = template_from_points([
            (m.x + rng.normal(0, 1.5), m.y + rng.normal(0, 1.5), m.direction + rng.normal(0, 3))
            for m in a
        ], 300, 300).transformed(RigidTransform(12.0, -5.0, 20.0))
        assert match_compat(a, jittered) > match_compat(a, scattered_template(10, seed=9))

    def test_too_few_minutiae(self):
        """Test that a single minutia scores 0"""
        assert match_compat(scattered_template(1, seed=10), scattered_template(5, seed=10)) == 0

    def test_negative_tolerance_rejected(self):
        """Test configuration validation"""
        with pytest.raises(ValueError):
            CompatConfig(tol_dist=-1.0)
        with pytest.raises(ValueError):
            CompatConfig(top_k=0)

if __name__ == '__main__':
    pytest.main([__file__])
