import math

import numpy as np
import pytest

from models.minutia import Minutia, MinutiaKind, template_from_points
from utils.geometry import (RigidTransform, bearing, circular_mean, normalize_direction, wrap_angle,
                            wrap_angles)

class TestAngles:

    def test_wrap_angle_range(self):
        """Test wrapping into (-180, 180]"""
        assert wrap_angle(180.0) == 180.0
        assert wrap_angle(-180.0) == 180.0
        assert wrap_angle(190.0) == pytest.approx(-170.0)
        assert wrap_angle(720.0) == pytest.approx(0.0)

    def test_wrap_angles_matches_scalar(self):
        """Test the vectorized wrap agrees with the scalar one"""
        rng = np.random.default_rng(3)
        angles = rng.uniform(-1000, 1000, size=200)
        expected = [wrap_angle(a) for a in angles]
        assert np.allclose(wrap_angles(angles), expected)

    def test_normalize_direction(self):
        """Test directions land in [0, 360)"""
        assert normalize_direction(-90.0) == 270.0
        assert normalize_direction(360.0) == 0.0
        assert normalize_direction(-1e-20) == 0.0

    def test_bearing_and_circular_mean(self):
        """Test bearing convention and mean across the wrap point"""
        assert bearing(0, 0, 0, 1) == pytest.approx(90.0)
        assert circular_mean(np.array([170.0, -170.0])) == pytest.approx(180.0)

class TestRigidTransform:

    def test_inverse_round_trip(self):
        """Test that a transform followed by its inverse is the identity"""
        t = RigidTransform(12.5, -3.0, 37.0)
        points = np.array([[0.0, 0.0], [10.0, 5.0], [-4.0, 100.0]])
        back = t.inverse().apply_points(t.apply_points(points))
        assert np.allclose(back, points)

    def test_about_point_keeps_centre(self):
        """Test that rotating about a point leaves that point fixed"""
        t = RigidTransform.about_point(33.0, 50.0, 60.0)
        assert t.apply_point(50.0, 60.0) == pytest.approx((50.0, 60.0))

    def test_rotation_direction(self):
        """Test that +90 degrees turns the x axis onto the y axis"""
        x, y = RigidTransform(0, 0, 90).apply_point(1.0, 0.0)
        assert x == pytest.approx(0.0, abs=1e-12)
        assert y == pytest.approx(1.0)

    def test_template_transform_moves_directions(self):
        """Test that transforming a template rotates directions too"""
        template = template_from_points([(10.0, 0.0, 350.0)])
        moved = template.transformed(RigidTransform(0, 0, 20.0))
        assert moved[0].direction == pytest.approx(10.0)
        assert moved[0].x == pytest.approx(10.0 * math.cos(math.radians(20)))

class TestMinutia:

    def test_kind_codes(self):
        """Test kind code mapping both ways"""
        for kind in MinutiaKind:
            assert MinutiaKind.from_code(kind.code) is kind

    def test_quality_clamped(self):
        """Test quality is clamped into [0, 1]"""
        assert Minutia(0, 0, 0, quality=3.0).quality == 1.0
        assert Minutia(0, 0, 0, quality=-1.0).quality == 0.0

if __name__ == '__main__':
    pytest.main([__file__])
