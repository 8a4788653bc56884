"""Tests for annulus and quadrilateral crossings and the discrete quadrilateral modulus."""
import numpy as np
import pytest

from loewnerlab.crossings import AnnulusQuery, QuadQuery, detect_unforced_crossings, quad_modulus
from loewnerlab.curves import CurveClass, ParamCurve
from loewnerlab.errors import InvalidQueryError

LEVEL = 2.5 / 6


@pytest.fixture
def straight(square6):
    return CurveClass([square6.a.midpoint(6), square6.b.midpoint(6)])


@pytest.fixture
def dipping(square6):
    """Straight chord with an excursion down to the bottom side near x = 1/2."""
    return CurveClass(
        [
            square6.a.midpoint(6),
            0.48 + LEVEL * 1j,
            0.48 + 0.05j,
            0.52 + 0.05j,
            0.52 + LEVEL * 1j,
            square6.b.midpoint(6),
        ]
    )


@pytest.fixture
def corridor_quad():
    return QuadQuery({(2, 0), (3, 0)}, ((2, 1), (2, 0), (4, 0), (4, 1)))


class TestQueries:
    def test_annulus_radii(self):
        with pytest.raises(InvalidQueryError):
            AnnulusQuery(0j, 0.3, 0.2)

    def test_quad_needs_distinct_corners(self):
        with pytest.raises(InvalidQueryError):
            QuadQuery({(0, 0)}, ((0, 0), (1, 0), (1, 0), (0, 1)))

    def test_quad_sides(self, corridor_quad):
        sides = corridor_quad.sides(6)
        assert [len(s) for s in sides] == [1, 2, 1, 2]

    def test_clockwise_corners(self):
        quad = QuadQuery({(2, 0), (3, 0)}, ((4, 1), (4, 0), (2, 0), (2, 1)))
        with pytest.raises(InvalidQueryError):
            quad.sides(6)


class TestAnnulusCrossings:
    def test_straight_chord_does_not_cross(self, square6, straight):
        report = detect_unforced_crossings(square6, straight, AnnulusQuery(0.5, 0.1, 0.3), refinement=4)
        assert report.total_crossings == 0

    def test_excursion_is_unforced(self, square6, dipping):
        report = detect_unforced_crossings(square6, dipping, AnnulusQuery(0.5, 0.1, 0.3), refinement=4)
        assert report.total_crossings == 2
        assert report.unforced_crossings == 2
        assert [c.entry for c in report.crossings] == ["out", "in"]

    def test_corridor_crossings_are_forced(self, corridor):
        chord = CurveClass([corridor.a.midpoint(6), corridor.b.midpoint(6)])
        report = detect_unforced_crossings(corridor, chord, AnnulusQuery(0.5, 0.2, 0.4), refinement=4)
        assert report.total_crossings == 2
        assert report.unforced_crossings == 0
        assert report.forced_crossings == 2

    def test_parametrized_curve_accepted(self, square6, dipping):
        curve = ParamCurve.from_vertices(dipping.vertices)
        report = detect_unforced_crossings(square6, curve, AnnulusQuery(0.5, 0.1, 0.3), refinement=4)
        assert report.unforced_crossings == 2

    def test_centre_away_from_boundary(self, square6, straight):
        with pytest.raises(InvalidQueryError):
            detect_unforced_crossings(square6, straight, AnnulusQuery(0.5 + 0.5j, 0.1, 0.3))

    def test_leaving_the_tip_is_forced(self, square6):
        tip = 0.3 + LEVEL * 1j
        initial = CurveClass([square6.a.midpoint(6), tip])
        rest = CurveClass([tip, square6.b.midpoint(6)])
        report = detect_unforced_crossings(square6, rest, AnnulusQuery(tip, 0.1, 0.2), initial=initial, refinement=4)
        assert report.total_crossings == 1
        assert report.unforced_crossings == 0


class TestQuadCrossings:
    def test_corridor_quad_is_forced(self, corridor, corridor_quad):
        chord = CurveClass([corridor.a.midpoint(6), corridor.b.midpoint(6)])
        report = detect_unforced_crossings(corridor, chord, corridor_quad, refinement=4)
        assert report.total_crossings == 1
        assert report.forced_crossings == 1
        assert (report.crossings[0].entry, report.crossings[0].exit) == ("S0", "S2")

    def test_quad_must_span_the_domain(self, square6):
        quad = QuadQuery({(2, 0), (3, 0)}, ((2, 1), (2, 0), (4, 0), (4, 1)))
        chord = CurveClass([square6.a.midpoint(6), square6.b.midpoint(6)])
        with pytest.raises(InvalidQueryError):
            detect_unforced_crossings(square6, chord, quad)


class TestQuadModulus:
    def test_two_by_one_rectangle(self):
        quad = QuadQuery({(0, 0), (1, 0)}, ((0, 1), (0, 0), (2, 0), (2, 1)))
        assert quad_modulus(None, quad, refinement=1, n=1) == pytest.approx(2.0, rel=1e-9)

    def test_rotation_inverts_modulus(self):
        quad = QuadQuery({(0, 0), (1, 0), (2, 0)}, ((0, 1), (0, 0), (3, 0), (3, 1)))
        m = quad_modulus(None, quad, refinement=2, n=1)
        assert m == pytest.approx(3.0, rel=1e-8)
        assert quad_modulus(None, quad.rotated(), refinement=2, n=1) * m == pytest.approx(1.0, rel=1e-8)

    def test_refinement_keeps_rectangle_exact(self, corridor, corridor_quad):
        assert quad_modulus(corridor, corridor_quad, refinement=4) == pytest.approx(2.0, rel=1e-8)

    def test_l_shape_between_bounds(self):
        cells = {(0, 0), (1, 0), (1, 1)}
        quad = QuadQuery(cells, ((0, 1), (0, 0), (2, 0), (2, 2)))
        m = quad_modulus(None, quad, refinement=4, n=1)
        assert np.isfinite(m) and 0.5 < m < 3.0

    def test_domain_validation(self, square6):
        quad = QuadQuery({(2, 0), (3, 0)}, ((2, 1), (2, 0), (4, 0), (4, 1)))
        with pytest.raises(InvalidQueryError):
            quad_modulus(square6, quad)
        assert quad_modulus(square6, quad, refinement=2, check_boundary=False) == pytest.approx(2.0, rel=1e-8)
