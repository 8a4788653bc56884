"""Tests for Monte-Carlo harmonic measure, Beurling checks, LERW sampling and condition (G) estimates."""
import numpy as np
import pytest

from loewnerlab.curves import CurveClass
from loewnerlab.errors import (
    InvalidConfigurationError,
    InvalidInputError,
    SamplingFailureError,
    SingularityError,
)
from loewnerlab.lattice import BoundaryEdge, CrossCut
from loewnerlab.stochastic import (
    MCEstimate,
    annulus_catalog,
    beurling_check,
    diameter_sampler,
    edges_in_sector,
    estimate_condition_G,
    greens_disc,
    harmonic_measure_disc_mc,
    harmonic_measure_mc,
    lerw_sampler,
    sle_sampler,
    sample_curves,
    sample_lerw,
    spawn_seeds,
)


def poisson_arc(z: complex, theta0: float, theta1: float, points: int = 20000) -> float:
    """Exit probability through an arc of the unit circle by midpoint quadrature of the Poisson kernel."""
    theta = theta0 + (theta1 - theta0) * (np.arange(points) + 0.5) / points
    kernel = (1 - abs(z) ** 2) / np.abs(np.exp(1j * theta) - z) ** 2
    return float(np.mean(kernel) * (theta1 - theta0) / (2 * np.pi))


def chord_sampler(points: int = 2):
    """Straight chord between the marks, ignoring the seed."""

    def sample(dom, seed):
        return CurveClass(np.linspace(dom.a.midpoint(dom.n), dom.b.midpoint(dom.n), points))

    return sample


class TestMCEstimate:
    def test_from_indicators(self):
        est = MCEstimate.from_indicators(np.array([1, 0, 1, 0]), seed=3)
        assert est.mean == 0.5
        assert est.stderr == pytest.approx(np.std([1, 0, 1, 0], ddof=1) / 2)
        assert est.n_samples == 4 and est.seed == 3

    def test_within(self):
        est = MCEstimate(0.5, 0.01, 100, 0)
        assert est.within(0.52)
        assert not est.within(0.6)


class TestDiscHarmonicMeasure:
    @pytest.mark.parametrize("alpha", [np.pi / 6, np.pi / 2, np.pi])
    def test_arc_from_centre(self, alpha):
        est = harmonic_measure_disc_mc(0, 0.0, alpha, walks=100_000, seed=1)
        assert est.within(alpha / (2 * np.pi), k=3)

    def test_arc_from_off_centre(self):
        z = 0.5 + 0.2j
        est = harmonic_measure_disc_mc(z, -0.5, 1.0, walks=100_000, seed=2)
        assert est.within(poisson_arc(z, -0.5, 1.0), k=3)

    def test_outside_disc(self):
        with pytest.raises(InvalidInputError):
            harmonic_measure_disc_mc(1.5, 0.0, 1.0, walks=10)

    def test_deterministic(self):
        a = harmonic_measure_disc_mc(0.1, 0.0, 1.0, walks=500, seed=9)
        b = harmonic_measure_disc_mc(0.1, 0.0, 1.0, walks=500, seed=9)
        assert a == b


class TestLatticeHarmonicMeasure:
    def test_quarters_partition_the_boundary(self, lattice_disc):
        starts = [np.pi / 4 + k * np.pi / 2 for k in range(4)]
        quarters = [edges_in_sector(lattice_disc, 0, t, t + np.pi / 2) for t in starts]
        assert sum(len(q) for q in quarters) == len(lattice_disc.boundary_loop)
        estimates = [harmonic_measure_mc(lattice_disc, 0, q, walks=4000, seed=5) for q in quarters]
        assert sum(e.mean for e in estimates) == pytest.approx(1.0)
        for e in estimates:
            assert abs(e.mean - 0.25) <= 3 * e.stderr + 0.03

    def test_halves_of_far_side(self, square8):
        top = [e for e in square8.boundary_loop if e.dir == "N"]
        left = [e for e in top if e.i < 4]
        right = [e for e in top if e.i >= 4]
        z = 0.5 + 0.25j
        whole = harmonic_measure_mc(square8, z, top, walks=4000, seed=6)
        halves = [harmonic_measure_mc(square8, z, side, walks=4000, seed=6) for side in (left, right)]
        assert halves[0].mean + halves[1].mean == pytest.approx(whole.mean)
        assert abs(halves[0].mean - halves[1].mean) <= 4 * whole.stderr + 0.02

    def test_full_boundary_is_certain(self, square8):
        est = harmonic_measure_mc(square8, 0.3 + 0.6j, square8.boundary_loop, walks=200, seed=0)
        assert est.mean == 1.0

    def test_rejects_bad_inputs(self, square8):
        edge = square8.boundary_loop[0]
        with pytest.raises(InvalidInputError):
            harmonic_measure_mc(square8, 0.5 + 0.5j, [edge], walks=0)
        with pytest.raises(InvalidInputError):
            harmonic_measure_mc(square8, 0.0 + 0.5j, [edge], walks=10)
        with pytest.raises(InvalidInputError):
            harmonic_measure_mc(square8, 0.5 + 0.5j, [BoundaryEdge(3, 3, "N")], walks=10)


class TestGreensFunction:
    def test_known_value(self):
        assert greens_disc(0, 0.5) == pytest.approx(-np.log(2) / (2 * np.pi))

    def test_symmetric(self):
        z = np.array([0.1 + 0.2j, -0.5j, 0.7])
        w = np.array([0.3 - 0.1j, 0.2 + 0.2j, -0.4j])
        assert np.allclose(greens_disc(z, w), greens_disc(w, z))

    def test_vanishes_at_boundary(self):
        assert abs(greens_disc(0, 1 - 1e-9)) < 1e-8

    def test_singular_on_diagonal(self):
        with pytest.raises(SingularityError):
            greens_disc(0.3, 0.3)

    def test_outside_disc(self):
        with pytest.raises(InvalidInputError):
            greens_disc(0, 1.0)


class TestBeurling:
    @pytest.mark.parametrize("r", [1e-2, 4e-2])
    def test_radial_slit_below_bound(self, r):
        report = beurling_check(None, 0, [r, 1.0], 1.0, walks=20000, seed=3)
        assert report.r == pytest.approx(r)
        assert report.passed
        assert report.estimate.within(4 / np.pi * np.arctan(np.sqrt(r)), k=4)

    def test_estimate_decreases_with_ratio(self):
        wide = beurling_check(None, 0, [0.04, 1.0], 1.0, walks=20000, seed=4)
        narrow = beurling_check(None, 0, [0.01, 1.0], 1.0, walks=20000, seed=4)
        assert narrow.estimate.mean < wide.estimate.mean

    @pytest.mark.slow
    @pytest.mark.parametrize("r", [1e-2, 1e-3])
    def test_radial_slit_acceptance(self, r):
        report = beurling_check(None, 0, [r, 1.0], 1.0, walks=100_000, seed=8)
        assert report.passed
        assert report.estimate.within(4 / np.pi * np.arctan(np.sqrt(r)), k=4)

    def test_touching_obstacle_passes(self):
        report = beurling_check(None, 0, [0.5, 1.0], 0.5, walks=2000, seed=1)
        assert report.bound == pytest.approx(4 / np.pi)
        assert report.passed

    def test_obstacle_must_reach_circle(self):
        with pytest.raises(InvalidConfigurationError):
            beurling_check(None, 0, [0.1, 0.5], 1.0, walks=10)

    def test_start_on_obstacle(self):
        with pytest.raises(InvalidInputError):
            beurling_check(None, 0, [-1.0, 1.0], 1.0, walks=10)

    def test_domain_boundary_joins_obstacle(self, square8):
        free = beurling_check(None, 0.3 + 0.5j, [0.3 + 0.6j, 0.3 + 1.0j], 0.5, walks=4000, seed=2)
        walled = beurling_check(square8, 0.3 + 0.5j, [0.3 + 0.6j, 0.3 + 1.0j], 0.5, walks=4000, seed=2)
        assert walled.estimate.mean < free.estimate.mean


class TestLERW:
    def test_endpoints(self, square8):
        curve = sample_lerw(square8, seed=1)
        assert curve.vertices[0] == square8.a.midpoint(8)
        assert curve.vertices[-1] == square8.b.midpoint(8)

    def test_simple_lattice_path(self, square8):
        centres = sample_lerw(square8, seed=2).vertices[1:-1]
        assert len(set(centres.tolist())) == centres.size
        assert np.allclose(np.abs(np.diff(centres)), 1 / 8)
        assert np.all(square8.contains(centres))

    def test_deterministic(self, slot_domain):
        a = sample_lerw(slot_domain, seed=11)
        b = sample_lerw(slot_domain, seed=11)
        assert np.array_equal(a.vertices, b.vertices)

    def test_seeds_differ(self, square8):
        paths = {tuple(sample_lerw(square8, seed=s).vertices.tolist()) for s in range(5)}
        assert len(paths) > 1

    def test_equal_marks(self, square8):
        with pytest.raises(InvalidInputError):
            sample_lerw(square8, square8.a, square8.a)

    def test_budget_exhausted(self, square8):
        with pytest.raises(SamplingFailureError):
            sample_lerw(square8, seed=0, budget=1)


class TestSamplers:
    def test_spawned_seeds(self):
        seeds = spawn_seeds(7, 5)
        assert seeds == spawn_seeds(7, 5)
        assert len(set(seeds)) == 5

    def test_sample_curves_order_is_stable(self, square8):
        first = sample_curves(lambda dom, s: CurveClass([complex(s)]), square8, 4, seed=3)
        assert [complex(c.vertices[0]) for c in first] == [complex(s) for s in spawn_seeds(3, 4)]

    def test_sle_sampler_starts_at_a(self, square8):
        curve = sle_sampler(2.0, 0.5, 0.01, curve_points=64)(square8, 3)
        assert curve.vertices[0] == pytest.approx(square8.a.midpoint(8), abs=1e-6)
        assert np.all(square8.contains(curve.vertices[1:]))

    def test_diameter_joins_marks(self, square8):
        curve = diameter_sampler(64)(square8, 0)
        assert curve.vertices[0] == pytest.approx(square8.a.midpoint(8), abs=1e-6)
        assert curve.vertices[-1] == pytest.approx(square8.b.midpoint(8), abs=1e-6)


class TestConditionG:
    def test_catalog(self, square8):
        catalog = annulus_catalog(square8, 2.0)
        assert catalog
        marks = [square8.a.midpoint(8), square8.b.midpoint(8)]
        for q in catalog:
            assert q.R == pytest.approx(2 * q.r)
            assert min(abs(m - q.z) for m in marks) >= q.R

    def test_catalog_rejects_small_ratio(self, square8):
        with pytest.raises(InvalidInputError):
            annulus_catalog(square8, 1.0)

    def test_straight_chord_never_crosses(self, square8):
        rows = estimate_condition_G(chord_sampler(), square8, [2.0, 4.0], samples=3, seed=1)
        assert [r["M"] for r in rows] == [2.0, 4.0]
        for row in rows:
            assert row["annuli_tested"] > 0
            assert row["p_hat"] == 0.0
            assert row["unforced"] == 0

    def test_stopping_cut_rows(self, square8):
        cut = CrossCut((0.5 + 0j, 0.5 + 1j))
        rows = estimate_condition_G(chord_sampler(17), square8, [2.0], samples=2, seed=1, stopping_cuts=[cut])
        assert [r["stopping"] for r in rows] == [0, 1]
        assert rows[1]["samples"] == 2
        assert rows[1]["p_hat"] == 0.0

    def test_missed_stopping_cut_leaves_row_empty(self, square8):
        cut = CrossCut((0.5 + 0j, 0.5 + 1j))
        rows = estimate_condition_G(chord_sampler(2), square8, [2.0], samples=2, seed=1, stopping_cuts=[cut])
        assert rows[1]["samples"] == 0
        assert rows[1]["p_hat"] is None

    def test_rejects_zero_samples(self, square8):
        with pytest.raises(InvalidInputError):
            estimate_condition_G(chord_sampler(), square8, [2.0], samples=0, seed=1)

    @pytest.mark.slow
    def test_lerw_crossing_probabilities(self, square8):
        rows = estimate_condition_G(lerw_sampler(), square8, [2.0, 4.0], samples=40, seed=2)
        for row in rows:
            assert 0.0 <= row["p_hat"] <= 1.0
        assert rows[1]["p_hat"] <= rows[0]["p_hat"] + 2 * (rows[0]["stderr"] + rows[1]["stderr"]) + 0.05
