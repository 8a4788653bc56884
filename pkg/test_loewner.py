"""Tests for the Loewner chain, slit maps, Möbius maps, capacity and driving extraction."""
import numpy as np
import pytest

from loewnerlab.curves import CurveClass, DrivingFunction, function_metric
from loewnerlab.errors import InvalidInputError, NotSimpleError, PoleError
from loewnerlab.loewner import (
    MappingOut,
    brownian_path,
    extract_driving,
    forward_evolve,
    hcap,
    mobius_D_to_H,
    mobius_H_to_D,
    reparametrize_by_capacity,
    sample_sle,
    slit_forward,
    slit_inverse,
    trace_in_disc,
)


def zero_driving(T: float = 1.0) -> DrivingFunction:
    return DrivingFunction([0.0, T], [0.0, 0.0])


class TestSlitMaps:
    def test_inverse_undoes_forward(self):
        z = np.array([0.3 + 0.2j, -1 + 2j, 5 + 0.01j])
        back = slit_inverse(slit_forward(z, 0.4, 0.01), 0.4, 0.01)
        assert np.allclose(back, z, atol=1e-12)

    def test_tip_goes_to_driver(self):
        assert slit_inverse(0.7, 0.7, 0.04) == pytest.approx(0.7 + 0.4j)

    def test_real_line_outside_slit_stays_real(self):
        w = slit_forward(np.array([-3.0, 2.0]), 0.0, 0.25)
        assert np.allclose(w.imag, 0.0)
        assert w[0] < -3 and w[1] > 2


class TestForwardEvolve:
    def test_zero_driving_grows_vertical_slit(self):
        hull = forward_evolve(zero_driving(), 1e-3)
        assert hull.times.size == 1001
        assert np.allclose(hull.tips, 2j * np.sqrt(hull.times), atol=1e-9)
        assert hull.touching_steps == 0

    def test_zero_driving_map_is_closed_form(self):
        hull = forward_evolve(zero_driving(), 1e-3)
        z = np.array([1 + 1j, -2 + 0.5j])
        assert np.allclose(hull.mapping(z), z * np.sqrt(1.0 + 4.0 / (z * z)), atol=1e-9)

    def test_hcap_expansion_reads_capacity(self):
        hull = forward_evolve(zero_driving(), 1e-2)
        assert hull.mapping.hcap_expansion() == pytest.approx(1.0, abs=1e-6)

    def test_hcap_expansion_for_sle(self):
        hull = sample_sle(2.0, 0.5, 1e-3, seed=3)
        assert hull.mapping.hcap_expansion() == pytest.approx(0.5, abs=1e-4)

    def test_mapping_inverse(self):
        hull = sample_sle(4.0, 0.2, 1e-3, seed=11)
        z = np.array([0.5 + 1j, -0.3 + 0.7j, 2 + 2j])
        assert np.allclose(hull.mapping.inverse(hull.mapping(z)), z, atol=1e-9)

    def test_restrict_then_composes(self):
        m = sample_sle(3.0, 0.1, 1e-3, seed=5).mapping
        k = len(m) // 3
        tail = MappingOut(m.drivers[k:], m.steps[k:])
        z = np.array([1 + 1j, -1 + 0.5j])
        assert np.allclose(m.restrict(k).then(tail)(z), m(z), atol=1e-12)
        assert m.restrict(k).capacity + tail.capacity == pytest.approx(m.capacity)

    def test_tip_is_preimage_of_driver(self):
        hull = sample_sle(2.0, 0.1, 1e-3, seed=9)
        k = 50
        image = hull.mapping.restrict(k)(hull.tips[k])
        assert image.real == pytest.approx(hull.driving.w[k], abs=1e-6)
        assert abs(image.imag) < 1e-5

    def test_rejects_non_positive_step(self):
        with pytest.raises(InvalidInputError):
            forward_evolve(zero_driving(), 0.0)

    def test_trace_clock(self):
        hull = forward_evolve(zero_driving(2.0), 0.5)
        assert list(hull.trace.t) == [0.0, 0.25, 0.5, 0.75, 1.0]


class TestSampling:
    def test_brownian_path_starts_at_zero(self):
        t, B = brownian_path(1.0, 0.01, seed=1)
        assert t.size == B.size == 101
        assert B[0] == 0.0

    def test_brownian_increment_variance(self):
        _, B = brownian_path(1.0, 1e-4, seed=2)
        inc = np.diff(B)
        assert np.var(inc) * 1e4 == pytest.approx(1.0, rel=0.05)

    def test_sle_is_deterministic_in_seed(self):
        a = sample_sle(3.0, 0.1, 1e-3, seed=42)
        b = sample_sle(3.0, 0.1, 1e-3, seed=42)
        c = sample_sle(3.0, 0.1, 1e-3, seed=43)
        assert np.array_equal(a.tips, b.tips)
        assert not np.array_equal(a.tips, c.tips)

    def test_kappa_zero_is_straight(self):
        hull = sample_sle(0.0, 1.0, 1e-3, seed=7)
        assert np.allclose(hull.tips, 2j * np.sqrt(hull.times), atol=1e-9)

    def test_negative_kappa(self):
        with pytest.raises(InvalidInputError):
            sample_sle(-1.0, 1.0, 1e-2, seed=0)


class TestMobius:
    def test_pole(self):
        with pytest.raises(PoleError):
            mobius_D_to_H(1.0)

    def test_outside_disc(self):
        with pytest.raises(InvalidInputError):
            mobius_D_to_H(2.0)

    def test_lower_half_plane(self):
        with pytest.raises(InvalidInputError):
            mobius_H_to_D(-1j)

    def test_known_values(self):
        assert mobius_H_to_D(0) == pytest.approx(-1)
        assert mobius_H_to_D(1j) == pytest.approx(0)
        assert mobius_D_to_H(0) == pytest.approx(1j)

    def test_round_trip(self):
        w = np.array([0.1 + 0.2j, 3 + 1j, -2 + 0.01j])
        assert np.allclose(mobius_D_to_H(mobius_H_to_D(w)), w, atol=1e-12)


class TestExtractDriving:
    def test_too_few_vertices(self):
        with pytest.raises(NotSimpleError):
            extract_driving(np.array([0, 1j]), npts=10)

    def test_start_off_real_line(self):
        with pytest.raises(InvalidInputError):
            extract_driving(np.array([1j, 2j, 3j]), npts=10)

    def test_touching_real_line(self):
        with pytest.raises(NotSimpleError):
            extract_driving(np.array([0, 1j, 2.0]), npts=10)

    def test_vertical_slit_has_zero_driver(self):
        trace = 2j * np.sqrt(np.linspace(0, 1, 101))
        w = extract_driving(trace, npts=200)
        assert np.allclose(w.w, 0.0, atol=1e-9)
        assert w.horizon == pytest.approx(1.0)

    def test_round_trip_from_sle(self):
        hull = sample_sle(2.0, 1.0, 1e-3, seed=1)
        w = extract_driving(CurveClass(hull.tips), npts=2000)
        assert w.extraction_error < 1e-5
        assert function_metric(w, hull.driving) < 1e-5

    @pytest.mark.slow
    @pytest.mark.parametrize("kappa", [2.0, 3.0])
    @pytest.mark.parametrize("seed", range(20))
    def test_round_trip_many_seeds(self, kappa, seed):
        hull = sample_sle(kappa, 0.5, 1e-4, seed=seed)
        w = extract_driving(hull.tips, npts=5000)
        assert function_metric(w, hull.driving) <= 0.05

    def test_subsamples_long_trace(self):
        hull = sample_sle(1.0, 1.0, 1e-3, seed=4)
        w = extract_driving(hull.tips, npts=100)
        assert w.t.size <= 101
        assert w.horizon == pytest.approx(1.0, abs=0.15)


class TestCapacity:
    def test_vertical_segment(self):
        assert hcap(np.array([0, 2j])) == pytest.approx(1.0, rel=1e-9)

    def test_scaling(self):
        seg = np.array([0, np.exp(1j * np.pi / 3)])
        assert hcap(2 * seg) == pytest.approx(4 * hcap(seg), rel=1e-6)

    def test_translation_along_real_line(self):
        seg = np.array([0, 0.5 + 1j, 0.2 + 1.5j])
        assert hcap(seg + 3.0) == pytest.approx(hcap(seg), rel=1e-9)

    def test_single_point(self):
        assert hcap(np.array([0.5 + 0j])) == 0.0

    def test_detached_point(self):
        with pytest.raises(InvalidInputError):
            hcap(np.array([1j]))


class TestDiscTrace:
    def test_starts_at_minus_one(self):
        hull = sample_sle(2.0, 1.0, 1e-2, seed=0)
        gamma = trace_in_disc(hull)
        assert gamma.z[0] == pytest.approx(-1)
        assert gamma.t[-1] == 1.0
        assert np.all(np.abs(gamma.z) <= 1 + 1e-12)

    def test_capacity_clock(self):
        hull = sample_sle(2.0, 1.0, 1e-2, seed=0)
        gamma = trace_in_disc(hull)
        again = reparametrize_by_capacity(gamma)
        assert np.allclose(again.t, gamma.t, atol=1e-8)

    def test_truncated_clock_keeps_capacity_relation(self):
        T = 0.5
        hull = sample_sle(0.0, T, 1e-2, seed=0)
        gamma = trace_in_disc(hull)
        sigma_T = T / (1 + T)
        caps = sigma_T * gamma.t / (1 - sigma_T * gamma.t)
        assert np.allclose(caps, hull.times, atol=1e-12)
        assert np.all(np.diff(gamma.t) > 0)

    def test_truncated_clock_matches_half_plane_capacity(self):
        hull = sample_sle(0.0, 0.5, 1e-2, seed=0)
        gamma = trace_in_disc(hull)
        sigma_T = 0.5 / 1.5
        k = gamma.t.size // 2
        expected = sigma_T * gamma.t[k] / (1 - sigma_T * gamma.t[k])
        assert hcap(hull.tips[: k + 1]) == pytest.approx(expected, rel=1e-3)
