"""Tests for curve containers, the Fréchet metric and the driving-function metric."""
import math

import numpy as np
import pytest

from loewnerlab.curves import (
    CurveClass,
    DrivingFunction,
    ParamCurve,
    canonicalize,
    frechet_distance,
    function_metric,
    read_curve,
    read_driving,
    write_curve,
    write_driving,
)
from loewnerlab.errors import InvalidInputError


def _interval(a: complex, b: complex, c: complex, eps: float):
    """Scalar free interval {s in [0,1] : |a + s(b-a) - c| <= eps}, or None."""
    dx, dy = b.real - a.real, b.imag - a.imag
    ex, ey = a.real - c.real, a.imag - c.imag
    A = dx * dx + dy * dy
    B = 2 * (dx * ex + dy * ey)
    C = ex * ex + ey * ey - eps * eps
    if A == 0:
        return (0.0, 1.0) if C <= 0 else None
    disc = B * B - 4 * A * C
    if disc < 0:
        return None
    r = math.sqrt(disc)
    lo = max(0.0, (-B - r) / (2 * A))
    hi = min(1.0, (-B + r) / (2 * A))
    return (lo, hi) if lo <= hi else None


def _oracle_decision(P, Q, eps: float) -> bool:
    """Cell-by-cell reachable free space, written independently of the library."""
    if abs(P[0] - Q[0]) > eps or abs(P[-1] - Q[-1]) > eps:
        return False
    p, q = len(P) - 1, len(Q) - 1
    LF = [[_interval(Q[j], Q[j + 1], P[i], eps) for j in range(q)] for i in range(p + 1)]
    BF = [[_interval(P[i], P[i + 1], Q[j], eps) for j in range(q + 1)] for i in range(p)]
    LR = [[None] * q for _ in range(p + 1)]
    BR = [[None] * (q + 1) for _ in range(p)]

    ok = True
    for j in range(q):
        ok = ok and LF[0][j] is not None and LF[0][j][0] == 0.0
        LR[0][j] = LF[0][j] if ok else None
        ok = ok and LF[0][j][1] >= 1.0
    ok = True
    for i in range(p):
        ok = ok and BF[i][0] is not None and BF[i][0][0] == 0.0
        BR[i][0] = BF[i][0] if ok else None
        ok = ok and BF[i][0][1] >= 1.0

    for i in range(p):
        for j in range(q):
            left, bottom = LR[i][j], BR[i][j]
            right, top = LF[i + 1][j], BF[i][j + 1]
            if right is not None:
                if bottom is not None:
                    LR[i + 1][j] = right
                elif left is not None and max(left[0], right[0]) <= right[1]:
                    LR[i + 1][j] = (max(left[0], right[0]), right[1])
            if top is not None:
                if left is not None:
                    BR[i][j + 1] = top
                elif bottom is not None and max(bottom[0], top[0]) <= top[1]:
                    BR[i][j + 1] = (max(bottom[0], top[0]), top[1])

    end_left = LR[p][q - 1]
    end_bottom = BR[p - 1][q]
    return (end_left is not None and end_left[1] >= 1.0) or (end_bottom is not None and end_bottom[1] >= 1.0)


def _oracle_distance(P, Q, tol: float = 1e-9) -> float:
    lo = max(abs(P[0] - Q[0]), abs(P[-1] - Q[-1]))
    hi = max(abs(x - y) for x in P for y in Q) + 1.0
    if _oracle_decision(P, Q, lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _oracle_decision(P, Q, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestParamCurve:
    def test_times_must_span_unit_interval(self):
        with pytest.raises(InvalidInputError):
            ParamCurve([0.0, 0.5], [0j, 1j])

    def test_times_strictly_increasing(self):
        with pytest.raises(InvalidInputError):
            ParamCurve([0.0, 0.5, 0.5, 1.0], [0j, 1j, 2j, 3j])

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            ParamCurve([0.0, 1.0], [0j, complex(np.nan, 0)])

    def test_interpolates_linearly(self):
        c = ParamCurve([0.0, 1.0], [0j, 2 + 2j])
        assert c(0.25) == pytest.approx(0.5 + 0.5j)

    def test_reparametrization_has_same_class(self):
        z = np.array([0, 1, 1 + 1j, 2 + 1j])
        a = ParamCurve(np.linspace(0, 1, 4), z)
        b = ParamCurve([0.0, 0.1, 0.2, 1.0], z)
        assert frechet_distance(canonicalize(a), canonicalize(b), 1e-9) == pytest.approx(0.0, abs=1e-8)

    def test_canonical_collapses_duplicates(self):
        c = CurveClass([0, 0, 1, 1, 1, 2j]).canonical()
        assert list(c.vertices) == [0, 1, 2j]

    def test_densify_keeps_trace(self):
        c = CurveClass([0, 1, 1 + 1j])
        dense = c.densify(0.01)
        assert np.max(np.abs(np.diff(dense))) <= 0.01 + 1e-12
        assert frechet_distance(c, CurveClass(dense), 1e-9) == pytest.approx(0.0, abs=1e-8)


class TestFrechetDistance:
    def test_parallel_segments(self):
        assert frechet_distance(CurveClass([0, 1]), CurveClass([1j, 1 + 1j]), 1e-9) == pytest.approx(1.0, abs=1e-8)

    def test_backtracking_costs_half_the_overlap(self):
        P = CurveClass([0, 2, 1, 3])
        Q = CurveClass([0, 3])
        assert frechet_distance(P, Q, 1e-9) == pytest.approx(0.5, abs=1e-8)

    def test_reversed_orientation_is_not_free(self):
        assert frechet_distance(CurveClass([0, 1]), CurveClass([1, 0]), 1e-9) == pytest.approx(1.0, abs=1e-8)

    def test_single_point_against_curve(self):
        assert frechet_distance(CurveClass([0j]), CurveClass([1, 1j]), 1e-9) == pytest.approx(1.0)

    def test_symmetric(self):
        a = CurveClass([0, 1 + 1j, 2])
        b = CurveClass([0.1j, 1, 2 + 0.3j])
        assert frechet_distance(a, b, 1e-9) == pytest.approx(frechet_distance(b, a, 1e-9), abs=1e-8)

    def test_rejects_bad_tolerance(self):
        with pytest.raises(InvalidInputError):
            frechet_distance(CurveClass([0, 1]), CurveClass([0, 1]), 0.0)

    def test_matches_scalar_oracle_on_random_pairs(self):
        rng = np.random.default_rng(20240611)
        for _ in range(200):
            p, q = rng.integers(2, 11, size=2)
            P = rng.normal(size=p) + 1j * rng.normal(size=p)
            Q = rng.normal(size=q) + 1j * rng.normal(size=q)
            got = frechet_distance(CurveClass(P), CurveClass(Q), 1e-8)
            expected = _oracle_distance(list(P), list(Q))
            assert got == pytest.approx(expected, abs=1e-6), (P, Q)


class TestFunctionMetric:
    @pytest.mark.parametrize("c", [0.0, 0.3, 1.0, 2.5])
    def test_constant_offset(self, c):
        t = np.linspace(0, 1, 11)
        w1 = DrivingFunction(t, np.zeros_like(t))
        w2 = DrivingFunction(t, np.full_like(t, c))
        assert function_metric(w1, w2) == pytest.approx(min(1.0, c))

    def test_bounded_by_one(self):
        t = np.linspace(0, 5, 51)
        w1 = DrivingFunction(t, np.zeros_like(t))
        w2 = DrivingFunction(t, 100 * t)
        assert 0 < function_metric(w1, w2) <= 1.0

    def test_late_difference_is_discounted(self):
        t = np.linspace(0, 4, 401)
        base = DrivingFunction(t, np.zeros_like(t))
        late = DrivingFunction(t, np.where(t > 3, 1.0, 0.0))
        assert function_metric(base, late) == pytest.approx(0.125, abs=1e-9)

    def test_extends_shorter_function_as_constant(self):
        short = DrivingFunction([0.0, 1.0], [0.0, 0.5])
        long = DrivingFunction([0.0, 1.0, 2.0], [0.0, 0.5, 0.5])
        assert function_metric(short, long) == pytest.approx(0.0)

    def test_rejects_unsorted_times(self):
        with pytest.raises(InvalidInputError):
            DrivingFunction([0.0, 2.0, 1.0], [0.0, 0.0, 0.0])


class TestCurveFiles:
    def test_curve_file(self, tmp_path):
        path = tmp_path / "gamma.txt"
        t = np.linspace(0, 1, 5)
        z = t + 1j * t ** 2
        write_curve(path, t, z)
        back = read_curve(path)
        assert np.array_equal(back.t, t)
        assert np.array_equal(back.z, z)

    def test_driving_file(self, tmp_path):
        path = tmp_path / "w.txt"
        w = DrivingFunction([0.0, 0.5, 1.0], [0.0, -0.25, 0.125])
        write_driving(path, w)
        assert np.array_equal(read_driving(path).w, w.w)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("driving v1\n0 0\n")
        with pytest.raises(InvalidInputError):
            read_curve(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            read_curve(tmp_path / "absent.txt")
