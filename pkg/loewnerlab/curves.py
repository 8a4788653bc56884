"""Planar curves, the Fréchet metric on unparametrized curves and the driving-function metric."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

import numpy as np

from loewnerlab.errors import InvalidInputError

logger = logging.getLogger(__name__)

CURVE_HEADER = "curve v1"
DRIVING_HEADER = "driving v1"


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ParamCurve:
    """Sampled curve t ↦ z(t) on [0, 1], piecewise linear between samples."""

    t: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        t = _frozen(self.t, float)
        z = _frozen(self.z, complex)
        if t.size == 0 or t.size != z.size:
            raise InvalidInputError("curve needs matching, non-empty time and point arrays")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(z))):
            raise InvalidInputError("curve samples must be finite")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise InvalidInputError("curve times must start at 0 and end at 1")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidInputError("curve times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_vertices(cls, z) -> "ParamCurve":
        """Curve through the given points at equally spaced times."""
        z = np.asarray(z, dtype=complex).reshape(-1)
        if z.size == 1:
            raise InvalidInputError("a single point cannot be given times 0 and 1")
        return cls(np.linspace(0.0, 1.0, z.size), z)

    def __len__(self) -> int:
        return self.z.size

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.interp(s, self.t, self.z.real) + 1j * np.interp(s, self.t, self.z.imag)

    def as_class(self) -> "CurveClass":
        return CurveClass(self.z)


@dataclass(frozen=True, eq=False)
class CurveClass:
    """Polyline trace with its parametrization forgotten."""

    vertices: np.ndarray

    def __post_init__(self):
        v = _frozen(self.vertices, complex)
        if v.size == 0:
            raise InvalidInputError("curve class needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("curve vertices must be finite")
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return self.vertices.size

    def canonical(self) -> "CurveClass":
        v = self.vertices
        if v.size < 2:
            return self
        keep = np.concatenate([[True], v[1:] != v[:-1]])
        return CurveClass(v[keep])

    def densify(self, max_step: float) -> np.ndarray:
        """Vertices with extra points inserted so consecutive points are at most max_step apart."""
        v = self.vertices
        if v.size < 2:
            return v.copy()
        seg = np.abs(np.diff(v))
        pieces = np.maximum(1, np.ceil(seg / max_step).astype(int))
        out = [v[0:1]]
        for k, m in enumerate(pieces):
            s = np.arange(1, m + 1) / m
            out.append(v[k] + s * (v[k + 1] - v[k]))
        return np.concatenate(out)


@dataclass(frozen=True, eq=False)
class DrivingFunction:
    """Sampled real driving function on [0, T], constant beyond T."""

    t: np.ndarray
    w: np.ndarray
    extraction_error: float = field(default=0.0)

    def __post_init__(self):
        t = _frozen(self.t, float)
        w = _frozen(self.w, float)
        if t.size == 0 or t.size != w.size:
            raise InvalidInputError("driving function needs matching, non-empty arrays")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise InvalidInputError("driving samples must be finite")
        if t[0] != 0.0:
            raise InvalidInputError("driving times must start at 0")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise InvalidInputError("driving times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def __call__(self, s) -> np.ndarray:
        return np.interp(np.asarray(s, dtype=float), self.t, self.w)


def canonicalize(c: ParamCurve) -> CurveClass:
    """Forget the parametrization and collapse consecutive duplicate vertices."""
    return c.as_class().canonical()


def _free_interval(a: np.ndarray, b: np.ndarray, c: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """Parameters s in [0,1] with |a + s(b-a) - c| <= eps; empty encoded as lo > hi."""
    a, b, c = np.broadcast_arrays(a, b, c)
    d = b - a
    e = a - c
    dd = np.abs(d) ** 2
    de = (d * np.conj(e)).real
    ee = np.abs(e) ** 2 - eps * eps
    lo = np.full(a.shape, 2.0)
    hi = np.full(lo.shape, -1.0)
    point = dd == 0
    inside = point & (ee <= 0)
    lo[inside] = 0.0
    hi[inside] = 1.0
    seg = ~point
    disc = np.where(seg, de * de - dd * ee, -1.0)
    ok = seg & (disc >= 0)
    root = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = (-de - root) / dd
        s2 = (-de + root) / dd
    lo = np.where(ok, np.maximum(s1, 0.0), lo)
    hi = np.where(ok, np.minimum(s2, 1.0), hi)
    empty = lo > hi
    lo[empty] = 2.0
    hi[empty] = -1.0
    return lo, hi


def _prefix_reachable(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Reachability of free intervals along a boundary row/column of the diagram."""
    starts = lo <= 0.0
    full = hi >= 1.0
    ok = np.empty(lo.size, dtype=bool)
    ok[0] = starts[0]
    if lo.size > 1:
        ok[1:] = starts[1:] & np.cumprod(starts[:-1] & full[:-1]).astype(bool)
    return ok


def _frechet_decision(P: np.ndarray, Q: np.ndarray, eps: float) -> bool:
    """Free-space decision: is the Fréchet distance of the polylines at most eps?"""
    if abs(P[0] - Q[0]) > eps or abs(P[-1] - Q[-1]) > eps:
        return False
    p, q = P.size - 1, Q.size - 1
    if p == 0:
        return bool(np.all(np.abs(Q - P[0]) <= eps))
    if q == 0:
        return bool(np.all(np.abs(P - Q[0]) <= eps))

    # L[i, j]: vertex P_i against segment Q_j; B[i, j]: vertex Q_j against segment P_i
    L_lo, L_hi = _free_interval(Q[None, :-1], Q[None, 1:], P[:, None], eps)
    B_lo, B_hi = _free_interval(P[:-1, None], P[1:, None], Q[None, :], eps)

    lr_ok = _prefix_reachable(L_lo[0], L_hi[0])
    lr_lo = np.where(lr_ok, L_lo[0], 2.0)
    bottom_ok = _prefix_reachable(B_lo[:, 0], B_hi[:, 0])

    idx = np.arange(q + 1)
    for i in range(p):
        lo = B_lo[i].copy()
        hi = B_hi[i].copy()
        empty = lo > hi
        if not bottom_ok[i]:
            empty[0] = True
            lo[0] = 2.0
        reset = np.concatenate([[True], lr_ok])
        group = np.cumsum(reset)
        cm = np.maximum.accumulate(lo + 10.0 * group) - 10.0 * group
        bad = empty | (cm > hi)
        start = np.maximum.accumulate(np.where(reset, idx, 0))
        bad_count = np.cumsum(bad)
        before = np.where(start > 0, bad_count[start - 1], 0)
        br_ok = (bad_count - before) == 0

        nxt_lo = L_lo[i + 1]
        nxt_hi = L_hi[i + 1]
        from_bottom = br_ok[:-1]
        from_left = ~from_bottom & lr_ok
        new_lo = np.where(from_bottom, nxt_lo, np.where(from_left, np.maximum(nxt_lo, lr_lo), 2.0))
        new_ok = (from_bottom | from_left) & (new_lo <= nxt_hi)
        lr_ok = new_ok
        lr_lo = np.where(new_ok, new_lo, 2.0)
        if not lr_ok.any() and not bottom_ok[i + 1:].any():
            return False
    return bool(lr_ok[-1] and L_hi[p, q - 1] >= 1.0 - 1e-12)


def frechet_distance(c1: CurveClass, c2: CurveClass, tol: float) -> float:
    """
    Continuous Fréchet distance between two polylines.

    Bisects the free-space decision procedure between the endpoint lower bound and a
    vertex-based upper bound until the bracket is within 2*tol.

    Args:
        c1: First polyline
        c2: Second polyline
        tol: Absolute accuracy of the returned value

    Returns:
        d with |d - d_F(c1, c2)| <= tol
    """
    if len(c1) == 0 or len(c2) == 0:
        raise InvalidInputError("frechet_distance needs non-empty curves")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    P = c1.canonical().vertices
    Q = c2.canonical().vertices
    if P.size == 1 or Q.size == 1:
        return float(np.max(np.abs(P[:, None] - Q[None, :])))

    lo = max(abs(P[0] - Q[0]), abs(P[-1] - Q[-1]))
    hi = float(np.max(np.abs(P - Q[0])) + np.max(np.abs(Q - Q[0])))
    if c1.vertices.size == c2.vertices.size:
        hi = min(hi, float(np.max(np.abs(c1.vertices - c2.vertices))))
    if _frechet_decision(P, Q, lo):
        return float(lo)
    while hi - lo > 2 * tol:
        mid = 0.5 * (lo + hi)
        if _frechet_decision(P, Q, mid):
            hi = mid
        else:
            lo = mid
    return float(0.5 * (lo + hi))


def function_metric(w1: DrivingFunction, w2: DrivingFunction) -> float:
    """Σ_{n≥1} 2^{-n} min{1, sup_[0,n] |w1 − w2|} with constant extension past each horizon."""
    horizon = max(w1.horizon, w2.horizon)
    N = int(min(max(1, np.ceil(horizon)), 64))
    grid = np.union1d(np.union1d(w1.t, w2.t), np.arange(1, N + 1, dtype=float))
    diff = np.abs(w1(grid) - w2(grid))
    running = np.maximum.accumulate(diff)
    at_n = running[np.searchsorted(grid, np.arange(1, N + 1), side="right") - 1]
    weights = 0.5 ** np.arange(1, N + 1)
    total = float(np.sum(weights * np.minimum(1.0, at_n)))
    total += 0.5 ** N * min(1.0, float(running[-1]))
    return total


def _write_samples(path: Path, header: str, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header] + [" ".join(f"{v:.17g}" for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_samples(path: Path, header: str, width: int) -> np.ndarray:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise InvalidInputError(f"Cannot read {path}: {e}") from e
    if not lines or lines[0].strip() != header:
        raise InvalidInputError(f"{path}: expected header {header!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != width:
            raise InvalidInputError(f"{path}:{lineno}: expected {width} columns")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as e:
            raise InvalidInputError(f"{path}:{lineno}: {e}") from e
    if not rows:
        raise InvalidInputError(f"{path}: no samples")
    return np.array(rows)


def write_curve(path: Path, t, z) -> None:
    """Write samples in `curve v1` format; times are written as given (capacity or [0,1])."""
    z = np.asarray(z, dtype=complex)
    _write_samples(path, CURVE_HEADER, zip(np.asarray(t, dtype=float), z.real, z.imag))


def read_trace(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    data = _read_samples(path, CURVE_HEADER, 3)
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


def read_curve(path: Path) -> ParamCurve:
    t, z = read_trace(path)
    return ParamCurve(t, z)


def write_driving(path: Path, w: DrivingFunction) -> None:
    _write_samples(path, DRIVING_HEADER, zip(w.t, w.w))


def read_driving(path: Path) -> DrivingFunction:
    data = _read_samples(path, DRIVING_HEADER, 2)
    return DrivingFunction(data[:, 0], data[:, 1])
