"""Chordal Loewner evolution with vertical-slit steps, SLE sampling and driving-function extraction."""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from loewnerlab.curves import CurveClass, DrivingFunction, ParamCurve
from loewnerlab.errors import InvalidInputError, NotSimpleError, NumericFailureError, PoleError

logger = logging.getLogger(__name__)

TraceLike = Union[ParamCurve, CurveClass, np.ndarray]


def slit_forward(z, U: float, dt: float) -> np.ndarray:
    """Map out a vertical slit of capacity dt at U: z ↦ U + √((z−U)² + 4dt)."""
    d = np.asarray(z, dtype=complex) - U
    with np.errstate(divide="ignore", invalid="ignore"):
        out = U + d * np.sqrt(1.0 + 4.0 * dt / (d * d))
    return np.where(d == 0, U + 2.0 * np.sqrt(dt), out)


def slit_inverse(w, U: float, dt: float) -> np.ndarray:
    """Inverse of slit_forward on the closed upper half-plane."""
    d = np.asarray(w, dtype=complex) - U
    with np.errstate(divide="ignore", invalid="ignore"):
        out = U + d * np.sqrt(1.0 - 4.0 * dt / (d * d))
    return np.where(d == 0, U + 2j * np.sqrt(dt), out)


def mobius_D_to_H(z):
    """φ_{D→H}(z) = i(z+1)/(1−z)."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1 + 1e-9):
        raise InvalidInputError("mobius_D_to_H expects points of the closed unit disc")
    if np.any(np.abs(1 - z) < 1e-15):
        raise PoleError("z = 1 is the pole of mobius_D_to_H")
    return 1j * (z + 1) / (1 - z)


def mobius_H_to_D(z):
    """φ_{H→D}(z) = (z−i)/(z+i)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < -1e-9):
        raise InvalidInputError("mobius_H_to_D expects points of the closed upper half-plane")
    if np.any(np.abs(z + 1j) < 1e-15):
        raise PoleError("z = -i is the pole of mobius_H_to_D")
    return (z - 1j) / (z + 1j)


@dataclass(frozen=True, eq=False)
class MappingOut:
    """g_t as a composition of vertical-slit maps, one per time step."""

    drivers: np.ndarray
    steps: np.ndarray

    @property
    def capacity(self) -> float:
        return float(np.sum(self.steps))

    def __len__(self) -> int:
        return self.drivers.size

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        for U, dt in zip(self.drivers, self.steps):
            z = slit_forward(z, U, dt)
        return z

    def inverse(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        for U, dt in zip(self.drivers[::-1], self.steps[::-1]):
            w = slit_inverse(w, U, dt)
        return w

    def then(self, other: "MappingOut") -> "MappingOut":
        """Concatenation: first self, then other."""
        return MappingOut(np.concatenate([self.drivers, other.drivers]), np.concatenate([self.steps, other.steps]))

    def restrict(self, k: int) -> "MappingOut":
        return MappingOut(self.drivers[:k], self.steps[:k])

    def hcap_expansion(self, radius: Optional[float] = None, points: int = 256) -> float:
        """Read t from g(z) = z + 2t/z + O(1/z²) as the 1/z Laurent coefficient over a large circle."""
        if radius is None:
            reach = float(np.max(np.abs(self.drivers))) if self.drivers.size else 0.0
            radius = 4.0 * (reach + 2.0 * np.sqrt(max(self.capacity, 1e-12))) + 1.0
        theta = np.pi * (np.arange(points) + 0.5) / points
        upper = radius * np.exp(1j * theta)
        g_upper = self(upper)
        # Schwarz reflection supplies the lower half circle
        z = np.concatenate([upper, np.conj(upper)])
        g = np.concatenate([g_upper, np.conj(g_upper)])
        coeff = np.mean((g - z) * z)
        return float(coeff.real / 2.0)


@dataclass(frozen=True, eq=False)
class HullTrace:
    """Tips γ(t_k) at capacity times t_k with the driving function that grew them."""

    times: np.ndarray
    tips: np.ndarray
    driving: DrivingFunction
    mapping: MappingOut
    touching_steps: int = 0

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def trace(self) -> ParamCurve:
        """Trace as a curve on the [0,1] clock t ↦ t/T."""
        if self.times.size == 1:
            return ParamCurve([0.0, 1.0], [self.tips[0], self.tips[0]])
        return ParamCurve(self.times / self.times[-1], self.tips)


def _tips(drivers: np.ndarray, steps: np.ndarray, start: complex) -> np.ndarray:
    """γ(t_k) = f_1^{-1} ∘ … ∘ f_k^{-1}(U_k) for all k, vectorized over k."""
    N = drivers.size
    Z = np.empty(N + 1, dtype=complex)
    Z[0] = start
    for j in range(N, 0, -1):
        U, dt = drivers[j - 1], steps[j - 1]
        Z[j + 1:] = slit_inverse(Z[j + 1:], U, dt)
        Z[j] = U + 2j * np.sqrt(dt)
    return Z


def forward_evolve(w: DrivingFunction, dt: float) -> HullTrace:
    """
    Grow the hull driven by w up to its horizon.

    Each step of length dt maps out a vertical slit at the driving value at the end
    of the step, so the tip at t_k is exactly the preimage of W(t_k).

    Args:
        w: Driving function on [0, T]
        dt: Time step

    Returns:
        HullTrace with tips at t_k = k·T/N, N = round(T/dt)

    Raises:
        NumericFailureError: If a tip becomes non-finite (diagnostics carry the step index)
    """
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    T = w.horizon
    N = max(1, int(round(T / dt))) if T > 0 else 0
    times = np.linspace(0.0, T, N + 1)
    drivers = w(times[1:])
    steps = np.diff(times)
    logger.info(f"Evolving Loewner chain: T={T:g}, steps={N}")

    tips = _tips(drivers, steps, complex(w(0.0)))
    bad = ~np.isfinite(tips)
    if bad.any():
        k = int(np.argmax(bad))
        raise NumericFailureError(f"Loewner step {k} produced a non-finite tip", {"step": k})

    touching = int(np.sum(tips[1:].imag <= 0))
    if touching:
        logger.warning(f"{touching} tips reached the real line at resolution dt={dt:g}")

    driving = DrivingFunction(times, w(times))
    return HullTrace(times, tips, driving, MappingOut(drivers, steps), touching)


def _vertices(trace: TraceLike) -> np.ndarray:
    if isinstance(trace, ParamCurve):
        return trace.z
    if isinstance(trace, CurveClass):
        return trace.vertices
    return np.asarray(trace, dtype=complex).reshape(-1)


def _unzip(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vertical-slit parameters (U_k, dt_k) that map out the polyline vertex by vertex."""
    scale = 1.0 + float(np.max(np.abs(z)))
    if abs(z[0].imag) > 1e-9 * scale:
        raise InvalidInputError("trace must start on the real line")
    pts = z[1:].astype(complex)
    drivers = np.empty(pts.size)
    steps = np.empty(pts.size)
    for k in range(pts.size):
        c = pts[k]
        if not np.isfinite(c):
            raise NumericFailureError(f"unzipping produced a non-finite point at vertex {k + 1}", {"vertex": k + 1})
        if c.imag <= 1e-12 * scale:
            raise NotSimpleError(f"trace touches itself or the real line at vertex {k + 1}")
        U = c.real
        dt = 0.25 * c.imag * c.imag
        drivers[k] = U
        steps[k] = dt
        pts[k + 1:] = slit_forward(pts[k + 1:], U, dt)
    return drivers, steps


def extract_driving(trace: TraceLike, npts: int, check: bool = True) -> DrivingFunction:
    """
    Driving function of a simple trace in the upper half-plane, in capacity time.

    Args:
        trace: Polyline starting on ℝ and otherwise in ℍ
        npts: Maximum number of unzipping steps; longer traces are subsampled
        check: Re-grow the trace from the result and report the sup distance

    Raises:
        NotSimpleError: Fewer than 3 vertices, or the trace touches itself at resolution
    """
    z = _vertices(trace)
    if z.size < 3:
        raise NotSimpleError("extract_driving needs at least 3 trace vertices")
    if npts < 2:
        raise InvalidInputError("npts must be at least 2")
    if z.size > npts + 1:
        keep = np.unique(np.round(np.linspace(0, z.size - 1, npts + 1)).astype(int))
        z = z[keep]

    drivers, steps = _unzip(z)
    times = np.concatenate([[0.0], np.cumsum(steps)])
    values = np.concatenate([[z[0].real], drivers])
    error = 0.0
    if check:
        regrown = _tips(drivers, steps, complex(z[0].real))
        error = float(np.max(np.abs(regrown - z)))
        logger.info(f"Extracted driving over {drivers.size} steps, regrowth error {error:.3g}")
    return DrivingFunction(times, values, extraction_error=error)


def hcap(trace: TraceLike, resolution: int = 256) -> float:
    """
    Half-plane capacity of the hull generated by a polyline attached to ℝ.

    Segments are subdivided to at most diam/resolution before unzipping.
    """
    z = _vertices(trace)
    if z.size == 0:
        return 0.0
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("hcap needs a bounded trace")
    z = CurveClass(z).canonical().vertices
    if z.size == 1:
        if abs(z[0].imag) > 1e-12 * (1 + abs(z[0])):
            raise InvalidInputError("trace must be attached to the real line")
        return 0.0
    diam = float(np.max(np.abs(z - z[0])))
    dense = CurveClass(z).densify(diam / resolution)
    _, steps = _unzip(dense)
    return float(np.sum(steps))


def brownian_path(T: float, dt: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Standard Brownian motion on the grid k·dt with exact Gaussian increments."""
    if T <= 0 or dt <= 0:
        raise InvalidInputError("T and dt must be positive")
    N = max(1, int(round(T / dt)))
    rng = np.random.Generator(np.random.Philox(seed))
    times = np.linspace(0.0, T, N + 1)
    increments = rng.standard_normal(N) * np.sqrt(np.diff(times))
    return times, np.concatenate([[0.0], np.cumsum(increments)])


def sle_driving(kappa: float, times: np.ndarray, brownian: np.ndarray) -> DrivingFunction:
    if kappa < 0:
        raise InvalidInputError("kappa must be non-negative")
    return DrivingFunction(times, np.sqrt(kappa) * brownian)


def sample_sle(kappa: float, T: float, dt: float, seed: int) -> HullTrace:
    """SLE(κ) trace driven by √κ·B on [0, T]; deterministic given seed."""
    if kappa >= 8:
        logger.warning(f"kappa={kappa} is outside [0, 8); traces are not simple")
    times, B = brownian_path(T, dt, seed)
    return forward_evolve(sle_driving(kappa, times, B), dt)


def _capacity_clock(caps: np.ndarray) -> np.ndarray:
    """σ = t/(1+t) divided by its final value, so a truncated trace spans [0, 1]."""
    sigma = caps / (1.0 + caps)
    return sigma / sigma[-1]


def trace_in_disc(hull: HullTrace) -> ParamCurve:
    """
    γ_D(s) = φ_{H→D}(γ(t)) on the capacity clock σ = t/(1+t).

    The trace stops at the hull horizon T, so σ is rescaled by σ_T = T/(1+T) and
    hcap(γ[0, t]) = σ_T·s/(1 − σ_T·s) holds at every sample s.
    """
    z = mobius_H_to_D(hull.tips)
    if hull.times.size == 1:
        return ParamCurve([0.0, 1.0], [z[0], z[0]])
    return ParamCurve(_capacity_clock(hull.times), z)


def reparametrize_by_capacity(c: ParamCurve) -> ParamCurve:
    """
    Reparametrize a disc curve from −1 on the capacity clock σ = hcap/(1 + hcap) of φ_{D→H}(γ_D[0,s]).

    A final vertex at 1 is placed at s = 1 and σ is used as is; a truncated curve
    has σ rescaled by its final value, as in trace_in_disc.
    """
    z = c.z
    reaches_one = abs(z[-1] - 1.0) < 1e-12
    body = z[:-1] if reaches_one else z
    if body.size < 2:
        raise InvalidInputError("curve too short to reparametrize")
    h = mobius_D_to_H(body)
    drivers, steps = _unzip(h)
    if np.any(steps <= 0):
        raise InvalidInputError("capacity is not strictly increasing along the curve")
    caps = np.concatenate([[0.0], np.cumsum(steps)])
    if reaches_one:
        s = np.concatenate([caps / (1.0 + caps), [1.0]])
    else:
        s = _capacity_clock(caps)
    if np.any(np.diff(s) <= 0):
        raise InvalidInputError("capacity is not strictly increasing at resolution")
    return ParamCurve(s, z)
