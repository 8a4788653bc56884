"""Riemann uniformization of lattice domains by zipper welding, and disc-side projections."""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import shapely

from loewnerlab.config import config
from loewnerlab.curves import ParamCurve
from loewnerlab.errors import (
    InvalidInputError,
    NoRadialLimitError,
    NotFoundError,
    NumericFailureError,
    ResolutionTooCoarseError,
)
from loewnerlab.lattice import (
    BoundaryEdge,
    LatticeDomain,
    PointLike,
    as_complex,
    from_cells,
    innermost_disconnecting,
)
from loewnerlab.loewner import slit_forward, slit_inverse

logger = logging.getLogger(__name__)

CONFMAP_HEADER = "confmap v1"
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Mobius:
    """z ↦ (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if abs(self.a * self.d - self.b * self.c) < 1e-15:
            raise InvalidInputError("Möbius determinant must be non-zero")

    @classmethod
    def identity(cls) -> "Mobius":
        return cls(1, 0, 0, 1)

    @classmethod
    def rotation(cls, angle: float) -> "Mobius":
        return cls(np.exp(1j * angle), 0, 0, 1)

    @classmethod
    def scaling(cls, factor: complex) -> "Mobius":
        return cls(factor, 0, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Mobius":
        return cls(*(complex(v) for v in np.asarray(m).ravel()))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.a * z + self.b) / (self.c * z + self.d)

    def __matmul__(self, other: "Mobius") -> "Mobius":
        """Composition: (self @ other)(z) = self(other(z))."""
        return Mobius.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def is_identity(self, tol: float = 1e-9) -> bool:
        m = self.matrix / np.sqrt(self.a * self.d - self.b * self.c)
        return bool(np.allclose(m, np.eye(2), atol=tol) or np.allclose(m, -np.eye(2), atol=tol))


# K sends -i to 0 and i to ∞; translations along the imaginary diameter become scalings
_K = Mobius(1, 1j, 1j, 1)


class ConformalMap(ABC):
    """Conformal map from a simply-connected domain onto the unit disc."""

    source: Optional[LatticeDomain] = None

    @abstractmethod
    def to_disc(self, z):
        ...

    @abstractmethod
    def from_disc(self, w):
        ...

    def __call__(self, z):
        return self.to_disc(z)

    def inverse(self, w):
        return self.from_disc(w)

    def angle_of(self, edge: BoundaryEdge) -> float:
        raise NotFoundError("this map carries no boundary table")

    def boundary_point(self, angle: float) -> complex:
        raise NotFoundError("this map carries no boundary table")


class ExactMap(ConformalMap):
    """Closed-form map given by a Möbius transformation from the disc onto the domain."""

    def __init__(self, disc_to_domain: Mobius, source: Optional[LatticeDomain] = None):
        self.forward = disc_to_domain.inverse()
        self.backward = disc_to_domain
        self.source = source

    def to_disc(self, z):
        return self.forward(z)

    def from_disc(self, w):
        return self.backward(w)

    def angle_of(self, edge: BoundaryEdge) -> float:
        if self.source is None:
            raise NotFoundError("exact map has no lattice source")
        return float(np.angle(self.forward(edge.midpoint(self.source.n))))

    def boundary_point(self, angle: float) -> complex:
        return complex(self.backward(np.exp(1j * angle)))


class _BoundaryTable:
    """Boundary points in loop order with their (unwrapped, increasing) image angles."""

    def __init__(self, points: np.ndarray, angles: np.ndarray):
        self.points = points
        self.angles = angles
        closed = np.append(points, points[:1])
        self.s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(closed)))])

    def point_at(self, angle) -> np.ndarray:
        period = np.append(self.angles, self.angles[0] + 2 * np.pi)
        a = self.angles[0] + np.mod(np.asarray(angle, dtype=float) - self.angles[0], 2 * np.pi)
        s = np.interp(a, period, self.s)
        closed = np.append(self.points, self.points[:1])
        k = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.points) - 1)
        frac = (s - self.s[k]) / np.maximum(self.s[k + 1] - self.s[k], 1e-300)
        return closed[k] + frac * (closed[k + 1] - closed[k])

    def angle_at(self, z) -> np.ndarray:
        """Angle for points on the loop, by arclength interpolation."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        closed = np.append(self.points, self.points[:1])
        seg_a, seg_b = closed[:-1], closed[1:]
        d = seg_b - seg_a
        t = np.clip(((z[:, None] - seg_a[None]) * np.conj(d)[None]).real / np.abs(d)[None] ** 2, 0, 1)
        gap = np.abs(seg_a[None] + t * d[None] - z[:, None])
        k = np.argmin(gap, axis=1)
        s = self.s[k] + t[np.arange(z.size), k] * np.abs(d[k])
        period = np.append(self.angles, self.angles[0] + 2 * np.pi)
        return np.interp(s, self.s, period), gap[np.arange(z.size), k]


class ZipperMap(ConformalMap):
    """Composition of vertical-slit welding steps followed by a Möbius normalization."""

    def __init__(
        self,
        source: LatticeDomain,
        z0: complex,
        z1: complex,
        a: np.ndarray,
        beta: np.ndarray,
        inv_zeta: float,
        sigma: float,
        flip: float,
        w_u: complex,
        theta: float,
        table: Optional[_BoundaryTable] = None,
    ):
        self.source = source
        self.z0, self.z1 = complex(z0), complex(z1)
        self.a = np.asarray(a, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.inv_zeta = float(inv_zeta)
        self.sigma = float(sigma)
        self.flip = float(flip)
        self.w_u = complex(w_u)
        self.theta = float(theta)
        self.table = table

    def _to_upper(self, z: np.ndarray, finish: bool = True) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            w = 1j * np.sqrt((z - self.z1) / (z - self.z0))
            for a, beta in zip(self.a, self.beta):
                w = slit_forward(w / (1 - a * w), 0.0, beta * beta / 4)
            v = w / (1 - w * self.inv_zeta)
        return self.flip * v * v if finish else v

    def _from_upper(self, w: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.sigma * np.sqrt(self.flip * w)
            w = v / (1 + v * self.inv_zeta)
            for a, beta in zip(self.a[::-1], self.beta[::-1]):
                t = slit_inverse(w, 0.0, beta * beta / 4)
                w = t / (1 + a * t)
            w2 = w * w
            return (self.z1 + w2 * self.z0) / (1 + w2)

    def _disc(self, w: np.ndarray) -> np.ndarray:
        return np.exp(1j * self.theta) * (w - self.w_u) / (w - np.conj(self.w_u))

    def _undisc(self, zeta: np.ndarray) -> np.ndarray:
        s = zeta * np.exp(-1j * self.theta)
        return (s * np.conj(self.w_u) - self.w_u) / (s - 1)

    def to_disc(self, z):
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        out = np.empty(flat.shape, dtype=complex)
        inside = self.source.contains(flat)
        out[inside] = self._disc(self._to_upper(flat[inside]))
        on_boundary = ~inside
        if on_boundary.any():
            if self.table is None:
                raise InvalidInputError("boundary evaluation needs a boundary table")
            angles, gap = self.table.angle_at(flat[on_boundary])
            if np.any(gap > 1e-9):
                raise InvalidInputError("point lies outside the closed domain")
            out[on_boundary] = np.exp(1j * angles)
        return out.reshape(z.shape) if z.ndim else complex(out[0])

    def from_disc(self, w):
        w = np.asarray(w, dtype=complex)
        flat = np.atleast_1d(w).ravel()
        if np.any(np.abs(flat) > 1 + 1e-9):
            raise InvalidInputError("from_disc expects points of the closed unit disc")
        out = np.empty(flat.shape, dtype=complex)
        edge = np.abs(flat) >= 1 - BOUNDARY_TOL
        out[~edge] = self._from_upper(self._undisc(flat[~edge]))
        if edge.any():
            out[edge] = self.table.point_at(np.angle(flat[edge]))
        return out.reshape(w.shape) if w.ndim else complex(out[0])

    def angle_of(self, edge: BoundaryEdge) -> float:
        k = self.source.boundary_index[edge]
        per_edge = len(self.table.points) // len(self.source.boundary_loop)
        return float(self.table.angles[k * per_edge + per_edge // 2])

    def boundary_point(self, angle: float) -> complex:
        return complex(self.table.point_at(angle))


class NormalizedMap(ConformalMap):
    """A base map followed by a disc automorphism."""

    def __init__(self, base: ConformalMap, automorphism: Mobius):
        self.base = base
        self.automorphism = automorphism
        self.source = base.source

    def to_disc(self, z):
        return self.automorphism(self.base.to_disc(z))

    def from_disc(self, w):
        pre = self.automorphism.inverse()(w)
        # automorphisms keep the circle, only rounding can push it out
        pre = np.where(np.abs(pre) > 1, pre / np.abs(pre), pre)
        return self.base.from_disc(pre if np.ndim(pre) else complex(pre))

    def angle_of(self, edge: BoundaryEdge) -> float:
        return float(np.angle(self.automorphism(np.exp(1j * self.base.angle_of(edge)))))

    def boundary_point(self, angle: float) -> complex:
        pre = self.automorphism.inverse()(np.exp(1j * angle))
        return self.base.boundary_point(float(np.angle(pre)))


def _zipper_points(dom: LatticeDomain, per_edge: int) -> Tuple[np.ndarray, np.ndarray]:
    """Boundary points along the loop and their inward offsets."""
    v = dom.boundary_vertices
    nxt = np.roll(v, -1)
    direction = (nxt - v) / np.abs(nxt - v)
    t = np.arange(per_edge) / per_edge
    pts = (v[:, None] + t[None, :] * (nxt - v)[:, None]).ravel()
    normals = np.repeat(1j * direction, per_edge)
    incoming = np.roll(1j * direction, 1)
    corner = incoming + 1j * direction
    normals[::per_edge] = corner / np.abs(corner)
    return pts, normals


def uniformize(dom: LatticeDomain, tol: Optional[float] = None, per_edge: int = 2) -> ZipperMap:
    """
    Riemann map of a lattice domain onto the disc with φ(u) = 0 and φ'(u) > 0.

    Args:
        dom: Lattice domain
        tol: Round-trip and normalization tolerance (defaults to LAB_ZIPPER_TOL)
        per_edge: Boundary points per lattice edge (even, at least 2)

    Returns:
        ZipperMap with its boundary table

    Raises:
        NumericFailureError: If a welding step degenerates or validation fails at tol
    """
    tol = config.ZIPPER_TOL if tol is None else tol
    if per_edge < 2 or per_edge % 2:
        raise InvalidInputError("per_edge must be an even integer >= 2")
    pts, normals = _zipper_points(dom, per_edge)
    # zip from the boundary vertex nearest u, never from inside a fjord
    start = per_edge * int(np.argmin(np.abs(dom.boundary_vertices - dom.u)))
    zipped = np.roll(pts, -start)
    z0, z1 = zipped[0], zipped[1]
    logger.info(f"Uniformizing domain with {len(dom.cells)} cells from {pts.size} boundary points")

    with np.errstate(divide="ignore", invalid="ignore"):
        w = 1j * np.sqrt((zipped[2:] - z1) / (zipped[2:] - z0))
    steps = w.size
    a_list = np.empty(steps)
    beta_list = np.empty(steps)
    end = None  # image of z0, None while at infinity
    for k in range(steps):
        c = w[k]
        if not (np.isfinite(c) and c.imag > 0):
            raise NumericFailureError(
                "zipper step left the upper half-plane",
                {"step": k + 2, "image": complex(c), "point": complex(zipped[k + 2])},
            )
        r2 = abs(c) ** 2
        a = c.real / r2
        beta = r2 / c.imag
        a_list[k], beta_list[k] = a, beta
        rest = w[k + 1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            w[k + 1:] = slit_forward(rest / (1 - a * rest), 0.0, beta * beta / 4)
        if end is None:
            end = -1.0 / a if a != 0 else None
        else:
            denom = 1 - a * end
            end = end / denom if denom != 0 else None
        if end is not None:
            end = float(np.real(slit_forward(end, 0.0, beta * beta / 4)))
    inv_zeta = 0.0 if end is None or end == 0 else 1.0 / end

    probe = ZipperMap(dom, z0, z1, a_list, beta_list, inv_zeta, 1.0, 1.0, 0j, 0.0)
    v_u = complex(probe._to_upper(np.array([dom.u]), finish=False)[0])
    sigma = 1.0 if v_u.real >= 0 else -1.0
    flip = sigma * (1.0 if v_u.imag >= 0 else -1.0)
    w_u = flip * v_u * v_u
    if not (np.isfinite(w_u) and w_u.imag > 0):
        raise NumericFailureError("base point did not land in the upper half-plane", {"w_u": w_u})

    fmap = ZipperMap(dom, z0, z1, a_list, beta_list, inv_zeta, sigma, flip, w_u, 0.0)
    fmap.theta = -_derivative_angle(fmap, dom)

    eta = 1e-4 / dom.n
    raw = fmap._disc(fmap._to_upper(pts + eta * normals))
    angles = np.unwrap(np.angle(raw))
    if angles[-1] < angles[0]:
        raise NumericFailureError("boundary correspondence reverses orientation", {"points": int(pts.size)})
    gaps = np.diff(np.append(angles, angles[0] + 2 * np.pi))
    if np.any(gaps <= 0):
        raise NumericFailureError(
            "boundary table angles are not strictly increasing",
            {"first_bad": int(np.argmax(gaps <= 0)), "points": int(pts.size)},
        )
    fmap.table = _BoundaryTable(pts, angles)
    _validate(fmap, dom, tol)
    return fmap


def _derivative_angle(fmap: ZipperMap, dom: LatticeDomain) -> float:
    boundary = dom.boundary_polygon().exterior
    dist = boundary.distance(shapely.points(dom.u.real, dom.u.imag))
    h = min(1.0 / (4 * dom.n), 0.25 * dist)
    f = lambda z: fmap._disc(fmap._to_upper(np.asarray(z, dtype=complex)))
    u = dom.u
    dx = (f(u + h) - f(u - h)) / (2 * h)
    dy = (f(u + 1j * h) - f(u - 1j * h)) / (2j * h)
    return float(np.angle(0.5 * (dx + dy)))


def _probes(dom: LatticeDomain, count: int = 64) -> np.ndarray:
    cells = sorted(dom.cells)
    pick = np.linspace(0, len(cells) - 1, min(count, len(cells))).astype(int)
    return np.array([complex(cells[k][0] + 0.5, cells[k][1] + 0.5) / dom.n for k in pick])


def _validate(fmap: ZipperMap, dom: LatticeDomain, tol: float) -> None:
    probes = _probes(dom)
    images = fmap.to_disc(probes)
    # deep fjord points land within rounding of the circle and cannot be inverted
    resolved = np.abs(images) < 1 - 1e-6
    back = fmap.from_disc(images[resolved])
    roundtrip = float(np.max(np.abs(back - probes[resolved]), initial=0.0))
    centre = abs(complex(fmap.to_disc(np.array([dom.u]))[0]))
    outside = float(np.max(np.abs(images)))
    diagnostics = {"roundtrip": roundtrip, "phi_u": centre, "max_modulus": outside, "resolved": int(resolved.sum())}
    if not (resolved.any() and roundtrip <= tol and centre <= tol and outside <= 1 + 1e-12):
        raise NumericFailureError(f"uniformization failed validation at tol={tol}", diagnostics)
    logger.info(f"Uniformization validated: round trip {roundtrip:.2e}, |phi(u)| {centre:.2e}")


def boundary_normalized(fmap: ConformalMap, a: BoundaryEdge, b: BoundaryEdge) -> NormalizedMap:
    """
    ψ = M ∘ φ with M a disc automorphism, ψ(a) = -1, ψ(b) = 1 and ψ(u) on the imaginary axis.

    Raises:
        InvalidInputError: If a and b coincide
    """
    if tuple(a) == tuple(b):
        raise InvalidInputError("marks a and b must differ")
    alpha = fmap.angle_of(BoundaryEdge(*a))
    beta = fmap.angle_of(BoundaryEdge(*b))
    delta = np.mod(beta - alpha, 2 * np.pi)
    if delta == 0:
        raise InvalidInputError("marks a and b have the same image")
    rho = Mobius.rotation(1.5 * np.pi + delta / 2 - beta)
    b_rot = np.exp(1j * (1.5 * np.pi + delta / 2))
    lam = float(np.real(_K(b_rot)))
    M = _K.inverse() @ Mobius.scaling(1.0 / lam) @ _K @ rho
    return NormalizedMap(fmap, M)


def radial_projection(z, eps: float):
    """P_ε(z) = (z/|z|)·min(1−ε, |z|)."""
    if not 0 < eps < 1:
        raise InvalidInputError("eps must lie in (0, 1)")
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    if np.any(r > 1 + 1e-9):
        raise InvalidInputError("radial projection expects points of the closed unit disc")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r > 1 - eps, z / r * (1 - eps), z)
    return out if out.ndim else complex(out)


def domain_projection(fmap: ConformalMap, z: PointLike, eps: float) -> complex:
    """
    φ^{-1}(P_ε(φ(z))), moving z along its conformal ray.

    Raises:
        NoRadialLimitError: If z is a boundary point outside the boundary table
    """
    z = as_complex(z)
    dom = fmap.source
    if dom is not None and not bool(dom.contains(z)):
        if not bool(dom.closed_contains(z)):
            raise InvalidInputError(f"z={z} is outside the domain")
        table = getattr(fmap, "table", None) or getattr(getattr(fmap, "base", None), "table", None)
        if table is None or np.min(np.abs(table.points - z)) > 1e-9:
            raise NoRadialLimitError(f"boundary point {z} is not a radial limit in the boundary table")
    w = complex(fmap.to_disc(np.array([z]))[0])
    return complex(fmap.from_disc(np.array([radial_projection(w, eps)]))[0])


def conformal_ray(fmap: ConformalMap, theta: float, p: float, q: float, npts: int = 64) -> ParamCurve:
    """Image under φ^{-1} of the radial segment {t e^{iθ}: p ≤ t ≤ q}."""
    if not 0 <= p < q <= 1:
        raise InvalidInputError("conformal ray needs 0 <= p < q <= 1")
    if npts < 2:
        raise InvalidInputError("npts must be at least 2")
    radii = np.linspace(p, q, npts)
    return ParamCurve.from_vertices(fmap.from_disc(radii * np.exp(1j * theta)))


def radial_limit(fmap: ConformalMap, theta: float, tol: Optional[float] = None, levels: int = 12) -> complex:
    """
    Boundary limit of the conformal ray at angle θ by Richardson extrapolation in 1 − r.

    Raises:
        NoRadialLimitError: If the extrapolated values are not Cauchy at tol
    """
    n = fmap.source.n if fmap.source is not None else 64
    tol = 0.5 / n if tol is None else tol
    gaps = 2.0 ** -np.arange(3, 3 + levels)
    vals = fmap.from_disc((1 - gaps) * np.exp(1j * theta))
    extrap = 2 * vals[1:] - vals[:-1]
    jumps = np.abs(np.diff(extrap))
    settled = np.nonzero(jumps < tol)[0]
    if settled.size == 0:
        raise NoRadialLimitError(f"ray at angle {theta} has no radial limit within tol={tol}")
    return complex(extrap[settled[0] + 1])


def conformal_ball_distance(fmap: ConformalMap, theta: float, eps: float) -> float:
    """Distance from φ^{-1}((1−ε)e^{iθ}) to the domain boundary."""
    if not 0 < eps < 1:
        raise InvalidInputError("eps must lie in (0, 1)")
    z = complex(fmap.from_disc(np.array([(1 - eps) * np.exp(1j * theta)]))[0])
    boundary = fmap.source.boundary_polygon().exterior
    return float(boundary.distance(shapely.points(z.real, z.imag)))


def caratheodory_sup_error(map_n: ConformalMap, map_limit: ConformalMap, radius: float, grid: int = 21) -> float:
    """Sup over a grid×grid sample of the closed disc of given radius of |φ_n^{-1} − φ^{-1}|."""
    if not 0 < radius < 1:
        raise InvalidInputError("radius must lie in (0, 1)")
    xs = np.linspace(-radius, radius, grid)
    X, Y = np.meshgrid(xs, xs)
    w = (X + 1j * Y).ravel()
    w = w[np.abs(w) <= radius + 1e-12]
    return float(np.max(np.abs(map_n.from_disc(w) - map_limit.from_disc(w))))


def verify_ray_in_fjord(
    fmap: ConformalMap,
    dom: LatticeDomain,
    theta: float,
    eps: float,
    delta: float,
    C: Optional[float] = None,
    refinement: Optional[int] = None,
    npts: int = 64,
) -> bool:
    """
    Whether the innermost arc of S(z, Cδ) separates the ray tail ρ_{θ,1−ε,1} from u.

    Raises:
        ResolutionTooCoarseError: If δ is below the grid step
        InvalidInputError: If the ray start is not within δ of the boundary
    """
    C = config.FJORD_C if C is None else C
    grid = dom.grid(refinement)
    if delta < grid.h:
        raise ResolutionTooCoarseError(f"delta={delta} is below the grid step {grid.h:.3g}")
    z = complex(fmap.from_disc(np.array([(1 - eps) * np.exp(1j * theta)]))[0])
    d = conformal_ball_distance(fmap, theta, eps)
    if d >= delta:
        raise InvalidInputError(f"ray start is {d:.3g} from the boundary, not within delta={delta}")
    try:
        arc = innermost_disconnecting(dom, z, C * delta, dom.u, refinement)
    except (NotFoundError, InvalidInputError) as e:
        logger.warning(f"No separating arc for theta={theta:.4f} with C={C}: {e}")
        return False
    mask = grid.interior & ~grid.band(arc)
    labels = grid.label(mask)
    u_node = grid.nearest_interior(dom.u, mask)
    radii = np.linspace(1 - eps, 1 - 1e-3 * eps, npts)
    tail = fmap.from_disc(radii * np.exp(1j * theta))
    for p in tail:
        node = grid.nearest_interior(p, mask)
        if node is not None and u_node is not None and labels[node] == labels[u_node]:
            logger.warning(f"Ray tail at theta={theta:.4f} re-enters the u side (C={C}, delta={delta})")
            return False
    return True


def save_map(path: Path, fmap: ZipperMap) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dom = fmap.source
    lines = [
        CONFMAP_HEADER,
        f"n {dom.n}",
        f"u {dom.u.real:.17g} {dom.u.imag:.17g}",
        *(f"cell {i} {j}" for i, j in sorted(dom.cells)),
        f"mark a {dom.a.i} {dom.a.j} {dom.a.dir}",
        f"mark b {dom.b.i} {dom.b.j} {dom.b.dir}",
        f"z0 {fmap.z0.real:.17g} {fmap.z0.imag:.17g}",
        f"z1 {fmap.z1.real:.17g} {fmap.z1.imag:.17g}",
        f"norm {fmap.inv_zeta:.17g} {fmap.sigma:.17g} {fmap.flip:.17g} {fmap.w_u.real:.17g} {fmap.w_u.imag:.17g} {fmap.theta:.17g}",
        *(f"step {a:.17g} {b:.17g}" for a, b in zip(fmap.a, fmap.beta)),
        *(f"table {p.real:.17g} {p.imag:.17g} {ang:.17g}" for p, ang in zip(fmap.table.points, fmap.table.angles)),
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_map(path: Path) -> ZipperMap:
    """
    Read a `confmap v1` file.

    Raises:
        InvalidInputError: On a malformed file
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise InvalidInputError(f"Cannot read map file {path}: {e}") from e
    if not lines or lines[0].strip() != CONFMAP_HEADER:
        raise InvalidInputError(f"{path}: expected header {CONFMAP_HEADER!r}")
    fields = {"cell": [], "step": [], "table": []}
    marks = {}
    try:
        for line in lines[1:]:
            parts = line.split()
            if not parts:
                continue
            key, vals = parts[0], parts[1:]
            if key == "mark":
                marks[vals[0]] = BoundaryEdge(int(vals[1]), int(vals[2]), vals[3])
            elif key in fields:
                fields[key].append([float(v) for v in vals])
            else:
                fields[key] = [float(v) for v in vals]
        dom = from_cells(
            int(fields["n"][0]),
            [(int(i), int(j)) for i, j in fields["cell"]],
            complex(*fields["u"]),
            marks.get("a"),
            marks.get("b"),
            name=path.stem,
        )
        steps = np.array(fields["step"], dtype=float).reshape(-1, 2)
        table = np.array(fields["table"], dtype=float).reshape(-1, 3)
        inv_zeta, sigma, flip, wr, wi, theta = fields["norm"]
        return ZipperMap(
            dom,
            complex(*fields["z0"]),
            complex(*fields["z1"]),
            steps[:, 0],
            steps[:, 1],
            inv_zeta,
            sigma,
            flip,
            complex(wr, wi),
            theta,
            _BoundaryTable(table[:, 0] + 1j * table[:, 1], table[:, 2]),
        )
    except (KeyError, IndexError, ValueError) as e:
        raise InvalidInputError(f"{path}: malformed map file: {e}") from e
