"""Monte-Carlo harmonic measure, Beurling checks, loop-erased random walk and crossing estimates."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import shapely
from scipy import sparse
from scipy.sparse.linalg import spsolve

from loewnerlab.config import config
from loewnerlab.conformal import boundary_normalized, uniformize
from loewnerlab.crossings import AnnulusQuery, detect_unforced_crossings
from loewnerlab.curves import CurveClass
from loewnerlab.errors import (
    InvalidConfigurationError,
    InvalidInputError,
    NumericFailureError,
    SamplingFailureError,
    SingularityError,
)
from loewnerlab.lattice import BoundaryEdge, CrossCut, LatticeDomain, PointLike, as_complex, distance_to
from loewnerlab.loewner import sample_sle, trace_in_disc

logger = logging.getLogger(__name__)

CurveSampler = Callable[[LatticeDomain, int], CurveClass]

MAX_SPHERE_STEPS = 100_000


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int

    @classmethod
    def from_indicators(cls, hits: np.ndarray, seed: int) -> "MCEstimate":
        hits = np.asarray(hits, dtype=float)
        n = hits.size
        stderr = float(np.std(hits, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(float(hits.mean()), stderr, n, seed)

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr + 1e-12


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _walk_on_spheres(
    start: complex,
    count: int,
    radius_fn: Callable[[np.ndarray], np.ndarray],
    step: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Run `count` walk-on-spheres chains from `start` until each is within `step` of the boundary.

    radius_fn returns, per point, the radius of a disc known to lie in the domain.
    Returns the absorbed positions.
    """
    pos = np.full(count, start, dtype=complex)
    active = np.arange(count)
    for _ in range(MAX_SPHERE_STEPS):
        if active.size == 0:
            return pos
        radius = radius_fn(pos[active])
        alive = radius > step
        active = active[alive]
        radius = radius[alive]
        pos[active] += radius * np.exp(2j * np.pi * rng.random(active.size))
    raise NumericFailureError(
        f"walk-on-spheres did not absorb after {MAX_SPHERE_STEPS} steps",
        {"active_walks": int(active.size), "step": step},
    )


class _DomainWalker:
    """Inscribed radii and boundary-edge lookup for a lattice domain."""

    def __init__(self, dom: LatticeDomain, refinement: Optional[int] = None):
        self.dom = dom
        self.grid = dom.grid(refinement)
        self.ring = dom.boundary_polygon().exterior
        self.edges = dom.boundary_loop
        segments = []
        for e in self.edges:
            (x0, y0), (x1, y1) = e.vertices()
            segments.append([(x0 / dom.n, y0 / dom.n), (x1 / dom.n, y1 / dom.n)])
        self.tree = shapely.STRtree(shapely.linestrings(segments))

    def radius(self, p: np.ndarray) -> np.ndarray:
        # EDT of the refined grid bounds the distance to ∂Λ from below up to h/2
        g = self.grid
        ix, iy = g.index_of(p)
        lower = g.boundary_distance[ix, iy] - g.h / 2 - np.abs(p - g.positions[ix, iy])
        near = lower < 3 * g.h
        if near.any():
            pts = shapely.points(np.column_stack([p[near].real, p[near].imag]))
            lower[near] = shapely.distance(pts, self.ring)
        return lower

    def snap(self, p: np.ndarray) -> np.ndarray:
        """Loop index of the boundary edge nearest to each point."""
        pts = shapely.points(np.column_stack([p.real, p.imag]))
        idx = self.tree.query_nearest(pts, all_matches=False)
        out = np.empty(p.size, dtype=int)
        out[idx[0]] = idx[1]
        return out


def harmonic_measure_mc(
    dom: LatticeDomain,
    z: PointLike,
    target: Sequence[BoundaryEdge],
    walks: int,
    step: Optional[float] = None,
    seed: int = 0,
    refinement: Optional[int] = None,
) -> MCEstimate:
    """
    Estimate H(z, Λ, E): the probability that Brownian motion from z leaves Λ through E.

    Args:
        dom: Lattice domain
        z: Interior start point
        target: Boundary edges making up E
        walks: Number of independent walks
        step: Absorption distance (defaults to 1/(8n))
        seed: RNG seed
        refinement: Grid refinement used for the inscribed-radius lower bound

    Returns:
        Fraction of walks absorbed next to a target edge, with its standard error

    Raises:
        InvalidInputError: If walks is zero, z is not interior or an edge is not on ∂Λ
    """
    if walks < 1:
        raise InvalidInputError("walks must be at least 1")
    z = as_complex(z)
    if not bool(dom.contains(z)):
        raise InvalidInputError(f"z={z} is not an interior point")
    step = 1.0 / (8 * dom.n) if step is None else step
    if step <= 0:
        raise InvalidInputError("step must be positive")
    index = dom.boundary_index
    wanted = np.zeros(len(dom.boundary_loop), dtype=bool)
    for e in target:
        e = BoundaryEdge(*e)
        if e not in index:
            raise InvalidInputError(f"edge {tuple(e)} is not a boundary edge")
        wanted[index[e]] = True

    logger.info(f"Harmonic measure: {walks} walks from {z}, {int(wanted.sum())} target edges, step={step:.3g}")
    walker = _DomainWalker(dom, refinement)
    absorbed = _walk_on_spheres(z, walks, walker.radius, step, _rng(seed))
    hits = wanted[walker.snap(absorbed)]
    return MCEstimate.from_indicators(hits, seed)


def harmonic_measure_disc_mc(
    z: PointLike,
    theta0: float,
    theta1: float,
    walks: int,
    step: float = 1e-3,
    seed: int = 0,
) -> MCEstimate:
    """Exit probability of the unit disc through the arc {e^{iθ}: θ0 ≤ θ < θ1}."""
    if walks < 1:
        raise InvalidInputError("walks must be at least 1")
    z = as_complex(z)
    if abs(z) >= 1:
        raise InvalidInputError(f"z={z} is not inside the unit disc")
    absorbed = _walk_on_spheres(z, walks, lambda p: 1.0 - np.abs(p), step, _rng(seed))
    rel = np.mod(np.angle(absorbed) - theta0, 2 * np.pi)
    return MCEstimate.from_indicators(rel < (theta1 - theta0), seed)


def edges_in_sector(dom: LatticeDomain, center: PointLike, theta0: float, theta1: float) -> List[BoundaryEdge]:
    """Boundary edges whose midpoint is seen from `center` at an angle in [θ0, θ1)."""
    center = as_complex(center)
    mids = np.array([e.midpoint(dom.n) for e in dom.boundary_loop])
    rel = np.mod(np.angle(mids - center) - theta0, 2 * np.pi)
    return [e for e, keep in zip(dom.boundary_loop, rel < theta1 - theta0) if keep]


def greens_disc(z, w):
    """G(z, w) = −(1/2π) log |(1 − z w̄)/(z − w)| on the unit disc."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(z) >= 1) or np.any(np.abs(w) >= 1):
        raise InvalidInputError("Green's function arguments must lie in the open unit disc")
    if np.any(z == w):
        raise SingularityError("Green's function is singular at z = w")
    out = -np.log(np.abs((1 - z * np.conj(w)) / (z - w))) / (2 * np.pi)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BeurlingReport:
    estimate: MCEstimate
    bound: float
    r: float
    R: float

    @property
    def passed(self) -> bool:
        return self.estimate.mean <= self.bound + 3 * self.estimate.stderr


def beurling_check(
    dom: Optional[LatticeDomain],
    z: PointLike,
    K: Sequence[PointLike],
    R: float,
    walks: int,
    seed: int = 0,
    step: Optional[float] = None,
) -> BeurlingReport:
    """
    Compare H(z, B(z,R)∖K, ∂B(z,R)) with the strong Beurling bound (4/π)(r/R)^{1/2}.

    K is a polyline obstacle; when `dom` is given its complement joins the obstacle.

    Raises:
        InvalidConfigurationError: If K does not reach ∂B(z, R) or r > R
        InvalidInputError: If walks is zero or z lies on K
    """
    if walks < 1:
        raise InvalidInputError("walks must be at least 1")
    if R <= 0:
        raise InvalidInputError("R must be positive")
    z = as_complex(z)
    cut = CrossCut(tuple(as_complex(k) for k in K))
    pts = cut.array
    if np.max(np.abs(pts - z)) < R * (1 - 1e-9):
        raise InvalidConfigurationError(f"obstacle does not reach the circle of radius {R} around {z}")
    r = float(distance_to(np.array([z]), cut)[0])
    if r == 0:
        raise InvalidInputError("z lies on the obstacle")
    if r > R:
        raise InvalidConfigurationError(f"obstacle distance r={r} exceeds R={R}")
    step = 1e-3 * r if step is None else step
    geometry = cut.geometry()
    ring = dom.boundary_polygon().exterior if dom is not None else None

    def radius(p: np.ndarray) -> np.ndarray:
        geoms = shapely.points(np.column_stack([p.real, p.imag]))
        d = shapely.distance(geoms, geometry)
        if ring is not None:
            d = np.minimum(d, shapely.distance(geoms, ring))
        return np.minimum(R - np.abs(p - z), d)

    logger.info(f"Beurling check: r/R={r / R:.3g}, {walks} walks")
    absorbed = _walk_on_spheres(z, walks, radius, step, _rng(seed))
    outer = R - np.abs(absorbed - z)
    hits = outer <= radius(absorbed) + 1e-15
    report = BeurlingReport(MCEstimate.from_indicators(hits, seed), 4 / np.pi * np.sqrt(r / R), r, R)
    logger.info(f"Beurling estimate {report.estimate.mean:.4g} ± {report.estimate.stderr:.2g}, bound {report.bound:.4g}")
    return report


class _CellWalk:
    """Cell random walk conditioned to leave the domain through edge b (Doob h-transform)."""

    def __init__(self, dom: LatticeDomain, b: BoundaryEdge):
        cells = sorted(dom.cells)
        self.cells = cells
        self.index = {c: k for k, c in enumerate(cells)}
        N = len(cells)
        nbr = np.full((N, 4), -1, dtype=np.int64)
        dirs = ((0, -1), (1, 0), (0, 1), (-1, 0))
        for k, (i, j) in enumerate(cells):
            for d, (dx, dy) in enumerate(dirs):
                nbr[k, d] = self.index.get((i + dx, j + dy), -1)
        exit_b = np.zeros(N)
        exit_b[self.index[(b.i, b.j)]] = 0.25

        rows = np.repeat(np.arange(N), 4)
        cols = nbr.ravel()
        ok = cols >= 0
        P = sparse.csr_matrix((np.full(int(ok.sum()), 0.25), (rows[ok], cols[ok])), shape=(N, N))
        h = spsolve((sparse.identity(N, format="csr") - P).tocsc(), exit_b)
        if not np.all(h > 0):
            raise NumericFailureError("exit probabilities at b are not positive", {"min_h": float(h.min())})

        weights = np.zeros((N, 5))
        ok2 = nbr >= 0
        weights[:, :4][ok2] = 0.25 * h[nbr[ok2]]
        weights[:, 4] = exit_b
        weights /= h[:, None]
        self.cumulative = np.cumsum(weights, axis=1)
        self.cumulative[:, -1] = 1.0
        self.nbr = nbr

    def run(self, start: int, rng: np.random.Generator, budget: int) -> List[int]:
        """Chronological loop erasure of the conditioned walk from `start` until it exits at b."""
        path = [start]
        visited: Dict[int, int] = {start: 0}
        current = start
        steps = 0
        while steps < budget:
            draws = rng.random(min(4096, budget - steps))
            for x in draws:
                steps += 1
                d = int(np.searchsorted(self.cumulative[current], x, side="right"))
                if d == 4:
                    return path
                nxt = int(self.nbr[current, d])
                if nxt in visited:
                    # erase the loop just closed
                    cut = visited[nxt]
                    for c in path[cut + 1:]:
                        del visited[c]
                    path = path[:cut + 1]
                else:
                    visited[nxt] = len(path)
                    path.append(nxt)
                current = nxt
        raise SamplingFailureError(f"walk did not exit at b within {budget} steps", {"budget": budget, "path": len(path)})


@lru_cache(maxsize=8)
def _cell_walk(dom: LatticeDomain, b: BoundaryEdge) -> _CellWalk:
    return _CellWalk(dom, b)


def sample_lerw(
    dom: LatticeDomain,
    a: Optional[BoundaryEdge] = None,
    b: Optional[BoundaryEdge] = None,
    seed: int = 0,
    budget: Optional[int] = None,
) -> CurveClass:
    """
    Loop-erased random walk from edge a to edge b.

    The cell walk enters through a and is conditioned to leave through b. The curve runs
    from the midpoint of a through the centres of the erased path's cells to the midpoint of b.

    Raises:
        InvalidInputError: If a and b coincide or are not boundary edges
        SamplingFailureError: If the walk exceeds `budget` steps
    """
    a = BoundaryEdge(*(a if a is not None else dom.a))
    b = BoundaryEdge(*(b if b is not None else dom.b))
    if a == b:
        raise InvalidInputError("a and b must differ")
    for name, e in (("a", a), ("b", b)):
        if e not in dom.boundary_index:
            raise InvalidInputError(f"{name}={tuple(e)} is not a boundary edge")
    budget = budget if budget is not None else max(100_000, 500 * len(dom.cells))
    walk = _cell_walk(dom, b)
    path = walk.run(walk.index[(a.i, a.j)], _rng(seed), budget)
    centres = np.array([complex(i + 0.5, j + 0.5) for i, j in (walk.cells[k] for k in path)]) / dom.n
    return CurveClass(np.concatenate([[a.midpoint(dom.n)], centres, [b.midpoint(dom.n)]]))


def lerw_sampler() -> CurveSampler:
    def sample(dom: LatticeDomain, seed: int) -> CurveClass:
        return sample_lerw(dom, dom.a, dom.b, seed)

    return sample


@lru_cache(maxsize=8)
def _normalized_map(dom: LatticeDomain):
    return boundary_normalized(uniformize(dom), dom.a, dom.b)


def sle_sampler(kappa: float, T: float, dt: float, curve_points: int = 256) -> CurveSampler:
    """SLE(κ) traces mapped into the domain by ψ^{-1}, with ψ(a) = −1 and ψ(b) = 1."""

    def sample(dom: LatticeDomain, seed: int) -> CurveClass:
        disc = trace_in_disc(sample_sle(kappa, T, dt, seed)).z
        keep = np.unique(np.linspace(0, disc.size - 1, min(curve_points, disc.size)).round().astype(int))
        return CurveClass(_normalized_map(dom).from_disc(disc[keep]))

    return sample


def diameter_sampler(curve_points: int = 256) -> CurveSampler:
    """Deterministic κ = 0 curve ψ^{-1}([−1, 1])."""

    def sample(dom: LatticeDomain, seed: int) -> CurveClass:
        return CurveClass(_normalized_map(dom).from_disc(np.linspace(-1.0, 1.0, curve_points).astype(complex)))

    return sample


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Independent per-sample seeds derived from one root seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def sample_curves(sampler: CurveSampler, dom: LatticeDomain, samples: int, seed: int) -> List[CurveClass]:
    seeds = spawn_seeds(seed, samples)
    with ThreadPoolExecutor(max_workers=config.MAX_WORKERS) as executor:
        return list(executor.map(lambda s: sampler(dom, s), seeds))


def annulus_catalog(dom: LatticeDomain, M: float, max_annuli: int = 24) -> List[AnnulusQuery]:
    """
    Boundary annuli A(v, r, M·r) centred on loop vertices, r ∈ {2^-k}.

    Annuli whose outer disc holds a or b are left out. Radii below one cell, and outer
    radii above half the domain's diameter, are not resolved.
    """
    if M <= 1:
        raise InvalidInputError("M must exceed 1")
    verts = dom.boundary_vertices
    diam = float(np.max(np.abs(verts[:, None] - verts[None, :]))) if verts.size < 2048 else 2.0
    marks = np.array([dom.a.midpoint(dom.n), dom.b.midpoint(dom.n)])
    out = []
    k = 0
    while True:
        r = 2.0 ** -k
        k += 1
        if r < 1.0 / dom.n:
            break
        R = M * r
        if R > diam / 2:
            continue
        stride = max(1, int(round(r * dom.n)))
        for v in verts[::stride]:
            if np.min(np.abs(marks - v)) < R:
                continue
            out.append(AnnulusQuery(complex(v), r, R))
    if len(out) > max_annuli:
        pick = np.linspace(0, len(out) - 1, max_annuli).round().astype(int)
        out = [out[i] for i in np.unique(pick)]
    return out


def _first_hit(curve: CurveClass, cut: CrossCut, tol: float) -> Optional[int]:
    d = distance_to(curve.vertices, cut)
    hit = np.nonzero(d <= tol)[0]
    return int(hit[0]) if hit.size else None


def estimate_condition_G(
    sampler: CurveSampler,
    dom: LatticeDomain,
    M_values: Sequence[float],
    samples: int,
    seed: int,
    stopping_cuts: Sequence[CrossCut] = (),
    max_annuli: int = 24,
    refinement: Optional[int] = None,
) -> List[dict]:
    """
    Empirical unforced annulus-crossing probabilities for a chordal curve model.

    Each row reports, for one M and one stopping time, the worst annulus of the catalog:
    p_hat is its empirical unforced-crossing probability over the samples. With stopping
    cuts, the curve after its first hit of cut k is tested in the domain slit by the
    initial segment; samples that never hit the cut are not counted.

    Raises:
        InvalidInputError: If samples is zero
    """
    if samples < 1:
        raise InvalidInputError("samples must be at least 1")
    logger.info(f"Condition (G): {samples} samples, M in {list(M_values)}, {len(stopping_cuts)} stopping cuts")
    curves = sample_curves(sampler, dom, samples, seed)
    tol = 0.5 / (dom.n * (refinement or config.REFINEMENT))

    segments: List[List[Tuple[Optional[CurveClass], CurveClass]]] = [[(None, c) for c in curves]]
    for cut in stopping_cuts:
        split = []
        for c in curves:
            k = _first_hit(c, cut, tol)
            if k is not None and k + 1 < len(c):
                split.append((CurveClass(c.vertices[:k + 1]), CurveClass(c.vertices[k:])))
        segments.append(split)

    rows = []
    for M in M_values:
        catalog = annulus_catalog(dom, M, max_annuli)
        for stopping, pairs in enumerate(segments):
            row = {
                "M": M,
                "annuli_tested": len(catalog),
                "crossings": 0,
                "unforced": 0,
                "p_hat": None,
                "stderr": None,
                "stopping": stopping,
                "samples": len(pairs),
                "seed": seed,
            }
            if not catalog or not pairs:
                logger.warning(f"No annuli or samples for M={M}, stopping={stopping}; row left empty")
                rows.append(row)
                continue
            worst = None
            for query in catalog:
                flags = []
                for initial, rest in pairs:
                    try:
                        report = detect_unforced_crossings(dom, rest, query, initial=initial, refinement=refinement)
                    except InvalidInputError as e:
                        raise InvalidInputError(f"annulus {query} at M={M}, stopping={stopping}: {e}") from e
                    row["crossings"] += report.total_crossings
                    row["unforced"] += report.unforced_crossings
                    flags.append(report.unforced_crossings > 0)
                est = MCEstimate.from_indicators(np.array(flags), seed)
                if worst is None or est.mean > worst.mean:
                    worst = est
            row["p_hat"] = worst.mean
            row["stderr"] = worst.stderr
            rows.append(row)
    return rows
