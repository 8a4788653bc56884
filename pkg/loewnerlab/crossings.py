"""Annulus and quadrilateral crossings of chordal curves, and quadrilateral modulus."""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import shapely
from scipy import sparse
from scipy.sparse.linalg import cg

from loewnerlab.config import config
from loewnerlab.curves import CurveClass, ParamCurve
from loewnerlab.errors import InvalidInputError, InvalidQueryError, NumericFailureError
from loewnerlab.lattice import (
    BoundaryEdge,
    CrossCut,
    LatticeDomain,
    RefinedGrid,
    as_complex,
    distance_to,
    from_cells,
    trace_boundary,
)

logger = logging.getLogger(__name__)

Vertex = Tuple[int, int]


@dataclass(frozen=True)
class AnnulusQuery:
    """A(z, r, R) = B(z, R) minus the closed disc B(z, r)."""

    z: complex
    r: float
    R: float

    def __post_init__(self):
        object.__setattr__(self, "z", as_complex(self.z))
        if not 0 < self.r < self.R:
            raise InvalidQueryError(f"annulus radii must satisfy 0 < r < R (got r={self.r}, R={self.R})")


@dataclass(frozen=True)
class QuadQuery:
    """Quadrilateral made of domain cells with corners c0..c3 (lattice vertices) counterclockwise.

    Side S_k runs along the quadrilateral's boundary loop from c_k to c_{k+1}.
    """

    cells: frozenset
    corners: Tuple[Vertex, Vertex, Vertex, Vertex]

    def __post_init__(self):
        object.__setattr__(self, "cells", frozenset((int(i), int(j)) for i, j in self.cells))
        object.__setattr__(self, "corners", tuple((int(x), int(y)) for x, y in self.corners))
        if len(self.corners) != 4 or len(set(self.corners)) != 4:
            raise InvalidQueryError("quadrilateral needs four distinct corners")
        if not self.cells:
            raise InvalidQueryError("quadrilateral needs at least one cell")

    def rotated(self) -> "QuadQuery":
        """Same region with the roles of (S0, S2) and (S1, S3) exchanged."""
        c = self.corners
        return QuadQuery(self.cells, (c[1], c[2], c[3], c[0]))

    def region(self, n: int) -> LatticeDomain:
        try:
            loop_cell = min(self.cells)
            return from_cells(
                n,
                self.cells,
                complex(loop_cell[0] + 0.5, loop_cell[1] + 0.5) / n,
                *_first_edges(self.cells),
            )
        except InvalidInputError as e:
            raise InvalidQueryError(f"quadrilateral region is not a simple cell domain: {e}") from e

    def sides(self, n: int) -> List[List[BoundaryEdge]]:
        loop = self.region(n).boundary_loop
        starts = [e.vertices()[0] for e in loop]
        try:
            idx = [starts.index(c) for c in self.corners]
        except ValueError as e:
            raise InvalidQueryError("every corner must be a vertex of the quadrilateral's boundary") from e
        m = len(loop)
        rel = [(k - idx[0]) % m for k in idx]
        if rel != sorted(rel):
            raise InvalidQueryError("corners must be listed counterclockwise")
        out = []
        for k in range(4):
            s, e = idx[k], idx[(k + 1) % 4]
            count = (e - s) % m
            out.append([loop[(s + t) % m] for t in range(count)])
        if any(not side for side in out):
            raise InvalidQueryError("degenerate quadrilateral side")
        return out

    def side_cuts(self, n: int) -> List[CrossCut]:
        cuts = []
        for side in self.sides(n):
            pts = [complex(*side[0].vertices()[0])] + [complex(*e.vertices()[1]) for e in side]
            cuts.append(CrossCut(tuple(p / n for p in pts)))
        return cuts


def _first_edges(cells) -> Tuple[BoundaryEdge, BoundaryEdge]:
    loop = trace_boundary(frozenset(cells))
    return loop[0], loop[1 % len(loop)]


def validate_quad(dom: LatticeDomain, quad: QuadQuery) -> List[List[BoundaryEdge]]:
    """Check the quadrilateral is on the boundary of dom: S1, S3 on ∂dom and S0, S2 inside."""
    if not quad.cells <= dom.cells:
        raise InvalidQueryError("quadrilateral cells must be domain cells")
    sides = quad.sides(dom.n)
    for k in (1, 3):
        if any(e.neighbor() in dom.cells for e in sides[k]):
            raise InvalidQueryError(f"side S{k} must lie on the domain boundary")
    for k in (0, 2):
        if any(e.neighbor() not in dom.cells for e in sides[k]):
            raise InvalidQueryError(f"side S{k} must run through the domain interior")
    return sides


@dataclass(frozen=True)
class Crossing:
    kind: str
    start: int
    end: int
    component: int
    forced: bool
    entry: str = ""
    exit: str = ""


@dataclass
class CrossingReport:
    total_crossings: int = 0
    unforced_crossings: int = 0
    crossings: List[Crossing] = field(default_factory=list)

    @property
    def forced_crossings(self) -> int:
        return self.total_crossings - self.unforced_crossings

    def add(self, crossing: Crossing) -> None:
        self.crossings.append(crossing)
        self.total_crossings += 1
        if not crossing.forced:
            self.unforced_crossings += 1


def _vertices(curve: Union[CurveClass, ParamCurve, np.ndarray]) -> CurveClass:
    if isinstance(curve, ParamCurve):
        return curve.as_class()
    if isinstance(curve, CurveClass):
        return curve
    return CurveClass(np.asarray(curve, dtype=complex))


class _Separation:
    """Flood-fill separation test between the a-side and the b-side of the domain."""

    def __init__(self, dom: LatticeDomain, grid: RefinedGrid, initial: Optional[CurveClass]):
        self.grid = grid
        self.base = grid.interior.copy()
        self.a_point = dom.anchor(dom.a, grid.h)
        self.b_point = dom.anchor(dom.b, grid.h)
        if initial is not None and len(initial) > 1:
            self.base &= ~grid.band(CrossCut(tuple(initial.vertices)))
            self.a_point = complex(initial.vertices[-1])

    def _labels_near(self, labels: np.ndarray, p: complex) -> Set[int]:
        dist = np.abs(self.grid.positions - p)
        for radius in (2, 3, 5):
            near = (dist <= radius * self.grid.h) & (labels > 0)
            if near.any():
                return set(np.unique(labels[near]).tolist())
        return set()

    def separates(self, removed: np.ndarray) -> bool:
        labels = self.grid.label(self.base & ~removed)
        a_side = self._labels_near(labels, self.a_point)
        b_side = self._labels_near(labels, self.b_point)
        return not (a_side & b_side)


def _check_on_boundary(dom: LatticeDomain, query: AnnulusQuery, initial: Optional[CurveClass]) -> None:
    boundary = dom.boundary_polygon().exterior
    d = boundary.distance(shapely.points(query.z.real, query.z.imag))
    if initial is not None and len(initial) > 1:
        d = min(d, float(distance_to(np.array([query.z]), CrossCut(tuple(initial.vertices)))[0]))
    if d >= query.r:
        raise InvalidQueryError(f"annulus centre {query.z} is {d:.3g} from the boundary, not within r={query.r}")


def _runs(states: Sequence[str], target: str) -> List[Tuple[int, int]]:
    """Maximal runs of `target` with a different state on both sides."""
    out = []
    k = 0
    while k < len(states):
        if states[k] != target:
            k += 1
            continue
        s = k
        while k < len(states) and states[k] == target:
            k += 1
        if s > 0 and k < len(states):
            out.append((s, k - 1))
    return out


def _annulus_crossings(dom, grid, pts, query: AnnulusQuery, sep: _Separation, report: CrossingReport) -> None:
    d_nodes = np.abs(grid.positions - query.z)
    in_A = grid.interior & (d_nodes > query.r) & (d_nodes < query.R)
    labels = grid.label(in_A)
    d = np.abs(pts - query.z)
    states = np.where(d <= query.r, "in", np.where(d >= query.R, "out", "A"))
    forced_cache = {}
    for s, e in _runs(states.tolist(), "A"):
        before, after = states[s - 1], states[e + 1]
        if before == after:
            continue
        votes = Counter()
        for p in pts[s:e + 1]:
            node = grid.nearest_interior(p, in_A)
            if node is not None:
                votes[int(labels[node])] += 1
        if not votes:
            logger.warning(f"Crossing run {s}-{e} has no annulus nodes nearby; skipped")
            continue
        comp = votes.most_common(1)[0][0]
        if comp not in forced_cache:
            forced_cache[comp] = sep.separates(labels == comp)
        report.add(Crossing("annulus", s, e, comp, forced_cache[comp], str(before), str(after)))


def _quad_crossings(dom, grid, pts, quad: QuadQuery, sep: _Separation, report: CrossingReport) -> None:
    region = quad.region(dom.n)
    cuts = quad.side_cuts(dom.n)
    inside = region.contains(pts)
    states = np.where(inside, "Q", "x").tolist()

    def side_at(p_in: complex, p_out: complex) -> int:
        for _ in range(40):
            mid = 0.5 * (p_in + p_out)
            if bool(region.contains(mid)):
                p_in = mid
            else:
                p_out = mid
        x = 0.5 * (p_in + p_out)
        return int(np.argmin([distance_to(np.array([x]), c)[0] for c in cuts]))

    removed = grid.interior & region.closed_contains(grid.positions)
    forced = None
    for s, e in _runs(states, "Q"):
        entry = side_at(pts[s], pts[s - 1])
        exit_ = side_at(pts[e], pts[e + 1])
        if {entry, exit_} != {0, 2}:
            continue
        if forced is None:
            forced = sep.separates(removed)
        report.add(Crossing("quad", s, e, 0, forced, f"S{entry}", f"S{exit_}"))


def detect_unforced_crossings(
    dom: LatticeDomain,
    curve: Union[CurveClass, ParamCurve],
    query: Union[AnnulusQuery, QuadQuery],
    initial: Optional[Union[CurveClass, ParamCurve]] = None,
    refinement: Optional[int] = None,
) -> CrossingReport:
    """
    Count the crossings a chordal curve makes of an annulus or a quadrilateral on the boundary.

    A crossing is forced when its annulus component (or the quadrilateral) separates a
    from b in the domain, and unforced otherwise. With an initial segment, the domain is
    slit along it and its tip replaces a.

    Raises:
        InvalidQueryError: If the query does not sit on the boundary
    """
    curve = _vertices(curve)
    initial = _vertices(initial) if initial is not None else None
    grid = dom.grid(refinement)
    sep = _Separation(dom, grid, initial)
    report = CrossingReport()
    if isinstance(query, AnnulusQuery):
        _check_on_boundary(dom, query, initial)
        step = min(grid.h, (query.R - query.r) / 4) / 2
        _annulus_crossings(dom, grid, curve.densify(step), query, sep, report)
    elif isinstance(query, QuadQuery):
        validate_quad(dom, query)
        _quad_crossings(dom, grid, curve.densify(grid.h / 2), query, sep, report)
    else:
        raise InvalidQueryError(f"unsupported query type {type(query).__name__}")
    logger.info(f"Crossings: {report.total_crossings} total, {report.unforced_crossings} unforced")
    return report


def quad_modulus(
    dom: Optional[LatticeDomain],
    quad: QuadQuery,
    refinement: Optional[int] = None,
    n: Optional[int] = None,
    check_boundary: bool = True,
) -> float:
    """
    Discrete extremal distance between S0 and S2 inside the quadrilateral.

    Solves the Laplace problem with potential 0 on S0, 1 on S2 and S1, S3 insulated on the
    k-times refined cell network (conductance 1/2 per fine-cell edge) and returns 1/energy.

    Raises:
        InvalidQueryError: On overlapping or degenerate sides
        NumericFailureError: If conjugate gradients do not converge
    """
    k = refinement or config.REFINEMENT
    if dom is not None:
        n = dom.n
        sides = validate_quad(dom, quad) if check_boundary else quad.sides(n)
    else:
        n = n or 1
        sides = quad.sides(n)

    cells = np.array(sorted(quad.cells))
    r = np.arange(k + 1)
    RX, RY = np.meshgrid(r, r, indexing="ij")
    fine = (cells[:, 0, None, None] * k + RX[None]) + 1j * (cells[:, 1, None, None] * k + RY[None])
    nodes, inverse = np.unique(fine.reshape(-1), return_inverse=True)
    inverse = inverse.reshape(fine.shape)

    # each fine cell gives conductance 1/2 to each of its four edges
    a = inverse[:, :-1, :-1]
    b = inverse[:, 1:, :-1]
    c = inverse[:, 1:, 1:]
    d = inverse[:, :-1, 1:]
    i_idx = np.concatenate([a, b, c, d], axis=None)
    j_idx = np.concatenate([b, c, d, a], axis=None)
    m = nodes.size
    W = sparse.coo_matrix((np.full(i_idx.size, 0.5), (i_idx, j_idx)), shape=(m, m)).tocsr()
    W = W + W.T
    L = (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()

    lo, hi = _lookup(nodes, sides[0], k), _lookup(nodes, sides[2], k)
    if np.intersect1d(lo, hi).size:
        raise InvalidQueryError("sides S0 and S2 overlap")
    potential = np.zeros(m)
    potential[hi] = 1.0
    fixed = np.zeros(m, dtype=bool)
    fixed[lo] = True
    fixed[hi] = True
    free = ~fixed
    if free.any():
        A = L[free][:, free]
        rhs = -L[free][:, fixed] @ potential[fixed]
        x, info = cg(A, rhs, rtol=config.CG_TOL, atol=0.0, maxiter=20 * m)
        if info != 0:
            raise NumericFailureError("conjugate gradients did not converge", {"info": int(info), "nodes": int(m)})
        potential[free] = x
    energy = float(potential @ (L @ potential))
    if energy <= 0:
        raise NumericFailureError("non-positive Dirichlet energy", {"energy": energy})
    logger.info(f"Quadrilateral modulus on {m} nodes (k={k}): {1.0 / energy:.6g}")
    return 1.0 / energy


def _lookup(nodes: np.ndarray, side: List[BoundaryEdge], k: int) -> np.ndarray:
    """Indices of the fine nodes lying on a side."""
    pts = []
    for e in side:
        (sx, sy), (ex, ey) = e.vertices()
        t = np.arange(k + 1)
        pts.append((sx * k + t * (ex - sx)) + 1j * (sy * k + t * (ey - sy)))
    wanted = np.unique(np.concatenate(pts))
    index = {complex(v): i for i, v in enumerate(nodes)}
    return np.array([index[complex(v)] for v in wanted], dtype=int)
