"""Lattice domains: unions of grid cells with marked boundary edges, and their geometry queries."""
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import shapely
from scipy import ndimage, sparse
from scipy.sparse.csgraph import dijkstra
from shapely.geometry import Polygon

from loewnerlab.config import config
from loewnerlab.errors import InvalidInputError, NotFoundError, ResolutionTooCoarseError

logger = logging.getLogger(__name__)

DOMAIN_HEADER = "domain v1"

Cell = Tuple[int, int]
PointLike = Union[complex, Tuple[float, float]]

# Edge endpoints relative to the cell's lower-left vertex, counterclockwise around the cell
_EDGE_OFFSETS = {
    "S": ((0, 0), (1, 0)),
    "E": ((1, 0), (1, 1)),
    "N": ((1, 1), (0, 1)),
    "W": ((0, 1), (0, 0)),
}
_NEIGHBOR = {"S": (0, -1), "E": (1, 0), "N": (0, 1), "W": (-1, 0)}
_INWARD = {"S": 1j, "E": -1.0, "N": -1j, "W": 1.0}

EIGHT = np.ones((3, 3), dtype=bool)


def as_complex(p: PointLike) -> complex:
    if isinstance(p, (tuple, list, np.ndarray)):
        return complex(float(p[0]), float(p[1]))
    return complex(p)


class BoundaryEdge(NamedTuple):
    """Directed boundary edge on side `dir` of cell (i, j), oriented with the domain on its left."""

    i: int
    j: int
    dir: str

    def vertices(self) -> Tuple[Cell, Cell]:
        (sx, sy), (ex, ey) = _EDGE_OFFSETS[self.dir]
        return (self.i + sx, self.j + sy), (self.i + ex, self.j + ey)

    def neighbor(self) -> Cell:
        dx, dy = _NEIGHBOR[self.dir]
        return (self.i + dx, self.j + dy)

    def midpoint(self, n: int) -> complex:
        (sx, sy), (ex, ey) = self.vertices()
        return complex(sx + ex, sy + ey) / (2.0 * n)

    def inward(self) -> complex:
        return _INWARD[self.dir]


@dataclass(frozen=True)
class CrossCut:
    """Polyline inside the domain with endpoints on the boundary (closed when it is a full loop)."""

    points: Tuple[complex, ...]
    closed: bool = False

    @classmethod
    def from_array(cls, pts, closed: bool = False) -> "CrossCut":
        return cls(tuple(complex(p) for p in np.asarray(pts, dtype=complex).reshape(-1)), closed)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=complex)

    @property
    def length(self) -> float:
        pts = self.array
        if self.closed:
            pts = np.append(pts, pts[:1])
        return float(np.sum(np.abs(np.diff(pts))))

    @property
    def diameter(self) -> float:
        pts = self.array
        if pts.size > 512:
            hull = shapely.convex_hull(shapely.multipoints(np.column_stack([pts.real, pts.imag])))
            coords = shapely.get_coordinates(hull)
            pts = coords[:, 0] + 1j * coords[:, 1]
        return float(np.max(np.abs(pts[:, None] - pts[None, :]))) if pts.size else 0.0

    def geometry(self):
        pts = self.array
        coords = np.column_stack([pts.real, pts.imag])
        if pts.size == 1:
            return shapely.points(coords[0])
        if self.closed:
            coords = np.vstack([coords, coords[:1]])
        return shapely.linestrings(coords)


def distance_to(points: np.ndarray, cut: CrossCut) -> np.ndarray:
    """Euclidean distance from each point to the cut polyline."""
    points = np.asarray(points, dtype=complex)
    geoms = shapely.points(np.column_stack([points.real.ravel(), points.imag.ravel()]))
    return shapely.distance(geoms, cut.geometry()).reshape(points.shape)


@dataclass(frozen=True)
class LatticeDomain:
    """Simply-connected union of closed cells [i/n,(i+1)/n]×[j/n,(j+1)/n] with base point u and marks a, b."""

    n: int
    cells: FrozenSet[Cell]
    u: complex
    a: BoundaryEdge
    b: BoundaryEdge
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "cells", frozenset((int(i), int(j)) for i, j in self.cells))
        object.__setattr__(self, "u", as_complex(self.u))
        object.__setattr__(self, "a", BoundaryEdge(*self.a))
        object.__setattr__(self, "b", BoundaryEdge(*self.b))
        self._validate()

    def _validate(self) -> None:
        if self.n < 1:
            raise InvalidInputError("n must be a positive integer")
        if not self.cells:
            raise InvalidInputError("domain needs at least one cell")
        occ = self.occupancy
        _, count = ndimage.label(occ)
        if count != 1:
            raise InvalidInputError(f"cells are not edge-connected ({count} components)")
        if _pinches(occ).any():
            raise InvalidInputError("cells touch diagonally at a vertex; boundary is not a simple loop")
        _, holes = ndimage.label(~occ)
        if holes != 1:
            raise InvalidInputError("union of cells is not simply connected")
        if not bool(self.contains(self.u)):
            raise InvalidInputError(f"u={self.u} is not strictly inside the domain")
        for name, edge in (("a", self.a), ("b", self.b)):
            if edge.dir not in _EDGE_OFFSETS:
                raise InvalidInputError(f"mark {name} has unknown direction {edge.dir!r}")
            if (edge.i, edge.j) not in self.cells or edge.neighbor() in self.cells:
                raise InvalidInputError(f"mark {name}={tuple(edge)} is not a boundary edge")
        if self.a == self.b:
            raise InvalidInputError("marks a and b must differ")

    @cached_property
    def offset(self) -> Cell:
        return (min(i for i, _ in self.cells) - 1, min(j for _, j in self.cells) - 1)

    @cached_property
    def occupancy(self) -> np.ndarray:
        """Cell occupancy padded by one empty cell on every side, indexed [i - i0, j - j0]."""
        i0, j0 = self.offset
        ii = np.array([c[0] for c in self.cells]) - i0
        jj = np.array([c[1] for c in self.cells]) - j0
        occ = np.zeros((ii.max() + 2, jj.max() + 2), dtype=bool)
        occ[ii, jj] = True
        return occ

    def occupied(self, i, j) -> np.ndarray:
        i0, j0 = self.offset
        occ = self.occupancy
        ii = np.asarray(i) - i0
        jj = np.asarray(j) - j0
        ok = (ii >= 0) & (ii < occ.shape[0]) & (jj >= 0) & (jj < occ.shape[1])
        out = np.zeros(np.broadcast(ii, jj).shape, dtype=bool)
        out[ok] = occ[np.broadcast_to(ii, out.shape)[ok], np.broadcast_to(jj, out.shape)[ok]]
        return out

    def contains(self, z) -> np.ndarray:
        """Open-domain membership: every cell whose closed square contains z is a domain cell."""
        z = np.asarray(z, dtype=complex)
        x = z.real * self.n
        y = z.imag * self.n
        xa, xb = np.ceil(x).astype(int) - 1, np.floor(x).astype(int)
        ya, yb = np.ceil(y).astype(int) - 1, np.floor(y).astype(int)
        return self.occupied(xa, ya) & self.occupied(xa, yb) & self.occupied(xb, ya) & self.occupied(xb, yb)

    def closed_contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x = z.real * self.n
        y = z.imag * self.n
        xa, xb = np.ceil(x).astype(int) - 1, np.floor(x).astype(int)
        ya, yb = np.ceil(y).astype(int) - 1, np.floor(y).astype(int)
        return self.occupied(xa, ya) | self.occupied(xa, yb) | self.occupied(xb, ya) | self.occupied(xb, yb)

    @cached_property
    def boundary_loop(self) -> Tuple[BoundaryEdge, ...]:
        """Boundary edges in counterclockwise order, starting at the lowest-leftmost south edge."""
        return trace_boundary(self.cells)

    @cached_property
    def boundary_index(self) -> Dict[BoundaryEdge, int]:
        return {e: k for k, e in enumerate(self.boundary_loop)}

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Loop vertices as complex points; vertex k is the start of loop edge k."""
        return np.array([complex(*e.vertices()[0]) for e in self.boundary_loop]) / self.n

    def boundary_polygon(self) -> Polygon:
        v = self.boundary_vertices
        return Polygon(np.column_stack([v.real, v.imag]))

    def anchor(self, edge: BoundaryEdge, depth: float) -> complex:
        """Point at distance `depth` inside the domain from the edge midpoint."""
        return edge.midpoint(self.n) + edge.inward() * depth

    def grid(self, refinement: Optional[int] = None) -> "RefinedGrid":
        return refined_grid(self, refinement or config.REFINEMENT)

    def with_marks(self, a: BoundaryEdge, b: BoundaryEdge) -> "LatticeDomain":
        return LatticeDomain(self.n, self.cells, self.u, a, b, self.name)


def _pinches(occ: np.ndarray) -> np.ndarray:
    """2×2 blocks where two cells meet only at a vertex."""
    p = occ[:-1, :-1] & occ[1:, 1:] & ~occ[1:, :-1] & ~occ[:-1, 1:]
    q = occ[1:, :-1] & occ[:-1, 1:] & ~occ[:-1, :-1] & ~occ[1:, 1:]
    return p | q


def trace_boundary(cells: FrozenSet[Cell]) -> Tuple[BoundaryEdge, ...]:
    """Counterclockwise boundary loop of a simply-connected, pinch-free set of cells."""
    by_start: Dict[Cell, BoundaryEdge] = {}
    for (i, j) in cells:
        for d, (dx, dy) in _NEIGHBOR.items():
            if (i + dx, j + dy) not in cells:
                edge = BoundaryEdge(i, j, d)
                by_start[edge.vertices()[0]] = edge
    first = min((e for e in by_start.values() if e.dir == "S"), key=lambda e: (e.j, e.i))
    loop = [first]
    while True:
        nxt = by_start[loop[-1].vertices()[1]]
        if nxt == first:
            break
        loop.append(nxt)
    return tuple(loop)


def nearest_boundary_edge(n: int, cells: FrozenSet[Cell], target: complex, exclude: Sequence[BoundaryEdge] = ()) -> BoundaryEdge:
    edges = [
        BoundaryEdge(i, j, d)
        for (i, j) in cells
        for d, (dx, dy) in _NEIGHBOR.items()
        if (i + dx, j + dy) not in cells
    ]
    edges = [e for e in edges if e not in exclude]
    return min(edges, key=lambda e: (abs(e.midpoint(n) - target), e.j, e.i, e.dir))


def default_marks(n: int, cells: FrozenSet[Cell], u: complex) -> Tuple[BoundaryEdge, BoundaryEdge]:
    """Boundary edges nearest to the leftmost and rightmost points at the height of u."""
    xmin = min(i for i, _ in cells) / n
    xmax = (max(i for i, _ in cells) + 1) / n
    a = nearest_boundary_edge(n, cells, complex(xmin, u.imag))
    b = nearest_boundary_edge(n, cells, complex(xmax, u.imag), exclude=[a])
    return a, b


def from_cells(
    n: int,
    cells,
    u: PointLike,
    a: Optional[BoundaryEdge] = None,
    b: Optional[BoundaryEdge] = None,
    name: str = "",
) -> LatticeDomain:
    cells = frozenset((int(i), int(j)) for i, j in cells)
    u = as_complex(u)
    if a is None or b is None:
        da, db = default_marks(n, cells, u)
        a = a or da
        b = b or db
    return LatticeDomain(n, cells, u, a, b, name)


def approximate_domain(
    polygon: Sequence[PointLike],
    u: PointLike,
    n: int,
    a_point: Optional[PointLike] = None,
    b_point: Optional[PointLike] = None,
) -> LatticeDomain:
    """
    Max-loop lattice approximation of a polygon around u.

    Keeps the edge-connected component around u of the cells whose closed square lies in
    the closed polygon. Cells meeting diagonally are resolved by dropping the pinch cell
    farther from u, and the result is the domain enclosed by the grid loop.

    Raises:
        ResolutionTooCoarseError: If no admissible cell neighbourhood of u exists at resolution n
    """
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    coords = [as_complex(p) for p in polygon]
    poly = Polygon([(p.real, p.imag) for p in coords])
    if not poly.is_valid or poly.area <= 0:
        raise InvalidInputError("polygon must be simple and closed with positive area")
    u = as_complex(u)
    if not poly.contains(shapely.points(u.real, u.imag)):
        raise InvalidInputError(f"u={u} is not strictly inside the polygon")

    minx, miny, maxx, maxy = poly.bounds
    i_range = np.arange(int(np.floor(minx * n)) - 1, int(np.ceil(maxx * n)) + 1)
    j_range = np.arange(int(np.floor(miny * n)) - 1, int(np.ceil(maxy * n)) + 1)
    I, J = np.meshgrid(i_range, j_range, indexing="ij")
    boxes = shapely.box(I / n, J / n, (I + 1) / n, (J + 1) / n)
    admissible = shapely.covers(poly.buffer(1e-9 / n), boxes)

    i0, j0 = int(i_range[0]), int(j_range[0])
    x, y = u.real * n, u.imag * n
    touching = {(int(a), int(b)) for a in (np.ceil(x) - 1, np.floor(x)) for b in (np.ceil(y) - 1, np.floor(y))}
    for (ci, cj) in touching:
        ii, jj = ci - i0, cj - j0
        if not (0 <= ii < admissible.shape[0] and 0 <= jj < admissible.shape[1]) or not admissible[ii, jj]:
            raise ResolutionTooCoarseError(f"no grid loop around u at resolution n={n}")
    seed = next(iter(touching))
    seed = (seed[0] - i0, seed[1] - j0)

    centers_x = (I + 0.5) / n
    centers_y = (J + 0.5) / n
    mask = admissible.copy()
    while True:
        labels, _ = ndimage.label(mask)
        mask = labels == labels[seed]
        mask = ndimage.binary_fill_holes(mask) & admissible
        pinch = _pinches(mask)
        if not pinch.any():
            break
        # drop the pinch cell farther from u in each offending block
        for bi, bj in zip(*np.nonzero(pinch)):
            block = [(bi + di, bj + dj) for di in (0, 1) for dj in (0, 1) if mask[bi + di, bj + dj]]
            far = max(block, key=lambda c: (abs(complex(centers_x[c], centers_y[c]) - u), c))
            if far in {(s[0] - i0, s[1] - j0) for s in touching}:
                continue
            mask[far] = False

    cells = frozenset((int(a) + i0, int(b) + j0) for a, b in zip(*np.nonzero(mask)))
    a = nearest_boundary_edge(n, cells, as_complex(a_point)) if a_point is not None else None
    b = nearest_boundary_edge(n, cells, as_complex(b_point), exclude=[a] if a else []) if b_point is not None else None
    dom = from_cells(n, cells, u, a, b)
    logger.info(f"Approximated polygon at n={n}: {len(cells)} cells, {len(dom.boundary_loop)} boundary edges")
    return dom


class RefinedGrid:
    """Nodes of the k-times refined vertex lattice of a domain, with interior mask and path graph."""

    def __init__(self, dom: LatticeDomain, k: int):
        self.dom = dom
        self.k = k
        self.h = 1.0 / (dom.n * k)
        i0, j0 = dom.offset
        occ = dom.occupancy
        self.origin = (i0 * k, j0 * k)
        fx = np.arange(self.origin[0], self.origin[0] + occ.shape[0] * k + 1)
        fy = np.arange(self.origin[1], self.origin[1] + occ.shape[1] * k + 1)
        FX, FY = np.meshgrid(fx, fy, indexing="ij")
        xa, xb = (FX - 1) // k, FX // k
        ya, yb = (FY - 1) // k, FY // k
        self.interior = dom.occupied(xa, ya) & dom.occupied(xa, yb) & dom.occupied(xb, ya) & dom.occupied(xb, yb)
        self.shape = self.interior.shape
        self.positions = (FX + 1j * FY) * self.h

    def index_of(self, z) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        ix = np.rint(z.real / self.h).astype(int) - self.origin[0]
        iy = np.rint(z.imag / self.h).astype(int) - self.origin[1]
        return np.clip(ix, 0, self.shape[0] - 1), np.clip(iy, 0, self.shape[1] - 1)

    def nearest_interior(self, z: complex, mask: Optional[np.ndarray] = None) -> Optional[Tuple[int, int]]:
        """Closest node to z among `mask` (default: interior) within a 2-node radius."""
        mask = self.interior if mask is None else mask
        ix, iy = self.index_of(z)
        ix, iy = int(ix), int(iy)
        best = None
        for dx in range(-2, 3):
            for dy in range(-2, 3):
                a, b = ix + dx, iy + dy
                if 0 <= a < self.shape[0] and 0 <= b < self.shape[1] and mask[a, b]:
                    d = abs(self.positions[a, b] - z)
                    if best is None or d < best[0]:
                        best = (d, (a, b))
        return best[1] if best else None

    @cached_property
    def flat_index(self) -> np.ndarray:
        idx = np.full(self.shape, -1, dtype=np.int64)
        idx[self.interior] = np.arange(int(self.interior.sum()))
        return idx

    @cached_property
    def graph(self) -> sparse.csr_matrix:
        """8-neighbour graph on interior nodes with Euclidean edge weights."""
        idx = self.flat_index
        rows, cols, weights = [], [], []
        for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
            src = idx[max(0, -dx):self.shape[0] - max(0, dx), max(0, -dy):self.shape[1] - max(0, dy)]
            dst = idx[max(0, dx):self.shape[0] - max(0, -dx) or None, max(0, dy):self.shape[1] - max(0, -dy) or None]
            ok = (src >= 0) & (dst >= 0)
            rows.append(src[ok])
            cols.append(dst[ok])
            weights.append(np.full(int(ok.sum()), self.h * np.hypot(dx, dy)))
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        w = np.concatenate(weights)
        size = int(self.interior.sum())
        g = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(size, size))
        return g.tocsr()

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Distance from each node to the nearest non-interior node."""
        return ndimage.distance_transform_edt(self.interior) * self.h

    @cached_property
    def nearest_outside(self) -> np.ndarray:
        """Indices (2, NX, NY) of the nearest non-interior node."""
        return ndimage.distance_transform_edt(self.interior, return_distances=False, return_indices=True)

    def label(self, mask: np.ndarray) -> np.ndarray:
        labels, _ = ndimage.label(mask, structure=EIGHT)
        return labels

    def band(self, cut: CrossCut, width: Optional[float] = None) -> np.ndarray:
        """Interior nodes within `width` (default h) of the cut."""
        width = self.h if width is None else width
        out = np.zeros(self.shape, dtype=bool)
        pts = cut.array
        lo_x, hi_x = pts.real.min() - width, pts.real.max() + width
        lo_y, hi_y = pts.imag.min() - width, pts.imag.max() + width
        ax = np.nonzero((self.positions[:, 0].real >= lo_x) & (self.positions[:, 0].real <= hi_x))[0]
        ay = np.nonzero((self.positions[0, :].imag >= lo_y) & (self.positions[0, :].imag <= hi_y))[0]
        if ax.size == 0 or ay.size == 0:
            return out
        sub = self.positions[ax[0]:ax[-1] + 1, ay[0]:ay[-1] + 1]
        near = distance_to(sub, cut) <= width
        out[ax[0]:ax[-1] + 1, ay[0]:ay[-1] + 1] = near
        return out & self.interior


@lru_cache(maxsize=16)
def refined_grid(dom: LatticeDomain, k: int) -> RefinedGrid:
    logger.info(f"Building refined grid k={k} for domain with {len(dom.cells)} cells")
    return RefinedGrid(dom, k)


def _require_inside(dom: LatticeDomain, z: complex, what: str = "z") -> None:
    if not bool(dom.closed_contains(z)):
        raise InvalidInputError(f"{what}={z} is outside the domain")


def _distances_from_cut(grid: RefinedGrid, cut: CrossCut) -> np.ndarray:
    """Interior shortest-path distance from every interior node to the cut."""
    seeds = grid.band(cut, grid.h)
    if not seeds.any():
        seeds = grid.band(cut, 2 * grid.h)
    if not seeds.any():
        raise InvalidInputError("target cross cut does not meet the domain interior")
    idx = grid.flat_index
    size = grid.graph.shape[0]
    seed_ids = idx[seeds]
    seed_w = np.maximum(distance_to(grid.positions[seeds], cut), 1e-12)
    g = grid.graph.tocoo()
    rows = np.concatenate([g.row, np.full(seed_ids.size, size)])
    cols = np.concatenate([g.col, seed_ids])
    w = np.concatenate([g.data, seed_w])
    full = sparse.csr_matrix((w, (rows, cols)), shape=(size + 1, size + 1))
    dist = dijkstra(full, directed=True, indices=size)
    out = np.full(grid.shape, np.inf)
    out[grid.interior] = dist[:size]
    return out


def interior_distance(dom: LatticeDomain, z: PointLike, target: CrossCut, refinement: Optional[int] = None) -> float:
    """
    Length of the shortest path from z to the target inside the open domain.

    Computed on the refined 8-neighbour graph; z joins the graph through the corners of
    its refined square.
    """
    z = as_complex(z)
    _require_inside(dom, z)
    grid = dom.grid(refinement)
    direct = float(distance_to(np.array([z]), target)[0])
    if direct < grid.h:
        return direct
    dist = _distances_from_cut(grid, target)
    return _join_point(grid, dist, z)


def _join_point(grid: RefinedGrid, dist: np.ndarray, z: complex) -> float:
    fx = np.floor(z.real / grid.h).astype(int) - grid.origin[0]
    fy = np.floor(z.imag / grid.h).astype(int) - grid.origin[1]
    best = np.inf
    for a in (fx, fx + 1):
        for b in (fy, fy + 1):
            if 0 <= a < grid.shape[0] and 0 <= b < grid.shape[1] and grid.interior[a, b]:
                best = min(best, abs(grid.positions[a, b] - z) + dist[a, b])
    if not np.isfinite(best):
        node = grid.nearest_interior(z)
        if node is None:
            raise InvalidInputError(f"z={z} is too close to the boundary for the refined grid")
        logger.warning(f"z={z} joined to the grid through its nearest interior node")
        best = abs(grid.positions[node] - z) + dist[node]
    return float(best)


def circle_components(dom: LatticeDomain, z: PointLike, r: float, refinement: Optional[int] = None) -> List[CrossCut]:
    """Connected components of S(z, r) ∩ domain, ordered by starting angle."""
    z = as_complex(z)
    if r <= 0:
        raise InvalidInputError("r must be positive")
    h = 1.0 / (dom.n * (refinement or config.REFINEMENT))
    M = max(256, int(np.ceil(4 * np.pi * r / h)))
    theta = 2 * np.pi * np.arange(M) / M
    pts = z + r * np.exp(1j * theta)
    inside = dom.contains(pts)
    if inside.all():
        return [CrossCut.from_array(pts, closed=True)]
    if not inside.any():
        return []

    def crossing(t_in: float, t_out: float) -> complex:
        for _ in range(50):
            mid = 0.5 * (t_in + t_out)
            if bool(dom.contains(z + r * np.exp(1j * mid))):
                t_in = mid
            else:
                t_out = mid
        return z + r * np.exp(1j * 0.5 * (t_in + t_out))

    start = int(np.argmin(inside))
    order = (np.arange(M) + start) % M
    comps = []
    k = 0
    while k < M:
        if not inside[order[k]]:
            k += 1
            continue
        s = k
        while k < M and inside[order[k]]:
            k += 1
        e = k - 1
        i_first, i_last = order[s], order[e]
        t_first = theta[i_first]
        t_before = t_first - 2 * np.pi / M
        t_last = theta[i_last]
        if t_last < t_first:
            t_last += 2 * np.pi
        t_after = t_last + 2 * np.pi / M
        body = z + r * np.exp(1j * np.linspace(t_first, t_last, e - s + 1))
        pts_run = np.concatenate([[crossing(t_first, t_before)], body, [crossing(t_last, t_after)]])
        comps.append((t_first % (2 * np.pi), CrossCut.from_array(pts_run)))
    comps.sort(key=lambda c: c[0])
    return [c for _, c in comps]


def separates(grid: RefinedGrid, cut: CrossCut, p: complex, q: complex) -> bool:
    """Whether removing the cut (thickened by one grid step) disconnects p from q."""
    mask = grid.interior & ~grid.band(cut)
    labels = grid.label(mask)
    np_ = grid.nearest_interior(p, mask)
    nq = grid.nearest_interior(q, mask)
    if np_ is None or nq is None:
        return True
    return labels[np_] != labels[nq]


def innermost_disconnecting(
    dom: LatticeDomain, z: PointLike, r: float, u: PointLike, refinement: Optional[int] = None
) -> CrossCut:
    """
    Component of S(z, r) ∩ domain separating z from u that also separates every other
    separating component from z.

    Raises:
        InvalidInputError: If r >= |z - u|
        NotFoundError: If no component separates z from u
    """
    z, u = as_complex(z), as_complex(u)
    if r >= abs(z - u):
        raise InvalidInputError(f"r={r} must be smaller than |z - u|={abs(z - u)}")
    _require_inside(dom, z)
    _require_inside(dom, u, "u")
    grid = dom.grid(refinement)
    comps = circle_components(dom, z, r, refinement)
    separating = [c for c in comps if separates(grid, c, z, u)]
    if not separating:
        raise NotFoundError(f"no component of S({z}, {r}) separates z from u")
    if len(separating) == 1:
        return separating[0]

    innermost = []
    for c in separating:
        mask = grid.interior & ~grid.band(c)
        labels = grid.label(mask)
        zn = grid.nearest_interior(z, mask)
        shields = True
        for other in separating:
            if other is c:
                continue
            mid = other.array[len(other.points) // 2]
            on = grid.nearest_interior(mid, mask)
            if on is not None and zn is not None and labels[on] == labels[zn]:
                shields = False
                break
        if shields:
            innermost.append(c)
    candidates = innermost or separating
    if len(candidates) > 1:
        logger.info(f"Breaking tie among {len(candidates)} innermost candidates by interior distance")
    return min(candidates, key=lambda c: interior_distance(dom, z, c, refinement))


def is_close_approximation(
    dom_n: LatticeDomain,
    a_n: BoundaryEdge,
    limit_dom: Union[Polygon, Sequence[PointLike]],
    a: PointLike,
    r: float,
    w_r: PointLike,
    refinement: Optional[int] = None,
) -> bool:
    """True iff a_n and w_r are connected by a path in dom_n ∩ B̄(a, r)."""
    a, w_r = as_complex(a), as_complex(w_r)
    poly = limit_dom if isinstance(limit_dom, Polygon) else Polygon([(p.real, p.imag) for p in map(as_complex, limit_dom)])
    grid = dom_n.grid(refinement)
    mid = a_n.midpoint(dom_n.n)
    if abs(mid - a) > r:
        raise InvalidInputError("a_n must lie within distance r of a")
    if abs(abs(w_r - a) - r) > grid.h:
        raise InvalidInputError("w_r must lie on the circle S(a, r)")
    if not poly.buffer(grid.h).covers(shapely.points(w_r.real, w_r.imag)):
        raise InvalidInputError("w_r must lie in the closure of the limit domain")
    if not bool(dom_n.contains(w_r)):
        return False
    ball = grid.interior & (np.abs(grid.positions - a) <= r)
    start = grid.nearest_interior(dom_n.anchor(a_n, grid.h), ball)
    end = grid.nearest_interior(w_r, ball)
    if start is None or end is None:
        return False
    labels = grid.label(ball)
    return bool(labels[start] == labels[end])


def write_domain(path: Path, dom: LatticeDomain) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [DOMAIN_HEADER, f"n {dom.n}", f"u {dom.u.real:.17g} {dom.u.imag:.17g}"]
    lines += [f"cell {i} {j}" for i, j in sorted(dom.cells)]
    lines += [f"mark a {dom.a.i} {dom.a.j} {dom.a.dir}", f"mark b {dom.b.i} {dom.b.j} {dom.b.dir}"]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_domain(path: Path) -> LatticeDomain:
    """
    Read a `domain v1` file.

    Raises:
        InvalidInputError: On a malformed file or an invalid domain
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise InvalidInputError(f"Cannot read domain file {path}: {e}") from e
    if not lines or lines[0].strip() != DOMAIN_HEADER:
        raise InvalidInputError(f"{path}: expected header {DOMAIN_HEADER!r}")
    n, u, cells, marks = None, None, [], {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "n":
                n = int(parts[1])
            elif parts[0] == "u":
                u = complex(float(parts[1]), float(parts[2]))
            elif parts[0] == "cell":
                cells.append((int(parts[1]), int(parts[2])))
            elif parts[0] == "mark" and parts[1] in ("a", "b"):
                marks[parts[1]] = BoundaryEdge(int(parts[2]), int(parts[3]), parts[4])
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (IndexError, ValueError) as e:
            raise InvalidInputError(f"{path}:{lineno}: {e}") from e
    if n is None or u is None:
        raise InvalidInputError(f"{path}: missing n or u")
    return from_cells(n, cells, u, marks.get("a"), marks.get("b"), name=path.stem)
