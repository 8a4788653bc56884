"""Fjord construction: the Cδ square loop around u and the regions it cuts off."""
import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse.csgraph import dijkstra

from loewnerlab.config import config
from loewnerlab.errors import DeltaTooLargeError, InvalidInputError
from loewnerlab.lattice import EIGHT, CrossCut, LatticeDomain, PointLike, RefinedGrid, as_complex

logger = logging.getLogger(__name__)

Reference = Literal["u", "ab"]


@dataclass(eq=False)
class Fjord:
    """Region cut off from the reference by a small mouth; depth is interior distance to the mouth."""

    mouth: CrossCut
    points: np.ndarray
    distances: np.ndarray
    reference: Reference = "u"
    marked: bool = False
    n: int = field(default=1, repr=False)

    @property
    def depth(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0

    @property
    def mouth_diameter(self) -> float:
        return self.mouth.diameter

    @property
    def cells(self) -> frozenset:
        ij = np.floor(np.column_stack([self.points.real, self.points.imag]) * self.n).astype(int)
        return frozenset(map(tuple, ij))

    def contains(self, z: PointLike, tol: Optional[float] = None) -> bool:
        z = as_complex(z)
        tol = tol if tol is not None else 1.5 / self.n
        return bool(self.points.size) and float(np.min(np.abs(self.points - z))) <= tol

    def depth_at(self, z: PointLike) -> float:
        """Interior distance from z to the mouth, through the closest fjord node."""
        z = as_complex(z)
        if not self.points.size:
            raise InvalidInputError("empty fjord")
        gaps = np.abs(self.points - z)
        k = int(np.argmin(gaps))
        if gaps[k] > 1.5 / self.n:
            raise InvalidInputError(f"z={z} is not inside this fjord")
        return float(self.distances[k] + gaps[k])

    def is_deep(self, ell: float) -> bool:
        """Whether some point of the fjord lies ell-deep."""
        return self.depth >= ell


def _square_mask(grid: RefinedGrid, good: np.ndarray, s: float):
    """Squares of the sℤ² lattice all of whose grid nodes are good."""
    pos = grid.positions
    x, y = pos.real / s, pos.imag / s
    pa, pb = np.ceil(x - 1e-9).astype(int) - 1, np.floor(x + 1e-9).astype(int)
    qa, qb = np.ceil(y - 1e-9).astype(int) - 1, np.floor(y + 1e-9).astype(int)
    p0, q0 = int(pa.min()), int(qa.min())
    shape = (int(pb.max()) - p0 + 1, int(qb.max()) - q0 + 1)
    bad = np.zeros(shape, dtype=bool)
    seen = np.zeros(shape, dtype=bool)
    for P in (pa, pb):
        for Q in (qa, qb):
            seen[P - p0, Q - q0] = True
            np.logical_or.at(bad, (P[~good] - p0, Q[~good] - q0), True)
    return seen & ~bad, (p0, q0)


def _loop_vertices(region: np.ndarray, origin, s: float) -> np.ndarray:
    """Corners of the square region that also touch a square outside it."""
    padded = np.pad(region, 1)
    blocks = np.stack([padded[:-1, :-1], padded[1:, :-1], padded[:-1, 1:], padded[1:, 1:]])
    on_loop = blocks.any(axis=0) & ~blocks.all(axis=0)
    vi, vj = np.nonzero(on_loop)
    return ((vi + origin[0]) + 1j * (vj + origin[1])) * s


def _order_chain(pts: np.ndarray, start: int) -> np.ndarray:
    remaining = list(range(len(pts)))
    order = [remaining.pop(start)]
    while remaining:
        last = pts[order[-1]]
        k = int(np.argmin(np.abs(pts[remaining] - last)))
        order.append(remaining.pop(k))
    return pts[order]


def build_fjords(
    dom: LatticeDomain,
    u: Optional[PointLike] = None,
    delta: float = 0.05,
    C: Optional[float] = None,
    reference: Reference = "u",
    refinement: Optional[int] = None,
) -> List[Fjord]:
    """
    Cut the domain into the loop interior and fjords with respect to u.

    The loop is the outer boundary of the Cδ-square component around u inside the
    (C+1)δ-interior. Every loop vertex is joined to its nearest boundary point; the
    regions left between these cuts, the loop and ∂Λ are the fjords.

    Args:
        dom: Lattice domain
        u: Reference point (defaults to dom.u)
        delta: Scale δ
        C: Square-size constant (defaults to LAB_FJORD_C)
        reference: "u" for the plain decomposition. "ab" keeps the same cut around u
            and sets Fjord.marked on every fjord holding a or b; the marked ones
            are the regions a curve from a to b has to leave, see split_marked
        refinement: Grid refinement factor

    Returns:
        Fjords ordered by decreasing depth

    Raises:
        DeltaTooLargeError: If no square loop encloses u at this δ
    """
    u = dom.u if u is None else as_complex(u)
    C = config.FJORD_C if C is None else C
    if delta <= 0 or C <= 0:
        raise InvalidInputError("delta and C must be positive")
    grid = dom.grid(refinement)
    s = C * delta
    if s < 2 * grid.h:
        logger.warning(f"Square side {s:.3g} resolves poorly on grid step {grid.h:.3g}")

    core = grid.interior & (grid.boundary_distance > (C + 1) * delta)
    u_node = grid.nearest_interior(u)
    if u_node is None or not core[u_node]:
        raise DeltaTooLargeError(f"u is not in the {(C + 1) * delta:.3g}-interior; delta={delta} too large")
    labels = grid.label(core)
    G = labels == labels[u_node]

    squares, origin = _square_mask(grid, G, s)
    su = (int(np.floor(u.real / s)) - origin[0], int(np.floor(u.imag / s)) - origin[1])
    if not (0 <= su[0] < squares.shape[0] and 0 <= su[1] < squares.shape[1]) or not squares[su]:
        raise DeltaTooLargeError(f"no {s:.3g}-square loop encloses u; delta={delta} too large")
    sq_labels, _ = ndimage.label(squares)
    region = ndimage.binary_fill_holes(sq_labels == sq_labels[su])

    pos = grid.positions
    pi = np.floor(pos.real / s + 1e-9).astype(int) - origin[0]
    qi = np.floor(pos.imag / s + 1e-9).astype(int) - origin[1]
    pj = np.ceil(pos.real / s - 1e-9).astype(int) - 1 - origin[0]
    qj = np.ceil(pos.imag / s - 1e-9).astype(int) - 1 - origin[1]

    def in_region(P, Q):
        ok = (P >= 0) & (P < region.shape[0]) & (Q >= 0) & (Q < region.shape[1])
        out = np.zeros(P.shape, dtype=bool)
        out[ok] = region[P[ok], Q[ok]]
        return out

    closed_R = in_region(pi, qi) | in_region(pi, qj) | in_region(pj, qi) | in_region(pj, qj)
    open_R = in_region(pi, qi) & in_region(pi, qj) & in_region(pj, qi) & in_region(pj, qj)
    rim = ndimage.binary_dilation(closed_R, structure=EIGHT) & ~closed_R
    loop_band = ((closed_R & ~open_R) | rim) & grid.interior

    barrier = loop_band.copy()
    vertices = _loop_vertices(region, origin, s)
    outside_idx = grid.nearest_outside
    for v in vertices:
        node = grid.nearest_interior(v)
        if node is None:
            continue
        target = pos[outside_idx[0][node], outside_idx[1][node]]
        barrier |= grid.band(CrossCut((v, target)))
    free = grid.interior & ~closed_R & ~barrier
    fj_labels = grid.label(free)
    count = int(fj_labels.max())
    logger.info(f"Square loop with {len(vertices)} vertices leaves {count} fjord regions (delta={delta}, C={C})")

    # barrier nodes outside R belong to the nearest fjord region
    leftover = grid.interior & ~open_R & (fj_labels == 0)
    if count:
        _, (ni, nj) = ndimage.distance_transform_edt(fj_labels == 0, return_indices=True)
        full_labels = np.where(leftover, fj_labels[ni, nj], fj_labels)
    else:
        full_labels = fj_labels

    idx = grid.flat_index
    sources = idx[barrier | loop_band]
    dist = np.full(grid.shape, np.inf)
    if sources.size:
        d = dijkstra(grid.graph, directed=False, indices=sources, min_only=True)
        dist[grid.interior] = d
    dist[barrier | loop_band] = 0.0

    anchors = []
    if reference == "ab":
        for edge in (dom.a, dom.b):
            node = grid.nearest_interior(dom.anchor(edge, grid.h))
            anchors.append(full_labels[node] if node is not None else 0)

    barrier_all = barrier | loop_band
    fjords = []
    for lab in range(1, count + 1):
        member = fj_labels == lab
        mouth_mask = barrier_all & ndimage.binary_dilation(member, structure=EIGHT)
        mouth_pts = pos[mouth_mask]
        if mouth_pts.size == 0:
            continue
        start = int(np.argmin(grid.boundary_distance[mouth_mask]))
        mouth = CrossCut.from_array(_order_chain(mouth_pts, start))
        owned = full_labels == lab
        fjords.append(
            Fjord(
                mouth=mouth,
                points=pos[owned],
                distances=dist[owned],
                reference=reference,
                marked=lab in anchors,
                n=dom.n,
            )
        )
    fjords.sort(key=lambda f: -f.depth)
    if reference == "ab":
        logger.info(f"{sum(f.marked for f in fjords)} of {len(fjords)} fjords hold a marked edge")
    return fjords


def split_marked(fjords: Sequence[Fjord]) -> Tuple[List[Fjord], List[Fjord]]:
    """Marked and unmarked fjords, each kept in depth order."""
    marked = [f for f in fjords if f.marked]
    return marked, [f for f in fjords if not f.marked]
