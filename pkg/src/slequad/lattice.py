"""Discrete quads on the square lattice.

A domain is a set of unit cells (a boolean mask); the primal graph
consists of the corners and sides of present cells. Four marked
boundary vertices a, b, c, d in counterclockwise order split the
boundary cycle into arcs (ab), (bc), (cd), (da); the horizontal-ish
arcs (ab) and (cd) are wired, the other two are free.

Conventions fixed here and relied on elsewhere:

- cell (ix, iy) occupies [ix, ix+1] x [iy, iy+1] in lattice units; all
  geometry is in lattice units, scaled by `mesh` only when handed to
  the continuum modules;
- the boundary cycle is traversed counterclockwise (interior on the
  left), starting at a;
- the medial boundary walk follows the outer boundary of the union of
  the cells' inscribed diamonds, same orientation;
- the medial corners sit on the free arcs: a-diamond and d-diamond are
  the midpoints of the (da)-arc edges incident to a and d, b-diamond
  and c-diamond the midpoints of the (bc)-arc edges incident to b and
  c. (Near a corner the assignment of the adjacent medial vertex is
  ambiguous between the wired and free side; we fix the free side.)

Mask file format (also accepted by the command line front end): first
line is eight integers `ax ay bx by cx cy dx dy`, the remaining lines
draw the cell grid top row first, '#' for a present cell and '.' for
an absent one. Every line may carry a trailing newline, nothing else.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy import ndimage

Vertex = tuple[int, int]
Edge = tuple[Vertex, Vertex]

_ROLES = ("wired_ab", "free_bc", "wired_cd", "free_da")


class LatticeTopologyError(ValueError):
    """Mask is disconnected, has a hole, or pinches at a corner."""


class MarkedPointError(ValueError):
    """Marked points missing from the boundary or out of cyclic order."""


def _edge(u: Vertex, v: Vertex) -> Edge:
    return (u, v) if u <= v else (v, u)


class QuadLattice:
    """Immutable discrete quad; construct via build_rect_quad or
    build_mask_quad."""

    def __init__(self, mask: np.ndarray, marked, mesh: float):
        if mesh <= 0.0:
            raise ValueError("mesh must be positive")
        mask = np.ascontiguousarray(np.asarray(mask, dtype=bool))
        if mask.ndim != 2 or not mask.any():
            raise LatticeTopologyError("mask must be a nonempty 2d cell grid")
        self.mask = mask
        self.mask.setflags(write=False)
        self.mesh = float(mesh)
        self.marked = tuple(tuple(int(c) for c in p) for p in marked)
        if len(self.marked) != 4 or len(set(self.marked)) != 4:
            raise MarkedPointError("need four distinct marked vertices")
        self._check_topology()
        self.boundary_cycle = self._trace_boundary()
        self.arcs = self._split_arcs()
        self.medial_corners = self._medial_corners()

    # -- construction helpers ------------------------------------------

    def _check_topology(self):
        m = self.mask
        lab, n = ndimage.label(m)
        if n != 1:
            raise LatticeTopologyError("cells are not connected")
        comp = ~np.pad(m, 1)
        lab, n = ndimage.label(comp)
        if n != 1:
            raise LatticeTopologyError("mask has a hole")

    def _boundary_out_map(self) -> dict[Vertex, Vertex]:
        # oriented boundary edges, present cell on the left (ccw walk)
        m = self.mask
        nx, ny = m.shape
        pad = np.pad(m, 1)

        def cell(ix, iy):
            return bool(pad[ix + 1, iy + 1])

        out: dict[Vertex, Vertex] = {}

        def add(u, v):
            if u in out:
                raise LatticeTopologyError("boundary pinches at a vertex")
            out[u] = v

        for ix in range(nx + 1):
            for iy in range(ny + 1):
                # horizontal edge (ix,iy)-(ix+1,iy): cells above/below
                if ix <= nx - 1:
                    above, below = cell(ix, iy), cell(ix, iy - 1)
                    if above and not below:
                        add((ix, iy), (ix + 1, iy))
                    elif below and not above:
                        add((ix + 1, iy), (ix, iy))
                # vertical edge (ix,iy)-(ix,iy+1): cells left/right
                if iy <= ny - 1:
                    left, right = cell(ix - 1, iy), cell(ix, iy)
                    if left and not right:
                        add((ix, iy), (ix, iy + 1))
                    elif right and not left:
                        add((ix, iy + 1), (ix, iy))
        return out

    def _trace_boundary(self) -> list[Vertex]:
        out = self._boundary_out_map()
        a = self.marked[0]
        if a not in out:
            raise MarkedPointError(f"marked vertex {a} is not on the boundary")
        cyc = [a]
        v = out[a]
        while v != a:
            cyc.append(v)
            v = out[v]
        if len(cyc) != len(out):
            raise LatticeTopologyError("boundary is not a single cycle")
        return cyc

    def _split_arcs(self) -> dict[str, list[Edge]]:
        cyc = self.boundary_cycle
        pos = {v: i for i, v in enumerate(cyc)}
        idx = []
        for p in self.marked:
            if p not in pos:
                raise MarkedPointError(f"marked vertex {p} is not on the boundary")
            idx.append(pos[p])
        if sorted(idx) != idx:
            raise MarkedPointError("marked vertices are not in counterclockwise order")
        n = len(cyc)
        arcs: dict[str, list[Edge]] = {}
        bounds = idx + [n + idx[0]]
        for role, lo, hi in zip(_ROLES, bounds, bounds[1:]):
            arcs[role] = [_edge(cyc[i % n], cyc[(i + 1) % n]) for i in range(lo, hi)]
        return arcs

    def _medial_corners(self):
        def mid(e):
            (x1, y1), (x2, y2) = e
            return ((x1 + x2) / 2.0, (y1 + y2) / 2.0)

        bc, da = self.arcs["free_bc"], self.arcs["free_da"]
        return (mid(da[-1]), mid(bc[0]), mid(bc[-1]), mid(da[0]))

    # -- derived structure ---------------------------------------------

    @cached_property
    def primal_vertices(self) -> frozenset[Vertex]:
        m = self.mask
        nx, ny = m.shape
        corners = np.zeros((nx + 1, ny + 1), dtype=bool)
        for dx in (0, 1):
            for dy in (0, 1):
                corners[dx : nx + dx, dy : ny + dy] |= m
        xs, ys = np.nonzero(corners)
        return frozenset(zip(xs.tolist(), ys.tolist()))

    @cached_property
    def primal_edges(self) -> frozenset[Edge]:
        return frozenset(self.edge_list)

    @cached_property
    def edge_list(self) -> list[Edge]:
        """All primal edges in a deterministic (array-scan) order."""
        return self._edge_arrays()[0]

    def _edge_arrays(self):
        m = self.mask
        nx, ny = m.shape
        pad = np.pad(m, 1)
        edges: list[Edge] = []
        boundary: list[bool] = []
        hor = pad[1 : nx + 1, 1 : ny + 2] | pad[1 : nx + 1, 0 : ny + 1]
        hor_b = pad[1 : nx + 1, 1 : ny + 2] ^ pad[1 : nx + 1, 0 : ny + 1]
        for ix, iy in zip(*np.nonzero(hor)):
            edges.append(((int(ix), int(iy)), (int(ix) + 1, int(iy))))
            boundary.append(bool(hor_b[ix, iy]))
        ver = pad[1 : nx + 2, 1 : ny + 1] | pad[0 : nx + 1, 1 : ny + 1]
        ver_b = pad[1 : nx + 2, 1 : ny + 1] ^ pad[0 : nx + 1, 1 : ny + 1]
        for ix, iy in zip(*np.nonzero(ver)):
            edges.append(((int(ix), int(iy)), (int(ix), int(iy) + 1)))
            boundary.append(bool(ver_b[ix, iy]))
        return edges, boundary

    @cached_property
    def arc_role(self) -> dict[Edge, str]:
        role = {e: "interior" for e in self.primal_edges}
        for name, es in self.arcs.items():
            for e in es:
                role[e] = name
        return role

    @property
    def n_vertices(self) -> int:
        return len(self.primal_vertices)

    @property
    def n_edges(self) -> int:
        return len(self.primal_edges)

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())


def build_rect_quad(N: int, M: int, delta: float = 1.0) -> QuadLattice:
    """[0,N] x [0,M] rectangle: a=(0,0), b=(N,0), c=(N,M), d=(0,M);
    bottom and top arcs wired, sides free."""
    if N < 2 or M < 2:
        raise ValueError("need N, M >= 2")
    mask = np.ones((N, M), dtype=bool)
    return QuadLattice(mask, ((0, 0), (N, 0), (N, M), (0, M)), delta)


def build_mask_quad(mask, marked, delta: float = 1.0) -> QuadLattice:
    """Quad from a boolean cell grid (mask[ix, iy]) and four marked
    boundary vertices in counterclockwise order."""
    return QuadLattice(np.asarray(mask), marked, delta)


class DualLattice:
    """Dual of a QuadLattice with the two outer arcs beside the free
    sides contracted to supernodes.

    Vertices are cell ids 0..n_cells-1 plus BC = n_cells (outer region
    along (bc)) and DA = n_cells+1 (along (da)). Wired primal edges
    have no dual; every other primal edge is crossed exactly once.
    """

    def __init__(self, quad: QuadLattice):
        self.quad = quad
        m = quad.mask
        xs, ys = np.nonzero(m)
        self.cells = list(zip(xs.tolist(), ys.tolist()))
        self.cell_index = {c: i for i, c in enumerate(self.cells)}
        self.bc_star = len(self.cells)
        self.da_star = len(self.cells) + 1
        self.n_vertices = len(self.cells) + 2

        role = quad.arc_role
        pad = np.pad(m, 1)

        def cid(ix, iy):
            return self.cell_index[(ix, iy)] if pad[ix + 1, iy + 1] else None

        edges: list[tuple[int, int]] = []
        crossing: list[Edge] = []
        for e in quad.edge_list:
            r = role[e]
            if r in ("wired_ab", "wired_cd"):
                continue
            (x1, y1), (x2, y2) = e
            if y1 == y2:  # horizontal: flanked by cells above and below
                u, v = cid(x1, y1), cid(x1, y1 - 1)
            else:  # vertical: right and left
                u, v = cid(x1, y1), cid(x1 - 1, y1)
            if r == "interior":
                assert u is not None and v is not None
            else:
                outer = self.bc_star if r == "free_bc" else self.da_star
                u, v = (u if u is not None else outer), (v if v is not None else outer)
            edges.append((u, v))
            crossing.append(e)
        self.edges = edges
        self.crossing = crossing
        self.crossing_of = dict(zip(crossing, edges))


def dual_of(quad: QuadLattice) -> DualLattice:
    return DualLattice(quad)


_TURN_CW = {(1, 0): (0, -1), (0, -1): (-1, 0), (-1, 0): (0, 1), (0, 1): (1, 0)}


def medial_walk(quad: QuadLattice) -> list[tuple[float, float]]:
    """Closed counterclockwise cycle of medial vertices (edge midpoints)
    along the outer boundary of the union of cell diamonds, starting at
    the a-diamond corner (midpoint of the last (da)-arc edge)."""
    cyc = quad.boundary_cycle
    edges = quad.primal_edges
    n = len(cyc)
    walk: list[tuple[float, float]] = []
    for i in range(n):
        u, v, w = cyc[i - 1], cyc[i], cyc[(i + 1) % n]
        walk.append(((u[0] + v[0]) / 2.0, (u[1] + v[1]) / 2.0))
        # pinch vertices at v: present edges strictly between the
        # reversed incoming direction and the outgoing one, clockwise
        d = (u[0] - v[0], u[1] - v[1])
        d_out = (w[0] - v[0], w[1] - v[1])
        d = _TURN_CW[d]
        while d != d_out:
            t = (v[0] + d[0], v[1] + d[1])
            if _edge(v, t) in edges:
                walk.append(((v[0] + t[0]) / 2.0, (v[1] + t[1]) / 2.0))
            d = _TURN_CW[d]
    return walk


# -- mask file round trip ----------------------------------------------


def parse_quad_text(text: str, delta: float = 1.0) -> QuadLattice:
    lines = [ln.rstrip("\n") for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise ValueError("empty quad file")
    head = lines[0].split()
    if len(head) != 8:
        raise ValueError("header must hold eight integers: ax ay bx by cx cy dx dy")
    nums = [int(t) for t in head]
    marked = tuple((nums[2 * i], nums[2 * i + 1]) for i in range(4))
    rows = lines[1:]
    if not rows:
        raise ValueError("no cell rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows) or any(set(r) - set("#.") for r in rows):
        raise ValueError("cell rows must be equal-length strings of '#' and '.'")
    ny = len(rows)
    mask = np.zeros((width, ny), dtype=bool)
    for i, row in enumerate(rows):  # top row first
        iy = ny - 1 - i
        for ix, ch in enumerate(row):
            mask[ix, iy] = ch == "#"
    return build_mask_quad(mask, marked, delta)


def format_quad_text(quad: QuadLattice) -> str:
    (ax, ay), (bx, by), (cx, cy), (dx, dy) = quad.marked
    head = f"{ax} {ay} {bx} {by} {cx} {cy} {dx} {dy}"
    nx, ny = quad.mask.shape
    rows = []
    for iy in range(ny - 1, -1, -1):
        rows.append("".join("#" if quad.mask[ix, iy] else "." for ix in range(nx)))
    return "\n".join([head] + rows) + "\n"


def load_quad_file(path, delta: float = 1.0) -> QuadLattice:
    with open(path, "r", encoding="ascii") as fh:
        return parse_quad_text(fh.read(), delta)


def save_quad_file(path, quad: QuadLattice) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_quad_text(quad))
