"""Uniform spanning trees on quads and their interface curves.

Both wired arcs of a quad are contracted to single nodes and a uniform
spanning tree of the contracted graph is drawn with Wilson's algorithm.
Three derived objects carry the statistics: the middle branch (the
unique tree path joining the two wired arcs), the complementary dual
forest (exactly two components, one per free side), and the pair of
Peano curves tracing the tree/forest interface along the medial
lattice, eta_l from the a-corner to the d-corner and eta_r from b to c.

Points stay in lattice units throughout (vertices at integer pairs,
medial points at edge midpoints); physical coordinates are the lattice
ones scaled by quad.mesh.
"""

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .backend import impl
from .lattice import DualLattice, QuadLattice, _edge, dual_of
from .rng import CHUNK, block_source, sample_stream


class TraceError(RuntimeError):
    """Internal consistency failure while tracing a Peano curve."""


# -- contracted graph ----------------------------------------------------


class ContractedGraph:
    """CSR adjacency of a quad with both wired arcs contracted.

    Node ids are the non-wired vertices in sorted order, then the (ab)
    supernode and the (cd) supernode. Parallel edges into a supernode
    are kept, so walking to a uniform neighbor matches the walk on the
    uncontracted lattice; edges inside a supernode are dropped.
    """

    def __init__(self, quad: QuadLattice):
        on_ab, on_cd = set(), set()
        for role, arc in (("wired_ab", on_ab), ("wired_cd", on_cd)):
            for u, v in quad.arcs[role]:
                arc.add(u)
                arc.add(v)
        regular = sorted(v for v in quad.primal_vertices if v not in on_ab and v not in on_cd)
        node_of = {v: i for i, v in enumerate(regular)}
        self.ab_node = len(regular)
        self.cd_node = len(regular) + 1
        self.n_nodes = len(regular) + 2
        for v in on_ab:
            node_of[v] = self.ab_node
        for v in on_cd:
            node_of[v] = self.cd_node
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        for eid, (u, v) in enumerate(quad.edge_list):
            nu, nv = node_of[u], node_of[v]
            if nu == nv:  # edge inside a supernode, never walked
                continue
            adj[nu].append((nv, eid))
            adj[nv].append((nu, eid))
        indptr = np.zeros(self.n_nodes + 1, np.int32)
        for i, lst in enumerate(adj):
            indptr[i + 1] = indptr[i] + len(lst)
        flat = [p for lst in adj for p in lst]
        self.indptr = indptr
        self.nbr_node = np.array([p[0] for p in flat], np.int32)
        self.nbr_eid = np.array([p[1] for p in flat], np.int32)
        self.regular = regular
        self.node_of = node_of
        self.on_ab = frozenset(on_ab)
        self.on_cd = frozenset(on_cd)
        # uniform block per refill; small graphs get small blocks
        self.block = int(min(CHUNK, max(64, 16 * self.n_nodes)))


def _graph(quad) -> ContractedGraph:
    try:
        return quad._ust_graph
    except AttributeError:
        pass
    g = ContractedGraph(quad)
    quad._ust_graph = g
    return g


def _dual(quad) -> DualLattice:
    try:
        return quad._ust_dual
    except AttributeError:
        pass
    d = dual_of(quad)
    quad._ust_dual = d
    return d


def _edge_index(quad) -> dict:
    try:
        return quad._ust_edge_index
    except AttributeError:
        pass
    idx = {e: i for i, e in enumerate(quad.edge_list)}
    quad._ust_edge_index = idx
    return idx


def _dual_arrays(quad):
    """(eu, ev, cross_eid): dual edge endpoints and the primal edge id
    each one crosses, aligned with dual_of(quad).edges."""
    try:
        return quad._ust_dual_arrays
    except AttributeError:
        pass
    d = _dual(quad)
    idx = _edge_index(quad)
    eu = np.array([u for u, _ in d.edges], np.int32)
    ev = np.array([v for _, v in d.edges], np.int32)
    ceid = np.array([idx[e] for e in d.crossing], np.int32)
    quad._ust_dual_arrays = (eu, ev, ceid)
    return eu, ev, ceid


# -- spanning trees ------------------------------------------------------


class SpanningTree:
    """Spanning tree of the contracted quad graph.

    parent_node / parent_eid map every node to its parent toward the
    (ab)-supernode root (entries -1 there); edges is the primal edge
    set of the tree, wired arcs included.
    """

    def __init__(self, quad: QuadLattice, parent_node, parent_eid):
        self.quad = quad
        self.parent_node = np.asarray(parent_node, np.int32)
        self.parent_eid = np.asarray(parent_eid, np.int32)

    def tree_eids(self) -> np.ndarray:
        """Edge ids of the non-wired tree edges."""
        return self.parent_eid[self.parent_eid >= 0]

    @cached_property
    def edges(self) -> frozenset:
        el = self.quad.edge_list
        es = [el[k] for k in self.tree_eids().tolist()]
        es.extend(self.quad.arcs["wired_ab"])
        es.extend(self.quad.arcs["wired_cd"])
        return frozenset(es)


def wilson_sample(quad: QuadLattice, rng: np.random.Generator, record=None) -> SpanningTree:
    """Draw a uniform spanning tree with Wilson's algorithm.

    The first loop-erased walk runs from the (cd) supernode to the
    (ab) root, so it realizes the middle branch directly; remaining
    passes sweep node ids in order. `record`, if a list, receives the
    raw node sequence of that first walk.
    """
    g = _graph(quad)
    pn, pe = impl.wilson_ust(
        g.indptr, g.nbr_node, g.nbr_eid, g.ab_node, g.cd_node,
        block_source(rng, g.block), record,
    )
    return SpanningTree(quad, pn, pe)


def tree_from_edges(quad: QuadLattice, edges) -> SpanningTree:
    """Build a SpanningTree from an explicit primal edge set.

    Wired-arc edges may be listed or omitted; the rest must form a
    spanning tree of the contracted graph. Meant for enumeration
    oracles and hand-built examples, so it validates its input.
    """
    g = _graph(quad)
    role = quad.arc_role
    idx = _edge_index(quad)
    keep = set()
    for e in edges:
        e = _edge(tuple(e[0]), tuple(e[1]))
        r = role.get(e)
        if r is None:
            raise ValueError(f"{e} is not a lattice edge")
        if r in ("wired_ab", "wired_cd"):
            continue
        keep.add(idx[e])
    if len(keep) != g.n_nodes - 1:
        raise ValueError("edge count does not match a spanning tree")
    parent_node = np.full(g.n_nodes, -1, np.int32)
    parent_eid = np.full(g.n_nodes, -1, np.int32)
    seen = np.zeros(g.n_nodes, bool)
    seen[g.ab_node] = True
    stack = [g.ab_node]
    while stack:
        u = stack.pop()
        for k in range(g.indptr[u], g.indptr[u + 1]):
            v = int(g.nbr_node[k])
            eid = int(g.nbr_eid[k])
            if eid in keep and not seen[v]:
                seen[v] = True
                parent_node[v] = u
                parent_eid[v] = eid
                stack.append(v)
    if not seen.all():
        raise ValueError("edges do not span the quad")
    return SpanningTree(quad, parent_node, parent_eid)


def loop_erase(walk: list) -> list:
    """Chronological loop erasure: every revisit truncates the path
    back to the first visit. States only need to be hashable."""
    out: list = []
    pos: dict = {}
    for v in walk:
        if v in pos:
            cut = pos[v] + 1
            for w in out[cut:]:
                del pos[w]
            del out[cut:]
        else:
            pos[v] = len(out)
            out.append(v)
    return out


# -- middle branch -------------------------------------------------------


@dataclass(frozen=True)
class BranchSample:
    """Middle branch of a tree, as the lattice path gamma from x_m on
    the (ab) arc to y_m on the (cd) arc."""

    gamma: tuple
    x_m: tuple
    y_m: tuple


def middle_branch(tree: SpanningTree) -> BranchSample:
    """Read the branch joining the wired arcs off the parent map."""
    q = tree.quad
    g = _graph(q)
    el = q.edge_list
    u = g.cd_node
    eids: list[int] = []
    mids: list[tuple] = []
    while u != g.ab_node:
        if tree.parent_eid[u] < 0 or len(eids) > g.n_nodes:
            raise RuntimeError("parent chain does not reach the root")
        eids.append(int(tree.parent_eid[u]))
        u = int(tree.parent_node[u])
        if u != g.ab_node:
            mids.append(g.regular[u])
    u1, u2 = el[eids[0]]
    y_m = u1 if u1 in g.on_cd else u2
    u1, u2 = el[eids[-1]]
    x_m = u1 if u1 in g.on_ab else u2
    gamma = (x_m, *reversed(mids), y_m)
    assert len(set(gamma)) == len(gamma), "middle branch revisits a vertex"
    for p, r in zip(gamma, gamma[1:]):
        assert abs(p[0] - r[0]) + abs(p[1] - r[1]) == 1, "branch step is not a lattice edge"
    for v in gamma[1:-1]:
        assert v not in g.on_ab and v not in g.on_cd, "branch re-enters a wired arc"
    return BranchSample(gamma, x_m, y_m)


# -- dual forest ---------------------------------------------------------


@dataclass(frozen=True)
class DualForest:
    """Complement of a tree in the dual graph: keep flags the dual
    edges not crossed by the tree, in_da flags the vertices in the
    component of the (da)-side outer vertex."""

    dual: DualLattice
    keep: np.ndarray
    in_da: np.ndarray

    @property
    def n_cells_da(self) -> int:
        return int(self.in_da[: len(self.dual.cells)].sum())


def _reachable(n_vert, eu, ev, start):
    adj: list[list[int]] = [[] for _ in range(n_vert)]
    for u, v in zip(eu.tolist(), ev.tolist()):
        adj[u].append(v)
        adj[v].append(u)
    seen = np.zeros(n_vert, bool)
    seen[start] = True
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


def dual_forest(tree: SpanningTree, dual: DualLattice = None) -> DualForest:
    """Dual forest left by the tree: exactly two components, one per
    free side. Raises RuntimeError if the complement is inconsistent."""
    q = tree.quad
    d = dual if dual is not None else _dual(q)
    eu, ev, ceid = _dual_arrays(q)
    in_tree = np.zeros(q.n_edges, bool)
    in_tree[tree.tree_eids()] = True
    keep = ~in_tree[ceid]
    if int(keep.sum()) != d.n_vertices - 2:
        raise RuntimeError("dual complement is not a two-component forest")
    in_da = _reachable(d.n_vertices, eu[keep], ev[keep], d.da_star)
    in_bc = _reachable(d.n_vertices, eu[keep], ev[keep], d.bc_star)
    if in_da[d.bc_star] or not np.all(in_da ^ in_bc):
        raise RuntimeError("dual forest does not split into the two free sides")
    return DualForest(d, keep, in_da)


# -- medial sides and Peano curves ---------------------------------------

_CCW = ((1, 0), (0, 1), (-1, 0), (0, -1))
_CCW_INDEX = {d: i for i, d in enumerate(_CCW)}
# absent quadrant swept while the outer normal rotates d -> next(d)
_QUADRANT = {(1, 0): (0, 0), (0, 1): (-1, 0), (-1, 0): (-1, -1), (0, -1): (0, -1)}


def _present(quad, cell) -> bool:
    x, y = cell
    nx, ny = quad.mask.shape
    return 0 <= x < nx and 0 <= y < ny and bool(quad.mask[x, y])


def _arc_run(quad, role) -> list:
    """Boundary vertices along one arc, endpoints included."""
    cyc = quad.boundary_cycle
    n = len(cyc)
    pos = {v: i for i, v in enumerate(cyc)}
    a, b, c, d = quad.marked
    lo, hi = {
        "wired_ab": (a, b), "free_bc": (b, c),
        "wired_cd": (c, d), "free_da": (d, a),
    }[role]
    i, j = pos[lo], pos[hi]
    if j <= i:
        j += n
    return [cyc[k % n] for k in range(i, j + 1)]


def _medial_sides(quad):
    """Side table of the medial quad.

    A side is keyed by (cell, corner) and maps to the midpoints of the
    cell's two edges at that corner. Present cells contribute all four
    corners; each absent cell beside a free arc contributes the two
    sides swept at interior arc vertices while the boundary direction
    rotates counterclockwise from the inbound to the outbound edge
    (the marked corner vertices sweep nothing). Returns (sides, outer)
    where outer lists the absent-cell side keys per free arc.
    """
    try:
        return quad._ust_sides
    except AttributeError:
        pass
    sides = {}
    xs, ys = np.nonzero(quad.mask)
    for cx, cy in zip(xs.tolist(), ys.tolist()):
        for vx in (cx, cx + 1):
            for vy in (cy, cy + 1):
                mh = ((2 * cx + 1) / 2.0, float(vy))
                mv = (float(vx), (2 * cy + 1) / 2.0)
                sides[((cx, cy), (vx, vy))] = (mh, mv)
    outer = {"free_bc": [], "free_da": []}
    for role, keys in outer.items():
        run = _arc_run(quad, role)
        for i in range(1, len(run) - 1):
            v = run[i]
            din = (run[i - 1][0] - v[0], run[i - 1][1] - v[1])
            dout = (run[i + 1][0] - v[0], run[i + 1][1] - v[1])
            j = _CCW_INDEX[din]
            for s in range((_CCW_INDEX[dout] - j) % 4):
                d = _CCW[(j + s) % 4]
                nd = _CCW[(j + s + 1) % 4]
                cell = (v[0] + _QUADRANT[d][0], v[1] + _QUADRANT[d][1])
                assert not _present(quad, cell), "outer medial cell is present"
                sides[(cell, v)] = (
                    (v[0] + d[0] / 2.0, v[1] + d[1] / 2.0),
                    (v[0] + nd[0] / 2.0, v[1] + nd[1] / 2.0),
                )
                keys.append((cell, v))
    quad._ust_sides = (sides, outer)
    return sides, outer


def _flanks(mid):
    """The two cells beside the (possibly virtual) edge with this
    midpoint; either may be absent or outside the grid."""
    mx, my = mid
    if mx != int(mx):  # horizontal edge
        cx, cy = int(mx - 0.5), int(my)
        return (cx, cy), (cx, cy - 1)
    cx, cy = int(mx), int(my - 0.5)
    return (cx, cy), (cx - 1, cy)


def _mid(e):
    (x1, y1), (x2, y2) = e
    return ((x1 + x2) / 2.0, (y1 + y2) / 2.0)


def _diag(msg, quad, pts, side):
    return TraceError(
        "%s\n  quad: mask %s marked %s\n  at side %s\n  partial curve (%d pts): ... %s"
        % (msg, quad.mask.shape, quad.marked, side, len(pts), pts[-6:])
    )


def _trace_curve(quad, tree_edges, sides, used, start_corner, end_corner, corner_edge, corner_v):
    """Walk medial sides from one free-arc corner to the other.

    At the midpoint of edge e, reached along a side with corner v: if
    e is in the tree the curve bounces within its cell to e's other
    endpoint (crossing the dual edge), otherwise it wraps around v to
    the other cell beside e (crossing e itself). Virtual edges beyond
    the free arcs are never in the tree, so the curve always wraps at
    their midpoints. The walk stops when the prescribed exit side does
    not exist, which happens exactly at the terminal corner.
    """
    pts = [start_corner]
    u, w = corner_edge
    f1, f2 = _flanks(_mid(corner_edge))
    if _present(quad, f1) == _present(quad, f2):
        raise _diag("corner edge is not a boundary edge", quad, pts, None)
    if corner_edge in tree_edges:
        side = (f2 if _present(quad, f1) else f1, w if u == corner_v else u)
    else:
        side = (f1 if _present(quad, f1) else f2, corner_v)
    if side not in sides:
        if start_corner != end_corner:
            raise _diag("start side missing", quad, pts, side)
        return pts
    cur = start_corner
    while True:
        if side in used:
            raise _diag("medial side visited twice", quad, pts, side)
        used.add(side)
        m1, m2 = sides[side]
        if cur == m1:
            cur = m2
        elif cur == m2:
            cur = m1
        else:
            raise _diag("side detached from current point", quad, pts, side)
        pts.append(cur)
        cell, v = side
        v2 = (int(round(2 * cur[0] - v[0])), int(round(2 * cur[1] - v[1])))
        if _edge(v, v2) in tree_edges:
            nxt = (cell, v2)
        else:
            f1, f2 = _flanks(cur)
            nxt = ((f2 if cell == f1 else f1), v)
        if nxt not in sides:
            break
        side = nxt
    if pts[-1] != end_corner:
        raise _diag("curve stopped away from its terminal corner", quad, pts, side)
    return pts


@dataclass(frozen=True)
class PeanoPair:
    """The two interface curves of one tree, eta_l from the a-corner
    of the medial quad to the d-corner and eta_r from b to c, as
    tuples of medial points in lattice units."""

    eta_l: tuple
    eta_r: tuple


def peano_trace(tree: SpanningTree, dual: DualLattice = None) -> PeanoPair:
    """Trace both Peano curves of a tree.

    Together the curves use every medial side exactly once; any
    violation raises TraceError with a diagnostic dump. Passing the
    dual lattice adds a cross-check of each curve's length against the
    dual-forest component sizes.
    """
    q = tree.quad
    sides, outer = _medial_sides(q)
    a_m, b_m, c_m, d_m = q.medial_corners
    te = tree.edges
    used: set = set()
    eta_l = _trace_curve(q, te, sides, used, a_m, d_m, q.arcs["free_da"][-1], q.marked[0])
    eta_r = _trace_curve(q, te, sides, used, b_m, c_m, q.arcs["free_bc"][0], q.marked[1])
    if len(used) != len(sides):
        raise _diag("curves left %d medial sides unvisited" % (len(sides) - len(used)),
                    q, eta_l, None)
    if dual is not None:
        f = dual_forest(tree, dual)
        n_l = 4 * f.n_cells_da + len(outer["free_da"])
        if len(eta_l) - 1 != n_l:
            raise _diag("eta_l length %d disagrees with dual count %d"
                        % (len(eta_l) - 1, n_l), q, eta_l, None)
    return PeanoPair(tuple(eta_l), tuple(eta_r))


# -- endpoint batches ----------------------------------------------------

ENDPOINT_DTYPE = np.dtype([
    ("sample_id", np.int64),
    ("x", np.float64),
    ("y", np.float64),
    ("branch_len", np.int64),
    ("eta_len", np.int64),
])


def _endpoint_runs(quad):
    try:
        return quad._ust_runs
    except AttributeError:
        pass
    ab = _arc_run(quad, "wired_ab")
    cd = _arc_run(quad, "wired_cd")
    runs = ({v: i for i, v in enumerate(ab)}, len(ab),
            {v: i for i, v in enumerate(cd)}, len(cd))
    quad._ust_runs = runs
    return runs


def endpoint_coords(quad, branch: BranchSample):
    """Normalized branch endpoint positions in (0,1)^2.

    x is measured along (ab) from a, y along (cd) from d, each vertex
    sitting at the midpoint of its 1/len slot, so corner hits stay
    strictly inside the interval.
    """
    pos_ab, n_ab, pos_cd, n_cd = _endpoint_runs(quad)
    x = (pos_ab[branch.x_m] + 0.5) / n_ab
    y = (n_cd - 1 - pos_cd[branch.y_m] + 0.5) / n_cd
    return x, y


def endpoint_batch(quad: QuadLattice, n: int, seed: int, start_id: int = 0) -> np.ndarray:
    """Sample n trees and tabulate their middle-branch records.

    Row i uses the stream keyed by (seed, start_id + i) alone, so a
    batch may be sharded at arbitrary offsets and concatenated without
    changing a bit. branch_len counts lattice edges of the branch,
    eta_len medial steps of eta_l; the latter comes from the dual
    component sizes, no curve is traced.
    """
    d = _dual(quad)
    eu, ev, ceid = _dual_arrays(quad)
    _, outer = _medial_sides(quad)
    n_outer = len(outer["free_da"])
    n_cells = len(d.cells)
    out = np.empty(n, ENDPOINT_DTYPE)
    for i in range(n):
        t = wilson_sample(quad, sample_stream(seed, start_id + i))
        br = middle_branch(t)
        x, y = endpoint_coords(quad, br)
        in_tree = np.zeros(quad.n_edges, bool)
        in_tree[t.tree_eids()] = True
        keep = (~in_tree[ceid]).astype(np.uint8)
        n_da = impl.dual_component_count(eu, ev, keep, d.n_vertices, n_cells, d.da_star)
        out[i] = (start_id + i, x, y, len(br.gamma) - 1, 4 * n_da + n_outer)
    return out


def save_endpoint_csv(path, batch) -> None:
    """Write endpoint records as CSV with a fixed header."""
    with open(path, "w") as fh:
        fh.write("sample_id,x,y,branch_len,eta_len\n")
        for r in batch:
            fh.write("%d,%.17g,%.17g,%d,%d\n"
                     % (r["sample_id"], r["x"], r["y"], r["branch_len"], r["eta_len"]))


def load_endpoint_csv(path) -> np.ndarray:
    rows = np.genfromtxt(path, delimiter=",", names=True)
    out = np.empty(rows.shape, ENDPOINT_DTYPE)
    for name in ENDPOINT_DTYPE.names:
        out[name] = rows[name]
    return out


def peano_json(quad: QuadLattice, pair: PeanoPair) -> dict:
    """Curves as plain JSON data, points scaled to physical units."""
    s = quad.mesh
    return {
        "mesh": s,
        "eta_l": [[x * s, y * s] for x, y in pair.eta_l],
        "eta_r": [[x * s, y * s] for x, y in pair.eta_r],
    }


def save_peano_json(path, quad: QuadLattice, pair: PeanoPair) -> None:
    with open(path, "w") as fh:
        json.dump(peano_json(quad, pair), fh)
