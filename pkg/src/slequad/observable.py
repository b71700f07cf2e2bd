"""Harmonic fields on quads and the holomorphic tree observable.

A quad carries two elliptic problems that mirror each other: the primal
field, pinned on the wired arcs and reflected on the free arcs, and the
dual field on cells, pinned on the two outer stars and reflected where
wired edges block the dual walk.  Scaled by the ratio of two-component
forest counts to tree counts, the pair assembles into one complex
function, real part on cells and imaginary part on vertices, that
satisfies a discrete Cauchy-Riemann identity at every interior edge
midpoint.  The identity is exact in exact arithmetic, so its floating
point residual is a sharp end-to-end check on all three ingredients.

Solvers here are deliberately plain: conjugate-gradient with iterative
refinement for the averaging systems, sparse LU in the log domain for
the forest/tree determinant ratio.  Quads of up to roughly 10^4 sites
stay well inside both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import ust
from .lattice import DualLattice, QuadLattice

__all__ = [
    "BoundaryDataError",
    "GridField",
    "ObservableField",
    "PRIMAL_ARCS",
    "DUAL_ARCS",
    "harmonic_solve",
    "count_ratio",
    "dual_count_ratio",
    "observable_field",
    "holomorphic_residual",
    "observable_vs_rectmap",
    "save_field_csv",
]

PRIMAL_ARCS = ("wired_ab", "free_bc", "wired_cd", "free_da")
DUAL_ARCS = ("bc_star", "da_star")

_RESIDUAL_BOUND = 1e-10


class BoundaryDataError(ValueError):
    """Boundary data that fails to pin down the averaging system."""


@dataclass(frozen=True)
class GridField:
    """Real field on one sublattice of a quad.

    ``values`` maps sites to floats: primal sites are lattice vertices
    ``(x, y)``, dual sites are cells ``(ix, iy)`` plus the two outer
    stars ``"bc_star"`` and ``"da_star"``.  ``residual`` is the max-norm
    defect of the defining averaging equations, ``mesh`` the lattice
    spacing used for physical coordinates on export.
    """

    values: dict
    domain: str
    residual: float
    mesh: float

    def __getitem__(self, site):
        return self.values[site]


# ----------------------------------------------------------- solver core


def _cg(A, b, x0=None):
    n = A.shape[0]
    kw = dict(x0=x0, maxiter=8 * n + 200)
    try:
        return spla.cg(A, b, rtol=1e-13, atol=0.0, **kw)
    except TypeError:  # older scipy spells the relative tolerance "tol"
        return spla.cg(A, b, tol=1e-13, atol=0.0, **kw)


def _solve_spd(A, b):
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    x = np.zeros(A.shape[0])
    for _ in range(4):
        r = b - A @ x
        if float(np.max(np.abs(r), initial=0.0)) <= 1e-13 * scale:
            return x
        dx, _ = _cg(A, r)
        x = x + dx
    return spla.spsolve(A.tocsc(), b)


def _solve_average(sites, nbrs, pinned):
    """Value at every unpinned site equals the mean over its neighbor
    list (with multiplicity). pinned maps site index to value."""
    if not pinned:
        raise BoundaryDataError("no Dirichlet data, averaging system is singular")
    n = len(sites)
    unknown = [i for i in range(n) if i not in pinned]
    x = np.zeros(n)
    for i, val in pinned.items():
        x[i] = val
    if unknown:
        pos = {i: k for k, i in enumerate(unknown)}
        rows, cols, data = [], [], []
        b = np.zeros(len(unknown))
        for i in unknown:
            k = pos[i]
            if not nbrs[i]:
                raise BoundaryDataError(f"site {sites[i]} has no neighbors")
            rows.append(k)
            cols.append(k)
            data.append(float(len(nbrs[i])))
            for j in nbrs[i]:
                if j in pinned:
                    b[k] += pinned[j]
                else:
                    rows.append(k)
                    cols.append(pos[j])
                    data.append(-1.0)
        m = len(unknown)
        A = sp.coo_matrix((data, (rows, cols)), shape=(m, m)).tocsr()
        x[unknown] = _solve_spd(A, b)

    residual = 0.0
    for i in unknown:
        avg = sum(x[j] for j in nbrs[i]) / len(nbrs[i])
        residual = max(residual, abs(x[i] - avg))
    if residual > _RESIDUAL_BOUND:
        raise RuntimeError(f"averaging residual {residual:.3e} out of tolerance")
    return x, residual


def _primal_adjacency(q: QuadLattice):
    sites = sorted(q.primal_vertices)
    index = {v: i for i, v in enumerate(sites)}
    nbrs = [[] for _ in sites]
    for u, v in q.edge_list:
        nbrs[index[u]].append(index[v])
        nbrs[index[v]].append(index[u])
    return sites, index, nbrs


def _dual_adjacency(d: DualLattice):
    sites = list(d.cells) + ["bc_star", "da_star"]
    nbrs = [[] for _ in sites]
    for u, v in d.edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    return sites, nbrs


def harmonic_solve(graph, dirichlet, reflecting=()) -> GridField:
    """Solve the mixed averaging problem on one sublattice of a quad.

    ``graph`` is a QuadLattice (field on vertices) or a DualLattice
    (field on cells and the two outer stars).  ``dirichlet`` maps arc
    names to pinned values: primal arcs are named by their role
    ("wired_ab", "free_bc", "wired_cd", "free_da"), dual arcs are the
    stars ("bc_star", "da_star").  ``reflecting`` lists arcs meant to
    keep the degree-deficient averaging stencil; unpinned sites behave
    that way regardless, the argument declares intent and is rejected
    if it overlaps the Dirichlet set.  On the dual lattice reflection
    happens implicitly wherever a wired edge blocks the dual walk, so
    ``reflecting`` must stay empty there.

    A vertex shared by two pinned arcs must receive one value.  At
    least one arc must be pinned, otherwise the system is singular and
    BoundaryDataError is raised.
    """
    dual = isinstance(graph, DualLattice)
    valid = DUAL_ARCS if dual else PRIMAL_ARCS
    for name in list(dirichlet) + list(reflecting):
        if name not in valid:
            raise BoundaryDataError(f"unknown arc {name!r} for the {'dual' if dual else 'primal'} lattice")
    overlap = set(dirichlet) & set(reflecting)
    if overlap:
        raise BoundaryDataError(f"arcs {sorted(overlap)} both pinned and reflecting")
    if dual and reflecting:
        raise BoundaryDataError("dual-lattice reflection is implicit; list no arcs")

    if dual:
        sites, nbrs = _dual_adjacency(graph)
        index = {"bc_star": len(sites) - 2, "da_star": len(sites) - 1}
        pinned = {index[name]: float(val) for name, val in dirichlet.items()}
        mesh = graph.quad.mesh
    else:
        sites, index, nbrs = _primal_adjacency(graph)
        pinned = {}
        for name, val in dirichlet.items():
            for e in graph.arcs[name]:
                for vtx in e:
                    i = index[vtx]
                    if i in pinned and pinned[i] != float(val):
                        raise BoundaryDataError(
                            f"vertex {vtx} pinned to both {pinned[i]} and {float(val)}"
                        )
                    pinned[i] = float(val)
        mesh = graph.mesh

    x, residual = _solve_average(sites, nbrs, pinned)
    values = {site: float(x[i]) for i, site in enumerate(sites)}
    return GridField(values, "dual" if dual else "primal", residual, mesh)


# ------------------------------------------------------ determinant ratio


def _logdet_minor(L, drop):
    """log det of the symmetric positive minor of L with rows/columns
    ``drop`` removed, via sparse LU; the empty minor has determinant 1."""
    n = L.shape[0]
    keep = np.array([i for i in range(n) if i not in drop], dtype=np.int64)
    if keep.size == 0:
        return 0.0
    A = L[keep][:, keep].tocsc()
    lu = spla.splu(A)
    return float(np.sum(np.log(np.abs(lu.U.diagonal()))))


def _contracted_laplacian(q: QuadLattice):
    g = ust._graph(q)
    n = g.n_nodes
    deg = np.diff(g.indptr).astype(float)
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(g.indptr))
    cols = g.nbr_node.astype(np.int64)
    off = sp.coo_matrix((-np.ones(cols.size), (rows, cols)), shape=(n, n))
    return (sp.diags(deg) + off).tocsr(), g.ab_node, g.cd_node


def _dual_laplacian(d: DualLattice):
    n = d.n_vertices
    L = sp.dok_matrix((n, n))
    for u, v in d.edges:
        L[u, u] += 1.0
        L[v, v] += 1.0
        L[u, v] -= 1.0
        L[v, u] -= 1.0
    return L.tocsr()


def count_ratio(q: QuadLattice) -> float:
    """Two-component forest count over spanning-tree count.

    Both counts are Kirchhoff determinants of the quad's contracted
    Laplacian (wired arcs merged to single nodes A and B): deleting the
    A row and column counts spanning trees, deleting both A and B
    counts the forests with the two arcs in separate components.  The
    determinants are evaluated as log magnitudes so large quads cannot
    overflow; only the difference is exponentiated.
    """
    L, a, b = _contracted_laplacian(q)
    log_st = _logdet_minor(L, (a,))
    log_sf2 = _logdet_minor(L, (a, b))
    return math.exp(log_sf2 - log_st)


def dual_count_ratio(q: QuadLattice) -> float:
    """Same ratio for the dual quad, whose wired and free roles are
    exchanged: outer stars play the contracted arcs.  Complementation
    of edge sets matches trees of one quad with two-component forests
    of the other, so this is exactly 1 / count_ratio(q)."""
    d = ust._dual(q)
    L = _dual_laplacian(d)
    log_st = _logdet_minor(L, (d.da_star,))
    log_sf2 = _logdet_minor(L, (d.bc_star, d.da_star))
    return math.exp(log_sf2 - log_st)


# ------------------------------------------------------------- observable


@dataclass(frozen=True)
class ObservableField:
    """u on cells, v on vertices, and the forest/tree count ratio.

    The combined field is u + i*ratio*v, read on whichever sublattice a
    site lives on. Iterates as the triple (u, v, ratio).
    """

    u: GridField
    v: GridField
    ratio: float

    def __iter__(self):
        return iter((self.u, self.v, self.ratio))


def observable_field(q: QuadLattice) -> ObservableField:
    """Assemble the holomorphic observable of a quad.

    u is the dual field, 1 on the (bc)-side star and 0 on the (da)-side
    star; v is the primal field, 0 on (ab) and 1 on (cd) with the free
    arcs reflecting.  u equals the probability that a cell ends up on
    the (bc) side of the left interface curve, v the probability that a
    vertex joins the (cd)-arc component in a uniform two-component
    forest; both identifications are exercised by the enumeration
    oracles in the test suite rather than assumed.
    """
    u = harmonic_solve(ust._dual(q), {"bc_star": 1.0, "da_star": 0.0})
    v = harmonic_solve(q, {"wired_ab": 0.0, "wired_cd": 1.0}, reflecting=("free_bc", "free_da"))
    return ObservableField(u, v, count_ratio(q))


def holomorphic_residual(q: QuadLattice, obs: ObservableField = None) -> float:
    """Max defect of f(n) - f(s) = i (f(e) - f(w)) over interior medial
    vertices, the midpoints of primal edges with both flanking cells
    present; n, e, s, w are the four sites around the midpoint."""
    if obs is None:
        obs = observable_field(q)
    u, v, ratio = obs.u.values, obs.v.values, obs.ratio
    pad = np.pad(q.mask, 1)

    def cell(ix, iy):
        return pad[ix + 1, iy + 1]

    worst = 0.0
    for (x1, y1), (x2, y2) in q.edge_list:
        if x1 == x2:  # vertical edge, flanks east (x,y) and west (x-1,y)
            if not (cell(x1, y1) and cell(x1 - 1, y1)):
                continue
            defect = ratio * (v[(x2, y2)] - v[(x1, y1)]) - (u[(x1, y1)] - u[(x1 - 1, y1)])
        else:  # horizontal edge, flanks north (x,y) and south (x,y-1)
            if not (cell(x1, y1) and cell(x1, y1 - 1)):
                continue
            defect = (u[(x1, y1)] - u[(x1, y1 - 1)]) + ratio * (v[(x2, y2)] - v[(x1, y1)])
        worst = max(worst, abs(defect))
    return worst


def _standard_rectangle(q: QuadLattice):
    N, M = q.mask.shape
    marked = tuple(tuple(p) for p in q.marked)
    if not (q.mask.all() and marked == ((0, 0), (N, 0), (N, M), (0, M))):
        raise ValueError("comparison needs a full rectangle with corner markings")
    return N, M


def observable_vs_rectmap(q: QuadLattice, probes, obs: ObservableField = None) -> float:
    """Worst probe deviation of the observable from the conformal map.

    The lattice must fill a standard rectangle quad, whose continuum
    map onto (0,1) x (0,K) is linear with modulus K = height/width.
    Each probe (a complex point in physical coordinates, or an (x, y)
    pair) is read off the enclosing cell for the real part and the
    nearest vertex for the imaginary part.
    """
    N, M = _standard_rectangle(q)
    if obs is None:
        obs = observable_field(q)
    mesh = q.mesh
    width = N * mesh
    worst = 0.0
    for p in probes:
        z = complex(p[0], p[1]) if isinstance(p, tuple) else complex(p)
        if not (0 < z.real < N * mesh and 0 < z.imag < M * mesh):
            raise ValueError(f"probe {z} outside the open rectangle")
        ix = min(int(z.real / mesh), N - 1)
        iy = min(int(z.imag / mesh), M - 1)
        vx = min(int(round(z.real / mesh)), N)
        vy = min(int(round(z.imag / mesh)), M)
        f_disc = obs.u[(ix, iy)] + 1j * obs.ratio * obs.v[(vx, vy)]
        worst = max(worst, abs(f_disc - z / width))
    return worst


# ----------------------------------------------------------------- export


def save_field_csv(path, field: GridField) -> None:
    """Write ``x,y,value`` rows in physical coordinates.

    Primal sites sit on vertices, dual sites on cell centers.  The two
    outer stars carry no coordinate and are left out.
    """
    mesh = field.mesh
    lines = ["x,y,value"]
    for site in sorted(s for s in field.values if not isinstance(s, str)):
        if field.domain == "dual":
            xy = ((site[0] + 0.5) * mesh, (site[1] + 0.5) * mesh)
        else:
            xy = (site[0] * mesh, site[1] * mesh)
        lines.append("%.17g,%.17g,%.17g" % (xy[0], xy[1], field.values[site]))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
