# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels.

Mirror of slequad._ref, operation for operation; keep the two in
lockstep (the test suite compares them directly).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, exp, fabs, floor, log, sin, sqrt, tan

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double complex csin(double complex)
    double complex ccos(double complex)
    double cabs(double complex)

BACKEND_NAME = "compiled"

DEF SERIES_TOL = 1e-17
DEF SERIES_MAX_TERMS = 1000000

# Lanczos approximation, g = 607/128, 15 coefficients (Godfrey's set).
cdef double _LANCZOS_G = 4.7421875
cdef double[15] _LANCZOS
_LANCZOS[0] = 0.99999999999999709182
_LANCZOS[1] = 57.156235665862923517
_LANCZOS[2] = -59.597960355475491248
_LANCZOS[3] = 14.136097974741747174
_LANCZOS[4] = -0.49191381609762019978
_LANCZOS[5] = 0.33994649984811888699e-4
_LANCZOS[6] = 0.46523628927048575665e-4
_LANCZOS[7] = -0.98374475304879564677e-4
_LANCZOS[8] = 0.15808870322491248884e-3
_LANCZOS[9] = -0.21026444172410488319e-3
_LANCZOS[10] = 0.21743961811521264320e-3
_LANCZOS[11] = -0.16431810653676389022e-3
_LANCZOS[12] = 0.84418223983852743293e-4
_LANCZOS[13] = -0.26190838401581408670e-4
_LANCZOS[14] = 0.36899182659531622704e-5


cpdef double gammafn(double x) except *:
    """Gamma function for real non-pole arguments."""
    cdef double acc, base
    cdef int i
    if x != x:
        raise ValueError("gamma: nan argument")
    if x <= 0.0 and x == floor(x):
        raise ValueError("gamma: pole at nonpositive integer %g" % x)
    if x < 0.5:
        return M_PI / (sin(M_PI * x) * gammafn(1.0 - x))
    acc = _LANCZOS[0]
    for i in range(1, 15):
        acc += _LANCZOS[i] / (x - 1.0 + i)
    base = x + _LANCZOS_G - 0.5
    return sqrt(2.0 * M_PI) * base ** (x - 0.5) * exp(-base) * acc


cpdef double rgammafn(double x) except *:
    """Reciprocal Gamma, zero at the poles of Gamma."""
    if x <= 0.0 and x == floor(x):
        return 0.0
    return 1.0 / gammafn(x)


cpdef double digammafn(double x) except *:
    """Digamma function for real non-pole arguments."""
    cdef double acc, w, s
    if x != x:
        raise ValueError("digamma: nan argument")
    if x <= 0.0 and x == floor(x):
        raise ValueError("digamma: pole at nonpositive integer %g" % x)
    if x < 0.0:
        return digammafn(1.0 - x) - M_PI / tan(M_PI * x)
    acc = 0.0
    while x < 8.0:
        acc -= 1.0 / x
        x += 1.0
    w = 1.0 / (x * x)
    s = (
        -1.0 / 12.0
        + w
        * (
            1.0 / 120.0
            + w
            * (
                -1.0 / 252.0
                + w
                * (
                    1.0 / 240.0
                    + w
                    * (
                        -1.0 / 132.0
                        + w * (691.0 / 32760.0 + w * (-1.0 / 12.0))
                    )
                )
            )
        )
    )
    return acc + log(x) - 0.5 / x + w * s


cdef double _hyp2f1_series(double A, double B, double C, double z) except *:
    cdef double term = 1.0
    cdef double acc = 1.0
    cdef long n = 0
    while n < SERIES_MAX_TERMS:
        term *= (A + n) * (B + n) / ((C + n) * (1.0 + n)) * z
        acc += term
        n += 1
        if fabs(term) < SERIES_TOL * fabs(acc):
            return acc
    raise ArithmeticError("2F1 series did not converge at z=%g" % z)


cdef double _hyp2f1_log_branch(double A, double B, double w) except *:
    cdef double lnw, d, p, acc, term
    cdef long n
    if w == 0.0:
        raise ValueError("2F1 log branch: z = 1 diverges")
    lnw = log(w)
    d = 2.0 * digammafn(1.0) - digammafn(A) - digammafn(B)
    p = 1.0
    acc = 0.0
    n = 0
    while n < SERIES_MAX_TERMS:
        term = p * (d - lnw)
        acc += term
        if n > 0 and fabs(term) < SERIES_TOL * fabs(acc):
            break
        p *= (A + n) * (B + n) / ((1.0 + n) * (1.0 + n)) * w
        d += 2.0 / (n + 1.0) - 1.0 / (A + n) - 1.0 / (B + n)
        n += 1
    else:
        raise ArithmeticError("2F1 log branch did not converge")
    return gammafn(A + B) / (gammafn(A) * gammafn(B)) * acc


cdef double _hyp2f1_log_branch_deriv(double A, double B, double w) except *:
    # term-by-term z-derivative of the logarithmic connection expansion,
    # dF/dz = G * sum_n r_n w^(n-1) [1 - n (d_n - ln w)]
    cdef double lnw, d, r, acc, term
    cdef long n
    if w == 0.0:
        raise ValueError("2F1 log branch: z = 1 diverges")
    lnw = log(w)
    d = 2.0 * digammafn(1.0) - digammafn(A) - digammafn(B)
    r = 1.0 / w
    acc = 0.0
    n = 0
    while n < SERIES_MAX_TERMS:
        term = r * (1.0 - n * (d - lnw))
        acc += term
        if n > 1 and fabs(term) < SERIES_TOL * fabs(acc):
            break
        r *= (A + n) * (B + n) / ((1.0 + n) * (1.0 + n)) * w
        d += 2.0 / (n + 1.0) - 1.0 / (A + n) - 1.0 / (B + n)
        n += 1
    else:
        raise ArithmeticError("2F1 log branch deriv did not converge")
    return gammafn(A + B) / (gammafn(A) * gammafn(B)) * acc


cpdef double hyp2f1(double A, double B, double C, double z) except *:
    """Gauss 2F1 for real parameters and real z in (-1, 1)."""
    cdef double s, w, c1, c2, acc
    if C <= 0.0 and C == floor(C):
        raise ValueError("2F1: C must not be a nonpositive integer")
    if z >= 1.0 or z <= -1.0:
        raise ValueError("2F1: z outside (-1, 1)")
    if z <= 0.5:
        return _hyp2f1_series(A, B, C, z)
    s = C - A - B
    if fabs(s) < 1e-12:
        return _hyp2f1_log_branch(A, B, 1.0 - z)
    if fabs(s - round(s)) < 1e-12:
        raise ValueError("2F1: C-A-B a nonzero integer is unsupported near z=1")
    # two-term connection in w = 1 - z; a pole of Gamma in a denominator
    # kills that term (terminating-series degenerations)
    w = 1.0 - z
    c1 = gammafn(C) * gammafn(s) * rgammafn(C - A) * rgammafn(C - B)
    c2 = gammafn(C) * gammafn(-s) * rgammafn(A) * rgammafn(B)
    acc = 0.0
    if c1 != 0.0:
        acc += c1 * _hyp2f1_series(A, B, 1.0 - s, w)
    if c2 != 0.0:
        acc += c2 * w ** s * _hyp2f1_series(C - A, C - B, 1.0 + s, w)
    return acc


cpdef double hyp2f1_deriv(double A, double B, double C, double z) except *:
    """d/dz 2F1(A,B,C;z).

    Shifted-parameter identity away from z = 1; the C-A-B = 0 family
    above z = 0.5 differentiates the logarithmic expansion directly.
    """
    if z > 0.5 and fabs(C - A - B) < 1e-12:
        return _hyp2f1_log_branch_deriv(A, B, 1.0 - z)
    return A * B / C * hyp2f1(A + 1.0, B + 1.0, C + 1.0, z)


cpdef double complex carlson_rf(double complex x, double complex y, double complex z) except *:
    """Carlson symmetric integral R_F with principal branches."""
    cdef double complex A, lam, sx, sy, sz, Xd, Yd, Zd, E2, E3
    cdef double Q, f
    cdef int n = 0
    A = (x + y + z) / 3.0
    Q = (3.0 * 2.220446049250313e-16) ** (-0.125) * max(
        cabs(A - x), cabs(A - y), cabs(A - z)
    )
    f = 1.0
    while Q > cabs(A) * f and n < 120:
        sx = csqrt(x)
        sy = csqrt(y)
        sz = csqrt(z)
        lam = sx * sy + sx * sz + sy * sz
        x = (x + lam) / 4.0
        y = (y + lam) / 4.0
        z = (z + lam) / 4.0
        A = (A + lam) / 4.0
        f *= 4.0
        n += 1
    Xd = (A - x) / A
    Yd = (A - y) / A
    Zd = -(Xd + Yd)
    E2 = Xd * Yd - Zd * Zd
    E3 = Xd * Yd * Zd
    return (
        1.0
        + E3 * (1.0 / 14.0 + 3.0 * E3 / 104.0)
        + E2 * (-0.1 + E2 / 24.0 - 3.0 * E3 / 44.0 - 5.0 * E2 * E2 / 208.0 + E2 * E3 / 16.0)
    ) / csqrt(A)


cpdef double complex ellipk_inc(double complex phi, double m) except *:
    """Incomplete elliptic integral of the first kind, complex amplitude."""
    cdef double complex s, c, x, y
    s = csin(phi)
    c = ccos(phi)
    x = c * c
    y = 1.0 - m * s * s
    if x.imag == 0.0 and x.real < 0.0:
        x = x - 1e-300j
    if y.imag == 0.0 and y.real < 0.0:
        y = y - 1e-300j
    return s * carlson_rf(x, y, 1.0 + 0.0j)


cdef inline int _dsu_find(cnp.int32_t[::1] parent, int i) nogil:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


cpdef tuple wilson_ust(cnp.int32_t[::1] indptr, cnp.int32_t[::1] nbr_node,
                       cnp.int32_t[::1] nbr_eid, int root, int first,
                       object refill, object record=None):
    """Wilson's algorithm on a CSR multigraph, cycle popping in place.

    The walk from the current start overwrites a successor table until
    it hits the growing tree (erased loops leave no trace), then the
    successor chain from the start is frozen in. The first pass starts
    at `first`; remaining passes sweep node indices in order. One
    uniform is consumed per step, block by block from `refill()`, and
    the step out of a degree-g node is floor(u * g). Returns
    (parent_node, parent_eid) with -1 entries at the root. `record`, if
    a list, collects the raw first-pass walk.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray parent_node = np.full(n, -1, np.int32)
    cdef cnp.ndarray parent_eid = np.full(n, -1, np.int32)
    cdef cnp.int32_t[::1] pn = parent_node
    cdef cnp.int32_t[::1] pe = parent_eid
    cdef cnp.uint8_t[::1] in_tree = np.zeros(n, np.uint8)
    cdef double[::1] buf
    cdef Py_ssize_t m, pos
    cdef int start, u, lo, k
    cdef bint tracing
    in_tree[root] = 1
    buf = refill()
    m = buf.shape[0]
    pos = 0
    for start in range(-1, <int> n):
        u = first if start < 0 else start
        if in_tree[u]:
            continue
        tracing = start < 0 and record is not None
        if tracing:
            record.append(u)
        while not in_tree[u]:
            if pos == m:
                buf = refill()
                m = buf.shape[0]
                pos = 0
            lo = indptr[u]
            k = lo + <int> (buf[pos] * (indptr[u + 1] - lo))
            pos += 1
            pn[u] = nbr_node[k]
            pe[u] = nbr_eid[k]
            u = nbr_node[k]
            if tracing:
                record.append(u)
        u = first if start < 0 else start
        while not in_tree[u]:
            in_tree[u] = 1
            u = pn[u]
    return parent_node, parent_eid


cpdef long dual_component_count(cnp.int32_t[::1] eu, cnp.int32_t[::1] ev,
                                cnp.uint8_t[::1] keep, int n_vert,
                                int n_cells, int target) except *:
    """Cells connected to `target` through the kept edges.

    Union-find over vertices 0..n_vert-1 using edges with keep[k]
    nonzero; returns how many of the vertices 0..n_cells-1 share the
    component of `target`.
    """
    cdef cnp.int32_t[::1] parent = np.arange(n_vert, dtype=np.int32)
    cdef Py_ssize_t k, ne = eu.shape[0]
    cdef int a, b, i, t
    cdef long count = 0
    for k in range(ne):
        if keep[k]:
            a = _dsu_find(parent, eu[k])
            b = _dsu_find(parent, ev[k])
            if a != b:
                parent[a] = b
    t = _dsu_find(parent, target)
    for i in range(n_cells):
        if _dsu_find(parent, i) == t:
            count += 1
    return count
