"""Pure-Python reference kernels.

This module is the fallback twin of the compiled extension
``slequad._kernels`` and doubles as the executable specification of the
kernel semantics: both expose the same names, consume random numbers in
the same chunked order, and are compared directly in the test suite.
Everything here is scalar Python on purpose; speed comes from the
compiled twin.
"""

import cmath
import math

import numpy as np

BACKEND_NAME = "python"

SERIES_TOL = 1e-17
SERIES_MAX_TERMS = 1000000

# Lanczos approximation, g = 607/128, 15 coefficients (Godfrey's set).
# Relative error below 1e-14 for positive real arguments.
_LANCZOS_G = 4.7421875
_LANCZOS = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)


def gammafn(x):
    """Gamma function for real non-pole arguments."""
    if x != x:
        raise ValueError("gamma: nan argument")
    if x <= 0.0 and x == math.floor(x):
        raise ValueError("gamma: pole at nonpositive integer %g" % x)
    if x < 0.5:
        # reflection keeps the Lanczos sum on arguments >= 0.5
        return math.pi / (math.sin(math.pi * x) * gammafn(1.0 - x))
    acc = _LANCZOS[0]
    for i in range(1, 15):
        acc += _LANCZOS[i] / (x - 1.0 + i)
    base = x + _LANCZOS_G - 0.5
    return math.sqrt(2.0 * math.pi) * base ** (x - 0.5) * math.exp(-base) * acc


def rgammafn(x):
    """Reciprocal Gamma, zero at the poles of Gamma."""
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    return 1.0 / gammafn(x)


def digammafn(x):
    """Digamma function for real non-pole arguments."""
    if x != x:
        raise ValueError("digamma: nan argument")
    if x <= 0.0 and x == math.floor(x):
        raise ValueError("digamma: pole at nonpositive integer %g" % x)
    if x < 0.0:
        return digammafn(1.0 - x) - math.pi / math.tan(math.pi * x)
    acc = 0.0
    while x < 8.0:
        acc -= 1.0 / x
        x += 1.0
    # asymptotic series with Bernoulli-number coefficients
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
    return acc + math.log(x) - 0.5 / x + w * s


def _hyp2f1_series(A, B, C, z):
    # plain power series, safe for |z| <= 0.5 and decent up to ~0.9
    term = 1.0
    acc = 1.0
    n = 0
    while n < SERIES_MAX_TERMS:
        term *= (A + n) * (B + n) / ((C + n) * (1.0 + n)) * z
        acc += term
        n += 1
        if abs(term) < SERIES_TOL * abs(acc):
            return acc
    raise ArithmeticError("2F1 series did not converge at z=%g" % z)


def _hyp2f1_log_branch(A, B, w):
    # C = A + B: logarithmic connection expansion in w = 1 - z,
    # F = G * sum_n p_n (d_n - ln w), p_n = (A)_n (B)_n / (n!)^2 w^n,
    # d_n = 2 psi(n+1) - psi(A+n) - psi(B+n).
    if w == 0.0:
        raise ValueError("2F1 log branch: z = 1 diverges")
    lnw = math.log(w)
    d = 2.0 * digammafn(1.0) - digammafn(A) - digammafn(B)
    p = 1.0
    acc = 0.0
    n = 0
    while n < SERIES_MAX_TERMS:
        term = p * (d - lnw)
        acc += term
        if n > 0 and abs(term) < SERIES_TOL * abs(acc):
            break
        p *= (A + n) * (B + n) / ((1.0 + n) * (1.0 + n)) * w
        d += 2.0 / (n + 1.0) - 1.0 / (A + n) - 1.0 / (B + n)
        n += 1
    else:
        raise ArithmeticError("2F1 log branch did not converge")
    return gammafn(A + B) / (gammafn(A) * gammafn(B)) * acc


def _hyp2f1_log_branch_deriv(A, B, w):
    # term-by-term z-derivative of the logarithmic connection expansion,
    # dF/dz = G * sum_n r_n w^(n-1) [1 - n (d_n - ln w)]
    if w == 0.0:
        raise ValueError("2F1 log branch: z = 1 diverges")
    lnw = math.log(w)
    d = 2.0 * digammafn(1.0) - digammafn(A) - digammafn(B)
    r = 1.0 / w
    acc = 0.0
    n = 0
    while n < SERIES_MAX_TERMS:
        term = r * (1.0 - n * (d - lnw))
        acc += term
        if n > 1 and abs(term) < SERIES_TOL * abs(acc):
            break
        r *= (A + n) * (B + n) / ((1.0 + n) * (1.0 + n)) * w
        d += 2.0 / (n + 1.0) - 1.0 / (A + n) - 1.0 / (B + n)
        n += 1
    else:
        raise ArithmeticError("2F1 log branch deriv did not converge")
    return gammafn(A + B) / (gammafn(A) * gammafn(B)) * acc


def hyp2f1(A, B, C, z):
    """Gauss 2F1 for real parameters and real z in (-1, 1).

    Branches: direct series for z <= 0.5; for 0.5 < z < 1 the value is
    carried over from series in 1-z (the logarithmic connection
    expansion when C-A-B = 0, the two-term connection formula
    otherwise), so evaluation stays stable arbitrarily close to z = 1.
    """
    if C <= 0.0 and C == math.floor(C):
        raise ValueError("2F1: C must not be a nonpositive integer")
    if z >= 1.0 or z <= -1.0:
        raise ValueError("2F1: z outside (-1, 1)")
    if z <= 0.5:
        return _hyp2f1_series(A, B, C, z)
    s = C - A - B
    if abs(s) < 1e-12:
        return _hyp2f1_log_branch(A, B, 1.0 - z)
    if abs(s - round(s)) < 1e-12:
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


def hyp2f1_deriv(A, B, C, z):
    """d/dz 2F1(A,B,C;z).

    Shifted-parameter identity F' = (AB/C) 2F1(A+1,B+1,C+1;z) away from
    z = 1; for the C-A-B = 0 family above z = 0.5 the logarithmic
    expansion is differentiated directly (the shifted parameters would
    land on the unsupported integer case).
    """
    if z > 0.5 and abs(C - A - B) < 1e-12:
        return _hyp2f1_log_branch_deriv(A, B, 1.0 - z)
    return A * B / C * hyp2f1(A + 1.0, B + 1.0, C + 1.0, z)


def carlson_rf(x, y, z):
    """Carlson symmetric integral R_F with principal branches.

    Accepts complex arguments off the cut (-inf, 0); arguments on the
    negative real axis follow the sign of their zero imaginary part.
    """
    x = complex(x)
    y = complex(y)
    z = complex(z)
    A = (x + y + z) / 3.0
    Q = (3.0 * 2.220446049250313e-16) ** (-0.125) * max(
        abs(A - x), abs(A - y), abs(A - z)
    )
    f = 1.0
    n = 0
    while Q > abs(A) * f and n < 120:
        sx = cmath.sqrt(x)
        sy = cmath.sqrt(y)
        sz = cmath.sqrt(z)
        lam = sx * sy + sx * sz + sy * sz
        x = (x + lam) / 4.0
        y = (y + lam) / 4.0
        z = (z + lam) / 4.0
        A = (A + lam) / 4.0
        f *= 4.0
        n += 1
    # A_m - x_m is divided by exactly 4 each round, so these equal the
    # usual scaled deviations (A0 - x0) / (4^m A_m)
    Xd = (A - x) / A
    Yd = (A - y) / A
    Zd = -(Xd + Yd)
    E2 = Xd * Yd - Zd * Zd
    E3 = Xd * Yd * Zd
    s = (
        1.0
        + E3 * (1.0 / 14.0 + 3.0 * E3 / 104.0)
        + E2 * (-0.1 + E2 / 24.0 - 3.0 * E3 / 44.0 - 5.0 * E2 * E2 / 208.0 + E2 * E3 / 16.0)
    )
    return s / cmath.sqrt(A)


def ellipk_inc(phi, m):
    """Incomplete elliptic integral of the first kind, complex amplitude.

    K(phi, m) = sin(phi) * R_F(cos^2 phi, 1 - m sin^2 phi, 1); negative
    real Carlson arguments (amplitudes on the boundary rays) are taken
    on the lower side of the cut, matching the limit from the interior
    of the upper half-plane.
    """
    phi = complex(phi)
    s = cmath.sin(phi)
    c = cmath.cos(phi)
    x = c * c
    y = 1.0 - m * s * s
    if x.imag == 0.0 and x.real < 0.0:
        x = x - 1e-300j
    if y.imag == 0.0 and y.real < 0.0:
        y = y - 1e-300j
    return s * carlson_rf(x, y, 1.0 + 0.0j)


def wilson_ust(indptr, nbr_node, nbr_eid, root, first, refill, record=None):
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
    n = len(indptr) - 1
    parent_node = np.full(n, -1, np.int32)
    parent_eid = np.full(n, -1, np.int32)
    in_tree = np.zeros(n, np.bool_)
    in_tree[root] = True
    buf = refill()
    m = len(buf)
    pos = 0
    for start in range(-1, n):
        u = first if start < 0 else start
        if in_tree[u]:
            continue
        if start < 0 and record is not None:
            record.append(u)
        while not in_tree[u]:
            if pos == m:
                buf = refill()
                m = len(buf)
                pos = 0
            lo = indptr[u]
            k = lo + int(buf[pos] * (indptr[u + 1] - lo))
            pos += 1
            parent_node[u] = nbr_node[k]
            parent_eid[u] = nbr_eid[k]
            u = nbr_node[k]
            if start < 0 and record is not None:
                record.append(int(u))
        u = first if start < 0 else start
        while not in_tree[u]:
            in_tree[u] = True
            u = parent_node[u]
    return parent_node, parent_eid


def dual_component_count(eu, ev, keep, n_vert, n_cells, target):
    """Cells connected to `target` through the kept edges.

    Union-find over vertices 0..n_vert-1 using edges with keep[k]
    nonzero; returns how many of the vertices 0..n_cells-1 share the
    component of `target`.
    """
    parent = list(range(n_vert))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k in range(len(eu)):
        if keep[k]:
            a = find(eu[k])
            b = find(ev[k])
            if a != b:
                parent[a] = b
    t = find(target)
    count = 0
    for i in range(n_cells):
        if find(i) == t:
            count += 1
    return count
