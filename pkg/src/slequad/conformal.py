"""Continuum conformal machinery.

The rectangle map of a four-marked half-plane quad and its modulus, the
doubly reflected Poisson kernel of the rectangle, the endpoint density
rho_K with its inverse-CDF sampler, the normal-derivative density on
the far boundary arc, and a finite-difference checker for the
hypoelliptic PDE satisfied by the pulled-back kernel.

Conventions: quads are normalized internally so the fourth marked point
is at infinity (a Mobius map -1/(z - x4) is pre-composed when it is
finite). The evaluator sends x1, x2, x3, x4 to 0, 1, 1+iK, iK. All
boundary densities are taken positive (the inward-normal convention);
on (x3, x4) the map's real part decreases, so the density in the
x-coordinate is |f'|, not f'.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .backend import impl
from .specialfn import elliptic_K_complete

_TRUNC_EXP = 80.0  # drop reflected-series terms once |Re exponent| passes this


def _series_N(K: float) -> int:
    # term magnitude below 1e-15 inside the closed rectangle
    return int(math.ceil(40.0 * K / math.pi + 5.0))


def _phi_of_zeta(zeta: complex) -> complex:
    # amplitude angle asin(sqrt(zeta)) continued from the upper half-plane;
    # principal branches with +0 imaginary part do this for boundary reals
    if zeta.imag == 0.0:
        zeta = complex(zeta.real, 0.0)
    phi = cmath.asin(cmath.sqrt(zeta))
    if phi.imag < 0.0:
        phi = complex(phi.real, -phi.imag)
    return phi


@dataclass(frozen=True)
class RectMap:
    """Conformal data of a quad: marked points, modulus, evaluator state.

    x4 may be math.inf; y1 < y2 < y3 are the Mobius-normalized images of
    x1, x2, x3 with the fourth point at infinity.
    """

    x1: float
    x2: float
    x3: float
    x4: float
    K: float
    y1: float
    y2: float
    y3: float
    m: float
    Kc: float  # complete elliptic integral at parameter m

    def _to_norm(self, z: complex) -> complex:
        if math.isinf(self.x4):
            return complex(z)
        return -1.0 / (complex(z) - self.x4)

    def _from_norm(self, t: complex) -> complex:
        if math.isinf(self.x4):
            return t
        return self.x4 - 1.0 / t

    def _eval_norm(self, t: complex) -> complex:
        zeta = (t - self.y1) / (self.y2 - self.y1)
        phi = _phi_of_zeta(zeta)
        return impl.ellipk_inc(phi, self.m) / self.Kc

    def _deriv_norm(self, t: complex) -> complex:
        zeta = (t - self.y1) / (self.y2 - self.y1)
        if zeta.imag == 0.0:
            zeta = complex(zeta.real, 0.0)
        w = cmath.sqrt(zeta)
        phi = cmath.asin(w)
        y = 1.0 - self.m * cmath.sin(phi) * cmath.sin(phi)
        if y.imag == 0.0 and y.real < 0.0:
            y = y - 1e-300j
        # dK/dphi = 1/sqrt(y); dphi/dzeta = 1/(2 sqrt(zeta) cos phi)
        return 1.0 / (2.0 * w * cmath.cos(phi) * cmath.sqrt(y) * (self.y2 - self.y1) * self.Kc)

    def eval(self, z: complex) -> complex:
        z = complex(z)
        if not math.isinf(self.x4) and z == complex(self.x4):
            return complex(0.0, self.K)
        if z == complex(self.x1):
            return 0.0 + 0.0j
        if z == complex(self.x2):
            return 1.0 + 0.0j
        if z == complex(self.x3):
            return complex(1.0, self.K)
        return self._eval_norm(self._to_norm(z))

    def deriv(self, z: complex) -> complex:
        """df/dz away from the marked points."""
        d = self._deriv_norm(self._to_norm(z))
        if math.isinf(self.x4):
            return d
        return d / (complex(z) - self.x4) ** 2

    def invert(self, w: complex, z0: complex | None = None) -> complex:
        """Newton inversion of the evaluator; w in the closed rectangle."""
        if z0 is not None:
            t = self._to_norm(complex(z0))
        else:
            t = self._invert_seed(complex(w))
        span = self.y3 - self.y1
        for _ in range(100):
            step = (self._eval_norm(t) - w) / self._deriv_norm(t)
            if abs(step) > span:
                step *= span / abs(step)
            t = t - step
            if t.imag < 0.0:
                t = complex(t.real, 0.0)
            if abs(step) < 1e-13 * (1.0 + abs(t)):
                return self._from_norm(t)
        raise ArithmeticError("rect map inversion did not converge")

    def _invert_seed(self, w: complex) -> complex:
        span = self.y3 - self.y1
        re = np.linspace(self.y1 - 2.0 * span, self.y3 + 2.0 * span, 49)
        im = span * np.linspace(0.01, 4.0, 25)
        ts = (re[None, :] + 1j * im[:, None]).ravel()
        fs = _eval_norm_many(self, ts)
        return complex(ts[int(np.argmin(np.abs(fs - w)))])


def rect_map(x1: float, x2: float, x3: float, x4: float = math.inf) -> RectMap:
    """Build the conformal map of the quad (H; x1, x2, x3, x4) onto
    (0,1) x (0, iK), with K = Im f(x3)."""
    finite = [x1, x2, x3] if math.isinf(x4) else [x1, x2, x3, x4]
    if any(b <= a for a, b in zip(finite, finite[1:])):
        raise ValueError("rect_map: marked points must satisfy x1<x2<x3<x4")
    if math.isinf(x4):
        y1, y2, y3 = x1, x2, x3
    else:
        y1, y2, y3 = (1.0 / (x4 - x1), 1.0 / (x4 - x2), 1.0 / (x4 - x3))
    m = (y2 - y1) / (y3 - y1)
    Kc = elliptic_K_complete(m)
    # Im f(x3) in closed form; avoids the square-root-sensitive corner
    # evaluation (Carlson with an exactly-zero argument)
    K = elliptic_K_complete(1.0 - m) / Kc
    return RectMap(x1, x2, x3, x4, K, y1, y2, y3, m, Kc)


def rect_map_eval(rm: RectMap, z: complex) -> complex:
    """Image of z (closed upper half-plane) in the closed rectangle."""
    z = complex(z)
    if z.imag < 0.0:
        raise ValueError("rect_map_eval: z below the real axis")
    return rm.eval(z)


def _rf_many(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    # vectorized Carlson R_F duplication (fixed-point with active mask)
    x = x.astype(np.complex128).copy()
    y = y.astype(np.complex128).copy()
    z = z.astype(np.complex128).copy()
    A = (x + y + z) / 3.0
    Q = (3.0 * np.finfo(float).eps) ** (-0.125) * np.maximum(
        np.abs(A - x), np.maximum(np.abs(A - y), np.abs(A - z))
    )
    f = np.ones(x.shape)
    for _ in range(120):
        active = Q > np.abs(A) * f
        if not active.any():
            break
        sx = np.sqrt(x[active])
        sy = np.sqrt(y[active])
        sz = np.sqrt(z[active])
        lam = sx * sy + sx * sz + sy * sz
        x[active] = (x[active] + lam) / 4.0
        y[active] = (y[active] + lam) / 4.0
        z[active] = (z[active] + lam) / 4.0
        A[active] = (A[active] + lam) / 4.0
        f[active] *= 4.0
    X = (A - x) / A
    Y = (A - y) / A
    Z = -(X + Y)
    E2 = X * Y - Z * Z
    E3 = X * Y * Z
    s = (
        1.0
        + E3 * (1.0 / 14.0 + 3.0 * E3 / 104.0)
        + E2 * (-0.1 + E2 / 24.0 - 3.0 * E3 / 44.0 - 5.0 * E2 * E2 / 208.0 + E2 * E3 / 16.0)
    )
    return s / np.sqrt(A)


def _eval_norm_many(rm: RectMap, ts: np.ndarray) -> np.ndarray:
    zeta = (ts - rm.y1) / (rm.y2 - rm.y1)
    zeta = np.where(zeta.imag == 0.0, zeta.real + 0.0j, zeta)
    phi = np.arcsin(np.sqrt(zeta))
    phi = np.where(phi.imag < 0.0, np.conj(phi), phi)
    s = np.sin(phi)
    c = np.cos(phi)
    x = c * c
    y = 1.0 - rm.m * s * s
    x = np.where((x.imag == 0.0) & (x.real < 0.0), x - 1e-300j, x)
    y = np.where((y.imag == 0.0) & (y.real < 0.0), y - 1e-300j, y)
    ones = np.ones_like(x)
    return s * _rf_many(x, y, ones) / rm.Kc


def rect_map_eval_many(rm: RectMap, zs: np.ndarray) -> np.ndarray:
    """Vectorized evaluator (used by the bulk curve pipelines)."""
    zs = np.asarray(zs, dtype=np.complex128)
    if math.isinf(rm.x4):
        t = zs
    else:
        t = -1.0 / (zs - rm.x4)
    return _eval_norm_many(rm, t)


def poisson_kernel(z: complex, r: complex, K: float) -> float:
    """Poisson kernel of the rectangle (0,1) x (0, iK) at source r.

    r lies on the bottom edge (real in (0,1)) or the top edge (r + iK).
    The doubly reflected series is truncated per the fixed rule; values
    are >= 0 on the closed rectangle minus the singularity.
    """
    z = complex(z)
    r = complex(r)
    if K <= 0.0:
        raise ValueError("poisson_kernel: K must be positive")
    if abs(r.imag - K) <= 1e-12 * max(1.0, K):
        # top-edge source: reflect through the horizontal midline
        return poisson_kernel(complex(z.real, K - z.imag), complex(r.real, 0.0), K)
    if abs(r.imag) > 1e-12 * max(1.0, K):
        raise ValueError("poisson_kernel: r must lie on a horizontal edge")
    if abs(z - r) < 1e-12:
        raise ValueError("poisson_kernel: z coincides with the source")
    rr = r.real
    q = math.pi / K
    acc = 0.0
    for n in range(-_series_N(K), _series_N(K) + 1):
        u1 = q * (2.0 * n - rr + z)
        u2 = q * (2.0 * n - rr - z.conjugate())
        if abs(u1.real) < _TRUNC_EXP:
            acc += (1.0 / (cmath.exp(u1) - 1.0)).imag
        if abs(u2.real) < _TRUNC_EXP:
            acc += (1.0 / (cmath.exp(u2) - 1.0)).imag
    return acc


def poisson_kernel_grad_y(z: complex, r: complex, K: float) -> float:
    """Exact d/dIm(z) of poisson_kernel (series differentiated term by
    term); used for normal-derivative checks on horizontal edges."""
    z = complex(z)
    r = complex(r)
    if abs(r.imag - K) <= 1e-12 * max(1.0, K):
        return -poisson_kernel_grad_y(complex(z.real, K - z.imag), complex(r.real, 0.0), K)
    rr = r.real
    q = math.pi / K
    acc = 0.0
    for n in range(-_series_N(K), _series_N(K) + 1):
        u1 = q * (2.0 * n - rr + z)
        u2 = q * (2.0 * n - rr - z.conjugate())
        # d/dy 1/(e^u - 1) = -q i e^u/(e^u - 1)^2 = -q i / (4 sinh^2(u/2))
        if abs(u1.real) < _TRUNC_EXP:
            acc += (-0.25j * q / cmath.sinh(u1 / 2.0) ** 2).imag
        if abs(u2.real) < _TRUNC_EXP:
            acc += (-0.25j * q / cmath.sinh(u2 / 2.0) ** 2).imag
    return acc


def rho_density(x, y, K: float):
    """Joint endpoint density rho_K(x, y) on (0,1)^2.

    (pi/4K) sum_n sech^2(pi(x-y-2n)/2K) + sech^2(pi(x+y-2n)/2K);
    symmetric in (x, y) and under (x, y) -> (1-x, 1-y); both marginals
    are uniform.
    """
    if K <= 0.0:
        raise ValueError("rho_density: K must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = math.pi / (2.0 * K)
    N = _series_N(K)
    n = np.arange(-N, N + 1, dtype=float)
    u = a * (x[..., None] - y[..., None] - 2.0 * n)
    v = a * (x[..., None] + y[..., None] - 2.0 * n)
    # sech^2 via cosh with overflow guard
    out = np.zeros(np.broadcast(x, y).shape or (1,), dtype=float)
    small_u = np.abs(u) < _TRUNC_EXP
    small_v = np.abs(v) < _TRUNC_EXP
    out = np.where(small_u, 1.0 / np.cosh(np.where(small_u, u, 0.0)) ** 2, 0.0).sum(
        axis=-1
    ) + np.where(small_v, 1.0 / np.cosh(np.where(small_v, v, 0.0)) ** 2, 0.0).sum(axis=-1)
    out = math.pi / (4.0 * K) * out
    if out.shape == ():
        return float(out)
    return out


def rho_cdf(x, K: float, y):
    """Conditional CDF of the second endpoint given the first at x.

    Closed-form antiderivative of rho_K in y:
    (1/2) sum_n tanh(a(x+y-2n)) - tanh(a(x-y-2n)), a = pi/2K.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = math.pi / (2.0 * K)
    N = _series_N(K)
    n = np.arange(-N, N + 1, dtype=float)
    t1 = np.tanh(a * (x[..., None] + y[..., None] - 2.0 * n))
    t2 = np.tanh(a * (x[..., None] - y[..., None] - 2.0 * n))
    out = 0.5 * (t1 - t2).sum(axis=-1)
    if out.shape == ():
        return float(out)
    return out


def rho_sample(x, K: float, u):
    """Inverse-CDF sample(s) of the second endpoint given the first.

    u is a uniform variate or array of them; x broadcasts against u
    (one first endpoint per variate, or a single shared one).
    Bisection on the monotone closed-form CDF, 60 halvings (interval
    below 1e-18).
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((u_arr <= 0.0) | (u_arr >= 1.0)):
        raise ValueError("rho_sample: u must lie strictly in (0, 1)")
    xs = np.broadcast_to(np.asarray(x, dtype=float), u_arr.shape).copy()
    lo = np.zeros_like(u_arr)
    hi = np.ones_like(u_arr)
    target = u_arr * rho_cdf(xs, K, np.ones_like(u_arr))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = rho_cdf(xs, K, mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    if np.isscalar(u) or np.asarray(u).shape == ():
        return float(out[0])
    return out


@dataclass(frozen=True)
class PoissonParams:
    """Half-plane marked points a < w < b < c (fourth point at infinity)."""

    a: float
    w: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a < self.w < self.b < self.c):
            raise ValueError("PoissonParams: need a < w < b < c")


def poisson_halfplane(p: PoissonParams, z: complex) -> float:
    """P(z; a, w, b, c): the rectangle Poisson kernel pulled back to H."""
    rm = rect_map(p.a, p.b, p.c)
    return poisson_kernel(rm.eval(z), rm.eval(p.w), rm.K)


def normal_deriv_F(x: float, p: PoissonParams) -> float:
    """Boundary density F(x; a, w, b, c) on (c, +inf).

    Equals |f'(x)| rho_K(f(w), Re f(x)) for f the rectangle map of
    (a, b, c, inf); positive, integrates to 1 over (c, +inf).
    """
    if not x > p.c:
        raise ValueError("normal_deriv_F: x must exceed c")
    rm = rect_map(p.a, p.b, p.c)
    fw = rm.eval(p.w).real
    fx = rm.eval(x)
    return abs(rm.deriv(x)) * float(rho_density(fw, fx.real, rm.K))


def pde_residual(p: PoissonParams, z: complex, h: float) -> float:
    """Central-difference residual of the second-order operator killed
    by P(z; a, w, b, c).

    Every derivative (in a, b, c, w and in z = x + iy) is a central
    difference with step h on the composite kernel; the w-coefficient
    uses 2 f''(w)/f'(w) = 1/(a-w) + 1/(b-w) + 1/(c-w). Returns |D P|,
    which shrinks at rate O(h^2).
    """
    z = complex(z)
    if z.imag <= 2.0 * h:
        raise ValueError("pde_residual: z too close to the boundary for step h")
    a, w, b, c = p.a, p.w, p.b, p.c
    if min(w - a, b - w, c - b) <= 2.0 * h:
        raise ValueError("pde_residual: marked points too close for step h")

    def P(aa, ww, bb, cc, zz):
        return poisson_halfplane(PoissonParams(aa, ww, bb, cc), zz)

    base = P(a, w, b, c, z)
    d_a = (P(a + h, w, b, c, z) - P(a - h, w, b, c, z)) / (2.0 * h)
    d_b = (P(a, w, b + h, c, z) - P(a, w, b - h, c, z)) / (2.0 * h)
    d_c = (P(a, w, b, c + h, z) - P(a, w, b, c - h, z)) / (2.0 * h)
    pw_hi = P(a, w + h, b, c, z)
    pw_lo = P(a, w - h, b, c, z)
    d_w = (pw_hi - pw_lo) / (2.0 * h)
    d_ww = (pw_hi - 2.0 * base + pw_lo) / (h * h)
    d_x = (P(a, w, b, c, z + h) - P(a, w, b, c, z - h)) / (2.0 * h)
    d_y = (P(a, w, b, c, z + 1j * h) - P(a, w, b, c, z - 1j * h)) / (2.0 * h)
    log_f2 = 1.0 / (a - w) + 1.0 / (b - w) + 1.0 / (c - w)
    pole = 2.0 / (z - w)
    resid = (
        2.0 / (a - w) * d_a
        + 2.0 / (b - w) * d_b
        + 2.0 / (c - w) * d_c
        + log_f2 * d_w
        + d_ww
        + pole.real * d_x
        + pole.imag * d_y
    )
    return abs(resid)
