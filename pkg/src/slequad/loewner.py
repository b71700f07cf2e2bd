"""Forward Loewner integrators and the slit-map zipper.

The stochastic side of the package: Euler-Maruyama integration of the
driver SDEs (plain, rho-weighted, and hypergeometric), reconstruction
of a curve from a driver by backward composition of slit maps, and the
inverse operation of welding a curve back into a driver.  Everything is
parameterized by half-plane capacity; a driver step of length dt grows
the hull capacity by exactly 2*dt.

Near a force point the drifts blow up like 1/gap, so the integrators
sub-step adaptively: each sub-step h satisfies |drift|*h <= 0.1*gap and
2*h/gap <= 0.1*gap for the smallest driver/force-point gap, with a
floor of 1e-6 * dt so a boundary touch cannot stall the clock.  A force
point is flagged as swallowed once its gap falls below ``SWALLOW_TOL``;
force points are never allowed to cross the driver (the flow repels
them in exact arithmetic, so a crossing is a discretization artifact
and is clamped).
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipe as _sp_ellipe
from scipy.special import ellipk as _sp_ellipk

from .backend import impl
from .rng import sample_stream
from .specialfn import HypParams, KappaNu, gauss_2f1, gauss_2f1_deriv

SWALLOW_TOL = 1e-6

_THETA_HYP = HypParams(0.5, 0.5, 1.0)


class IntegrationError(RuntimeError):
    """SDE integration failed; carries the last valid (t, W) pair."""

    def __init__(self, msg: str, last_state: tuple[float, float]):
        super().__init__(f"{msg} (last valid state t={last_state[0]:.6g}, "
                         f"W={last_state[1]:.6g})")
        self.last_state = last_state


class GeometryError(ValueError):
    """Input curve violates the closed-upper-half-plane contract."""


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class DrivingPath:
    """A sampled driver: times in hcap units, W, and force-point tracks.

    ``force_points`` has one column per tracked point, named by
    ``labels`` (e.g. ("V2", "V3", "V4") or ("L1", "R1", "R2")).  Columns
    keep to one side of W for all time; ``swallow_times`` records the
    first time each column came within ``SWALLOW_TOL`` of W (None if it
    never did), and ``threshold_time`` the time integration switched
    regime or stopped (hypergeometric V3 swallow, or the rho-weighted
    continuation threshold).
    """

    times: np.ndarray
    W: np.ndarray
    force_points: np.ndarray
    labels: tuple[str, ...] = ()
    swallow_times: tuple = ()
    threshold_time: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        w = np.asarray(self.W, dtype=float)
        fp = np.asarray(self.force_points, dtype=float)
        if fp.ndim == 1:
            fp = fp.reshape(len(t), -1)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "W", w)
        object.__setattr__(self, "force_points", fp)
        if t.ndim != 1 or w.shape != t.shape:
            raise ValueError("DrivingPath: times and W must be equal-length 1d")
        if len(t) < 1 or t[0] != 0.0:
            raise ValueError("DrivingPath: times must start at 0")
        if len(t) > 1 and not np.all(np.diff(t) > 0.0):
            raise ValueError("DrivingPath: times must be strictly increasing")
        if not np.all(np.isfinite(w)):
            raise ValueError("DrivingPath: W must be finite")
        if fp.shape != (len(t), len(self.labels)):
            raise ValueError("DrivingPath: force_points shape must be "
                             "(n_times, n_labels)")
        if len(self.swallow_times) not in (0, len(self.labels)):
            raise ValueError("DrivingPath: one swallow time per label")
        for j in range(fp.shape[1]):
            col = fp[:, j]
            if not np.all(np.isfinite(col)):
                continue  # point at infinity
            d = col - w
            if not (np.all(d >= 0.0) or np.all(d <= 0.0)):
                raise ValueError("DrivingPath: force point crosses the driver")

    @property
    def hcap(self) -> float:
        """Half-plane capacity of the full hull, 2 * elapsed time."""
        return 2.0 * float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class Curve:
    """A planar curve in the closed upper half-plane.

    ``hcap`` is the nominal capacity implied by the generating driver;
    ``hcap_est`` re-measures it from the reconstructed conformal map
    (expansion at a far point), so the two agreeing certifies the slit
    composition.
    """

    times: np.ndarray
    points: np.ndarray
    hcap: float = 0.0
    hcap_est: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "points",
                           np.asarray(self.points, dtype=complex))
        if self.times.shape != self.points.shape:
            raise ValueError("Curve: times and points must align")


@dataclass(frozen=True)
class HsleParams:
    """Parameters of the hypergeometric driver SDE.

    kappa >= 8, nu > -2, and marked points x1 < x2 < x3 < x4 on the real
    line with x4 = inf allowed.  The driver starts at x1 and the drift
    is kappa * d/dx1 of log of the weight
    (x4-x1)^(-2h) (x3-x2)^(-2b) z^a F(z) with
    z = ((x2-x1)(x4-x3)) / ((x3-x1)(x4-x2)).
    """

    kappa: float
    nu: float
    x1: float
    x2: float
    x3: float
    x4: float = math.inf

    def __post_init__(self):
        if self.kappa < 8.0:
            raise ValueError("HsleParams: kappa must be >= 8")
        if not self.nu > -2.0:
            raise ValueError("HsleParams: nu must exceed -2")
        fin = [self.x1, self.x2, self.x3]
        if not math.isinf(self.x4):
            fin.append(self.x4)
        if any(not b > a for a, b in zip(fin, fin[1:])):
            raise ValueError("HsleParams: need x1 < x2 < x3 < x4")

    @property
    def h_exp(self) -> float:
        return (6.0 - self.kappa) / (2.0 * self.kappa)

    @property
    def a_exp(self) -> float:
        return (self.nu + 2.0) / self.kappa

    def hyp_params(self) -> HypParams:
        return KappaNu(self.kappa, self.nu).hyp_params()


@dataclass(frozen=True)
class SleRhoParams:
    """Weighted-driver parameters: force points by side, nearest first.

    ``left`` points decrease from the start point, ``right`` points
    increase; a point placed exactly at 0 starts glued to the driver
    and is nudged apart by one swallow tolerance.  ``target`` is caller
    bookkeeping only (where the curve is aimed); the SDE never reads
    it.
    """

    kappa: float
    left_y: tuple[float, ...] = ()
    left_rho: tuple[float, ...] = ()
    right_y: tuple[float, ...] = ()
    right_rho: tuple[float, ...] = ()
    target: float | None = None

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError("SleRhoParams: kappa must be positive")
        if len(self.left_y) != len(self.left_rho):
            raise ValueError("SleRhoParams: left_y and left_rho must align")
        if len(self.right_y) != len(self.right_rho):
            raise ValueError("SleRhoParams: right_y and right_rho must align")
        if self.left_y and (self.left_y[0] > 0.0
                            or any(not b < a for a, b in
                                   zip(self.left_y, self.left_y[1:]))):
            raise ValueError("SleRhoParams: left_y must decrease from <= 0")
        if self.right_y and (self.right_y[0] < 0.0
                             or any(not b > a for a, b in
                                    zip(self.right_y, self.right_y[1:]))):
            raise ValueError("SleRhoParams: right_y must increase from >= 0")


# ---------------------------------------------------------------------------
# drifts


def theta_drift(x: float, y: float, w: float) -> float:
    """Drift functional of the left-interface limit driver.

    Theta(x, y, w) = 2/(w-x) - 2/(w-y) - 8 (y-x)/(y-w)^2 * F'(z)/F(z)
    with z = (x-w)/(y-w) and F = 2F1(1/2, 1/2; 1; .).  Defined for
    z in [0, 1); at x == y all three terms vanish in the limit and 0 is
    returned.
    """
    if x == y:
        return 0.0
    if w == x or w == y:
        raise ValueError("theta_drift: arguments must be pairwise distinct")
    z = (x - w) / (y - w)
    if not 0.0 <= z < 1.0:
        raise ValueError("theta_drift: (x-w)/(y-w) must lie in [0, 1)")
    ratio = gauss_2f1_deriv(_THETA_HYP, z) / gauss_2f1(_THETA_HYP, z)
    return (2.0 / (w - x) - 2.0 / (w - y)
            - 8.0 * (y - x) / (y - w) ** 2 * ratio)


def _hsle_drift(p: HsleParams, hp: HypParams, w: float, v2: float,
                v3: float, v4: float) -> float:
    """kappa * d/dx1 log Z at (w, v2, v3, v4), gaps floored at tolerance.

    Z = (x4-x1)^(-2h) (x3-x2)^(-2b) z^a F(z); the normalization constant
    and the (x3-x2) factor do not depend on x1, so the derivative is
    2h/(x4-x1) + (a + z F'(z)/F(z)) (1/(x3-x1) - 1/(x2-x1)).
    """
    g2 = max(v2 - w, SWALLOW_TOL)
    g3 = max(v3 - w, SWALLOW_TOL)
    if math.isinf(v4):
        z = g2 / g3
        tail = 0.0
    else:
        g4 = max(v4 - w, SWALLOW_TOL)
        z = (g2 * (v4 - v3)) / (g3 * (v4 - v2))
        tail = 2.0 * p.h_exp / g4
    z = min(max(z, 0.0), 1.0 - 1e-12)
    zff = z * impl.hyp2f1_deriv(hp.A, hp.B, hp.C, z) / impl.hyp2f1(
        hp.A, hp.B, hp.C, z)
    return p.kappa * (tail + (p.a_exp + zff) * (1.0 / g3 - 1.0 / g2))


def _zff_vec(hp: HypParams):
    """Vectorized z -> z F'(z)/F(z) for the batch integrator.

    The kappa=8, nu=0 family is 2F1(1/2,1/2;1;z) = (2/pi) K(z), so the
    ratio has the closed form (E(z) - (1-z) K(z)) / (2 (1-z) K(z));
    other parameters fall back to a ufunc over the scalar kernel.
    """
    if (hp.A, hp.B, hp.C) == (0.5, 0.5, 1.0):
        def ratio(z):
            z = np.minimum(np.maximum(z, 0.0), 1.0 - 1e-12)
            k = _sp_ellipk(z)
            return (_sp_ellipe(z) - (1.0 - z) * k) / (2.0 * (1.0 - z) * k)
        return ratio
    f = np.frompyfunc(lambda z: impl.hyp2f1(hp.A, hp.B, hp.C, z), 1, 1)
    fp = np.frompyfunc(lambda z: impl.hyp2f1_deriv(hp.A, hp.B, hp.C, z), 1, 1)

    def ratio(z):
        z = np.minimum(np.maximum(z, 0.0), 1.0 - 1e-12)
        return z * fp(z).astype(float) / f(z).astype(float)
    return ratio


# ---------------------------------------------------------------------------
# scalar integrators


def _substep(dt: float, remaining: float, gap: float, drift: float) -> float:
    h = min(remaining, 0.05 * gap * gap)
    if drift != 0.0:
        h = min(h, 0.1 * gap / abs(drift))
    return min(remaining, max(h, 1e-6 * dt))


def simulate_hsle(p: HsleParams, dt: float, rng: np.random.Generator,
                  T: float | None = None) -> DrivingPath:
    """Integrate the hypergeometric driver SDE from (x1, x2, x3, x4).

    Euler-Maruyama on a base grid of spacing dt with adaptive
    sub-stepping near the force points.  Once V3 comes within the
    swallow tolerance of W the drift is dropped and the driver
    continues as sqrt(kappa) * B (the curve proceeds as a plain chain
    in the remaining domain); with T=None the path is returned at that
    switch, otherwise integration continues to time T.
    """
    if dt <= 0.0:
        raise ValueError("simulate_hsle: dt must be positive")
    hp = p.hyp_params()
    w, v2, v3, v4 = p.x1, p.x2, p.x3, p.x4
    t = 0.0
    rows_t = [0.0]
    rows = [(w, v2, v3, v4)]
    sw2: float | None = None
    sw3: float | None = None
    budget = T if T is not None else 200.0 * max(1.0, p.x3 - p.x1) ** 2
    sqk = math.sqrt(p.kappa)
    while t < budget - 1e-15:
        t_next = min(t + dt, budget)
        while t < t_next - 1e-15:
            g2 = v2 - w
            g3 = v3 - w
            gap = min(g2, g3) if math.isinf(v4) else min(g2, g3, v4 - w)
            gap = max(gap, SWALLOW_TOL)
            b = 0.0 if sw3 is not None else _hsle_drift(p, hp, w, v2, v3, v4)
            h = _substep(dt, t_next - t, gap, b)
            w_old = w
            w += b * h + sqk * math.sqrt(h) * rng.standard_normal()
            v2 += 2.0 * h / max(v2 - w_old, SWALLOW_TOL)
            v3 += 2.0 * h / max(v3 - w_old, SWALLOW_TOL)
            if not math.isinf(v4):
                v4 += 2.0 * h / max(v4 - w_old, SWALLOW_TOL)
            v2 = max(v2, w)
            v3 = max(v3, v2)
            if not math.isinf(v4):
                v4 = max(v4, v3)
            t += h
            if not all(map(math.isfinite, (w, v2, v3))):
                raise IntegrationError("simulate_hsle: state blew up",
                                       (rows_t[-1], rows[-1][0]))
            if sw2 is None and v2 - w <= SWALLOW_TOL:
                sw2 = t
            if sw3 is None and v3 - w <= SWALLOW_TOL:
                sw3 = t
                if T is None:
                    break
        if sw3 is not None and T is None:
            if t > rows_t[-1] + 1e-15:
                rows_t.append(t)
                rows.append((w, v2, v3, v4))
            break
        rows_t.append(t)
        rows.append((w, v2, v3, v4))
    else:
        if T is None:
            raise IntegrationError(
                "simulate_hsle: x3 not swallowed within the capacity budget",
                (rows_t[-1], rows[-1][0]))
    arr = np.asarray(rows)
    return DrivingPath(np.asarray(rows_t), arr[:, 0], arr[:, 1:],
                       labels=("V2", "V3", "V4"),
                       swallow_times=(sw2, sw3, None),
                       threshold_time=sw3)


def simulate_sle_rho(p: SleRhoParams, T: float, dt: float,
                     rng: np.random.Generator) -> DrivingPath:
    """Integrate the rho-weighted driver SDE up to min(T, threshold).

    The continuation threshold is the first time the weights of the
    force points currently glued to the driver sum to -2 or below on
    either side; the path is truncated there and the time recorded in
    ``threshold_time``.
    """
    if dt <= 0.0 or T <= 0.0:
        raise ValueError("simulate_sle_rho: need positive T and dt")
    w = 0.0
    t = 0.0
    lv = [min(y, -SWALLOW_TOL) for y in p.left_y]
    rv = [max(y, SWALLOW_TOL) for y in p.right_y]
    lr, rr = list(p.left_rho), list(p.right_rho)
    k = len(lv) + len(rv)
    sw: list[float | None] = [None] * k
    rows_t = [0.0]
    rows = [[w] + lv + rv]
    sqk = math.sqrt(p.kappa)
    threshold: float | None = None
    while t < T - 1e-15 and threshold is None:
        t_next = min(t + dt, T)
        while t < t_next - 1e-15:
            gl = [max(w - v, SWALLOW_TOL) for v in lv]
            gr = [max(v - w, SWALLOW_TOL) for v in rv]
            b = sum(r / g for r, g in zip(lr, gl)) \
                - sum(r / g for r, g in zip(rr, gr))
            gap = min(gl + gr) if k else math.inf
            h = _substep(dt, t_next - t, min(gap, 1.0), b)
            w_new = w + b * h + sqk * math.sqrt(h) * rng.standard_normal()
            lv = [min(v - 2.0 * h / g, w_new) for v, g in zip(lv, gl)]
            rv = [max(v + 2.0 * h / g, w_new) for v, g in zip(rv, gr)]
            w = w_new
            t += h
            if not math.isfinite(w):
                raise IntegrationError("simulate_sle_rho: state blew up",
                                       (rows_t[-1], rows[-1][0]))
            gone_l = [w - v <= SWALLOW_TOL for v in lv]
            gone_r = [v - w <= SWALLOW_TOL for v in rv]
            for i, g in enumerate(gone_l + gone_r):
                if g and sw[i] is None:
                    sw[i] = t
            if (sum(r for r, g in zip(lr, gone_l) if g) <= -2.0
                    or sum(r for r, g in zip(rr, gone_r) if g) <= -2.0):
                threshold = t
                break
        if t > rows_t[-1] + 1e-15:
            rows_t.append(t)
            rows.append([w] + lv + rv)
    labels = tuple(f"L{i + 1}" for i in range(len(lv))) \
        + tuple(f"R{i + 1}" for i in range(len(rv)))
    arr = np.asarray(rows)
    return DrivingPath(np.asarray(rows_t), arr[:, 0], arr[:, 1:],
                       labels=labels, swallow_times=tuple(sw),
                       threshold_time=threshold)


# ---------------------------------------------------------------------------
# zipper: curve from driver and driver from curve


def _sqrt_pair(u: np.ndarray, s: complex) -> np.ndarray:
    """Branch-correct sqrt(u^2 - s^2) on the slit half-plane.

    The principal-branch product sqrt(u - s) * sqrt(u + s) is analytic
    off the segment [-s, s], behaves like u at infinity, and maps both
    boundary rays to the correct sides.
    """
    return np.sqrt(u - s) * np.sqrt(u + s)


def trace_from_driver(d: DrivingPath, n_grid: int,
                      slit: str = "vertical") -> Curve:
    """Reconstruct the curve of a driver by backward slit composition.

    Each driver step is replaced by an exact slit map of the same
    capacity: a vertical slit at the step's endpoint by default, or a
    straight tilted slit matching both the capacity and the driver
    increment when slit="tilted".  The curve point at t_m is the image
    of W(t_m) under the composition of the first m inverse maps.
    ``hcap_est`` re-measures the total capacity from the map expansion
    at a far point.
    """
    if n_grid < 2:
        raise ValueError("trace_from_driver: n_grid must be at least 2")
    if slit not in ("vertical", "tilted"):
        raise ValueError("trace_from_driver: slit must be vertical or tilted")
    t = d.times
    wd = d.W
    n = len(t)
    idx = np.unique(np.round(np.linspace(0, n - 1, n_grid)).astype(int))
    span = float(t[-1] - t[0])
    scale = max(1.0, float(np.max(np.abs(wd))), 2.0 * math.sqrt(max(span, 0.0)))
    y_far = 1e4 * scale
    z = wd[idx].astype(complex)
    far = complex(0.0, y_far)
    dt_steps = np.diff(t)
    if slit == "tilted":
        dw = np.diff(wd)
        r = dw / (4.0 * np.sqrt(dt_steps))
        beta = r / np.sqrt(1.0 + r * r)
        alpha = 0.5 * (1.0 - beta)
        s0 = 2.0 * np.sqrt(alpha * (1.0 - alpha) * dt_steps)
        pp = s0 / (1.0 - alpha)
        qq = s0 / alpha
    for k in range(n - 1, 0, -1):
        sel = idx >= k
        if slit == "vertical":
            c = wd[k]
            s = 2.0 * math.sqrt(dt_steps[k - 1])
            if np.any(sel):
                z[sel] = c + _sqrt_pair(z[sel] - c, s)
            far = c + complex(_sqrt_pair(np.asarray([far - c]), s)[0])
        else:
            c = wd[k - 1]
            a_k = alpha[k - 1]
            if np.any(sel):
                v = z[sel] - c
                z[sel] = c + (v + pp[k - 1]) ** (1.0 - a_k) \
                    * (v - qq[k - 1]) ** a_k
            v = far - c
            far = c + (v + pp[k - 1]) ** (1.0 - a_k) * (v - qq[k - 1]) ** a_k
    # far ~ iY - hcap/(iY), so hcap_est = Y * (Im far - Y)
    hcap_est = y_far * (far.imag - y_far)
    return Curve(t[idx], z, hcap=2.0 * span, hcap_est=float(hcap_est))


def extract_driver(c: Curve | np.ndarray) -> DrivingPath:
    """Weld a half-plane curve back into a driver (vertical-slit zipper).

    The curve must start on the real axis and stay in the closed upper
    half-plane.  Each point is straightened by the vertical slit map
    through its current image; the slit capacity increments accumulate
    into the time axis and the slit feet form W.  Points adding no
    capacity (images on the real axis) are skipped.
    """
    pts = np.asarray(c.points if isinstance(c, Curve) else c, dtype=complex)
    if pts.ndim != 1 or len(pts) < 2:
        raise GeometryError("extract_driver: need a 1d curve of >= 2 points")
    scale = float(np.max(np.abs(pts))) or 1.0
    if np.min(pts.imag) < -1e-9 * scale:
        raise GeometryError("extract_driver: curve exits the half-plane")
    if abs(pts[0].imag) > 1e-9 * scale:
        raise GeometryError("extract_driver: curve must start on the axis")
    z = pts.copy()
    z.imag = np.maximum(z.imag, 0.0)
    times = [0.0]
    ws = [float(z[0].real)]
    t = 0.0
    for k in range(1, len(z)):
        zeta = z[k]
        y = zeta.imag
        if y <= 0.0:
            continue
        t += 0.25 * y * y
        w = float(zeta.real)
        times.append(t)
        ws.append(w)
        if k + 1 < len(z):
            u = z[k + 1:] - w
            z[k + 1:] = w + np.sqrt(u - 1j * y) * np.sqrt(u + 1j * y)
    return DrivingPath(np.asarray(times), np.asarray(ws),
                       np.zeros((len(times), 0)))


def concat_drivers(d1: DrivingPath, d2: DrivingPath) -> DrivingPath:
    """Concatenate drivers: run d2 after d1, shifted to continue W.

    Time axes chain additively (capacity is additive under
    concatenation); force-point tracks are kept only when both drivers
    carry the same labels.
    """
    shift_t = float(d1.times[-1])
    shift_w = float(d1.W[-1] - d2.W[0])
    times = np.concatenate([d1.times, d2.times[1:] + shift_t])
    w = np.concatenate([d1.W, d2.W[1:] + shift_w])
    if d1.labels and d1.labels == d2.labels:
        fp = np.concatenate([d1.force_points, d2.force_points[1:] + shift_w])
        return DrivingPath(times, w, fp, labels=d1.labels)
    return DrivingPath(times, w, np.zeros((len(times), 0)))


# ---------------------------------------------------------------------------
# observables along a driver


def _flow_real(times: np.ndarray, wpath: np.ndarray, y0: float):
    """Flow a boundary point and its log-derivative along a driver.

    Returns (g, logdg, alive) arrays on the driver grid; the point is
    frozen once it comes within the swallow tolerance of W, and alive
    marks the grid entries strictly before that.  Sub-steps keep
    2*h/gap <= 0.1*gap, with W interpolated linearly inside a step.
    """
    n = len(times)
    g = np.empty(n)
    lg = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    g[0] = y0
    cur, cur_lg = y0, 0.0
    dead = abs(y0 - wpath[0]) <= SWALLOW_TOL
    alive[0] = not dead
    for j in range(n - 1):
        dt = times[j + 1] - times[j]
        if not dead:
            gap = abs(cur - wpath[j])
            k = int(min(max(math.ceil(dt / max(0.05 * gap * gap, 1e-6 * dt)),
                            1), 4096))
            h = dt / k
            for s in range(k):
                frac = (s + 0.5) / k
                wmid = wpath[j] + frac * (wpath[j + 1] - wpath[j])
                gap = cur - wmid
                if abs(gap) <= SWALLOW_TOL:
                    dead = True
                    break
                cur += 2.0 * h / gap
                cur_lg -= 2.0 * h / (gap * gap)
        g[j + 1] = cur
        lg[j + 1] = cur_lg
        alive[j + 1] = not dead
    return g, lg, alive


def _flow_complex(times: np.ndarray, wpath: np.ndarray, z0: complex):
    """Interior-point variant of the driver flow (no log-derivative)."""
    n = len(times)
    g = np.empty(n, dtype=complex)
    g[0] = z0
    cur = complex(z0)
    dead = False
    for j in range(n - 1):
        dt = times[j + 1] - times[j]
        if dead:
            g[j + 1] = cur
            continue
        gap = abs(cur - wpath[j])
        k = int(min(max(math.ceil(dt / max(0.05 * gap * gap, 1e-6 * dt)),
                        1), 4096))
        h = dt / k
        for s in range(k):
            frac = (s + 0.5) / k
            wmid = wpath[j] + frac * (wpath[j + 1] - wpath[j])
            d = cur - wmid
            if abs(d) <= SWALLOW_TOL or cur.imag <= SWALLOW_TOL:
                dead = True
                break
            cur += 2.0 * h / d
        g[j + 1] = cur
    return g, dead


def _rn_eval(kappa: float, rho: np.ndarray, y_img: np.ndarray,
             logdg: np.ndarray, w) -> np.ndarray:
    """The weighted-driver change-of-measure factor M_t, in log form.

    M = prod_i g'(y_i)^(rho_i (rho_i + 4 - kappa) / (4 kappa))
              * (g(y_i) - W)^(rho_i / kappa)
      * prod_{i<j} (g(y_j) - g(y_i))^(rho_i rho_j / (2 kappa))

    ``y_img`` and ``logdg`` carry a trailing axis over force points;
    leading axes broadcast (time series or path batches).
    """
    e_dg = rho * (rho + 4.0 - kappa) / (4.0 * kappa)
    gaps = y_img - np.asarray(w)[..., None]
    if np.any(gaps <= 0.0):
        raise ValueError("radon-nikodym: force point at or past the driver")
    acc = (e_dg * logdg).sum(axis=-1)
    acc = acc + (rho / kappa * np.log(gaps)).sum(axis=-1)
    kp = len(rho)
    for i in range(kp):
        for j in range(i + 1, kp):
            acc = acc + (rho[i] * rho[j] / (2.0 * kappa)
                         * np.log(y_img[..., j] - y_img[..., i]))
    return np.exp(acc)


def sle_rho_radon_nikodym(d: DrivingPath, p: SleRhoParams) -> np.ndarray:
    """Change-of-measure series M_t along a driver, one value per time.

    Force points must all lie on one side of the start (the left side
    is mirrored through x -> -x before evaluation).  Raises once the
    nearest force point is swallowed: the density stops existing there.
    """
    if p.left_y and p.right_y:
        raise ValueError("radon-nikodym: force points must lie on one side")
    if not p.left_y and not p.right_y:
        return np.ones(len(d.times))
    if p.right_y:
        ys = np.asarray(p.right_y, dtype=float)
        rho = np.asarray(p.right_rho, dtype=float)
        wpath = d.W
    else:
        ys = -np.asarray(p.left_y, dtype=float)
        rho = np.asarray(p.left_rho, dtype=float)
        wpath = -d.W
    if ys[0] <= SWALLOW_TOL:
        raise ValueError("radon-nikodym: nearest force point starts glued "
                         "to the driver")
    n = len(d.times)
    imgs = np.empty((n, len(ys)))
    logs = np.empty((n, len(ys)))
    for i, y in enumerate(ys):
        g, lg, alive = _flow_real(d.times, wpath, y)
        if i == 0 and not alive[-1]:
            j = int(np.argmin(alive))
            raise ValueError("radon-nikodym: force point swallowed at "
                             f"t={d.times[j]:.6g}; series undefined beyond")
        imgs[:, i] = g
        logs[:, i] = lg
    return _rn_eval(p.kappa, rho, imgs, logs, wpath)


def _mt_eval(w, v2, v3, gz):
    """Boundary-visit observable at one state: K(S, U) / K(U) with
    S = arcsin sqrt((g(z) - W)/(V2 - W)) and U = (V2 - W)/(V3 - W)."""
    g2 = max(v2 - w, 1e-12)  # V2 may sit exactly on W after its swallow
    u = min(g2 / (v3 - w), 1.0 - 1e-12)
    s = cmath.asin(cmath.sqrt((gz - w) / g2))
    return impl.ellipk_inc(s, u) / impl.carlson_rf(0.0, 1.0 - u, 1.0).real


def hsle_observable_series(d: DrivingPath, z_probe: complex) -> np.ndarray:
    """Evaluate the interior martingale observable along a driver.

    Needs the V2/V3 tracks of a hypergeometric driver.  The probe is
    flowed by the Loewner equation; the returned series stops (is
    truncated) at the first time the probe is swallowed or V3 reaches
    the driver, whichever is earlier.
    """
    for lab in ("V2", "V3"):
        if lab not in d.labels:
            raise ValueError("hsle_observable_series: driver lacks a "
                             f"{lab} track")
    z0 = complex(z_probe)
    if not z0.imag > 0.0:
        raise ValueError("hsle_observable_series: probe must be interior")
    v2 = d.force_points[:, d.labels.index("V2")]
    v3 = d.force_points[:, d.labels.index("V3")]
    g, _ = _flow_complex(d.times, d.W, z0)
    n = len(d.times)
    stop = n
    if d.threshold_time is not None:
        stop = int(np.searchsorted(d.times, d.threshold_time))
    out = np.empty(min(stop, n), dtype=complex)
    for j in range(len(out)):
        if abs(g[j] - d.W[j]) <= SWALLOW_TOL or (v3[j] - d.W[j]) <= 2.0 * SWALLOW_TOL:
            out = out[:j]
            break
        out[j] = _mt_eval(d.W[j], v2[j], v3[j], g[j])
    return out


# ---------------------------------------------------------------------------
# batch Monte Carlo helpers (vectorized across paths)


def _substep_counts(dt: float, gap: np.ndarray, drift: np.ndarray,
                    cap: int = 256) -> np.ndarray:
    """Per-path sub-step counts for one base step of the batch loop.

    Same budget as the scalar :func:`_substep` rule, except the count is
    fixed from the step-start state and capped; near a collapse the
    dynamics are tolerance-limited either way.
    """
    h = 0.05 * gap * gap
    nz = drift != 0.0
    h[nz] = np.minimum(h[nz], 0.1 * gap[nz] / np.abs(drift[nz]))
    h = np.maximum(h, 1e-6 * dt)
    return np.minimum(np.maximum(np.ceil(dt / h), 1.0), cap).astype(int)


def hsle_driver_batch(p: HsleParams, dt: float, T: float, n_paths: int,
                      seed: int, probe: complex | None = None,
                      checkpoints: tuple[float, ...] = (),
                      record_w: bool = False,
                      stop_u: float | None = None) -> dict:
    """Integrate many hypergeometric drivers at once.

    Vectorized twin of :func:`simulate_hsle`: same SDE and sub-step
    budget, except the drift and the sub-step count are frozen over
    each base step (statistically equivalent, not bitwise).  Optionally
    flows an interior probe alongside and snapshots the state at the
    requested checkpoint times.  Returns a dict with per-checkpoint
    state arrays, V3 swallow times, and (with record_w) the driver
    series on the base grid.

    With ``stop_u`` set, a path freezes entirely the first time
    (V2-W)/(V3-W) drops below it (or its probe is swallowed).  The
    interior observable is a martingale only under such stopping: its
    imaginary part is unbounded as the ratio degenerates, so unstopped
    fixed-time means drop below the initial value.  Checkpoint
    snapshots then hold the stopped states ("live" marks running
    paths), which is the optional-stopping evaluation.
    """
    hp = p.hyp_params()
    zff = _zff_vec(hp)
    rng = sample_stream(seed, 0, 7)
    w = np.full(n_paths, p.x1)
    v2 = np.full(n_paths, p.x2)
    v3 = np.full(n_paths, p.x3)
    fin4 = not math.isinf(p.x4)
    v4 = np.full(n_paths, p.x4) if fin4 else None
    gz = np.full(n_paths, complex(probe), dtype=complex) if probe is not None \
        else None
    z_alive = np.ones(n_paths, dtype=bool)
    live = np.ones(n_paths, dtype=bool)
    sw3 = np.full(n_paths, np.inf)
    n_steps = int(round(T / dt))
    checks = sorted(checkpoints)
    snaps: list[dict] = []
    w_series = np.empty((n_paths, n_steps + 1)) if record_w else None
    if record_w:
        w_series[:, 0] = w
    sqk = math.sqrt(p.kappa)
    t = 0.0
    for j in range(n_steps):
        g2 = np.maximum(v2 - w, SWALLOW_TOL)
        g3 = np.maximum(v3 - w, SWALLOW_TOL)
        gap = np.minimum(g2, g3)
        if fin4:
            gap = np.minimum(gap, np.maximum(v4 - w, SWALLOW_TOL))
        if fin4:
            z = (g2 * (v4 - v3)) / (g3 * np.maximum(v4 - v2, SWALLOW_TOL))
            tail = 2.0 * p.h_exp / np.maximum(v4 - w, SWALLOW_TOL)
        else:
            z = g2 / g3
            tail = 0.0
        drift = p.kappa * (tail + (p.a_exp + zff(z)) * (1.0 / g3 - 1.0 / g2))
        drift[sw3 < np.inf] = 0.0
        ks = _substep_counts(dt, gap, drift)
        kmax = int(ks.max())
        h = dt / ks
        for s in range(kmax):
            act = (s < ks) & live
            hh = np.where(act, h, 0.0)
            if probe is not None:
                zgap = gz - w
                zgap = np.where(np.abs(zgap) < 1e-12, 1e-12, zgap)
                gz = np.where(act & z_alive, gz + 2.0 * hh / zgap, gz)
            xi = rng.standard_normal(n_paths)
            w_new = w + drift * hh + sqk * np.sqrt(hh) * xi
            v2 = v2 + 2.0 * hh / np.maximum(v2 - w, SWALLOW_TOL)
            v3 = v3 + 2.0 * hh / np.maximum(v3 - w, SWALLOW_TOL)
            if fin4:
                v4 = v4 + 2.0 * hh / np.maximum(v4 - w, SWALLOW_TOL)
            w = w_new
            v2 = np.maximum(v2, w)
            v3 = np.maximum(v3, v2)
            if fin4:
                v4 = np.maximum(v4, v3)
            hit = act & (v3 - w <= SWALLOW_TOL) & (sw3 == np.inf)
            if np.any(hit):
                sw3[hit] = t + (s + 1) * dt / ks[hit]
                drift[hit] = 0.0
            if probe is not None:
                z_alive &= (np.abs(gz - w) > SWALLOW_TOL) \
                    & (gz.imag > SWALLOW_TOL)
            if stop_u is not None:
                ratio = np.maximum(v2 - w, 0.0) / np.maximum(
                    v3 - w, SWALLOW_TOL)
                live &= ratio >= stop_u
                if probe is not None:
                    live &= z_alive
        t += dt
        if record_w:
            w_series[:, j + 1] = w
        while checks and t >= checks[0] - 1e-12:
            checks.pop(0)
            snap = {"t": t, "W": w.copy(), "V2": v2.copy(), "V3": v3.copy(),
                    "sw3": sw3.copy(), "live": live.copy()}
            if probe is not None:
                snap["g"] = gz.copy()
                snap["alive"] = z_alive.copy()
            snaps.append(snap)
    out = {"checkpoints": snaps, "swallow3": sw3, "dt": dt}
    if record_w:
        out["times"] = dt * np.arange(n_steps + 1)
        out["W"] = w_series
    return out


def sle_rho_driver_batch(p: SleRhoParams, T: float, dt: float, n_paths: int,
                         seed: int, probes: tuple[float, ...] = (),
                         checkpoints: tuple[float, ...] = (),
                         record_w: bool = False) -> dict:
    """Integrate many rho-weighted drivers at once.

    Vectorized twin of :func:`simulate_sle_rho`.  ``probes`` are extra
    boundary points flowed along with their log-derivatives (for
    change-of-measure and boundary-observable checks).  Paths that hit
    the continuation threshold freeze in place; ``stopped`` in each
    checkpoint snapshot marks them.
    """
    ys = [min(y, -SWALLOW_TOL) for y in p.left_y] \
        + [max(y, SWALLOW_TOL) for y in p.right_y]
    rhos = np.asarray(list(p.left_rho) + list(p.right_rho))
    side = np.asarray([-1.0] * len(p.left_y) + [1.0] * len(p.right_y))
    kf = len(ys)
    rng = sample_stream(seed, 0, 11)
    w = np.zeros(n_paths)
    v = np.tile(np.asarray(ys), (n_paths, 1))
    gp = np.tile(np.asarray(probes, dtype=float), (n_paths, 1))
    lgp = np.zeros_like(gp)
    stopped = np.zeros(n_paths, dtype=bool)
    stop_t = np.full(n_paths, np.inf)
    n_steps = int(round(T / dt))
    checks = sorted(checkpoints)
    snaps: list[dict] = []
    w_series = np.empty((n_paths, n_steps + 1)) if record_w else None
    if record_w:
        w_series[:, 0] = w
    sqk = math.sqrt(p.kappa)
    t = 0.0
    for j in range(n_steps):
        gaps = side * (v - w[:, None])
        gaps = np.maximum(gaps, SWALLOW_TOL)
        # rho_i / (W - V_i) = -rho_i * side_i / gap_i
        drift = -(rhos * side / gaps).sum(axis=1) if kf else np.zeros(n_paths)
        gmin = gaps.min(axis=1) if kf else np.full(n_paths, 1.0)
        if len(probes):
            gmin = np.minimum(gmin, np.abs(gp - w[:, None]).min(axis=1))
        ks = _substep_counts(dt, np.minimum(gmin, 1.0), drift)
        ks[stopped] = 1
        kmax = int(ks.max())
        h = dt / ks
        for s in range(kmax):
            act = (s < ks) & ~stopped
            hh = np.where(act, h, 0.0)
            if len(probes):
                pg = gp - w[:, None]
                pg = np.where(np.abs(pg) < SWALLOW_TOL,
                              np.copysign(SWALLOW_TOL, pg), pg)
                gp = gp + 2.0 * hh[:, None] / pg
                lgp = lgp - 2.0 * hh[:, None] / (pg * pg)
            xi = rng.standard_normal(n_paths)
            w_new = w + drift * hh + sqk * np.sqrt(hh) * xi
            if kf:
                v = v + 2.0 * hh[:, None] / (side * np.maximum(
                    side * (v - w[:, None]), SWALLOW_TOL))
                v = np.where(side < 0, np.minimum(v, w_new[:, None]),
                             np.maximum(v, w_new[:, None]))
            w = np.where(act, w_new, w)
            if kf:
                glued = side * (v - w[:, None]) <= SWALLOW_TOL
                lsum = (rhos * glued * (side < 0)).sum(axis=1)
                rsum = (rhos * glued * (side > 0)).sum(axis=1)
                hit = ((lsum <= -2.0) | (rsum <= -2.0)) & ~stopped
                if np.any(hit):
                    stop_t[hit] = t + (s + 1) * dt / ks[hit]
                    stopped |= hit
        t += dt
        if record_w:
            w_series[:, j + 1] = w
        while checks and t >= checks[0] - 1e-12:
            checks.pop(0)
            snap = {"t": t, "W": w.copy(), "V": v.copy(),
                    "stopped": stopped.copy()}
            if len(probes):
                snap["g"] = gp.copy()
                snap["logdg"] = lgp.copy()
            snaps.append(snap)
    out = {"checkpoints": snaps, "stop_times": stop_t, "dt": dt}
    if record_w:
        out["times"] = dt * np.arange(n_steps + 1)
        out["W"] = w_series
    return out


# ---------------------------------------------------------------------------
# export


def save_driver_csv(path, d: DrivingPath) -> None:
    """Write a driver as CSV with columns t, W, then the force tracks."""
    cols = [d.times, d.W] + [d.force_points[:, j]
                             for j in range(d.force_points.shape[1])]
    header = ",".join(["t", "W", *d.labels])
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def save_trace_json(path, c: Curve) -> None:
    """Write a curve as JSON: times, point coordinates, capacity checks."""
    doc = {
        "times": [float(x) for x in c.times],
        "re": [float(z.real) for z in c.points],
        "im": [float(z.imag) for z in c.points],
        "hcap": c.hcap,
        "hcap_est": c.hcap_est,
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh)
        fh.write("\n")
