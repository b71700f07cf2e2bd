"""Statistical verdicts: KS uniformity, binned chi-square against a 2D
density, Monte Carlo means with Student-t intervals, and the realized
quadratic-variation slope of a driver.

Everything here is deterministic given its inputs; the repo-wide
significance level for pass/fail verdicts is ``ALPHA`` = 0.01.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

ALPHA = 0.01


@dataclass(frozen=True)
class TestReport:
    """Outcome of one statistical check.

    ``passed`` is the verdict at the significance level stored in
    ``metadata`` (``ALPHA`` unless overridden); ``p_value`` is kept so
    downstream consumers can re-threshold.
    """

    name: str
    statistic: float
    p_value: float
    n: int
    passed: bool
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"name": self.name, "statistic": self.statistic,
               "p_value": self.p_value, "n": self.n, "passed": self.passed,
               "metadata": self.metadata}
        return json.dumps(doc, sort_keys=True)


def save_report_json(path, report: TestReport) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(report.to_json())
        fh.write("\n")


# ----------------------------------------------------------------- KS


def ks_uniform(samples, alpha: float = ALPHA) -> TestReport:
    """One-sample Kolmogorov-Smirnov test against Uniform(0, 1).

    Asymptotic p-value (Kolmogorov distribution of sqrt(n) * D); the
    sample size must be at least 50 for that approximation to be
    honest.
    """
    u = np.sort(np.asarray(samples, dtype=float))
    n = len(u)
    if n < 50:
        raise ValueError("ks_uniform: need at least 50 samples")
    if u[0] < 0.0 or u[-1] > 1.0:
        raise ValueError("ks_uniform: samples must lie in [0, 1]")
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - u)), float(np.max(u - (i - 1) / n)))
    p = float(sp.kolmogorov(math.sqrt(n) * d))
    return TestReport("ks_uniform", d, p, n, p >= alpha,
                      {"alpha": alpha})


# ----------------------------------------------------- binned chi-square


def _gl_nodes(k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w  # on [0, 1]


def _bin_masses(density, bx: int, by: int, k: int = 12) -> np.ndarray:
    """Expected mass of each cell of a bx x by grid on the unit square
    by per-cell Gauss-Legendre quadrature.

    The density is evaluated on the full node grid in one call when it
    broadcasts, with a scalar fallback otherwise.
    """
    xn, xw = _gl_nodes(k)
    gx = ((np.arange(bx)[:, None] + xn) / bx).ravel()  # bx*k nodes
    gy = ((np.arange(by)[:, None] + xn) / by).ravel()
    try:
        vals = np.asarray(density(gx[:, None], gy[None, :]), dtype=float)
        if vals.shape != (bx * k, by * k):
            raise TypeError
    except Exception:
        vals = np.asarray([[density(x, y) for y in gy] for x in gx])
    w2 = np.outer(xw, xw) / (bx * by)
    blocks = vals.reshape(bx, k, by, k)
    return np.einsum("ikjl,kl->ij", blocks, w2)


def chi2_against_density(samples, density, bins=(5, 5),
                         alpha: float = ALPHA) -> TestReport:
    """Pearson chi-square of (x, y) samples against a density on the
    unit square.

    Expected bin masses come from per-bin quadrature of ``density``;
    the density must integrate to 1 within 1e-6 over the square.  Bins
    whose expected count falls below 5 are pooled (smallest first) into
    a single rest bin so every cell of the test is populated; dof is
    the final bin count minus one.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("chi2_against_density: samples must be (n, 2)")
    n = len(pts)
    bx, by = bins
    masses = _bin_masses(density, bx, by)
    total = float(masses.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError("chi2_against_density: density mass is "
                         f"{total:.8f}, not 1 within 1e-6")
    masses = masses / total  # remove the <=1e-6 quadrature residue
    ix = np.minimum((pts[:, 0] * bx).astype(int), bx - 1)
    iy = np.minimum((pts[:, 1] * by).astype(int), by - 1)
    counts = np.zeros((bx, by))
    np.add.at(counts, (ix, iy), 1.0)
    exp = (n * masses).ravel()
    obs = counts.ravel()
    order = np.argsort(exp)
    exp, obs = exp[order], obs[order]
    # pool the two smallest bins until every remaining bin expects >= 5
    pooled = 0
    while len(exp) > 1 and exp[0] < 5.0:
        exp = np.concatenate([[exp[0] + exp[1]], exp[2:]])
        obs = np.concatenate([[obs[0] + obs[1]], obs[2:]])
        order = np.argsort(exp)
        exp, obs = exp[order], obs[order]
        pooled += 1
    dof = len(exp) - 1
    if dof == 0:
        return TestReport("chi2_density", 0.0, 1.0, n, True,
                          {"alpha": alpha, "bins": [bx, by], "dof": 0,
                           "note": "single bin after pooling: "
                                   "not applicable"})
    stat = float(np.sum((obs - exp) ** 2 / exp))
    p = float(sp.chdtrc(dof, stat))
    return TestReport("chi2_density", stat, p, n, p >= alpha,
                      {"alpha": alpha, "bins": [bx, by], "dof": dof,
                       "pooled": pooled})


# ------------------------------------------------- summary estimators


def qv_slope(d) -> float:
    """Realized-variance slope of a driver: least squares through the
    origin of cumulative sum((dW)^2) against time.

    Accepts a DrivingPath or a (times, W) pair; needs at least 100
    increments and a nonzero realized variance.
    """
    if isinstance(d, tuple):
        times, w = (np.asarray(a, dtype=float) for a in d)
    else:
        times, w = d.times, d.W
    if len(times) < 101:
        raise ValueError("qv_slope: need at least 100 increments")
    cum = np.cumsum(np.diff(w) ** 2)
    if cum[-1] <= 0.0:
        raise ValueError("qv_slope: zero realized variance")
    t = times[1:] - times[0]
    return float((cum @ t) / (t @ t))


def mc_mean_ci(values) -> tuple[float, float]:
    """Sample mean with 95% Student-t half-width; needs >= 30 values."""
    v = np.asarray(values, dtype=float)
    if len(v) < 30:
        raise ValueError("mc_mean_ci: need at least 30 values")
    m = float(v.mean())
    s = float(v.std(ddof=1))
    tq = float(sp.stdtrit(len(v) - 1, 0.975))
    return m, tq * s / math.sqrt(len(v))
