"""Shared generators and checks for the test suite."""

import math

import numpy as np
from scipy import integrate, stats

from shapemle.data import Kind, Setting, ingest
from shapemle.spline import SplineParams, evaluate

SETTINGS = {
    "1": Setting.log_concave(),
    "2a": Setting.gauss(),
    "2b": Setting.gamma(2.5, 1.5),
}


def log_ref_density(setting, x):
    if setting.kind is Kind.LOG_CONCAVE:
        return 0.0
    if setting.kind is Kind.TAIL_GAUSS:
        return stats.norm.logpdf(x)
    return stats.gamma.logpdf(x, setting.alpha, scale=1 / setting.beta)


def model_range(params):
    if params.kind is Kind.LOG_CONCAVE:
        return float(params.tau[0]), float(params.tau[-1])
    if params.kind is Kind.TAIL_GAUSS:
        return -60.0, 60.0
    return 0.0, 600.0 / params.setting.beta


def quad_model(params, f, extra=()):
    """``int f exp(theta) dM`` by adaptive quadrature on the model's pieces."""
    lo, hi = model_range(params)
    pts = sorted({p for p in list(params.tau) + list(extra) if lo < p < hi})
    # combine exponents before exp so extreme tails neither overflow nor underflow early
    g = lambda x: f(x) * math.exp(evaluate(params, x) + log_ref_density(params.setting, x))
    edges = [lo] + pts + [hi]
    return sum(
        integrate.quad(g, a, b, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )


def rand_params(setting, rng, max_knots=3):
    """Random feasible spline for ``setting`` with at most ``max_knots`` kinks."""
    k = setting.kind
    m = int(rng.integers(0, max_knots + 1))
    if k is Kind.LOG_CONCAVE:
        t = np.sort(rng.uniform(-2, 2, m + 2))
        s = np.sort(rng.normal(size=m + 1))[::-1]
        v = rng.normal() + np.concatenate(([0.0], np.cumsum(s * np.diff(t))))
        return SplineParams(setting, t, v)
    if k is Kind.TAIL_GAUSS:
        t = np.sort(rng.uniform(-2, 2, m))
        if m == 0:
            return SplineParams(setting, t, rng.normal(size=2))
        s = np.sort(rng.normal(size=m + 1))
        v = [rng.normal()]
        for j in range(m - 1):
            v.append(v[-1] + s[j + 1] * (t[j + 1] - t[j]))
        return SplineParams(setting, t, np.r_[s[0], v, s[-1]])
    b = setting.beta
    t = np.sort(rng.uniform(0, 4, m))
    if m and rng.random() < 0.3:
        t[0] = 0.0
    if m == 0:
        return SplineParams(setting, t, [rng.normal()])
    s = np.sort(rng.uniform(0, 0.9 * b, m))
    v = [rng.normal()]
    for j in range(m - 1):
        v.append(v[-1] + s[j] * (t[j + 1] - t[j]))
    return SplineParams(setting, t, np.r_[v, s[-1]])


def rand_sample(setting, rng, n, lo=None, hi=None, weighted=True):
    """Random weighted sample inside a range suitable for ``setting``."""
    if lo is None:
        lo, hi = {Kind.LOG_CONCAVE: (-2, 2), Kind.TAIL_GAUSS: (-3, 3), Kind.TAIL_GAMMA: (0.01, 5)}[setting.kind]
    x = np.sort(rng.uniform(lo, hi, n))
    w = rng.random(n) + 0.05 if weighted else np.ones(n)
    return ingest(zip(x, w))


def check_fit_invariants(sample, result, mean_tol=1e-6, mass_tol=1e-8):
    """Structural properties every converged fit must have.

    Unit mass, the mean equation (log-concave and Gauss tail), slope
    monotonicity and knot placement, a nondecreasing objective trace.
    Returns a list of violated properties (empty when all hold).
    """
    from shapemle.objective import mean as model_mean
    from shapemle.spline import integral

    bad = []
    p = result.params
    x = sample.points
    total = integral(p)
    if not abs(total - 1) <= mass_tol:
        bad.append(f"mass {total!r}")
    if p.kind is not Kind.TAIL_GAMMA and not abs(model_mean(p) - sample.mean) <= mean_tol:
        bad.append(f"mean residual {model_mean(p) - sample.mean!r}")
    trace = [t[1] for t in result.trace]
    if np.any(np.diff(trace) < -1e-12):
        bad.append("objective trace decreases")
    d = p.dset()
    if p.kind is Kind.LOG_CONCAVE:
        s = p.slopes()
        if p.tau[0] != x[0] or p.tau[-1] != x[-1] or not np.all(np.isin(p.tau, x)):
            bad.append("log-concave knots are not sample points spanning the data")
        if np.any(np.diff(s) >= 0):
            bad.append("log-concave slopes not strictly decreasing")
        return bad
    s = p.slopes()
    if p.kind is Kind.TAIL_GAMMA and p.m and p.tau[0] > 0:
        s = s[1:]  # constant head on [0, tau_1]
    if np.any(np.diff(s) <= 0):
        bad.append("slopes not strictly increasing")
    if p.kind is Kind.TAIL_GAMMA and d.size and np.any(s <= 0):
        bad.append("Gamma-tail slopes not positive")
    inner = d[d > 0] if p.kind is Kind.TAIL_GAMMA else d
    if np.any(inner < x[0]) or np.any(inner > x[-1]):
        bad.append("knot outside the data range")
    between = np.searchsorted(x, d[1:], side="left") - np.searchsorted(x, d[:-1], side="right")
    if np.any(between == 0):
        bad.append("two knots without a data point between them")
    return bad
