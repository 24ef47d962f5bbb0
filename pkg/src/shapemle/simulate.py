"""Random samples from fitted and synthetic models.

All samplers draw from an :class:`RngStream`, a counter-based Philox
generator keyed by ``(seed, stream)`` so that replications never share
random numbers.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sc

from .data import Kind
from .errors import InvalidEnvelope, InvalidInput
from .measures import measure_for
from .spline import SplineParams, evaluate, integral, pieces, _tail_args

__all__ = [
    "RngStream",
    "gauss_sample",
    "sample_piecewise_logaffine",
    "simulate_2a",
    "simulate_2b",
    "example_2b",
]


class RngStream:
    """Deterministic Philox stream identified by ``(seed, stream)``."""

    def __init__(self, seed: int = 0, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self.gen = np.random.Generator(np.random.Philox(ss))

    def fork(self, stream: int) -> "RngStream":
        """Independent stream with the same seed."""
        return RngStream(self.seed, stream)

    def uniform(self, size=None):
        return self.gen.random(size)

    def normal(self, size=None):
        return self.gen.standard_normal(size)

    def gamma(self, shape, size=None):
        return self.gen.standard_gamma(shape, size)


def _check_normalized(params: SplineParams, tol=1e-8):
    total = integral(params)
    if not (math.isfinite(total) and abs(total - 1) <= tol):
        raise InvalidInput(f"model is not normalized (integral {total!r})")


def gauss_sample(n: int, mu: float, sigma: float, rng: RngStream) -> np.ndarray:
    """``n`` draws from ``N(mu, sigma^2)``."""
    return mu + sigma * rng.normal(n)


def _choose_pieces(masses, n, rng):
    cum = np.cumsum(masses)
    u = rng.uniform(n) * cum[-1]
    return np.minimum(np.searchsorted(cum, u, side="right"), masses.size - 1)


def _exp_segment(u, a, b, k):
    """Inverse CDF of the density proportional to ``exp(k x)`` on ``[a, b]``."""
    D = b - a
    kD = k * D
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        small = np.abs(kD) < 1e-8
        pos = b + np.log(u + (1 - u) * np.exp(-kD)) / k
        neg = a + np.log1p(u * np.expm1(kD)) / k
        x = np.where(small, a + u * D, np.where(k > 0, pos, neg))
    return np.clip(x, a, b)


def sample_piecewise_logaffine(n: int, theta: SplineParams, rng: RngStream) -> np.ndarray:
    """Exact draws from a normalized log-concave model ``exp(theta)`` on ``[tau_1, tau_m]``.

    A segment is chosen with probability equal to its mass and the draw
    is completed by inverting the exponential CDF within the segment.
    """
    if theta.kind is not Kind.LOG_CONCAVE:
        raise InvalidInput("sample_piecewise_logaffine needs a log-concave model")
    _check_normalized(theta)
    meas = measure_for(theta.setting)
    t, v = theta.tau, theta.theta
    a, b = t[:-1], t[1:]
    masses = meas.seg((0, 0), v[:-1], v[1:], a, b)
    j = _choose_pieces(masses, n, rng)
    u = rng.uniform(n)
    k = (v[1:] - v[:-1]) / (b - a)
    return _exp_segment(u, a[j], b[j], k[j])


def simulate_2a(n: int, theta: SplineParams, rng: RngStream) -> np.ndarray:
    """Exact draws from ``exp(theta) dN(0, 1)`` for a Gauss-tail model.

    On a piece where ``theta`` has slope ``s`` the law is ``N(s, 1)``
    restricted to the piece. A piece is chosen by its exact mass and the
    draw is made by inverting the truncated normal CDF.
    """
    if theta.kind is not Kind.TAIL_GAUSS:
        raise InvalidInput("simulate_2a needs a Gauss-tail model")
    total = integral(theta)
    if not math.isfinite(total):
        raise InvalidEnvelope("model is not integrable")
    _check_normalized(theta)
    meas = measure_for(theta.setting)
    pc = pieces(theta)
    th = theta.theta
    lo, hi, sl, ms = [], [], [], []
    if pc.seg_a.size:
        va, vb = th[pc.seg_ia], th[pc.seg_ib]
        lo.append(pc.seg_a)
        hi.append(pc.seg_b)
        sl.append((vb - va) / (pc.seg_b - pc.seg_a))
        ms.append(meas.seg((0, 0), va, vb, pc.seg_a, pc.seg_b))
    v, s, c = _tail_args(th, pc.left)
    lo.append([-np.inf]); hi.append([c]); sl.append([s]); ms.append([meas.left(0, v, s, c)])
    v, s, c = _tail_args(th, pc.right)
    lo.append([c]); hi.append([np.inf]); sl.append([s]); ms.append([meas.right(0, v, s, c)])
    lo, hi, sl, ms = (np.concatenate([np.atleast_1d(np.asarray(z, float)) for z in w])
                      for w in (lo, hi, sl, ms))
    j = _choose_pieces(ms, n, rng)
    u = rng.uniform(n)
    za, zb, s = lo[j] - sl[j], hi[j] - sl[j], sl[j]
    # invert on the side with the smaller tail mass for accuracy
    right = za > 0
    out = np.empty(n)
    pa, pb = sc.ndtr(za), sc.ndtr(zb)
    qa, qb = sc.ndtr(-za), sc.ndtr(-zb)
    le = ~right
    out[le] = sc.ndtri(pa[le] + u[le] * (pb[le] - pa[le]))
    out[right] = -sc.ndtri(qa[right] - u[right] * (qa[right] - qb[right]))
    return np.clip(out + s, lo[j], hi[j])


def _log_ratio_2b(params: SplineParams, y):
    # theta(y) - theta(0) - gamma y = -sum_j beta_j min(y, tau_j); exactly 0 without kinks
    beta = params.kinks()
    t = params.dset()
    if t.size == 0:
        return np.zeros_like(y)
    return -(np.minimum(y[:, None], t[None, :]) @ beta)


def simulate_2b(n: int, theta: SplineParams, alpha: float, beta: float, rng: RngStream,
                return_proposals: bool = False):
    """Acceptance-rejection draws from ``exp(theta) dGamma(alpha, beta)``.

    Proposals ``Y ~ Gamma(alpha, beta - gamma)`` with ``gamma`` the
    final slope of ``theta`` are accepted when
    ``U <= exp(theta(Y) - theta(0) - gamma Y)``; the ratio is
    nonincreasing because ``theta`` is convex. The acceptance
    probability is ``exp(-theta(0)) (1 - gamma/beta)^alpha``; a linear
    ``theta`` is accepted with probability one.

    Raises
    ------
    InvalidEnvelope
        If ``gamma >= beta``.
    """
    if theta.kind is not Kind.TAIL_GAMMA:
        raise InvalidInput("simulate_2b needs a Gamma-tail model")
    gamma = float(theta.slopes()[-1])
    if not gamma < beta:
        raise InvalidEnvelope(f"final slope {gamma} must be below beta = {beta}")
    _check_normalized(theta)
    rate = beta - gamma
    out = np.empty(n)
    filled = 0
    proposals = 0
    p_acc = math.exp(-float(evaluate(theta, 0.0))) * (1 - gamma / beta) ** alpha
    p_acc = min(max(p_acc, 1e-3), 1.0)
    while filled < n:
        need = n - filled
        m = int(need / p_acc * 1.1) + 16
        y = rng.gamma(alpha, m) / rate
        u = rng.uniform(m)
        ok = u <= np.exp(_log_ratio_2b(theta, y))
        acc = y[ok]
        if acc.size > need:
            # count proposals only up to the last accepted draw that is kept
            last = np.flatnonzero(ok)[need - 1]
            proposals += last + 1
            acc = acc[:need]
        else:
            proposals += m
        out[filled:filled + acc.size] = acc
        filled += acc.size
    return (out, proposals) if return_proposals else out


def example_2b() -> SplineParams:
    """Normalized convex increasing log-ratio used in the Gamma(1, 1) replication.

    ``0.25 x + 0.25 (x-2)^+ + 0.1 (x-4)^+ + 0.2 (x-6)^+`` minus its log
    normalizing constant.
    """
    from .data import Setting
    from .spline import normalize

    setting = Setting.gamma(1.0, 1.0)
    t = np.array([0.0, 2.0, 4.0, 6.0])
    raw = 0.25 * t + 0.25 * np.maximum(t - 2, 0) + 0.1 * np.maximum(t - 4, 0) + 0.2 * np.maximum(t - 6, 0)
    return normalize(SplineParams(setting, t, np.concatenate((raw, [0.8]))))
