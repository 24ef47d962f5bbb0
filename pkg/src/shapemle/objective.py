"""Log-likelihood, its derivatives, the fitted distribution and kink diagnostics.

For a spline ``theta`` with coefficient vector ``c`` the objective is

    L(c) = sum_i w_i theta(x_i) - int exp(theta) dM + 1,

which is maximized by a probability density ``exp(theta)`` relative to
``M``. The integral decomposes into segment and tail pieces (see
:func:`shapemle.spline.pieces`); its derivatives in the value and slope
coefficients are again piece integrals with polynomial weights, so the
negative Hessian is tridiagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Kind, WeightedSample
from .measures import measure_for
from .spline import (
    ActiveModel,
    SplineParams,
    _tail_args,
    classify,
    collapsed_weights,
    evaluate,
    pieces,
)


def _params(model) -> SplineParams:
    return model.params if isinstance(model, ActiveModel) else model


@dataclass(frozen=True, eq=False)
class ObjectiveEval:
    """Value, gradient and tridiagonal negative Hessian of the objective.

    ``diag`` and ``off`` hold the main and first off-diagonal of the
    negative Hessian. ``feasible`` is false when the integral is infinite.
    """

    value: float
    gradient: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    feasible: bool

    @property
    def neg_hessian(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


# ----------------------------------------------------------- core sums


def _integrals(params: SplineParams, full: bool):
    """Integral of ``exp(theta)`` and, if ``full``, its first two derivatives."""
    meas = measure_for(params.setting)
    pc = pieces(params)
    th = params.theta
    p = th.size
    total = 0.0
    grad = np.zeros(p)
    diag = np.zeros(p)
    off = np.zeros(max(p - 1, 0))
    if pc.seg_a.size:
        va, vb = th[pc.seg_ia], th[pc.seg_ib]
        a, b = pc.seg_a, pc.seg_b
        if full:
            s10 = meas.seg((1, 0), va, vb, a, b)
            s01 = meas.seg((0, 1), va, vb, a, b)
            total += float(np.sum(s10 + s01))
            np.add.at(grad, pc.seg_ia, s10)
            np.add.at(grad, pc.seg_ib, s01)
            np.add.at(diag, pc.seg_ia, meas.seg((2, 0), va, vb, a, b))
            np.add.at(diag, pc.seg_ib, meas.seg((0, 2), va, vb, a, b))
            np.add.at(off, pc.seg_ia, meas.seg((1, 1), va, vb, a, b))
        else:
            total += float(np.sum(meas.seg((0, 0), va, vb, a, b)))
    for tail, side in ((pc.left, -1.0), (pc.right, 1.0)):
        if tail is None:
            continue
        c, iv, is_ = tail
        v, s, _ = _tail_args(th, tail)
        fn = meas.left if side < 0 else meas.right
        k0 = float(fn(0, v, s, c))
        total += k0
        if full:
            grad[iv] += k0
            diag[iv] += k0
            if is_ is not None:
                k1 = side * float(fn(1, v, s, c))
                grad[is_] += k1
                diag[is_] += float(fn(2, v, s, c))
                off[min(iv, is_)] += k1
    if not math.isfinite(total):
        total = math.inf
    return total, grad, diag, off


class Objective:
    """Objective of one sample in one setting, with cached collapsed weights."""

    def __init__(self, sample: WeightedSample, setting):
        self.sample = sample
        self.setting = setting
        self._wcache = {}

    def weights(self, tau) -> np.ndarray:
        key = np.asarray(tau, float).tobytes()
        w = self._wcache.get(key)
        if w is None:
            if len(self._wcache) > 32:
                self._wcache.clear()
            w = collapsed_weights(self.sample, tau, self.setting)
            self._wcache[key] = w
        return w

    def loglik(self, model) -> float:
        params = _params(model)
        total = _integrals(params, False)[0]
        if not math.isfinite(total):
            return -math.inf
        return float(self.weights(params.tau) @ params.theta) - total + 1.0

    def increase(self, model, other) -> float:
        """``L(other) - L(model)`` for two splines on the same knots.

        Computed from coefficient differences so that tiny increases are
        not swamped by rounding of the absolute values.
        """
        p0, p1 = _params(model), _params(other)
        t1 = _integrals(p1, False)[0]
        if not math.isfinite(t1):
            return -math.inf
        t0 = _integrals(p0, False)[0]
        return float(self.weights(p0.tau) @ (p1.theta - p0.theta)) - (t1 - t0)

    def full(self, model) -> ObjectiveEval:
        params = _params(model)
        total, dI, diag, off = _integrals(params, True)
        if not math.isfinite(total):
            p = params.theta.size
            return ObjectiveEval(-math.inf, np.full(p, np.nan), diag, off, False)
        w = self.weights(params.tau)
        value = float(w @ params.theta) - total + 1.0
        return ObjectiveEval(value, w - dI, diag, off, True)


def loglik(sample: WeightedSample, model) -> float:
    """``L(theta)``; ``-inf`` when ``exp(theta)`` is not integrable."""
    return Objective(sample, _params(model).setting).loglik(model)


def eval_full(sample: WeightedSample, model) -> ObjectiveEval:
    """Objective value, gradient and negative Hessian."""
    return Objective(sample, _params(model).setting).full(model)


# ------------------------------------------------- distribution functions


def _piece_moments(params: SplineParams):
    """Per-piece mass and first moment, in left-to-right order.

    Returns ``(kinds, M0, M1)`` where ``kinds`` labels each piece
    ``'L'``, ``'S'`` or ``'R'``.
    """
    meas = measure_for(params.setting)
    pc = pieces(params)
    th = params.theta
    kinds, m0, m1 = [], [], []
    if pc.left is not None:
        v, s, c = _tail_args(th, pc.left)
        l0, l1 = float(meas.left(0, v, s, c)), float(meas.left(1, v, s, c))
        kinds.append("L")
        m0.append(l0)
        m1.append(c * l0 - l1)
    if pc.seg_a.size:
        va, vb, a, b = th[pc.seg_ia], th[pc.seg_ib], pc.seg_a, pc.seg_b
        s10 = meas.seg((1, 0), va, vb, a, b)
        s01 = meas.seg((0, 1), va, vb, a, b)
        kinds += ["S"] * a.size
        m0 += list(s10 + s01)
        m1 += list(a * (s10 + s01) + (b - a) * s01)
    if pc.right is not None:
        v, s, c = _tail_args(th, pc.right)
        r0, r1 = float(meas.right(0, v, s, c)), float(meas.right(1, v, s, c))
        kinds.append("R")
        m0.append(r0)
        m1.append(c * r0 + r1)
    return kinds, np.array(m0), np.array(m1)


def total_mass(model) -> float:
    """``int exp(theta(x)) M(dx)``."""
    return float(_piece_moments(_params(model))[1].sum())


def mean(model) -> float:
    """``int x exp(theta(x)) M(dx)``."""
    return float(_piece_moments(_params(model))[2].sum())


def _locate(params: SplineParams, x):
    """Piece index of each ``x`` (``-1`` left of the domain, ``P`` right of it)."""
    pc = pieces(params)
    x = np.asarray(x, float)
    has_left = pc.left is not None
    nseg = pc.seg_a.size
    lo = measure_for(params.setting).lo
    if params.kind is Kind.LOG_CONCAVE:
        t = params.tau
        j = np.clip(np.searchsorted(t, x, side="right") - 1, 0, t.size - 2)
        return np.where(x < t[0], -1, np.where(x > t[-1], nseg, j))
    edges = []
    if has_left:
        edges.append(pc.left[0])
    if nseg:
        edges += list(pc.seg_b)
    # piece i covers (edges[i-1], edges[i]]
    idx = np.searchsorted(np.array(edges), x, side="left")
    if pc.left is None and pc.right is not None and not nseg:
        idx = np.zeros(x.shape, int)
    return np.where(x < lo, -1, idx)


def cdf(model, x):
    """``int_{(-inf, x]} exp(theta) dM``, the fitted distribution function."""
    params = _params(model)
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, float))
    meas = measure_for(params.setting)
    pc = pieces(params)
    th = params.theta
    kinds, m0, _ = _piece_moments(params)
    before = np.concatenate(([0.0], np.cumsum(m0)))
    total = before[-1]
    P = len(kinds)
    idx = _locate(params, x)
    out = np.empty(x.shape)
    out[idx < 0] = 0.0
    out[idx >= P] = total
    tx = evaluate(params, x)
    nleft = 1 if pc.left is not None else 0
    for i, kind in enumerate(kinds):
        sel = idx == i
        if not sel.any():
            continue
        xs, vs = x[sel], tx[sel]
        if kind == "L":
            v, s, c = _tail_args(th, pc.left)
            out[sel] = meas.left(0, vs, s, xs)
        elif kind == "S":
            j = i - nleft
            a = pc.seg_a[j]
            va = th[pc.seg_ia[j]]
            inner = xs > a
            val = np.zeros(xs.shape)
            if inner.any():
                val[inner] = meas.seg((0, 0), va, vs[inner], a, xs[inner])
            out[sel] = before[i] + val
        else:
            v, s, c = _tail_args(th, pc.right)
            out[sel] = total - meas.right(0, vs, s, xs)
    return float(out[0]) if scalar else out


def upper_partial(model, t):
    """``int (x - t)^+ exp(theta(x)) M(dx)``."""
    params = _params(model)
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, float))
    meas = measure_for(params.setting)
    pc = pieces(params)
    th = params.theta
    kinds, m0, m1 = _piece_moments(params)
    P = len(kinds)
    # suffix sums of int (x - t) over pieces after the current one
    s0 = np.concatenate((np.cumsum(m0[::-1])[::-1], [0.0]))
    s1 = np.concatenate((np.cumsum(m1[::-1])[::-1], [0.0]))
    idx = _locate(params, t)
    out = np.empty(t.shape)
    left_of = idx < 0
    out[left_of] = s1[0] - t[left_of] * s0[0]
    out[idx >= P] = 0.0
    tx = evaluate(params, t)
    nleft = 1 if pc.left is not None else 0
    for i, kind in enumerate(kinds):
        sel = idx == i
        if not sel.any():
            continue
        ts, vs = t[sel], tx[sel]
        later = s1[i + 1] - ts * s0[i + 1]
        if kind == "L":
            v, s, c = _tail_args(th, pc.left)
            part = m1[i] - ts * m0[i] + meas.left(1, vs, s, ts)
        elif kind == "S":
            j = i - nleft
            b = pc.seg_b[j]
            vb = th[pc.seg_ib[j]]
            part = np.zeros(ts.shape)
            inner = ts < b
            if inner.any():
                part[inner] = (b - ts[inner]) * meas.seg((0, 1), vs[inner], vb, ts[inner], b)
        else:
            v, s, c = _tail_args(th, pc.right)
            part = meas.right(1, vs, s, ts)
        out[sel] = part + later
    return float(out[0]) if scalar else out


def directional_kink(sample: WeightedSample, model, t):
    """Non-localized ``DL(theta, xi (. - t)^+)`` at points ``t``."""
    params = _params(model)
    xi = params.setting.xi
    return xi * (sample.upper_partial(t) - upper_partial(params, t))


# ------------------------------------------------------ localized kinks


@dataclass(frozen=True)
class KinkEval:
    """Localized directional derivative at a batch of points.

    ``h``: ``DL(theta, V_{tau,theta})``; ``slope``: its right derivative;
    ``energy``: ``int V_{tau,theta}^2 exp(theta) dM``.
    """

    h: np.ndarray
    slope: np.ndarray
    energy: np.ndarray


def kink_eval(sample: WeightedSample, model, tau) -> KinkEval:
    """Vectorized ``h_theta``, its right derivative and the kink energy."""
    params = _params(model)
    xi = params.setting.xi
    meas = measure_for(params.setting)
    tau = np.atleast_1d(np.asarray(tau, float))
    case, k = classify(params, tau)
    t = params.tau
    vals = params.values()
    slopes = params.slopes()
    ts = evaluate(params, tau)
    h = np.zeros(tau.shape)
    hp = np.zeros(tau.shape)
    en = np.zeros(tau.shape)
    S = sample

    sel = case == 1
    if sel.any():
        x, th = tau[sel], ts[sel]
        j = k[sel] - 1
        a, b = t[j], t[j + 1]
        va, vb = vals[j], vals[j + 1]
        D = b - a
        c = (x - a) * (b - x) / D
        left_mass = S.mass(a, x)
        data = ((b - x) / D * (S.moment(a, x) - a * left_mass)
                + (x - a) / D * (b * S.mass(x, b) - S.moment(x, b)))
        s01 = meas.seg((0, 1), va, th, a, x)
        s10 = meas.seg((1, 0), th, vb, x, b)
        model_part = c * (s01 + s10)
        h[sel] = -xi * (data - model_part)
        j10_data = (b * S.mass(a, b) - S.moment(a, b)) / D
        full10 = meas.seg((1, 0), va, vb, a, b)
        hp[sel] = xi * (left_mass - j10_data - (meas.seg((0, 0), va, th, a, x)) + full10)
        en[sel] = c * c * (meas.seg((0, 2), va, th, a, x) + meas.seg((2, 0), th, vb, x, b))

    sel = case == 2
    if sel.any():
        x, th = tau[sel], ts[sel]
        t1, v1 = t[0], vals[0]
        d = t1 - x
        sl = slopes[0] if params.kind is Kind.TAIL_GAUSS else 0.0
        F = S.cdf(x)
        data = -d * F - (t1 * S.mass(x, t1) - S.moment(x, t1))
        P_le = meas.left(0, th, sl, x)
        s10 = meas.seg((1, 0), th, v1, x, t1)
        h[sel] = data + d * (P_le + s10)
        hp[sel] = F - P_le
        s20 = meas.seg((2, 0), th, v1, x, t1)
        en[sel] = d * d * (P_le + s20)

    sel = case == 3
    if sel.any():
        x, th = tau[sel], ts[sel]
        tm, vm = t[-1], vals[-1]
        d = x - tm
        sr = slopes[-1]
        above = 1.0 - S.cdf(x)
        data = -(S.moment(tm, x) - tm * S.mass(tm, x)) - d * above
        R0 = meas.right(0, th, sr, x)
        s01 = meas.seg((0, 1), vm, th, tm, x)
        h[sel] = data + d * (s01 + R0)
        hp[sel] = R0 - above
        en[sel] = d * d * (meas.seg((0, 2), vm, th, tm, x) + R0)

    sel = case == 4
    if sel.any():
        x, th = tau[sel], ts[sel]
        s = slopes[-1]
        h[sel] = S.upper_partial(x) - meas.right(1, th, s, x)
        hp[sel] = meas.right(0, th, s, x) - (1.0 - S.cdf(x))
        en[sel] = meas.right(2, th, s, x)
    return KinkEval(h, hp, en)


def h_and_slope(sample: WeightedSample, model, tau: float):
    """``h_theta(tau) = DL(theta, V_{tau,theta})`` and ``h_theta'(tau+)``.

    Both vanish when ``tau`` is already a knot.
    """
    ev = kink_eval(sample, model, tau)
    return float(ev.h[0]), float(ev.slope[0])
