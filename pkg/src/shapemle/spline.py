"""Piecewise-linear exponents, their knots and the active constraint set.

Coefficient layouts (``m`` knots ``tau``):

======================  ==========================================
Setting                 ``theta``
======================  ==========================================
log-concave (m >= 2)    ``theta(tau_1), ..., theta(tau_m)``
Gauss tail, m >= 1      ``slope_left, theta(tau_1..tau_m), slope_right``
Gauss tail, m = 0       ``intercept, slope``
Gamma tail, m >= 1      ``theta(tau_1..tau_m), slope_right``
Gamma tail, m = 0       ``constant``
======================  ==========================================

In the log-concave setting the function is ``-inf`` outside
``[tau_1, tau_m]``; in the Gamma setting it is constant on
``[0, tau_1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Kind, Setting, WeightedSample
from .errors import InvalidInput, NonIntegrable
from .measures import measure_for

COLLAPSE_RTOL = 1e-12


# ------------------------------------------------------------------ params


@dataclass(frozen=True, eq=False)
class SplineParams:
    """Knots and coefficients of a piecewise-linear exponent."""

    setting: Setting
    tau: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        t = np.array(self.tau, dtype=float).reshape(-1)
        c = np.array(self.theta, dtype=float).reshape(-1)
        kind = self.setting.kind
        m = t.size
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise InvalidInput("knots must be finite and strictly increasing")
        if not np.all(np.isfinite(c)):
            raise InvalidInput("coefficients must be finite")
        if kind is Kind.LOG_CONCAVE:
            if m < 2:
                raise InvalidInput("log-concave splines need at least two knots")
            want = m
        elif kind is Kind.TAIL_GAUSS:
            want = m + 2 if m else 2
        else:
            want = m + 1
            if m and t[0] < 0:
                raise InvalidInput("Gamma-setting knots must be >= 0")
        if c.size != want:
            raise InvalidInput(f"expected {want} coefficients for {m} knots, got {c.size}")
        t.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "tau", t)
        object.__setattr__(self, "theta", c)

    @property
    def m(self) -> int:
        return self.tau.size

    @property
    def kind(self) -> Kind:
        return self.setting.kind

    def with_theta(self, theta) -> "SplineParams":
        return SplineParams(self.setting, self.tau, theta)

    def values(self) -> np.ndarray:
        """``theta(tau_j)`` for every knot."""
        kind, c, m = self.kind, self.theta, self.m
        if kind is Kind.LOG_CONCAVE:
            return c.copy()
        if kind is Kind.TAIL_GAUSS:
            return c[1:-1].copy() if m else np.empty(0)
        return c[:m].copy()

    def slopes(self) -> np.ndarray:
        """Slopes of all linear pieces from left to right.

        Includes the tail slopes in the tail settings (the flat part of
        the Gamma setting counts as slope 0 when ``tau_1 > 0``).
        """
        kind, c, m, t = self.kind, self.theta, self.m, self.tau
        if kind is Kind.TAIL_GAUSS and m == 0:
            return np.array([c[1]])
        if kind is Kind.TAIL_GAMMA and m == 0:
            return np.array([0.0])
        v = self.values()
        inner = np.diff(v) / np.diff(t)
        if kind is Kind.LOG_CONCAVE:
            return inner
        if kind is Kind.TAIL_GAUSS:
            return np.concatenate(([c[0]], inner, [c[-1]]))
        head = [0.0] if t[0] > 0 else []
        return np.concatenate((head, inner, [c[-1]]))

    def knot_slopes(self):
        """Left and right slopes at each knot that can carry a kink."""
        kind, m = self.kind, self.m
        s = self.slopes()
        if kind is Kind.LOG_CONCAVE or kind is Kind.TAIL_GAUSS:
            # interior knots (log-concave) or all knots with both tails (Gauss)
            return s[:-1], s[1:]
        if m == 0:
            return np.empty(0), np.empty(0)
        if self.tau[0] > 0:
            return s[:-1], s[1:]
        return np.concatenate(([0.0], s[:-1])), s

    def dset(self) -> np.ndarray:
        """Knots that can carry a kink (all but the log-concave end points)."""
        if self.kind is Kind.LOG_CONCAVE:
            return self.tau[1:-1]
        return self.tau

    def kinks(self) -> np.ndarray:
        """``beta_tau = xi (theta'(tau+) - theta'(tau-))`` for every element of ``dset``."""
        left, right = self.knot_slopes()
        return self.setting.xi * (right - left)

    def in_theta(self, tol: float = 0.0) -> bool:
        """Shape constraint (concave, convex, convex and isotonic) holds."""
        return bool(np.all(self.kinks() >= -tol))

    def integrable(self) -> bool:
        limit = measure_for(self.setting).slope_limit
        return bool(self.slopes()[-1] < limit) if self.kind is not Kind.LOG_CONCAVE else True

    def to_record(self) -> dict:
        return {
            "setting": self.setting.label,
            "alpha": self.setting.alpha,
            "beta": self.setting.beta,
            "knots": [float(v) for v in self.tau],
            "theta": [float(v) for v in self.theta],
            "slopes": [float(v) for v in self.slopes()],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SplineParams":
        label = rec["setting"]
        if label == "2b":
            setting = Setting.gamma(rec.get("alpha", 1.0), rec.get("beta", 1.0))
        else:
            setting = Setting.from_label(label)
        return cls(setting, np.asarray(rec["knots"], float), np.asarray(rec["theta"], float))


@dataclass(frozen=True, eq=False)
class ActiveModel:
    """A spline together with its set of deactivated constraints.

    ``dset`` is exactly the set of kink-capable knots of ``params``. It
    is changed only combinatorially (knot insertion and removal), never
    by re-deriving kinks from floating point slopes.
    """

    params: SplineParams

    @property
    def dset(self) -> np.ndarray:
        return self.params.dset()

    @property
    def setting(self) -> Setting:
        return self.params.setting

    @property
    def tau(self) -> np.ndarray:
        return self.params.tau

    @property
    def theta(self) -> np.ndarray:
        return self.params.theta


def affine(setting: Setting, intercept: float, slope: float) -> SplineParams:
    """Knot-free Gauss-tail function ``intercept + slope * x``."""
    return SplineParams(setting, np.empty(0), np.array([intercept, slope]))


# ------------------------------------------------------------------ basis


def basis(params: SplineParams, x):
    """Sparse rows of the evaluation matrix.

    Returns index arrays ``i0, i1`` and coefficient arrays ``c0, c1``
    with ``theta(x) = c0 * theta[i0] + c1 * theta[i1]``. Log-concave
    points outside ``[tau_1, tau_m]`` are flagged by ``outside``.
    """
    x = np.asarray(x, float)
    kind, t, m = params.kind, params.tau, params.m
    i0 = np.zeros(x.shape, int)
    i1 = np.zeros(x.shape, int)
    c0 = np.zeros(x.shape)
    c1 = np.zeros(x.shape)
    outside = np.zeros(x.shape, bool)
    if kind is Kind.TAIL_GAUSS and m == 0:
        i0[...] = 0
        i1[...] = 1
        c0[...] = 1.0
        c1[...] = x
        return i0, i1, c0, c1, outside
    if kind is Kind.TAIL_GAMMA and m == 0:
        c0[...] = 1.0
        return i0, i1, c0, c1, outside
    off = 1 if kind is Kind.TAIL_GAUSS else 0
    k = np.searchsorted(t, x, side="right")  # knots <= x
    inner = (k >= 1) & (k < m)
    j = np.clip(k - 1, 0, max(m - 2, 0))
    if m >= 2:
        d = t[j + 1] - t[j]
        u = (x - t[j]) / d
        i0[inner] = (j + off)[inner]
        i1[inner] = (j + 1 + off)[inner]
        c0[inner] = 1 - u[inner]
        c1[inner] = u[inner]
    left = k == 0
    right = k >= m
    if kind is Kind.LOG_CONCAVE:
        at_end = x == t[-1]
        i0[at_end] = m - 1
        c0[at_end] = 1.0
        i1[at_end] = m - 1
        c1[at_end] = 0.0
        outside = (x < t[0]) | (x > t[-1])
        return i0, i1, c0, c1, outside
    p = params.theta.size
    if kind is Kind.TAIL_GAUSS:
        i0[left], c0[left] = off, 1.0
        i1[left], c1[left] = 0, (x - t[0])[left]
    else:
        i0[left], c0[left] = 0, 1.0
    i0[right], c0[right] = off + m - 1, 1.0
    i1[right], c1[right] = p - 1, (x - t[-1])[right]
    return i0, i1, c0, c1, outside


def evaluate(params: SplineParams, x):
    """Evaluate ``theta`` at ``x``; ``-inf`` outside the log-concave support."""
    x_arr = np.asarray(x, float)
    i0, i1, c0, c1, outside = basis(params, x_arr)
    th = params.theta
    v = c0 * th[i0] + c1 * th[i1]
    v = np.where(outside, -np.inf, v)
    return float(v) if np.ndim(x) == 0 else v


def collapsed_weights(sample: WeightedSample, tau, setting: Setting) -> np.ndarray:
    """Weights ``w~`` with ``sum_j w~_j theta_j = sum_i w_i theta(x_i)``.

    Parameters
    ----------
    sample : WeightedSample
    tau : array_like
        Knot vector valid for ``setting``.
    setting : Setting

    Returns
    -------
    ndarray
        One weight per coefficient in the layout of ``setting``.
    """
    tau = np.asarray(tau, float)
    m = tau.size
    p = {Kind.LOG_CONCAVE: m, Kind.TAIL_GAUSS: m + 2 if m else 2, Kind.TAIL_GAMMA: m + 1}[setting.kind]
    template = SplineParams(setting, tau, np.zeros(p))
    i0, i1, c0, c1, outside = basis(template, sample.points)
    if outside.any():
        raise InvalidInput("sample points outside the knot range")
    w = sample.weights
    return np.bincount(i0, c0 * w, minlength=p) + np.bincount(i1, c1 * w, minlength=p)


# ------------------------------------------------------------------ pieces


@dataclass(frozen=True)
class Pieces:
    """Decomposition of ``int exp(theta) dM`` into elementary pieces.

    ``seg_*`` describe bounded segments by their ends and the indices of
    the coefficients holding the end values. A tail is ``(c, iv, is_)``:
    anchor point, index of ``theta(c)`` and index of the slope, or
    ``None`` for a slope fixed at zero.
    """

    seg_a: np.ndarray
    seg_b: np.ndarray
    seg_ia: np.ndarray
    seg_ib: np.ndarray
    left: Optional[tuple]
    right: Optional[tuple]


def pieces(params: SplineParams) -> Pieces:
    kind, t, m = params.kind, params.tau, params.m
    empty = np.empty(0, int)
    if kind is Kind.TAIL_GAUSS and m == 0:
        return Pieces(np.empty(0), np.empty(0), empty, empty, (0.0, 0, 1), (0.0, 0, 1))
    if kind is Kind.TAIL_GAMMA and m == 0:
        return Pieces(np.empty(0), np.empty(0), empty, empty, None, (0.0, 0, None))
    off = 1 if kind is Kind.TAIL_GAUSS else 0
    idx = np.arange(m - 1) + off
    a, b = t[:-1], t[1:]
    if kind is Kind.LOG_CONCAVE:
        return Pieces(a, b, idx, idx + 1, None, None)
    p = params.theta.size
    right = (float(t[-1]), off + m - 1, p - 1)
    if kind is Kind.TAIL_GAUSS:
        left = (float(t[0]), 1, 0)
    else:
        left = (float(t[0]), 0, None) if t[0] > 0 else None
    return Pieces(a, b, idx, idx + 1, left, right)


def _tail_args(theta, tail):
    c, iv, is_ = tail
    return theta[iv], (theta[is_] if is_ is not None else 0.0), c


def integral(params: SplineParams) -> float:
    """``int exp(theta) dM``; ``inf`` when not integrable."""
    meas = measure_for(params.setting)
    pc = pieces(params)
    th = params.theta
    total = 0.0
    if pc.seg_a.size:
        total += float(np.sum(meas.seg((0, 0), th[pc.seg_ia], th[pc.seg_ib], pc.seg_a, pc.seg_b)))
    if pc.left is not None:
        v, s, c = _tail_args(th, pc.left)
        total += float(meas.left(0, v, s, c))
    if pc.right is not None:
        v, s, c = _tail_args(th, pc.right)
        total += float(meas.right(0, v, s, c))
    return total if math.isfinite(total) else math.inf


def shift(params: SplineParams, c: float) -> SplineParams:
    """``theta + c``: shift every value coefficient, keep the slopes."""
    kind, m = params.kind, params.m
    th = params.theta.copy()
    if kind is Kind.LOG_CONCAVE:
        th += c
    elif kind is Kind.TAIL_GAUSS:
        if m:
            th[1:-1] += c
        else:
            th[0] += c
    else:
        th[: max(m, 1)] += c
    return params.with_theta(th)


def normalize(model):
    """Subtract ``log int exp(theta) dM`` so that ``exp(theta)`` is a density.

    Accepts a :class:`SplineParams` or :class:`ActiveModel` and returns the
    same type.

    Raises
    ------
    NonIntegrable
        If the integral is infinite.
    """
    params = model.params if isinstance(model, ActiveModel) else model
    total = integral(params)
    if not (math.isfinite(total) and total > 0):
        raise NonIntegrable("exp(theta) is not integrable")
    out = shift(params, -math.log(total))
    return ActiveModel(out) if isinstance(model, ActiveModel) else out


# ------------------------------------------------------------- knot edits


def insert_knots(params: SplineParams, new) -> SplineParams:
    """Same function on a refined knot set (``new`` must avoid existing knots)."""
    new = np.atleast_1d(np.asarray(new, float))
    if new.size == 0:
        return params
    kind = params.kind
    t = np.union1d(params.tau, new)
    if t.size != params.m + new.size:
        raise InvalidInput("inserted knots must be new and distinct")
    vals = evaluate(params, t)
    if kind is Kind.LOG_CONCAVE:
        if np.any(~np.isfinite(vals)):
            raise InvalidInput("log-concave knots must lie inside the support")
        return SplineParams(params.setting, t, vals)
    if kind is Kind.TAIL_GAUSS:
        s = params.slopes()
        return SplineParams(params.setting, t, np.concatenate(([s[0]], vals, [s[-1]])))
    if kind is Kind.TAIL_GAMMA and np.any(t < 0):
        raise InvalidInput("Gamma-setting knots must be >= 0")
    return SplineParams(params.setting, t, np.concatenate((vals, [params.slopes()[-1]])))


def remove_knots(params: SplineParams, drop) -> SplineParams:
    """Remove knots whose kink has collapsed to zero.

    The function changes only by the (vanishing) kink at each removed
    knot: interior values are dropped, a removed end knot passes its
    outer slope to the neighbouring segment.
    """
    drop = set(float(v) for v in np.atleast_1d(drop))
    if not drop:
        return params
    kind, t = params.kind, params.tau
    keep = np.array([v not in drop for v in t.tolist()])
    if kind is Kind.LOG_CONCAVE and (not keep[0] or not keep[-1]):
        raise InvalidInput("log-concave end knots cannot be removed")
    vals = params.values()
    s = params.slopes()
    tk, vk = t[keep], vals[keep]
    if kind is Kind.LOG_CONCAVE:
        return SplineParams(params.setting, tk, vk)
    if kind is Kind.TAIL_GAUSS:
        if tk.size == 0:
            # kinks all vanished: one affine function, average the tail slopes
            slope = 0.5 * (s[0] + s[-1])
            j = int(np.argmax(~keep))
            return affine(params.setting, vals[j] - slope * t[j], slope)
        # outer slopes: slope of the piece adjacent to the first/last kept knot
        lo = int(np.searchsorted(t, tk[0]))
        hi = int(np.searchsorted(t, tk[-1]))
        sl, sr = s[lo], s[hi + 1]
        return SplineParams(params.setting, tk, np.concatenate(([sl], vk, [sr])))
    if tk.size == 0:
        return SplineParams(params.setting, np.empty(0), np.array([vals[0]]))
    hi = int(np.searchsorted(t, tk[-1]))
    sr = s[-1] if hi == t.size - 1 else (vals[hi + 1] - vals[hi]) / (t[hi + 1] - t[hi])
    return SplineParams(params.setting, tk, np.concatenate((vk, [sr])))


def collapsed(params: SplineParams) -> np.ndarray:
    """Kink-capable knots whose kink is zero up to rounding."""
    left, right = params.knot_slopes()
    beta = params.setting.xi * (right - left)
    tol = COLLAPSE_RTOL * (1 + np.abs(left) + np.abs(right))
    return params.dset()[np.abs(beta) <= tol]


def prune(model: ActiveModel) -> ActiveModel:
    """Drop knots with numerically collapsed kinks."""
    gone = collapsed(model.params)
    return ActiveModel(remove_knots(model.params, gone)) if gone.size else model


def merge_gap_knots(params: SplineParams, x) -> SplineParams:
    """Merge runs of tail-setting kinks that no data point separates.

    Between two consecutive kinks with no observation strictly between
    them, replacing the spline by the larger of the two outer lines
    leaves every ``theta(x_i)`` unchanged and lowers ``int exp(theta) dM``,
    so the result has a strictly larger objective and one kink per run.
    Returns ``params`` itself when there is nothing to merge.
    """
    if params.kind is Kind.LOG_CONCAVE or params.m < 2:
        return params
    x = np.asarray(x, float)
    t = params.tau
    vals = params.values()
    left, right = params.knot_slopes()
    gap = np.searchsorted(x, t[1:], side="left") - np.searchsorted(x, t[:-1], side="right") == 0
    if not gap.any():
        return params
    nt, nv = [], []
    i = 0
    while i < t.size:
        j = i
        while j < t.size - 1 and gap[j]:
            j += 1
        if j == i:
            nt.append(t[i])
            nv.append(vals[i])
        else:
            sl, sr = left[i], right[j]
            tm = (vals[j] - vals[i] + sl * t[i] - sr * t[j]) / (sl - sr)
            tm = min(max(tm, t[i]), t[j])
            nt.append(tm)
            nv.append(vals[i] + sl * (tm - t[i]))
        i = j + 1
    s = params.slopes()
    if params.kind is Kind.TAIL_GAUSS:
        return SplineParams(params.setting, nt, np.concatenate(([s[0]], nv, [s[-1]])))
    return SplineParams(params.setting, nt, np.concatenate((nv, [s[-1]])))


def mutate(model: ActiveModel, proposal: SplineParams, t_o: Optional[float] = None):
    """Largest feasible step towards ``proposal`` and the surviving knots.

    Parameters
    ----------
    model : ActiveModel
        Current feasible model.
    proposal : SplineParams
        Target whose knots contain the knots of ``model``. New knots must
        carry a strictly positive kink.
    t_o : float, optional
        Step ratio; computed as the largest feasible ratio in ``(0, 1]``
        if omitted.

    Returns
    -------
    model : ActiveModel
        ``(1 - t_o) theta + t_o theta_new`` with every knot whose kink
        reaches zero at ``t_o`` removed.
    t_o : float
    """
    base = insert_knots(model.params, np.setdiff1d(proposal.tau, model.tau))
    if base.m != proposal.m or np.any(base.tau != proposal.tau):
        raise InvalidInput("proposal must refine the model's knots")
    b_old = base.kinks()
    b_new = proposal.kinks()
    fresh = ~np.isin(base.dset(), model.dset)
    if np.any(b_new[fresh] <= 0):
        raise InvalidInput("new knots of a proposal need a positive kink")
    b_old = np.where(fresh, 0.0, np.maximum(b_old, 0.0))
    neg = (b_new < 0) & ~fresh
    ratios = np.full(b_old.shape, np.inf)
    ratios[neg] = b_old[neg] / (b_old[neg] - b_new[neg])
    t_max = min(1.0, float(ratios.min())) if ratios.size else 1.0
    if t_o is None:
        t_o = t_max
    elif t_o > t_max * (1 + 1e-12):
        raise InvalidInput("step ratio leaves the feasible set")
    blend = base.with_theta((1 - t_o) * base.theta + t_o * proposal.theta)
    hit = np.isfinite(ratios) & (ratios <= t_o * (1 + 1e-12))
    if t_o == 0:
        hit &= b_old == 0
    out = remove_knots(blend, base.dset()[hit])
    return ActiveModel(out), t_o


# --------------------------------------------------------- localized kinks


@dataclass(frozen=True, eq=False)
class LocalizedKink:
    """Piecewise-linear kink function localized between neighbouring knots.

    The function interpolates ``values`` at ``nodes`` and continues with
    ``left_slope`` / ``right_slope`` outside of them. ``case`` is one of
    ``'zero'``, ``'interior'``, ``'left'``, ``'right'`` or ``'plain'`` (no
    knots, the kink is not localized).
    """

    tau: float
    case: str
    nodes: np.ndarray
    values: np.ndarray
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, float)
        v = np.interp(x, self.nodes, self.values)
        v = v + self.left_slope * np.minimum(x - self.nodes[0], 0.0)
        v = v + self.right_slope * np.maximum(x - self.nodes[-1], 0.0)
        return v


def classify(params: SplineParams, tau):
    """Position of ``tau`` relative to the knots.

    Returns ``(case, k)`` arrays where ``k`` counts the knots ``<= tau``
    and ``case`` is 0 (on a knot), 1 (interior), 2 (left of all
    knots), 3 (right of all knots) or 4 (no knots at all).
    """
    tau = np.asarray(tau, float)
    t = params.tau
    k = np.searchsorted(t, tau, side="right")
    if t.size == 0:
        return np.full(tau.shape, 4), k
    on = np.isin(tau, params.dset())
    case = np.where(k == 0, 2, np.where(k >= t.size, 3, 1))
    case = np.where(on, 0, case)
    return case, k


def localized_kink(model, tau: float) -> LocalizedKink:
    """Localized version of the kink function ``xi (x - tau)^+``.

    It differs from the kink by a member of the current spline space,
    vanishes outside the knot interval around ``tau`` (interior case),
    and is identically zero when ``tau`` is already a knot.
    """
    params = model.params if isinstance(model, ActiveModel) else model
    xi = params.setting.xi
    case, k = classify(params, tau)
    case, k = int(case), int(k)
    t = params.tau
    tau = float(tau)
    if case == 0:
        return LocalizedKink(tau, "zero", np.array([tau]), np.array([0.0]))
    if case == 4:
        return LocalizedKink(tau, "plain", np.array([tau]), np.array([0.0]), 0.0, float(xi))
    if case == 1:
        a, b = t[k - 1], t[k]
        peak = -xi * (tau - a) * (b - tau) / (b - a)
        return LocalizedKink(tau, "interior", np.array([a, tau, b]), np.array([0.0, peak, 0.0]))
    if case == 2:
        d = t[0] - tau
        return LocalizedKink(tau, "left", np.array([tau, t[0]]), np.array([-xi * d, 0.0]))
    d = tau - t[-1]
    return LocalizedKink(tau, "right", np.array([t[-1], tau]), np.array([0.0, -xi * d]))
