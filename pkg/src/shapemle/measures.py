"""Reference measures as seen by piecewise-linear exponents.

A piecewise-linear ``theta`` splits ``int exp(theta) dM`` into three
kinds of pieces, each handled by one method of a measure object:

``seg(order, va, vb, a, b)``
    ``int_a^b w_lm(x) exp(theta) dM`` on a bounded segment where theta
    runs linearly from ``va`` to ``vb``; ``w_lm`` is the normalized
    weight of :mod:`shapemle.special`.
``right(ell, v, s, c)``
    ``int_c^inf (x-c)^ell exp(v + s (x-c)) dM``.
``left(ell, v, s, c)``
    ``int_lo^c (c-x)^ell exp(v + s (x-c)) dM`` with ``lo`` the left end
    of the domain.

The ``inv_*`` methods solve the mass equations that locate stationary
points of the directional derivative; they return ``nan`` where no
solution exists. Every method is vectorized and returns ``inf`` rather
than raising when a value is infinite or overflows.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sc

from . import special as sf
from .data import Kind, Setting

__all__ = ["Lebesgue", "StandardNormal", "GammaReference", "measure_for"]


def _arr(*xs):
    return [np.asarray(x, float) for x in np.broadcast_arrays(*xs)]


class Lebesgue:
    """Lebesgue measure; only bounded segments occur."""

    lo = -math.inf
    slope_limit = math.inf

    def seg(self, order, va, vb, a, b):
        va, vb, a, b = _arr(va, vb, a, b)
        with np.errstate(over="ignore", invalid="ignore"):
            v = (b - a) * sf._j1(va, vb, order)
        return np.where(np.isfinite(v), v, np.inf)

    def right(self, ell, v, s, c):
        raise NotImplementedError("Lebesgue measure has no tail pieces")

    left = right

    def density(self, x):
        return np.ones_like(np.asarray(x, float))


class StandardNormal:
    """Standard normal reference distribution."""

    lo = -math.inf
    slope_limit = math.inf

    def seg(self, order, va, vb, a, b):
        v, _ = sf._gauss_j(va, vb, a, b, order)
        return np.where(np.isfinite(v), v, np.inf)

    def right(self, ell, v, s, c):
        r = sf._gauss_k(v, s, c, ell)
        return np.where(np.isfinite(r), r, np.inf)

    def left(self, ell, v, s, c):
        v, s, c = _arr(v, s, c)
        r = sf._gauss_k(v, -s, -c, ell)
        return np.where(np.isfinite(r), r, np.inf)

    def inv_left(self, v, s, c0, target):
        return sf.invert_gauss_v("tail", v, s, c0, target, side=-1)

    def inv_interval(self, v, s, a, target):
        return sf.invert_gauss_v("interval", v, s, a, target)

    def inv_right(self, v, s, c0, target):
        return sf.invert_gauss_v("tail", v, s, c0, target, side=1)

    def density(self, x):
        x = np.asarray(x, float)
        return np.exp(-0.5 * x * x - sf.LOG_SQRT_2PI)


class GammaReference:
    """Gamma(alpha, beta) reference distribution (shape, rate).

    Everything is reduced to the unit-rate functions by the substitution
    ``y = beta * x``; a slope ``s`` in ``x`` becomes ``s / beta`` in ``y``.
    A finite segment steeper than ``beta`` has a finite integral, but it is
    reported as ``inf`` so that the objective marks the spline infeasible.
    A convex spline with such a segment has a final slope above ``beta`` and
    is not integrable, so only transient Newton iterates are affected.
    """

    lo = 0.0

    def __init__(self, alpha, beta):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.slope_limit = self.beta

    def seg(self, order, va, vb, a, b):
        va, vb, a, b = _arr(va, vb, a, b)
        v, bound = sf._gamma_j(self.alpha, va, vb, self.beta * a, self.beta * b, order)
        return np.where(bound | ~np.isfinite(v), np.inf, v)

    def right(self, ell, v, s, c):
        v, s, c = _arr(v, s, c)
        r = sf._gamma_k(self.alpha, v, s / self.beta, self.beta * c, ell) / self.beta**ell
        return np.where(np.isfinite(r), r, np.inf)

    def left(self, ell, v, s, c):
        # only the flat piece on [0, c] occurs, where theta is constant
        v, s, c = _arr(v, s, c)
        if np.any(s != 0):
            raise ValueError("Gamma left pieces must be flat")
        out = np.zeros(v.shape)
        pos = c > 0
        if pos.any():
            cp = c[pos]
            out[pos] = cp**ell * self.seg((ell, 0), v[pos], v[pos], 0.0, cp)
        return out

    def inv_left(self, v, s, c0, target):
        return sf.invert_gamma_v("left", self.alpha, v, 0.0, 0.0, target) / self.beta

    def inv_interval(self, v, s, a, target):
        s = np.asarray(s, float)
        return sf.invert_gamma_v(
            "interval", self.alpha, v, s / self.beta, self.beta * np.asarray(a), target
        ) / self.beta

    def inv_right(self, v, s, c0, target):
        s = np.asarray(s, float)
        return sf.invert_gamma_v(
            "tail", self.alpha, v, s / self.beta, self.beta * np.asarray(c0), target
        ) / self.beta

    def density(self, x):
        x = np.asarray(x, float)
        a, b = self.alpha, self.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = a * math.log(b) + (a - 1) * np.log(x) - b * x - sc.gammaln(a)
        return np.where(x > 0, np.exp(lp), 0.0)


def measure_for(setting: Setting):
    """Reference measure object of an estimation setting."""
    if setting.kind is Kind.LOG_CONCAVE:
        return Lebesgue()
    if setting.kind is Kind.TAIL_GAUSS:
        return StandardNormal()
    return GammaReference(setting.alpha, setting.beta)
