"""Exponential-moment integrals of linear functions and their inversions.

Three families are provided.

* ``j1``: integrals over the unit interval against Lebesgue measure,
  ``J_ab(r, s) = int_0^1 (1-v)^a v^b exp((1-v) r + v s) dv``.
* ``gauss_k`` / ``gauss_j``: tail and interval integrals of
  ``exp(linear) * phi`` for the standard normal density ``phi``.
* ``gamma_g`` / ``gamma_k`` / ``gamma_j``: the same for the Gamma(alpha, 1)
  density.

Interval integrals carry normalized polynomial weights: with
``D = b - a`` the ``(l, m)`` order integrates
``((b-x)/D)**l * ((x-a)/D)**m``, and tail integrals of order ``l``
integrate ``(x-a)**l``. These weights make every first and second
partial derivative in the two linear coefficients another member of
the same family.

All functions accept numpy arrays and broadcast. The inversion
routines solve for the upper limit of an integral given its value and
return ``None`` (scalar API) or ``nan`` (vector API) when no solution
exists.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special as sc

from .errors import Overflow

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
SERIES_RADIUS = 0.01

ORDERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


def _out(x, scalar):
    if scalar:
        return float(np.asarray(x).reshape(-1)[0]) if np.ndim(x) else float(x)
    return x


def _is_scalar(*args):
    return all(np.ndim(a) == 0 for a in args)


def _check_order(order):
    order = tuple(int(o) for o in order)
    if order not in ORDERS:
        raise ValueError(f"unsupported order {order}")
    return order


@lru_cache(maxsize=None)
def _unit_gauss_legendre(n):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


# ---------------------------------------------------------------- Lebesgue


def _j1_series(r, s, a, b):
    d = r - s
    if (a, b) == (0, 0):
        return np.exp(0.5 * (r + s) + d * d / 24.0)
    if (a, b) == (1, 0):
        return 0.5 * np.exp((2 * r + s) / 3.0 + d * d / 36.0 - d**3 / 810.0)
    if (a, b) == (2, 0):
        return np.exp((3 * r + s) / 4.0 + 3 * d * d / 160.0 - d**3 / 960.0) / 3.0
    return np.exp(0.5 * (r + s) + d * d / 40.0) / 6.0


def _j1_hyperbolic(r, s, a, b):
    m = 0.5 * (r + s)
    dl = 0.5 * (s - r)
    em = np.exp(m)
    sh, ch, en = np.sinh(dl), np.cosh(dl), np.exp(-dl)
    if (a, b) == (0, 0):
        return em * sh / dl
    if (a, b) == (1, 0):
        return 0.5 * em * (sh - dl * en) / dl**2
    if (a, b) == (2, 0):
        return 0.5 * em * (sh / dl - (1 + dl) * en) / dl**2
    return 0.5 * em * (ch - sh / dl) / dl**2


def _j1_far(r, s, a, b):
    # |r - s| large: factor out the larger exponent and use moments of
    # u -> exp(-D u) on [0, 1], which are free of cancellation here
    hi = np.maximum(r, s)
    D = np.abs(s - r)
    q = np.exp(-D)
    i0 = (1 - q) / D
    i1 = (1 - q * (1 + D)) / D**2
    i2 = (2 - q * (D * D + 2 * D + 2)) / D**3
    up = s >= r
    if (a, b) == (0, 0):
        v = i0
    elif (a, b) == (1, 0):
        v = np.where(up, i1, i0 - i1)
    elif (a, b) == (2, 0):
        v = np.where(up, i2, i0 - 2 * i1 + i2)
    else:
        v = i1 - i2
    return np.exp(hi) * v


def _j1(r, s, order):
    """Vectorized ``J_ab(r, s)``; may return ``inf`` on overflow."""
    a, b = order
    if (a, b) in ((0, 1), (0, 2)):
        r, s, a, b = s, r, b, a
    r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
    out = np.empty(r.shape)
    d = np.abs(r - s)
    near = d <= SERIES_RADIUS
    far = d > 40.0
    mid = ~(near | far)
    with np.errstate(over="ignore", invalid="ignore"):
        if near.any():
            out[near] = _j1_series(r[near], s[near], a, b)
        if mid.any():
            out[mid] = _j1_hyperbolic(r[mid], s[mid], a, b)
        if far.any():
            out[far] = _j1_far(r[far], s[far], a, b)
    return out


def j1(r, s, order=(0, 0)):
    """Unit-interval exponential moments.

    Parameters
    ----------
    r, s : float or array_like
        Values of the linear exponent at ``v = 0`` and ``v = 1``.
    order : tuple of int
        ``(a, b)`` with ``a + b <= 2``; the integrand carries
        ``(1-v)**a * v**b``.

    Returns
    -------
    float or ndarray
        ``int_0^1 (1-v)^a v^b exp((1-v) r + v s) dv``. Within
        ``|r - s| <= 0.01`` a Beta-moment exponential series is used,
        otherwise closed forms.

    Raises
    ------
    Overflow
        If the value exceeds the floating point range.
    """
    order = _check_order(order)
    scalar = _is_scalar(r, s)
    v = _j1(r, s, order)
    if not np.all(np.isfinite(v)):
        raise Overflow("j1 overflow")
    return _out(v, scalar)


# ---------------------------------------------------------------- Gaussian


def _log_phi(x):
    return -0.5 * x * x - LOG_SQRT_2PI


def _log_diff(p, q):
    """``log(exp(p) - exp(q))`` for ``p >= q``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return p + np.log1p(-np.exp(q - p))


_ASYM_TERMS = 24


def _log_gauss_moment(z, ell):
    """``log M_l(z)`` with ``M_l(z) = int_0^inf y^l exp(z y - y^2/2) dy``."""
    z = np.asarray(z, float)
    out = np.empty(z.shape)
    pos = z >= 0
    mid = (z < 0) & (z >= -15)
    neg = z < -15
    if pos.any():
        zp = z[pos]
        lP = sc.log_ndtr(zp)
        P = np.exp(lP)
        ph = np.exp(_log_phi(zp))
        if ell == 0:
            lpsi = lP
        elif ell == 1:
            lpsi = np.log(zp * P + ph)
        else:
            lpsi = np.log((1 + zp * zp) * P + zp * ph)
        out[pos] = 0.5 * zp * zp + LOG_SQRT_2PI + lpsi
    if mid.any():
        zm = z[mid]
        R = math.sqrt(math.pi / 2) * sc.erfcx(-zm / math.sqrt(2))
        if ell == 0:
            M = R
        elif ell == 1:
            M = zm * R + 1
        else:
            M = (1 + zm * zm) * R + zm
        out[mid] = np.log(M)
    if neg.any():
        u = -z[neg]
        total = np.zeros(u.shape)
        logfac = 0.0
        for k in range(_ASYM_TERMS):
            p = ell + 2 * k
            # (-1/2)^k / k! * p! / u^(p+1)
            lt = sc.gammaln(p + 1) - logfac - k * math.log(2) - (p + 1) * np.log(u)
            total += (-1) ** k * np.exp(lt)
            logfac += math.log(k + 1)
        out[neg] = np.log(total)
    return out


def _gauss_k(theta0, theta1, a, ell):
    theta0, theta1, a = np.broadcast_arrays(
        np.asarray(theta0, float), np.asarray(theta1, float), np.asarray(a, float)
    )
    with np.errstate(over="ignore"):
        return np.exp(theta0 + _log_phi(a) + _log_gauss_moment(theta1 - a, ell))


def gauss_k(theta0, theta1, a, ell=0):
    """Gaussian tail moments ``int_a^inf (x-a)^l exp(t0 + t1 (x-a)) phi(x) dx``.

    Left tails follow from the reflection ``gauss_k(t0, -t1, -a, l)``,
    which integrates ``(a-x)^l exp(t0 + t1 (x-a)) phi(x)`` over
    ``(-inf, a]``.

    Raises
    ------
    Overflow
        If the value exceeds the floating point range.
    """
    if ell not in (0, 1, 2):
        raise ValueError("ell must be 0, 1 or 2")
    scalar = _is_scalar(theta0, theta1, a)
    v = _gauss_k(theta0, theta1, a, ell)
    if not np.all(np.isfinite(v)):
        raise Overflow("gauss_k overflow")
    return _out(v, scalar)


def _gauss_j_closed(t0, t1, a, b, order):
    D = b - a
    tt1 = (t1 - t0) / D
    tt0 = (b * t0 - a * t1) / D
    at = a - tt1
    bt = b - tt1
    up = at > 0
    lhi = np.where(up, sc.log_ndtr(-at), sc.log_ndtr(bt))
    llo = np.where(up, sc.log_ndtr(-bt), sc.log_ndtr(at))
    lD = _log_diff(lhi, llo)
    floor = ~np.isfinite(lD)
    if floor.any():
        mt = 0.5 * (at + bt)[floor]
        dt = 0.5 * (bt - at)[floor]
        lD = lD.copy()
        lD[floor] = -0.5 * mt * mt + np.log(sc.ndtr(dt) - sc.ndtr(-dt))
    lpa = _log_phi(at)
    lpb = _log_phi(bt)
    S = np.maximum(lD, np.maximum(lpa, lpb))
    Dp = np.exp(lD - S)
    pa = np.exp(lpa - S)
    pb = np.exp(lpb - S)
    if order == (0, 0):
        N = Dp
    elif order == (1, 0):
        N = (bt * Dp + pb - pa) / D
    elif order == (0, 1):
        N = (-at * Dp + pa - pb) / D
    elif order == (2, 0):
        N = ((1 + bt * bt) * Dp + (at - 2 * bt) * pa + bt * pb) / D**2
    elif order == (1, 1):
        N = (-(1 + at * bt) * Dp + bt * pa - at * pb) / D**2
    else:
        N = ((1 + at * at) * Dp + (2 * at - bt) * pb - at * pa) / D**2
    with np.errstate(over="ignore"):
        return np.exp(tt0 + 0.5 * tt1 * tt1 + S) * N, floor


def _gl_interval(logf, a, D, order, n):
    """Gauss-Legendre rule for ``D int_0^1 w_lm(v) exp(logf(v)) dv``."""
    v, w = _unit_gauss_legendre(n)
    E = logf(v[None, :])
    Emax = E.max(axis=1, keepdims=True)
    l, m = order
    poly = (1 - v) ** l * v**m
    s = (np.exp(E - Emax) * (w * poly)).sum(axis=1)
    with np.errstate(over="ignore"):
        return D * np.exp(Emax[:, 0]) * s


def _gauss_j(theta0, theta1, a, b, order):
    t0, t1, a, b = (
        np.asarray(x, float) for x in np.broadcast_arrays(theta0, theta1, a, b)
    )
    shape = t0.shape
    t0, t1, a, b = (x.reshape(-1) for x in (t0, t1, a, b))
    D = b - a
    r = t0 - 0.5 * a * a
    s = t1 - 0.5 * b * b
    var = np.abs(r - s) + D * D / 8
    out = np.empty(t0.shape)
    flag = np.zeros(t0.shape, bool)
    short = D <= 1.0
    # node count from the scale of the exponent; the rule error stays below 1e-16 relative
    tiers = ((-np.inf, 2, 8), (2, 10, 16), (10, 40, 32), (40, 150, 96))
    for lo, hi, n in tiers:
        mask = short & (var > lo) & (var <= hi)
        if mask.any():
            rr, ss, dd = r[mask], s[mask], D[mask]
            out[mask] = _gl_interval(
                lambda v: (1 - v) * rr[:, None] + v * ss[:, None]
                + 0.5 * dd[:, None] ** 2 * v * (1 - v) - LOG_SQRT_2PI,
                a[mask], dd, order, n,
            )
    rest = ~(short & (var <= 150))
    if rest.any():
        out[rest], flag[rest] = _gauss_j_closed(t0[rest], t1[rest], a[rest], b[rest], order)
    return out.reshape(shape), flag.reshape(shape)


def gauss_j(theta0, theta1, a, b, order=(0, 0), with_flag=False):
    """Gaussian interval moments.

    ``int_a^b w_lm(x) exp(theta(x)) phi(x) dx`` with ``theta`` linear,
    ``theta(a) = theta0`` and ``theta(b) = theta1``.

    Parameters
    ----------
    theta0, theta1 : float or array_like
        Values of the linear exponent at the interval ends.
    a, b : float or array_like
        Interval ends, ``a < b``.
    order : tuple of int
        Weight order ``(l, m)`` with ``l + m <= 2``.
    with_flag : bool
        Also return a boolean marking values computed from the
        log-domain lower bound because the normal mass underflowed.

    Returns
    -------
    value : float or ndarray
    flag : bool or ndarray, only if ``with_flag``
    """
    order = _check_order(order)
    scalar = _is_scalar(theta0, theta1, a, b)
    if np.any(np.asarray(b) <= np.asarray(a)):
        raise ValueError("gauss_j needs a < b")
    v, flag = _gauss_j(theta0, theta1, a, b, order)
    if not np.all(np.isfinite(v)):
        raise Overflow("gauss_j overflow")
    if with_flag:
        return _out(v, scalar), (bool(flag) if scalar else flag)
    return _out(v, scalar)


def _ppf_from_log(lp):
    """Standard normal quantile of ``exp(lp)``."""
    return sc.ndtri_exp(np.minimum(lp, 0.0))


def invert_gauss_v(kind, theta0, theta1, tau0, c, side=1):
    """Vectorized inversion; ``nan`` marks the absence of a solution.

    ``kind='tail'`` solves
    ``gauss_k(theta0 + theta1 (tau - tau0), side*theta1, side*tau) = c``,
    ``kind='interval'`` solves
    ``gauss_j(theta0, theta0 + theta1 (tau - tau0), tau0, tau) = c``.
    """
    t0, t1, x0, c = (np.asarray(x, float) for x in np.broadcast_arrays(theta0, theta1, tau0, c))
    with np.errstate(divide="ignore", invalid="ignore"):
        lc = np.log(c)
        # log(c * exp(-theta0 + theta1 tau0 - theta1^2/2))
        lp = lc - t0 + t1 * x0 - 0.5 * t1 * t1
        if kind == "tail":
            ok = (c > 0) & (lp < 0)
            z = _ppf_from_log(np.where(ok, lp, -1.0))
            tau = t1 - side * z
        elif kind == "interval":
            z0 = x0 - t1
            lo = z0 <= 0
            # lower half: Phi(tau - t1) = Phi(z0) + p
            # upper half: Phi(t1 - tau) = Phi(-z0) - p, kept accurate near 1
            lq_lo = np.where(c >= 0, np.logaddexp(sc.log_ndtr(z0), lp),
                             _log_diff(sc.log_ndtr(z0), lp))
            lq_hi = np.where(c >= 0, _log_diff(sc.log_ndtr(-z0), lp),
                             np.logaddexp(sc.log_ndtr(-z0), lp))
            ok = np.where(lo, np.isfinite(lq_lo) & (lq_lo < 0), np.isfinite(lq_hi) & (lq_hi < 0))
            ok &= np.isfinite(lc) | (c < 0)
            tau = np.where(
                lo,
                t1 + _ppf_from_log(np.where(ok & lo, lq_lo, -1.0)),
                t1 - _ppf_from_log(np.where(ok & ~lo, lq_hi, -1.0)),
            )
            tau = np.where(c == 0, x0, tau)
            ok |= c == 0
        else:
            raise ValueError(f"unknown kind {kind!r}")
    return np.where(ok, tau, np.nan)


def invert_gauss(kind, theta0, theta1, tau0, c, side=1):
    """Solve a Gaussian moment equation for its free limit ``tau``.

    Parameters
    ----------
    kind : {'tail', 'interval'}
        ``'tail'`` solves
        ``K(theta0 + theta1 (tau - tau0), side*theta1; side*tau) = c``
        (``side=+1`` right tail, ``side=-1`` left tail);
        ``'interval'`` solves
        ``J(theta0, theta0 + theta1 (tau - tau0); tau0, tau) = c``.

    Returns
    -------
    float or None
        The unique solution, or ``None`` if none exists.
    """
    t = float(invert_gauss_v(kind, theta0, theta1, tau0, c, side))
    return None if math.isnan(t) else t


# ---------------------------------------------------------------- Gamma


_FAR_TERMS = 40
# k a above this uses the binomial expansion (term 40 is below 1e-16 there)
_FAR_START = 50.0


def _gamma_g(s, a, b):
    s, a, b = np.broadcast_arrays(np.asarray(s, float), np.asarray(a, float), np.asarray(b, float))
    upper = a >= s
    with np.errstate(invalid="ignore"):
        vu = sc.gammaincc(s, a) - sc.gammaincc(s, b)
        vl = sc.gammainc(s, b) - sc.gammainc(s, a)
    return np.where(upper, vu, vl)


def gamma_g(s, a, b):
    """Gamma(s, 1) probability of ``[a, b]``; ``b`` may be ``inf``."""
    scalar = _is_scalar(s, a, b)
    if np.any(np.asarray(a) < 0) or np.any(np.asarray(b) < np.asarray(a)):
        raise ValueError("gamma_g needs 0 <= a <= b")
    return _out(np.clip(_gamma_g(s, a, b), 0.0, 1.0), scalar)


def _gamma_far(alpha, theta_a, a, k, D, powers):
    """``int_0^D u^q exp(theta_a - a - k u) (a+u)^(alpha-1) du / Gamma(alpha)``.

    This is the moment of a segment starting at ``a`` with total decay rate
    ``k`` (slope ``1 - k`` on top of the density's ``e^-x``), for ``k a``
    large, where the incomplete gamma differences underflow.  The factor
    ``(1 + u/a)^(alpha-1)`` is expanded binomially; term ``j`` is of size
    ``j! / (k a)^j`` and, once ``j > alpha - 1``, the Lagrange remainder is
    bounded by the next term for every ``u >= 0``.  ``D`` may be ``inf``.
    """
    kd = k * D
    logpre = theta_a - a + (alpha - 1) * np.log(a) - sc.gammaln(alpha)
    out = []
    for q in powers:
        acc = np.zeros(np.shape(a))
        c = np.ones(np.shape(a))
        for j in range(_FAR_TERMS):
            n = j + q
            # int_0^D u^n e^(-k u) du = n! / k^(n+1) P(n+1, k D)
            lp = sc.gammaln(n + 1.0) - (n + 1) * np.log(k) - j * np.log(a)
            acc = acc + c * np.exp(lp) * sc.gammainc(n + 1.0, kd)
            c = c * (alpha - 1 - j) / (j + 1)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out.append(np.exp(logpre + np.log(acc)))
    return out


def _gamma_k(alpha, theta0, theta1, c, ell):
    alpha, t0, t1, c = (np.asarray(x, float) for x in np.broadcast_arrays(alpha, theta0, theta1, c))
    inf = t1 >= 1
    k = np.where(inf, 0.5, 1 - t1)
    ct = k * c
    g0 = _gamma_g(alpha, ct, np.inf)
    if ell == 0:
        N = g0
    else:
        g1 = _gamma_g(alpha + 1, ct, np.inf)
        if ell == 1:
            N = alpha * g1 - ct * g0
        else:
            g2 = _gamma_g(alpha + 2, ct, np.inf)
            N = alpha * (alpha + 1) * g2 - 2 * alpha * ct * g1 + ct * ct * g0
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.exp(t0 - t1 * c - (alpha + ell) * np.log(k)) * N
    far = ~inf & (ct >= _FAR_START) & (alpha < _FAR_TERMS - 3)
    if far.any():
        v = np.array(v, float, copy=True)
        v[far] = _gamma_far(alpha[far], t0[far], c[far], k[far], np.inf, [ell])[0]
    return np.where(inf, np.inf, v)


def gamma_k(alpha, theta0, theta1, c, ell=0):
    """Gamma(alpha, 1) tail moments ``int_c^inf (x-c)^l exp(t0 + t1 (x-c)) dG``.

    Returns ``inf`` when ``theta1 >= 1`` (the integral diverges).
    """
    if ell not in (0, 1, 2):
        raise ValueError("ell must be 0, 1 or 2")
    scalar = _is_scalar(alpha, theta0, theta1, c)
    return _out(_gamma_k(alpha, theta0, theta1, c, ell), scalar)


def _poly_moment_gamma(alpha, a, b, order):
    # int_a^b w_lm(x) x^(alpha-1) dx / Gamma(alpha) for exact unit slope
    l, m = order
    D = b - a
    # coefficients of (b - x)^l (x - a)^m in powers of x
    out = np.zeros(np.shape(a))
    for i in range(l + 1):
        for j in range(m + 1):
            # C(l,i) b^(l-i) (-x)^i * C(m,j) x^j (-a)^(m-j)
            cf = math.comb(l, i) * math.comb(m, j) * b ** (l - i) * (-1) ** i * (-a) ** (m - j)
            p = i + j
            out = out + cf * (b ** (p + alpha) - a ** (p + alpha)) / (p + alpha)
    return out / D ** (l + m) / sc.gamma(alpha)


def _gamma_j(alpha, theta0, theta1, a, b, order):
    alpha, t0, t1, a, b = (
        np.asarray(x, float) for x in np.broadcast_arrays(alpha, theta0, theta1, a, b)
    )
    shape = t0.shape
    alpha, t0, t1, a, b = (x.reshape(-1) for x in (alpha, t0, t1, a, b))
    D = b - a
    empty = D <= 0
    Ds = np.where(empty, 1.0, D)
    tt1 = np.where(empty, 0.0, (t1 - t0) / Ds)
    tt0 = np.where(empty, t0, (b * t0 - a * t1) / Ds)
    out = np.zeros(t0.shape)
    bound = (tt1 > 1) & ~empty
    if bound.any():
        al = alpha[bound]
        with np.errstate(over="ignore"):
            out[bound] = np.exp(tt0[bound] + (tt1[bound] - 1) * b[bound]) * (
                b[bound] ** al - a[bound] ** al
            ) / sc.gamma(al + 1)
    unit = (tt1 == 1) & ~empty
    if unit.any():
        out[unit] = np.exp(tt0[unit]) * _poly_moment_gamma(alpha[unit], a[unit], b[unit], order)
    with np.errstate(divide="ignore", over="ignore"):
        var = np.abs(t1 - t0) + D + np.abs(alpha - 1) * np.log(b / np.where(a > 0, a, 1.0))
    gl = ~bound & ~unit & ~empty & (a > 0) & (D <= 0.5 * a) & (var <= 40)
    if gl.any():
        tt, uu, aa, dd, al = t0[gl], t1[gl], a[gl], D[gl], alpha[gl]
        lg = sc.gammaln(al)

        def logf(v):
            x = aa[:, None] + dd[:, None] * v
            return ((1 - v) * tt[:, None] + v * uu[:, None]
                    + (al[:, None] - 1) * np.log(x) - x - lg[:, None])

        out[gl] = _gl_interval(logf, aa, dd, order, 32)
    near = ~bound & ~unit & ~gl & ~empty & (np.abs(1 - tt1) * b <= 0.25)
    if near.any():
        # Taylor series of exp(-k x) about the unit slope; the closed form
        # below divides an underflowing gamma difference by k^alpha there
        al, k, aa, bb = alpha[near], 1 - tt1[near], a[near], b[near]
        acc = np.zeros(al.shape)
        for j in range(24):
            lr = sc.gammaln(al + j) - sc.gammaln(al) - sc.gammaln(j + 1.0)
            acc = acc + (-k) ** j * np.exp(lr) * _poly_moment_gamma(al + j, aa, bb, order)
        out[near] = np.exp(tt0[near]) * acc
    far = (~bound & ~unit & ~gl & ~near & ~empty & ((1 - tt1) * a >= _FAR_START)
           & (alpha < _FAR_TERMS - 3))
    if far.any():
        l, m = order
        dd = D[far]
        M = _gamma_far(alpha[far], t0[far], a[far], 1 - tt1[far], dd, range(l + m + 1))
        if order == (0, 0):
            v = M[0]
        elif order == (1, 0):
            v = (dd * M[0] - M[1]) / dd
        elif order == (0, 1):
            v = M[1] / dd
        elif order == (2, 0):
            v = (dd * dd * M[0] - 2 * dd * M[1] + M[2]) / (dd * dd)
        elif order == (1, 1):
            v = (dd * M[1] - M[2]) / (dd * dd)
        else:
            v = M[2] / (dd * dd)
        out[far] = v
    cf = ~bound & ~unit & ~gl & ~near & ~far & ~empty
    if cf.any():
        al, k = alpha[cf], 1 - tt1[cf]
        at, bt = k * a[cf], k * b[cf]
        dd = D[cf]
        g0 = _gamma_g(al, at, bt)
        l, m = order
        if order == (0, 0):
            N = g0
        else:
            g1 = _gamma_g(al + 1, at, bt)
            if order == (1, 0):
                N = bt * g0 - al * g1
            elif order == (0, 1):
                N = -at * g0 + al * g1
            else:
                g2 = _gamma_g(al + 2, at, bt)
                c2 = al * (al + 1) * g2
                if order == (2, 0):
                    N = bt * bt * g0 - 2 * al * bt * g1 + c2
                elif order == (1, 1):
                    N = -at * bt * g0 + al * (at + bt) * g1 - c2
                else:
                    N = at * at * g0 - 2 * al * at * g1 + c2
        p = l + m
        with np.errstate(over="ignore"):
            out[cf] = np.exp(tt0[cf] - (al + p) * np.log(k) - p * np.log(dd)) * N
    return out.reshape(shape), bound.reshape(shape)


def gamma_j(alpha, theta0, theta1, a, b, order=(0, 0), with_flag=False):
    """Gamma(alpha, 1) interval moments.

    ``int_a^b w_lm(x) exp(theta(x)) dG_alpha(x)`` with ``theta`` linear,
    ``theta(a) = theta0`` and ``theta(b) = theta1``.

    When the slope ``(theta1 - theta0)/(b - a)`` exceeds one the value
    returned is the upper bound
    ``exp(t0 + (t1 - 1) b) (b^alpha - a^alpha) / Gamma(alpha + 1)``
    in the slope/intercept form ``t0 + t1 x`` of theta, and the flag is
    set.

    Returns
    -------
    value : float or ndarray
    flag : bool or ndarray, only if ``with_flag``
    """
    order = _check_order(order)
    scalar = _is_scalar(alpha, theta0, theta1, a, b)
    a_, b_ = np.asarray(a), np.asarray(b)
    if np.any(a_ < 0) or np.any(b_ <= a_) or not np.all(np.isfinite(b_)):
        raise ValueError("gamma_j needs 0 <= a < b < inf")
    v, flag = _gamma_j(alpha, theta0, theta1, a, b, order)
    if with_flag:
        return _out(v, scalar), (bool(flag) if scalar else flag)
    return _out(v, scalar)


def invert_gamma_v(kind, alpha, theta0, theta1, tau0, c):
    """Vectorized Gamma inversions; ``nan`` marks the absence of a solution.

    ``kind='left'`` solves ``exp(theta0) G_alpha(tau) = c``,
    ``kind='interval'`` solves
    ``gamma_j(theta0, theta0 + theta1 (tau - tau0), tau0, tau) = c`` and
    ``kind='tail'`` solves
    ``gamma_k(theta0 + theta1 (tau - tau0), theta1, tau) = c``.
    """
    al, t0, t1, x0, c = (
        np.asarray(x, float) for x in np.broadcast_arrays(alpha, theta0, theta1, tau0, c)
    )
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == "left":
            p = c * np.exp(-t0)
            q = np.where(c > 0, -np.expm1(np.log(c) - t0), 1.0)
            ok = (p >= 0) & (p < 1)
            tau = np.where(p <= 0.5, sc.gammaincinv(al, np.clip(p, 0, 0.5)),
                           sc.gammainccinv(al, np.clip(q, 0, 0.5)))
            return np.where(ok, tau, np.nan)
        slope_ok = (t1 >= 0) & (t1 < 1)
        k = np.where(slope_ok, 1 - t1, 1.0)
        r = c * np.exp(al * np.log(k) + t1 * x0 - t0)
        if kind == "interval":
            z0 = k * x0
            # q_lo = r + G(z0) and its complement q_hi, each computed
            # from the tail in which it is accurate
            q_lo = r + sc.gammainc(al, z0)
            q_hi = sc.gammaincc(al, z0) - r
            ok = slope_ok & (q_lo >= 0) & (q_hi > 0)
            y = np.where(q_lo <= 0.5, sc.gammaincinv(al, np.clip(q_lo, 0, 0.5)),
                         sc.gammainccinv(al, np.clip(q_hi, 0, 0.5)))
            return np.where(ok, y / k, np.nan)
        if kind == "tail":
            ok = slope_ok & (r > 0) & (r <= 1)
            y = sc.gammainccinv(al, np.clip(r, 0, 1))
            return np.where(ok, y / k, np.nan)
    raise ValueError(f"unknown kind {kind!r}")


def invert_gamma(kind, alpha, theta0, theta1, tau0, c):
    """Solve a Gamma(alpha, 1) moment equation for its free limit ``tau``.

    See :func:`invert_gamma_v` for the three equation types.

    Returns
    -------
    float or None
        The unique solution, or ``None`` if none exists.
    """
    t = float(invert_gamma_v(kind, alpha, theta0, theta1, tau0, c))
    return None if math.isnan(t) else t
