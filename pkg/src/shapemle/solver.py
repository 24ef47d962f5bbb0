"""Active-set maximization of the shape-constrained log-likelihood.

The outer loop alternates a knot search (the point where adding a kink
increases the objective fastest) with a local search: damped Newton
steps on the space of splines with the current knots, where a step
that would violate the shape constraint is shortened to the largest
feasible one and the knots whose kink vanishes are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import special as sf
from .data import Kind, SolverConfig, WeightedSample, check_sample
from .errors import EmptyCandidates, FactorizationFailure, IterationCap, NoProgress
from .measures import measure_for
from .objective import (
    Objective,
    directional_kink,
    kink_eval,
    mean as model_mean,
)
from .spline import (
    ActiveModel,
    SplineParams,
    affine,
    classify,
    evaluate,
    insert_knots,
    integral,
    localized_kink,
    merge_gap_knots,
    mutate,
    normalize,
    prune,
)

EPS = np.finfo(float).eps
MAX_HALVINGS = 60
RIDGE_RETRIES = 10
TIE_TOL = 1e-14


# ------------------------------------------------------------ results


def _finite(v):
    return None if v is None or not math.isfinite(v) else float(v)


@dataclass(frozen=True)
class CertificateReport:
    """Residuals of the global optimality conditions.

    ``integral_of_density`` is ``int exp(theta) dM`` (should be 1),
    ``mean_match`` is ``int x exp(theta) dM - mean`` (``None`` in the
    Gamma setting), ``knot_equalities`` holds the directional
    derivatives at the knots (should vanish) and ``grid_max_h`` their
    maximum over the audit points (should be <= 0).
    """

    integral_of_density: float
    mean_match: Optional[float]
    knot_equalities: np.ndarray
    grid_max_h: float
    tol_mass: float
    tol_h: float
    passed: bool

    def to_record(self) -> dict:
        """JSON-safe dictionary; non-finite values become ``None``."""
        return {
            "integral_of_density": _finite(self.integral_of_density),
            "mean_match": _finite(self.mean_match),
            "knot_equalities": [float(v) for v in self.knot_equalities],
            "grid_max_h": _finite(self.grid_max_h),
            "tol_mass": self.tol_mass,
            "tol_h": self.tol_h,
            "passed": self.passed,
        }


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``trace`` holds ``(outer iteration, L, number of kinks)`` after the
    start and after every local search.
    """

    model: ActiveModel
    loglik: float
    trace: List[Tuple[int, float, int]]
    newton_steps: int
    local_searches: int
    certificate: CertificateReport
    converged: bool
    h_o: float = -math.inf

    @property
    def params(self) -> SplineParams:
        return self.model.params

    def to_record(self) -> dict:
        rec = self.params.to_record()
        rec.update(
            loglik=_finite(self.loglik),
            newton_steps=self.newton_steps,
            local_searches=self.local_searches,
            converged=self.converged,
            certificate=self.certificate.to_record(),
        )
        return rec


@dataclass
class _Counters:
    newton: int = 0
    local: int = 0
    polish: int = 0
    trace: list = field(default_factory=list)


# ------------------------------------------------------- linear algebra


def _ldl_solve(diag, off, rhs):
    n = diag.size
    D = np.empty(n)
    L = np.zeros(n)
    D[0] = diag[0]
    if not (D[0] > 0 and math.isfinite(D[0])):
        return None
    for i in range(1, n):
        L[i] = off[i - 1] / D[i - 1]
        D[i] = diag[i] - L[i] * off[i - 1]
        if not (D[i] > 1e-300 and D[i] > EPS * abs(diag[i]) and math.isfinite(D[i])):
            return None
    y = np.empty(n)
    y[0] = rhs[0]
    for i in range(1, n):
        y[i] = rhs[i] - L[i] * y[i - 1]
    x = y / D
    for i in range(n - 2, -1, -1):
        x[i] -= L[i + 1] * x[i + 1]
    return x


def solve_tridiagonal(diag, off, rhs):
    """Solve ``H x = rhs`` for a symmetric positive definite tridiagonal ``H``.

    Uses an ``LDL^T`` factorization. A nonpositive pivot triggers a ridge
    ``1e-10 * trace / n`` added to the diagonal, grown tenfold on each of
    up to ten retries.

    Raises
    ------
    FactorizationFailure
    """
    diag = np.asarray(diag, float)
    off = np.asarray(off, float)
    rhs = np.asarray(rhs, float)
    x = _ldl_solve(diag, off, rhs)
    if x is not None:
        return x
    ridge = 1e-10 * abs(diag.sum()) / diag.size
    for _ in range(RIDGE_RETRIES):
        x = _ldl_solve(diag + ridge, off, rhs)
        if x is not None:
            return x
        ridge *= 10
    raise FactorizationFailure("negative Hessian is not positive definite")


# ------------------------------------------------------ basic procedures


def newton(obj: Objective, params: SplineParams):
    """One Newton step for the objective on the span of ``params``' knots.

    Returns
    -------
    proposal : SplineParams
        ``theta + H^{-1} g``.
    delta : float
        Directional derivative ``g^T H^{-1} g`` towards the proposal.
    """
    ev = obj.full(params)
    if not ev.feasible:
        raise NoProgress("Newton step from a point with infinite integral")
    d = solve_tridiagonal(ev.diag, ev.off, ev.gradient)
    delta = float(ev.gradient @ d)
    return params.with_theta(params.theta + d), max(delta, 0.0)


def _floor(obj, params):
    return 100 * EPS * (1.0 + abs(obj.loglik(params)))


def step_size_correction(obj: Objective, model: ActiveModel, proposal: SplineParams,
                         delta: float) -> Tuple[ActiveModel, bool]:
    """Halve towards ``model`` until ``L`` rises by ``delta/3``, then clip and normalize.

    Returns the new normalized model and a flag that is false when
    ``delta`` fell below the resolution of the objective before the
    increase could be confirmed (the model is then returned unchanged).

    Raises
    ------
    NoProgress
        If sixty halvings do not give a sufficient increase.
    """
    base = insert_knots(model.params, np.setdiff1d(proposal.tau, model.tau))
    new = proposal
    floor = _floor(obj, base)
    for _ in range(MAX_HALVINGS + 1):
        if obj.increase(base, new) >= delta / 3:
            break
        if delta <= floor:
            return model, False
        new = base.with_theta(0.5 * (base.theta + new.theta))
        delta *= 0.5
    else:
        raise NoProgress("step halving did not increase the objective")
    out, _ = mutate(model, new)
    return normalize(out), True


def local_search(obj: Objective, model: ActiveModel, proposal: SplineParams, delta: float,
                 delta1: float, max_newton: int = 200, counters: Optional[_Counters] = None
                 ) -> ActiveModel:
    """Alternate step-size corrections and Newton steps until ``delta <= delta1``.

    The knot set of the result is contained in the union of the knots
    of ``model`` and ``proposal``.

    Raises
    ------
    IterationCap
        After ``max_newton`` Newton steps.
    """
    counters = counters if counters is not None else _Counters()
    counters.local += 1
    steps = 0
    while delta > delta1:
        model, moved = step_size_correction(obj, model, proposal, delta)
        if not moved:
            break
        if steps >= max_newton:
            raise IterationCap(f"local search exceeded {max_newton} Newton steps")
        proposal, delta = newton(obj, model.params)
        steps += 1
        counters.newton += 1
    return polish(obj, model, proposal, delta, counters)


def polish(obj: Objective, model: ActiveModel, proposal: SplineParams, delta: float,
           counters: Optional[_Counters] = None, max_steps: int = 3) -> ActiveModel:
    """Take full Newton steps that stay feasible after the stopping rule fired.

    Near the optimum a full step squares the residual of the gradient at
    negligible cost, which tightens the mass and mean equations well
    below what ``delta <= delta1`` guarantees. A step is taken only when
    it keeps every kink positive and does not decrease the objective
    beyond rounding.
    """
    for _ in range(max_steps):
        if not delta > 0 or proposal.m != model.params.m:
            break
        if not np.all(proposal.kinks() > 0):
            break
        if obj.increase(model.params, proposal) < -_floor(obj, proposal):
            break
        model = normalize(ActiveModel(proposal))
        proposal, delta = newton(obj, model.params)
        if counters is not None:
            counters.polish += 1
    return model


# ------------------------------------------------------------- starts


def _trunc_exp_mean(k):
    """Mean of the density proportional to ``exp(k v)`` on ``[0, 1]``."""
    c = max(k, 0.0)
    j0 = sf.j1(-c, k - c, (0, 0))
    j01 = sf.j1(-c, k - c, (0, 1))
    j02 = sf.j1(-c, k - c, (0, 2))
    m = j01 / j0
    return m, j02 / j0 - m * m, math.log(j0) + c


def _exp_family_slope(target):
    """Solve ``mean(k) = target`` for the truncated exponential on ``[0, 1]``."""
    lo, hi = -1.0, 1.0
    while _trunc_exp_mean(lo)[0] > target:
        lo *= 2
    while _trunc_exp_mean(hi)[0] < target:
        hi *= 2
    k = 0.0 if lo < 0 < hi else 0.5 * (lo + hi)
    for _ in range(200):
        m, v, _ = _trunc_exp_mean(k)
        if m < target:
            lo = k
        else:
            hi = k
        step = (target - m) / v if v > 0 else 0.0
        k_new = k + step
        if not (lo < k_new < hi):
            k_new = 0.5 * (lo + hi)
        if abs(k_new - k) <= 1e-15 * (1 + abs(k)):
            k = k_new
            break
        k = k_new
    return k


def start(sample: WeightedSample, config: SolverConfig) -> ActiveModel:
    """Optimal function with all shape constraints active.

    Log-concave: the exponential family ``kappa x - c(kappa)`` on
    ``[x_1, x_n]`` with mean matching the sample. Gauss tail:
    ``mu x - mu^2/2``. Gamma tail: ``kappa^+ x - c(kappa^+)`` with
    ``kappa = beta - alpha/mu``.
    """
    setting = config.setting
    x = sample.points
    mu = sample.mean
    if setting.kind is Kind.LOG_CONCAVE:
        a, b = x[0], x[-1]
        k = _exp_family_slope((mu - a) / (b - a))
        _, _, logj = _trunc_exp_mean(k)
        v0 = -math.log(b - a) - logj
        return ActiveModel(SplineParams(setting, [a, b], [v0, v0 + k]))
    if setting.kind is Kind.TAIL_GAUSS:
        return ActiveModel(affine(setting, -0.5 * mu * mu, mu))
    alpha, beta = setting.alpha, setting.beta
    kappa = beta - alpha / mu
    if kappa > 0:
        c = -alpha * math.log1p(-kappa / beta)
        return ActiveModel(SplineParams(setting, [0.0], [-c, kappa]))
    return ActiveModel(SplineParams(setting, np.empty(0), [0.0]))


def gaussian_spline_nodes(sample: WeightedSample) -> np.ndarray:
    """``ceil(2 n^(1/3))`` evenly spread inner sample points."""
    n = sample.n
    m = min(math.ceil(2 * n ** (1 / 3)), n - 2)
    idx = np.unique(np.round(np.linspace(1, n - 2, m)).astype(int))
    return sample.points[idx]


def start_gaussian_spline(sample: WeightedSample, config: SolverConfig,
                          counters: Optional[_Counters] = None) -> ActiveModel:
    """Log-concave start from the interpolated Gaussian log-density.

    Interpolates ``-(x - mu)^2 / (2 sigma^2)`` at ``x_1``, ``x_n`` and
    ``ceil(2 n^(1/3))`` inner sample points, normalizes, and runs a local
    search on that knot set.
    """
    setting = config.setting
    if setting.kind is not Kind.LOG_CONCAVE:
        raise ValueError("the Gaussian spline start is for the log-concave setting")
    if sample.n < 3:
        return start(sample, config)
    t = np.concatenate(([sample.points[0]], gaussian_spline_nodes(sample), [sample.points[-1]]))
    v = -((t - sample.mean) ** 2) / (2 * sample.var)
    model = normalize(ActiveModel(SplineParams(setting, t, v)))
    obj = Objective(sample, setting)
    d1, _, _ = config.tolerances(sample.n)
    proposal, delta = newton(obj, model.params)
    counters = counters if counters is not None else _Counters()
    counters.newton += 1
    model = local_search(obj, model, proposal, delta, d1, config.max_newton, counters)
    return prune(model)


# --------------------------------------------------------- knot search


def _bisect(sample, params, lo, hi, delta_o):
    """Approximate maximizer of the concave ``h`` on ``[lo, hi]`` by bisection."""
    def hh(t):
        ev = kink_eval(sample, params, t)
        return float(ev.h[0]), float(ev.slope[0])

    tau = 0.5 * (lo + hi)
    step = 0.5 * (hi - lo)
    h, d = hh(tau)
    while abs(d) * step > delta_o and h + abs(d) * step > delta_o and step > 0:
        if d >= 0:
            lo, tau = tau, 0.5 * (tau + hi)
        else:
            hi, tau = tau, 0.5 * (lo + tau)
        step *= 0.5
        h, d = hh(tau)
    return tau


def _interval_maximizers(sample: WeightedSample, params: SplineParams, lo, hi, delta_o):
    """Maximizer of ``h`` on each interval ``[lo, hi]`` free of data and knots."""
    meas = measure_for(params.setting)
    S = sample
    mid = 0.5 * (lo + hi)
    case, k = classify(params, mid)
    t = params.tau
    vals = params.values()
    slopes = params.slopes()
    tail_gauss = params.kind is Kind.TAIL_GAUSS
    dlo = np.full(lo.shape, np.nan)
    dhi = np.full(lo.shape, np.nan)
    root = np.full(lo.shape, np.nan)
    th_lo = evaluate(params, lo)
    th_hi = evaluate(params, hi)

    sel = case == 1
    if sel.any():
        j = k[sel] - 1
        a, b = t[j], t[j + 1]
        va, vb = vals[j], vals[j + 1]
        s = (vb - va) / (b - a)
        target = (S.mass(a, lo[sel]) - (b * S.mass(a, b) - S.moment(a, b)) / (b - a)
                  + meas.seg((1, 0), va, vb, a, b))
        l_, h_ = lo[sel], hi[sel]
        m_lo = meas.seg((0, 0), va, th_lo[sel], a, l_)
        m_hi = meas.seg((0, 0), va, th_hi[sel], a, h_)
        dlo[sel] = target - m_lo
        dhi[sel] = target - m_hi
        root[sel] = meas.inv_interval(va, s, a, target)

    sel = case == 2
    if sel.any():
        sl = slopes[0] if tail_gauss else 0.0
        target = S.cdf(lo[sel])
        dlo[sel] = target - meas.left(0, th_lo[sel], sl, lo[sel])
        dhi[sel] = target - meas.left(0, th_hi[sel], sl, hi[sel])
        root[sel] = meas.inv_left(vals[0], sl, t[0], target)

    sel = (case == 3) | (case == 4)
    if sel.any():
        if params.m:
            v0, c0 = vals[-1], t[-1]
        else:
            v0, c0 = float(evaluate(params, 0.0)), 0.0
        sr = slopes[-1]
        above = 1.0 - S.cdf(lo[sel])
        dlo[sel] = meas.right(0, th_lo[sel], sr, lo[sel]) - above
        dhi[sel] = meas.right(0, th_hi[sel], sr, hi[sel]) - above
        root[sel] = meas.inv_right(v0, sr, c0, above)

    cand = np.where(dlo <= 0, lo, np.where(dhi >= 0, hi, root))
    bad = ~np.isfinite(cand) | (cand < lo) | (cand > hi)
    for i in np.flatnonzero(bad):
        cand[i] = _bisect(sample, params, lo[i], hi[i], delta_o)
    return cand


def candidates(sample: WeightedSample, model, delta_o: float):
    """Candidate knots with their localized directional derivatives.

    Log-concave: every inner sample point that is not a knot. Tail
    settings: one maximizer of ``h`` per interval between consecutive
    sample points and knots in ``[x_1, x_n]``, plus ``0`` in the Gamma
    setting. Points outside the admissible set or on knots get
    ``h = -inf``.
    """
    params = model.params if isinstance(model, ActiveModel) else model
    x = sample.points
    if params.kind is Kind.LOG_CONCAVE:
        cand = x[1:-1]
        if cand.size == 0:
            return cand, np.empty(0)
        h = kink_eval(sample, params, cand).h
        h = np.where(np.isin(cand, params.tau), -np.inf, h)
        return cand, h
    inner = params.tau[(params.tau > x[0]) & (params.tau < x[-1])]
    bp = np.union1d(x, inner)
    cand = _interval_maximizers(sample, params, bp[:-1], bp[1:], delta_o)
    if params.kind is Kind.TAIL_GAMMA:
        cand = np.concatenate(([0.0], cand))
    h = kink_eval(sample, params, cand).h
    excluded = np.isin(cand, params.tau) | (cand <= x[0]) | (cand >= x[-1])
    if params.kind is Kind.TAIL_GAMMA:
        excluded[0] = 0.0 in params.tau
    h = np.where(excluded, -np.inf, h)
    return cand, h


def new_knot(sample: WeightedSample, model, delta2: float, delta_o: float):
    """Best new knot ``tau_o`` and its directional derivative ``h_o``.

    Ties within ``1e-14`` go to the smaller ``tau``. Returns
    ``(None, -inf)`` when there is no admissible candidate.
    """
    cand, h = candidates(sample, model, delta_o)
    if cand.size == 0 or not np.any(np.isfinite(h)):
        return None, -math.inf
    best = h.max()
    i = int(np.flatnonzero(h >= best - TIE_TOL)[0])
    return float(cand[i]), float(h[i])


def _coefficients_of(template: SplineParams, fn, left_slope, right_slope):
    """Coefficients of a piecewise-linear function in the layout of ``template``."""
    v = fn(template.tau)
    kind = template.kind
    if kind is Kind.LOG_CONCAVE:
        return v
    if kind is Kind.TAIL_GAUSS:
        return np.concatenate(([left_slope], v, [right_slope]))
    return np.concatenate((v, [right_slope]))


def kink_proposal(sample: WeightedSample, model: ActiveModel, taus, hs=None):
    """Add Newton-scaled localized kinks at several points at once.

    ``theta_new = theta + sum lambda_tau V_{tau,theta}`` with
    ``lambda_tau = h(tau) / int V_{tau,theta}^2 exp(theta) dM``.

    Returns
    -------
    proposal : SplineParams
    delta : float
        ``sum lambda_tau h(tau)``.
    lambdas : ndarray
    """
    taus = np.atleast_1d(np.asarray(taus, float))
    if taus.size == 0:
        raise EmptyCandidates("no candidate knots")
    params = model.params
    ev = kink_eval(sample, params, taus)
    h = ev.h if hs is None else np.asarray(hs, float)
    lam = h / ev.energy
    refined = insert_knots(params, taus)
    theta = refined.theta.copy()
    for tau, lv in zip(taus, lam):
        V = localized_kink(params, tau)
        theta += lv * _coefficients_of(refined, V, V.left_slope, V.right_slope)
    return refined.with_theta(theta), float(lam @ h), lam


def multi_knot_proposal(sample: WeightedSample, model: ActiveModel, cands, delta2: float = 0.0):
    """Gradient proposal over the best candidate of every knot interval.

    ``cands`` is a pair of arrays ``(tau, h)``; per interval between
    consecutive knots the candidate with largest ``h`` is kept if
    ``h > delta2``.

    Raises
    ------
    EmptyCandidates
        If no candidate qualifies.
    """
    tau, h = (np.asarray(a, float) for a in cands)
    keep = np.isfinite(h) & (h > delta2)
    tau, h = tau[keep], h[keep]
    if tau.size == 0:
        raise EmptyCandidates("no candidate with positive directional derivative")
    _, k = classify(model.params, tau)
    chosen = []
    for g in np.unique(k):
        idx = np.flatnonzero(k == g)
        best = idx[np.argmax(h[idx])]
        chosen.append(best)
    chosen = np.array(sorted(chosen))
    prop, delta, _ = kink_proposal(sample, model, tau[chosen], h[chosen])
    return prop, delta


# --------------------------------------------------------- certificate


def audit_grid(sample: WeightedSample, model, per_interval: int = 1000) -> np.ndarray:
    """Points at which the certificate checks the directional derivative."""
    params = model.params if isinstance(model, ActiveModel) else model
    x = sample.points
    kind = params.kind
    if kind is Kind.LOG_CONCAVE:
        return x[1:-1]
    if kind is Kind.TAIL_GAUSS:
        lo, hi = x[0] - 4 * sample.std, x[-1] + 4 * sample.std
    else:
        lo, hi = 0.0, x[-1] + 4 / params.setting.beta
    knots = params.tau[(params.tau > lo) & (params.tau < hi)]
    edges = np.concatenate(([lo], knots, [hi]))
    pts = [np.linspace(a, b, per_interval) for a, b in zip(edges[:-1], edges[1:])]
    return np.unique(np.concatenate(pts))


def certify(sample: WeightedSample, model, delta2: Optional[float] = None,
            tol_mass: float = 1e-8, per_interval: int = 1000) -> CertificateReport:
    """Check the characterization of the global maximizer.

    Conditions: unit integral, mean equation (log-concave and Gauss
    tail), vanishing directional derivative at every knot, and
    ``DL(theta, V_t) <= tol`` on the audit grid, with ``tol = 2 delta2``.
    """
    params = model.params if isinstance(model, ActiveModel) else model
    if delta2 is None:
        delta2 = 1e-4 / sample.n
    tol_h = 2 * delta2
    total = integral(params)
    mm = None
    if params.kind is not Kind.TAIL_GAMMA:
        mm = model_mean(params) - sample.mean if math.isfinite(total) else math.inf
    knots = params.dset()
    keq = directional_kink(sample, params, knots) if knots.size else np.empty(0)
    grid = audit_grid(sample, params, per_interval)
    gmax = float(np.max(directional_kink(sample, params, grid))) if grid.size else -math.inf
    ok = (
        math.isfinite(total)
        and abs(total - 1) <= tol_mass
        and (mm is None or abs(mm) <= tol_mass)
        and bool(np.all(np.abs(keq) <= tol_h))
        and gmax <= tol_h
    )
    return CertificateReport(float(total), None if mm is None else float(mm), keq, gmax,
                             tol_mass, tol_h, bool(ok))


# ----------------------------------------------------------------- fit


def _tidy(obj, sample, model, delta1, max_newton, counters, max_merges=20):
    """Drop collapsed kinks, merge kinks in a common data gap and re-solve."""
    for i in range(max_merges + 1):
        pruned = prune(model)
        if pruned is not model:
            model = normalize(pruned)
        merged = merge_gap_knots(model.params, sample.points)
        if merged is model.params or i == max_merges:
            break
        model = normalize(ActiveModel(merged))
        proposal, delta = newton(obj, model.params)
        counters.newton += 1
        model = local_search(obj, model, proposal, delta, delta1, max_newton, counters)
    return model


def fit(sample: WeightedSample, config: SolverConfig) -> FitResult:
    """Compute the shape-constrained maximum-likelihood estimate.

    Parameters
    ----------
    sample : WeightedSample
    config : SolverConfig

    Returns
    -------
    FitResult
        ``converged`` is true when no knot candidate exceeds ``delta2``
        and the certificate passes.
    """
    setting = config.setting
    check_sample(sample, setting)
    d1, d2, do = config.tolerances(sample.n)
    obj = Objective(sample, setting)
    cnt = _Counters()
    if setting.kind is Kind.LOG_CONCAVE and config.gaussian_start:
        model = start_gaussian_spline(sample, config, cnt)
    else:
        model = normalize(start(sample, config))
        proposal, delta = newton(obj, model.params)
        cnt.newton += 1
        if delta > d1:
            model = local_search(obj, model, proposal, delta, d1, config.max_newton, cnt)
    cnt.trace.append((0, obj.loglik(model), int(model.dset.size)))
    tau_o, h_o = new_knot(sample, model, d2, do)
    outer = 0
    converged = True
    while h_o > d2:
        if outer >= config.max_outer:
            converged = False
            break
        outer += 1
        if config.multi_knot and outer == 1:
            cand, hs = candidates(sample, model, do)
            proposal, delta = multi_knot_proposal(sample, model, (cand, hs), d2)
        else:
            refined = insert_knots(model.params, [tau_o])
            proposal, delta = newton(obj, refined)
            cnt.newton += 1
            j = int(np.flatnonzero(proposal.dset() == tau_o)[0])
            if not proposal.kinks()[j] > 0 or not delta > 0:
                proposal, delta, _ = kink_proposal(sample, model, [tau_o], [h_o])
        model = local_search(obj, model, proposal, delta, d1, config.max_newton, cnt)
        model = _tidy(obj, sample, model, d1, config.max_newton, cnt)
        cnt.trace.append((outer, obj.loglik(model), int(model.dset.size)))
        tau_o, h_o = new_knot(sample, model, d2, do)
    cert = certify(sample, model, d2)
    return FitResult(
        model=model,
        loglik=obj.loglik(model),
        trace=cnt.trace,
        newton_steps=cnt.newton,
        local_searches=cnt.local,
        certificate=cert,
        converged=bool(converged and cert.passed and h_o <= d2),
        h_o=h_o,
    )
