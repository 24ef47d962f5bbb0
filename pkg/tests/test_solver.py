import math

import numpy as np
import pytest

from helpers import SETTINGS, check_fit_invariants, quad_model, rand_params, rand_sample
from shapemle.data import Kind, Setting, SolverConfig, ingest
from shapemle.errors import (
    EmptyCandidates,
    FactorizationFailure,
    InvalidInput,
    NoProgress,
)
from shapemle.objective import Objective, directional_kink, kink_eval, loglik
from shapemle.simulate import RngStream, example_2b, gauss_sample, simulate_2b
from shapemle.solver import (
    _exp_family_slope,
    _trunc_exp_mean,
    audit_grid,
    candidates,
    certify,
    fit,
    gaussian_spline_nodes,
    kink_proposal,
    local_search,
    multi_knot_proposal,
    new_knot,
    newton,
    solve_tridiagonal,
    start,
    step_size_correction,
)
from shapemle.spline import ActiveModel, SplineParams, integral, localized_kink, normalize, shift

LABELS = list(SETTINGS)


def sample_for(label, seed, n=60):
    rng = RngStream(seed)
    if label == "1":
        x = rng.normal(n)
    elif label == "2a":
        x = gauss_sample(n, 0.5, 1.25, rng)
    else:
        b = SETTINGS["2b"]
        x = rng.gamma(b.alpha, n) / (0.7 * b.beta)
    return ingest(zip(x, np.ones(n)))


def fitted(label, seed, n=60, **kw):
    s = sample_for(label, seed, n)
    return s, fit(s, SolverConfig(SETTINGS[label], **kw))


# ------------------------------------------------------------- linear algebra


def test_solve_tridiagonal_against_dense():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5, 40):
        off = rng.normal(size=n - 1)
        diag = np.abs(rng.normal(size=n)) + 2 * np.r_[np.abs(off), 0] + np.r_[0, np.abs(off)] + 0.1
        rhs = rng.normal(size=n)
        H = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        np.testing.assert_allclose(solve_tridiagonal(diag, off, rhs), np.linalg.solve(H, rhs),
                                   rtol=1e-12, atol=1e-12)


def test_solve_tridiagonal_ridge_and_failure():
    # singular PSD matrix: the ridge makes it solvable
    diag = np.array([1.0, 1.0])
    off = np.array([1.0])
    x = solve_tridiagonal(diag, off, np.array([1.0, 1.0]))
    assert np.all(np.isfinite(x))
    np.testing.assert_allclose(diag * x + off[0] * x[::-1], [1.0, 1.0], rtol=1e-6)
    with pytest.raises(FactorizationFailure):
        solve_tridiagonal(np.array([-1.0, -1.0]), np.array([0.0]), np.ones(2))


# --------------------------------------------------------------------- starts


@pytest.mark.parametrize("target", [0.01, 0.2, 0.5, 0.77, 0.999])
def test_exp_family_slope_inverts_mean(target):
    k = _exp_family_slope(target)
    assert _trunc_exp_mean(k)[0] == pytest.approx(target, rel=1e-12)


@pytest.mark.parametrize("label", LABELS)
def test_start_is_normalized_and_optimal_on_its_span(label):
    s = sample_for(label, 3)
    cfg = SolverConfig(SETTINGS[label])
    model = start(s, cfg)
    p = model.params
    assert integral(p) == pytest.approx(1.0, abs=1e-12)
    obj = Objective(s, p.setting)
    g = obj.full(p).gradient
    # the start maximizes L on the span of its own knots (with fixed kink-free shape)
    if label == "2b":
        assert p.m == 1 and p.tau[0] == 0.0 and p.theta[-1] > 0
        assert abs(g[-1]) < 1e-10
    else:
        assert np.max(np.abs(g)) < 1e-10


def test_start_gamma_without_positive_kappa():
    # mean below alpha / beta: the reference itself is the start
    s = ingest([(0.1, 1.0), (0.2, 1.0)])
    model = start(s, SolverConfig(Setting.gamma(2.0, 1.0)))
    assert model.params.m == 0 and model.params.theta[0] == 0.0


def test_gaussian_spline_nodes():
    s = ingest(zip(np.arange(27.0), np.ones(27)))
    nodes = gaussian_spline_nodes(s)
    assert nodes.size == 6
    assert nodes[0] > 0 and nodes[-1] < 26 and np.all(np.diff(nodes) > 0)


# ------------------------------------------------------------- local search


@pytest.mark.parametrize("label", LABELS)
def test_step_size_correction_increase_and_subset(label):
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = rand_params(SETTINGS[label], rng, max_knots=3)
        if p.kind is Kind.LOG_CONCAVE:
            s = rand_sample(p.setting, rng, 8, p.tau[0], p.tau[-1])
            s = ingest(list(zip(s.points, s.weights)) + [(p.tau[0], 0.1), (p.tau[-1], 0.1)])
        else:
            s = rand_sample(p.setting, rng, 8)
        if not p.in_theta() or not math.isfinite(integral(p)):
            continue
        model = normalize(ActiveModel(p))
        obj = Objective(s, p.setting)
        proposal, delta = newton(obj, model.params)
        if delta < 1e-8:
            continue
        new, moved = step_size_correction(obj, model, proposal, delta)
        assert moved
        assert obj.loglik(new.params) >= obj.loglik(model.params) + delta / 2 ** 61
        assert set(new.dset.tolist()) <= set(model.dset.tolist())
        assert new.params.in_theta()
        out = local_search(obj, model, proposal, delta, 1e-10)
        assert set(out.dset.tolist()) <= set(model.dset.tolist())
        assert obj.loglik(out.params) >= obj.loglik(new.params) - 1e-12


def test_step_size_correction_gives_up_below_resolution():
    s = ingest([(0.0, 1.0), (1.0, 1.0)])
    obj = Objective(s, Setting.log_concave())
    m = ActiveModel(SplineParams(Setting.log_concave(), [0.0, 1.0], [0.0, 0.0]))
    out, moved = step_size_correction(obj, m, m.params, 1e-30)
    assert not moved and out is m


def test_newton_rejects_infeasible_point():
    s = ingest([(1.0, 1.0), (2.0, 1.0)])
    p = SplineParams(Setting.gamma(1.0, 1.0), [0.0], [0.0, 2.0])
    with pytest.raises(NoProgress):
        newton(Objective(s, p.setting), p)


# --------------------------------------------------------------- knot search


@pytest.mark.parametrize("label", ["2a", "2b"])
def test_new_knot_matches_dense_grid(label):
    # the interval maximizers must beat a brute-force grid of the h-curve
    rng = np.random.default_rng(5)
    for seed in range(6):
        s = rand_sample(SETTINGS[label], rng, 12, weighted=True)
        model = normalize(start(s, SolverConfig(SETTINGS[label])))
        tau, h = new_knot(s, model, 0.0, 1e-12)
        x = s.points
        grid = np.linspace(x[0], x[-1], 20001)[1:-1]
        grid = grid[~np.isin(grid, model.tau)]
        hg = kink_eval(s, model.params, grid).h
        assert h >= hg.max() - 1e-9
        assert tau not in model.tau
        if label == "2a" or tau > 0:
            assert x[0] < tau < x[-1]
        # reported value is h at the reported point
        assert kink_eval(s, model.params, [tau]).h[0] == pytest.approx(h, abs=1e-15)


def test_new_knot_log_concave_candidates_are_data():
    s = sample_for("1", 6, n=30)
    model = normalize(start(s, SolverConfig(Setting.log_concave())))
    cand, h = candidates(s, model, 1e-12)
    np.testing.assert_array_equal(cand, s.points[1:-1])
    tau, ho = new_knot(s, model, 0.0, 1e-12)
    assert ho == h.max() and tau in s.points


def test_new_knot_tie_goes_to_smaller_tau():
    # symmetric sample, symmetric start: the two best candidates tie
    s = ingest([(-2.0, 1.0), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0)])
    model = normalize(start(s, SolverConfig(Setting.log_concave())))
    cand, h = candidates(s, model, 1e-12)
    tau, _ = new_knot(s, model, 0.0, 1e-12)
    best = cand[h >= h.max() - 1e-14]
    assert tau == best.min()


def test_new_knot_without_candidates():
    s = ingest([(0.0, 1.0), (1.0, 1.0)])
    model = normalize(start(s, SolverConfig(Setting.log_concave())))
    assert new_knot(s, model, 0.0, 1e-12) == (None, -math.inf)


@pytest.mark.parametrize("label", LABELS)
def test_kink_proposal_scaling(label):
    s = sample_for(label, 7, n=40)
    model = normalize(start(s, SolverConfig(SETTINGS[label])))
    cand, h = candidates(s, model, 1e-12)
    order = np.argsort(-h)[:3]
    taus = np.sort(cand[order])
    prop, delta, lam = kink_proposal(s, model, taus)
    ev = kink_eval(s, model.params, taus)
    assert delta == pytest.approx(float(lam @ ev.h), rel=1e-15)
    # denominator against quadrature of V^2 exp(theta) dM
    for t, e in zip(taus, ev.energy):
        V = localized_kink(model.params, t)
        assert e == pytest.approx(quad_model(model.params, lambda z: float(V(z)) ** 2, V.nodes), rel=1e-9)
    # the proposal equals theta + sum lambda V on a dense grid
    z = np.linspace(s.points[0], s.points[-1], 301)
    from shapemle.spline import evaluate
    direct = evaluate(model.params, z) + sum(l * localized_kink(model.params, t)(z) for t, l in zip(taus, lam))
    np.testing.assert_allclose(evaluate(prop, z), direct, atol=1e-12)
    with pytest.raises(EmptyCandidates):
        kink_proposal(s, model, [])


def test_kink_proposal_single_candidate_matches_one_knot_admission():
    s = sample_for("2a", 8)
    model = normalize(start(s, SolverConfig(Setting.gauss())))
    tau, h = new_knot(s, model, 0.0, 1e-12)
    p1, d1, lam = kink_proposal(s, model, [tau])
    p2, d2 = multi_knot_proposal(s, model, ([tau], [h]))
    np.testing.assert_array_equal(p1.theta, p2.theta)
    assert d1 == d2 == pytest.approx(h * h / kink_eval(s, model.params, [tau]).energy[0], rel=1e-14)


def test_multi_knot_keeps_one_per_interval():
    s = sample_for("2a", 9)
    model = normalize(start(s, SolverConfig(Setting.gauss())))
    cand, h = candidates(s, model, 1e-12)
    prop, delta = multi_knot_proposal(s, model, (cand, h))
    # no knots yet: a single interval, so a single new knot
    assert prop.m == 1 and prop.tau[0] == cand[np.argmax(h)]
    with pytest.raises(EmptyCandidates):
        multi_knot_proposal(s, model, (cand, np.full_like(h, -1.0)))


# ------------------------------------------------------------------- fixture


def test_two_point_uniform_fixture():
    s = ingest([(0.0, 0.5), (1.0, 0.5)])
    r = fit(s, SolverConfig(Setting.log_concave()))
    assert r.converged
    np.testing.assert_array_equal(r.params.tau, [0.0, 1.0])
    assert np.max(np.abs(r.params.theta)) <= 1e-10
    assert abs(r.loglik) <= 1e-10
    c = r.certificate
    assert c.passed and abs(c.integral_of_density - 1) <= 1e-10 and abs(c.mean_match) <= 1e-10
    assert c.knot_equalities.size == 0


def test_certificate_detects_level_shift():
    s = ingest([(0.0, 0.5), (1.0, 0.5)])
    p = SplineParams(Setting.log_concave(), [0.0, 1.0], [0.1, 0.1])
    c = certify(s, p)
    assert not c.passed
    assert c.integral_of_density == pytest.approx(math.exp(0.1), rel=1e-14)


@pytest.mark.parametrize("label", LABELS)
def test_certificate_detects_suboptimal_model(label):
    s, r = fitted(label, 10)
    assert r.certificate.passed
    # drop to the start: mass still 1 but a knot candidate has h > 0
    st = normalize(start(s, SolverConfig(SETTINGS[label])))
    c = certify(s, st)
    assert not c.passed and c.grid_max_h > c.tol_h
    # shifting the fit breaks the mass condition
    c = certify(s, shift(r.params, 1e-6))
    assert not c.passed


def test_audit_grid_ranges():
    s = sample_for("2a", 11)
    r = fit(s, SolverConfig(Setting.gauss()))
    g = audit_grid(s, r.model)
    assert g[0] == pytest.approx(s.points[0] - 4 * s.std)
    assert g[-1] == pytest.approx(s.points[-1] + 4 * s.std)
    assert np.all(np.isin(r.params.tau, g))
    s = sample_for("2b", 11)
    r = fit(s, SolverConfig(SETTINGS["2b"]))
    g = audit_grid(s, r.model)
    assert g[0] == 0.0 and g[-1] == pytest.approx(s.points[-1] + 4 / SETTINGS["2b"].beta)


# ------------------------------------------------------------------ full fits


@pytest.mark.parametrize("label", LABELS)
@pytest.mark.parametrize("seed", range(4))
def test_fit_invariants(label, seed):
    s, r = fitted(label, 100 + seed, n=80)
    assert r.converged, r.certificate
    assert check_fit_invariants(s, r) == []
    assert r.loglik == pytest.approx(loglik(s, r.params), abs=0)
    # certificate conditions seen through the non-localized derivative
    if r.params.dset().size:
        assert np.max(np.abs(directional_kink(s, r.params, r.params.dset()))) <= r.certificate.tol_h


@pytest.mark.parametrize("label", LABELS)
def test_fit_weighted_sample(label):
    rng = np.random.default_rng(12)
    s = rand_sample(SETTINGS[label], rng, 50, weighted=True)
    r = fit(s, SolverConfig(SETTINGS[label]))
    assert r.converged and check_fit_invariants(s, r) == []


@pytest.mark.parametrize("label", LABELS)
def test_fit_is_deterministic(label):
    s = sample_for(label, 13)
    a = fit(s, SolverConfig(SETTINGS[label]))
    b = fit(s, SolverConfig(SETTINGS[label]))
    np.testing.assert_array_equal(a.params.tau, b.params.tau)
    np.testing.assert_array_equal(a.params.theta, b.params.theta)
    assert a.trace == b.trace and a.newton_steps == b.newton_steps
    assert a.to_record() == b.to_record()


@pytest.mark.parametrize("label", LABELS)
def test_multi_knot_strategy_reaches_same_optimum(label):
    s = sample_for(label, 14, n=100)
    a = fit(s, SolverConfig(SETTINGS[label]))
    b = fit(s, SolverConfig(SETTINGS[label], multi_knot=True))
    assert b.converged
    assert b.loglik == pytest.approx(a.loglik, abs=1e-8)


def test_gaussian_spline_start_reaches_same_optimum():
    s = sample_for("1", 15, n=120)
    a = fit(s, SolverConfig(Setting.log_concave()))
    b = fit(s, SolverConfig(Setting.log_concave(), gaussian_start=True))
    assert b.converged and check_fit_invariants(s, b) == []
    assert b.loglik == pytest.approx(a.loglik, abs=1e-8)
    with pytest.raises(ValueError):
        from shapemle.solver import start_gaussian_spline
        start_gaussian_spline(s, SolverConfig(Setting.gauss()))


def test_fit_outer_cap_returns_unconverged():
    s = sample_for("2a", 16, n=200)
    r = fit(s, SolverConfig(Setting.gauss(), max_outer=1))
    assert not r.converged and r.h_o > 1e-4 / s.n
    assert len(r.trace) == 2


def test_fit_rejects_gamma_data_at_zero():
    s = ingest([(0.0, 1.0), (1.0, 1.0)])
    with pytest.raises(InvalidInput):
        fit(s, SolverConfig(Setting.gamma()))


def test_fit_2b_example_model():
    theta = example_2b()
    x = simulate_2b(400, theta, 1.0, 1.0, RngStream(17))
    s = ingest(zip(x, np.ones(x.size)))
    r = fit(s, SolverConfig(theta.setting))
    assert r.converged and check_fit_invariants(s, r) == []
    assert 1 <= r.params.m <= 15


def test_fit_counters_recorded():
    s = sample_for("2a", 18, n=400)
    r = fit(s, SolverConfig(Setting.gauss()))
    assert r.newton_steps >= r.local_searches >= len(r.trace) - 1 >= 1
    rec = r.to_record()
    assert rec["setting"] == "2a" and rec["certificate"]["passed"]
