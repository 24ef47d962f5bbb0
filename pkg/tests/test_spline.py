import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from helpers import SETTINGS, quad_model, rand_params, rand_sample
from shapemle.data import Kind, Setting
from shapemle.errors import InvalidInput, NonIntegrable
from shapemle.measures import GammaReference, Lebesgue, StandardNormal, measure_for
from shapemle.spline import (
    ActiveModel,
    SplineParams,
    affine,
    basis,
    classify,
    collapsed,
    collapsed_weights,
    evaluate,
    insert_knots,
    integral,
    localized_kink,
    merge_gap_knots,
    mutate,
    normalize,
    prune,
    remove_knots,
    shift,
)

LABELS = list(SETTINGS)


def probe_points(params, rng, k=50):
    if params.kind is Kind.LOG_CONCAVE:
        return rng.uniform(params.tau[0], params.tau[-1], k)
    if params.kind is Kind.TAIL_GAUSS:
        return rng.uniform(-5, 5, k)
    return rng.uniform(0, 6, k)


# ------------------------------------------------------------ measures


def test_measure_for():
    assert isinstance(measure_for(Setting.log_concave()), Lebesgue)
    assert isinstance(measure_for(Setting.gauss()), StandardNormal)
    g = measure_for(Setting.gamma(2.0, 3.0))
    assert isinstance(g, GammaReference) and g.slope_limit == 3.0


@pytest.mark.parametrize("setting", [Setting.gauss(), Setting.gamma(0.7, 2.0), Setting.gamma(3.0, 0.5)])
def test_reference_density_is_probability(setting):
    d = measure_for(setting).density
    lo = -40 if setting.kind is Kind.TAIL_GAUSS else 0
    total = integrate.quad(lambda x: float(d(x)), lo, 200, limit=200, points=[1.0])[0]
    assert total == pytest.approx(1.0, rel=1e-9)


def test_gamma_reference_rejects_sloped_left_pieces():
    with pytest.raises(ValueError):
        GammaReference(1.0, 1.0).left(0, 0.0, 0.5, 1.0)


def test_gamma_segment_too_steep_is_infinite():
    g = GammaReference(2.0, 1.5)
    assert g.seg((0, 0), 0.0, 2.0, 1.0, 2.0) == math.inf  # slope 2 > beta


# --------------------------------------------------------- SplineParams


def test_params_validation():
    with pytest.raises(InvalidInput):
        SplineParams(Setting.log_concave(), [0.0], [0.0])
    with pytest.raises(InvalidInput):
        SplineParams(Setting.log_concave(), [1.0, 0.0], [0.0, 0.0])
    with pytest.raises(InvalidInput):
        SplineParams(Setting.gauss(), [0.0], [0.0, 1.0])
    with pytest.raises(InvalidInput):
        SplineParams(Setting.gamma(), [-1.0], [0.0, 0.5])
    with pytest.raises(InvalidInput):
        SplineParams(Setting.gauss(), [], [math.nan, 0.0])
    p = SplineParams(Setting.gauss(), [0.0, 1.0], [-1.0, 0.0, 0.5, 2.0])
    with pytest.raises(ValueError):
        p.theta[0] = 3.0


def test_layouts_and_slopes():
    p = SplineParams(Setting.gauss(), [0.0, 1.0], [-1.0, 0.0, 0.5, 2.0])
    np.testing.assert_allclose(p.values(), [0.0, 0.5])
    np.testing.assert_allclose(p.slopes(), [-1.0, 0.5, 2.0])
    np.testing.assert_allclose(p.kinks(), [1.5, 1.5])
    assert p.in_theta() and p.integrable()
    q = SplineParams(Setting.gamma(), [1.0, 3.0], [0.0, 1.0, 0.75])
    np.testing.assert_allclose(q.slopes(), [0.0, 0.5, 0.75])
    np.testing.assert_allclose(q.kinks(), [0.5, 0.25])
    assert evaluate(q, 0.2) == 0.0  # flat head
    r = SplineParams(Setting.log_concave(), [0.0, 1.0, 2.0], [0.0, 1.0, 0.5])
    np.testing.assert_allclose(r.kinks(), [1.5])
    np.testing.assert_array_equal(r.dset(), [1.0])
    assert evaluate(r, -0.1) == -math.inf and evaluate(r, 2.5) == -math.inf
    assert not SplineParams(Setting.gamma(), [0.0], [0.0, 1.2]).integrable()


@pytest.mark.parametrize("label", LABELS)
def test_record_round_trip(label):
    rng = np.random.default_rng(1)
    p = rand_params(SETTINGS[label], rng)
    q = SplineParams.from_record(p.to_record())
    assert q.setting == p.setting
    np.testing.assert_array_equal(q.tau, p.tau)
    np.testing.assert_array_equal(q.theta, p.theta)


@pytest.mark.parametrize("label", LABELS)
def test_evaluate_interpolates_and_is_piecewise_linear(label):
    rng = np.random.default_rng(2)
    for _ in range(20):
        p = rand_params(SETTINGS[label], rng)
        if p.m:
            np.testing.assert_allclose(evaluate(p, p.tau), p.values(), rtol=1e-14, atol=1e-14)
        x = probe_points(p, rng)
        # midpoint rule: exact for linear pieces
        h = 1e-3
        edges = np.concatenate((p.tau, [0.0] if p.kind is Kind.TAIL_GAMMA else []))
        far = np.min(np.abs(x[:, None] - edges[None, :]), axis=1) > 2 * h if edges.size else np.ones(x.size, bool)
        x = x[far]
        if p.kind is Kind.TAIL_GAMMA:
            x = x[x > 2 * h]
        mid = evaluate(p, x)
        avg = 0.5 * (evaluate(p, x - h) + evaluate(p, x + h))
        np.testing.assert_allclose(mid, avg, rtol=1e-11, atol=1e-11)


@pytest.mark.parametrize("label", LABELS)
def test_basis_reproduces_evaluate(label):
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rand_params(SETTINGS[label], rng)
        x = probe_points(p, rng)
        i0, i1, c0, c1, outside = basis(p, x)
        v = c0 * p.theta[i0] + c1 * p.theta[i1]
        ok = ~outside
        np.testing.assert_allclose(v[ok], evaluate(p, x[ok]), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("label", LABELS)
def test_collapsed_weights_identity(label):
    # sum_i w_i theta(x_i) = weights(tau) . theta
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = rand_params(SETTINGS[label], rng)
        if p.kind is Kind.LOG_CONCAVE:
            s = rand_sample(p.setting, rng, 9, p.tau[0], p.tau[-1])
        else:
            s = rand_sample(p.setting, rng, 9)
        w = collapsed_weights(s, p.tau, p.setting)
        assert w @ p.theta == pytest.approx(float(s.weights @ evaluate(p, s.points)), abs=1e-13)


@pytest.mark.parametrize("label", LABELS)
def test_integral_matches_quadrature(label):
    rng = np.random.default_rng(5)
    for _ in range(15):
        p = rand_params(SETTINGS[label], rng)
        assert integral(p) == pytest.approx(quad_model(p, lambda x: 1.0), rel=1e-10)


def test_integral_infinite_for_steep_tails():
    assert integral(SplineParams(Setting.gamma(1.0, 1.0), [0.0], [0.0, 1.0])) == math.inf
    with pytest.raises(NonIntegrable):
        normalize(SplineParams(Setting.gamma(1.0, 1.0), [0.0], [0.0, 1.0]))


@pytest.mark.parametrize("label", LABELS)
def test_shift_and_normalize(label):
    rng = np.random.default_rng(6)
    p = rand_params(SETTINGS[label], rng)
    q = shift(p, 0.7)
    x = probe_points(p, rng)
    np.testing.assert_allclose(evaluate(q, x), evaluate(p, x) + 0.7, rtol=1e-14)
    assert integral(normalize(p)) == pytest.approx(1.0, abs=1e-14)
    m = normalize(ActiveModel(p))
    assert isinstance(m, ActiveModel)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(LABELS), st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_insert_then_remove_keeps_function(label, seed, k):
    rng = np.random.default_rng(seed)
    p = rand_params(SETTINGS[label], rng)
    lo, hi = (p.tau[0], p.tau[-1]) if p.kind is Kind.LOG_CONCAVE else (0.05, 4.5)
    new = np.setdiff1d(np.round(rng.uniform(lo, hi, k), 6), p.tau)
    new = new[(new > lo) & (new < hi)]
    q = insert_knots(p, new)
    x = probe_points(p, rng)
    np.testing.assert_allclose(evaluate(q, x), evaluate(p, x), rtol=1e-12, atol=1e-12)
    assert set(collapsed(q)) >= set(new)
    r = remove_knots(q, new)
    np.testing.assert_allclose(evaluate(r, x), evaluate(p, x), rtol=1e-11, atol=1e-11)


def test_remove_all_gauss_knots_gives_affine():
    p = affine(Setting.gauss(), 0.3, -0.4)
    q = insert_knots(p, [0.0, 1.0])
    r = remove_knots(q, q.tau)
    assert r.m == 0
    np.testing.assert_allclose(r.theta, p.theta, atol=1e-15)
    assert prune(ActiveModel(q)).params.m == 0


def test_insert_knots_rejects_duplicates():
    p = SplineParams(Setting.gauss(), [0.0], [0.0, 0.0, 1.0])
    with pytest.raises(InvalidInput):
        insert_knots(p, [0.0])
    with pytest.raises(InvalidInput):
        insert_knots(SplineParams(Setting.log_concave(), [0.0, 1.0], [0.0, 0.0]), [2.0])


@pytest.mark.parametrize("label", LABELS)
def test_mutate_stays_feasible(label):
    rng = np.random.default_rng(7)
    for _ in range(30):
        p = rand_params(SETTINGS[label], rng)
        target = p.with_theta(p.theta + rng.normal(size=p.theta.size))
        model, t_o = mutate(ActiveModel(p), target)
        assert 0 <= t_o <= 1
        assert np.all(model.params.kinks() >= -1e-12)
        assert set(model.dset.tolist()) <= set(p.dset().tolist())
        if np.all(target.kinks() >= 0):
            assert t_o == 1
        # the result is the blend with kinks that reached zero removed
        blend = p.with_theta((1 - t_o) * p.theta + t_o * target.theta)
        x = probe_points(p, rng)
        np.testing.assert_allclose(evaluate(model.params, x), evaluate(blend, x), rtol=1e-9, atol=1e-9)


def test_mutate_requires_positive_new_kinks():
    p = affine(Setting.gauss(), 0.0, 0.0)
    bad = SplineParams(Setting.gauss(), [0.0], [0.5, 0.0, -0.5])
    with pytest.raises(InvalidInput):
        mutate(ActiveModel(p), bad)
    good = SplineParams(Setting.gauss(), [0.0], [-0.5, 0.0, 0.5])
    m, t_o = mutate(ActiveModel(p), good)
    assert t_o == 1 and m.params.m == 1


def test_classify_cases():
    p = SplineParams(Setting.gauss(), [0.0, 1.0], [0.0, 0.0, 0.0, 0.0])
    case, k = classify(p, np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_array_equal(case, [2, 0, 1, 0, 3])
    np.testing.assert_array_equal(k, [0, 1, 1, 2, 2])
    case, _ = classify(affine(Setting.gauss(), 0, 0), np.array([3.0]))
    assert case[0] == 4


@pytest.mark.parametrize("label", LABELS)
def test_localized_kink_differs_from_kink_by_spline(label):
    rng = np.random.default_rng(8)
    for _ in range(30):
        p = rand_params(SETTINGS[label], rng)
        lo, hi = (p.tau[0], p.tau[-1]) if p.kind is Kind.LOG_CONCAVE else (0.0, 5.0)
        tau = rng.uniform(lo, hi)
        V = localized_kink(p, tau)
        xi = p.setting.xi
        # V - xi (x - tau)^+ has kinks only at the knots of p
        x = probe_points(p, rng, 200)
        h = 1e-4
        edges = np.concatenate((p.tau, [tau, 0.0]))
        x = x[np.min(np.abs(x[:, None] - edges[None, :]), axis=1) > 2 * h]
        if p.kind is Kind.TAIL_GAMMA:
            x = x[x > 2 * h]
        g = lambda z: V(z) - xi * np.maximum(z - tau, 0.0)
        second = g(x - h) - 2 * g(x) + g(x + h)
        np.testing.assert_allclose(second, 0.0, atol=1e-10)
        # the kink of V at tau is xi, and V vanishes on the knots
        if V.case != "zero":
            jump = (V(tau + h) - V(tau)) / h - (V(tau) - V(tau - h)) / h
            assert jump == pytest.approx(xi, rel=1e-6)
        if p.m:
            np.testing.assert_allclose(V(p.tau), 0.0, atol=1e-14)
        if V.case == "interior":
            a, b = V.nodes[0], V.nodes[-1]
            out = np.array([a - 1.0, b + 1.0])
            np.testing.assert_array_equal(V(out), 0.0)


def test_localized_kink_on_a_knot_is_zero():
    p = SplineParams(Setting.gauss(), [0.0], [0.0, 0.0, 1.0])
    V = localized_kink(p, 0.0)
    assert V.case == "zero"
    assert np.all(V(np.linspace(-3, 3, 7)) == 0)


@pytest.mark.parametrize("label", ["2a", "2b"])
def test_merge_gap_knots_keeps_data_values_and_lowers_mass(label):
    rng = np.random.default_rng(40)
    done = 0
    while done < 20:
        p = rand_params(SETTINGS[label], rng, max_knots=4)
        if p.m < 2 or not p.in_theta() or not np.all(p.kinks() > 0):
            continue
        # data avoid the gap between the first two knots
        x = np.sort(np.r_[rng.uniform(-3, p.tau[0], 2) if label == "2a" else rng.uniform(0, p.tau[0], 2),
                          rng.uniform(p.tau[1], p.tau[1] + 3, 3)])
        x = x[(x < p.tau[0]) | (x > p.tau[1])]
        q = merge_gap_knots(p, x)
        assert q.m < p.m and q.in_theta()
        np.testing.assert_allclose(evaluate(q, x), evaluate(p, x), rtol=1e-12, atol=1e-12)
        assert integral(q) < integral(p)
        assert np.all(evaluate(q, np.linspace(0, 6, 50)) <= evaluate(p, np.linspace(0, 6, 50)) + 1e-12)
        done += 1
    assert merge_gap_knots(p, np.sort(np.r_[p.tau - 1e-3, p.tau[-1] + 1])) is p
