import math

import numpy as np
import pytest
from scipy import stats

from shapemle.data import Setting, SolverConfig, ingest
from shapemle.errors import InvalidEnvelope, InvalidInput
from shapemle.objective import cdf
from shapemle.simulate import (
    RngStream,
    example_2b,
    gauss_sample,
    sample_piecewise_logaffine,
    simulate_2a,
    simulate_2b,
)
from shapemle.solver import fit
from shapemle.spline import SplineParams, affine, evaluate, normalize

N = 100_000
KS_BAND = 1.63 / math.sqrt(N) * 1.5


def ks(x, params):
    return stats.kstest(x, lambda z: cdf(params, z)).statistic


def tent():
    return normalize(SplineParams(Setting.log_concave(), [-1.0, 0.3, 2.0], [0.0, 1.0, -2.0]))


def gauss_model():
    return normalize(SplineParams(Setting.gauss(), [-0.5, 0.8], [-0.7, 0.0, 0.1, 1.3]))


def test_rng_stream_determinism_and_independence():
    a = RngStream(5, 2).uniform(10)
    b = RngStream(5, 2).uniform(10)
    c = RngStream(5, 3).uniform(10)
    np.testing.assert_array_equal(a, b)
    assert not np.any(a == c)
    np.testing.assert_array_equal(RngStream(5).fork(3).uniform(10), c)


def test_gauss_sample_moments():
    x = gauss_sample(N, 0.5, 1.25, RngStream(1))
    assert abs(x.mean() - 0.5) < 4 * 1.25 / math.sqrt(N)
    assert stats.kstest(x, "norm", args=(0.5, 1.25)).statistic < KS_BAND


def test_uniform_log_affine_sampler():
    p = SplineParams(Setting.log_concave(), [0.0, 1.0], [0.0, 0.0])
    x = sample_piecewise_logaffine(N, p, RngStream(2))
    assert x.min() >= 0 and x.max() <= 1
    assert abs(x.mean() - 0.5) < 4 / math.sqrt(12 * N)


def test_tent_sampler_ks():
    p = tent()
    x = sample_piecewise_logaffine(N, p, RngStream(3))
    assert ks(x, p) < min(0.01, KS_BAND)
    np.testing.assert_array_equal(x, sample_piecewise_logaffine(N, p, RngStream(3)))


def test_log_affine_sampler_rejects():
    with pytest.raises(InvalidInput):
        sample_piecewise_logaffine(10, gauss_model(), RngStream(0))
    with pytest.raises(InvalidInput):
        sample_piecewise_logaffine(10, SplineParams(Setting.log_concave(), [0.0, 2.0], [0.0, 0.0]),
                                   RngStream(0))


def test_simulate_2a_flat_is_standard_normal():
    p = affine(Setting.gauss(), 0.0, 0.0)
    x = simulate_2a(N, p, RngStream(4))
    assert abs(x.mean()) < 4 / math.sqrt(N)
    assert stats.kstest(x, "norm").statistic < KS_BAND


def test_simulate_2a_spline_ks():
    p = gauss_model()
    x = simulate_2a(N, p, RngStream(5))
    assert ks(x, p) < min(0.01, KS_BAND)


def test_simulate_2a_fitted_model_ks():
    x = gauss_sample(400, 0.5, 1.25, RngStream(6))
    r = fit(ingest(zip(x, np.ones(x.size))), SolverConfig(Setting.gauss()))
    y = simulate_2a(N, r.params, RngStream(7))
    assert ks(y, r.params) < 0.01


def test_simulate_2b_example_ks_and_rate():
    p = example_2b()
    x, proposals = simulate_2b(N, p, 1.0, 1.0, RngStream(8), return_proposals=True)
    assert ks(x, p) < min(0.01, KS_BAND)
    gamma = p.slopes()[-1]
    rate = math.exp(-float(evaluate(p, 0.0))) * (1 - gamma / 1.0) ** 1.0
    se = math.sqrt(rate * (1 - rate) / proposals)
    assert abs(N / proposals - rate) < 3 * se
    # the normalizing constant quoted for this example
    assert math.exp(float(evaluate(p, 0.0))) == pytest.approx(0.619, abs=5e-4)


@pytest.mark.parametrize("alpha, beta, slope", [(1.0, 1.0, 0.3), (2.5, 1.5, 1.2), (0.6, 2.0, 0.0)])
def test_simulate_2b_linear_accepts_all(alpha, beta, slope):
    p = normalize(SplineParams(Setting.gamma(alpha, beta), [0.0], [0.0, slope]))
    x, proposals = simulate_2b(1000, p, alpha, beta, RngStream(9), return_proposals=True)
    assert proposals == 1000
    # the law is Gamma(alpha, beta - slope)
    y = simulate_2b(N, p, alpha, beta, RngStream(10))
    assert stats.kstest(y, "gamma", args=(alpha, 0, 1 / (beta - slope))).statistic < KS_BAND


def test_simulate_2b_invalid_envelope():
    s = Setting.gamma(1.0, 1.0)
    p = SplineParams(s, [0.0], [0.0, 1.0])
    with pytest.raises(InvalidEnvelope):
        simulate_2b(10, p, 1.0, 1.0, RngStream(0))
    with pytest.raises(InvalidInput):
        simulate_2b(10, SplineParams(s, [0.0], [0.3, 0.5]), 1.0, 1.0, RngStream(0))


def test_samplers_are_deterministic():
    for f, p in ((simulate_2a, gauss_model()), (sample_piecewise_logaffine, tent())):
        np.testing.assert_array_equal(f(500, p, RngStream(11, 4)), f(500, p, RngStream(11, 4)))
    p = example_2b()
    np.testing.assert_array_equal(simulate_2b(500, p, 1.0, 1.0, RngStream(12)),
                                  simulate_2b(500, p, 1.0, 1.0, RngStream(12)))
