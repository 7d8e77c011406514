import json
import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from inarhawkes import core
from inarhawkes.core import (
    CountSeries,
    Exponential,
    InarParams,
    PointPattern,
    RngStream,
    Step,
    Table,
    discretize,
    k_delta,
    kernel_eval,
    kernel_mass,
    zero_kernel,
)
from inarhawkes.errors import (
    ConfigInvalid,
    DiscretizationSupercritical,
    MassNotSubcritical,
    TailTooHeavy,
)


# kernel_eval


@pytest.mark.parametrize("kernel", [Exponential(0.5, 1), Step(0.8, 1), Table(((0.5, 0.3), (1.0, 0.1)))])
def test_kernel_vanishes_on_nonpositive_times(kernel):
    assert kernel_eval(kernel, -1.0) == 0.0
    assert kernel_eval(kernel, 0.0) == 0.0


def test_kernel_eval_values():
    assert kernel_eval(Step(0.8, 1), 0.5) == 0.8
    assert kernel_eval(Step(0.8, 1), 1.0) == 0.8
    assert kernel_eval(Step(0.8, 1), 1.0 + 1e-12) == 0.0
    assert kernel_eval(Exponential(0.5, 1), 2.0) == pytest.approx(0.5 * math.exp(-2.0), rel=1e-15)


def test_table_interpolates_and_is_flat_before_first_knot():
    k = Table(((1.0, 0.4), (2.0, 0.2)))
    assert k(0.3) == pytest.approx(0.4)
    assert k(1.5) == pytest.approx(0.3)
    assert k(2.0) == pytest.approx(0.2)
    assert k(2.0001) == 0.0


# kernel_mass


def test_kernel_mass_closed_forms():
    assert kernel_mass(zero_kernel()) == 0.0
    assert kernel_mass(Exponential(0.5, 1)) == pytest.approx(0.5)
    assert kernel_mass(Step(0.8, 1)) == pytest.approx(0.8)


def test_table_mass_matches_quadrature():
    k = Table(((0.5, 0.3), (1.0, 0.6), (2.5, 0.05)))
    oracle = integrate.quad(lambda t: float(k(t)), 0, 3, points=[0.5, 1.0, 2.5])[0]
    assert kernel_mass(k) == pytest.approx(oracle, rel=1e-10)


def test_kernel_mass_supercritical_raises_when_required():
    assert kernel_mass(Step(1.2, 1)) == pytest.approx(1.2)
    with pytest.raises(MassNotSubcritical):
        kernel_mass(Step(1.2, 1), require_subcritical=True)


def test_invalid_kernel_parameters():
    with pytest.raises(ConfigInvalid):
        Exponential(-1, 1)
    with pytest.raises(ConfigInvalid):
        Exponential(1, 0)
    with pytest.raises(ConfigInvalid):
        Step(0.5, -1)
    with pytest.raises(ConfigInvalid):
        Table(((1.0, 0.2), (0.5, 0.1)))


# k_delta


def test_k_delta_zero_kernel():
    assert k_delta(zero_kernel(), 0.1) == 0.0


def test_k_delta_exponential_against_series():
    oracle = mpmath.nsum(lambda k: 0.1 * mpmath.e ** (-0.1 * k), [1, mpmath.inf])
    assert k_delta(Exponential(1, 1), 0.1) == pytest.approx(float(oracle), rel=1e-13)
    assert k_delta(Exponential(1, 1), 0.1) == pytest.approx(0.950833, abs=1e-6)


def test_k_delta_step_counts_grid_points():
    assert k_delta(Step(0.8, 1), 0.25) == pytest.approx(0.8, rel=1e-14)
    # grid points 0.3, 0.6, 0.9 lie inside (0, 1]
    assert k_delta(Step(0.8, 1), 0.3) == pytest.approx(0.3 * 0.8 * 3)


def test_k_delta_table_direct_sum():
    k = Table(((0.5, 0.3), (1.0, 0.6), (2.5, 0.05)))
    d = 0.07
    oracle = d * sum(float(k(j * d)) for j in range(1, 200))
    assert k_delta(k, d) == pytest.approx(oracle, rel=1e-12)


def test_k_delta_rejects_coarse_grid():
    # rising kernel with mass 0.45 whose single grid value at Δ=1 is 1.8
    kernel = Table(((0.5, 0.0), (1.0, 1.8)))
    assert kernel_mass(kernel) == pytest.approx(0.45)
    with pytest.raises(DiscretizationSupercritical):
        k_delta(kernel, 1.0)
    assert k_delta(kernel, 0.1) < 1


def test_k_delta_approaches_mass_for_exponential():
    kernel = Exponential(0.5, 1)
    values = [k_delta(kernel, d) for d in (0.2, 0.1, 0.05, 0.025)]
    assert all(np.diff(values) > 0)
    gaps = [0.5 - v for v in values]
    # right Riemann sums of a smooth decreasing kernel: error halves with Δ
    assert all(0.45 < g2 / g1 < 0.55 for g1, g2 in zip(gaps, gaps[1:]))


# discretize


def test_discretize_zero_kernel():
    p = discretize(1.0, zero_kernel(), 0.1)
    assert p.alpha0 == pytest.approx(0.1)
    assert p.p == 0 and p.K == 0


def test_discretize_exponential_with_horizon():
    p = discretize(1.0, Exponential(1, 1), 0.1, trunc_horizon=20)
    k = np.arange(1, p.p + 1)
    assert p.p == 200
    np.testing.assert_allclose(p.alphas, 0.1 * np.exp(-0.1 * k), rtol=1e-13)
    assert p.K == pytest.approx(0.950833194, abs=1e-9)
    oracle_tail = float(mpmath.nsum(lambda j: 0.1 * mpmath.e ** (-0.1 * j), [201, mpmath.inf]))
    assert p.tail_bound == pytest.approx(oracle_tail, rel=1e-10)


def test_discretize_step():
    p = discretize(2.0, Step(0.8, 1), 0.5)
    assert p.alpha0 == 1.0
    np.testing.assert_allclose(p.alphas, [0.4, 0.4])
    assert p.K == pytest.approx(0.8)
    assert p.tail_bound == 0.0


def test_discretize_default_horizon_meets_tolerance():
    p = discretize(1.0, Exponential(0.5, 1), 0.05)
    assert p.tail_bound < 1e-10 * p.K
    assert p.K == pytest.approx(k_delta(Exponential(0.5, 1), 0.05), rel=1e-14)


def test_discretize_tail_too_heavy():
    with pytest.raises(TailTooHeavy):
        discretize(1.0, Exponential(0.5e-6, 1e-6), 1.0, max_coeffs=1000)


# parameter objects


def test_inar_params_validation():
    with pytest.raises(MassNotSubcritical):
        InarParams(1.0, [0.6, 0.4])
    with pytest.raises(ValueError):
        InarParams(-1.0, [0.1])
    with pytest.raises(ValueError):
        InarParams(1.0, [-0.1])
    p = InarParams(1.0, [0.3, 0.2], 0.1)
    assert p.K == pytest.approx(0.6)
    assert p == InarParams(1.0, [0.3, 0.2], 0.1)
    with pytest.raises(ValueError):
        p.alphas[0] = 0.0


def test_count_series_csv_round_trip(tmp_path):
    s = CountSeries(0.1, 5, [3, 0, 2])
    path = tmp_path / "c.csv"
    text = s.to_csv(path)
    assert text == "index,count\n5,3\n6,0\n7,2\n"
    back = CountSeries.from_csv(path, 0.1)
    assert back.start_index == 5
    np.testing.assert_array_equal(back.counts, s.counts)


def test_count_series_rejects_negative_counts():
    with pytest.raises(ValueError):
        CountSeries(1.0, 0, [1, -1])


def test_point_pattern_invariants(tmp_path):
    pat = PointPattern((0, 1), [0.2, 0.2, 0.7])
    assert len(pat) == 3
    path = tmp_path / "p.csv"
    pat.to_csv(path)
    back = PointPattern.from_csv(path, (0, 1))
    np.testing.assert_array_equal(back.times, pat.times)
    with pytest.raises(ValueError):
        PointPattern((0, 1), [0.5, 0.2])
    with pytest.raises(ValueError):
        PointPattern((0, 1), [0.0])
    with pytest.raises(ValueError):
        PointPattern((0, 1), [1.5])


def test_rng_stream_reproducible_and_independent():
    a = RngStream(7, 1).generator().random(5)
    b = RngStream(7, 1).generator().random(5)
    c = RngStream(7, 2).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(7).substream(3) == RngStream(7).substream(3)


def test_model_json_round_trip():
    doc = {"eta": 1.5, "kernel": {"family": "exponential", "a": 0.5, "b": 1.0}, "delta": 0.1}
    eta, kernel, delta = core.model_from_json(json.loads(json.dumps(doc)))
    assert (eta, kernel, delta) == (1.5, Exponential(0.5, 1.0), 0.1)
    assert core.model_to_json(eta, kernel, delta) == doc
    for fam in (Step(0.8, 1), Table(((0.5, 0.3), (1.0, 0.1)))):
        assert core.kernel_from_dict(fam.to_dict()) == fam


def test_model_json_rejects_garbage():
    with pytest.raises(ConfigInvalid):
        core.model_from_json({"kernel": {"family": "step", "c": 1, "w": 1}})
    with pytest.raises(ConfigInvalid):
        core.model_from_json({"eta": 1, "kernel": {"family": "gamma"}})


# displacement samplers against the normalized kernel


@pytest.mark.parametrize(
    "kernel",
    [Exponential(0.5, 2.0), Step(0.4, 1.5), Table(((0.5, 0.3), (1.0, 0.6), (2.5, 0.05)))],
)
def test_displacements_follow_normalized_kernel(kernel):
    x = kernel.sample_displacement(np.random.default_rng(11), 20_000)
    assert np.all(x > 0)

    def cdf(v):
        v = np.atleast_1d(v)
        return np.array([integrate.quad(lambda t: float(kernel(t)), 0, min(u, 50.0), limit=200)[0] for u in v]) / kernel.mass

    # KS against quadrature on a subsample keeps the oracle cheap
    assert stats.kstest(x[:1000], cdf).pvalue > 0.01


def test_exp_moment_matches_quadrature():
    for kernel in (Exponential(0.5, 2.0), Step(0.4, 1.5), Table(((0.5, 0.3), (1.0, 0.6)))):
        oracle = integrate.quad(lambda t: math.exp(0.3 * t) * float(kernel(t)), 0, 60, points=[0.5, 1.0, 1.5], limit=200)[0]
        assert kernel.exp_moment(0.3) == pytest.approx(oracle, rel=1e-7)
