import math

import numpy as np
import pytest
from scipy import stats

from conftest import mean_se, within
from inarhawkes.core import CountSeries, Exponential, InarParams, RngStream, discretize
from inarhawkes.errors import InvalidProbability, SeriesTooShort, UnsupportedArgument
from inarhawkes.inar import (
    FiniteSupportSeq,
    autocovariance,
    beta_coeffs,
    beta_tail,
    branching_lookback,
    counting_pmf_ratio,
    default_burn_in,
    inar_mean,
    mean_truncation_order,
    mgf,
    residuals,
    simulate_families,
    simulate_family,
    simulate_inar,
    simulate_inar_branching,
    simulate_inar_branching_paths,
    simulate_inar_paths,
    thin,
    thin_bernoulli,
    truncate,
)

AR1 = InarParams(1.0, [0.5])
MIXED = InarParams(0.7, [0.3, 0.0, 0.2, 0.1])


def spectral_beta(params, n):
    """β_k as Fourier coefficients of 1 / (1 - Σ α_k z^k) on a fine circle."""
    m = 1 << 16
    z = np.exp(2j * np.pi * np.arange(m) / m)
    a = np.polyval(np.concatenate((params.alphas[::-1], [0.0])), z)
    return np.fft.fft(1.0 / (1.0 - a)).real[: n + 1] / m


def spectral_autocov(params, max_lag):
    m = 1 << 16
    z = np.exp(2j * np.pi * np.arange(m) / m)
    a = np.polyval(np.concatenate((params.alphas[::-1], [0.0])), z)
    power = np.abs(1.0 / (1.0 - a)) ** 2
    return inar_mean(params) * np.fft.ifft(power).real[: max_lag + 1]


def chi2_pvalue(sample, pmf, top):
    obs = np.bincount(np.minimum(sample, top), minlength=top + 1)
    p = np.array([pmf(k) for k in range(top)] + [0.0])
    p[-1] = 1.0 - p[:-1].sum()
    return stats.chisquare(obs, p * len(sample)).pvalue


def two_sample_chi2_pvalue(a, b, top):
    table = np.vstack([np.bincount(np.minimum(a, top), minlength=top + 1),
                       np.bincount(np.minimum(b, top), minlength=top + 1)])
    table = table[:, table.sum(axis=0) > 0]
    return stats.chi2_contingency(table)[1]


# thinning


def test_thin_of_zero_is_zero():
    assert np.all(thin(0.3, 0, RngStream(1), size=1000) == 0)


def test_thin_moments_and_law():
    x = thin(0.5, 4, RngStream(2), size=100_000)
    m, se = mean_se(x)
    assert within(m, 2.0, se)
    var_se = math.sqrt((np.mean((x - m) ** 4) - x.var() ** 2) / x.size)
    assert within(x.var(ddof=1), 2.0, var_se)
    assert chi2_pvalue(x, lambda k: stats.poisson.pmf(k, 2.0), 8) > 0.01


def test_thin_bernoulli():
    assert np.all(thin_bernoulli(0.3, 0, RngStream(3), size=100) == 0)
    assert np.all(thin_bernoulli(1.0, 7, RngStream(3), size=100) == 7)
    x = thin_bernoulli(0.5, 4, RngStream(4), size=50_000)
    assert chi2_pvalue(x, lambda k: stats.binom.pmf(k, 4, 0.5), 4) > 0.01
    with pytest.raises(InvalidProbability):
        thin_bernoulli(1.2, 3)


def test_counting_pmf_ratio_closed_forms():
    r0 = counting_pmf_ratio(1.0, 0.01, 0)
    assert r0.ratio == pytest.approx(math.exp(-0.01) / 0.99, rel=1e-14)
    assert r0.ratio == pytest.approx(1.000050, abs=1e-6)
    assert counting_pmf_ratio(1.0, 0.01, 1).ratio == pytest.approx(0.990050, abs=1e-6)
    assert counting_pmf_ratio(0.0, 0.5, 0).ratio == 1.0
    r2 = counting_pmf_ratio(1.0, 0.01, 2)
    assert math.isinf(r2.ratio) and r2.bernoulli_pmf == 0
    assert r2.poisson_pmf == pytest.approx(stats.poisson.pmf(2, 0.01), rel=1e-12)


# β weights and mean


def test_beta_identity_and_geometric_cases():
    np.testing.assert_array_equal(beta_coeffs(InarParams(1.0, []), 4), [1, 0, 0, 0, 0])
    np.testing.assert_allclose(beta_coeffs(AR1, 30), 0.5 ** np.arange(31), rtol=1e-14)


@pytest.mark.parametrize("params", [AR1, MIXED, discretize(1.0, Exponential(0.5, 1), 0.1)])
def test_beta_matches_spectral_oracle(params):
    beta = beta_coeffs(params, 200)
    np.testing.assert_allclose(beta, spectral_beta(params, 200), atol=1e-11)
    assert np.all(beta >= 0)


def test_beta_tail_matches_long_sum():
    beta = beta_coeffs(MIXED, 20)
    long = beta_coeffs(MIXED, 5000)
    assert beta_tail(MIXED, beta) == pytest.approx(long[21:].sum(), rel=1e-10)


def test_inar_mean():
    assert inar_mean(InarParams(1.0, [])) == 1.0
    assert inar_mean(AR1) == 2.0
    assert inar_mean(InarParams(0.0, [0.4])) == 0.0


# autocovariance


def test_autocovariance_closed_forms():
    np.testing.assert_allclose(autocovariance(InarParams(1.0, []), 3), [1, 0, 0, 0])
    R = autocovariance(AR1, 5)
    np.testing.assert_allclose(R, 8 / 3 * 0.5 ** np.arange(6), atol=1e-9)


@pytest.mark.parametrize("params", [MIXED, discretize(1.0, Exponential(0.5, 1), 0.1)])
def test_autocovariance_matches_spectral_oracle(params):
    np.testing.assert_allclose(autocovariance(params, 10, 1e-11), spectral_autocov(params, 10), atol=1e-9)


def test_autocovariance_sum_bound():
    R = autocovariance(AR1, 200)
    assert R.sum() <= 1.0 / 0.5**3


# simulation


def test_simulate_inar_iid_case():
    s = simulate_inar(InarParams(1.0, []), 100_000, rng=RngStream(5))
    m, se = mean_se(s.counts)
    assert within(m, 1.0, se)
    assert abs(s.counts.var() - 1.0) < 3 * math.sqrt(3.0 / s.counts.size)


def test_simulate_inar_mean_ar1():
    s = simulate_inar(AR1, 100_000, rng=RngStream(6))
    # long-run variance Σ_j R(j) = α0 / (1-K)^3
    se = math.sqrt(1.0 / 0.5**3 / len(s))
    assert within(s.counts.mean(), 2.0, se)


def test_simulate_inar_is_deterministic():
    a = simulate_inar(MIXED, 500, rng=RngStream(9))
    b = simulate_inar(MIXED, 500, rng=RngStream(9))
    np.testing.assert_array_equal(a.counts, b.counts)
    paths = simulate_inar_paths(MIXED, 50, reps=4, rng=RngStream(1))
    assert paths.shape == (4, 50)


def test_bernoulli_counting_mean():
    x = simulate_inar_paths(AR1, 50_000, 1, rng=RngStream(7), counting="bernoulli")[0]
    # Bernoulli thinning keeps the mean α0/(1-K)
    assert abs(x.mean() - 2.0) < 3 * math.sqrt(8.0 / x.size)


def test_default_burn_in():
    assert default_burn_in(AR1) == 1000
    q = discretize(1.0, Exponential(0.95, 1), 0.1)
    assert default_burn_in(q) >= branching_lookback(q)


# families


def test_family_without_reproduction():
    fam = simulate_family(InarParams(1.0, []), 5, RngStream(1))
    np.testing.assert_array_equal(fam.family, [1, 0, 0, 0, 0, 0])
    assert fam.total_size == 1


def test_family_csv():
    fam = simulate_family(AR1, 2, RngStream(3))
    lines = fam.to_csv().splitlines()
    assert lines[0] == "n,generation,count"
    assert lines[1] == "0,0,1"
    assert len(lines) == 1 + 3 * len(fam.per_generation)


def test_family_size_and_generations():
    F, Y = simulate_families(AR1, 60, 100_000, RngStream(11))
    S = F.sum(axis=1)
    m, se = mean_se(S)
    assert within(m, 2.0, se)
    for g in range(4):
        m, se = mean_se(Y[:, g])
        assert within(m, 0.5**g, max(se, 1e-12))


def test_family_mean_equals_beta():
    F, _ = simulate_families(MIXED, 10, 100_000, RngStream(12))
    beta = beta_coeffs(MIXED, 10)
    for n in range(11):
        m, se = mean_se(F[:, n])
        assert within(m, beta[n], max(se, 1e-12))


# branching construction


def test_branching_without_immigration_is_empty():
    s = simulate_inar_branching(InarParams(0.0, [0.5]), 100, rng=RngStream(1))
    assert s.counts.sum() == 0


def test_branching_mean():
    s = simulate_inar_branching(AR1, 100_000, rng=RngStream(2))
    se = math.sqrt(8.0 / len(s))
    assert within(s.counts.mean(), 2.0, se)


def test_branching_and_recursion_agree_in_law():
    a = simulate_inar_paths(AR1, 1, 10_000, rng=RngStream(3))[:, 0]
    b = simulate_inar_branching_paths(AR1, 1, 10_000, rng=RngStream(4))[:, 0]
    assert two_sample_chi2_pvalue(a, b, 8) > 0.01


# residuals


def test_residuals_white_noise():
    s = simulate_inar(AR1, 100_000, rng=RngStream(8))
    u = residuals(s, AR1)
    assert len(u) == len(s) - 1
    m, se = mean_se(u)
    assert within(m, 0.0, se)
    var_se = math.sqrt((np.mean((u - m) ** 4) - u.var() ** 2) / u.size)
    assert within(u.var(), 2.0, var_se)
    r1 = np.corrcoef(u[:-1], u[1:])[0, 1]
    assert within(r1, 0.0, 1.0 / math.sqrt(u.size))


def test_residuals_too_short():
    with pytest.raises(SeriesTooShort):
        residuals(CountSeries(1.0, 0, [1, 2]), MIXED)


# MGF


def stationary_ar1_pmf(params, top=80):
    """Stationary law of the INAR(1) chain on {0..top} by power iteration."""
    x = np.arange(top + 1)
    P = stats.poisson.pmf(x[None, :], params.alpha0 + params.alphas[0] * x[:, None])
    P /= P.sum(axis=1, keepdims=True)
    pi = np.full(top + 1, 1.0 / (top + 1))
    for _ in range(2000):
        pi = pi @ P
    return pi, P


def test_mgf_trivial_and_poisson():
    assert mgf(AR1, [0.0, 0.0]) == 1.0
    for s in (0.1, 1.0, 3.0):
        assert mgf(InarParams(1.3, []), [-s]) == pytest.approx(math.exp(1.3 * (math.exp(-s) - 1)), abs=1e-10)


def test_mgf_rejects_positive_arguments():
    with pytest.raises(UnsupportedArgument):
        mgf(AR1, [0.1])


def test_mgf_matches_markov_chain_oracle():
    pi, P = stationary_ar1_pmf(AR1)
    x = np.arange(len(pi))
    t0, t1 = -0.2, -0.1
    oracle = float(np.sum(pi[:, None] * P * np.exp(t0 * x[:, None] + t1 * x[None, :])))
    assert mgf(AR1, FiniteSupportSeq((t0, t1)), tol=1e-12) == pytest.approx(oracle, abs=1e-10)
    oracle0 = float(pi @ np.exp(-0.7 * x))
    assert mgf(AR1, [-0.7], tol=1e-12) == pytest.approx(oracle0, abs=1e-10)


def test_mgf_matches_monte_carlo_for_longer_argument():
    t = np.array([-0.3, 0.0, -0.05, -0.2])
    paths = simulate_inar_paths(MIXED, 4, 200_000, burn_in=200, rng=RngStream(13))
    vals = np.exp(paths @ t)
    m, se = mean_se(vals)
    assert within(mgf(MIXED, t), m, se)


def test_finite_support_seq():
    assert FiniteSupportSeq((0.0, -1.0, 0.0)).support == 1


# truncation


def test_truncate_identity_and_example():
    q = discretize(1.0, Exponential(1, 1), 0.1)
    assert truncate(q, q.p) is q
    assert truncate(q, q.p + 5) == q
    t = truncate(q, 10)
    assert t.tail_bound == 0 and t.p == 10
    oracle = 0.1 * (math.exp(-0.1) - math.exp(-1.1)) / (1 - math.exp(-0.1))
    assert t.K == pytest.approx(oracle, rel=1e-12)
    assert t.K == pytest.approx(0.601041, abs=1e-6)


def test_truncated_means_increase_to_full_mean():
    q = discretize(1.0, Exponential(0.5, 1), 0.1)
    means = [inar_mean(truncate(q, p)) for p in range(q.p + 1)]
    assert np.all(np.diff(means) >= 0)
    assert means[-1] == pytest.approx(inar_mean(q), rel=1e-9)
    p = mean_truncation_order(q, 1e-6)
    assert abs(inar_mean(truncate(q, p)) - inar_mean(q)) <= 1e-6
    assert abs(inar_mean(truncate(q, p - 1)) - inar_mean(q)) > 1e-6 * 0.1
