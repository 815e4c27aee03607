import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.special import gammaln

from subwalk import bernstein as bf
from subwalk.errors import NormalizationRequiredError, TruncationError
from subwalk.lattice import LatticeWalk, srw_pmf
from subwalk.rng import make_rng, split
from subwalk.subordination import (TailSampler, sample_stable_subordinator, sample_step,
                                   sample_step_counts, sample_steps, sample_subordinator,
                                   step_weights, subordinate_step_pmf, sum_step_counts,
                                   tail_weight)

C = 1 / math.log(2)


def sibuya(alpha, m):
    """alpha Gamma(m - alpha) / (Gamma(1 - alpha) m!)"""
    m = np.asarray(m, dtype=float)
    return alpha * np.exp(gammaln(m - alpha) - gammaln(1 - alpha) - gammaln(m + 1))


def sibuya_tail(alpha, M):
    """P(m > M) for the same law: Gamma(M + 1 - alpha) / (Gamma(1 - alpha) M!)"""
    return math.exp(gammaln(M + 1 - alpha) - gammaln(1 - alpha) - gammaln(M + 1))


@pytest.fixture(scope="module")
def sd05(stable05):
    return step_weights(stable05, strict=False)


def test_pure_drift_weights():
    sd = step_weights(bf.pure_drift())
    assert sd.direct_atom == 1.0 and sd.M == 0 and sd.truncation_mass == 0.0


def test_stable_weight_examples(sd05):
    assert sd05.weight(1) == pytest.approx(0.5, abs=1e-10)
    assert sd05.weight(2) == pytest.approx(0.125, abs=1e-10)
    assert sd05.weight(3) == pytest.approx(0.0625, abs=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_stable_weights_gamma_formula(alpha):
    sd = step_weights(bf.stable_exponent(alpha), strict=False)
    m = np.arange(1, 21)
    np.testing.assert_allclose(sd.weights[:20], sibuya(alpha, m), atol=1e-10, rtol=0)
    mp.mp.dps = 40
    a = mp.mpf(alpha)
    for m in (65, 1000, 50_000, sd.M):
        mm = mp.mpf(m)
        want = a * mp.exp(mp.loggamma(mm - a) - mp.loggamma(1 - a) - mp.loggamma(mm + 1))
        assert sd.weight(m) == pytest.approx(float(want), rel=1e-10)
    mm = mp.mpf(sd.M)
    want = mp.exp(mp.loggamma(mm + 1 - a) - mp.loggamma(1 - a) - mp.loggamma(mm + 1))
    assert sd.truncation_mass == pytest.approx(float(want), rel=1e-10)


def test_log_example_weights_against_mpmath(log_example):
    sd = step_weights(log_example, strict=False)
    mp.mp.dps = 40
    c = 1 / mp.log(2)
    for m in (1, 7, 200):
        mm = mp.mpf(m)
        f = lambda t: mp.exp(mm * mp.log(t) - t - mp.loggamma(mm + 1)) * c * (1 - mp.exp(-t) * (1 + t)) / t ** 2
        want = mp.quad(f, [0, 1, mm, 2 * mm + 10, mp.inf])
        assert sd.weight(m) == pytest.approx(float(want), rel=1e-10)


@pytest.mark.parametrize("pid", ["stable:0.3", "stable:0.5", "stable:0.8", "log-example"])
def test_normalization(pid):
    sd = step_weights(bf.from_id(pid), strict=False)
    assert abs(sd.total_mass - 1.0) <= 1e-10
    assert abs(sd.normalization_residual) <= 1e-10
    assert np.all(sd.weights >= 0)


def test_atomic_weights_closed_form():
    phi = bf.normalize(bf.from_id("atomic:1=1"), 1.0)
    sd = step_weights(phi)
    k = 1 / (1 - math.exp(-1))
    want = k * np.exp(-1 - gammaln(np.arange(1, sd.M + 1) + 1))
    np.testing.assert_allclose(sd.weights, want, rtol=1e-13)
    assert sd.truncation_mass <= 1e-10
    assert abs(sd.total_mass - 1) <= 1e-12


def test_rate_q_weights():
    # phi = lam^0.5 normalised at q: psi(q) = q; weights scale to q^{m-1}/m! int t^m e^{-qt} mu(dt)
    q = 3.0
    psi = bf.normalize(bf.from_id("stable:0.5"), q)
    sd = step_weights(psi, q, strict=False)
    k = q / math.sqrt(q)
    # int t^m e^{-qt} c t^{-1.5} dt = c Gamma(m - .5) q^{.5 - m}
    m = np.arange(1, 11)
    want = k * q ** (m - 1) * 0.5 / math.gamma(0.5) * np.exp(gammaln(m - 0.5) - gammaln(m + 1)) * q ** (0.5 - m)
    np.testing.assert_allclose(sd.weights[:10], want, rtol=1e-10)
    assert abs(sd.total_mass - 1) <= 1e-10


def test_requires_normalization():
    with pytest.raises(NormalizationRequiredError):
        step_weights(bf.pure_drift(2.0))
    with pytest.raises(ValueError):
        step_weights(bf.pure_drift(), mass_tol=0.0)


def test_strict_truncation_carries_partial(stable05):
    with pytest.raises(TruncationError) as exc:
        step_weights(stable05, M_cap=1000)
    part = exc.value.partial
    assert part.M == 1000 and part.truncation_mass == pytest.approx(sibuya_tail(0.5, 1000), rel=1e-9)


def test_minimal_cutoff(log_example):
    phi = bf.normalize(bf.from_id("atomic:1=1,2=0.5"), 1.0)
    sd = step_weights(phi, mass_tol=1e-6)
    assert tail_weight(phi, 1.0, sd.M) <= 1e-6 < tail_weight(phi, 1.0, sd.M - 1)


def test_log_example_infinite_second_moment_proxy(log_example):
    sd = step_weights(log_example, strict=False)
    Ms = np.unique(np.logspace(2, 4, 9).astype(int))
    part = sd.partial_first_moment(Ms)
    assert part[-1] >= 2 * part[0]
    slope = np.polyfit(np.log(Ms), part, 1)[0]
    assert slope == pytest.approx(C, rel=0.2)


def test_step_pmf_examples(sd05):
    walk = LatticeWalk.simple(1)
    drift = subordinate_step_pmf(step_weights(bf.pure_drift()), walk, 3)
    assert dict(drift.entries()) == pytest.approx({(-1,): 0.5, (1,): 0.5}, abs=1e-15)
    eta = subordinate_step_pmf(sd05, walk, 30)
    # independent direct sum over odd m of w_m C(m, (m+1)/2) 2^-m
    m = np.arange(1, sd05.M + 1, 2)
    direct = math.fsum(sd05.weights[m - 1] * np.exp(gammaln(m + 1) - gammaln((m + 1) / 2 + 1)
                                                    - gammaln((m - 1) / 2 + 1) - m * math.log(2)))
    assert eta.at((1,)) == pytest.approx(direct, abs=1e-12)
    np.testing.assert_array_equal(eta.mass, eta.mirrored().mass)
    acct = eta.captured_mass + eta.meta["truncation_mass"] + eta.meta["lattice_loss"]
    assert acct == pytest.approx(1.0, abs=1e-10)


def test_step_pmf_d2_symmetric(log_example):
    sd = step_weights(log_example, strict=False)
    eta = subordinate_step_pmf(sd, LatticeWalk.simple(2), 6)
    np.testing.assert_allclose(eta.mass, eta.mass.T, atol=1e-17)
    np.testing.assert_allclose(eta.mass, eta.mirrored().mass, atol=1e-17)
    acct = eta.captured_mass + eta.meta["truncation_mass"] + eta.meta["lattice_loss"]
    assert acct == pytest.approx(1.0, abs=1e-10)


def test_sample_step_drift():
    sd = step_weights(bf.pure_drift())
    walk = LatticeWalk.simple(2)
    pts = sample_steps(sd, walk, 1000, make_rng(1))
    assert set(map(tuple, pts.astype(int))) <= {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert sample_step(sd, walk, make_rng(1)) in {(1, 0), (-1, 0), (0, 1), (0, -1)}


def test_branch_frequency_and_determinism(sd05):
    m, cat = sample_step_counts(sd05, 10**6, make_rng(7), return_branch=True)
    assert np.mean(cat == 1) == pytest.approx(0.5, abs=0.002)
    again = sample_step_counts(sd05, 10**6, make_rng(7))
    np.testing.assert_array_equal(m, again)
    assert np.all(m[cat == sd05.M + 1] > sd05.M)


def test_empirical_pmf_matches_exact(sd05):
    walk = LatticeWalk.simple(1)
    n = 10**6
    x = sample_steps(sd05, walk, n, make_rng(11))[:, 0]
    eta = subordinate_step_pmf(sd05, walk, 5)
    ok = []
    for z in range(-5, 6):
        p = eta.at((z,))
        se = math.sqrt(max(p * (1 - p), 1e-12) / n)
        ok.append(abs(np.mean(x == z) - p) <= 4 * se)
    assert np.mean(ok) >= 0.95


def test_tail_sampler_against_sibuya(stable05):
    sd = step_weights(stable05, M_cap=256, strict=False)
    draws = sd.tail_sampler().sample(make_rng(3), 200_000)
    assert np.all(draws > 256)
    tail = sibuya_tail(0.5, 256)
    for lo, hi in [(256, 512), (512, 2048), (2048, 10**5)]:
        want = (sibuya_tail(0.5, lo) - sibuya_tail(0.5, hi)) / tail
        got = np.mean((draws > lo) & (draws <= hi))
        assert abs(got - want) <= 4 * math.sqrt(want * (1 - want) / draws.size)


def test_tail_sampler_atoms():
    phi = bf.normalize(bf.from_id("atomic:5=1"), 1.0)
    sd = step_weights(phi, M_cap=8, strict=False)
    ts = TailSampler(phi, 1.0, 8)
    assert np.all(ts.sample_times(make_rng(0), 100) == 5.0)
    draws = ts.sample(make_rng(0), 100_000)
    # conditional Poisson(5) given > 8
    k = np.arange(9, 40)
    pk = stats.poisson.pmf(k, 5) / stats.poisson.sf(8, 5)
    assert np.mean(draws == 9) == pytest.approx(pk[0], abs=4 * math.sqrt(pk[0] / 1e5))
    assert sd.truncation_mass == pytest.approx(stats.poisson.sf(8, 5) / (1 - math.exp(-5)), rel=1e-9)


def test_sum_step_counts_matches_naive(sd05):
    g = make_rng(5)
    fast = sum_step_counts(sd05, np.full(20_000, 5), g)
    naive = sample_step_counts(sd05, (20_000, 5), make_rng(6)).sum(axis=1)
    assert stats.ks_2samp(fast, naive).pvalue > 1e-3
    assert sum_step_counts(sd05, np.zeros(3, dtype=int), g).tolist() == [0, 0, 0]


def test_stable_subordinator_laplace():
    n = 10**6
    t1 = sample_stable_subordinator(0.5, 1.0, make_rng(2), size=n)
    v = np.exp(-t1)
    assert abs(v.mean() - math.exp(-1)) <= 3 * v.std() / math.sqrt(n)
    assert sample_stable_subordinator(0.5, 0.0, make_rng(2)) == 0.0


def test_stable_subordinator_scaling():
    a, t = 0.7, 3.0
    tt = sample_stable_subordinator(a, t, make_rng(8), size=10**5)
    t1 = t ** (1 / a) * sample_stable_subordinator(a, 1.0, make_rng(9), size=10**5)
    assert stats.ks_2samp(tt, t1).statistic <= 0.02


def test_sample_subordinator_drift():
    assert sample_subordinator(bf.pure_drift(2.0), 1.5, make_rng(0)) == 3.0


def test_split_streams_are_deterministic():
    a = [g.random() for g in split(make_rng(4), 3)]
    b = [g.random() for g in split(make_rng(4), 3)]
    assert a == b and len(set(a)) == 3


@given(st.integers(0, 2**32), st.integers(0, 100))
def test_make_rng_reproducible(seed, stream):
    assert make_rng(seed, stream).integers(2**62) == make_rng(seed, stream).integers(2**62)
