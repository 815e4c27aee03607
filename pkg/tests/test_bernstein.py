import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from subwalk import bernstein as bf
from subwalk.errors import InversionRangeError

C = 1 / math.log(2)


def test_eval_examples(stable05):
    assert bf.eval_phi(bf.pure_drift(), 2.0) == 2.0
    assert bf.eval_phi(stable05, 4.0) == pytest.approx(2.0, abs=1e-15)
    quad = bf.stable_exponent(0.5, closed_form=False)
    assert bf.eval_phi(quad, 1.0) == pytest.approx(1.0, abs=1e-8)


def test_eval_rejects_nonpositive(stable05):
    with pytest.raises(ValueError):
        bf.eval_phi(stable05, 0.0)
    with pytest.raises(ValueError):
        bf.eval_phi(stable05, np.array([1.0, -1.0]))


@pytest.mark.parametrize("pid", bf.CATALOG_IDS)
def test_closed_form_matches_quadrature(pid):
    phi = bf.from_id(pid)
    for lam in np.logspace(-6, 6, 13):
        cf = bf.eval_phi(phi, lam)
        qd = bf.eval_phi(phi, lam, use_closed_form=False)
        assert qd == pytest.approx(cf, rel=1e-8)


def test_log_example_against_mpmath(log_example):
    mp.mp.dps = 40
    c = 1 / mp.log(2)
    dens = lambda t: c * (1 - mp.exp(-t) * (1 + t)) / t ** 2
    for lam in (mp.mpf("1e-3"), mp.mpf(1), mp.mpf(50)):
        want = mp.quad(lambda t: (1 - mp.exp(-lam * t)) * dens(t), [0, 1 / lam, 1, mp.inf])
        got = bf.eval_phi(log_example, float(lam), use_closed_form=False)
        assert got == pytest.approx(float(want), rel=1e-10)
    assert bf.eval_phi(log_example, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_invert_examples(stable05, log_example):
    assert bf.invert_phi(stable05, 2.0) == pytest.approx(4.0)
    assert bf.invert_phi(bf.pure_drift(), 7.0) == pytest.approx(7.0)
    for lam0 in (1e-4, 1e-2, 1.0):
        y = bf.eval_phi(log_example, lam0)
        assert bf.invert_phi(log_example, y) == pytest.approx(lam0, rel=1e-8)


@given(st.floats(-12, 4), st.sampled_from(["log-example", "stable-quad:0.3", "atomic:1=1,drift=0.5"]))
def test_inversion_round_trip(log_lam, pid):
    phi = bf.from_id(pid)
    lam = 10.0 ** log_lam
    y = bf.eval_phi(phi, lam)
    assert bf.invert_phi(phi, y) == pytest.approx(lam, rel=1e-8)


def test_invert_out_of_range():
    # bounded exponent: 1 - e^{-lam} never reaches 2
    with pytest.raises(InversionRangeError):
        bf.invert_phi(bf.from_id("atomic:1=1"), 2.0)


@given(st.floats(-8, 8), st.floats(-8, 8), st.sampled_from(bf.CATALOG_IDS))
def test_monotone(a, b, pid):
    phi = bf.from_id(pid)
    lo, hi = sorted((10.0 ** a, 10.0 ** b))
    assert bf.eval_phi(phi, lo) <= bf.eval_phi(phi, hi) * (1 + 1e-12)


def test_tail_mass_examples(log_example, stable05):
    assert bf.tail_mass(bf.pure_drift().levy, 1.0) == 0.0
    assert 1e4 * bf.tail_mass(log_example.levy, 1e4) == pytest.approx(C, rel=0.01)
    for t in (1e-3, 1.0, 1e3):
        assert bf.tail_mass(stable05.levy, t) == pytest.approx(t ** -0.5 / gamma(0.5), rel=1e-8)


def test_truncated_first_moment_examples(log_example, stable05):
    assert bf.truncated_first_moment(bf.from_id("atomic:1=1").levy, 2.0) == pytest.approx(1.0)
    assert bf.truncated_first_moment(stable05.levy, 1.0) == pytest.approx(1 / gamma(0.5), rel=1e-8)
    gap = (bf.truncated_first_moment(log_example.levy, 1e3)
           - bf.truncated_first_moment(log_example.levy, 10.0))
    assert gap >= C * math.log(100) * 0.8


@pytest.mark.parametrize("pid", bf.CATALOG_IDS)
def test_inequality_inequalities(pid):
    rep = bf.check_exponent_inequalities(bf.from_id(pid), np.logspace(-6, 6, 25))
    assert rep.passed, rep.violations
    assert max(rep.worst_first_moment, rep.worst_tail, rep.worst_scaling) <= 1e-8


def test_inequality_reports_violation():
    # tolerance below the (negative) worst residual is impossible, so force one with a fake phi
    phi = bf.from_id("stable:0.5")
    rep = bf.check_exponent_inequalities(phi, [1.0], tol=-1.0)
    assert not rep.passed and rep.violations


def test_rv_examples(stable05, log_example):
    est = bf.rv_index_estimate(stable05, (-8, -2), x=10.0)
    assert est.index_hat == pytest.approx(0.5, abs=1e-12)
    assert est.index_hat == pytest.approx(np.mean(est.per_point_ratios))
    assert len(est.scale_points) == len(est.per_point_ratios)
    inv = bf.rv_index_estimate(bf.inverse(stable05), (-8, -2))
    assert inv.index_hat == pytest.approx(2.0, abs=0.05)
    assert bf.rv_index_estimate(log_example, (-60, -20)).index_hat == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.8, 0.95])
def test_rv_stable_and_inverse(alpha):
    phi = bf.stable_exponent(alpha)
    assert bf.rv_index_estimate(phi).index_hat == pytest.approx(alpha, abs=0.02)
    assert bf.rv_index_estimate(bf.inverse(phi)).index_hat == pytest.approx(1 / alpha, abs=0.05)


@pytest.mark.parametrize("pid", bf.CATALOG_IDS)
def test_rv_index_in_unit_interval(pid):
    idx = bf.rv_index_estimate(bf.from_id(pid), (-8, -2)).index_hat
    assert -0.02 <= idx <= 1.02


def test_rv_rejects_bad_values():
    with pytest.raises(ValueError, match="lambda"):
        bf.rv_index_estimate(lambda lam: -1.0)
    with pytest.raises(ValueError):
        bf.rv_index_estimate(lambda lam: lam, x=1.0)


def test_upper_scaling(stable05):
    good = bf.upper_scaling_check(stable05, 2.5)
    assert good.bounded and good.constant <= 1 + 1e-12
    bad = bf.upper_scaling_check(stable05, 1.5)
    assert not bad.bounded and bad.growth_in_x
    drift = bf.upper_scaling_check(bf.pure_drift(), 1.1)
    assert drift.bounded and drift.constant == pytest.approx(1.0)


def test_normalize_examples():
    psi = bf.normalize(bf.pure_drift(2.0), 1.0)
    assert psi.drift == pytest.approx(1.0) and bf.eval_phi(psi, 3.0) == pytest.approx(3.0)
    phi = bf.from_id("stable:0.5")
    assert bf.normalize(phi, 1.0) is phi
    three = bf.BernsteinFunction(levy=bf.LevyMeasure(density=lambda t: 3 * 0.5 / gamma(0.5) * t ** -1.5),
                                 closed_form=lambda lam: 3 * np.sqrt(lam), stable=(0.5, 3.0))
    psi = bf.normalize(three, 1.0)
    assert bf.eval_phi(psi, 1.0) == pytest.approx(1.0)
    assert bf.eval_phi(psi, 9.0, use_closed_form=False) == pytest.approx(3.0, rel=1e-8)
    assert psi.stable == (0.5, pytest.approx(1.0))


@given(st.floats(0.01, 100), st.sampled_from(["log-example", "atomic:1=1", "drift:3"]))
def test_normalize_fixes_q(q, pid):
    psi = bf.normalize(bf.from_id(pid), q)
    assert bf.eval_phi(psi, q) == pytest.approx(q, rel=1e-10)


def test_invalid_measures():
    with pytest.raises(ValueError):
        bf.LevyMeasure(density=lambda t: -np.ones_like(t))
    with pytest.raises(ValueError):
        bf.LevyMeasure(atoms=((1.0, 0.0),))
    with pytest.raises(ValueError):
        bf.LevyMeasure(density=lambda t: t ** -1.5, tail_analytic=lambda t: 1.0)
    with pytest.raises(ValueError):
        bf.BernsteinFunction()
    with pytest.raises(ValueError, match="closed form"):
        bf.BernsteinFunction(levy=bf.LevyMeasure(density=lambda t: 0.5 / gamma(0.5) * t ** -1.5),
                             closed_form=lambda lam: 2 * np.sqrt(lam))


def test_catalog_ids():
    assert bf.from_id("stable:1").drift == 1.0
    assert bf.from_id("stable:0.5") is bf.from_id("stable:0.5")
    with pytest.raises(KeyError):
        bf.from_id("nope")
    with pytest.raises(ValueError):
        bf.from_id("stable:1.5")
    phi = bf.from_id("atomic:1=0.5,2=0.25,drift=0.1")
    assert bf.eval_phi(phi, 1.0) == pytest.approx(0.1 + 0.5 * (1 - math.exp(-1)) + 0.25 * (1 - math.exp(-2)))


def test_complex_evaluation(log_example):
    z = 0.3 + 0.7j
    cf = bf.eval_phi_complex(log_example, z)
    assert cf == pytest.approx(C * z * np.log1p(1 / z), rel=1e-12)
    quad = bf.BernsteinFunction(levy=log_example.levy, validate=False)
    assert bf.eval_phi_complex(quad, z) == pytest.approx(cf, rel=1e-8)
