import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subwalk import bernstein as bf
from subwalk.errors import ChfDomainError
from subwalk.mc import agreement_fraction
from subwalk.rng import make_rng
from subwalk.scaling_limits import (ChfEvaluation, ScaledProcessSpec, chf_limit, chf_monte_carlo,
                                    chf_scaled_exact, clock_gap, convergence_report,
                                    cosine_average, default_theta_grid, sample_endpoints,
                                    sample_scaled_path, small_time_bound_check, tail_bound_ratio)

NS = [10**2, 10**3, 10**4, 10**5, 10**6]
UNIT_PHI = ["drift", "stable:0.3", "stable:0.5", "stable:0.8", "log-example"]


def test_cosine_average_examples():
    assert cosine_average(np.zeros(3), 1.0) == 1.0
    assert cosine_average(np.array([math.pi]), 1.0) == -1.0
    assert cosine_average(np.array([math.pi / 2, 0.0]), 1.0) == pytest.approx(0.5)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScaledProcessSpec(bf.from_id("stable:0.5"), 0)
    with pytest.raises(ValueError):
        ScaledProcessSpec(bf.from_id("stable:0.5"), 10, clock="hourly")
    with pytest.raises(ValueError):
        ScaledProcessSpec(bf.pure_drift(2.0), 10)
    assert ScaledProcessSpec(bf.from_id("stable:0.5"), 100).scale == pytest.approx(0.01)


def test_exact_chf_examples():
    for clock in ("poisson", "floor"):
        spec = ScaledProcessSpec(bf.from_id("stable:0.5"), 1000, clock)
        assert chf_scaled_exact(spec, [[0.0]])[0] == 1.0
    th = np.linspace(-5, 5, 41)
    spec = ScaledProcessSpec(bf.pure_drift(), 400)
    np.testing.assert_allclose(chf_scaled_exact(spec, th[:, None]),
                               np.exp(-400 * (1 - np.cos(th / 20))), rtol=1e-12)
    n = 10**4
    spec = ScaledProcessSpec(bf.from_id("stable:0.5"), n)
    assert chf_scaled_exact(spec, [[1.0]])[0] == pytest.approx(
        math.exp(-n * math.sqrt(1 - math.cos(1 / n))), abs=1e-6)


def test_floor_clock_formula():
    spec = ScaledProcessSpec(bf.from_id("log-example"), 37, "floor", 2, 1.5)
    th = np.array([[0.4, -1.0]])
    c = np.mean(np.cos(spec.scale * th))
    want = (1 - bf.eval_phi(spec.phi, 1 - c)) ** 55
    assert chf_scaled_exact(spec, th)[0] == pytest.approx(want, rel=1e-12)


def test_negative_floor_base_is_reported():
    # drift:1 normalised: phi(x) = x and 1 - c reaches 2 at theta = pi / scale
    spec = ScaledProcessSpec(bf.pure_drift(), 1, "floor")
    with pytest.raises(ChfDomainError):
        chf_scaled_exact(spec, [[math.pi]])
    assert chf_scaled_exact(spec, [[math.pi]], negative_base="power")[0] == pytest.approx(-1.0)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2), st.integers(1, 10**7),
       st.sampled_from(UNIT_PHI[1:]), st.sampled_from(["poisson", "floor"]))
def test_exact_chf_bounded(theta, n, pid, clock):
    spec = ScaledProcessSpec(bf.from_id(pid), n, clock, d=2)
    v = chf_scaled_exact(spec, [theta], negative_base="power")[0]
    # small floor-clock n can give a negative base, hence |v| rather than v
    assert abs(v) <= 1.0
    if clock == "poisson":
        assert v >= 0.0


def test_limit_examples():
    assert chf_limit([[0.0]], 1.0, 0.5, 1)[0] == 1.0
    assert chf_limit([[2.0]], 1.0, 1.0, 1)[0] == pytest.approx(math.exp(-2))
    # (2d)^{-alpha} |theta|^{2 alpha} = 2^{-1/2} * 2
    assert chf_limit([[2.0]], 1.0, 0.5, 1)[0] == pytest.approx(math.exp(-math.sqrt(2)))
    assert chf_limit([[3.0, 4.0]], 2.0, 0.5, 2)[0] == pytest.approx(math.exp(-2 * 5 / 2))
    with pytest.raises(ValueError):
        chf_limit([[1.0]], 1.0, 1.5, 1)


def test_identity_convergence_bound():
    rep = convergence_report(bf.pure_drift(), 1.0, 1, 1.0, None, NS[:3])
    assert rep.final_distance <= 1e-3 and rep.monotone_flag


@pytest.mark.parametrize("pid,alpha", [("stable:0.5", 0.5), ("drift", 1.0)])
@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("clock", ["poisson", "floor"])
def test_convergence_to_stable_limit(pid, alpha, d, clock):
    rep = convergence_report(bf.from_id(pid), alpha, d, 1.0, None, NS, clock)
    assert rep.monotone_flag, rep.sup_distance
    assert rep.final_distance <= 1e-3
    assert len(rep.sup_distance) == len(NS) and min(rep.sup_distance) >= 0


def test_log_example_converges_slowly():
    rep = convergence_report(bf.from_id("log-example"), 1.0, 1, 1.0, None, NS)
    assert rep.monotone_flag
    assert rep.final_distance > 1e-3  # logarithmic rate, reported not bounded


def test_wrong_index_does_not_converge():
    rep = convergence_report(bf.from_id("stable:0.5"), 0.8, 1, 1.0, None, NS)
    assert rep.final_distance > 0.1


def test_report_serialisation():
    rep = convergence_report(bf.from_id("stable:0.5"), 0.5, 1, 1.0, None, NS[:2])
    rows = rep.to_csv().splitlines()
    assert rows[0] == "n,sup_distance" and len(rows) == 3
    data = json.loads(json.dumps(rep.to_json()))
    assert data["schema"] == "subwalk/1" and data["monotone_flag"] is True


@pytest.mark.parametrize("pid", UNIT_PHI)
@pytest.mark.parametrize("d", [1, 2])
def test_small_time_inequality(pid, d):
    ok, worst = small_time_bound_check(bf.from_id(pid), d, slack=1e-9)
    assert ok, worst


def test_clocks_approach_each_other():
    gaps = clock_gap(bf.from_id("stable:0.5"), 1)
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.fixture(scope="module")
def mc_stable():
    spec = ScaledProcessSpec(bf.from_id("stable:0.5"), 1000, seed=99)
    return spec, chf_monte_carlo(spec, None, 10**5)


def test_monte_carlo_matches_exact(mc_stable):
    spec, ev = mc_stable
    exact = chf_scaled_exact(spec, ev.theta_grid)
    assert agreement_fraction(ev.values, exact, ev.stderr) >= 0.95
    zero = np.all(ev.theta_grid == 0, axis=1)
    assert ev.values[zero][0] == 1 and ev.stderr[zero][0] == 0
    assert np.all(ev.stderr <= 1 / math.sqrt(10**5) + 1e-15)


def test_monte_carlo_deterministic(mc_stable):
    spec, ev = mc_stable
    again = chf_monte_carlo(spec, None, 10**5)
    np.testing.assert_array_equal(ev.values, again.values)
    other = chf_monte_carlo(spec, None, 10**3, rng=make_rng(1))
    assert not np.array_equal(other.values[:5], ev.values[:5])
    with pytest.raises(ValueError):
        chf_monte_carlo(spec, None, 999)


def test_monte_carlo_floor_clock_d2():
    spec = ScaledProcessSpec(bf.from_id("log-example"), 100, "floor", 2, seed=5)
    ev = chf_monte_carlo(spec, None, 20_000)
    assert agreement_fraction(ev.values, chf_scaled_exact(spec, ev.theta_grid), ev.stderr) >= 0.95
    assert "theta2" in ev.to_csv().splitlines()[0]


def test_chf_evaluation_validates():
    with pytest.raises(ValueError):
        ChfEvaluation(np.zeros((1, 1)), [1.5], "exact")
    with pytest.raises(ValueError):
        ChfEvaluation(np.zeros((2, 1)), [1.0], "exact")


def test_endpoints_are_lattice_points():
    spec = ScaledProcessSpec(bf.from_id("stable:0.5"), 10, "floor", 2)
    x = sample_endpoints(spec, 500)
    assert np.all(x == np.round(x))
    # ten steps of a nearest-neighbour walk each: parity of x1 + x2 equals the total step count parity
    np.testing.assert_array_equal(x, sample_endpoints(spec, 500))


@pytest.fixture(scope="module")
def tail_report():
    return tail_bound_ratio(bf.from_id("stable:0.5"), 1.0, (2, 4, 8), 1.0, (10**2, 10**3, 10**4),
                            10**5, seed=7)


def test_tail_ratio_bounded(tail_report):
    rep = tail_report
    assert np.all(np.isfinite(rep.ratios)) and rep.bounded and not rep.growth_in_n
    # larger K, smaller exceedance probability
    assert np.all(np.diff(rep.probabilities, axis=0) <= 0)
    assert json.loads(json.dumps(rep.to_json()))["bounded"] is True


def test_tail_ratio_doubling_a(tail_report):
    rep2 = tail_bound_ratio(bf.from_id("stable:0.5"), 2.0, (2, 4, 8), 1.0, (10**2, 10**3),
                            10**5, seed=8)
    p1, p2 = tail_report.probabilities[:, :2], rep2.probabilities
    se = np.sqrt(p1 * (1 - p1) / 1e5) + np.sqrt(p2 * (1 - p2) / 1e5)
    assert np.all(p2 <= 2 * p1 + 4 * 2 * se + 1e-12)


def test_tail_ratio_requires_zero_drift():
    with pytest.raises(ValueError):
        tail_bound_ratio(bf.pure_drift(), paths=10)


def test_path_examples():
    phi = bf.from_id("stable:0.5")
    p = sample_scaled_path(ScaledProcessSpec(phi, 1000), [0.0])
    assert p.values.tolist() == [[0.0]] and p.counts.tolist() == [0]
    p = sample_scaled_path(ScaledProcessSpec(phi, 10, "floor"), [0.05])
    assert p.counts.tolist() == [0] and p.values.tolist() == [[0.0]]


@given(st.sampled_from(["floor", "poisson"]), st.integers(1, 200), st.integers(0, 2**31))
def test_path_restriction_consistency(clock, n, seed):
    spec = ScaledProcessSpec(bf.from_id("stable:0.5"), n, clock, 2, seed=seed)
    fine = np.linspace(0, 2, 41)
    coarse = fine[::8]
    a = sample_scaled_path(spec, fine, block=64)
    b = sample_scaled_path(spec, coarse, block=64)
    np.testing.assert_array_equal(a.values[::8], b.values)
    assert np.all(np.diff(a.counts) >= 0)
    if clock == "floor":
        np.testing.assert_array_equal(a.counts, np.floor(n * fine).astype(int))


def test_path_csv():
    spec = ScaledProcessSpec(bf.from_id("log-example"), 50, d=2, seed=3)
    text = sample_scaled_path(spec, [0.0, 0.5, 1.0]).to_csv()
    assert text.splitlines()[0] == "time,steps,x1,x2" and len(text.splitlines()) == 4
    assert text == sample_scaled_path(spec, [0.0, 0.5, 1.0]).to_csv()
    with pytest.raises(ValueError):
        sample_scaled_path(spec, [1.0, 0.5])


def test_default_grids():
    assert default_theta_grid(1).shape == (41, 1)
    assert default_theta_grid(2).shape == (169, 2)
    assert default_theta_grid(1)[0, 0] == -5.0 and default_theta_grid(2).max() == 3.0
