"""Compound-Poisson embeddings of a subordinate walk and their triplets.

Two processes are compared:

* hat: the subordinate walk run at the jumps of a rate-q Poisson clock,
  ``X_hat(t) = X(N(t))``;
* tilde: the walk run at a rate-q Poisson clock which is itself time
  changed by the subordinator, ``X_tilde(t) = Z(N(T(t)))``.

Both are compound Poisson.  Their Levy triplets are computed along two
independent routes: the hat route integrates in t first (one weight per
step count) and sums over the lattice afterwards; the tilde route builds
the continuous-time walk law ``P(Z(N(s)) = z)`` at quadrature nodes s and
integrates against the Levy measure last.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

from .bernstein import eval_phi, eval_phi_complex, tail_mass
from .lattice import LatticeDistribution, walk_point_table
from .quadrature import integrate_log_vec, ive_safe
from .subordination import (DEFAULT_M_CAP, _poisson, step_weights, subordinate_step_pmf,
                            sample_subordinator, sum_step_counts, walk_displacement)
from .rng import as_generator


@dataclass(eq=False)
class LevyTriplet:
    """Drift correction ``beta``, zero Gaussian part, finite jump measure ``nu``.

    ``unaccounted`` is the jump mass known to be missing from ``nu`` (beyond
    the weight cutoff, or lost by the quadrature / series truncation);
    ``point_budget`` (optional) bounds that loss per lattice point.
    """

    d: int
    beta: np.ndarray
    nu: LatticeDistribution
    unaccounted: float = 0.0
    point_budget: np.ndarray = None
    route: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).reshape(self.d)
        if self.nu.d != self.d:
            raise ValueError("dimension mismatch between beta and nu")
        if self.nu.at((0,) * self.d) != 0.0:
            raise ValueError("a Levy measure carries no mass at the origin")

    @property
    def gaussian_part(self):
        return np.zeros((self.d, self.d))

    @property
    def intensity(self):
        return self.nu.captured_mass

    def to_csv(self):
        lines = ["# route=" + self.route,
                 "# beta=" + ",".join(repr(float(b)) for b in self.beta)]
        return "\n".join(lines) + "\n" + self.nu.to_csv()

    def to_json(self):
        return {"route": self.route, "d": self.d, "beta": [float(b) for b in self.beta],
                "unaccounted": self.unaccounted, "nu": self.nu.to_json()}


def _unit_ball_first_moment(dist):
    """``sum_{0 < |y| <= 1} y * dist({y})`` with the Euclidean norm."""
    coords = dist.coords()
    flat = dist.mass.ravel()
    r2 = np.sum(coords.astype(float) ** 2, axis=1)
    sel = (r2 > 0) & (r2 <= 1.0)
    return coords[sel].T.astype(float) @ flat[sel]


def cp_triplet_from_jump_law(q, eta, unaccounted=0.0, route="jump-law"):
    """Triplet of the compound Poisson process with rate ``q`` and jump law ``eta``."""
    if not q > 0:
        raise ValueError("q must be positive")
    if eta.captured_mass > 1 + 1e-12:
        raise ValueError("jump law carries more than unit mass")
    beta = -q * _unit_ball_first_moment(eta)
    nu = eta.without_origin().scaled(q)
    return LevyTriplet(eta.d, beta, nu, float(unaccounted), route=route)


def _tail_point_bound(walk, M, radius):
    """``sup_{m > M} P(Z_m = z)`` per box point (1 where not controlled).

    For ``M >= d * radius**2`` the simple-walk point probabilities are
    decreasing in m beyond M along each parity class, so the sup is attained
    at M+1 or M+2.
    """
    cells = (2 * radius + 1) ** walk.d
    if not (walk.is_simple and walk.d <= 2) or M < walk.d * radius ** 2:
        return np.ones(cells)
    tab = walk_point_table(walk, [M + 1, M + 2], radius)
    return tab.max(axis=0)


def triplet_hat(phi, walk, q=1.0, radius=30, mass_tol=1e-10, M_cap=DEFAULT_M_CAP):
    """Triplet of the hat process: t-integral per weight, lattice sum second."""
    sd = step_weights(phi, q, mass_tol=mass_tol, M_cap=M_cap, strict=False)
    eta = subordinate_step_pmf(sd, walk, radius)
    trip = cp_triplet_from_jump_law(q, eta, unaccounted=q * sd.truncation_mass, route="hat")
    budget = q * sd.truncation_mass * _tail_point_bound(walk, sd.M, radius)
    budget[((2 * radius + 1) ** walk.d) // 2] = 0.0
    trip.point_budget = budget.reshape(eta.mass.shape)
    trip.meta.update(M=sd.M, truncation_mass=sd.truncation_mass,
                     lattice_loss=eta.meta["lattice_loss"])
    return trip


def _continuous_walk_srw(d, q, radius):
    """``s -> P(Z(N(s)) = z)`` on the box for the simple walk.

    Each coordinate of the continuous-time simple walk jumps at rate q/d,
    so the law factorises into modified Bessel kernels
    ``exp(-x) I_k(x)``, ``x = q s / d``.
    """
    ax = np.arange(-radius, radius + 1)

    def law(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        one = ive_safe(np.abs(ax)[None, :], (q * s / d)[:, None])
        out = one
        for _ in range(d - 1):
            out = (out[:, :, None] * one[:, None, :]).reshape(len(s), -1)
        return out

    return law


def _continuous_walk_series(walk, q, radius, m_max, max_cells=None):
    """``s -> P(Z(N(s)) = z)`` on the box by the truncated Poisson series."""
    kw = {} if max_cells is None else {"max_cells": max_cells}
    table = walk_point_table(walk, np.arange(m_max + 1), radius, **kw)
    ms = np.arange(m_max + 1, dtype=float)

    def law(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x = q * s[:, None]
        with np.errstate(divide="ignore"):
            logp = ms[None, :] * np.log(x) - x - gammaln(ms + 1.0)[None, :]
        return np.exp(logp) @ table

    return law


def _poisson_quantile(lam, eps):
    """Smallest m with ``P(Poisson(lam) <= m) >= 1 - eps``."""
    m = int(lam + 10 * math.sqrt(lam) + 10)
    while gammainc(m + 1.0, lam) > eps:
        m = int(m * 1.2) + 1
    lo, hi = 0, m
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if gammainc(mid + 1.0, lam) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def triplet_tilde(phi, walk, q=1.0, radius=30, s_quadrature_tol=1e-10, method="auto",
                  s_max=None, series_eps=1e-12):
    """Triplet of the tilde process: lattice law per node s, s-integral last.

    ``method`` is ``"bessel"`` (simple walk, closed-form continuous-time
    law), ``"series"`` (Poisson series over walk step counts, any walk) or
    ``"auto"``.  The series variant integrates s only up to ``s_max`` and
    keeps Poisson terms until the mass left at ``q * s_max`` is below
    ``series_eps``; the measure beyond ``s_max`` is reported as unaccounted.
    """
    if method == "auto":
        method = "bessel" if walk.is_simple else "series"
    mu = phi.levy
    shape = (2 * radius + 1,) * walk.d
    cells = int(np.prod(shape))
    origin = cells // 2
    deficit = 0.0
    hi = np.inf
    if method == "bessel":
        if not walk.is_simple:
            raise ValueError("the Bessel route needs the simple walk")
        law = _continuous_walk_srw(walk.d, q, radius)
    elif method == "series":
        if s_max is None:
            raise ValueError("the series route needs s_max")
        hi = float(s_max)
        m_max = _poisson_quantile(q * hi, series_eps)
        law = _continuous_walk_series(walk, q, radius, m_max)
        if not mu.is_zero:
            # per node the dropped Poisson mass is <= series_eps and (Markov) <= q s / (m_max+1)
            deficit = mu.integrate(lambda s: min(series_eps, q * s / (m_max + 1)), hi=hi)[0]
            deficit += tail_mass(mu, hi)
    else:
        raise ValueError(f"unknown method {method!r}")

    def integrand(s):
        v = law(s)[0]
        v[origin] = 0.0
        return v

    acc = np.zeros(cells)
    err = 0.0
    if mu.density is not None:
        dens = mu.density
        val, err = integrate_log_vec(lambda s: integrand(s) * float(dens(s)), 0.0, hi,
                                     breakpoints=(mu.split_point, 1.0 / q, 10.0 / q),
                                     rtol=s_quadrature_tol)
        acc += np.maximum(val, 0.0)
    for loc, mass in mu.atoms:
        if loc <= hi:
            acc += mass * integrand(loc)
    if phi.drift:
        step = walk_point_table(walk, [1], radius)[0].copy()
        step[origin] = 0.0
        acc += q * phi.drift * step
    nu = LatticeDistribution(walk.d, radius, acc.reshape(shape))
    # b * beta_Z minus the mu-integrated first moment, both already inside acc
    beta = -_unit_ball_first_moment(nu)
    trip = LevyTriplet(walk.d, beta, nu, float(deficit + err * cells), route=f"tilde/{method}")
    trip.meta.update(quadrature_error=float(err), series_deficit=float(deficit))
    return trip


@dataclass
class TripletComparison:
    beta_distance: float
    nu_tv_distance: float
    mass_unaccounted: float
    tolerance: float
    verdict: str
    nu_sup_distance: float = float("nan")
    nu_sup_excess: float = float("nan")

    def to_dict(self):
        return {"beta_distance": self.beta_distance, "nu_tv_distance": self.nu_tv_distance,
                "mass_unaccounted": self.mass_unaccounted, "verdict": self.verdict,
                "tolerance": self.tolerance, "nu_sup_distance": self.nu_sup_distance,
                "nu_sup_excess": self.nu_sup_excess}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def passed(self):
        return self.verdict == "pass"


def compare_triplets(a, b, tolerance=1e-6):
    """Compare two triplets on their common box.

    ``nu_tv_distance`` is the total variation ``sup_B |nu_a(B) - nu_b(B)|``
    of the difference.  ``nu_sup_excess`` is the largest pointwise gap after
    subtracting the per-point budgets (when both carry one).
    """
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    r = min(a.nu.radius, b.nu.radius)
    na, nb = a.nu.restrict(r).mass, b.nu.restrict(r).mass
    diff = (na - nb).ravel()
    tv = max(math.fsum(diff[diff > 0]), -math.fsum(diff[diff < 0]))
    beta = float(np.max(np.abs(a.beta - b.beta))) if a.d else 0.0
    unacc = a.unaccounted + b.unaccounted
    excess = float("nan")
    if a.point_budget is not None or b.point_budget is not None:
        def crop(t):
            if t.point_budget is None:
                return np.zeros_like(na)
            full = LatticeDistribution(t.d, t.nu.radius, t.point_budget)
            return full.restrict(r).mass
        excess = float(np.max(np.abs(diff) - (crop(a) + crop(b)).ravel()))
    ok = beta <= tolerance + unacc and tv <= tolerance + unacc
    return TripletComparison(beta, tv, unacc, tolerance, "pass" if ok else "fail",
                             float(np.max(np.abs(diff))), excess)


# ---------------------------------------------------------------------------
# characteristic functions
# ---------------------------------------------------------------------------

def _one_minus_chf(walk, theta):
    """``1 - E exp(i theta . step)`` without cancellation near theta = 0."""
    th = np.asarray(theta, dtype=float)
    if th.ndim == 0:
        th = th[None]
    phase = th @ walk.points.T.astype(float)
    real = (2.0 * np.sin(0.5 * phase) ** 2) @ walk.masses
    if walk.symmetric:
        return real + 0j
    return real - 1j * (np.sin(phase) @ walk.masses)


@dataclass
class ChfPair:
    value: complex
    budget: float


def chf_hat_exact(phi, walk, q, t, theta, sd=None):
    """``E exp(i theta . X_hat(t))`` from the truncated weight series.

    Returns ``ChfPair(value, budget)``; the omitted weights beyond M change
    the value by at most ``budget = t q tail |chi|**(M+1)``.
    """
    if sd is None:
        sd = step_weights(phi, q, strict=False)
    om = complex(_one_minus_chf(walk, theta))
    chi = 1.0 - om
    if om == 0:
        return ChfPair(1.0 + 0j, 0.0)
    m = np.arange(1, sd.M + 1, dtype=float)
    # 1 - chi**m via expm1 of m log chi
    one_minus_pow = -np.expm1(m * np.log(chi + 0j)) if sd.M else np.zeros(0)
    # the omitted tail terms are treated as chi**m = 0, i.e. 1 - chi**m = 1
    expo = sd.direct_atom * om + (sd.weights @ one_minus_pow if sd.M else 0.0) \
        + sd.truncation_mass
    val = np.exp(-t * q * expo)
    budget = t * q * sd.truncation_mass * abs(chi) ** (sd.M + 1)
    return ChfPair(complex(val), float(budget))


def chf_tilde_exact(phi, walk, q, t, theta):
    """``E exp(i theta . X_tilde(t)) = exp(-t phi(q (1 - chi(theta))))``."""
    om = complex(_one_minus_chf(walk, theta))
    if om == 0:
        return 1.0 + 0j
    if om.imag == 0:
        return complex(math.exp(-t * eval_phi(phi, q * om.real)))
    return complex(np.exp(-t * eval_phi_complex(phi, q * om)))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def simulate_hat(phi, walk, q, t, rng=None, paths=10**5, sd=None):
    """Endpoints ``X_hat(t)``: Poisson(q t) subordinate steps per path."""
    rng = as_generator(rng)
    if t == 0:
        return np.zeros((paths, walk.d))
    if sd is None:
        sd = step_weights(phi, q, strict=False)
    n = rng.poisson(q * t, size=paths)
    steps = sum_step_counts(sd, n, rng)
    return walk_displacement(walk, steps, rng)


def simulate_tilde(phi, walk, q, t, rng=None, paths=10**5):
    """Endpoints ``X_tilde(t)``: draw T(t), then Poisson(q T(t)) walk steps."""
    rng = as_generator(rng)
    if t == 0:
        return np.zeros((paths, walk.d))
    times = sample_subordinator(phi, t, rng, size=paths)
    n = _poisson(rng, q * np.asarray(times))
    return walk_displacement(walk, n, rng)
