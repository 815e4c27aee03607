"""Discrete subordination: the mixture law of one subordinate step.

A step of the subordinate walk is the walk position ``Z_m`` after a random
number ``m`` of steps.  With probability ``b`` (the drift) it is a single
walk step; otherwise ``m >= 1`` is drawn with weight::

    w_m = q**(m-1) / m! * int t**m exp(-q t) mu(dt)
        = (1/q) * int Poisson(q t)[m] mu(dt)

Weights are computed up to a cutoff ``M``; the mass beyond it,
``(1/q) int P(Poisson(q t) > M) mu(dt)``, is computed by its own quadrature
so that ``b + sum(w) + tail = phi(q)/q`` is a genuine consistency check.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammainc, gammaincinv, gammaln

from .bernstein import eval_phi
from .errors import NormalizationRequiredError, TruncationError, UnsupportedSamplerError
from .lattice import LatticeDistribution, LatticeWalk, walk_point_table
from .quadrature import poisson_kernel_integral
from .rng import as_generator

SMALL_M = 64
_KERNEL_CHUNK = 65536
DEFAULT_MASS_TOL = 1e-10
DEFAULT_M_CAP = 2**19
NORMALIZATION_TOL = 1e-8
# beyond this a Poisson / binomial count is drawn from its normal approximation
_EXACT_COUNT_LIMIT = 1e15


@dataclass(eq=False)
class StepDistribution:
    q: float
    direct_atom: float
    weights: np.ndarray
    truncation_mass: float
    M: int
    normalization_residual: float = 0.0
    mass_tol: float = DEFAULT_MASS_TOL
    phi: Optional[object] = field(default=None, repr=False)
    _tail: Optional[object] = field(default=None, repr=False)

    @property
    def total_mass(self):
        return self.direct_atom + math.fsum(self.weights) + self.truncation_mass

    def weight(self, m):
        return float(self.weights[m - 1]) if 1 <= m <= self.M else 0.0

    def partial_first_moment(self, upto):
        """``sum_{m <= upto} m * w_m`` for each cutoff in ``upto``."""
        c = np.cumsum(np.arange(1, self.M + 1) * self.weights)
        idx = np.minimum(np.asarray(upto, dtype=np.int64), self.M) - 1
        return np.where(idx >= 0, c[np.maximum(idx, 0)], 0.0)

    def category_probs(self):
        """``[direct, w_1, ..., w_M, tail]`` normalised to sum 1."""
        p = np.concatenate(([self.direct_atom], self.weights, [self.truncation_mass]))
        return p / math.fsum(p)

    def tail_sampler(self):
        if self._tail is None and self.truncation_mass > 0:
            if self.phi is None:
                raise UnsupportedSamplerError("tail sampling needs the Laplace exponent")
            self._tail = TailSampler(self.phi, self.q, self.M)
        return self._tail

    def summary(self):
        return {"q": self.q, "M": self.M, "direct_atom": self.direct_atom,
                "weights_sum": math.fsum(self.weights),
                "truncation_mass": self.truncation_mass,
                "normalization_residual": self.normalization_residual,
                "mass_tol": self.mass_tol}


def _check_normalized(phi, q, tol=NORMALIZATION_TOL):
    pq = eval_phi(phi, q)
    if abs(pq - q) > tol * q:
        raise NormalizationRequiredError(
            f"phi({q:g}) = {pq!r} differs from q; normalize the exponent first")
    return pq


def _poisson_log_pmf(m, x):
    with np.errstate(divide="ignore"):
        return m * np.log(x) - x - gammaln(m + 1.0)


def _small_weight(mu, m, q):
    f = lambda t: math.exp(_poisson_log_pmf(m, q * t)) if t > 0 else 0.0
    val, _ = mu.integrate(f, breakpoints=(m / q,))
    return val / q


def _large_weights(mu, ms, q):
    out = np.zeros(len(ms))
    if mu.density is not None:
        for s in range(0, len(ms), _KERNEL_CHUNK):
            chunk = ms[s:s + _KERNEL_CHUNK]
            out[s:s + len(chunk)] = poisson_kernel_integral(mu.density, chunk, q) / q
    for loc, mass in mu.atoms:
        out += mass * np.exp(_poisson_log_pmf(ms.astype(float), q * loc)) / q
    return out


def tail_weight(phi, q, M):
    """``sum_{m > M} w_m`` by direct quadrature of the Poisson tail."""
    mu = phi.levy
    if mu.is_zero:
        return 0.0
    n = M + 1.0
    width = 8.0 * math.sqrt(n)
    bps = [max(n - width, n / 4) / q, n / q, (n + width) / q]
    val, _ = mu.integrate(lambda t: float(gammainc(n, q * t)), breakpoints=bps)
    return val / q


def _minimal_cutoff(phi, q, mass_tol, M_cap):
    """Smallest M with tail weight <= mass_tol, or M_cap if none."""
    hi = SMALL_M
    while hi < M_cap and tail_weight(phi, q, hi) > mass_tol:
        hi *= 2
    if hi >= M_cap:
        hi = M_cap
        if tail_weight(phi, q, hi) > mass_tol:
            return hi, False
    # invariant: tail(lo) > mass_tol (lo = 0 counts as such), tail(hi) <= mass_tol
    lo = hi // 2 if hi > SMALL_M else 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_weight(phi, q, mid) <= mass_tol:
            hi = mid
        else:
            lo = mid
    return hi, True


# phi -> {(q, mass_tol, M_cap): StepDistribution}; results are shared, treat as read-only
_WEIGHT_CACHE = weakref.WeakKeyDictionary()


def step_weights(phi, q=1.0, mass_tol=DEFAULT_MASS_TOL, M_cap=DEFAULT_M_CAP, strict=True):
    """Mixture weights of one subordinate step.

    The cutoff M is the smallest one whose remaining mass is at most
    ``mass_tol``.  If even ``M_cap`` leaves more, a
    :class:`TruncationError` carrying the partial result is raised, unless
    ``strict=False`` in which case the partial result is returned (its
    ``truncation_mass`` records the deficit and the samplers handle the
    tail exactly).
    """
    if not 0 < mass_tol < 1:
        raise ValueError("mass_tol must lie in (0, 1)")
    if M_cap < 1:
        raise ValueError("M_cap must be positive")
    pq = _check_normalized(phi, q)
    mu = phi.levy
    if mu.is_zero:
        return StepDistribution(q, float(phi.drift), np.zeros(0), 0.0, 0,
                                phi.drift * q / pq - 1.0, mass_tol, phi)
    key = (float(q), float(mass_tol), int(M_cap))
    cached = _WEIGHT_CACHE.setdefault(phi, {})
    if key not in cached:
        cached[key] = _compute_weights(phi, q, pq, mass_tol, int(M_cap))
    sd = cached[key]
    if sd.truncation_mass > mass_tol and strict:
        raise TruncationError(
            f"M_cap={M_cap} leaves mass {sd.truncation_mass:.3e} > mass_tol={mass_tol:g}",
            partial=sd)
    return sd


def _compute_weights(phi, q, pq, mass_tol, M_cap):
    mu = phi.levy
    M, _ = _minimal_cutoff(phi, q, mass_tol, M_cap)
    small = np.arange(1, min(M, SMALL_M) + 1)
    w = np.empty(M)
    w[:len(small)] = [_small_weight(mu, int(m), q) for m in small]
    if M > SMALL_M:
        w[SMALL_M:] = _large_weights(mu, np.arange(SMALL_M + 1, M + 1), q)
    w = np.maximum(w, 0.0)
    tail = tail_weight(phi, q, M)
    total = phi.drift + math.fsum(w) + tail
    return StepDistribution(q, float(phi.drift), w, tail, M, total * q / pq - 1.0, mass_tol, phi)


# ---------------------------------------------------------------------------
# lattice law of one step
# ---------------------------------------------------------------------------

def subordinate_step_pmf(sd, walk, radius, chunk=8192):
    """Law of one subordinate step on the box of the given radius.

    ``meta`` records ``truncation_mass`` (weights beyond M) and
    ``lattice_loss`` (mass of the first M terms outside the box).
    """
    cells = (2 * radius + 1) ** walk.d
    acc = np.zeros(cells)
    if sd.direct_atom:
        acc += sd.direct_atom * walk_point_table(walk, [1], radius)[0]
    for s in range(0, sd.M, chunk):
        ms = np.arange(s + 1, min(s + chunk, sd.M) + 1)
        acc += sd.weights[s:s + len(ms)] @ walk_point_table(walk, ms, radius)
    acc = acc.reshape((2 * radius + 1,) * walk.d)
    if walk.symmetric:
        acc = 0.5 * (acc + acc[(slice(None, None, -1),) * walk.d])
    out = LatticeDistribution(walk.d, radius, acc)
    inside = sd.direct_atom + math.fsum(sd.weights)
    out.meta.update(truncation_mass=sd.truncation_mass,
                    lattice_loss=max(inside - out.captured_mass, 0.0))
    return out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _poisson(rng, lam):
    """Poisson counts as float64; normal approximation above 1e15."""
    lam = np.asarray(lam, dtype=float)
    out = np.empty(lam.shape)
    big = lam > _EXACT_COUNT_LIMIT
    out[~big] = rng.poisson(lam[~big])
    if np.any(big):
        lb = lam[big]
        out[big] = np.round(lb + np.sqrt(lb) * rng.standard_normal(lb.shape))
    return out


class TailSampler:
    """Exact-in-law sampler of ``m`` conditioned on ``m > M``.

    The mixing time ``t`` is drawn from ``P(Poisson(q t) > M) mu(dt)`` by
    inverting its CDF on a grid in ``u = log t`` where the density is
    interpolated log-linearly (exact for power laws), with a power-law
    extrapolation past the last node.  Given ``t``, the (M+1)-th arrival of a
    rate-q Poisson process conditioned to land before ``t`` is drawn by
    inverting the Gamma CDF, and the arrivals after it are Poisson.
    """

    def __init__(self, phi, q, M, span=345.0):
        self.q, self.M = float(q), int(M)
        n = self.M + 1.0
        mu = phi.levy
        self.atom_locs = np.array([a for a, _ in mu.atoms])
        atom_w = np.array([w * gammainc(n, q * a) for a, w in mu.atoms])
        self.cont_mass = 0.0
        if mu.density is not None:
            sd = 1.0 / math.sqrt(n)
            u0 = math.log(n / q)
            core = np.linspace(u0 - 45 * sd, u0 + 15 * sd, 3001)
            far = np.linspace(core[-1], core[-1] + span, 8001)[1:]
            near = np.linspace(core[0] - 10, core[0], 201)[:-1]
            u = np.concatenate((near, core, far))
            t = np.exp(u)
            with np.errstate(all="ignore"):
                g = gammainc(n, q * t) * np.asarray(mu.density(t), dtype=float) * t
            g = np.nan_to_num(g, nan=0.0, posinf=0.0)
            h = np.diff(u)
            g0, g1 = g[:-1], g[1:]
            with np.errstate(all="ignore"):
                k = np.log(g1 / g0) / h
                cell = np.where(np.abs(k * h) > 1e-9, (g1 - g0) / k, 0.5 * (g0 + g1) * h)
            cell = np.nan_to_num(np.where((g0 > 0) & (g1 > 0), cell, 0.5 * (g0 + g1) * h))
            last_k = math.log(g[-1] / g[-2]) / h[-1] if g[-1] > 0 and g[-2] > 0 else -np.inf
            beyond = g[-1] / -last_k if last_k < 0 else 0.0
            self.u, self.g, self.k, self.last_k = u, g, k, last_k
            self.cdf = np.concatenate(([0.0], np.cumsum(cell)))
            self.cont_mass = float(self.cdf[-1] + beyond)
        total = self.cont_mass + atom_w.sum()
        if not total > 0:
            raise UnsupportedSamplerError("empty tail")
        self.p_cont = self.cont_mass / total
        self.atom_p = atom_w / max(atom_w.sum(), 1e-300) if atom_w.size else atom_w

    def _sample_u(self, rng, size):
        target = rng.random(size) * self.cont_mass
        e = rng.standard_exponential(size)
        out = np.empty(size)
        inside = target < self.cdf[-1]
        i = np.clip(np.searchsorted(self.cdf, target[inside], side="right") - 1,
                    0, len(self.u) - 2)
        rem = target[inside] - self.cdf[i]
        g0, k, u0 = self.g[i], self.k[i], self.u[i]
        with np.errstate(all="ignore"):
            step = np.where(np.abs(k * (self.u[i + 1] - u0)) > 1e-9,
                            np.log1p(rem * k / g0) / k, rem / g0)
        out[inside] = u0 + np.nan_to_num(step)
        out[~inside] = self.u[-1] + e[~inside] / -self.last_k
        return out

    def sample_times(self, rng, size):
        """Mixing times ``t`` of the tail branch."""
        which = rng.random(size)
        out = np.empty(size)
        cont = which < self.p_cont
        nc = int(cont.sum())
        out[cont] = np.exp(self._sample_u(rng, nc)) if nc else 0.0
        if nc < size:
            out[~cont] = self.atom_locs[rng.choice(len(self.atom_locs), size - nc, p=self.atom_p)]
        return out

    def sample(self, rng, size):
        """Step counts ``m > M`` (float64; exact integers below 2**53)."""
        x = self.q * self.sample_times(rng, size)
        n = self.M + 1.0
        v = rng.random(size)
        with np.errstate(all="ignore"):
            arrival = gammaincinv(n, v * gammainc(n, x))
        arrival = np.minimum(np.nan_to_num(arrival, nan=n), x)
        return n + _poisson(rng, np.maximum(x - arrival, 0.0))


def sample_step_counts(sd, size, rng=None, return_branch=False):
    """Draw ``size`` step counts m (the direct branch counts one step).

    With ``return_branch`` also returns the category index: 0 = direct,
    1..M = weight index, M+1 = tail.
    """
    rng = as_generator(rng)
    p = sd.category_probs()
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    cat = np.searchsorted(cdf, rng.random(size), side="right")
    cat = np.minimum(cat, len(p) - 1)
    m = np.where(cat == 0, 1.0, cat.astype(float))
    tail = cat == sd.M + 1
    nt = int(tail.sum())
    if nt:
        m[tail] = sd.tail_sampler().sample(rng, nt)
    return (m, cat) if return_branch else m


def walk_displacement(walk, steps, rng=None):
    """Endpoint of the walk after ``steps`` steps, for each entry of ``steps``.

    Exact multinomial counts per support point up to 2**53 steps; beyond
    that the central-limit normal law (the displacement is then far
    outside any box this package evaluates).
    """
    rng = as_generator(rng)
    steps = np.asarray(steps, dtype=float)
    pts = walk.points.astype(float)
    out = np.zeros(steps.shape + (walk.d,))
    exact = steps <= 2.0**53
    if np.any(exact):
        counts = rng.multinomial(steps[exact].astype(np.int64), walk.masses)
        out[exact] = counts @ pts
    if np.any(~exact):
        mean = walk.masses @ pts
        cov = (pts - mean).T @ (walk.masses[:, None] * (pts - mean))
        s = steps[~exact]
        z = rng.multivariate_normal(np.zeros(walk.d), cov, size=s.shape)
        out[~exact] = np.round(s[:, None] * mean + np.sqrt(s)[:, None] * z)
    return out


def sample_steps(sd, walk, size, rng=None):
    """``size`` independent subordinate steps, shape ``(size, d)``."""
    rng = as_generator(rng)
    return walk_displacement(walk, sample_step_counts(sd, size, rng), rng)


def sample_step(sd, walk, rng=None):
    """One subordinate step as a tuple of lattice coordinates."""
    return tuple(int(c) for c in sample_steps(sd, walk, 1, rng)[0])


def sum_step_counts(sd, n_steps, rng=None, head=SMALL_M):
    """Total walk steps of ``n_steps[i]`` i.i.d. subordinate steps, per entry.

    Counts in the direct branch and the first ``head`` weights come from one
    multinomial draw per entry; the rest are drawn individually.
    """
    rng = as_generator(rng)
    n_steps = np.asarray(n_steps, dtype=np.int64)
    p = sd.category_probs()
    h = min(head, sd.M)
    head_p = np.concatenate((p[:h + 1], [max(1.0 - p[:h + 1].sum(), 0.0)]))
    head_p /= head_p.sum()
    counts = rng.multinomial(n_steps, head_p)
    values = np.concatenate(([1.0], np.arange(1, h + 1, dtype=float)))
    total = counts[..., :-1] @ values
    rare = counts[..., -1].ravel()
    n_rare = int(rare.sum())
    if n_rare:
        rest = p[h + 1:]
        cdf = np.cumsum(rest / rest.sum())
        cdf[-1] = 1.0
        cat = np.minimum(np.searchsorted(cdf, rng.random(n_rare), side="right"), len(rest) - 1)
        cat = cat + h + 1
        m = cat.astype(float)
        tail = cat == sd.M + 1
        nt = int(tail.sum())
        if nt:
            m[tail] = sd.tail_sampler().sample(rng, nt)
        owner = np.repeat(np.arange(rare.size), rare)
        total = total.ravel() + np.bincount(owner, weights=m, minlength=rare.size)
        total = total.reshape(n_steps.shape)
    return total


def sample_stable_subordinator(alpha, t, rng=None, size=None, scale=1.0):
    """Draw ``T_t`` with ``E exp(-lam T_t) = exp(-t scale lam**alpha)``.

    Kanter's representation of the one-sided stable law::

        T_1 = sin(a U) sin((1-a) U)**((1-a)/a) / sin(U)**(1/a) / E**((1-a)/a)

    with U uniform on (0, pi) and E standard exponential.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    rng = as_generator(rng)
    t = float(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    shape = () if size is None else size
    if t == 0:
        return 0.0 if size is None else np.zeros(shape)
    u = rng.uniform(0.0, math.pi, shape)
    e = rng.standard_exponential(shape)
    a = alpha
    with np.errstate(all="ignore"):
        s = (np.sin(a * u) * np.sin((1 - a) * u) ** ((1 - a) / a)
             / np.sin(u) ** (1 / a) / e ** ((1 - a) / a))
    out = (scale * t) ** (1 / a) * s
    return float(out) if size is None else out


def sample_subordinator(phi, t, rng=None, size=None):
    """``T_t`` for a drift plus (optionally) a stable Levy part."""
    if not phi.samplable:
        raise UnsupportedSamplerError(f"no exact sampler for {phi.label or 'phi'}")
    rng = as_generator(rng)
    shape = () if size is None else size
    out = np.full(shape, phi.drift * float(t))
    if phi.stable is not None:
        alpha, scale = phi.stable
        out = out + sample_stable_subordinator(alpha, t, rng, size=shape, scale=scale)
    return float(out) if size is None else out
