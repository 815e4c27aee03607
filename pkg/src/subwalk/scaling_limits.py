"""Scaled subordinate walks and their stable limits.

The scaled process runs ``N(n t)`` subordinate steps (Poisson clock) or
``floor(n t)`` of them (floor clock) and multiplies by
``sqrt(phi^{-1}(1/n))``.  Its characteristic function is explicit, so
convergence to the rotationally invariant limit is checked exactly on a
theta grid; Monte Carlo estimates check the samplers against the same
formula.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bernstein import eval_phi, invert_phi
from .errors import ChfDomainError
from .lattice import LatticeWalk
from .mc import empirical_chf
from .rng import DEFAULT_SEED, as_generator, make_rng
from .subordination import sample_step_counts, step_weights, sum_step_counts, walk_displacement

CLOCKS = ("poisson", "floor")
SCHEMA = "subwalk/1"


def default_theta_grid(d):
    """d=1: -5..5 step 0.25; d=2: the product of -3..3 step 0.5."""
    if d == 1:
        return np.arange(-20, 21)[:, None] * 0.25
    if d == 2:
        ax = np.arange(-6, 7) * 0.5
        x, y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([x.ravel(), y.ravel()], axis=1)
    ax = np.arange(-3, 4) * 1.0
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _as_grid(theta, d):
    th = np.asarray(theta, dtype=float)
    if th.ndim == 0:
        th = th.reshape(1, 1)
    elif th.ndim == 1:
        th = th[:, None] if d == 1 else th[None, :]
    if th.shape[1] != d:
        raise ValueError(f"theta has dimension {th.shape[1]}, expected {d}")
    return th


@dataclass(frozen=True, eq=False)
class ScaledProcessSpec:
    phi: object
    n: int
    clock: str = "poisson"
    d: int = 1
    t: float = 1.0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {CLOCKS}")
        if self.d < 1 or not self.t >= 0:
            raise ValueError("need d >= 1 and t >= 0")
        p1 = eval_phi(self.phi, 1.0)
        if abs(p1 - 1.0) > 1e-8:
            raise ValueError(f"phi(1) = {p1!r}; the scaled process needs phi(1) = 1")

    @property
    def scale(self):
        """``sqrt(phi^{-1}(1/n))``."""
        return math.sqrt(invert_phi(self.phi, 1.0 / self.n))


def cosine_average(theta, scale):
    """``mean_j cos(scale * theta_j)`` (the one-step chf of the simple walk)."""
    th = np.asarray(theta, dtype=float)
    return np.mean(np.cos(scale * th), axis=-1)


def one_minus_cosine_average(theta, scale):
    """``1 - cosine_average`` computed as ``mean 2 sin^2(scale theta / 2)``."""
    th = np.asarray(theta, dtype=float)
    return np.mean(2.0 * np.sin(0.5 * scale * th) ** 2, axis=-1)


def _phi_at(phi, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0
    if np.any(pos):
        out[pos] = eval_phi(phi, x[pos])
    return out


def chf_scaled_exact(spec, theta, negative_base="raise"):
    """Exact ``E exp(i theta . X^(n)_t)`` on a grid (real for the simple walk).

    Poisson clock: ``exp(-n t phi(1 - c))``.  Floor clock:
    ``(1 - phi(1 - c))**floor(n t)``.  A negative floor-clock base raises
    :class:`ChfDomainError` unless ``negative_base="power"``, in which case
    the integer power is taken as is.
    """
    th = _as_grid(theta, spec.d)
    x = one_minus_cosine_average(th, spec.scale)
    f = _phi_at(spec.phi, x)
    if spec.clock == "poisson":
        return np.exp(-spec.n * spec.t * f)
    k = math.floor(spec.n * spec.t)
    base = 1.0 - f
    if np.any(base < 0):
        if negative_base != "power":
            bad = th[np.argmax(base < 0)]
            raise ChfDomainError(f"floor-clock base 1 - phi(1 - c) < 0 at theta={bad.tolist()}")
        return np.power(base, k)
    with np.errstate(divide="ignore"):
        return np.where(base > 0, np.exp(k * np.log1p(-f)), 0.0 if k else 1.0)


def chf_limit(theta, t, alpha, d):
    """``exp(-t (2d)**(-alpha) |theta|**(2 alpha))``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    th = _as_grid(theta, d)
    r = np.sqrt(np.sum(th * th, axis=1))
    return np.exp(-t * (2.0 * d) ** (-alpha) * r ** (2 * alpha))


@dataclass
class ChfEvaluation:
    theta_grid: np.ndarray
    values: np.ndarray
    method: str
    stderr: np.ndarray = None
    paths: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta_grid = np.asarray(self.theta_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if len(self.theta_grid) != len(self.values):
            raise ValueError("grid and values differ in length")
        if np.any(np.abs(self.values) > 1 + 1e-12):
            raise ValueError("characteristic function exceeds 1 in modulus")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.theta_grid.shape[1]
        w.writerow([f"theta{j + 1}" for j in range(d)] + ["re", "im", "stderr"])
        for i, th in enumerate(self.theta_grid):
            se = "" if self.stderr is None else repr(float(self.stderr[i]))
            w.writerow([repr(float(c)) for c in th]
                       + [repr(float(self.values[i].real)), repr(float(self.values[i].imag)), se])
        return buf.getvalue()

    def to_json(self):
        return {"schema": SCHEMA, "kind": "chf", "method": self.method, "paths": self.paths,
                "points": len(self.values), "meta": self.meta}


@dataclass
class ConvergenceReport:
    n_sequence: list
    sup_distance: list
    alpha: float
    monotone_flag: bool
    final_distance: float
    clock: str = "poisson"
    d: int = 1
    t: float = 1.0
    label: str = ""

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "sup_distance"])
        for n, s in zip(self.n_sequence, self.sup_distance):
            w.writerow([n, repr(float(s))])
        return buf.getvalue()

    def to_json(self):
        return {"schema": SCHEMA, "kind": "convergence", "phi": self.label,
                "alpha": self.alpha, "clock": self.clock, "d": self.d, "t": self.t,
                "n_sequence": list(self.n_sequence),
                "sup_distance": [float(s) for s in self.sup_distance],
                "monotone_flag": self.monotone_flag, "final_distance": self.final_distance}


def convergence_report(phi, alpha, d=1, t=1.0, theta_grid=None, n_sequence=(10**2, 10**3, 10**4),
                       clock="poisson", mono_tol=1e-12):
    """Sup-grid distance between the exact scaled chf and the stable limit, per n."""
    n_sequence = [int(n) for n in n_sequence]
    if not n_sequence:
        raise ValueError("n_sequence is empty")
    grid = default_theta_grid(d) if theta_grid is None else _as_grid(theta_grid, d)
    lim = chf_limit(grid, t, alpha, d)
    dist = []
    for n in n_sequence:
        spec = ScaledProcessSpec(phi, n, clock, d, t)
        dist.append(float(np.max(np.abs(chf_scaled_exact(spec, grid) - lim))))
    mono = all(b <= a + mono_tol for a, b in zip(dist[:-1], dist[1:]))
    return ConvergenceReport(n_sequence, dist, float(alpha), mono, dist[-1], clock, d, t,
                             getattr(phi, "label", ""))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _clock_counts(spec, rng, size):
    if spec.clock == "floor":
        return np.full(size, math.floor(spec.n * spec.t), dtype=np.int64)
    return rng.poisson(spec.n * spec.t, size=size)


def sample_endpoints(spec, paths, rng=None, chunk=10_000, walk=None):
    """``paths`` independent draws of ``X^(n)_t`` (unscaled lattice endpoint).

    Paths are produced in chunks, chunk k using the child stream
    ``(seed, k)``; returns the integer endpoints and the scale separately.
    """
    walk = LatticeWalk.simple(spec.d) if walk is None else walk
    sd = step_weights(spec.phi, 1.0, strict=False)
    seed = spec.seed if rng is None else int(as_generator(rng).integers(2**63))
    out = np.empty((paths, spec.d))
    for k, s in enumerate(range(0, paths, chunk)):
        g = make_rng(seed, stream=k)
        size = min(chunk, paths - s)
        steps = sum_step_counts(sd, _clock_counts(spec, g, size), g)
        out[s:s + size] = walk_displacement(walk, steps, g)
    return out


def chf_monte_carlo(spec, theta_grid=None, paths=10**5, rng=None):
    """Empirical chf of ``X^(n)_t`` with per-point standard errors."""
    if paths < 1000:
        raise ValueError("paths must be >= 1000")
    grid = default_theta_grid(spec.d) if theta_grid is None else _as_grid(theta_grid, spec.d)
    x = sample_endpoints(spec, paths, rng) * spec.scale
    vals, se = empirical_chf(x, grid)
    zero = np.all(grid == 0, axis=1)
    vals[zero], se[zero] = 1.0, 0.0
    return ChfEvaluation(grid, vals, "monte_carlo", se, paths,
                         {"n": spec.n, "clock": spec.clock, "t": spec.t, "seed": spec.seed})


@dataclass
class TailRatioReport:
    K_grid: list
    n_grid: list
    a: float
    beta: float
    probabilities: np.ndarray
    ratios: np.ndarray
    stderr: np.ndarray
    zero_cells: np.ndarray
    max_ratio: float
    growth_in_n: bool

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.ratios)) and not self.growth_in_n)

    def to_json(self):
        return {"schema": SCHEMA, "kind": "tail_ratio", "a": self.a, "beta": self.beta,
                "K_grid": list(self.K_grid), "n_grid": list(self.n_grid),
                "probabilities": self.probabilities.tolist(), "ratios": self.ratios.tolist(),
                "stderr": self.stderr.tolist(), "zero_cells": self.zero_cells.tolist(),
                "max_ratio": self.max_ratio, "growth_in_n": self.growth_in_n,
                "bounded": self.bounded}


def tail_bound_ratio(phi, a=1.0, K_grid=(2, 4, 8), beta=1.0, n_grid=(10**2, 10**3, 10**4),
                     paths=10**5, rng=None, seed=DEFAULT_SEED, d=1, chunk=10_000):
    """Monte Carlo ratio of a partial-sum tail probability to its bound shape.

    For each n, ``S = sum_{k <= a n} xi_k`` is simulated; the ratio is
    ``P(|S| > K / sqrt(phi^{-1}(1/n)))`` divided by
    ``a (K**(-2-beta) phi^{-1}(1/n) / phi^{-1}(K**(-beta) / n) + K**(-beta))``.
    Cells without exceedances get ratio 0; their stderr entry then holds the
    one-sided 95% bound ``3 / paths`` divided by the bound shape.
    ``growth_in_n`` is set when the per-n maximum ratio increases by more
    than four standard errors at every step of ``n_grid``.
    """
    if phi.drift != 0:
        raise ValueError("the tail bound assumes zero drift")
    walk = LatticeWalk.simple(d)
    sd = step_weights(phi, 1.0, strict=False)
    if rng is not None:
        seed = int(as_generator(rng).integers(2**63))
    K_grid = [float(k) for k in K_grid]
    n_grid = [int(n) for n in n_grid]
    probs = np.zeros((len(K_grid), len(n_grid)))
    ratio = np.zeros_like(probs)
    se = np.zeros_like(probs)
    zero = np.zeros(probs.shape, dtype=bool)
    for j, n in enumerate(n_grid):
        steps = math.floor(a * n)
        norms = np.empty(paths)
        for k, s in enumerate(range(0, paths, chunk)):
            g = make_rng(seed, stream=j * 10**6 + k)
            size = min(chunk, paths - s)
            tot = sum_step_counts(sd, np.full(size, steps, dtype=np.int64), g)
            norms[s:s + size] = np.linalg.norm(walk_displacement(walk, tot, g), axis=1)
        inv_n = invert_phi(phi, 1.0 / n)
        for i, K in enumerate(K_grid):
            rhs = a * (K ** (-2 - beta) * inv_n / invert_phi(phi, K ** -beta / n) + K ** -beta)
            p = float(np.mean(norms > K / math.sqrt(inv_n)))
            probs[i, j] = p
            ratio[i, j] = p / rhs
            if p == 0:
                zero[i, j] = True
                se[i, j] = 3.0 / paths / rhs
            else:
                se[i, j] = math.sqrt(p * (1 - p) / paths) / rhs
    col_max = ratio.max(axis=0)
    arg = ratio.argmax(axis=0)
    col_se = se[arg, np.arange(len(n_grid))]
    growth = len(n_grid) >= 2 and all(
        col_max[j + 1] - col_max[j] > 4 * math.hypot(col_se[j], col_se[j + 1])
        for j in range(len(n_grid) - 1))
    return TailRatioReport(K_grid, n_grid, float(a), float(beta), probs, ratio, se, zero,
                           float(ratio.max()), bool(growth))


# ---------------------------------------------------------------------------
# inequality between the scaled exponent and the time step
# ---------------------------------------------------------------------------

def small_time_bound_check(phi, d=1, theta_grid=None, n_grid=(10**2, 10**4, 10**6), h=1.0,
                           slack=1e-9):
    """Check ``n h phi(1 - c_n) <= n h phi(phi^{-1}(1/n) |theta|^2 / (2d)) <= h (|theta|^2/(2d) v 1)``.

    Returns ``(passed, worst_residual)`` over the grid; residuals are
    ``lhs - rhs`` of each link.
    """
    grid = default_theta_grid(d) if theta_grid is None else _as_grid(theta_grid, d)
    r2 = np.sum(grid * grid, axis=1)
    worst = -np.inf
    for n in n_grid:
        lam = invert_phi(phi, 1.0 / n)
        first = n * h * _phi_at(phi, one_minus_cosine_average(grid, math.sqrt(lam)))
        middle = n * h * _phi_at(phi, lam * r2 / (2 * d))
        last = h * np.maximum(r2 / (2 * d), 1.0)
        worst = max(worst, float(np.max(first - middle)), float(np.max(middle - last)))
    return worst <= slack, worst


def clock_gap(phi, d=1, t=1.0, theta_grid=None, n_grid=(10**2, 10**3, 10**4)):
    """Sup-grid gap between the two clocks' exact chfs, per n."""
    grid = default_theta_grid(d) if theta_grid is None else _as_grid(theta_grid, d)
    out = []
    for n in n_grid:
        a = chf_scaled_exact(ScaledProcessSpec(phi, n, "poisson", d, t), grid)
        b = chf_scaled_exact(ScaledProcessSpec(phi, n, "floor", d, t), grid)
        out.append(float(np.max(np.abs(a - b))))
    return out


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass
class PathTable:
    times: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    scale: float

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.values.shape[1]
        w.writerow(["time", "steps"] + [f"x{j + 1}" for j in range(d)])
        for t, c, v in zip(self.times, self.counts, self.values):
            w.writerow([repr(float(t)), int(c)] + [repr(float(x)) for x in v])
        return buf.getvalue()


_CLOCK_KIND, _STEP_KIND = 0, 1


def _block_rng(seed, kind, block):
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(int(seed), spawn_key=(kind, block))))


def sample_scaled_path(spec, time_grid, rng=None, block=4096, walk=None):
    """One trajectory of ``X^(n)`` observed at ``time_grid``.

    Steps and clock arrivals are generated in fixed blocks, block b drawing
    from its own stream ``(seed, kind, b)``, so the first k steps never
    depend on how many are needed: evaluating at a sub-grid gives exactly
    the restriction of the path.
    """
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ValueError("time_grid must be nondecreasing and nonnegative")
    walk = LatticeWalk.simple(spec.d) if walk is None else walk
    seed = spec.seed if rng is None else (int(rng) if isinstance(rng, (int, np.integer))
                                          else int(as_generator(rng).integers(2**63)))
    horizon = spec.n * float(times.max(initial=0.0))
    if spec.clock == "floor":
        counts = np.floor(spec.n * times).astype(np.int64)
    else:
        arrivals = np.zeros(0)
        b = 0
        while arrivals.size == 0 or arrivals[-1] <= horizon:
            gaps = _block_rng(seed, _CLOCK_KIND, b).standard_exponential(block)
            start = arrivals[-1] if arrivals.size else 0.0
            arrivals = np.concatenate((arrivals, start + np.cumsum(gaps)))
            b += 1
        counts = np.searchsorted(arrivals, spec.n * times, side="right").astype(np.int64)
    need = int(counts.max(initial=0))
    sd = step_weights(spec.phi, 1.0, strict=False) if need else None
    pos = np.zeros((1, spec.d))
    chunks = []
    for b in range(-(-need // block)):
        g = _block_rng(seed, _STEP_KIND, b)
        m = sample_step_counts(sd, block, g)
        chunks.append(walk_displacement(walk, m, g))
    if chunks:
        pos = np.concatenate((pos, np.cumsum(np.concatenate(chunks), axis=0)))
    scale = spec.scale
    return PathTable(times, scale * pos[counts], counts, scale)
