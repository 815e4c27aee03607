"""Laplace exponents of subordinators (Bernstein functions).

A Laplace exponent is represented as a drift ``b`` plus a Levy measure
``mu`` on (0, inf)::

    phi(lam) = b*lam + int (1 - exp(-lam*s)) mu(ds)

An optional closed form (and closed-form inverse) short-circuits the
quadrature.  The module also provides the inequality checks and the
regular-variation diagnostics used throughout the package, plus a small
catalog of named exponents addressable by string id.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import optimize
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from .errors import InversionRangeError, SubwalkError
from .quadrature import DEFAULT_RTOL, integrate_log


# ---------------------------------------------------------------------------
# Levy measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LevyMeasure:
    """Levy measure of a subordinator: density part plus finitely many atoms.

    ``density`` must be vectorised (it is evaluated on arrays by the
    Poisson-kernel quadrature).  ``tail_analytic(t)`` when given returns the
    full tail ``mu(t, inf)`` including atoms.
    """

    density: Optional[Callable] = None
    atoms: tuple = ()
    tail_analytic: Optional[Callable] = None
    split_point: float = 1.0
    rtol: float = DEFAULT_RTOL
    validate: bool = True
    integrability: float = field(init=False, default=float("nan"))
    integrability_error: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        atoms = tuple((float(a), float(w)) for a, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.split_point <= 0:
            raise ValueError("split_point must be positive")
        for loc, mass in atoms:
            if not loc > 0:
                raise ValueError(f"atom location must be positive, got {loc}")
            if not mass > 0:
                raise ValueError(f"atom mass must be positive, got {mass}")
        if self.validate:
            self._check()

    @property
    def is_zero(self):
        return self.density is None and not self.atoms

    def integrate(self, f, lo=0.0, hi=np.inf, breakpoints=(), rtol=None):
        """Return ``(int_{(lo,hi]} f dmu, error estimate)``."""
        rtol = self.rtol if rtol is None else rtol
        total = 0.0
        for loc, mass in self.atoms:
            if lo < loc <= hi:
                total += mass * float(f(loc))
        if self.density is None:
            return total, 0.0
        dens = self.density
        val, err = integrate_log(lambda t: f(t) * dens(t), lo, hi,
                                 breakpoints=(self.split_point,) + tuple(breakpoints),
                                 rtol=rtol)
        return total + val, err

    def _check(self):
        if self.density is not None:
            grid = np.logspace(-8, 8, 65)
            with np.errstate(all="ignore"):
                vals = np.asarray(self.density(grid), dtype=float)
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                bad = grid[(vals < 0) | ~np.isfinite(vals)][0]
                raise ValueError(f"Levy density negative or non-finite at t={bad:g}")
        val, err = self.integrate(lambda t: min(1.0, t))
        if not np.isfinite(val):
            raise ValueError("Levy measure does not integrate 1 ^ s")
        object.__setattr__(self, "integrability", val)
        object.__setattr__(self, "integrability_error", err)
        if self.tail_analytic is not None:
            for t in (1e-3, 1e-1, 1.0, 10.0, 1e3):
                num = _tail_by_quadrature(self, t)
                ana = float(self.tail_analytic(t))
                if abs(num - ana) > 1e-8 * max(abs(ana), 1e-300) + 1e-12:
                    raise ValueError(
                        f"tail_analytic disagrees with quadrature at t={t:g}: {ana!r} vs {num!r}")


def _tail_by_quadrature(mu, t):
    val, _ = mu.integrate(lambda s: 1.0, lo=t, breakpoints=(t,))
    return val


# ---------------------------------------------------------------------------
# Bernstein function
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BernsteinFunction:
    """Laplace exponent ``phi`` of a subordinator.

    ``stable`` optionally records ``(alpha, scale)`` when the Levy part is
    ``scale * lam**alpha``; together with the drift this makes the
    subordinator exactly samplable.
    """

    drift: float = 0.0
    levy: LevyMeasure = field(default_factory=lambda: LevyMeasure(validate=False))
    closed_form: Optional[Callable] = None
    closed_form_inverse: Optional[Callable] = None
    label: str = ""
    stable: Optional[tuple] = None
    validate: bool = True

    def __post_init__(self):
        if not self.drift >= 0:
            raise ValueError("drift must be nonnegative")
        if self.drift == 0 and self.levy.is_zero:
            raise ValueError("constant subordinator: need drift > 0 or a nonzero Levy measure")
        if self.validate:
            check_bernstein(self)

    def __call__(self, lam):
        return eval_phi(self, lam)

    @property
    def samplable(self):
        return self.levy.is_zero or self.stable is not None


def _phi_quadrature(phi, lam):
    val, _ = phi.levy.integrate(lambda s: -math.expm1(-lam * s),
                                breakpoints=(1.0 / lam,))
    return phi.drift * lam + val


def eval_phi(phi, lam, use_closed_form=True):
    """Evaluate ``phi(lam)`` for ``lam > 0`` (scalar or array)."""
    arr = np.asarray(lam, dtype=float)
    if np.any(arr <= 0) or np.any(np.isnan(arr)):
        raise ValueError("eval_phi requires lam > 0")
    if use_closed_form and phi.closed_form is not None:
        out = np.asarray(phi.closed_form(arr), dtype=float)
    elif arr.ndim == 0:
        out = np.asarray(_phi_quadrature(phi, float(arr)))
    else:
        out = np.array([_phi_quadrature(phi, float(x)) for x in arr.ravel()]).reshape(arr.shape)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def eval_phi_complex(phi, z):
    """``phi`` on the closed right half-plane (needed for asymmetric walks).

    ``z == 0`` returns 0 by continuity.
    """
    z = complex(z)
    if z == 0:
        return 0j
    if z.imag == 0 and z.real > 0:
        return complex(eval_phi(phi, z.real))
    if phi.closed_form is not None:
        return complex(phi.closed_form(np.complex128(z)))
    scale = 1.0 / max(abs(z), 1e-300)
    re, _ = phi.levy.integrate(lambda s: 1.0 - math.exp(-z.real * s) * math.cos(z.imag * s),
                               breakpoints=(scale,))
    im, _ = phi.levy.integrate(lambda s: math.exp(-z.real * s) * math.sin(z.imag * s),
                               breakpoints=(scale,))
    return phi.drift * z + complex(re, im)


def check_bernstein(phi, tol=1e-6):
    """Numerical sanity checks of the Bernstein-function properties.

    Raises ``ValueError`` on the first violation.
    """
    grid = np.logspace(-6, 6, 13)
    vals = np.asarray(eval_phi(phi, grid))
    if np.any(np.diff(vals) < -tol * np.abs(vals[1:])):
        raise ValueError(f"{phi.label or 'phi'} is not nondecreasing")
    # phi(0+) = 0: values keep shrinking down to 1e-30 (a killed exponent would stall)
    near_zero = eval_phi(phi, np.array([1e-30, 1e-20, 1e-10]))
    if np.any(np.diff(near_zero) < -tol * np.abs(near_zero[1:])) or \
            near_zero[0] > 0.9 * near_zero[-1]:
        raise ValueError(f"{phi.label or 'phi'} does not vanish at 0+")
    # (-1)^(n-1) Delta_h^n phi >= 0, n = 1..4, h = lam/4
    for lam in grid:
        h = lam / 4
        stencil = np.asarray(eval_phi(phi, lam + h * np.arange(5)))
        scale = np.max(np.abs(stencil))
        diff = stencil
        for n in range(1, 5):
            diff = np.diff(diff)
            if (-1) ** (n - 1) * diff[0] < -tol * scale:
                raise ValueError(
                    f"{phi.label or 'phi'}: finite difference of order {n} has wrong sign at {lam:g}")
    if phi.closed_form is not None:
        for lam in grid:
            cf = eval_phi(phi, lam)
            qd = eval_phi(phi, lam, use_closed_form=False)
            if abs(cf - qd) > 1e-8 * max(abs(cf), 1e-300):
                raise ValueError(
                    f"closed form and quadrature disagree at {lam:g}: {cf!r} vs {qd!r}")


# ---------------------------------------------------------------------------
# Inversion and measure functionals
# ---------------------------------------------------------------------------

MAX_BRACKET_STEPS = 200


def invert_phi(phi, y, rtol=1e-15):
    """Return ``lam`` with ``phi(lam) = y``.

    Brackets the root by doubling up / halving down from ``lam = 1``
    (at most 200 steps), then refines in log-space with Brent's method.
    """
    if not y > 0:
        raise ValueError("invert_phi requires y > 0")
    if phi.closed_form_inverse is not None:
        return float(phi.closed_form_inverse(y))
    lo = hi = 1.0
    f1 = eval_phi(phi, 1.0)
    if f1 == y:
        return 1.0
    if f1 < y:
        for _ in range(MAX_BRACKET_STEPS):
            hi *= 2.0
            if eval_phi(phi, hi) >= y:
                lo = hi / 2.0
                break
        else:
            raise InversionRangeError(f"y={y!r} above the range of {phi.label or 'phi'}")
    else:
        for _ in range(MAX_BRACKET_STEPS):
            lo /= 2.0
            if eval_phi(phi, lo) <= y:
                hi = lo * 2.0
                break
        else:
            raise InversionRangeError(f"y={y!r} below the bracketable range of {phi.label or 'phi'}")
    g = lambda u: eval_phi(phi, math.exp(u)) - y
    if g(math.log(lo)) == 0:
        return lo
    if g(math.log(hi)) == 0:
        return hi
    u = optimize.brentq(g, math.log(lo), math.log(hi), xtol=1e-300, rtol=4 * np.finfo(float).eps,
                        maxiter=200)
    return math.exp(u)


def inverse(phi):
    """Callable ``y -> phi^{-1}(y)`` (handy for :func:`rv_index_estimate`)."""
    def f(y):
        return invert_phi(phi, y)
    f.__name__ = f"inverse({phi.label or 'phi'})"
    return f


def tail_mass(mu, t):
    """``mu(t, inf)``."""
    if not t > 0:
        raise ValueError("tail_mass requires t > 0")
    if mu.is_zero:
        return 0.0
    if mu.tail_analytic is not None:
        return float(mu.tail_analytic(t))
    return _tail_by_quadrature(mu, t)


def truncated_first_moment(mu, r):
    """``int_{(0, r]} t mu(dt)``."""
    if not r > 0:
        raise ValueError("truncated_first_moment requires r > 0")
    if mu.is_zero:
        return 0.0
    val, _ = mu.integrate(lambda t: t, hi=r, breakpoints=(r,))
    return val


@dataclass
class InequalityReport:
    passed: bool
    worst_first_moment: float
    worst_tail: float
    worst_scaling: float
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "passed": self.passed,
            "worst_first_moment": self.worst_first_moment,
            "worst_tail": self.worst_tail,
            "worst_scaling": self.worst_scaling,
            "violations": [list(v) for v in self.violations],
        }


def _residual(lhs, rhs):
    return (lhs - rhs) / max(1.0, abs(rhs))


def check_exponent_inequalities(phi, grid, x_grid=None, tol=1e-8):
    """Check the three elementary Laplace-exponent inequalities on a grid.

    For r, t in ``grid``::

        int_{(0,r]} s mu(ds) <= e * r * phi(1/r)
        mu(t, inf)           <= phi(1/t) / (1 - 1/e)

    and for lam in ``grid``, x in ``x_grid``: ``phi(lam*x) <= max(x, 1) phi(lam)``.
    Residuals are ``(lhs - rhs) / max(1, |rhs|)``; a residual above ``tol``
    is a violation.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if x_grid is None:
        x_grid = np.logspace(-3, 3, 7)
    e = math.e
    worst = {"first": -np.inf, "tail": -np.inf, "scaling": -np.inf}
    violations = []
    for r in grid:
        rhs = e * r * eval_phi(phi, 1.0 / r)
        res = _residual(truncated_first_moment(phi.levy, r), rhs)
        worst["first"] = max(worst["first"], res)
        if res > tol:
            violations.append(("first_moment", float(r), res))
        rhs = eval_phi(phi, 1.0 / r) / (1.0 - 1.0 / e)
        res = _residual(tail_mass(phi.levy, r), rhs)
        worst["tail"] = max(worst["tail"], res)
        if res > tol:
            violations.append(("tail", float(r), res))
    for lam in grid:
        base = eval_phi(phi, lam)
        for x in x_grid:
            res = _residual(eval_phi(phi, lam * x), max(x, 1.0) * base)
            worst["scaling"] = max(worst["scaling"], res)
            if res > tol:
                violations.append(("scaling", float(lam), float(x), res))
    return InequalityReport(not violations, worst["first"], worst["tail"], worst["scaling"], violations)


# ---------------------------------------------------------------------------
# Regular variation
# ---------------------------------------------------------------------------

@dataclass
class RVEstimate:
    """Index of regular variation at 0 estimated from ``log(f(lam x)/f(lam))/log x``.

    ``scale_points`` / ``per_point_ratios`` hold the smallest-lambda half of
    the grid, the part that enters ``index_hat``.
    """

    index_hat: float
    scale_points: list
    per_point_ratios: list
    x_factor: float

    def to_dict(self):
        return {"index_hat": self.index_hat, "x_factor": self.x_factor,
                "scale_points": list(self.scale_points),
                "per_point_ratios": list(self.per_point_ratios)}


def _as_callable(f):
    if isinstance(f, BernsteinFunction):
        return lambda lam: eval_phi(f, lam)
    return f


def rv_index_estimate(f, lambda_decades=(-8, -2), x=10.0, points_per_decade=1):
    """Estimate the index of regular variation of ``f`` at 0.

    ``lambda_decades = (lo, hi)`` gives the grid ``10**lo .. 10**hi``.
    """
    if not x > 1:
        raise ValueError("x must exceed 1")
    g = _as_callable(f)
    lo, hi = lambda_decades
    n = int(round((hi - lo) * points_per_decade)) + 1
    lams = np.logspace(lo, hi, n)
    ratios = []
    for lam in lams:
        a, b = g(lam), g(lam * x)
        if not (np.isfinite(a) and np.isfinite(b)) or a <= 0 or b <= 0:
            raise ValueError(f"non-finite or nonpositive evaluation at lambda={lam:g}")
        ratios.append(math.log(b / a) / math.log(x))
    half = max(1, (len(lams) + 1) // 2)
    pts = [float(v) for v in lams[:half]]
    used = ratios[:half]
    return RVEstimate(float(np.mean(used)), pts, used, float(x))


@dataclass
class UpperScalingReport:
    gamma: float
    constant: float
    per_x: dict
    bounded: bool
    growth_in_x: bool
    growth_in_lambda: bool

    def to_dict(self):
        return {"gamma": self.gamma, "constant": self.constant,
                "per_x": {repr(k): v for k, v in self.per_x.items()},
                "bounded": self.bounded, "growth_in_x": self.growth_in_x,
                "growth_in_lambda": self.growth_in_lambda}


def _grows_monotonically(values, rel=1e-9):
    values = list(values)
    return len(values) >= 2 and all(b > a * (1 + rel) for a, b in zip(values[:-1], values[1:]))


def upper_scaling_check(phi, gamma, x_grid=None, lambda_decades=(-12, -4)):
    """Empirical constant for ``phi^{-1}(lam x) / phi^{-1}(lam) <= c x**gamma``.

    For each x the supremum over the lambda grid of
    ``phi^{-1}(lam x) / (phi^{-1}(lam) x**gamma)`` is taken; the largest is
    reported as ``constant``.  The hypothesis is flagged as failing
    (``bounded=False``) when the sup grows strictly over the last three
    decades of ``x_grid`` or the ratio grows as lambda decreases over the
    last three decades of the lambda grid.
    """
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if x_grid is None:
        x_grid = np.logspace(0, 4, 5)
    x_grid = np.sort(np.asarray(x_grid, dtype=float))
    lo, hi = lambda_decades
    lams = np.logspace(lo, hi, int(hi - lo) + 1)
    inv = {}

    def finv(y):
        if y not in inv:
            inv[y] = invert_phi(phi, y)
        return inv[y]

    per_x = {}
    by_lambda = np.zeros((len(x_grid), len(lams)))
    for i, x in enumerate(x_grid):
        for j, lam in enumerate(lams):
            by_lambda[i, j] = finv(lam * x) / (finv(lam) * x**gamma)
        per_x[float(x)] = float(by_lambda[i].max())
    sups = [per_x[float(x)] for x in x_grid]
    # last three decades of x: points at x_max / 10**k, k = 3..0
    x_max = x_grid[-1]
    marks = [x_max / 10**k for k in (3, 2, 1, 0)]
    tail = [max(v for x, v in per_x.items() if x <= mk * (1 + 1e-12)) for mk in marks
            if mk >= x_grid[0] * (1 - 1e-12)]
    growth_x = len(tail) == 4 and _grows_monotonically(tail)
    # lambda direction, smallest lambdas last
    growth_lam = False
    if len(lams) >= 4:
        rev = by_lambda[:, ::-1].max(axis=0)
        growth_lam = _grows_monotonically(rev[-4:])
    return UpperScalingReport(float(gamma), float(max(sups)), per_x,
                              not (growth_x or growth_lam), growth_x, growth_lam)


def normalize(phi, q):
    """Return ``psi = q / phi(q) * phi`` so that ``psi(q) = q``."""
    if not q > 0:
        raise ValueError("q must be positive")
    pq = eval_phi(phi, q)
    if not (np.isfinite(pq) and pq > 0):
        raise ValueError(f"phi({q!r}) is not finite and positive")
    k = q / pq
    if k == 1.0:
        return phi
    mu = phi.levy
    density = None
    if mu.density is not None:
        dens = mu.density
        density = lambda t: k * dens(t)
    tail = None
    if mu.tail_analytic is not None:
        ta = mu.tail_analytic
        tail = lambda t: k * ta(t)
    levy = LevyMeasure(density=density, atoms=tuple((a, k * w) for a, w in mu.atoms),
                       tail_analytic=tail, split_point=mu.split_point, rtol=mu.rtol,
                       validate=False)
    cf = cfi = None
    if phi.closed_form is not None:
        f = phi.closed_form
        cf = lambda lam: k * f(lam)
    if phi.closed_form_inverse is not None:
        fi = phi.closed_form_inverse
        cfi = lambda y: fi(y / k)
    stable = None
    if phi.stable is not None:
        stable = (phi.stable[0], phi.stable[1] * k)
    return replace(phi, drift=phi.drift * k, levy=levy, closed_form=cf,
                   closed_form_inverse=cfi, stable=stable, validate=False,
                   label=f"{phi.label}|normalized(q={q:g})")


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

LOG_EXAMPLE_C = 1.0 / math.log(2.0)


def stable_exponent(alpha, closed_form=True):
    """``phi(lam) = lam**alpha``; ``alpha = 1`` gives the pure drift."""
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        return pure_drift()
    c = alpha / gamma_fn(1.0 - alpha)
    g1 = gamma_fn(1.0 - alpha)
    levy = LevyMeasure(density=lambda t: c * np.power(t, -1.0 - alpha),
                       tail_analytic=lambda t: np.power(t, -alpha) / g1)
    if closed_form:
        return BernsteinFunction(levy=levy, closed_form=lambda lam: np.power(lam, alpha),
                                 closed_form_inverse=lambda y: np.power(y, 1.0 / alpha),
                                 label=f"stable:{alpha:g}", stable=(alpha, 1.0))
    return BernsteinFunction(levy=levy, label=f"stable:{alpha:g}(quadrature)",
                             stable=(alpha, 1.0))


def _log_example_density(t):
    t = np.asarray(t, dtype=float)
    # 1 - exp(-t)(1 + t) is the regularised lower incomplete gamma P(2, t)
    return LOG_EXAMPLE_C * gammainc(2.0, t) / (t * t)


def log_example_exponent():
    """``phi(lam) = c lam log(1 + 1/lam)`` with ``c = 1/log 2`` (so phi(1) = 1)."""
    c = LOG_EXAMPLE_C
    levy = LevyMeasure(density=_log_example_density)
    return BernsteinFunction(levy=levy, closed_form=lambda lam: c * lam * np.log1p(1.0 / lam),
                             label="log-example")


def pure_drift(b=1.0):
    b = float(b)
    return BernsteinFunction(drift=b, closed_form=lambda lam: b * np.asarray(lam),
                             closed_form_inverse=lambda y: np.asarray(y) / b,
                             label="drift" if b == 1.0 else f"drift:{b:g}")


def atomic(locations, masses, drift=0.0):
    """Levy measure made of atoms; ``phi(lam) = b lam + sum m_i (1 - exp(-lam a_i))``."""
    locs = [float(a) for a in locations]
    ms = [float(m) for m in masses]
    if len(locs) != len(ms) or not locs:
        raise ValueError("need equally many (>0) locations and masses")
    levy = LevyMeasure(atoms=tuple(zip(locs, ms)))
    la, ma = np.array(locs), np.array(ms)
    b = float(drift)

    def cf(lam):
        lam = np.asarray(lam)
        return b * lam + np.sum(ma * -np.expm1(-np.multiply.outer(lam, la)), axis=-1)

    label = "atomic:" + ",".join(f"{a:g}={m:g}" for a, m in zip(locs, ms))
    if b:
        label += f",drift={b:g}"
    return BernsteinFunction(drift=b, levy=levy, closed_form=cf, label=label)


CATALOG_IDS = ("drift", "stable:0.3", "stable:0.5", "stable:0.8", "log-example", "atomic:1=1")


@functools.lru_cache(maxsize=64)
def from_id(ident):
    """Build (or fetch the cached) catalog exponent for a string id.

    Ids: ``drift``, ``drift:B``, ``stable:ALPHA``, ``stable-quad:ALPHA`` (no
    closed form), ``log-example``, ``atomic:LOC=MASS,...[,drift=B]``.
    """
    ident = ident.strip()
    try:
        if ident == "drift":
            return pure_drift()
        if ident.startswith("drift:"):
            return pure_drift(float(ident.split(":", 1)[1]))
        if ident.startswith("stable:"):
            return stable_exponent(float(ident.split(":", 1)[1]))
        if ident.startswith("stable-quad:"):
            return stable_exponent(float(ident.split(":", 1)[1]), closed_form=False)
        if ident == "log-example":
            return log_example_exponent()
        if ident.startswith("atomic:"):
            locs, masses, b = [], [], 0.0
            for part in ident.split(":", 1)[1].split(","):
                key, val = part.split("=")
                if key.strip() == "drift":
                    b = float(val)
                else:
                    locs.append(float(key))
                    masses.append(float(val))
            return atomic(locs, masses, b)
    except (ValueError, SubwalkError) as exc:
        raise ValueError(f"invalid catalog id {ident!r}: {exc}") from exc
    raise KeyError(f"unknown catalog id {ident!r}")
