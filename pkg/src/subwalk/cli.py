"""Command-line front end.

Configuration comes from a flat ``key=value`` file (dotted keys allowed,
``#`` comments), then the ``SUBWALK_SEED`` environment variable, then
command-line flags, later sources winning.  Exit codes: 0 success,
1 verification failure or library error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import bernstein as bf
from .errors import ConfigError, SubwalkError
from .io import write_json, write_text
from .lattice import LatticeWalk
from .levy_embed import compare_triplets, triplet_hat, triplet_tilde
from .rng import DEFAULT_SEED
from .scaling_limits import (CLOCKS, ScaledProcessSpec, convergence_report, default_theta_grid,
                             sample_scaled_path, small_time_bound_check, tail_bound_ratio)
from .subordination import step_weights

DEFAULT_TOLERANCES = {
    "triplet": 1e-6,
    "normalization": 1e-10,
    "inequalities": 1e-8,
    "rv": 0.05,
    "small_time": 1e-9,
}
CHECKS = ("inequalities", "normalization", "rv", "infinite_variance", "small_time", "tail_ratio",
          "upper_scaling")


@dataclass
class RunConfig:
    phi_id: str = "stable:0.5"
    q: float = 1.0
    d: int = 1
    clock: str = "poisson"
    n_sequence: list = field(default_factory=lambda: [10**2, 10**3, 10**4])
    t: float = 1.0
    theta_grid: str = "default"
    paths: int = 1000
    seed: int = DEFAULT_SEED
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_dir: str = "out"
    alpha: float = float("nan")
    radius: int = 0
    time_grid: str = "0:1:0.01"
    mass_tol: float = 1e-10
    M_cap: int = 2**19
    strict: bool = False
    perturb: float = 0.0
    checks: list = field(default_factory=lambda: list(CHECKS))
    max_rows: int = 1000

    def phi(self):
        try:
            return bf.from_id(self.phi_id)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"phi_id: {exc.args[0]}") from None

    def theta(self):
        return parse_theta_grid(self.theta_grid, self.d)

    def resolved_alpha(self, phi):
        if not math.isnan(self.alpha):
            return self.alpha
        if phi.stable is not None:
            return phi.stable[0]
        if phi.levy.is_zero:
            return 1.0
        est = bf.rv_index_estimate(phi, lambda_decades=(-40, -20), x=10.0).index_hat
        return float(min(max(est, 1e-6), 1.0))

    def default_radius(self):
        return self.radius or (30 if self.d == 1 else 12)


_ALIASES = {"phi": "phi_id", "n": "n_sequence", "out": "output_dir", "theta": "theta_grid"}


def _parse_bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_list(v, kind):
    parts = [p.strip() for p in str(v).split(",") if p.strip()]
    return [kind(float(p)) if kind is int else kind(p) for p in parts]


def parse_theta_grid(spec, d):
    """``default`` or ``lo:hi:step`` (product grid in d dimensions) or a comma list (d=1)."""
    spec = str(spec).strip()
    if spec == "default":
        return default_theta_grid(d)
    try:
        if ":" in spec:
            lo, hi, step = (float(x) for x in spec.split(":"))
            k = int(math.floor((hi - lo) / step + 1e-9))
            ax = lo + step * np.arange(k + 1)
        else:
            ax = np.array([float(x) for x in spec.split(",")])
    except ValueError:
        raise ConfigError(f"bad theta_grid {spec!r}") from None
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def parse_time_grid(spec):
    spec = str(spec).strip()
    try:
        if ":" in spec:
            lo, hi, step = (float(x) for x in spec.split(":"))
            k = int(math.floor((hi - lo) / step + 1e-9))
            return lo + step * np.arange(k + 1)
        return np.array([float(x) for x in spec.split(",")])
    except ValueError:
        raise ConfigError(f"bad time_grid {spec!r}") from None


def _assign(cfg, key, value):
    key = _ALIASES.get(key.strip(), key.strip())
    if key.startswith("tolerances."):
        name = key.split(".", 1)[1]
        try:
            cfg.tolerances[name] = float(value)
        except ValueError:
            raise ConfigError(f"{key}: not a number: {value!r}") from None
        return
    if key == "tolerance":
        try:
            tol = float(value)
        except ValueError:
            raise ConfigError(f"tolerance: not a number: {value!r}") from None
        for name in cfg.tolerances:
            cfg.tolerances[name] = tol
        return
    known = {f.name: f for f in fields(cfg)}
    if key not in known or key == "tolerances":
        raise ConfigError(f"unknown configuration key {key!r}")
    current = getattr(cfg, key)
    try:
        if key == "n_sequence":
            val = _parse_list(value, int)
        elif key == "checks":
            val = _parse_list(value, str)
        elif isinstance(current, bool):
            val = _parse_bool(value)
        elif isinstance(current, int):
            val = int(float(value))
        elif isinstance(current, float):
            val = float(value)
        else:
            val = str(value).strip()
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    setattr(cfg, key, val)


def read_config_file(path):
    pairs = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key=value")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    return pairs


def validate(cfg):
    cfg.phi()
    if not cfg.n_sequence:
        raise ConfigError("n_sequence is empty")
    if any(n < 1 for n in cfg.n_sequence):
        raise ConfigError("n_sequence entries must be >= 1")
    if cfg.clock not in CLOCKS:
        raise ConfigError(f"clock must be one of {CLOCKS}")
    if cfg.d < 1:
        raise ConfigError("d must be >= 1")
    if not cfg.q > 0:
        raise ConfigError("q must be positive")
    if not cfg.t >= 0:
        raise ConfigError("t must be nonnegative")
    if cfg.paths < 1:
        raise ConfigError("paths must be >= 1")
    if not 0 < cfg.mass_tol < 1:
        raise ConfigError("mass_tol must lie in (0, 1)")
    if cfg.M_cap < 1 or cfg.max_rows < 0 or cfg.radius < 0:
        raise ConfigError("M_cap, max_rows and radius must be nonnegative integers")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    unknown = [c for c in cfg.checks if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(unknown)}")
    return cfg


def build_config(args, environ=None):
    environ = os.environ if environ is None else environ
    cfg = RunConfig()
    if args.config:
        for k, v in read_config_file(args.config):
            _assign(cfg, k, v)
    if environ.get("SUBWALK_SEED"):
        _assign(cfg, "seed", environ["SUBWALK_SEED"])
    for flag in ("seed", "out", "phi", "n", "clock", "paths"):
        val = getattr(args, flag, None)
        if val is not None:
            _assign(cfg, flag, val)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        _assign(cfg, k, v)
    return validate(cfg)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _out(cfg, name):
    return os.path.join(cfg.output_dir, name)


def cmd_weights(cfg):
    phi = cfg.phi()
    sd = step_weights(phi, cfg.q, mass_tol=cfg.mass_tol, M_cap=cfg.M_cap, strict=cfg.strict)
    rows = ["m,w_m"] + [f"{m},{float(sd.weights[m - 1])!r}" for m in range(1, min(sd.M, cfg.max_rows) + 1)]
    write_text(_out(cfg, "weights.csv"), "\n".join(rows) + "\n")
    summary = dict(sd.summary(), phi=phi.label, rows_written=min(sd.M, cfg.max_rows))
    ok = abs(sd.normalization_residual) <= cfg.tolerances["normalization"]
    summary["normalization_ok"] = ok
    write_json(_out(cfg, "summary.json"), summary)
    return 0 if ok else 1


def cmd_triplets(cfg):
    phi = cfg.phi()
    walk = LatticeWalk.simple(cfg.d)
    radius = cfg.default_radius()
    hat = triplet_hat(phi, walk, cfg.q, radius, cfg.mass_tol, cfg.M_cap)
    tilde = triplet_tilde(phi, walk, cfg.q, radius)
    if cfg.perturb:
        point = (1,) + (0,) * (cfg.d - 1)
        tilde.nu.add(point, cfg.perturb)
    cmp = compare_triplets(hat, tilde, cfg.tolerances["triplet"])
    write_text(_out(cfg, "triplet_hat.csv"), hat.to_csv())
    write_text(_out(cfg, "triplet_tilde.csv"), tilde.to_csv())
    write_json(_out(cfg, "comparison.json"),
               dict(cmp.to_dict(), phi=phi.label, d=cfg.d, radius=radius, q=cfg.q,
                    perturb=cfg.perturb, beta_hat=hat.beta, beta_tilde=tilde.beta))
    return 0 if cmp.passed else 1


def cmd_converge(cfg):
    phi = cfg.phi()
    alpha = cfg.resolved_alpha(phi)
    rep = convergence_report(phi, alpha, cfg.d, cfg.t, cfg.theta(), cfg.n_sequence, cfg.clock)
    write_text(_out(cfg, "converge.csv"), rep.to_csv())
    write_json(_out(cfg, "converge.json"), rep.to_json())
    return 0


def cmd_simulate(cfg):
    phi = cfg.phi()
    times = parse_time_grid(cfg.time_grid)
    n = cfg.n_sequence[0]
    for k in range(cfg.paths):
        # path k gets its own seed derived from (seed, k)
        sub = int(np.random.SeedSequence(cfg.seed, spawn_key=(k,)).generate_state(1, np.uint64)[0])
        spec = ScaledProcessSpec(phi, n, cfg.clock, cfg.d, cfg.t, sub)
        table = sample_scaled_path(spec, times)
        write_text(_out(cfg, f"path_{k:04d}.csv"), table.to_csv())
    write_json(_out(cfg, "simulate.json"),
               {"kind": "simulate", "phi": phi.label, "n": n, "clock": cfg.clock, "d": cfg.d,
                "paths": cfg.paths, "seed": cfg.seed, "times": len(times)})
    return 0


def _check_inequalities(cfg):
    out, ok = {}, True
    grid = np.logspace(-6, 6, 13)
    for pid in bf.CATALOG_IDS:
        rep = bf.check_exponent_inequalities(bf.from_id(pid), grid, tol=cfg.tolerances["inequalities"])
        out[pid] = rep.to_dict()
        ok &= rep.passed
    return ok, out


def _check_normalization(cfg):
    out, ok = {}, True
    for pid in ("stable:0.3", "stable:0.5", "stable:0.8", "log-example"):
        sd = step_weights(bf.from_id(pid), 1.0, strict=False)
        res = sd.normalization_residual
        out[pid] = {"residual": res, "truncation_mass": sd.truncation_mass, "M": sd.M}
        ok &= abs(res) <= cfg.tolerances["normalization"]
    return ok, out


def _check_rv(cfg):
    out, ok = {}, True
    tol = cfg.tolerances["rv"]
    for pid, target in (("stable:0.3", 0.3), ("stable:0.5", 0.5), ("stable:0.8", 0.8)):
        phi = bf.from_id(pid)
        est = bf.rv_index_estimate(phi, (-8, -2)).index_hat
        inv = bf.rv_index_estimate(bf.inverse(phi), (-8, -2)).index_hat
        good = abs(est - target) <= tol and abs(inv - 1 / target) <= tol
        out[pid] = {"index": est, "inverse_index": inv, "passed": good}
        ok &= good
    phi = bf.from_id("log-example")
    est = bf.rv_index_estimate(phi, (-60, -20)).index_hat
    inv = bf.rv_index_estimate(bf.inverse(phi), (-40, -20)).index_hat
    good = abs(est - 1) <= tol and abs(inv - 1) <= tol
    out["log-example"] = {"index": est, "inverse_index": inv, "passed": good}
    return ok and good, out


def _check_infinite_variance(cfg):
    phi = bf.from_id("log-example")
    c = bf.LOG_EXAMPLE_C
    t = 1e4
    tail = t * bf.tail_mass(phi.levy, t)
    sd = step_weights(phi, 1.0, strict=False)
    Ms = np.unique(np.logspace(2, 4, 9).astype(int))
    partial = sd.partial_first_moment(Ms)
    slope = float(np.polyfit(np.log(Ms), partial, 1)[0])
    res = {"t_tail": tail, "target": c, "partial_100": float(partial[0]),
           "partial_10000": float(partial[-1]), "slope": slope}
    ok = (abs(tail / c - 1) <= 0.01 and partial[-1] >= 2 * partial[0]
          and abs(slope / c - 1) <= 0.2)
    return ok, res


def _check_small_time(cfg):
    out, ok = {}, True
    for pid in bf.CATALOG_IDS:
        phi = bf.from_id(pid)
        if abs(bf.eval_phi(phi, 1.0) - 1) > 1e-8:
            continue
        for d in (1, 2):
            good, worst = small_time_bound_check(phi, d, slack=cfg.tolerances["small_time"])
            out[f"{pid}/d={d}"] = worst
            ok &= good
    return ok, out


def _check_tail_ratio(cfg):
    rep = tail_bound_ratio(bf.from_id("stable:0.5"), 1.0, (2, 4, 8), 1.0,
                           cfg.n_sequence, max(cfg.paths, 1000), seed=cfg.seed)
    return rep.bounded, rep.to_json()


def _check_upper_scaling(cfg):
    good = bf.upper_scaling_check(bf.from_id("stable:0.5"), 2.5)
    bad = bf.upper_scaling_check(bf.from_id("stable:0.5"), 1.5)
    return good.bounded and not bad.bounded, {"gamma_2.5": good.to_dict(),
                                              "gamma_1.5": bad.to_dict()}


_CHECK_FUNCS = {
    "inequalities": _check_inequalities,
    "normalization": _check_normalization,
    "rv": _check_rv,
    "infinite_variance": _check_infinite_variance,
    "small_time": _check_small_time,
    "tail_ratio": _check_tail_ratio,
    "upper_scaling": _check_upper_scaling,
}


def cmd_check(cfg):
    results, all_ok = {}, True
    for name in cfg.checks:
        ok, detail = _CHECK_FUNCS[name](cfg)
        results[name] = {"passed": bool(ok), "detail": detail}
        all_ok &= bool(ok)
    write_json(_out(cfg, "check.json"), {"kind": "check", "passed": all_ok, "results": results})
    return 0 if all_ok else 1


def cmd_rv(cfg):
    phi = cfg.phi()
    lo, hi = (-60, -20) if phi.label == "log-example" else (-8, -2)
    est = bf.rv_index_estimate(phi, (lo, hi))
    inv_lo, inv_hi = (-40, -20) if phi.label == "log-example" else (lo, hi)
    inv = bf.rv_index_estimate(bf.inverse(phi), (inv_lo, inv_hi))
    write_json(_out(cfg, "rv.json"), {"kind": "rv", "phi": phi.label, "phi_index": est.to_dict(),
                                      "inverse_index": inv.to_dict()})
    return 0


COMMANDS = {"weights": cmd_weights, "triplets": cmd_triplets, "converge": cmd_converge,
            "simulate": cmd_simulate, "check": cmd_check, "rv": cmd_rv}


def make_parser():
    p = argparse.ArgumentParser(prog="subwalk", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", help="random seed (overrides SUBWALK_SEED)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--phi", help="catalog id, e.g. stable:0.5, log-example, drift")
    p.add_argument("--n", help="comma-separated n values")
    p.add_argument("--clock", help="poisson or floor")
    p.add_argument("--paths", help="Monte Carlo paths / number of path files")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    return p


def main(argv=None, environ=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = build_config(args, environ)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"subwalk: configuration error: {exc}", file=sys.stderr)
        return 2
    except (SubwalkError, ValueError, ArithmeticError) as exc:
        print(f"subwalk: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
