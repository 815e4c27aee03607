"""Scaling limit of the subordinate walk.

With phi regularly varying of index alpha at 0, the walk sped up by n and
shrunk by sqrt(phi^{-1}(1/n)) approaches a rotationally invariant
2*alpha-stable law.  The distance is computed exactly from the
characteristic function, for both clocks.
"""

from subwalk import bernstein as bf
from subwalk.scaling_limits import (ScaledProcessSpec, chf_monte_carlo, chf_scaled_exact,
                                    convergence_report)
from subwalk.mc import agreement_fraction

NS = [10**2, 10**3, 10**4, 10**5, 10**6]

# %% Exact sup-distance to the limit on the default theta grid
cases = [("stable:0.5", 0.5), ("drift", 1.0), ("log-example", 1.0)]
for pid, alpha in cases:
    for d in (1, 2):
        for clock in ("poisson", "floor"):
            rep = convergence_report(bf.from_id(pid), alpha, d, 1.0, None, NS, clock)
            row = "  ".join(f"{s:.1e}" for s in rep.sup_distance)
            print(f"{pid:<11} d={d} {clock:<7} {row}  monotone={rep.monotone_flag}")
# log-example converges only logarithmically: its index is 1 but phi(lam)/lam ~ log(1/lam)

# %% The same quantity by simulation at n = 1000
spec = ScaledProcessSpec(bf.from_id("stable:0.5"), 1000, "poisson", 1, 1.0, seed=7)
ev = chf_monte_carlo(spec, None, 10**5)
exact = chf_scaled_exact(spec, ev.theta_grid)
print(f"Monte Carlo vs exact: {agreement_fraction(ev.values, exact, ev.stderr):.0%} within 4 stderr")
