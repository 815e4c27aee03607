"""How many walk steps does one subordinate step take?

A subordinate step runs the simple walk for a random number m of steps.
This script prints the law of m for a few Laplace exponents and shows
how heavy its tail is.
"""

import math

import numpy as np

from subwalk import bernstein as bf
from subwalk.subordination import sample_step_counts, step_weights
from subwalk.rng import make_rng

# %% Weights for the one-sided stable exponents lam**alpha
for alpha in (0.3, 0.5, 0.8):
    sd = step_weights(bf.stable_exponent(alpha), strict=False)
    head = ", ".join(f"{sd.weight(m):.4f}" for m in range(1, 6))
    print(f"alpha={alpha}: w_1..w_5 = {head}")
    print(f"   kept M={sd.M} weights, mass beyond them {sd.truncation_mass:.2e},"
          f" total {sd.total_mass:.15f}")

# %% The tail decays like m**(-alpha): the smaller alpha, the longer the jumps
sd = step_weights(bf.from_id("stable:0.5"), strict=False)
for M in (10, 100, 1000, 10_000):
    print(f"P(m > {M:>6}) = {math.fsum(sd.weights[M:]) + sd.truncation_mass:.4e}"
          f"   vs M**-0.5/Gamma(0.5) = {M ** -0.5 / math.gamma(0.5):.4e}")

# %% Sampling includes the part beyond the cutoff exactly
m = sample_step_counts(sd, 10**6, make_rng(0))
print(f"largest of 1e6 sampled step counts: {m.max():.3e}")
print(f"fraction with m=1: {np.mean(m == 1):.4f} (exact 0.5)")

# %% The log-type exponent: finite index 1, yet m has no finite mean
phi = bf.from_id("log-example")
sd = step_weights(phi, strict=False)
for M in (100, 1000, 10_000, 100_000):
    print(f"sum_(m<={M:>6}) m w_m = {sd.partial_first_moment([M])[0]:.4f}")
print(f"growth per e-fold of M should approach 1/log 2 = {1 / math.log(2):.4f}")
