"""Tail of partial sums against its bound shape.

For n steps of the stable 1/2 subordinate walk, the probability that the
scaled sum leaves a ball of radius K is divided by
K^(-2-beta) phi^{-1}(1/n) / phi^{-1}(K^(-beta)/n) + K^(-beta).
A bounded ratio across n is what the tightness argument needs.
"""

import numpy as np

from subwalk import bernstein as bf
from subwalk.scaling_limits import tail_bound_ratio

rep = tail_bound_ratio(bf.from_id("stable:0.5"), a=1.0, K_grid=(2, 4, 8), beta=1.0,
                       n_grid=(10**2, 10**3, 10**4), paths=10**5, seed=7)
print("rows K, columns n")
print("probabilities\n", np.array2string(rep.probabilities, precision=4))
print("ratios\n", np.array2string(rep.ratios, precision=3))
print(f"max ratio {rep.max_ratio:.3f}; grows with n: {rep.growth_in_n}")
