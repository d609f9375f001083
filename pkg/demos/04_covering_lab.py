"""Monte Carlo look at the covering lemma with two identical fair bits.

Success needs one codeword of user 1 to equal one codeword of user 2, so
the success probability switches on once R1 + R2 passes 1 bit. The lemma's
delta slack terms are far wider than the transition at this block length.
"""
import numpy as np

from cfmac.covering import (TypicalityCheck, covering_phase_curve, covering_thresholds,
                            doubly_symmetric_target, ldp_combined)

p = doubly_symmetric_target(0.0)
n = 14
check = TypicalityCheck(p, 0.1, n)
th = covering_thresholds(p, check.delta)
print(f"raw threshold {th.raw[3]:.3f}, direct {th.direct[3]:.3f}, converse {th.converse[3]:.3f}")
grid = [(r, r) for r in np.arange(0.2, 0.72, 0.05)]
for pt in covering_phase_curve(p, check, grid, trials=100, seed=0):
    print(f"R1+R2={pt.sum_rate:.2f}  M={pt.sizes}  success={pt.fraction:.2f}  "
          f"95% CI=({pt.interval[0]:.2f}, {pt.interval[1]:.2f})")

q = np.array([[0.3, 0.2], [0.1, 0.4]])
for eps in (0.05, 0.1, 0.2):
    print(f"large-deviation exponent I({eps}) = {ldp_combined(q, eps):.5f} bits")
