"""Two-user Gaussian MAC at SNR 100/100: coordination beats forwarding.

The full scheme gains on the order of sqrt(c_out) while pure forwarding
gains at most linearly, so at small c_out the ratio diverges.
"""
import numpy as np

from cfmac.gaussian2 import figure2_data, sqrt_coefficient

grid = np.logspace(-4, -1, 7)
data = figure2_data(grid)
print(f"sqrt coefficient of the sum-rate bound: {2 * sqrt_coefficient(0.5, 100, 100):.4f}")
print(f"{'c_out':>8} {'full':>10} {'forward':>10} {'coef*sqrt':>10}")
for c, full, fwd, root in data:
    print(f"{c:8.1e} {full:10.5f} {fwd:10.5f} {root:10.5f}")
