"""The binary adder channel without cooperation, and why cooperation helps it.

Run: python3 demos/01_bemac_baseline.py
"""
import numpy as np

from cfmac.channel import make_binary_erasure_mac
from cfmac.gain import cstar_margin, cstar_test
from cfmac.search import max_product_mi

mac = make_binary_erasure_mac()

# Independent encoders: the best product input is uniform and gives 1.5 bits.
best = max_product_mi(mac, seed=0)
print(f"no-cooperation sum capacity: {best.value:.6f} bits")
print("optimal marginals:", [np.round(m, 4) for m in best.marginals])

# A dependent input can push the output towards uniform. The margin below is
# I_dep + D(p_dep(y) || p_ind(y)) - I_ind; a positive value marks membership
# in the class where tiny CF capacities give outsized gains.
p_dep = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
print(f"margin of the uniform-output input: {cstar_margin(mac, best.pmf, p_dep).margin:.4f}")

w = cstar_test(mac)
print(f"best margin found by the linear program: {w.margin:.4f}")
print("its dependent input:\n", np.round(w.p_dep, 4))
