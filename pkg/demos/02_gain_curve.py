"""Sum-rate gain of the mixture family as the CF output capacity shrinks.

The slope g(h)/h keeps growing as h -> 0 at a rate set by epsilon; smaller
epsilon means a steeper curve near the origin.
"""
from cfmac.channel import make_binary_erasure_mac
from cfmac.gain import gain_curve, make_family, slope_limit

mac = make_binary_erasure_mac()
hs = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
for eps in (0.5, 0.1, 0.01):
    fam = make_family(mac, (1.0, 1.0), eps)
    print(f"epsilon = {eps}  (mix weight {fam.mix_weight:.2f}, limiting slope {slope_limit(fam, mac):.3f})")
    for pt in gain_curve(fam, mac, hs):
        print(f"  h={pt.h:8.1e}  lambda*={pt.lambda_star:.3e}  gain={pt.g:+.3e}  g/h={pt.slope_ratio:+.4f}")
