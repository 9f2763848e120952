"""Hausdorff dimension of a random Cantor set from the Bowen equation.

At each step a fair coin picks a cookie-cutter with two branches of slope
1/3 or 1/4. The pressure chi(t) is the characteristic exponent of the
|psi'|^t weighted transfer operators. Its zero is the dimension, which for
constant slopes equals 2 log 2 / log 12. The deterministic (1/3, 1/4)
system is checked against the scalar Moran equation and against box
counting.
"""

import math

from conecocycle.cocycle import IID, Cocycle, Environment
from conecocycle.dimension import bowen_root, box_counting_oracle, moran_root
from conecocycle.maps import linear_cookie_cutter

env = Environment(("three", "four"), IID((0.5, 0.5)), seed=2024)
coc = Cocycle(env, {"three": linear_cookie_cutter([3, 3]), "four": linear_cookie_cutter([4, 4])}, "chebyshev", 16)
curve = bowen_root(coc, orbit_len=5000, depth=30)
exact = 2 * math.log(2) / math.log(12)
print("pressure curve:")
for t, chi in zip(curve.t_samples, curve.chi_values):
    print(f"  t = {t:.1f}  chi = {chi:+.6f}")
print(f"random root {curve.root:.8f} +- {curve.root_stderr:.1e}, closed form {exact:.8f}")

det = Cocycle(Environment.deterministic("s"), {"s": linear_cookie_cutter([3, 4])}, "chebyshev", 16)
z = bowen_root(det, orbit_len=20, depth=10).root
box = box_counting_oracle(det, gen_depth=12, grid_eps=[3.0**-j for j in range(4, 11)])
print(f"(1/3, 1/4): Bowen root {z:.12f}, Moran root {moran_root([1 / 3, 1 / 4]):.12f}, box counting {box.slope:.4f}")
