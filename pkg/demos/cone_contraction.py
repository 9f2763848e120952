"""Birkhoff contraction of the doubling map on an invariant cone.

Constants a are searched so that the transfer operator maps C_a into
C_{sigma a}. The diameter bound then gives the Birkhoff factor
tanh(Delta/4), which is compared with measured ratios in the Hilbert metric
of the discrete cone. The orthant metric of node values is shown as well.
It is not covered by the bound.
"""

from conecocycle.cones import contraction_certificate, find_invariant_cone, invariance_check
from conecocycle.maps import torus_family
from conecocycle.transfer import TransferOperator

L = TransferOperator(torus_family(2), "fourier", 32)
cone = find_invariant_cone([L], seed=7)
print(f"a = {cone.a}, rho = {cone.rho_value:.4f}, K = {cone.K_value:.3f}, R = {cone.R_value:.3f}")
print(f"Delta bound {cone.diameter_bound():.4f}, tanh(Delta/4) = {cone.eta_bound():.4f}")
print(f"invariance on 50 samples: {invariance_check([L], cone, 50, 9).ok}")
for metric in ("cone", "orthant"):
    c = contraction_certificate(L, cone, 100, 10, metric)
    print(f"{metric:>7} metric: max ratio {c.max_ratio:.4f}, within bound {c.within_bound}")
