"""Quenched linear response of a random perturbed doubling map.

Two circle maps x -> 2x + kappa(u, x) are drawn i.i.d. along a frozen
environment. The derivative in u of the integral of an observable against
the equivariant density is summed as a response series and compared with a
central finite difference. The annealed response averages over independent
environments.
"""

import numpy as np

from conecocycle.basis import GridFunction
from conecocycle.cocycle import IID, Cocycle, Environment
from conecocycle.maps import TrigPerturbation, torus_family
from conecocycle.response import annealed_response, quenched_response

a = torus_family(2, TrigPerturbation.sine(1 / (4 * np.pi)), theta1=0.3)
b = torus_family(2, TrigPerturbation(((1, 1, 0.03, 0.0), (1, 2, 0.0, 0.02))), theta1=0.3)
coc = Cocycle(Environment(("a", "b"), IID((0.5, 0.5)), seed=77), {"a": a, "b": b}, "fourier", 64)
psi = GridFunction.from_function(lambda x: np.cos(2 * np.pi * x) + 0.5 * np.sin(4 * np.pi * x), "fourier", 64)

rep = quenched_response(coc, 0.4, psi, tol=1e-9, h=1e-3)
print(f"series {rep.series_value:+.10f} ({rep.truncation_N + 1} terms, tail bound {rep.truncation_bound:.1e})")
print(f"finite difference {rep.fd_value:+.10f}, relative error {rep.rel_error:.1e}")

ann = annealed_response(coc, 0.4, psi, tol=1e-9, n_orbits=8, workers=4)
print(f"annealed {ann.series_value:+.6f} +- {ann.stderr:.1e} (fd {ann.fd_value:+.6f})")
