"""Numerical verification of the auxiliary identities and the non-convexity witness.

Checks the simplex second-moment identity (against iterated Gauss-Legendre
quadrature), the rotation identity J A J^T = det(A) A^-T, the two hexagon
trace identities, the degenerate-hexagon counterexample value, and the
strictly negative curvature of the internal energy along rotations
(the reason the time-step minimization needs safeguards).

    python demos/06_identity_checks.py
"""

import numpy as np

import lagflow.analysis as an
from lagflow.model import EnergyModel, make_power_law, zero_potential

rng = np.random.default_rng(0)

print("simplex second-moment identity (quadrature vs closed form):")
for d in (1, 2, 3):
    dev = max(abs(np.subtract(*an.lemma_b1_check(d, rng.normal(size=(d + 1, d)))))
              for _ in range(20))
    print(f"  d = {d}: max deviation {dev:.2e}")

devs = an.lemma_b2_b5_checks(rng=rng)
print("rotation identity           max deviation", f"{devs['B2']:.2e}")
print("hexagon area identity       max deviation", f"{devs['B3']:.2e}")
print("hexagon trace identity      max deviation", f"{devs['B4']:.2e}")
print("degenerate-hexagon value    max deviation", f"{devs['B5']:.2e}", "(target (-1,-1))")

model = EnergyModel(make_power_law(3.0), zero_potential())
print("\nnon-convexity of the internal energy (rotation direction A J):")
for _ in range(5):
    A = rng.normal(size=(2, 2))
    while np.linalg.det(A) <= 0.05:
        A = rng.normal(size=(2, 2))
    rho = float(rng.uniform(0.5, 2.0))
    ana, fd = an.nonconvexity_witness(A, rho, model)
    swap = an.swap_direction_second_derivative(A, rho, model)
    print(f"  det A = {np.linalg.det(A):.3f}, rho = {rho:.3f}: "
          f"d2/ds2 = {ana:+.4f} (FD {fd:+.4f}); swap direction gives {swap:+.4f}")
print("negative curvature along rotations -> the implicit step objective is not convex")
