"""Is the moving cell stable?  Spectrum, Gershgorin discs and resolvent of T_C.

The operator is not self-adjoint, so besides the eigenvalues we look at the
resolvent norm on the right half-plane.
"""
import math

import numpy as np

from ksmotility.numerics import Grid
from ksmotility.spectral import (
    LAMBDA_V_COEFF,
    assemble_t_c,
    eigenvalues,
    gershgorin_check,
    leading_eigenvalue_curve,
    resolvent_norm,
)
from ksmotility.travelingwave import exact_tw

Z, V = 50.0, 0.05
g = Grid(256)
A = assemble_t_c(exact_tw(V, Z, grid=g), 64)
ev = eigenvalues(A).eigenvalues
print(f"Z = {Z}, V = {V}: leading eigenvalues", np.round(ev[:4].real, 6))

curve = leading_eigenvalue_curve(Z, [0.01, 0.02, 0.03, 0.04, 0.05], grid=g)
print(f"Re lambda ~ c V^2 with c = {curve.coefficient:.4f} (expected {LAMBDA_V_COEFF:.4f} = -pi^2/24)")

rec = gershgorin_check(A)
print(f"Gershgorin: rho = {rec.rho:.3f}, discs in Re < 0: {rec.discs_left}/64")

for lam in (0.0, 1.0, 10.0, 100.0):
    print(f"||(lambda - T)^-1|| at lambda = {lam:6.1f}: {resolvent_norm(A, lam):10.3f}")
print(f"1/|Re lambda_1| = {1 / abs(ev[0].real):.3f}")
