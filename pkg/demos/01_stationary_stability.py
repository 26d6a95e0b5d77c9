"""The resting cell: when does m = 1 lose stability?

Scan the activity P at fixed viscosity Z, watch the leading eigenvalue of
the linearised operator cross zero at the critical activity, then confirm
one decay rate by direct simulation.
"""
import math

import numpy as np

from ksmotility.dynamics import CellState, decay_rate, simulate
from ksmotility.numerics import Field, Grid, ModelParams
from ksmotility.spectral import assemble_s_c, eigenvalues
from ksmotility.travelingwave import solve_p0

Z = 5.0
P0 = solve_p0(Z)
print(f"Z = {Z}: critical activity P0 = {P0:.6f}")

for P in np.linspace(0.5 * P0, 1.5 * P0, 5):
    lead = eigenvalues(assemble_s_c(P, Z, 64)).leading.real
    print(f"  P = {P:8.3f}   leading eigenvalue {lead:+.5f}")

# the even modes decouple, so a cos(2 pi x) bump decays at its own eigenvalue
Z, P = 1.0, 5.0
w2 = 4 * math.pi ** 2
predicted = -w2 + (P / Z) / (1 + 1 / (w2 * Z))
g = Grid(256)
m0 = Field(g, 1 + 1e-3 * np.cos(2 * np.pi * g.nodes), "myosin")
run = simulate(CellState(m0), ModelParams(Z=Z, P=P), 0.3, 10 * g.h ** 2, stride=20)
fit = decay_rate(run, Field(g, np.ones(g.n + 1), "myosin"))
print(f"\nmode-2 decay: simulated {fit.rate:.3f}, predicted {predicted:.3f}")
