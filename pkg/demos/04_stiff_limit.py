"""From elastic to rigid: Model A approaches Model B as the spring stiffens.

Stiffness K = K_{-1}/eps and activity P = eps P1; halving eps should halve
the gap between the two models.
"""
import numpy as np

from ksmotility.dynamics import stiff_limit_sweep
from ksmotility.numerics import Field, Grid

g = Grid(128)
x = g.nodes
m0 = Field(g, 1 + 0.3 * np.sin(np.pi * x) + 0.2 * np.cos(2 * np.pi * x), "myosin")
rows = stiff_limit_sweep(m0, Z=1.0, P1=1.0, K_minus1=5.0, eps_list=[0.1, 0.05, 0.025, 0.0125],
                         T=0.5, dt=5 * g.h ** 2)
print("   eps      sup||M_A - m_B||   sup|L - 1|   ratio")
for prev, row in zip([None] + rows[:-1], rows):
    ratio = f"{prev.dev_l2 / row.dev_l2:.3f}" if prev else "  -"
    print(f"  {row.eps:<7} {row.dev_l2:.6f}           {row.dev_length:.5f}      {ratio}")
