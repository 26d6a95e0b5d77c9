"""Pressure equation  -Z phi'' + phi = P m  on [-1/2, 1/2].

Two boundary conditions are supported: periodic (phi and phi' match at the
ends, Models B and C) and Dirichlet with phi = 1 - L at both ends (Model A,
written on the reference interval).

The discretisation is the compact fourth-order three-point scheme

    -Z (phi[i+1] - 2 phi[i] + phi[i-1]) / h^2 + (phi[i+1] + 10 phi[i] + phi[i-1]) / 12
        = P (m[i+1] + 10 m[i] + m[i-1]) / 12

so the matrix stays tridiagonal (plus two corners in the periodic case).  On
the periodic seam the source is the average of its two end values, which
keeps the scheme consistent even though m itself need not be periodic.
The Green's-kernel quadrature in ``greens_solve`` is an independent route to
the same solution, used to check the banded solver.
"""
import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError
from .numerics import Field, derivative, norm

BOUND_SLACK = 1e-12


def _check_Z(Z):
    if not Z > 0:
        raise DomainError(f"Z must be positive, got {Z!r}")


def greens_kernel(x, y, Z):
    """Periodic Green's kernel of -Z d^2/dx^2 + 1 (unnormalised).

    G(x, y) = cosh((1/2 + y - x)/sqrt(Z)) for y < x and
    cosh((1/2 + x - y)/sqrt(Z)) for y > x; both equal cosh((1/2 - |x-y|)/sqrt(Z)).
    """
    _check_Z(Z)
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.cosh((0.5 - d) / np.sqrt(Z))


def _kernel_dy(x, y, Z):
    sz = np.sqrt(Z)
    d = x - y
    # y < x branch: +sinh((1/2 + y - x)/sz)/sz ; y > x branch: -sinh((1/2 + x - y)/sz)/sz
    return np.sign(d) * np.sinh((0.5 - np.abs(d)) / sz) / sz


def greens_solve(m, params):
    """Periodic solution by quadrature against the Green's kernel.

    Trapezoid rule on each side of the kernel's kink with the first
    Euler-Maclaurin end correction, which makes the quadrature fourth-order
    for smooth m.  O(n^2); meant as an oracle.
    """
    Z, P = params.Z, params.P
    _check_Z(Z)
    g = m.grid
    x, h = g.nodes, g.h
    mv = np.asarray(m.values, dtype=float)
    dm = derivative(m)
    scale = P / (2.0 * np.sqrt(Z) * np.sinh(0.5 / np.sqrt(Z)))
    phi = np.empty_like(mv)
    for i, xi in enumerate(x):
        G = greens_kernel(xi, x, Z)
        Gy = _kernel_dy(xi, x, Z)
        f = G * mv
        total = 0.0
        if i > 0:
            left = h * (f[:i + 1].sum() - 0.5 * (f[0] + f[i]))
            # one-sided derivative of the kernel at y -> x from below
            gy_end = np.sinh(0.5 / np.sqrt(Z)) / np.sqrt(Z)
            df_end = gy_end * mv[i] + G[i] * dm[i]
            df_start = Gy[0] * mv[0] + G[0] * dm[0]
            total += left - h * h / 12.0 * (df_end - df_start)
        if i < g.n:
            right = h * (f[i:].sum() - 0.5 * (f[i] + f[-1]))
            gy_start = -np.sinh(0.5 / np.sqrt(Z)) / np.sqrt(Z)
            df_start = gy_start * mv[i] + G[i] * dm[i]
            df_end = Gy[-1] * mv[-1] + G[-1] * dm[-1]
            total += right - h * h / 12.0 * (df_end - df_start)
        phi[i] = scale * total
    return Field(g, phi, "pressure")


def _stencil(Z, h):
    off = -Z + h * h / 12.0
    diag = 2.0 * Z + 10.0 * h * h / 12.0
    return diag, off


def _smooth(s, h):
    """h^2 (s[i-1] + 10 s[i] + s[i+1]) / 12 on interior points of s."""
    return h * h * (s[:-2] + 10.0 * s[1:-1] + s[2:]) / 12.0


def solve_cyclic(diag, off, rhs):
    """Solve a symmetric constant-coefficient cyclic tridiagonal system.

    Rank-one (Sherman-Morrison) correction of the plain tridiagonal solve.
    ``rhs`` may be one- or two-dimensional (columns are right-hand sides).
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if n < 3:
        raise DomainError("periodic solve needs at least three unknowns")
    gamma = -diag
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1, :] = diag
    ab[2, :-1] = off
    ab[1, 0] = diag - gamma
    ab[1, -1] = diag - off * off / gamma
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = off
    both = np.column_stack([rhs.reshape(n, -1), u])
    sol = solve_banded((1, 1), ab, both)
    y, z = sol[:, :-1], sol[:, -1]
    vfac = off / gamma
    coef = (y[0] + vfac * y[-1]) / (1.0 + z[0] + vfac * z[-1])
    out = y - np.outer(z, coef)
    return out.reshape(rhs.shape)


def periodic_source(m_values, P, h):
    """Right-hand side of the periodic scheme (length n, seam averaged)."""
    s = P * np.asarray(m_values, dtype=float)
    seam = 0.5 * (s[0] + s[-1])
    # neighbours of the seam see the one-sided end values of the source
    seam_row = h * h * (s[-2] + 10.0 * seam + s[1]) / 12.0
    return np.concatenate(([seam_row], _smooth(s, h)))


def solve_periodic(m, params):
    """Periodic pressure field for source P m (banded solve)."""
    Z, P = params.Z, params.P
    _check_Z(Z)
    g = m.grid
    diag, off = _stencil(Z, g.h)
    rhs = periodic_source(m.values, P, g.h)
    phi = solve_cyclic(diag, off, rhs)
    assert np.all(np.isfinite(phi)), "periodic pressure system is singular"
    return Field(g, np.append(phi, phi[0]), "pressure")


def periodic_values(mv, Z, P, h):
    """Periodic pressure values for source P m, solved as P + phi(m - 1).

    The scheme maps the constant 1 to P exactly, so splitting off the mean
    keeps round-off proportional to the perturbation rather than to P.
    """
    diag, off = _stencil(Z, h)
    phi = P + solve_cyclic(diag, off, periodic_source(np.asarray(mv, dtype=float) - 1.0, P, h))
    return np.append(phi, phi[0])


def periodic_operator(n, Z, P):
    """Dense matrix G with phi = G @ m for the periodic scheme on n cells.

    Built once per simulation run so each time step costs one mat-vec.
    """
    h = 1.0 / n
    diag, off = _stencil(Z, h)
    eye = np.eye(n + 1)
    rhs = periodic_source(eye, P, h)
    sol = solve_cyclic(diag, off, rhs)
    return np.vstack([sol, sol[:1]])


def solve_dirichlet(m, params, L):
    """Model A pressure on the reference interval with phi = 1 - L at both ends.

    ``m`` is the reference-interval myosin density (mass one on
    [-1/2, 1/2]); the physical density is m/L and the physical viscosity
    length scale maps to Z/L^2.
    """
    if not L > 0:
        raise DomainError(f"cell length must be positive, got L={L!r}")
    Z, P = params.Z, params.P
    _check_Z(Z)
    g = m.grid
    phi = dirichlet_values(np.asarray(m.values, dtype=float), Z, P, L, g.h)
    return Field(g, phi, "pressure")


def dirichlet_values(mv, Z, P, L, h):
    zhat = Z / (L * L)
    diag, off = _stencil(zhat, h)
    bc = 1.0 - L
    s = P * mv / L
    rhs = _smooth(s, h)
    rhs[0] -= off * bc
    rhs[-1] -= off * bc
    k = len(rhs)
    ab = np.zeros((3, k))
    ab[0, 1:] = off
    ab[1, :] = diag
    ab[2, :-1] = off
    inner_phi = solve_banded((1, 1), ab, rhs)
    return np.concatenate(([bc], inner_phi, [bc]))


def boundary_slope_periodic(phi, m, Z, P, h):
    """phi'(1/2) (= phi'(-1/2)) for the periodic scheme.

    Centred difference across the seam, corrected for the jump of phi'' that
    a non-periodic source produces there and for the h^2 term (using
    phi''' = phi'/Z at a no-flux end).
    """
    phi = np.asarray(phi)
    m = np.asarray(m)
    jump = ((phi[0] - P * m[0]) - (phi[-1] - P * m[-1])) / Z
    return ((phi[1] - phi[-2]) / (2 * h) - 0.25 * h * jump) / (1.0 + h * h / (6.0 * Z))


def boundary_slopes_dirichlet(phi, m, Z, P, L, h):
    """(phi_xi(-1/2), phi_xi(1/2)) on the reference interval for Model A."""
    zhat = Z / (L * L)
    s = P * np.asarray(m) / L
    corr = 1.0 + h * h / (6.0 * zhat)
    right = ((phi[-1] - phi[-2]) / h + 0.5 * h * (phi[-1] - s[-1]) / zhat) / corr
    left = ((phi[1] - phi[0]) / h - 0.5 * h * (phi[0] - s[0]) / zhat) / corr
    return left, right


def pressure_gradient(phi, m, params):
    """Nodal phi' for a periodic solution (centred inside, seam formula at the ends)."""
    g = phi.grid
    p = np.asarray(phi.values)
    d = np.empty_like(p)
    d[1:-1] = (p[2:] - p[:-2]) / (2 * g.h)
    d[0] = d[-1] = boundary_slope_periodic(p, m.values, params.Z, params.P, g.h)
    return d


def verify_elliptic_bounds(m, params):
    """Check the three a-priori bounds for the periodic pressure of source m.

    ||phi||_Lp <= P ||m||_Lp, ||phi'||_Linf <= P/(2Z) ||m||_L2 and
    ||phi''||_Lp <= 2P/Z ||m||_Lp for p in {1, 2, inf}.  Returns booleans and
    the smallest relative margin (rhs - lhs)/rhs of each bound.
    """
    Z, P = params.Z, params.P
    phi = solve_periodic(m, params)
    g = m.grid
    dphi = Field(g, pressure_gradient(phi, m, params), "pressure")
    d2phi = Field(g, (phi.values - P * np.asarray(m.values)) / Z, "pressure")
    report = {}

    def margin(lhs, rhs):
        if rhs == 0:
            return 0.0 if lhs == 0 else -np.inf
        return (rhs - lhs) / rhs

    p_margins = [margin(norm(phi, p), P * norm(m, p)) for p in ("L1", "L2", "Linf")]
    report["phi_lp"] = min(p_margins) >= -BOUND_SLACK
    report["phi_lp_margin"] = min(p_margins)
    gm = margin(norm(dphi, "Linf"), P / (2 * Z) * norm(m, "L2"))
    report["dphi_linf"] = gm >= -BOUND_SLACK
    report["dphi_linf_margin"] = gm
    h_margins = [margin(norm(d2phi, p), 2 * P / Z * norm(m, p)) for p in ("L1", "L2", "Linf")]
    report["d2phi_lp"] = min(h_margins) >= -BOUND_SLACK
    report["d2phi_lp_margin"] = min(h_margins)
    report["all"] = report["phi_lp"] and report["dphi_linf"] and report["d2phi_lp"]
    return report
