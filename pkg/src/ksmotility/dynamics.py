"""Time integration of Models A, B and C.

All three are written as a conservation law  m_t = J_x  on the reference
interval with a no-flux condition J = 0 at both ends and

    J = m_x - m psi_x ,

where psi is a transport potential: psi = phi - V_b x for Models B/C
(V_b = phi_x(1/2)) and the mapped-frame potential of ``_potential_a`` for
Model A.  Face fluxes use exponential fitting (Scharfetter-Gummel), which
reduces to the centred arithmetic-mean flux for small potential jumps and
makes m = Lambda exp(psi) an exact discrete equilibrium.  The plain centred
flux with arithmetic-mean m at faces is available as ``flux="centered"``;
with it F_C(1 + u) splits exactly into linear and quadratic parts.  Node
control volumes carry trapezoid weights, so the trapezoid mass is conserved
to round-off.

Each step is IMEX: the pure diffusion part is backward Euler, the remaining
transport part is explicit.
"""
from dataclasses import dataclass, field as dc_field
import json
import os

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import exprel

from .errors import DomainError, NumericalFailure
from .numerics import Field, ModelParams, mass, norm, write_field_csv
from .elliptic import (
    boundary_slope_periodic,
    boundary_slopes_dirichlet,
    dirichlet_values,
    periodic_operator,
    periodic_values,
    solve_periodic,
)

BLOWUP = 1e6
EPS_MIN = 0.01


@dataclass(frozen=True)
class CellState:
    """Myosin field on the reference interval plus cell length, centre and time."""

    m: Field
    L: float = 1.0
    c: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise DomainError(f"cell length must be positive, got L={self.L!r}")
        if abs(mass(self.m) - 1.0) > 1e-9:
            raise DomainError(f"state mass {mass(self.m)!r} differs from 1")


@dataclass
class Trajectory:
    """Snapshots of a run plus per-step diagnostics."""

    params: ModelParams
    dt: float
    stride: int
    flux: str = "fitted"
    states: list = dc_field(default_factory=list)
    step_t: list = dc_field(default_factory=list)
    step_mass: list = dc_field(default_factory=list)
    step_vleft: list = dc_field(default_factory=list)
    step_vright: list = dc_field(default_factory=list)

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    def export(self, directory, fields=True):
        """Write trajectory.csv, per-snapshot field files and manifest.json."""
        os.makedirs(directory, exist_ok=True)
        vl = dict(zip(self.step_t, self.step_vleft))
        vr = dict(zip(self.step_t, self.step_vright))
        with open(os.path.join(directory, "trajectory.csv"), "w") as fh:
            fh.write("t,c,L,mass,vleft,vright\n")
            for s in self.states:
                fh.write(f"{s.t!r},{s.c!r},{s.L!r},{float(mass(s.m))!r},"
                         f"{vl.get(s.t, float('nan'))!r},{vr.get(s.t, float('nan'))!r}\n")
        names = []
        if fields:
            for k, s in enumerate(self.states):
                name = f"snapshot_{k:05d}.csv"
                write_field_csv(s.m, os.path.join(directory, name))
                names.append(name)
        p = self.params
        manifest = {
            "schema": 1,
            "params": {"Z": p.Z, "P": p.P, "K": p.K, "variant": p.variant},
            "scheme": {
                "time": "IMEX: backward Euler diffusion, explicit transport",
                "flux": self.flux,
                "boundary_flux": 0.0,
                "dt": self.dt,
                "stride": self.stride,
                "grid_n": self.states[0].m.grid.n if self.states else None,
                "blowup_threshold": BLOWUP,
            },
            "snapshots": names,
        }
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)


class BlowUp(NumericalFailure):
    """A norm crossed the blow-up threshold; the partial trajectory is attached."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def bernoulli(z):
    """B(z) = z/(e^z - 1), stable at z = 0."""
    return 1.0 / exprel(z)


def fitted_flux(m, dpsi, h):
    """Exponentially fitted flux m_x - m psi_x on the n interior faces."""
    return (bernoulli(dpsi) * m[1:] - bernoulli(-dpsi) * m[:-1]) / h


def centered_flux(m, dpsi, h):
    """Centred flux with arithmetic-mean m at the faces."""
    return (m[1:] - m[:-1] - 0.5 * (m[1:] + m[:-1]) * dpsi) / h


FLUXES = {"fitted": fitted_flux, "centered": centered_flux}


def _flux(name):
    try:
        return FLUXES[name]
    except KeyError:
        raise DomainError(f"unknown flux {name!r}; choose from {sorted(FLUXES)}") from None


def divergence(J, grid):
    """Nodal divergence of interior face fluxes with zero flux at both ends."""
    F = np.empty(grid.n + 1, dtype=np.result_type(J, float))
    F[0] = J[0]
    F[-1] = -J[-1]
    F[1:-1] = J[1:] - J[:-1]
    return F / grid.weights


def laplacian_matrix(grid):
    """Banded form (for solve_banded) of the no-flux finite-volume Laplacian."""
    h, w = grid.h, grid.weights
    n1 = grid.n + 1
    ab = np.zeros((3, n1))
    ab[0, 1:] = 1.0 / (h * w[:-1])
    ab[2, :-1] = 1.0 / (h * w[1:])
    diag = np.full(n1, -2.0 / (h * h))
    diag[0] = diag[-1] = -1.0 / (h * w[0])
    ab[1] = diag
    return ab


def laplacian(values, grid):
    m = np.asarray(values)
    return divergence((m[1:] - m[:-1]) / grid.h, grid)


def _potential_c(phi, m, params, grid):
    vb = boundary_slope_periodic(phi, m, params.Z, params.P, grid.h)
    return np.diff(phi) - vb * grid.h, vb


def boundary_velocity(m, params):
    """phi_x(1/2) for the periodic pressure of m (Models B/C)."""
    phi = solve_periodic(m, params).values
    return boundary_slope_periodic(phi, m.values, params.Z, params.P, m.grid.h)


def _as_c(params):
    if params.variant == "A":
        raise DomainError("this operation needs a periodic-pressure variant (B or C)")
    return params


def rhs_model_c(m, params, flux="fitted"):
    """F_C(m) = m_xx + phi_x(1/2) m_x - (m phi_x)_x on the grid."""
    _as_c(params)
    flux_fn = _flux(flux)
    g = m.grid
    phi = periodic_values(m.values, params.Z, params.P, g.h)
    dpsi, _ = _potential_c(phi, m.values, params, g)
    F = divergence(flux_fn(np.asarray(m.values), dpsi, g.h), g)
    return Field(g, F, "perturbation", check=False)


def linear_part(u, params):
    """Stationary-state linearisation S_C u = u'' - phi'' (discrete, flux form)."""
    _as_c(params)
    g = u.grid
    phi = solve_periodic(u, params).values
    dpsi, _ = _potential_c(phi, u.values, params, g)
    J = (np.diff(u.values) - dpsi) / g.h
    return Field(g, divergence(J, g), "perturbation", check=False)


def nonlinear_part(u, params):
    """Psi(u) = phi'(1/2) u' - (u phi')' with phi solving the pressure equation for u."""
    _as_c(params)
    g = u.grid
    uv = np.asarray(u.values)
    phi = solve_periodic(u, params).values
    dpsi, _ = _potential_c(phi, uv, params, g)
    J = -0.5 * (uv[1:] + uv[:-1]) * dpsi / g.h
    return Field(g, divergence(J, g), "perturbation", check=False)


def dt_max(grid, speed):
    """Largest admissible step: min(10 h^2, h/(4 max|transport speed|))."""
    h = grid.h
    speed = float(np.max(np.abs(speed))) if np.size(speed) else 0.0
    lim = 10.0 * h * h
    if speed > 0:
        lim = min(lim, 0.25 * h / speed)
    return lim


def _check(m, t):
    if not np.all(np.isfinite(m)):
        raise NumericalFailure(f"non-finite myosin values at t={t:.6g}")


class _PeriodicStepper:
    """IMEX stepper for Models B/C; matrices are built once per run."""

    def __init__(self, grid, params, dt, flux="fitted"):
        self.grid, self.params, self.dt = grid, params, dt
        self.flux = _flux(flux)
        self.G = periodic_operator(grid.n, params.Z, params.P)
        ab = -dt * laplacian_matrix(grid)
        ab[1] += 1.0
        self.implicit = ab

    def velocity_and_potential(self, m):
        # G maps constants to P exactly; splitting off the mean keeps
        # round-off proportional to the perturbation
        phi = self.params.P + self.G @ (m - 1.0)
        dpsi, vb = _potential_c(phi, m, self.params, self.grid)
        return dpsi, vb

    def advance(self, m, dpsi):
        h = self.grid.h
        J = self.flux(m, dpsi, h) - np.diff(m) / h
        rhs = m + self.dt * divergence(J, self.grid)
        return solve_banded((1, 1), self.implicit, rhs)


def step_c(state, params, dt, flux="fitted"):
    """One IMEX step of Model C (co-moving frame)."""
    _as_c(params)
    g = state.m.grid
    st = _PeriodicStepper(g, params, dt, flux)
    m = np.asarray(state.m.values, dtype=float)
    dpsi, _ = st.velocity_and_potential(m)
    lim = dt_max(g, dpsi / g.h)
    if not 0 < dt <= lim * (1 + 1e-12):
        raise DomainError(f"dt={dt!r} outside (0, {lim!r}]")
    new = st.advance(m, dpsi)
    _check(new, state.t + dt)
    return CellState(Field(g, new, "myosin", check=False), state.L, state.c, state.t + dt)


def _potential_a(Phi, left, right, K, xi):
    return K * (Phi - right * (xi + 0.5) ** 2 / 2 + left * (0.5 - xi) ** 2 / 2)


def _stiffness_limit(params, L, grid):
    zhat = params.Z / (L * L)
    rate = params.K / L * min(1.0 / zhat, 2.0 / np.sqrt(zhat))
    return 0.5 / rate


def simulate(init, params, T, dt, stride=1, flux="fitted"):
    """Integrate the model selected by params.variant up to time T.

    Snapshots are stored every ``stride`` steps (and at the end).  For
    variant B the centre follows c_t = phi_x(1/2); for variant A the length
    and centre follow the boundary velocities K phi_x(c +- L/2) and all
    fields live on the reference interval.
    """
    if not dt > 0 or not T >= 0:
        raise DomainError(f"need dt > 0 and T >= 0, got dt={dt!r}, T={T!r}")
    stride = int(stride)
    if stride < 1:
        raise DomainError("stride must be a positive integer")
    g = init.m.grid
    nsteps = int(round(T / dt))
    traj = Trajectory(params=params, dt=dt, stride=stride, flux=flux)
    traj.states.append(init)
    if params.variant == "A":
        return _simulate_a(init, params, nsteps, dt, stride, traj, _flux(flux))
    st = _PeriodicStepper(g, params, dt, flux)
    m = np.asarray(init.m.values, dtype=float)
    c, t = init.c, init.t
    w = g.weights
    for k in range(1, nsteps + 1):
        dpsi, vb = st.velocity_and_potential(m)
        if k == 1 or k % 64 == 0:
            lim = dt_max(g, dpsi / g.h)
            if dt > lim * (1 + 1e-12):
                raise DomainError(f"dt={dt!r} exceeds the stability limit {lim!r} at t={t:.6g}")
        traj.step_t.append(t)
        traj.step_mass.append(float(w @ m))
        traj.step_vleft.append(float(vb))
        traj.step_vright.append(float(vb))
        m = st.advance(m, dpsi)
        if params.variant == "B":
            c = c + dt * vb
        t = init.t + k * dt
        _check(m, t)
        if np.abs(m).max() > BLOWUP:
            raise BlowUp(f"myosin exceeded {BLOWUP:g} at t={t:.6g}", traj)
        if k % stride == 0 or k == nsteps:
            traj.states.append(CellState(Field(g, m, "myosin", check=False), 1.0, c, t))
    return traj


def _simulate_a(init, params, nsteps, dt, stride, traj, flux_fn):
    g = init.m.grid
    h, xi, w = g.h, g.nodes, g.weights
    lap = laplacian_matrix(g)
    M = np.asarray(init.m.values, dtype=float)
    L, c, t = init.L, init.c, init.t
    Z, P, K = params.Z, params.P, params.K
    for k in range(1, nsteps + 1):
        Phi = dirichlet_values(M, Z, P, L, h)
        left, right = boundary_slopes_dirichlet(Phi, M, Z, P, L, h)
        dpsi = np.diff(_potential_a(Phi, left, right, K, xi))
        lim = min(dt_max(g, dpsi / h / (L * L)), _stiffness_limit(params, L, g))
        if dt > lim * (1 + 1e-12):
            raise DomainError(f"dt={dt!r} exceeds the stability limit {lim!r} at t={t:.6g}")
        vl, vr = K * left / L, K * right / L
        traj.step_t.append(t)
        traj.step_mass.append(float(w @ M))
        traj.step_vleft.append(float(vl))
        traj.step_vright.append(float(vr))
        inv_l2 = 1.0 / (L * L)
        J = inv_l2 * (flux_fn(M, dpsi, h) - np.diff(M) / h)
        rhs = M + dt * divergence(J, g)
        ab = -dt * inv_l2 * lap
        ab[1] += 1.0
        M = solve_banded((1, 1), ab, rhs)
        L, c = L + dt * (vr - vl), c + dt * 0.5 * (vr + vl)
        t = init.t + k * dt
        _check(M, t)
        if np.abs(M).max() > BLOWUP or not L > 0 or L > BLOWUP:
            raise BlowUp(f"Model A run left the admissible range at t={t:.6g} (L={L:.6g})", traj)
        if k % stride == 0 or k == nsteps:
            traj.states.append(CellState(Field(g, M, "myosin", check=False), L, c, t))
    return traj


def stiff_params(Z, P1, K_minus1, eps):
    """Model A parameters on the stiff scaling K = K_{-1}/eps, P = eps P1."""
    if eps < EPS_MIN:
        raise DomainError(f"eps={eps!r} below the supported minimum {EPS_MIN}")
    return ModelParams(Z=Z, P=eps * P1, K=K_minus1 / eps, variant="A")


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    decaying: bool
    points: int

    def __float__(self):
        return self.rate


def deviation_norms(traj, reference):
    ref = np.asarray(reference.values)
    return np.array([norm(Field(reference.grid, s.m.values - ref, "pressure"), "L2")
                     for s in traj.states])


def decay_rate(traj, reference):
    """Least-squares slope of log||m(t) - reference||_L2 over the final half."""
    if len(traj.states) < 10:
        raise DomainError("decay fit needs at least 10 snapshots")
    t = traj.times
    d = deviation_norms(traj, reference)
    half = len(t) // 2
    t, d = t[half:], d[half:]
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        return DecayFit(0.0, -np.inf, False, len(t))
    slope, icpt = np.polyfit(t, np.log(d), 1)
    return DecayFit(float(slope), float(icpt), bool(slope < 0), len(t))


@dataclass(frozen=True)
class StiffLimitRow:
    eps: float
    dev_l2: float  # sup over snapshots of ||M_A - m_B||_L2 on the reference interval
    dev_length: float  # sup |L_A - 1|
    dev_center: float  # sup |c_A - c_B|


def stiff_limit_sweep(m0, Z, P1, K_minus1, eps_list, T, dt, stride=10):
    """Model A at K = K_{-1}/eps, P = eps P1 against Model B at P = P1 K_{-1}.

    All runs share the initial myosin m0 (L = 1, c = 0), the time step and
    the snapshot stride, so snapshots line up.
    """
    init = CellState(m0)
    ref = simulate(init, ModelParams(Z=Z, P=P1 * K_minus1, variant="B"), T, dt, stride)
    g = m0.grid
    rows = []
    for eps in eps_list:
        run = simulate(init, stiff_params(Z, P1, K_minus1, eps), T, dt, stride)
        dev = max(norm(Field(g, a.m.values - b.m.values, "pressure"), "L2")
                  for a, b in zip(run.states, ref.states))
        dl = max(abs(a.L - 1.0) for a in run.states)
        dc = max(abs(a.c - b.c) for a, b in zip(run.states, ref.states))
        rows.append(StiffLimitRow(float(eps), float(dev), float(dl), float(dc)))
    return rows
