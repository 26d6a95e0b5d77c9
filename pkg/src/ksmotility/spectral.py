"""Galerkin matrices of the linearised Model C operators and their spectra.

Operators are expanded in v_k (sin for odd k, cos for even k).  Matrices are
Gram-normalised, A[m, n] = <v_m, A v_n>/<v_m, v_m>, so their eigenvalues are
operator eigenvalues.

S_C  linearisation about m = 1:           S u = u'' - phi''
T_C  linearisation about a wave (V, m_T): T u = S u + D u with
     D u = phi'(1/2) m_T' + (V - phi_T') u' - (m_T - 1) phi'' - m_T' phi' - u phi_T''
where phi solves the periodic pressure equation with source P_T u.
"""
from dataclasses import dataclass, field as dc_field
import csv
import json
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, DomainError, SingularParameterError
from .numerics import (
    Field,
    ModelParams,
    compact_laplacian,
    inner_compact,
)
from .elliptic import _stencil, boundary_slope_periodic, periodic_source, solve_cyclic
from .travelingwave import TravelingWave, exact_tw, solve_p0

BASIS = "v_k = sin(k pi x) (k odd), cos(k pi x) (k even); Gram value 1/2; matrices Gram-normalised"
N_MAX = 512
QUAD_TOL = 1e-8
# Gershgorin diagonal-dominance bound for T_C at large Z and small V
RHO_BOUND = (2 + 5 * math.pi ** 2 + 4 * math.pi ** 4) / (2 + 6 * math.pi ** 2 + 4 * math.pi ** 4)
LAMBDA_V_COEFF = -math.pi ** 2 / 24


@dataclass(frozen=True, eq=False)
class GalerkinMatrix:
    N: int
    entries: np.ndarray
    operator_tag: str
    params: dict = dc_field(default_factory=dict)
    basis_convention: str = BASIS

    def __post_init__(self):
        e = np.array(self.entries, copy=True)
        if e.shape != (self.N, self.N):
            raise DomainError(f"entries have shape {e.shape}, expected ({self.N}, {self.N})")
        if not np.all(np.isfinite(e)):
            raise DomainError("Galerkin matrix has non-finite entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)


# ---------------------------------------------------------------- basis pressures

def _signs(k):
    """s_k = (-1)^((k-1)/2) = sin(k pi/2) for odd k."""
    return np.where((k - 1) // 2 % 2 == 0, 1.0, -1.0)


def basis_pressure(k, x, P, Z, order=0):
    """Periodic solution of -Z phi'' + phi = P v_k (or its derivatives) at x.

    Rows of the result correspond to the entries of ``k``.
    """
    k = np.atleast_1d(np.asarray(k))[:, None]
    x = np.asarray(x, dtype=float)[None, :]
    w = math.pi * k
    alpha = P / (1 + w ** 2 * Z)
    a = 1 / math.sqrt(Z)
    odd = (k % 2 == 1)
    s = _signs(k)
    sh = math.sinh(a / 2)
    if order == 0:
        val = np.where(odd, np.sin(w * x) - s * np.sinh(a * x) / sh, np.cos(w * x))
    elif order == 1:
        val = np.where(odd, w * np.cos(w * x) - s * a * np.cosh(a * x) / sh, -w * np.sin(w * x))
    elif order == 2:
        val = np.where(odd, -w ** 2 * np.sin(w * x) - s * a * a * np.sinh(a * x) / sh,
                       -w ** 2 * np.cos(w * x))
    else:
        raise DomainError(f"order {order} not supported")
    return alpha * val


def _basis(k, x, order=0):
    k = np.atleast_1d(np.asarray(k))[:, None]
    x = np.asarray(x, dtype=float)[None, :]
    w = math.pi * k
    odd = (k % 2 == 1)
    if order == 0:
        return np.where(odd, np.sin(w * x), np.cos(w * x))
    if order == 1:
        return np.where(odd, w * np.cos(w * x), -w * np.sin(w * x))
    return -w ** 2 * np.where(odd, np.sin(w * x), np.cos(w * x))


# ---------------------------------------------------------------- assembly

def s_c_entries(P, Z, N):
    """Closed-form Gram-normalised S_C(P) on modes 1..N."""
    if int(N) != N or N < 2:
        raise DomainError(f"need N >= 2, got {N!r}")
    if not (P > 0 and Z > 0):
        raise DomainError(f"need P, Z > 0, got P={P!r}, Z={Z!r}")
    k = np.arange(1, N + 1)
    w2 = (math.pi * k) ** 2
    diag = -w2 + (P / Z) / (1 + 1 / (w2 * Z))
    A = np.diag(diag)
    odd = k % 2 == 1
    coth = 1 / math.tanh(1 / (2 * math.sqrt(Z)))
    g = np.where(odd, _signs(k) / (1 + w2 * Z), 0.0)
    # rank-one coupling of odd modes through the sinh part of the periodic pressure
    A += 4 * P * coth / math.sqrt(Z) * np.outer(g, g)
    return A


def assemble_s_c(P, Z, N):
    return GalerkinMatrix(int(N), s_c_entries(P, Z, N), "S_C", {"P": P, "Z": Z})


def _wave_profiles(tw, xq):
    """m_T, m_T', phi_T', phi_T'' at points xq from a clamped spline of phi_T - V x."""
    g = tw.grid
    x = g.nodes
    V, Z, P = tw.V, tw.Z, tw.P_T
    psi = np.asarray(tw.phi_T.values) - V * x
    base = psi.mean()
    slope = tw.velocity() - V
    spl = CubicSpline(x, psi - base, bc_type=((1, slope), (1, slope)))
    psi_q = spl(xq) + base
    dpsi_q = spl(xq, 1)
    m = np.exp(tw.log_lambda + psi_q)
    dm = m * dpsi_q
    phi = psi_q + V * xq
    dphi = dpsi_q + V
    d2phi = (phi - P * m) / Z
    return m, dm, dphi, d2phi


def _gauss_nodes(grid, order):
    t, wt = np.polynomial.legendre.leggauss(order)
    h = grid.h
    left = grid.nodes[:-1]
    xq = (left[:, None] + 0.5 * h * (t[None, :] + 1)).ravel()
    wq = np.tile(0.5 * h * wt, grid.n)
    return xq, wq


def d_entries(tw, N, quad_points=4):
    """Gram-normalised perturbation part D of T_C.

    Composite Gauss-Legendre with ``quad_points`` nodes on every cell of the
    wave's grid; wave quantities come from a clamped cubic spline of
    phi_T - V x and the exact relations m_T = Lambda exp(phi_T - V x),
    phi_T'' = (phi_T - P m_T)/Z.
    """
    xq, wq = _gauss_nodes(tw.grid, quad_points)
    m, dm, dphi, d2phi = _wave_profiles(tw, xq)
    k = np.arange(1, N + 1)
    P, Z, V = tw.P_T, tw.Z, tw.V
    v = _basis(k, xq)
    dv = _basis(k, xq, 1)
    ph1 = basis_pressure(k, xq, P, Z, 1)
    ph2 = basis_pressure(k, xq, P, Z, 2)
    edge = basis_pressure(k, [0.5], P, Z, 1)[:, 0]
    Dv = (edge[:, None] * dm[None, :] + (V - dphi)[None, :] * dv - (m - 1)[None, :] * ph2
          - dm[None, :] * ph1 - v * d2phi[None, :])
    return 2.0 * (v * wq[None, :]) @ Dv.T


def assemble_t_c(tw, N, quad_points=4, check=True):
    """Gram-normalised T_C about the wave ``tw``: S_C(P_T) plus the D part.

    With ``check`` the quadrature is repeated with twice the nodes per cell
    and must agree to 1e-8.
    """
    if not isinstance(tw, TravelingWave):
        raise DomainError("assemble_t_c needs a TravelingWave")
    if tw.residual > 1e-6:
        raise DomainError(f"wave residual {tw.residual:.3e} too large for a linearisation")
    C = s_c_entries(tw.P_T, tw.Z, N)
    D = d_entries(tw, N, quad_points)
    if check:
        D2 = d_entries(tw, N, 2 * quad_points)
        diff = float(np.abs(D2 - D).max())
        if diff > QUAD_TOL:
            raise ConvergenceError(f"d-part quadrature not converged: doubling changed it by {diff:.3e}",
                                   diff, quad_points)
    return GalerkinMatrix(int(N), C + D, "T_C",
                          {"P": tw.P_T, "Z": tw.Z, "V": tw.V, "grid_n": tw.grid.n})


def d_part(mat):
    """T_C minus S_C at the same P (the D part of a T_C matrix)."""
    if mat.operator_tag != "T_C":
        raise DomainError("d_part needs a T_C matrix")
    return mat.entries - s_c_entries(mat.params["P"], mat.params["Z"], mat.N)


# ---------------------------------------------------------------- direct operators

def _pressure(u, P, Z, h):
    diag, off = _stencil(Z, h)
    phi = solve_cyclic(diag, off, periodic_source(u, P, h))
    return np.append(phi, phi[0])


def _gradient(values, h, end):
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (2 * h)
    d[0] = d[-1] = end
    return d


def apply_s_c(u, params):
    """S_C u = u'' + (P/Z) u - phi/Z on the grid (compact scheme)."""
    g = u.grid
    uv = np.asarray(u.values, dtype=float)
    phi = _pressure(uv, params.P, params.Z, g.h)
    return compact_laplacian(uv, g) + (params.P / params.Z) * uv - phi / params.Z


def apply_t_c(u, tw):
    """T_C u applied on the wave's grid (second-order first derivatives)."""
    g = u.grid
    if g != tw.grid:
        raise DomainError("perturbation and wave live on different grids")
    P, Z, V, h = tw.P_T, tw.Z, tw.V, g.h
    uv = np.asarray(u.values, dtype=float)
    out = apply_s_c(u, ModelParams(Z=Z, P=P))
    phi = _pressure(uv, P, Z, h)
    edge = boundary_slope_periodic(phi, uv, Z, P, h)
    dphi = _gradient(phi, h, edge)
    d2phi = (phi - P * uv) / Z
    du = _gradient(uv, h, 0.0)
    mT = np.asarray(tw.m_T.values)
    phiT = np.asarray(tw.phi_T.values)
    dphiT = _gradient(phiT, h, tw.velocity())
    dmT = mT * (dphiT - V)
    d2phiT = (phiT - P * mT) / Z
    return out + edge * dmT + (V - dphiT) * du - (mT - 1) * d2phi - dmT * dphi - uv * d2phiT


def adjoint_commutator(op, u1, u2):
    """H(u1, u2) = <A u1, u2> - <u1, A u2> by direct operator application.

    ``op`` is ModelParams (A = S_C at that P) or a TravelingWave (A = T_C).
    The inner product is the compact-scheme mass product, in which the
    discrete S_C is exactly symmetric.
    """
    if isinstance(op, TravelingWave):
        apply = lambda u: apply_t_c(u, op)
    elif isinstance(op, ModelParams):
        apply = lambda u: apply_s_c(u, op)
    else:
        raise DomainError("op must be ModelParams (S_C) or a TravelingWave (T_C)")
    g = u1.grid
    A1 = Field(g, apply(u1), "pressure")
    A2 = Field(g, apply(u2), "pressure")
    return float(np.real(inner_compact(A1, u2) - inner_compact(u1, A2)))


# ---------------------------------------------------------------- spectra

@dataclass(frozen=True)
class GershgorinRecord:
    shift: float
    scale: float
    diag: np.ndarray
    Q: np.ndarray
    cond1: bool
    diag_growth: float
    rho: float
    cond2: bool
    cond3: bool
    cond4: bool
    discs_left: int
    discs_below_minus_one: int

    def as_dict(self):
        return {
            "shift": self.shift, "scale": self.scale, "cond1": self.cond1,
            "diag_growth": self.diag_growth, "rho": self.rho, "cond2": self.cond2,
            "cond3": self.cond3, "cond4": self.cond4, "discs_left": self.discs_left,
            "discs_below_minus_one": self.discs_below_minus_one,
            "Q": [float(q) for q in self.Q],
        }


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    leading: complex
    gershgorin: GershgorinRecord = None
    resolvent_samples: list = dc_field(default_factory=list)
    sup_resolvent: float = None

    def to_json(self, path=None):
        data = {
            "schema": 1,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "leading": [float(self.leading.real), float(self.leading.imag)],
            "gershgorin": None if self.gershgorin is None else self.gershgorin.as_dict(),
            "sup_resolvent": self.sup_resolvent,
        }
        text = json.dumps(data, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _sort(ev):
    ev = np.asarray(ev, dtype=complex)
    order = np.lexsort((-ev.imag, -ev.real))
    return ev[order]


def eigenvalues(mat):
    """All eigenvalues sorted by descending real part (ties: descending imaginary)."""
    if mat.N > N_MAX:
        raise DomainError(f"N={mat.N} exceeds the dense-solver limit {N_MAX}")
    A = mat.entries
    try:
        if mat.operator_tag == "S_C" and np.allclose(A, A.T, atol=1e-10, rtol=0):
            ev = np.linalg.eigvalsh(0.5 * (A + A.T)).astype(complex)
        else:
            ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    ev = _sort(ev)
    return SpectrumReport(eigenvalues=ev, leading=complex(ev[0]))


def gershgorin_check(mat, shift=1.0, scale=1.0):
    """Gershgorin-type localisation for B = scale A - shift I.

    Q_n are off-diagonal column sums.  Condition 1 is judged on the
    truncation: nonzero diagonal with |b_nn| growing (diag_growth is
    |b_NN|/|b_11|).
    """
    B = scale * np.asarray(mat.entries) - shift * np.eye(mat.N)
    diag = np.diag(B).copy()
    absB = np.abs(B)
    Q = absB.sum(axis=0) - np.abs(diag)
    ad = np.abs(diag)
    cond1 = bool(np.all(ad > 0) and ad[-1] > ad[0] and ad[-1] >= ad[mat.N // 2])
    ratio = Q / np.where(ad > 0, ad, np.nan)
    rho = float(np.nanmax(ratio)) if np.any(ad > 0) else np.inf
    odd = np.arange(mat.N) % 2 == 0  # index 0 is mode 1
    do, Qo = diag[odd], Q[odd]
    gap = np.abs(do[:, None] - do[None, :])
    need = Qo[:, None] + Qo[None, :]
    off = ~np.eye(do.size, dtype=bool)
    cond3 = bool(np.all(gap[off] >= need[off]))
    cond4 = bool(np.all(np.isfinite(absB.max(axis=1))))
    right = diag.real + Q
    return GershgorinRecord(
        shift=shift, scale=scale, diag=diag, Q=Q, cond1=cond1,
        diag_growth=float(ad[-1] / ad[0]) if ad[0] > 0 else np.inf,
        rho=rho, cond2=bool(rho < 1), cond3=cond3, cond4=cond4,
        discs_left=int(np.sum(right < 0)), discs_below_minus_one=int(np.sum(right < -1)))


def mu_prime(Z):
    """Derivative at P0 of the leading stationary eigenvalue with respect to P."""
    P0 = solve_p0(Z)
    den = P0 * Z * (3 * P0 ** 2 - 60 * Z + 2)
    if abs(den) < 1e-12 * max(1.0, P0 * Z * 60 * Z):
        raise SingularParameterError(f"mu' is singular at Z={Z!r}")
    return 3 * (P0 - 1) * (P0 ** 2 - 12 * Z) / den


@dataclass(frozen=True)
class EigenCurve:
    V: np.ndarray
    leading: np.ndarray
    coefficient: float  # least-squares c in Re lambda = c V^2
    waves: tuple = dc_field(default=(), repr=False)


def leading_eigenvalue_curve(Z, Vs, N=64, grid=None, quad_points=4):
    """Leading eigenvalue of T_C along the wave branch, with a V^2 fit."""
    Vs = np.asarray(Vs, dtype=float)
    lead, waves = [], []
    prev = None
    for V in Vs:
        if prev is not None and prev.V != 0 and np.sign(prev.V) == np.sign(V):
            tw = exact_tw(float(V), Z, guess=prev, grid=grid)
        else:
            tw = exact_tw(float(V), Z, grid=grid)
        mat = assemble_t_c(tw, N, quad_points)
        lead.append(eigenvalues(mat).leading)
        waves.append(tw)
        prev = tw
    lead = np.array(lead)
    v2 = Vs ** 2
    coeff = float(np.dot(v2, lead.real) / np.dot(v2, v2)) if np.any(v2 > 0) else 0.0
    return EigenCurve(Vs, lead, coeff, tuple(waves))


# ---------------------------------------------------------------- resolvent

def resolvent_norm(mat, lam, eig=None):
    """2-norm of (lam I - A)^{-1} as the reciprocal smallest singular value."""
    A = np.asarray(mat.entries)
    ev = eigenvalues(mat).eigenvalues if eig is None else eig
    if np.min(np.abs(ev - lam)) < 1e-10:
        raise DomainError(f"lambda={lam!r} is within 1e-10 of an eigenvalue")
    s = np.linalg.svd(lam * np.eye(mat.N) - A, compute_uv=False)
    return float(1.0 / s[-1])


def resolvent_grid(re_range=(0.0, 50.0), im_max=200.0, n_re=41, n_im=81, im_min=0.1):
    """Sample points: uniform in Re, geometric in |Im| (dense near the axis)."""
    re = np.linspace(re_range[0], re_range[1], n_re)
    half = (n_im - 1) // 2
    pos = np.geomspace(im_min, im_max, half)
    im = np.concatenate((-pos[::-1], [0.0] if n_im % 2 else [], pos))
    return re, im


def sample_resolvent(mat, re=None, im=None):
    """Resolvent norms over a grid; returns (samples, sup)."""
    if re is None or im is None:
        re, im = resolvent_grid()
    ev = eigenvalues(mat).eigenvalues
    samples = []
    for a in re:
        for b in im:
            lam = complex(a, b)
            samples.append((lam, resolvent_norm(mat, lam, ev)))
    sup = max(s for _, s in samples)
    return samples, sup


def write_resolvent_csv(samples, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_lambda", "im_lambda", "norm"])
        for lam, s in samples:
            w.writerow([repr(lam.real), repr(lam.imag), repr(s)])


def spectrum_report(mat, shift=1.0, scale=1.0, resolvent=False, re=None, im=None):
    rep = eigenvalues(mat)
    rep.gershgorin = gershgorin_check(mat, shift, scale)
    if resolvent:
        rep.resolvent_samples, rep.sup_resolvent = sample_resolvent(mat, re, im)
    return rep
