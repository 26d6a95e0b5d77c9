"""Traveling waves of Model B: critical activity, small-V asymptotics, exact
Newton solves and continuation of the pitchfork branch.

A wave with velocity V has m_T = Lambda exp(phi_T - V x), where phi_T solves
the periodic pressure equation with the extra slope condition
phi_T'(+-1/2) = V.  The extra condition selects the activity P_T(V).

The exact solver works on the same discretisation the dynamics use (compact
pressure scheme, exponentially fitted fluxes), so a converged wave is an
equilibrium of the time stepper to round-off.
"""
from dataclasses import dataclass, field as dc_field
import csv
import math
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import ContinuationError, ConvergenceError, DomainError, SingularParameterError
from .numerics import DEFAULT_N, Field, Grid, ModelParams, mass, norm
from .elliptic import _stencil, boundary_slope_periodic

Z_SINGULAR = 1.0 / 12.0
NEWTON_TOL = 1e-11
NEWTON_MAX = 50
V_WARN = 0.3
V_MAX_DEFAULT = 0.2


# ---------------------------------------------------------------- critical P0

def _k2(w):
    """(tan w - w)/(4 w^3), with its Taylor series near w = 0."""
    if w < 1e-2:
        w2 = w * w
        return (1 / 3 + w2 * (2 / 15 + w2 * (17 / 315 + w2 * 62 / 2835))) / 4
    return (math.tan(w) - w) / (4 * w ** 3)


def _k1(v):
    """(v - tanh v)/(4 v^3), with its Taylor series near v = 0."""
    if v < 1e-2:
        v2 = v * v
        return (1 / 3 - v2 * (2 / 15 - v2 * (17 / 315 - v2 * 62 / 2835))) / 4
    return (v - math.tanh(v)) / (4 * v ** 3)


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    if flo == 0:
        return lo
    if flo * f(hi) > 0:
        raise RuntimeError("root is not bracketed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_z(Z):
    if not Z > 0:
        raise DomainError(f"Z must be positive, got {Z!r}")
    if abs(Z - Z_SINGULAR) < 1e-6:
        raise SingularParameterError(f"Z={Z!r} is within 1e-6 of the singular value 1/12")


def solve_p0(Z):
    """Critical activity at which the stationary state loses stability."""
    _check_z(Z)
    if Z > Z_SINGULAR:
        w = _bisect(lambda w: _k2(w) - Z, 0.0, math.pi / 2)
        # equal to tan(w)/w at the root, but well conditioned as w -> pi/2
        return 1.0 + 4.0 * Z * w * w
    v_hi = 4.0 / math.sqrt(Z) + 4.0
    v = _bisect(lambda v: _k1(v) - Z, 0.0, v_hi)
    return 1.0 - 4.0 * Z * v * v


def p0_residual(P0, Z):
    """Relative residual of tan(w) = P0 w (or tanh(v) = P0 v when P0 < 1)."""
    if P0 > 1:
        w = math.sqrt(P0 - 1) / (2 * math.sqrt(Z))
        return abs(math.sin(w) - P0 * w * math.cos(w)) / abs(P0 * w * math.cos(w))
    v = math.sqrt(1 - P0) / (2 * math.sqrt(Z))
    return abs(math.tanh(v) - P0 * v) / abs(P0 * v)


def p0_higher_branches(Z, count):
    """Further roots of the critical-activity equation, one per interval
    ((2j-1) pi/2, (2j+1) pi/2) of w, mapped to P = 1 + 4 Z w^2."""
    if not Z > Z_SINGULAR:
        raise DomainError(f"higher branches need Z > 1/12, got {Z!r}")
    out = []
    for j in range(1, int(count) + 1):
        # sin w - (w + 4 Z w^3) cos w has no poles and changes sign across the interval
        f = lambda w: math.sin(w) - (w + 4 * Z * w ** 3) * math.cos(w)
        w = _bisect(f, (2 * j - 1) * math.pi / 2, (2 * j + 1) * math.pi / 2)
        out.append(1 + 4 * Z * w * w)
    return out


# ---------------------------------------------------------------- asymptotics

def _real(z):
    z = complex(z)
    return z.real if abs(z.imag) <= 1e-12 * max(1.0, abs(z)) else z


@dataclass(frozen=True)
class AsymptoticTW:
    """Coefficients of the small-V expansion of the traveling wave.

    When P0 < 1 (Z < 1/12) the wavenumber is imaginary and some coefficients
    are complex; profiles evaluated from them are real.
    """

    Z: float
    P0: float
    P2: float
    k: complex
    m1: dict
    m2: dict
    phi1: dict
    phi2: dict
    lambda2_scaled: float  # Lambda_2 exp(P0)

    @property
    def Lambda0(self):
        return math.exp(-self.P0)

    @property
    def Lambda2(self):
        return self.lambda2_scaled * math.exp(-self.P0)

    def _trig(self, x):
        x = np.asarray(x, dtype=float)
        return x, np.sin(self.k * x), np.cos(self.k * x), np.cos(2 * self.k * x)

    def m1_values(self, x):
        x, s, _, _ = self._trig(x)
        return np.real(self.m1["slope"] * x - self.m1["amp"] * s)

    def phi1_values(self, x):
        x, s, _, _ = self._trig(x)
        return np.real(self.phi1["slope"] * x - self.phi1["amp"] * s)

    def m2_values(self, x):
        x, s, c, c2 = self._trig(x)
        q = self.m2
        return np.real(q["A"] + q["B"] * x * x + (q["C"] + q["D"] * x * x) * c
                       + q["E"] * x * s + q["F"] * c2)

    def phi2_tilde_values(self, x):
        """phi_2 - P_2."""
        x, s, c, c2 = self._trig(x)
        q = self.phi2
        return np.real(q["a0"] + q["a2"] * x * x + (q["b0"] + q["b2"] * x * x) * c
                       + q["c1"] * x * s + q["d0"] * c2)


def p2_value(P0, Z):
    """Quadratic coefficient of P_T(V) = P0 + P2 V^2."""
    den = 288 * (P0 - 1) ** 4 * (P0 * P0 - 12 * Z)
    if P0 == 1 or abs(P0 * P0 - 12 * Z) < 1e-12 * max(1.0, 12 * Z):
        raise SingularParameterError(f"P2 is singular at P0={P0!r}, Z={Z!r}")
    num = P0 * (6 * P0 ** 6 - 15 * P0 ** 5 - 3 * P0 ** 4 * (56 * Z - 5) + P0 ** 3 * (514 * Z - 6)
                - 1044 * P0 ** 2 * Z + 72 * P0 * Z * (55 * Z - 1) + 5280 * Z ** 2)
    return num / den


def asymptotic_coefficients(Z):
    """All coefficients of the second-order expansion at viscosity Z."""
    P0 = solve_p0(Z)
    P2 = p2_value(P0, Z)
    sk = np.sqrt(complex(P0 - 1))  # sqrt(P0 - 1), imaginary when P0 < 1
    k = sk / math.sqrt(Z)
    R = P0 ** 3 - P0 ** 2 + 4 * Z
    rootR = math.sqrt(R)
    csc = 1 / np.sin(k / 2)
    amp = P0 * csc / (2 * (P0 - 1))
    q4 = (P0 - 1) ** 4
    m1 = {"slope": 1 / (P0 - 1), "amp": _real(amp)}
    phi1 = {"slope": P0 / (P0 - 1), "amp": _real(amp)}
    m2 = {
        "A": (-6 * P0 * Z + P0 + 24 * Z - 1) / (24 * q4),
        "B": (12 - 12 * P0) / (24 * q4),
        "C": (P0 * (28 * Z - 3) + 3 * P0 ** 2 - 60 * Z) * rootR / math.sqrt(Z) / (96 * q4),
        "D": -P0 * rootR / math.sqrt(Z) / (8 * (P0 - 1) ** 3),
        "E": _real((4 - 3 * P0) * rootR / (8 * sk ** 7)),
        "F": (3 - 4 * P0) * R / (48 * q4),
    }
    phi2 = {
        "a0": (P0 ** 2 * (1 - 30 * Z) + P0 * (48 * Z - 1)) / (24 * q4),
        "a2": -P0 / (2 * (P0 - 1) ** 3),
        "b0": (P0 * (28 * Z - 3) + 3 * P0 ** 2 - 60 * Z) * rootR / (96 * q4 * math.sqrt(Z)),
        "b2": -P0 * rootR / (8 * (P0 - 1) ** 3 * math.sqrt(Z)),
        "c1": _real(P0 * rootR / (8 * sk ** 7)),
        "d0": (-4 * P0 * Z - P0 ** 4 + P0 ** 3) / (48 * q4),
    }
    lam2 = -P2 - (3 * P0 ** 2 - 60 * Z + 2) / (48 * (P0 - 1) ** 2)
    return AsymptoticTW(Z=Z, P0=P0, P2=P2, k=_real(k), m1=m1, m2=m2, phi1=phi1, phi2=phi2,
                        lambda2_scaled=lam2)


# ---------------------------------------------------------------- waves

@dataclass(frozen=True)
class TravelingWave:
    """A traveling wave sampled on a grid.

    ``log_lambda`` is log(Lambda); Lambda itself underflows once P_T exceeds
    about 700.  ``residual`` is the L2 norm of the Model C right-hand side at
    m_T in the co-moving frame.
    """

    V: float
    Z: float
    P_T: float
    m_T: Field
    phi_T: Field
    log_lambda: float
    residual: float
    source: str
    iterations: int = 0
    newton_residual: float = dc_field(default=0.0, repr=False)

    @property
    def grid(self):
        return self.m_T.grid

    @property
    def Lambda(self):
        return math.exp(self.log_lambda)

    @property
    def params(self):
        return ModelParams(Z=self.Z, P=self.P_T)

    def velocity(self):
        """phi_T'(1/2) read back from the discrete pressure."""
        return boundary_slope_periodic(self.phi_T.values, self.m_T.values, self.Z, self.P_T,
                                       self.grid.h)


def _model_c_residual(m, Z, P):
    from .dynamics import rhs_model_c
    return norm(rhs_model_c(m, ModelParams(Z=Z, P=P)), "L2")


def stationary_wave(Z, grid=None):
    """The V = 0 member of the branch: m = 1, phi = P0."""
    grid = grid or Grid(DEFAULT_N)
    P0 = solve_p0(Z)
    ones = np.ones(grid.n + 1)
    return TravelingWave(V=0.0, Z=Z, P_T=P0, m_T=Field(grid, ones, "myosin"),
                         phi_T=Field(grid, P0 * ones, "pressure"), log_lambda=-P0,
                         residual=0.0, source="newton")


def asymptotic_tw(V, Z, grid=None, coeffs=None):
    """Second-order small-V traveling wave, renormalised to mass one."""
    if abs(V) > V_WARN:
        warnings.warn(f"|V|={abs(V)} is outside the small-velocity regime of the expansion",
                      stacklevel=2)
    grid = grid or Grid(DEFAULT_N)
    a = coeffs or asymptotic_coefficients(Z)
    x = grid.nodes
    mv = 1 + V * a.m1_values(x) + V * V * a.m2_values(x)
    mv = mv / np.dot(grid.weights, mv)
    phi = a.P0 + V * a.phi1_values(x) + V * V * (a.P2 + a.phi2_tilde_values(x))
    P_T = a.P0 + V * V * a.P2
    log_lambda = -a.P0 + math.log1p(V * V * a.lambda2_scaled)
    m = Field(grid, mv, "myosin")
    return TravelingWave(V=V, Z=Z, P_T=P_T, m_T=m, phi_T=Field(grid, phi, "pressure"),
                         log_lambda=log_lambda, residual=_model_c_residual(m, Z, P_T),
                         source="asymptotic")


class _WaveSystem:
    """Residual and Jacobian of the discrete wave equations.

    Unknowns: d_i = phi_i - c (c a fixed offset), P, and mu = log(Lambda) + c,
    so m_i = exp(mu + d_i - V x_i).  Rows: compact pressure scheme at nodes
    1..n-1 and at the seam, phi_0 = phi_n, seam slope = V, mass = 1.
    """

    def __init__(self, grid, Z, V, offset):
        self.g, self.Z, self.V, self.c = grid, Z, V, offset
        n = grid.n
        self.n = n
        self.h = grid.h
        self.diag, self.off = _stencil(Z, grid.h)
        self.shift = -V * grid.nodes
        self.corr = 1.0 + self.h ** 2 / (6.0 * Z)
        # constant part of the pressure stencil applied to the offset c
        self.const = self.h ** 2 * offset

    def unpack(self, y):
        n = self.n
        d, P, mu = y[:n + 1], y[n + 1], y[n + 2]
        m = np.exp(mu + d + self.shift)
        return d, P, mu, m

    def residual(self, y):
        n, h, Z = self.n, self.h, self.Z
        d, P, mu, m = self.unpack(y)
        s = P * m
        r = np.empty(n + 3)
        w12 = h * h / 12.0
        r[1:n] = (self.off * (d[:-2] + d[2:]) + self.diag * d[1:-1] + self.const
                  - w12 * (s[:-2] + 10 * s[1:-1] + s[2:]))
        seam = 0.5 * (s[0] + s[-1])
        r[0] = (self.off * (d[n - 1] + d[1]) + self.diag * d[0] + self.const
                - w12 * (s[n - 1] + 10 * seam + s[1]))
        r[n] = d[0] - d[n]
        r[n + 1] = (((d[1] - d[n - 1]) / (2 * h) - 0.25 * h * ((d[0] - s[0]) - (d[n] - s[n])) / Z)
                    / self.corr - self.V)
        r[n + 2] = np.dot(self.g.weights, m) - 1.0
        return r

    def jacobian(self, y):
        n, h, Z = self.n, self.h, self.Z
        d, P, mu, m = self.unpack(y)
        s = P * m
        w12 = h * h / 12.0
        rows, cols, vals = [], [], []

        def add(i, j, v):
            rows.append(i)
            cols.append(j)
            vals.append(v)

        iP, imu = n + 1, n + 2
        for i in range(1, n):
            for j, wgt in ((i - 1, 1.0), (i, 10.0), (i + 1, 1.0)):
                coef = self.diag if j == i else self.off
                add(i, j, coef - w12 * wgt * s[j])
            add(i, iP, -w12 * (m[i - 1] + 10 * m[i] + m[i + 1]))
            add(i, imu, -w12 * (s[i - 1] + 10 * s[i] + s[i + 1]))
        add(0, n - 1, self.off - w12 * s[n - 1])
        add(0, 1, self.off - w12 * s[1])
        add(0, 0, self.diag - w12 * 5 * s[0])
        add(0, n, -w12 * 5 * s[n])
        add(0, iP, -w12 * (m[n - 1] + 5 * (m[0] + m[n]) + m[1]))
        add(0, imu, -w12 * (s[n - 1] + 5 * (s[0] + s[n]) + s[1]))
        add(n, 0, 1.0)
        add(n, n, -1.0)
        k = 1.0 / self.corr
        add(iP, 1, k / (2 * h))
        add(iP, n - 1, -k / (2 * h))
        add(iP, 0, -k * 0.25 * h * (1 - s[0]) / Z)
        add(iP, n, k * 0.25 * h * (1 - s[n]) / Z)
        add(iP, iP, -k * 0.25 * h * (-m[0] + m[n]) / Z)
        add(iP, imu, -k * 0.25 * h * (-s[0] + s[n]) / Z)
        wm = self.g.weights * m
        for j in range(n + 1):
            add(imu, j, wm[j])
        add(imu, imu, wm.sum())
        return sp.csc_matrix((vals, (rows, cols)), shape=(n + 3, n + 3))

    def jacobian_fd(self, y, eps=1e-7):
        """Finite-difference Jacobian (debug oracle)."""
        r0 = self.residual(y)
        J = np.empty((y.size, y.size))
        for j in range(y.size):
            yp = y.copy()
            step = eps * max(1.0, abs(y[j]))
            yp[j] += step
            J[:, j] = (self.residual(yp) - r0) / step
        return J


def _initial_vector(guess, grid, offset):
    x = grid.nodes
    if guess.grid.n == grid.n:
        phi = np.asarray(guess.phi_T.values, dtype=float)
    else:
        phi = np.interp(x, guess.grid.nodes, guess.phi_T.values)
    return np.concatenate((phi - offset, [guess.P_T, guess.log_lambda + offset]))


def exact_tw(V, Z, guess=None, grid=None, tol=NEWTON_TOL, max_iter=NEWTON_MAX):
    """Traveling wave with velocity V solved by Newton's method.

    The residual check is on the max norm of the discrete equations (pressure
    rows carry their natural h^2 scaling).  One polishing step is taken after
    the tolerance is met.
    """
    grid = grid or (guess.grid if guess is not None else Grid(DEFAULT_N))
    if V == 0:
        return stationary_wave(Z, grid)
    if guess is None:
        guess = asymptotic_tw(V, Z, grid)
    offset = solve_p0(Z)
    system = _WaveSystem(grid, Z, V, offset)
    y = _initial_vector(guess, grid, offset)
    r = system.residual(y)
    res = np.abs(r).max()
    it = 0
    polished = False
    while True:
        if res < tol:
            if polished:
                break
            polished = True
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not converge for V={V!r}, Z={Z!r}: "
                                   f"residual {res:.3e} after {it} iterations", res, it)
        step = spsolve(system.jacobian(y), -r)
        if not np.all(np.isfinite(step)):
            raise ConvergenceError(f"singular Newton system at V={V!r}", res, it)
        lam = 1.0
        for _ in range(30):
            y_new = y + lam * step
            r_new = system.residual(y_new)
            res_new = np.abs(r_new).max()
            if np.isfinite(res_new) and (res_new < res or res < tol * 10):
                break
            lam *= 0.5
        else:
            raise ConvergenceError(f"Newton line search failed for V={V!r}", res, it)
        if polished and res_new > res:
            break
        y, r, res = y_new, r_new, res_new
        it += 1
    d, P, mu, mv = system.unpack(y)
    if not np.all(mv > 0):
        raise ConvergenceError(f"non-positive myosin in the wave at V={V!r}", res, it)
    m = Field(grid, mv, "myosin", check=False)
    if abs(mass(m) - 1) > 1e-9:
        raise ConvergenceError(f"wave mass {mass(m)!r} off by more than 1e-9", res, it)
    phi = Field(grid, d + offset, "pressure")
    return TravelingWave(V=V, Z=Z, P_T=float(P), m_T=Field(grid, mv, "myosin"), phi_T=phi,
                         log_lambda=float(mu - offset), residual=_model_c_residual(m, Z, P),
                         source="newton", iterations=it, newton_residual=float(res))


# ---------------------------------------------------------------- continuation

@dataclass(frozen=True)
class BifurcationPoint:
    V: float
    P_T: float
    amplitude: float
    residual: float
    newton_iters: int


def _amplitude(tw):
    return norm(tw.m_T.with_values(tw.m_T.values - 1.0, kind="pressure"), "L2")


def trace_bifurcation(Z, V_max=V_MAX_DEFAULT, steps=21, grid=None):
    """Continue the wave branch from V = 0 to V_max in uniform steps.

    Each solve is warm-started from the previous wave; the V < 0 half is
    the mirror image.  Returns points sorted by V.
    """
    if int(steps) != steps or steps < 2:
        raise DomainError(f"continuation needs at least 2 steps, got {steps!r}")
    grid = grid or Grid(DEFAULT_N)
    half = []
    prev = None
    for V in np.linspace(0.0, V_max, int(steps)):
        V = float(V)
        try:
            if prev is None or prev.V == 0:
                tw = exact_tw(V, Z, grid=grid)
            else:
                tw = exact_tw(V, Z, guess=prev, grid=grid)
        except ConvergenceError as exc:
            raise ContinuationError(f"continuation stopped at V={V!r}: {exc}", V, half,
                                    exc.residual, exc.iterations) from exc
        half.append(BifurcationPoint(V, tw.P_T, _amplitude(tw), tw.residual, tw.iterations))
        prev = tw
    mirrored = [BifurcationPoint(-p.V, p.P_T, p.amplitude, p.residual, p.newton_iters)
                for p in reversed(half) if p.V != 0]
    return mirrored + half


def write_bifurcation_csv(points, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["V", "P_T", "amplitude", "residual", "newton_iters"])
        for p in points:
            w.writerow([repr(p.V), repr(p.P_T), repr(p.amplitude), repr(p.residual), p.newton_iters])
