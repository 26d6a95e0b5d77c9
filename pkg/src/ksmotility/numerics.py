"""Grids, fields, quadrature, norms and the sin/cos basis on [-1/2, 1/2].

Everything downstream works with nodal samples on a uniform grid of ``n``
cells and integrates with the trapezoid rule.  The basis

    v_k(x) = sin(k pi x)   for odd k
    v_k(x) = cos(k pi x)   for even k

is the Neumann cosine basis of the interval written in centred form; it is
left unnormalised, so <v_k, v_k> = 1/2.
"""
from dataclasses import dataclass, field as dc_field
import csv

import numpy as np

from .errors import DomainError

VARIANTS = ("A", "B", "C")
KINDS = ("myosin", "pressure", "perturbation")
DEFAULT_N = 256


@dataclass(frozen=True)
class Grid:
    """Uniform nodal grid with n cells on [-1/2, 1/2]."""

    n: int = DEFAULT_N

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"grid needs a positive integer cell count, got n={self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def nodes(self):
        x = -0.5 + self.h * np.arange(self.n + 1)
        x[-1] = 0.5
        return x

    @property
    def weights(self):
        """Trapezoid weights."""
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal samples of a function on a Grid.

    ``kind`` is one of myosin (mass one), pressure (no constraint) or
    perturbation (zero mean).  Values are stored read-only.
    """

    grid: Grid
    values: np.ndarray
    kind: str = "perturbation"
    check: bool = dc_field(default=True, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, copy=True)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        if vals.shape != (self.grid.n + 1,):
            raise DomainError(
                f"field needs {self.grid.n + 1} values for n={self.grid.n}, got shape {vals.shape}")
        if self.kind not in KINDS:
            raise DomainError(f"unknown field kind {self.kind!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.check:
            if self.kind == "myosin" and abs(_trapz(vals, self.grid) - 1.0) > 1e-10:
                raise DomainError(f"myosin field has mass {_trapz(vals, self.grid).real!r}, expected 1")
            if self.kind == "perturbation" and abs(_trapz(vals, self.grid)) > 1e-10:
                raise DomainError(f"perturbation field has mean {_trapz(vals, self.grid)!r}, expected 0")

    @classmethod
    def from_function(cls, grid, func, kind="perturbation", check=True):
        return cls(grid, func(grid.nodes), kind, check)

    @property
    def x(self):
        return self.grid.nodes

    def with_values(self, values, kind=None, check=True):
        return Field(self.grid, values, self.kind if kind is None else kind, check)

    def __len__(self):
        return self.grid.n + 1


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless viscosity Z, activity P, stiffness K and model variant."""

    Z: float
    P: float
    K: float = None
    variant: str = "C"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.Z > 0:
            raise DomainError(f"Z must be positive, got {self.Z!r}")
        if not self.P > 0:
            raise DomainError(f"P must be positive, got {self.P!r}")
        if self.variant == "A":
            if self.K is None or not self.K > 0:
                raise DomainError(f"variant A needs K > 0, got {self.K!r}")
        elif self.K is not None:
            raise DomainError(f"K is only used by variant A, got K={self.K!r} for variant {self.variant}")


@dataclass(frozen=True)
class DimensionalParams:
    """Physical parameters of the cell model."""

    mu: float
    zeta: float
    k: float
    k_e: float
    D: float
    L0: float
    M: float

    def __post_init__(self):
        for name in ("mu", "zeta", "k", "k_e", "D", "L0", "M"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"{name} must be positive, got {value!r}")


def nondimensionalize(dp):
    """Map physical parameters to (Z, P, K) of Model A."""
    if not isinstance(dp, DimensionalParams):
        dp = DimensionalParams(**dp)
    Z = dp.mu / (dp.zeta * dp.L0 ** 2)
    P = dp.k * dp.M / (dp.k_e * dp.L0)
    K = dp.k_e / (dp.D * dp.zeta)
    return ModelParams(Z=Z, P=P, K=K, variant="A")


def _trapz(values, grid):
    return np.dot(grid.weights, values)


def _values(f):
    return f.values if isinstance(f, Field) else np.asarray(f)


def mass(f):
    """Trapezoid integral of f over [-1/2, 1/2]."""
    return _trapz(f.values, f.grid)


def derivative(f):
    """Centred first difference, second-order one-sided at the ends."""
    return np.gradient(f.values, f.grid.h, edge_order=2)


def norm(f, which="L2"):
    """L1, L2, Linf or full H1 norm of a field."""
    v = np.abs(f.values)
    if which == "L1":
        return float(_trapz(v, f.grid))
    if which == "L2":
        return float(np.sqrt(_trapz(v ** 2, f.grid)))
    if which == "Linf":
        return float(v.max())
    if which == "H1":
        if f.grid.n < 2:
            raise DomainError("H1 norm needs at least two cells")
        dv = np.abs(derivative(f))
        return float(np.sqrt(_trapz(v ** 2 + dv ** 2, f.grid)))
    raise DomainError(f"unknown norm {which!r}")


def inner(f, g):
    """Trapezoid L2 inner product, conjugate-linear in the first slot."""
    if f.grid != g.grid:
        raise DomainError(f"grid mismatch: n={f.grid.n} vs n={g.grid.n}")
    return _trapz(np.conj(f.values) * g.values, f.grid)


def compact_mass(grid):
    """Banded (solve_banded layout) mass matrix of the compact scheme.

    h (1, 10, 1)/12 inside and h (5, 1)/12 on the end rows; its column sums
    are the trapezoid weights.
    """
    n1 = grid.n + 1
    h = grid.h
    ab = np.zeros((3, n1))
    ab[0, 1:] = h / 12.0
    ab[2, :-1] = h / 12.0
    ab[1, :] = 10.0 * h / 12.0
    ab[1, 0] = ab[1, -1] = 5.0 * h / 12.0
    return ab


def _banded_matvec(ab, v):
    out = ab[1] * v
    out[:-1] += ab[0, 1:] * v[1:]
    out[1:] += ab[2, :-1] * v[:-1]
    return out


def inner_compact(f, g):
    """Inner product f^H M g with the compact mass matrix M.

    Exactly symmetric partner of ``compact_laplacian``: the compact Neumann
    Laplacian is self-adjoint in this product.
    """
    if f.grid != g.grid:
        raise DomainError(f"grid mismatch: n={f.grid.n} vs n={g.grid.n}")
    return np.dot(np.conj(f.values), _banded_matvec(compact_mass(f.grid), np.asarray(g.values)))


def compact_laplacian(values, grid):
    """Fourth-order Neumann Laplacian -M^{-1} K u (K the three-point stiffness)."""
    from scipy.linalg import solve_banded
    u = np.asarray(values)
    h = grid.h
    Ku = np.empty_like(u)
    Ku[1:-1] = (2 * u[1:-1] - u[:-2] - u[2:]) / h
    Ku[0] = (u[0] - u[1]) / h
    Ku[-1] = (u[-1] - u[-2]) / h
    return -solve_banded((1, 1), compact_mass(grid), Ku)


def basis_values(k, x):
    """v_k evaluated at points x."""
    k = np.asarray(k)
    x = np.asarray(x)
    arg = np.pi * k * x
    return np.where(k % 2 == 1, np.sin(arg), np.cos(arg))


def basis_derivative(k, x, order=1):
    """Derivative of v_k of the given order (0, 1 or 2)."""
    k = np.asarray(k)
    arg = np.pi * k * np.asarray(x)
    odd = k % 2 == 1
    w = np.pi * k
    if order == 0:
        return np.where(odd, np.sin(arg), np.cos(arg))
    if order == 1:
        return np.where(odd, w * np.cos(arg), -w * np.sin(arg))
    if order == 2:
        return -w ** 2 * np.where(odd, np.sin(arg), np.cos(arg))
    raise DomainError(f"derivative order {order} not supported")


def basis_fn(k, grid):
    """Field of nodal samples of v_k."""
    if int(k) != k or k < 1:
        raise DomainError(f"basis index must be a positive integer, got {k!r}")
    vals = basis_values(int(k), grid.nodes)
    return Field(grid, vals, "perturbation", check=False)


def project(f, N):
    """Coefficients b_k = <v_k, f>/<v_k, v_k> for k = 1..N."""
    out = np.empty(N, dtype=np.result_type(f.values, float))
    for k in range(1, N + 1):
        v = basis_fn(k, f.grid)
        out[k - 1] = inner(v, f) / inner(v, v)
    return out


def band_limited(grid, rng, kmax=8):
    """Zero-mean combination of v_1..v_kmax with seeded N(0, 1)/k weights, unit L2 norm."""
    coef = rng.standard_normal(kmax) / np.arange(1, kmax + 1)
    vals = sum(c * basis_values(k, grid.nodes) for k, c in zip(range(1, kmax + 1), coef))
    vals = vals - _trapz(vals, grid)
    return Field(grid, vals / np.sqrt(_trapz(vals ** 2, grid)), "perturbation")


def write_field_csv(f, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for xi, vi in zip(f.x, np.real(f.values)):
            w.writerow([repr(float(xi)), repr(float(vi))])


def read_field_csv(path, kind="pressure"):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    grid = Grid(len(rows) - 1)
    vals = np.array([float(r["value"]) for r in rows])
    return Field(grid, vals, kind)
