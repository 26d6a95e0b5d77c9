import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ksmotility.elliptic import solve_periodic
from ksmotility.errors import DomainError
from ksmotility.numerics import Field, Grid, ModelParams, band_limited, basis_fn, basis_values, inner
from ksmotility.spectral import (
    RHO_BOUND,
    GalerkinMatrix,
    adjoint_commutator,
    apply_s_c,
    apply_t_c,
    assemble_s_c,
    assemble_t_c,
    basis_pressure,
    d_part,
    eigenvalues,
    gershgorin_check,
    mu_prime,
    resolvent_norm,
    sample_resolvent,
    spectrum_report,
)
from ksmotility.travelingwave import exact_tw, solve_p0


@pytest.fixture(scope="module")
def wave():
    return exact_tw(0.05, 50.0, grid=Grid(256))


@pytest.fixture(scope="module")
def t_c(wave):
    return assemble_t_c(wave, 64)


def _galerkin_oracle(P, Z, N, n=4096):
    # fine-grid quadrature of 2 <v_m, v_n'' + (P/Z) v_n - phi_n / Z> with phi_n from the banded solver
    g = Grid(n)
    x = g.nodes
    A = np.empty((N, N))
    p = ModelParams(Z=Z, P=P)
    for j in range(1, N + 1):
        v = basis_values(j, x)
        phi = solve_periodic(Field(g, v, "pressure"), p).values
        Sv = -(math.pi * j) ** 2 * v + (P / Z) * v - phi / Z
        for i in range(1, N + 1):
            A[i - 1, j - 1] = 2 * g.weights @ (basis_values(i, x) * Sv)
    return A


@pytest.mark.parametrize("P,Z", [(5.0, 1.0), (30.0, 3.0)])
def test_s_c_matches_quadrature_oracle(P, Z):
    A = assemble_s_c(P, Z, 6).entries
    assert np.abs(A - _galerkin_oracle(P, Z, 6)).max() < 1e-5


def test_basis_pressure_solves_pressure_equation():
    g = Grid(1024)
    P, Z = 4.0, 0.7
    for k in (1, 2, 3):
        phi = solve_periodic(Field(g, basis_values(k, g.nodes), "pressure"), ModelParams(Z=Z, P=P))
        assert np.abs(phi.values - basis_pressure([k], g.nodes, P, Z)[0]).max() < 1e-9


@given(st.floats(0.1, 200), st.floats(0.05, 100))
def test_mode_two_entry_closed_form(P, Z):
    A = assemble_s_c(P, Z, 4).entries
    w2 = 4 * math.pi ** 2
    assert A[1, 1] == pytest.approx(-w2 + (P / Z) / (1 + 1 / (w2 * Z)), rel=1e-12, abs=1e-10)


def test_s_c_symmetric_and_even_modes_decoupled():
    A = assemble_s_c(20.0, 2.0, 10).entries
    assert np.array_equal(A, A.T)
    assert np.all(A[1::2, :][:, 0::2] == 0)


@pytest.mark.parametrize("Z", [5.0, 50.0])
def test_zero_eigenvalue_at_critical_activity(Z):
    assert abs(eigenvalues(assemble_s_c(solve_p0(Z), Z, 64)).leading) < 1e-6


def test_mu_prime_matches_finite_difference():
    Z = 20.0
    P0 = solve_p0(Z)
    e = 1e-4 * P0
    lead = lambda P: eigenvalues(assemble_s_c(P, Z, 64)).leading.real
    fd = (lead(P0 + e) - lead(P0 - e)) / (2 * e)
    assert mu_prime(Z) == pytest.approx(fd, rel=1e-3)


@given(st.integers(0, 10 ** 6))
def test_s_c_commutator_vanishes(seed):
    g = Grid(128)
    rng = np.random.default_rng(seed)
    u1, u2 = band_limited(g, rng), band_limited(g, rng)
    P, Z = float(rng.uniform(1, 50)), float(rng.uniform(0.5, 20))
    assert abs(adjoint_commutator(ModelParams(Z=Z, P=P), u1, u2)) < 1e-10


def test_apply_s_c_agrees_with_matrix():
    g = Grid(512)
    P, Z = 10.0, 2.0
    A = assemble_s_c(P, Z, 4).entries
    for j in range(1, 5):
        Su = apply_s_c(basis_fn(j, g), ModelParams(Z=Z, P=P))
        for i in range(1, 5):
            got = 2 * inner(Field(g, basis_values(i, g.nodes), "pressure", check=False),
                            Field(g, Su, "pressure"))
            assert got == pytest.approx(A[i - 1, j - 1], abs=2e-3 * max(1, abs(A[i - 1, j - 1])))


def test_apply_t_c_agrees_with_matrix(wave, t_c):
    # direct grid operator (banded pressure solves) vs Galerkin quadrature (analytic pressures)
    g = wave.grid
    for j in (1, 2, 3):
        Tu = apply_t_c(basis_fn(j, g), wave)
        for i in (1, 2, 3):
            got = 2 * g.weights @ (basis_values(i, g.nodes) * Tu)
            ref = t_c.entries[i - 1, j - 1]
            assert got == pytest.approx(ref, abs=5e-3 * max(1, abs(ref)))


def test_t_c_reduces_to_s_c_at_zero_speed():
    Z = 50.0
    tw = exact_tw(0.0, Z, grid=Grid(128))
    assert np.abs(assemble_t_c(tw, 16).entries - assemble_s_c(solve_p0(Z), Z, 16).entries).max() < 1e-12


def test_d_part_is_linear_in_speed(t_c):
    half = assemble_t_c(exact_tw(0.025, 50.0, grid=Grid(256)), 64)
    r = np.abs(d_part(t_c)).sum(axis=1).max() / np.abs(d_part(half)).sum(axis=1).max()
    assert r == pytest.approx(2.0, rel=0.05)
    assert np.abs(d_part(t_c) - d_part(t_c).T).max() > 1.0
    with pytest.raises(DomainError):
        d_part(assemble_s_c(1.0, 1.0, 4))


def test_t_c_eigenvalues_left_half_plane(t_c):
    ev = eigenvalues(t_c).eigenvalues
    assert ev[0].real < 0
    assert ev[0].real == pytest.approx(-math.pi ** 2 * 0.05 ** 2 / 24, rel=0.2)
    assert np.all(np.diff(ev.real) <= 0)


def test_gershgorin_records(t_c):
    Z = 50.0
    s = gershgorin_check(assemble_s_c(solve_p0(Z), Z, 64))
    assert s.cond1 and s.cond2 and s.cond3 and s.cond4
    assert s.discs_left == 64
    t = gershgorin_check(t_c)
    assert t.cond2 and t.rho < RHO_BOUND and t.cond3
    rec = t.as_dict()
    assert json.dumps(rec) and len(rec["Q"]) == 64


def test_gershgorin_detects_heavy_off_diagonal(t_c):
    B = t_c.entries.copy()
    off = ~np.eye(64, dtype=bool)
    B[off] *= 100
    rec = gershgorin_check(GalerkinMatrix(64, B, "T_C"))
    assert not rec.cond2 and not rec.cond3


def test_resolvent_norm_limits(t_c):
    assert resolvent_norm(t_c, 1e4) == pytest.approx(1e-4, rel=1e-3)
    lead = eigenvalues(t_c).leading
    assert resolvent_norm(t_c, lead + 1e-5) * 1e-5 == pytest.approx(1.0, rel=0.05)
    with pytest.raises(DomainError):
        resolvent_norm(t_c, lead)


def test_resolvent_sampling_and_report(t_c, tmp_path):
    samples, sup = sample_resolvent(t_c, np.array([0.0, 1.0]), np.array([-1.0, 0.0, 1.0]))
    assert len(samples) == 6 and sup == max(s for _, s in samples)
    rep = spectrum_report(t_c, resolvent=True, re=np.array([0.0]), im=np.array([0.0]))
    data = json.loads(rep.to_json(tmp_path / "s.json"))
    assert data["schema"] == 1 and len(data["eigenvalues"]) == 64


def test_matrix_validation():
    with pytest.raises(DomainError):
        GalerkinMatrix(3, np.zeros((2, 2)), "S_C")
    with pytest.raises(DomainError):
        GalerkinMatrix(2, np.array([[np.nan, 0], [0, 0]]), "S_C")
    with pytest.raises(DomainError):
        eigenvalues(GalerkinMatrix(600, np.zeros((600, 600)), "S_C"))
    with pytest.raises(DomainError):
        assemble_s_c(1.0, 1.0, 1)
