import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ksmotility.dynamics import (
    CellState,
    bernoulli,
    decay_rate,
    deviation_norms,
    dt_max,
    linear_part,
    nonlinear_part,
    rhs_model_c,
    simulate,
    step_c,
    stiff_limit_sweep,
    stiff_params,
)
from ksmotility.errors import DomainError
from ksmotility.numerics import Field, Grid, ModelParams, band_limited, mass
from ksmotility.travelingwave import exact_tw


def _ones(g):
    return Field(g, np.ones(g.n + 1), "myosin")


def test_bernoulli_values():
    assert bernoulli(0.0) == 1.0
    z = np.array([-3.0, 1e-9, 2.0])
    assert np.allclose(bernoulli(z), z / np.expm1(z))


def test_constant_state_is_fixed():
    g = Grid(64)
    tr = simulate(CellState(_ones(g)), ModelParams(Z=1, P=5), 0.05, 10 * g.h ** 2, 10)
    assert np.abs(tr.states[-1].m.values - 1).max() < 1e-12


@given(st.integers(0, 1000), st.floats(0.5, 8.0))
def test_mass_is_conserved(seed, P):
    g = Grid(64)
    m = 1 + 0.3 * band_limited(g, np.random.default_rng(seed)).values
    tr = simulate(CellState(Field(g, m, "myosin")), ModelParams(Z=1, P=P), 0.02, 10 * g.h ** 2, 5)
    assert max(abs(v - 1) for v in tr.step_mass) < 1e-12
    assert abs(mass(tr.states[-1].m) - 1) < 1e-12


@given(st.integers(0, 1000), st.sampled_from([(5.0, 1.0), (50.0, 10.0), (2.0, 0.1)]))
def test_rhs_splits_into_linear_and_nonlinear_parts(seed, pz):
    # F(1 + u) = S u + Psi(u) exactly for the centred flux
    P, Z = pz
    g = Grid(128)
    u = Field(g, 0.1 * band_limited(g, np.random.default_rng(seed)).values)
    p = ModelParams(Z=Z, P=P)
    F = rhs_model_c(Field(g, 1 + u.values, "myosin"), p, flux="centered").values
    split = linear_part(u, p).values + nonlinear_part(u, p).values
    assert np.abs(F - split).max() < 1e-8


def test_fitted_flux_keeps_wave_in_equilibrium():
    tw = exact_tw(0.05, 50.0, grid=Grid(256))
    assert tw.residual < 1e-8
    assert np.abs(rhs_model_c(tw.m_T, tw.params).values).max() < 1e-7


def test_unknown_flux_rejected():
    g = Grid(16)
    with pytest.raises(DomainError):
        rhs_model_c(_ones(g), ModelParams(Z=1, P=1), flux="upwind")


def test_mode_two_decay_rate():
    g = Grid(256)
    Z, P = 1.0, 5.0
    w2 = 4 * math.pi ** 2
    expected = -w2 + (P / Z) / (1 + 1 / (w2 * Z))
    m = 1 + 1e-3 * np.cos(2 * np.pi * g.nodes)
    tr = simulate(CellState(Field(g, m, "myosin")), ModelParams(Z=Z, P=P), 0.2, 10 * g.h ** 2, 20)
    fit = decay_rate(tr, _ones(g))
    assert fit.decaying
    assert fit.rate == pytest.approx(expected, rel=0.02)


def test_step_c_checks_time_step():
    g = Grid(32)
    st0 = CellState(_ones(g))
    nxt = step_c(st0, ModelParams(Z=1, P=2), 5 * g.h ** 2)
    assert nxt.t == pytest.approx(5 * g.h ** 2)
    with pytest.raises(DomainError):
        step_c(st0, ModelParams(Z=1, P=2), 20 * g.h ** 2)
    with pytest.raises(DomainError):
        simulate(st0, ModelParams(Z=1, P=2), 0.1, 0.0)


def test_dt_max():
    g = Grid(10)
    assert dt_max(g, 0.0) == pytest.approx(0.1)
    assert dt_max(g, np.array([0.0, -100.0])) == pytest.approx(0.25 * 0.1 / 100)


def test_model_b_centre_moves_with_wave():
    tw = exact_tw(0.05, 50.0, grid=Grid(128))
    dt = 10 * tw.grid.h ** 2
    tr = simulate(CellState(tw.m_T), ModelParams(Z=50.0, P=tw.P_T, variant="B"), 0.2, dt, 100)
    end = tr.states[-1]
    assert end.c / (0.05 * end.t) == pytest.approx(1.0, abs=1e-3)
    assert deviation_norms(tr, tw.m_T).max() < 1e-8


def test_model_a_equilibrium_length():
    # constant myosin is an equilibrium when L^2 - L + P = 0
    g = Grid(64)
    P = 0.2
    L = 0.5 * (1 + math.sqrt(1 - 4 * P))
    p = ModelParams(Z=1, P=P, K=2.0, variant="A")
    tr = simulate(CellState(_ones(g), L=L), p, 0.3, 10 * g.h ** 2, 50)
    assert tr.states[-1].L == pytest.approx(L, abs=1e-12)
    tr = simulate(CellState(_ones(g), L=1.0), p, 3.0, 10 * g.h ** 2, 50)
    Ls = [s.L for s in tr.states]
    assert abs(Ls[-1] - L) < abs(Ls[0] - L) / 5


def test_stiff_params_and_floor():
    p = stiff_params(1.0, 2.0, 5.0, 0.1)
    assert (p.P, p.K, p.variant) == (pytest.approx(0.2), pytest.approx(50.0), "A")
    with pytest.raises(DomainError):
        stiff_params(1.0, 2.0, 5.0, 0.005)


def test_stiff_limit_sweep_halves_deviation():
    g = Grid(64)
    x = g.nodes
    m0 = Field(g, 1 + 0.3 * np.sin(np.pi * x) + 0.2 * np.cos(2 * np.pi * x), "myosin")
    rows = stiff_limit_sweep(m0, 1.0, 1.0, 5.0, [0.1, 0.05], 0.2, 5 * g.h ** 2)
    assert rows[0].dev_l2 / rows[1].dev_l2 == pytest.approx(2.0, abs=0.3)
    assert all(r.dev_length < 2 * r.eps for r in rows)


def test_cell_state_validation():
    g = Grid(16)
    with pytest.raises(DomainError):
        CellState(_ones(g), L=-1.0)


def test_trajectory_export(tmp_path):
    g = Grid(16)
    m = 1 + 0.1 * np.cos(2 * np.pi * g.nodes)
    tr = simulate(CellState(Field(g, m, "myosin")), ModelParams(Z=1, P=1), 0.01, 10 * g.h ** 2, 10)
    tr.export(tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["scheme"]["flux"] == "fitted"
    assert len(man["snapshots"]) == len(tr.states)
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,c,L,mass,vleft,vright" and len(lines) == len(tr.states) + 1


def test_decay_fit_needs_snapshots():
    g = Grid(16)
    tr = simulate(CellState(_ones(g)), ModelParams(Z=1, P=1), 0.01, 10 * g.h ** 2, 100)
    with pytest.raises(DomainError):
        decay_rate(tr, _ones(g))
