import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from ksmotility.errors import ConvergenceError, DomainError, SingularParameterError
from ksmotility.numerics import Grid, mass, norm
from ksmotility.travelingwave import (
    _WaveSystem,
    _initial_vector,
    asymptotic_coefficients,
    asymptotic_tw,
    exact_tw,
    p0_higher_branches,
    p0_residual,
    p2_value,
    solve_p0,
    stationary_wave,
    trace_bifurcation,
    write_bifurcation_csv,
)


def _p0_oracle(Z):
    # independent route: tan(w)/w = 1 + 4 Z w^2 on (0, pi/2), or tanh(v)/v = 1 - 4 Z v^2
    if Z > 1 / 12:
        w = brentq(lambda w: math.tan(w) / w - 1 - 4 * Z * w * w, 1e-6, math.pi / 2 - 1e-15, xtol=1e-15)
        return math.tan(w) / w
    v = brentq(lambda v: math.tanh(v) / v - 1 + 4 * Z * v * v, 1e-6, 50.0, xtol=1e-15)
    return math.tanh(v) / v


@pytest.mark.parametrize("Z", [0.01, 0.05, 0.2, 1.0, 5.0, 50.0])
def test_p0_matches_independent_root(Z):
    assert solve_p0(Z) == pytest.approx(_p0_oracle(Z), rel=1e-9)


@given(st.floats(0.0834, 1e3))
def test_p0_residual_small(Z):
    P0 = solve_p0(Z)
    assert P0 > 1
    assert p0_residual(P0, Z) < 1e-10


@given(st.floats(1e-3, 0.0832))
def test_p0_below_one_for_small_Z(Z):
    P0 = solve_p0(Z)
    assert 0 < P0 < 1
    assert p0_residual(P0, Z) < 1e-10


def test_p0_singular_and_domain():
    with pytest.raises(SingularParameterError):
        solve_p0(1 / 12)
    with pytest.raises(DomainError):
        solve_p0(-1.0)


def test_p0_large_Z_expansion():
    for Z in (20.0, 80.0):
        assert abs(solve_p0(Z) - (math.pi ** 2 * Z + 1 - 8 / math.pi ** 2)) < 1e-3


def test_higher_branches_increase():
    Z = 2.0
    P = p0_higher_branches(Z, 3)
    assert solve_p0(Z) < P[0] < P[1] < P[2]
    for Pj in P:
        w = math.sqrt(Pj - 1) / (2 * math.sqrt(Z))
        assert abs(math.tan(w) - Pj * w) / (Pj * w) < 1e-9


def test_p2_large_Z_limit():
    Z = 50.0
    assert p2_value(solve_p0(Z), Z) == pytest.approx(math.pi ** 2 * Z / 48, rel=0.05)


def test_p2_singular():
    with pytest.raises(SingularParameterError):
        p2_value(1.0, 1.0)


def test_asymptotic_wave_basics():
    g = Grid(256)
    tw = asymptotic_tw(0.05, 5.0, g)
    assert mass(tw.m_T) == pytest.approx(1.0, abs=1e-12)
    a = asymptotic_coefficients(5.0)
    assert tw.P_T == pytest.approx(a.P0 + 0.05 ** 2 * a.P2)
    with pytest.warns(UserWarning):
        asymptotic_tw(0.5, 5.0, g)


def test_asymptotic_profiles_are_real_below_singular_Z():
    a = asymptotic_coefficients(0.05)
    x = np.linspace(-0.5, 0.5, 5)
    assert a.P0 < 1
    assert np.all(np.isfinite(a.m1_values(x))) and np.all(np.isfinite(a.m2_values(x)))


def test_first_order_profile_matches_exact_wave():
    g = Grid(512)
    V, Z = 1e-3, 5.0
    tw = exact_tw(V, Z, grid=g)
    m1 = asymptotic_coefficients(Z).m1_values(g.nodes)
    assert np.abs((tw.m_T.values - 1) / V - m1).max() < 5e-3


def test_exact_wave_residuals():
    g = Grid(256)
    tw = exact_tw(0.1, 5.0, grid=g)
    assert tw.newton_residual < 1e-11
    assert tw.residual < 1e-8
    assert tw.velocity() == pytest.approx(0.1, abs=1e-12)
    assert np.log(tw.m_T.values) == pytest.approx(tw.log_lambda + tw.phi_T.values - 0.1 * g.nodes, abs=1e-12)


def test_reflection_symmetry():
    g = Grid(128)
    a = exact_tw(0.08, 5.0, grid=g)
    b = exact_tw(-0.08, 5.0, grid=g)
    assert np.abs(a.m_T.values - b.m_T.values[::-1]).max() < 1e-12
    assert a.P_T == pytest.approx(b.P_T, rel=1e-12)


def test_zero_velocity_is_stationary():
    tw = exact_tw(0.0, 5.0, grid=Grid(32))
    assert np.all(tw.m_T.values == 1.0)
    assert tw.P_T == solve_p0(5.0)
    assert stationary_wave(5.0, Grid(32)).P_T == tw.P_T


def test_analytic_jacobian_matches_finite_differences():
    g = Grid(32)
    Z, V = 5.0, 0.1
    off = solve_p0(Z)
    sys_ = _WaveSystem(g, Z, V, off)
    y = _initial_vector(asymptotic_tw(V, Z, g), g, off)
    J = sys_.jacobian(y).toarray()
    Jfd = sys_.jacobian_fd(y)
    assert np.abs(J - Jfd).max() < 1e-5 * max(1.0, np.abs(J).max())


def test_newton_iteration_limit():
    with pytest.raises(ConvergenceError):
        exact_tw(0.1, 5.0, grid=Grid(64), max_iter=0)


def test_trace_bifurcation(tmp_path):
    pts = trace_bifurcation(5.0, 0.1, 6, Grid(128))
    Vs = [p.V for p in pts]
    assert Vs == sorted(Vs) and len(pts) == 11
    for p, q in zip(pts, reversed(pts)):
        assert p.P_T == pytest.approx(q.P_T) and p.amplitude == pytest.approx(q.amplitude)
    assert all(p.P_T >= pts[5].P_T for p in pts)
    write_bifurcation_csv(pts, tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text().startswith("V,P_T,amplitude,residual,newton_iters")
    with pytest.raises(DomainError):
        trace_bifurcation(5.0, 0.1, 1)


def test_wave_amplitude_grows_with_speed():
    g = Grid(128)
    amps = []
    for V in (0.02, 0.04):
        m = exact_tw(V, 5.0, grid=g).m_T
        amps.append(norm(m.with_values(m.values - 1, kind="pressure")))
    assert amps[1] / amps[0] == pytest.approx(2.0, rel=0.05)
