import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blowuplab.profiles import ModelParams, ProfileParams, kappa, lorentz_soliton, lorentz_soliton_dt, ode_solution
from blowuplab.simvars import (
    FieldSnapshot,
    SelfSimFrame,
    ball_grid,
    ball_integral,
    from_selfsim,
    h_distance_to_profile,
    h_norm,
    profile_frame,
    rho_weight,
    to_selfsim,
)


def _frame(P, w, ws=None, M=400):
    g = ball_grid(P, M)
    w = np.broadcast_to(w(g) if callable(w) else w, g.shape).astype(float)
    ws = np.zeros_like(g) if ws is None else ws(g)
    return SelfSimFrame(g, w, ws, 0.0, P)


def test_frame_validation(P1):
    g = ball_grid(P1, 20)
    with pytest.raises(ValueError):
        SelfSimFrame(np.append(g, 1.0), np.ones(21), np.zeros(21), 0.0, P1)
    with pytest.raises(ValueError):
        SelfSimFrame(g, np.full(20, np.nan), np.zeros(20), 0.0, P1)
    with pytest.raises(ValueError):
        SelfSimFrame(g, np.ones(19), np.zeros(20), 0.0, P1)
    with pytest.raises(ValueError):
        FieldSnapshot(np.array([0.0, 2.0, 1.0]), np.zeros(3), np.zeros(3), 0.0, P1)


def test_grid_is_open_ball(P1, P3):
    for P in (P1, P3):
        g = ball_grid(P, 50)
        assert np.all(np.abs(g) < 1) and np.all(np.diff(g) > 0)


def test_rho_values(P1, frozen):
    assert rho_weight(P1, 0.0) == 1.0
    assert rho_weight(P1, 0.6) == pytest.approx(0.64, rel=1e-15)
    g = ball_grid(P1, 400)
    assert ball_integral(P1, g, np.ones_like(g)) == pytest.approx(frozen["mass_rho"], abs=1e-10)


def test_h_norm_values(P1, frozen):
    assert h_norm(_frame(P1, 1.0)) == pytest.approx(frozen["h_norm_one"], abs=1e-10)
    assert h_norm(_frame(P1, 0.0)) == 0.0
    f = _frame(P1, lambda y: np.sin(3 * y), lambda y: y**2)
    assert h_norm(f * 2.0) == pytest.approx(2 * h_norm(f), rel=1e-14)


def test_h_distance_values(P1, frozen):
    f = _frame(P1, P1.kappa0)
    assert h_distance_to_profile(f, ProfileParams(1, (0.0,))) == pytest.approx(0.0, abs=1e-12)
    assert h_distance_to_profile(f, ProfileParams(-1, (0.0,))) == pytest.approx(frozen["h_distance_flip"], abs=1e-9)
    prof = ProfileParams(-1, (0.4,), 0.2)
    g = ball_grid(P1, 300)
    assert h_distance_to_profile(profile_frame(P1, prof, g), prof) < 1e-12


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_h_norm_nonnegative(c):
    P = ModelParams()
    g = ball_grid(P, 60)
    w = np.polynomial.chebyshev.chebval(g, c[:3])
    ws = np.polynomial.chebyshev.chebval(g, c[3:])
    n = h_norm(SelfSimFrame(g, w, ws, 0.0, P))
    assert n >= 0
    if n == 0:
        assert np.allclose(w, 0) and np.allclose(ws, 0)


def test_h_norm_second_order(P1):
    exact = None
    vals = []
    for M in (100, 200, 400, 800):
        vals.append(h_norm(_frame(P1, lambda y: np.cos(2 * y) + y, lambda y: y**3, M)))
    errs = np.abs(np.diff(vals))
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders > 1.8)


def test_radial_h_norm_constant(P3):
    from scipy.integrate import quad

    mass, _ = quad(lambda r: 4 * math.pi * r * r * (1 - r * r) ** P3.alpha, 0, 1)
    assert h_norm(_frame(P3, 1.0, M=800)) ** 2 == pytest.approx(mass, rel=1e-6)


def test_to_selfsim_ode(P1, P3):
    for P in (P1, P3):
        x = np.linspace(0 if P.N > 1 else -1, 1, 801)
        u = np.full_like(x, ode_solution(P, 1.0, 0.5))
        ut = np.full_like(x, P.rate * u[0] / 0.5)
        fr = to_selfsim(FieldSnapshot(x, u, ut, 0.5, P), 0.0, 1.0)
        assert np.allclose(fr.w, P.kappa0, atol=1e-12) and np.allclose(fr.ws, 0.0, atol=1e-12)
        assert fr.s == pytest.approx(math.log(2))


@pytest.mark.parametrize("d,x0", [(0.5, 0.0), (-0.3, 0.2)])
def test_soliton_fixed_by_transform(P1, d, x0):
    # any point of the singular line T(x) = T* + d (x - x*) works as a centre
    xs, Ts = 0.1, 1.0
    T0 = Ts + d * (x0 - xs)
    t = T0 - 0.1
    x = np.linspace(x0 - 0.15, x0 + 0.15, 3001)
    u = lorentz_soliton(P1, 1, [d], xs, Ts, x, t)
    ut = lorentz_soliton_dt(P1, 1, [d], xs, Ts, x, t)
    fr = to_selfsim(FieldSnapshot(x, u, ut, t, P1), x0, T0)
    assert np.max(np.abs(fr.w - kappa(P1, [d], fr.grid))) < 1e-8
    assert np.max(np.abs(fr.ws)) < 1e-7


def test_round_trip(P1):
    g = ball_grid(P1, 2000)
    fr = SelfSimFrame(g, kappa(P1, [0.3], g) + 0.1 * np.cos(2 * g), 0.2 * np.sin(g), math.log(4), P1)
    snap = from_selfsim(fr, 0.1, 1.0)
    back = to_selfsim(snap, 0.1, 1.0, grid=g[200:-200])
    assert np.max(np.abs(back.w - fr.w[200:-200])) < 1e-8
    assert np.max(np.abs(back.ws - fr.ws[200:-200])) < 1e-8


def test_from_selfsim_ode(P1):
    g = ball_grid(P1, 100)
    snap = from_selfsim(SelfSimFrame(g, np.full_like(g, P1.kappa0), np.zeros_like(g), 1.0, P1), 0.0, 1.0)
    assert np.allclose(snap.u, ode_solution(P1, 1.0, snap.t), rtol=1e-14)


def test_to_selfsim_errors(P1):
    x = np.linspace(-1, 1, 101)
    snap = FieldSnapshot(x, np.ones_like(x), np.zeros_like(x), 0.0, P1)
    with pytest.raises(ValueError):
        to_selfsim(snap, 0.0, 0.0)
    with pytest.raises(ValueError):
        to_selfsim(snap, 0.5, 1.0)
    alive = np.ones(101, bool)
    alive[50] = False
    dead = FieldSnapshot(x, np.ones_like(x), np.zeros_like(x), 0.0, P1, alive)
    with pytest.raises(ValueError):
        to_selfsim(dead, 0.0, 0.5)
