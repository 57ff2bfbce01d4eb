import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab.bumps import QuinticBump
from blowuplab.config import SolverConfig
from blowuplab.geometry import (
    cone_test,
    gradient_vs_d,
    lipschitz_report,
    local_min_report,
    perturb,
    rigidity_experiment,
    stability_experiment,
)
from blowuplab.profiles import ModelParams, ProfileParams, lorentz_soliton, lorentz_soliton_dt
from blowuplab.wave import BlowupSurface, snapshot_from


def surface(x, T, sigma=0.0, params=ModelParams()):
    x = np.asarray(x, float)
    T = np.asarray(T, float)
    return BlowupSurface(tuple(zip(x, T, np.broadcast_to(sigma, x.shape))), params)


X = np.linspace(-0.5, 0.5, 41)


# Lipschitz and cone checks


def test_planar_surface_is_lipschitz():
    rep = lipschitz_report(surface(X, 1.0 + 0.4 * X))
    assert rep["passed"]
    assert rep["max_ratio"] == pytest.approx(0.4, abs=1e-12)
    assert rep["min_ratio"] == pytest.approx(0.4, abs=1e-12)


def test_jump_fails_lipschitz():
    T = 1.0 + 0.2 * (X > 0.01)
    rep = lipschitz_report(surface(X, T))
    assert not rep["passed"]
    assert rep["max_ratio"] > 1.0
    assert rep["worst_excess"] > 0


def test_sigma_widens_lipschitz_allowance():
    T = 1.0 + 0.2 * (X > 0.01)
    assert lipschitz_report(surface(X, T, sigma=0.1))["passed"]


def test_cone_on_plane():
    surf = surface(X, 1.0 + 0.5 * X)
    assert cone_test(surf, 0.0, 0.75)
    assert not cone_test(surf, 0.0, 0.3)


def test_cone_fails_at_corner():
    surf = surface(X, 1.0 - np.abs(X))
    assert not cone_test(surf, 0.0, 0.75)
    # a valley corner opens upward, so any cone fits under it
    assert cone_test(surface(X, 1.0 + 0.9 * np.abs(X)), 0.0, 0.1)


def test_cone_rejects_bad_arguments():
    surf = surface(X, 1.0 + 0 * X)
    with pytest.raises(ValueError):
        cone_test(surf, 0.0, 1.0)
    with pytest.raises(ValueError):
        cone_test(surf, 2.0, 0.5)


@given(
    st.lists(st.floats(-0.99, 0.99), min_size=2, max_size=12),
    st.floats(-0.4, 0.4),
)
def test_cone_holds_for_sublipschitz_surfaces(slopes, x0):
    # piecewise linear with every slope below delta0 in modulus
    x = np.linspace(-0.5, 0.5, len(slopes) + 1)
    T = 2.0 + np.concatenate([[0.0], np.cumsum(np.diff(x) * np.array(slopes))])
    surf = surface(x, T)
    assert lipschitz_report(surf)["passed"]
    assert cone_test(surf, x0, 0.995)


# gradient against fitted velocity


def test_gradient_matches_planar_slope():
    rep = gradient_vs_d(surface(X, 1.0 + 0.3 * X), 0.0, [0.3])
    assert rep["gap"] < 1e-12
    assert all(g < 1e-12 for g in rep["gaps"])


def test_gradient_detects_wrong_velocity():
    rep = gradient_vs_d(surface(X, 1.0 + 0.3 * X), 0.0, [0.5])
    assert rep["gap"] == pytest.approx(0.2, abs=1e-12)


def test_gradient_gaps_shrink_on_smooth_surface():
    x = np.linspace(-0.4, 0.4, 161)
    x0 = 0.05
    T = 1.0 + 0.3 * x + 0.4 * x**2 + 0.5 * x**3
    exact = 0.3 + 0.8 * x0 + 1.5 * x0**2
    rep = gradient_vs_d(surface(x, T), x0, [exact])
    assert all(b < a for a, b in zip(rep["gaps"], rep["gaps"][1:]))
    assert rep["gap"] < rep["gaps"][-1]


def test_gradient_rejects_thin_stencils():
    x = np.array([-0.5, 0.0, 0.5])
    with pytest.raises(ValueError):
        gradient_vs_d(surface(x, 1.0 + 0 * x), 0.0, [0.0], radii=[0.1, 0.05])
    with pytest.raises(ValueError):
        gradient_vs_d(surface(x, 1.0 + 0 * x), 0.5, [0.0])


# local minima


def test_single_minimum_of_paraboloid():
    surf = surface(X, 1.0 + (X - 0.1) ** 2)
    rep = local_min_report(surf, {0.1: ProfileParams(1, (0.0,), 0.0)})
    assert rep["count"] == 1
    (m,) = rep["minima"]
    assert m["x"] == pytest.approx(0.1)
    assert m["grad"] < 1e-12
    assert m["d_norm"] == 0.0


def test_plane_has_no_interior_minimum():
    assert local_min_report(surface(X, 1.0 + 0.2 * X))["count"] == 0
    assert local_min_report(surface(X, 1.0 + 0 * X))["count"] == 0


# rigidity


@pytest.fixture(scope="module")
def rigidity_runs():
    P = ModelParams()
    cfg = SolverConfig()
    out = {}
    for M in (160, 320):
        out[M] = {
            "soliton": rigidity_experiment(P, 0.3, 1.6, None, M=M, ds=2.0, cfg=cfg),
            "seeds": [rigidity_experiment(P, 0.3, 1.6, k, M=M, ds=2.0, cfg=cfg) for k in range(2)],
        }
    return out


def test_rigidity_soliton_extension_is_stationary(rigidity_runs):
    rep = rigidity_runs[320]["soliton"]
    assert rep["hypothesis_holds"] and rep["initial_deviation"] == 0.0
    assert not rep["diverged"]
    assert rep["sup_deviation"] < 1e-10


def test_rigidity_outer_bumps_stay_outside(rigidity_runs):
    floor = 1e-10
    for k in range(2):
        coarse = rigidity_runs[160]["seeds"][k]
        fine = rigidity_runs[320]["seeds"][k]
        assert fine["hypothesis_holds"] and abs(fine["bump"]["amplitude"]) >= 0.05
        # the outer region is swept out of the ball along outgoing characteristics
        assert fine["outer_deviation"] < 1e-4
        assert fine["sup_deviation"] < 1e-4
        assert fine["sup_deviation"] <= max(coarse["sup_deviation"], floor)
    sides = {np.sign(r["bump"]["center"]) for r in rigidity_runs[320]["seeds"]}
    assert sides == {-1.0, 1.0}


def test_rigidity_intruding_support_is_flagged():
    rep = rigidity_experiment(ModelParams(), 0.3, 1.6, 0, M=160, ds=1.0, support=(0.6, 1.4))
    assert not rep["hypothesis_holds"]
    assert rep["initial_deviation"] > 0
    assert rep["sup_deviation"] > 1e-3


def test_rigidity_argument_checks():
    P = ModelParams()
    with pytest.raises(ValueError):
        rigidity_experiment(P, 0.3, 1.0, None, M=64)
    with pytest.raises(ValueError):
        rigidity_experiment(P, 0.7, 1.6, None, M=64)
    with pytest.raises(ValueError):
        rigidity_experiment(ModelParams(3, 2.0), 0.3, 1.6, None, M=64)


# stability


def soliton_data(cells=200):
    P = ModelParams()
    e, d, xs, Ts = 1, 0.5, 0.0, 1.0
    cfg = SolverConfig(boundary="dirichlet", pin=(e, (d,), xs, Ts), cells=cells, domain=1.0, u_max=1e3)
    data = snapshot_from(
        P,
        cfg,
        lambda x: lorentz_soliton(P, e, [d], xs, Ts, x, 0.0),
        lambda x: lorentz_soliton_dt(P, e, [d], xs, Ts, x, 0.0),
    )
    return data, cfg


def test_perturb_zero_is_identity_and_norm_is_unit():
    data, _ = soliton_data()
    bump = QuinticBump(0.0, 0.3)
    assert perturb(data, bump, 0.0) is data
    a = perturb(data, bump, 1e-3)
    b = perturb(data, bump, 2e-3)
    np.testing.assert_allclose(b.u - data.u, 2 * (a.u - data.u), rtol=1e-9, atol=1e-15)
    np.testing.assert_array_equal(a.ut, data.ut)


def test_stability_zero_eps_reproduces_base():
    data, cfg = soliton_data(400)
    rep = stability_experiment(data, cfg, [0.0, 0.01], [-0.1, 0.0, 0.1], QuinticBump(0.0, 0.3), M=100)
    zero = next(c for c in rep["cases"] if c["eps"] == 0.0)
    assert zero["max_dT"] == 0.0 and zero["focus_dT"] == 0.0
    assert zero["surface"] == rep["base"]["surface"]
    small = next(c for c in rep["cases"] if c["eps"] == 0.01)
    assert 0 < small["focus_dT"] < 1e-2
    assert rep["base"]["cone_pass"] and rep["base"]["fit_pass"]
    assert math.isfinite(small["max_dT"])
