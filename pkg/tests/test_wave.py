import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab.bumps import QuinticBump
from blowuplab.config import SolverConfig
from blowuplab.profiles import ModelParams, lorentz_soliton, lorentz_soliton_dt, ode_solution
from blowuplab.simvars import FieldSnapshot
from blowuplab.wave import (
    BlowupFitError,
    BlowupSurface,
    BlowupTimeEstimator,
    build_surface,
    estimate_blowup_time,
    fit_blowup_time,
    simulate,
    snapshot_from,
    step,
)


def test_config_validation():
    for bad in [dict(cfl=1.5), dict(u_max=0), dict(dt_min=0), dict(boundary="open"), dict(boundary="dirichlet")]:
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_zero_stays_zero(P1):
    cfg = SolverConfig(cells=50, domain=1.0, boundary="reflect")
    s = snapshot_from(P1, cfg, lambda x: 0 * x)
    for _ in range(20):
        s = step(s, cfg)
    assert s.t > 0 and not np.any(s.u) and not np.any(s.ut)


def test_zero_data_empty_surface(P1):
    cfg = SolverConfig(cells=40, domain=1.0, boundary="reflect", t_max=1.0)
    surf, _ = build_surface(snapshot_from(P1, cfg, lambda x: 0 * x), cfg, [0.0])
    assert len(surf) == 0 and surf.report["empty"] and surf.report["omitted"]


def test_fit_exact_ode_trace(P1):
    t = 1 - np.logspace(0, -5, 4000)
    fit = fit_blowup_time(t, ode_solution(P1, 1.0, t), P1.p)
    assert abs(fit.T - 1.0) < 1e-6


def test_fit_rejects_flat_trace():
    t = np.linspace(0, 1, 50)
    with pytest.raises(BlowupFitError):
        fit_blowup_time(t, np.zeros_like(t), 3.0)


def test_estimate_from_histories(P1):
    x = np.linspace(-0.8, 1.0, 37)
    hist = [
        FieldSnapshot(x, lorentz_soliton(P1, 1, [0.5], 0.0, 1.0, x, t), lorentz_soliton_dt(P1, 1, [0.5], 0.0, 1.0, x, t), t, P1)
        for t in 0.6 - np.logspace(math.log10(0.6), -4, 400)
    ]
    fit = estimate_blowup_time(hist, -0.8)
    assert abs(fit.T - 0.6) < 1e-3
    zero = [FieldSnapshot(x, 0 * x, 0 * x, t, P1) for t in (0.0, 0.1, 0.2)]
    with pytest.raises(BlowupFitError):
        estimate_blowup_time(zero, 0.0)


def test_estimator_wrapper(P1):
    t = np.linspace(0.0, 0.999, 500)
    est = BlowupTimeEstimator(p=3.0).fit(t, ode_solution(P1, 1.0, t))
    assert est.T_ == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(est.predict(t[-5:]), ode_solution(P1, 1.0, t[-5:]), rtol=1e-6)


def test_ode_data_blow_up_at_T(P1, frozen):
    cfg = SolverConfig(boundary="reflect", domain=1.0, cells=100)
    u0 = ode_solution(P1, 1.0, 0.0)
    data = snapshot_from(P1, cfg, lambda x: 0 * x + u0, lambda x: 0 * x + P1.rate * u0)
    surf, run = build_surface(data, cfg, [0.0])
    assert abs(surf.T[0] - frozen["ode_blowup_time"]) < 1e-3
    # the fitted time never precedes the last finite sample
    assert surf.T[0] >= run.probe_t[0][-1]


def test_radial_ode_data(P3):
    cfg = SolverConfig(boundary="reflect", domain=1.0, cells=50)
    u0 = ode_solution(P3, 1.0, 0.0)
    data = snapshot_from(P3, cfg, lambda r: 0 * r + u0, lambda r: 0 * r + P3.rate * u0)
    surf, _ = build_surface(data, cfg, [0.0, 0.5])
    assert np.allclose(surf.T, 1.0, atol=1e-3)


def test_lorentz_second_order(P1):
    """Sup error against the closed form at t = 0.45 (max|u| < 1e3) under (h, dt) refinement."""
    d, t_end = 0.5, 0.45
    errs = []
    for cells in (100, 200, 400):
        cfg = SolverConfig(
            boundary="dirichlet", pin=(1, (d,), 0.0, 1.0), domain=1.0, cells=cells,
            ode_cfl=0.02 * 100 / cells, t_max=t_end,
        )
        data = snapshot_from(P1, cfg, lambda x: lorentz_soliton(P1, 1, [d], 0.0, 1.0, x, 0.0),
                             lambda x: lorentz_soliton_dt(P1, 1, [d], 0.0, 1.0, x, 0.0))
        run = simulate(data, cfg)
        f = run.final
        assert f.t == pytest.approx(t_end) and np.max(np.abs(f.u)) < 1e3
        errs.append(np.max(np.abs(f.u - lorentz_soliton(P1, 1, [d], 0.0, 1.0, f.grid, f.t))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 1.9)


def test_planar_surface_lipschitz_data(P1):
    cfg = SolverConfig(boundary="dirichlet", pin=(1, (-0.3,), 0.0, 1.0), domain=1.0, cells=300, u_max=1e3)
    data = snapshot_from(P1, cfg, lambda x: lorentz_soliton(P1, 1, [-0.3], 0.0, 1.0, x, 0.0),
                         lambda x: lorentz_soliton_dt(P1, 1, [-0.3], 0.0, 1.0, x, 0.0))
    surf, _ = build_surface(data, cfg, np.linspace(-0.3, 0.3, 5))
    assert np.max(np.abs(surf.T - (1 - 0.3 * surf.x))) < 2e-3


@settings(max_examples=10)
@given(st.floats(0.2, 0.6), st.floats(-0.3, 0.3))
def test_finite_speed_of_propagation(R, a):
    P = ModelParams()
    cfg = SolverConfig(boundary="reflect", domain=1.0, cells=200, t_max=0.15)
    base = lambda x: 0.5 * np.cos(x)
    extra = QuinticBump(a + R + 0.25, 0.2)
    d1 = snapshot_from(P, cfg, base)
    d2 = snapshot_from(P, cfg, lambda x: base(x) + extra(x))
    f1, f2 = simulate(d1, cfg).final, simulate(d2, cfg).final
    inside = np.abs(f1.grid - a) < R - f1.t - 2 * f1.h
    # the discrete stencil leaks slightly past the light cone
    assert np.max(np.abs(f1.u - f2.u)[inside], initial=0.0) < 1e-9


def test_generic_negative_energy_bump_surface(P1):
    cfg = SolverConfig(boundary="sponge", domain=2.0, cells=400, u_max=1e3)
    b = QuinticBump(0.0, 1.2)
    data = snapshot_from(P1, cfg, lambda x: 1.5 * P1.kappa0 * b(x))
    surf, _ = build_surface(data, cfg, [-0.2, 0.0, 0.2])
    assert len(surf) == 3 and np.all(np.isfinite(surf.T))


def test_surface_type(P1):
    s = BlowupSurface(((0.5, 1.0, 0.0), (0.0, 2.0, 0.1)), P1)
    assert list(s.x) == [0.0, 0.5]
    back = BlowupSurface.from_table(s.table()[1], P1)
    assert back.samples == s.samples
    with pytest.raises(ValueError):
        BlowupSurface(((0.0, math.inf, 0.0),), P1)
    with pytest.raises(ValueError):
        BlowupSurface(((0.0, -1.0, 0.0),), P1)
