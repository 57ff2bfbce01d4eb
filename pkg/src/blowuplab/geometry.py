"""Geometric checks on blow-up surfaces and the experiments built on them.

Surfaces are sampled along a line (``N == 1``) or along the radius.  All
tolerances are absolute unless a sigma is available, in which case the
per-sample uncertainties are added to it.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from .bumps import QuinticBump, seeded_bump
from .config import SolverConfig
from .modulation import FitError, fit_profile
from .profiles import ModelParams, ProfileParams
from .selfsim import SelfSimDivergence, evolve
from .simvars import FieldSnapshot, SelfSimFrame, ball_grid, to_selfsim
from .wave import BlowupSurface, build_surface, simulate

__all__ = [
    "lipschitz_report",
    "cone_test",
    "gradient_vs_d",
    "local_min_report",
    "probe_profiles",
    "rigidity_experiment",
    "stability_experiment",
    "perturb",
    "minimum_experiment",
]


def lipschitz_report(surf: BlowupSurface, tol: float = 1e-9) -> dict:
    """Largest difference quotient ``|T(x) - T(y)| / |x - y|`` over sample pairs.

    A pair passes when its quotient is at most ``1 + (sigma_x + sigma_y)/|x - y| + tol``.
    """
    x, T, sig = surf.x, surf.T, surf.sigma
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    i, j = np.triu_indices(x.size, 1)
    dx = np.abs(x[i] - x[j])
    keep = dx > 0
    i, j, dx = i[keep], j[keep], dx[keep]
    ratio = np.abs(T[i] - T[j]) / dx
    allowed = 1.0 + (sig[i] + sig[j]) / dx + tol
    k = int(np.argmax(ratio))
    worst = int(np.argmax(ratio - allowed))
    return {
        "max_ratio": float(ratio[k]),
        "argmax": [float(x[i[k]]), float(x[j[k]])],
        "min_ratio": float(ratio.min()),
        "worst_excess": float(ratio[worst] - allowed[worst]),
        "passed": bool(np.all(ratio <= allowed)),
    }


def _T_at(surf: BlowupSurface, x0: float) -> tuple[float, float]:
    x, T, sig = surf.x, surf.T, surf.sigma
    if not x[0] <= x0 <= x[-1]:
        raise ValueError("x0 lies outside the sampled hull")
    return float(np.interp(x0, x, T)), float(np.interp(x0, x, sig))


def cone_test(surf: BlowupSurface, x0: float, delta0: float, tol: float = 1e-9) -> bool:
    """``T(x) >= T(x0) - delta0 |x - x0|`` at every sample, up to sigmas and ``tol``."""
    if not 0.0 < delta0 < 1.0:
        raise ValueError("delta0 must lie in (0, 1)")
    T0, s0 = _T_at(surf, x0)
    lower = T0 - delta0 * np.abs(surf.x - x0) - (surf.sigma + s0) - tol
    return bool(np.all(surf.T >= lower))


def _slope(x, T):
    X = np.column_stack([np.ones_like(x), x])
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError("ill-conditioned stencil")
    return float(np.linalg.lstsq(X, T, rcond=None)[0][1])


def gradient_vs_d(
    surf: BlowupSurface, x0: float, fitted_d, radii: Sequence[float] | None = None
) -> dict:
    """Compare a numerical ``dT/dx(x0)`` with a fitted soliton velocity.

    The slope is the least-squares line through the samples within each
    radius (largest first); the last two are Richardson-combined assuming
    an ``O(r^2)`` error, which holds for stencils centred on ``x0``.
    """
    d = float(np.atleast_1d(np.asarray(fitted_d, float))[0])
    x, T = surf.x, surf.T
    if not x[0] < x0 < x[-1]:
        raise ValueError("x0 must be interior to the sampled hull")
    if radii is None:
        reach = min(x0 - x[0], x[-1] - x0)
        radii = [reach / 2**k for k in range(4)]
    radii = sorted((float(r) for r in radii), reverse=True)
    slopes, used = [], []
    for r in radii:
        m = np.abs(x - x0) <= r * (1 + 1e-12)
        left, right = np.sum(x[m] < x0), np.sum(x[m] > x0)
        if left < 1 or right < 1 or m.sum() < 3:
            break
        slopes.append(_slope(x[m] - x0, T[m]))
        used.append(r)
    if len(slopes) < 2:
        raise ValueError("ill-conditioned stencil: fewer than two usable radii")
    q = used[-2] / used[-1]
    limit = slopes[-1] + (slopes[-1] - slopes[-2]) / (q * q - 1.0)
    gaps = [abs(s - d) for s in slopes]
    return {
        "x0": float(x0),
        "fitted_d": d,
        "radii": used,
        "slopes": slopes,
        "gaps": gaps,
        "limit": float(limit),
        "gap": float(abs(limit - d)),
    }


def local_min_report(surf: BlowupSurface, fits: dict | None = None, tol: float = 1e-9) -> dict:
    """Discrete strict interior minima of ``T`` with their slopes and fitted velocities.

    ``fits`` optionally maps sample positions to fitted profiles; when given,
    ``|d|`` at each minimum measures the distance to ``+-kappa0``.
    """
    x, T = surf.x, surf.T
    if x.size < 3:
        raise ValueError("need at least 3 samples")
    out = []
    for i in range(1, x.size - 1):
        if T[i] < T[i - 1] - tol and T[i] < T[i + 1] - tol:
            grad = (T[i + 1] - T[i - 1]) / (x[i + 1] - x[i - 1])
            item = {"x": float(x[i]), "T": float(T[i]), "grad": float(abs(grad))}
            if fits is not None:
                key = min(fits, key=lambda k: abs(k - x[i])) if fits else None
                if key is not None and abs(key - x[i]) <= 1e-12 * max(1.0, abs(x[i])):
                    prof = fits[key]
                    item["fitted_d"] = list(prof.d)
                    item["d_norm"] = float(np.linalg.norm(prof.dvec))
            out.append(item)
    return {"minima": out, "count": len(out)}


def probe_profiles(
    data: FieldSnapshot,
    cfg: SolverConfig,
    surf: BlowupSurface,
    tau: float,
    M: int = 200,
    trust: float = 0.1,
) -> list[dict]:
    """Fit ``e kappa_star`` to ``w_{x, T(x)}`` at ``T(x) - tau`` for every sample of ``surf``.

    A second run captures the snapshots at the required times.
    """
    if len(surf) == 0:
        return []
    times = sorted({T - tau for T in surf.T})
    if times[0] <= data.t:
        raise ValueError("tau reaches back before the initial time")
    run = simulate(data, replace(cfg, t_max=times[-1]), capture_times=times, stop_when_probes_dead=False)
    by_time = {s.t: s for s in run.snapshots}
    out = []
    for x, T in zip(surf.x, surf.T):
        snap = by_time.get(T - tau)
        item = {"x": float(x), "T": float(T), "s": -math.log(tau)}
        if snap is None:
            item.update(ok=False, reason="snapshot not reached")
            out.append(item)
            continue
        try:
            frame = to_selfsim(snap, float(x), float(T), M=M)
            prof, q = fit_profile(frame, trust=trust)
            item.update(ok=True, e=prof.e, d=list(prof.d), nu=prof.nu, qnorm=q)
        except (ValueError, FitError) as exc:
            item.update(ok=False, reason=str(exc))
        out.append(item)
    return out


def perturb(data: FieldSnapshot, bump: QuinticBump, eps: float, velocity_share: float = 0.0) -> FieldSnapshot:
    """Add ``eps`` times the unit-norm bump (in ``H^1 x L^2``) to the data."""
    if eps == 0.0:
        return data
    b = bump.scaled(1.0)
    norm = b.energy_norm(velocity_share)
    f = b(data.grid) / norm
    cu, cv = math.sqrt(1.0 - velocity_share), math.sqrt(velocity_share)
    return FieldSnapshot(data.grid, data.u + eps * cu * f, data.ut + eps * cv * f, data.t, data.params)


def _stability_run(args):
    data, cfg, probes, tau, M, trust, delta0 = args
    surf, run = build_surface(data, cfg, probes)
    fits = probe_profiles(data, cfg, surf, tau, M, trust) if len(surf) else []
    cones = [cone_test(surf, float(x), delta0) for x in surf.x[1:-1]] if len(surf) >= 3 else []
    return surf, fits, cones


def stability_experiment(
    base_data: FieldSnapshot,
    cfg: SolverConfig,
    eps_grid: Sequence[float],
    probes: Sequence[float],
    bump: QuinticBump,
    focus: float = 0.0,
    tau: float = 0.05,
    M: int = 200,
    delta0: float = 0.75,
    trust: float = 0.1,
    velocity_share: float = 0.0,
    executor=None,
) -> dict:
    """Blow-up surfaces of ``base + eps * bump`` compared with the base surface.

    Reports, per ``eps``, the largest change of ``T`` over the probes, the
    change at the probe nearest ``focus``, cone tests at interior probes and
    profile fits at every probe.  ``executor`` (any ``concurrent.futures``
    executor) runs the perturbed cases concurrently.
    """
    eps_list = [float(e) for e in eps_grid]
    jobs = [(perturb(base_data, bump, e, velocity_share), cfg, probes, tau, M, trust, delta0) for e in [0.0] + eps_list]
    results = list(executor.map(_stability_run, jobs)) if executor else [_stability_run(j) for j in jobs]
    base_surf, base_fits, base_cones = results[0]
    xb, Tb, sb = base_surf.x, base_surf.T, base_surf.sigma
    kf = int(np.argmin(np.abs(xb - focus))) if len(base_surf) else None
    cases = []
    for eps, (surf, fits, cones) in zip(eps_list, results[1:]):
        common = np.intersect1d(xb, surf.x)
        ib = np.searchsorted(xb, common)
        ie = np.searchsorted(surf.x, common)
        dT = np.abs(surf.T[ie] - Tb[ib])
        case = {
            "eps": eps,
            "probes": len(surf),
            "max_dT": float(dT.max()) if dT.size else math.nan,
            "cone_pass": bool(all(cones)) and len(cones) > 0,
            "fit_pass": bool(fits) and all(f["ok"] for f in fits),
            "fits": fits,
            "surface": [list(r) for r in surf.samples],
        }
        if kf is not None and xb[kf] in surf.x:
            j = int(np.searchsorted(surf.x, xb[kf]))
            case["focus_dT"] = float(abs(surf.T[j] - Tb[kf]))
            case["focus_floor"] = float(surf.sigma[j] + sb[kf])
        cases.append(case)
    order = sorted(cases, key=lambda c: -c["eps"])
    seq = [c.get("focus_dT", math.nan) for c in order]
    floors = [c.get("focus_floor", math.nan) for c in order]
    monotone = all(
        (b < a) or (b <= fl) for a, b, fl in zip(seq[:-1], seq[1:], floors[1:])
    ) and not any(math.isnan(v) for v in seq)
    passing = [c["eps"] for c in cases if c["cone_pass"] and c["fit_pass"]]
    return {
        "focus": float(xb[kf]) if kf is not None else None,
        "base": {
            "surface": [list(r) for r in base_surf.samples],
            "fit_pass": bool(base_fits) and all(f["ok"] for f in base_fits),
            "cone_pass": bool(all(base_cones)) and len(base_cones) > 0,
        },
        "cases": cases,
        "focus_dT_by_eps": {str(c["eps"]): c.get("focus_dT") for c in order},
        "monotone_to_floor": bool(monotone),
        "largest_passing_eps": max(passing) if passing else None,
    }


def rigidity_experiment(
    params: ModelParams,
    d_star: float,
    A_star: float,
    extension_seed: int | None,
    M: int = 640,
    ds: float = 3.0,
    cfg: SolverConfig = SolverConfig(),
    support: tuple[float, float] = (1.2, 1.5),
    amplitude: tuple[float, float] = (0.05, 0.3),
) -> dict:
    """Persistence of ``kappa(d*)`` on ``|y| < 1`` under an outer extension.

    The data equal ``(kappa(d*), 0)`` on ``|y| < 1``; on ``1 <= |y| < A*`` they
    continue ``kappa(d*)`` plus a seeded quintic bump supported in ``support``
    (on the side chosen by the seed), or carry no bump when the seed is None.
    Ancient solutions cannot be simulated forward, so the report checks the
    forward consequence only: the sup deviation from ``kappa(d*)`` on the unit
    ball over ``ds``.  Support intruding into ``|y| < 1`` is flagged as a
    violation of the hypothesis.
    """
    if params.N != 1:
        raise ValueError("the rigidity experiment runs on the line")
    if not A_star > 1.0:
        raise ValueError("A* must exceed 1")
    if not abs(d_star) * A_star < 1.0:
        raise ValueError("kappa(d*) must stay regular on |y| < A*, need |d*| A* < 1")
    y = ball_grid(params, M, A_star)
    base = params.kappa0 * (1.0 - d_star**2) ** (1.0 / (params.p - 1.0)) / (1.0 + d_star * y) ** params.rate
    w = base.copy()
    bump = None
    side = 1
    if extension_seed is not None:
        bump = seeded_bump(extension_seed, support, amplitude)
        side = 1 if extension_seed % 2 == 0 else -1
        w = w + bump(side * y)
    inner = np.abs(y) < 1.0
    dev0 = float(np.max(np.abs(w[inner] - base[inner])))
    report = {
        "d_star": d_star,
        "A_star": A_star,
        "M": M,
        "h": float(y[1] - y[0]),
        "seed": extension_seed,
        "bump": None if bump is None else {"center": side * bump.center, "radius": bump.radius, "amplitude": bump.amplitude},
        "hypothesis_holds": dev0 == 0.0,
        "initial_deviation": dev0,
        "scope": "forward consistency on |y| < 1; ancient-solution statement not simulated",
    }
    frame = SelfSimFrame(y, w, np.zeros_like(y), 0.0, params, A_star)
    try:
        frames = evolve(frame, ds, cfg)
        report["diverged"] = False
    except SelfSimDivergence as exc:
        frames = exc.frames
        report.update(diverged=True, divergence=str(exc))
    devs = [float(np.max(np.abs(f.w[inner] - base[inner]))) for f in frames]
    report["s"] = [f.s for f in frames]
    report["deviation"] = devs
    report["sup_deviation"] = max(devs)
    report["outer_deviation"] = float(np.max(np.abs(frames[-1].w - base)))
    return report


def minimum_experiment(
    data: FieldSnapshot,
    cfg: SolverConfig,
    half_width: int = 60,
    stride: int = 4,
    tau_cells: float = 25.0,
    M: int = 200,
    trust: float = 0.1,
    center: float | None = None,
) -> dict:
    """Surface around the earliest blow-up point, its minimum and ``grad T`` versus ``d``.

    A first run locates the node that is excised first (or the node nearest
    ``center`` when given, e.g. a symmetry point); probes every
    ``stride`` nodes within ``half_width`` nodes of it give the surface.  The
    profile is fitted at the discrete minimum ``x0`` at ``T(x0) - tau`` with
    ``tau = tau_cells * h``, so the self-similar window shrinks with the grid.
    """
    if data.params.N != 1:
        raise ValueError("the minimum experiment runs on the line")
    scout = simulate(data, cfg, stop_when_probes_dead=False)
    if np.all(np.isnan(scout.death_time)):
        raise ValueError("the datum does not blow up within the run")
    x = scout.final.grid
    h = float(x[1] - x[0])
    if center is None:
        i0 = int(np.nanargmin(scout.death_time))
    else:
        i0 = int(np.argmin(np.abs(x - center)))
    idx = i0 + stride * np.arange(-(half_width // stride), half_width // stride + 1)
    idx = idx[(idx >= 0) & (idx < x.size)]
    surf, _ = build_surface(data, cfg, x[idx])
    if len(surf) < 3:
        raise ValueError("too few blow-up samples around the minimum")
    j = int(np.argmin(surf.T))
    x0 = float(surf.x[j])
    single = BlowupSurface((surf.samples[j],), surf.params, surf.t0)
    fit = probe_profiles(data, cfg, single, tau_cells * h, M, trust)[0]
    report = {
        "h": h,
        "tau": tau_cells * h,
        "x0": x0,
        "T0": float(surf.T[j]),
        "interior": 0 < j < len(surf) - 1,
        "fit": fit,
        "surface": [list(r) for r in surf.samples],
        "lipschitz": lipschitz_report(surf),
    }
    fits = None
    if fit["ok"]:
        prof = ProfileParams(fit["e"], tuple(fit["d"]), fit["nu"])
        fits = {x0: prof}
        report["gradient"] = gradient_vs_d(surf, x0, fit["d"]) if report["interior"] else None
    report["local_min"] = local_min_report(surf, fits)
    return report
