"""Declarative experiments: INI configs, runners and the artifact manifest.

A config has three sections::

    [model]       N, p
    [solver]      any SolverConfig field
    [experiment]  kind, seed and the kind's own options

Unknown sections or keys are errors.  Each run writes its CSV/JSON/Markdown
artifacts and ``manifest.json`` into a fresh timestamped directory.
"""
from __future__ import annotations

import configparser
import datetime as _dt
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from . import __version__
from .bumps import QuinticBump, seeded_bump
from .config import SolverConfig
from .energy import blowup_criterion, check_monotone, constant_energy, energy_trace, lyapunov
from .geometry import lipschitz_report, minimum_experiment, rigidity_experiment, stability_experiment
from .io import sha256_file, to_jsonable, write_csv, write_json, write_report
from .modulation import modulation_trace, shoot_unstable_mode, time_shift_direction, trapping_check
from .profiles import ModelParams, ProfileParams, kappa, lorentz_soliton, lorentz_soliton_dt, ode_solution
from .selfsim import SelfSimDivergence, evolve
from .simvars import SelfSimFrame, ball_grid, h_norm
from .wave import build_surface, snapshot_from

__all__ = [
    "ConfigError",
    "Option",
    "ExperimentKind",
    "ExperimentConfig",
    "Outcome",
    "KINDS",
    "load_config",
    "parse_config",
    "config_template",
    "run_experiment",
    "list_experiments",
    "OUT_ENV",
]

OUT_ENV = "BLOWUPLAB_OUT"


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Option:
    name: str
    parse: Callable
    default: object
    help: str


@dataclass(frozen=True)
class ExperimentKind:
    name: str
    checks: str
    criteria: tuple[int, ...]
    options: tuple[Option, ...]
    runner: Callable
    solver_defaults: dict = field(default_factory=dict)
    model_check: Callable | None = None

    def option(self, name: str) -> Option:
        for opt in self.options:
            if opt.name == name:
                return opt
        raise KeyError(name)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: ModelParams
    solver: SolverConfig
    options: dict
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "model": self.model.to_dict(),
            "solver": self.solver.to_dict(),
            "experiment": dict(self.options),
        }

    def digest(self) -> str:
        text = json.dumps(to_jsonable(self.to_dict()), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Outcome:
    """Checks, tables and reports produced by one runner."""

    checks: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, value=None, tol=None, **extra):
        self.checks[name] = {"passed": bool(passed), "value": value, "tol": tol, **extra}

    def table(self, name: str, columns, rows, meta=None):
        self.tables[name] = (list(columns), np.asarray(rows, dtype=float), meta or {})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


# -- config parsing ----------------------------------------------------------

_SOLVER_PARSERS = {
    f.name: (lambda v, t=type(f.default): _bool(v) if t is bool else t(v)) for f in fields(SolverConfig)
}
_SOLVER_PARSERS["pin"] = lambda v: None if str(v).strip().lower() == "none" else tuple(json.loads(v))


def parse_config(text: str, seed: int | None = None) -> ExperimentConfig:
    """Parse INI text; ``seed`` overrides ``[experiment] seed``."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    unknown = set(cp.sections()) - {"model", "solver", "experiment"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    if not cp.has_section("experiment") or "kind" not in cp["experiment"]:
        raise ConfigError("[experiment] kind is required")
    kind_name = cp["experiment"]["kind"].strip()
    if kind_name not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind_name!r}; known: {sorted(KINDS)}")
    kind = KINDS[kind_name]

    model_keys = dict(cp["model"]) if cp.has_section("model") else {}
    bad = set(model_keys) - {"N", "p"}
    if bad:
        raise ConfigError(f"unknown [model] key(s): {sorted(bad)}")
    try:
        model = ModelParams(int(model_keys.get("N", 1)), float(model_keys.get("p", 3.0)))
    except ValueError as exc:
        raise ConfigError(f"[model]: {exc}") from None
    if kind.model_check is not None:
        msg = kind.model_check(model)
        if msg:
            raise ConfigError(f"{kind_name}: {msg}")

    solver_keys = dict(cp["solver"]) if cp.has_section("solver") else {}
    bad = set(solver_keys) - set(_SOLVER_PARSERS)
    if bad:
        raise ConfigError(f"unknown [solver] key(s): {sorted(bad)}")
    settings = dict(kind.solver_defaults)
    try:
        for k, v in solver_keys.items():
            settings[k] = _SOLVER_PARSERS[k](v)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[solver]: {exc}") from None

    opts = {o.name: o.default for o in kind.options}
    raw = {k: v for k, v in cp["experiment"].items() if k not in ("kind", "seed")}
    bad = set(raw) - set(opts)
    if bad:
        raise ConfigError(f"unknown [experiment] key(s) for {kind_name}: {sorted(bad)}")
    try:
        for k, v in raw.items():
            opts[k] = kind.option(k).parse(v)
        cfg_seed = int(cp["experiment"].get("seed", 0))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[experiment]: {exc}") from None
    if kind_name in ("soliton-check", "stability") and settings.get("boundary", "dirichlet") == "dirichlet":
        settings.setdefault("pin", (1, [opts["d"]], opts.get("x_star", 0.0), opts.get("T_star", 1.0)))
    try:
        solver = SolverConfig(**settings)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[solver]: {exc}") from None
    return ExperimentConfig(kind_name, model, solver, opts, cfg_seed if seed is None else int(seed))


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, seed)


def config_template(kind_name: str) -> str:
    """INI text with every option of ``kind_name`` at its default."""
    kind = KINDS[kind_name]
    lines = ["[model]", "N = 1", "p = 3.0", "", "[solver]"]
    for k, v in kind.solver_defaults.items():
        lines.append(f"{k} = {_fmt(v)}")
    lines += ["", "[experiment]", f"kind = {kind_name}", "seed = 0"]
    for o in kind.options:
        lines.append(f"# {o.help}")
        lines.append(f"{o.name} = {_fmt(o.default)}")
    return "\n".join(lines) + "\n"


def list_experiments(kind_name: str | None = None, schema: bool = False) -> str:
    names = [kind_name] if kind_name else sorted(KINDS)
    out = []
    for name in names:
        kind = KINDS[name]
        out.append(f"{name}: {kind.checks}")
        out.append(f"    acceptance criteria: {', '.join(map(str, kind.criteria))}")
        if schema:
            for o in kind.options:
                out.append(f"    {o.name} = {_fmt(o.default)}    # {o.help}")
    return "\n".join(out) + "\n"


# -- runners ----------------------------------------------------------------

def _line_only(model: ModelParams):
    return None if model.N == 1 else "runs on the line only (N = 1)"


def _map(executor, fn, items):
    return list(executor.map(fn, items)) if executor is not None else [fn(i) for i in items]


def _run_ode_check(cfg: ExperimentConfig, out: Outcome, executor):
    P, o = cfg.model, cfg.options
    T = o["T"]
    u0 = float(ode_solution(P, T, 0.0))
    ut0 = P.rate * u0 / T
    data = snapshot_from(P, cfg.solver, lambda x: np.full_like(x, u0), lambda x: np.full_like(x, ut0))
    surf, run = build_surface(data, cfg.solver, [0.0])
    if len(surf) == 0:
        out.check("blowup_time", False, None, o["tol"], reason="no blow-up at the probe")
        return
    rel = abs(surf.T[0] - T) / T
    out.check("blowup_time", rel <= o["tol"], rel, o["tol"], T_est=float(surf.T[0]), T_exact=T)
    out.table("surface", *surf.table())
    stride = max(1, run.trace_t.size // 2000)
    out.table("trace", ["t", "max_abs_u"], np.column_stack([run.trace_t, run.trace_max])[::stride])


def _probes(o):
    return np.linspace(-o["probe_span"], o["probe_span"], o["probes"])


def _soliton_data(cfg: ExperimentConfig):
    P, o = cfg.model, cfg.options
    d, xs, Ts = o["d"], o["x_star"], o["T_star"]
    return snapshot_from(
        P,
        cfg.solver,
        lambda x: lorentz_soliton(P, 1, [d], xs, Ts, x, 0.0),
        lambda x: lorentz_soliton_dt(P, 1, [d], xs, Ts, x, 0.0),
    )


def _run_soliton_check(cfg: ExperimentConfig, out: Outcome, executor):
    o = cfg.options
    surf, _ = build_surface(_soliton_data(cfg), cfg.solver, _probes(o))
    out.table("surface", *surf.table())
    if len(surf) < 2:
        out.check("planar_surface", False, None, o["tol"], reason="fewer than two blow-up samples")
        return
    exact = o["T_star"] + o["d"] * (surf.x - o["x_star"])
    err = float(np.max(np.abs(surf.T - exact)))
    lip = lipschitz_report(surf)
    out.reports["lipschitz"] = lip
    out.check("planar_surface", err <= o["tol"] and len(surf) == o["probes"], err, o["tol"], samples=len(surf))
    spread = max(abs(lip["max_ratio"] - abs(o["d"])), abs(lip["min_ratio"] - abs(o["d"])))
    out.check("lipschitz_ratio", spread <= o["tol"] and lip["passed"], spread, o["tol"])


def _surface_job(args):
    cfg, cells, o = args
    P = cfg.model
    solver = replace(cfg.solver, cells=cells)
    b = QuinticBump(0.0, o["radius"])
    amp = o["amplitude"] * P.kappa0
    tilt, vel = (0.0, 0.0) if o["symmetric"] else (o["tilt"], o["velocity"])
    data = snapshot_from(P, solver, lambda x: amp * b(x) * (1.0 + tilt * x), lambda x: vel * amp * x * b(x))
    half = max(o["stride"] * 2, o["half_width"] * cells // 2000)
    return minimum_experiment(
        data, solver, half, o["stride"], o["tau_cells"], o["M"], center=0.0 if o["symmetric"] else None
    )


def _run_surface_build(cfg: ExperimentConfig, out: Outcome, executor):
    o = cfg.options
    cells = sorted(o["cells"])
    reports = _map(executor, _surface_job, [(cfg, c, o) for c in cells])
    gaps, dmin = [], []
    for c, rep in zip(cells, reports):
        out.reports[f"surface_{c}"] = rep
        out.table(f"surface_{c}", ["x", "T", "sigma"], rep["surface"])
        gaps.append(rep["gradient"]["gap"] if rep.get("gradient") else math.nan)
        dmin.append(float(np.linalg.norm(rep["fit"]["d"])) if rep["fit"]["ok"] else math.nan)
        out.check(f"lipschitz_{c}", rep["lipschitz"]["passed"], rep["lipschitz"]["max_ratio"], 1.0)
    fin = reports[-1]
    if o["symmetric"]:
        mins = [m["x"] for m in fin["local_min"]["minima"]]
        out.check("strict_minimum_at_0", fin["interior"] and 0.0 in mins and fin["x0"] == 0.0, fin["x0"], 0.0)
        out.check("fitted_d_at_minimum", all(v <= o["tol"] for v in dmin), dmin, o["tol"])
    else:
        out.check("gradient_equals_d", math.isfinite(gaps[-1]) and gaps[-1] <= o["tol"], gaps[-1], o["tol"])
        dec = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
        out.check("gap_decreases_under_refinement", dec and len(gaps) > 1, gaps, None, cells=cells)


def _run_modulation_decay(cfg: ExperimentConfig, out: Outcome, executor):
    P, o, solver = cfg.model, cfg.options, cfg.solver
    g = ball_grid(P, solver.ss_cells)
    d = o["d"] if P.N == 1 else 0.0
    base = kappa(P, [d] * P.N if P.N == 1 else [0.0] * P.N, g)
    zero = np.zeros_like(g)
    bump = QuinticBump(o["bump_center"], o["bump_radius"])(g)
    bump *= o["eps"] / h_norm(SelfSimFrame(g, bump, zero, 0.0, P))
    frame = SelfSimFrame(g, base + bump, zero, 0.0, P)
    shot = {"c": 0.0}
    if o["shoot"]:
        f = time_shift_direction(P, ProfileParams(1, (d,) * P.N if P.N == 1 else (0.0,) * P.N), g)
        c, info = shoot_unstable_mode(frame, f, solver, tol=o["shoot_tol"])
        frame = frame.with_fields(w=frame.w + c * f, ws=frame.ws + c * f)
        shot = {"c": c, **info}
    eps_bar = h_norm(frame - SelfSimFrame(g, base, zero, 0.0, P))
    frames = evolve(frame, o["s_end"], solver)
    trace = modulation_trace(frames)
    rep = trapping_check(trace, eps_bar, [d] if P.N == 1 else None, (o["window_lo"], o["window_hi"]), r2_min=o["r2_min"])
    rep["shooting"] = shot
    out.reports["trapping"] = rep
    out.table("modulation", *trace.table())
    out.table("energy", *energy_trace(frames).table())
    out.check("decay", rep.get("decay_ok", False), rep.get("mu"), 0.0, r2=rep.get("r2"), r2_min=o["r2_min"])
    out.check("trapping", rep["status"] == "pass", rep.get("param_distance"), rep.get("param_bound"), K=rep.get("K"))


def _rigidity_job(args):
    P, solver, d, A, seed, M, ds = args
    return rigidity_experiment(P, d, A, seed, M=M, ds=ds, cfg=solver)


def _run_rigidity(cfg: ExperimentConfig, out: Outcome, executor):
    P, o = cfg.model, cfg.options
    seeds = [cfg.seed + s for s in o["seeds"]]
    Ms = sorted(o["M"])
    jobs = [(P, cfg.solver, o["d_star"], o["A_star"], s, M, o["ds"]) for s in [None] + seeds for M in Ms]
    reps = _map(executor, _rigidity_job, jobs)
    by = {(j[4], j[5]): r for j, r in zip(jobs, reps)}
    s_col = by[(None, Ms[0])]["s"]
    cols, series = ["s"], [s_col]
    for s in [None] + seeds:
        for M in Ms:
            r = by[(s, M)]
            if r["s"] != s_col:
                raise RuntimeError("output times differ between runs")
            cols.append(f"dev_{'soliton' if s is None else f'seed{s}'}_M{M}")
            series.append(r["deviation"])
            out.reports[cols[-1][4:]] = {k: v for k, v in r.items() if k not in ("s", "deviation")}
    out.table("deviation", cols, np.column_stack(series))
    floor = o["floor"]
    for s in [None] + seeds:
        sup = [by[(s, M)]["sup_deviation"] for M in Ms]
        label = "soliton" if s is None else f"seed{s}"
        out.check(f"inner_deviation_{label}", max(sup) < o["tol"], sup, o["tol"], M=Ms)
        mono = all(b <= a or b <= floor for a, b in zip(sup[:-1], sup[1:]))
        out.check(f"refinement_{label}", mono, sup, floor, M=Ms)


def _run_stability(cfg: ExperimentConfig, out: Outcome, executor):
    o = cfg.options
    data = _soliton_data(cfg)
    bump = QuinticBump(o["bump_center"], o["bump_radius"])
    rep = stability_experiment(
        data, cfg.solver, o["eps"], _probes(o), bump, focus=0.0, tau=o["tau"], M=o["M"],
        delta0=o["delta0"], executor=executor,
    )
    out.reports["stability"] = rep
    out.table("surface_base", ["x", "T", "sigma"], rep["base"]["surface"])
    rows = []
    for c in rep["cases"]:
        out.table(f"surface_eps_{c['eps']:g}", ["x", "T", "sigma"], c["surface"])
        rows.append([c["eps"], c.get("focus_dT", math.nan), c.get("focus_floor", math.nan), c["max_dT"]])
        ok = c["cone_pass"] and c["fit_pass"] and c["probes"] == o["probes"]
        out.check(f"in_R0_eps_{c['eps']:g}", ok, c["max_dT"], None, cone=c["cone_pass"], fit=c["fit_pass"])
    out.table("continuity", ["eps", "focus_dT", "focus_floor", "max_dT"], rows)
    out.check("base_in_R0", rep["base"]["fit_pass"] and rep["base"]["cone_pass"], None)
    out.check("continuity", rep["monotone_to_floor"], rep["focus_dT_by_eps"], None)
    if o["control_eps"] != 0.0:
        ctrl = stability_experiment(
            data, cfg.solver, [o["control_eps"]], _probes(o), bump, focus=0.0, tau=o["tau"], M=o["M"], delta0=o["delta0"]
        )["cases"][0]
        out.reports["control"] = {k: v for k, v in ctrl.items() if k != "surface"}
        lost = not (ctrl["fit_pass"] and ctrl["cone_pass"])
        out.check("control_flags_loss_of_fit", lost, o["control_eps"], None)
    out.reports["largest_passing_eps"] = rep["largest_passing_eps"]


def _energy_job(args):
    P, solver, k, seed, o = args
    g = ball_grid(P, solver.ss_cells)
    zero = np.zeros_like(g)
    rng = np.random.default_rng([seed, k])
    d = float(rng.uniform(-o["d_max"], o["d_max"])) if P.N == 1 else 0.0
    base = kappa(P, [d] if P.N == 1 else [0.0] * P.N, g)
    lo = -0.9 if P.N == 1 else 0.0
    bump = seeded_bump(int(rng.integers(2**31)), (lo, 0.9), (0.5, 1.0))(g)
    bump *= o["eps"] / h_norm(SelfSimFrame(g, bump, zero, 0.0, P))
    ref = energy_trace(evolve(SelfSimFrame(g, base, zero, 0.0, P), o["s_end"], solver))
    drift = float(np.max(np.abs(np.diff(ref.E))))
    tol = o["tol_factor"] * max(drift, 1e-14 * max(1.0, abs(ref.E[0])))
    try:
        frames = evolve(SelfSimFrame(g, base + bump, zero, 0.0, P), o["s_end"], solver)
        diverged = False
    except SelfSimDivergence as exc:
        frames, diverged = exc.frames, True
    tr = energy_trace(frames)
    return d, tol, diverged, tr, check_monotone(tr, tol)


def _run_energy_trace(cfg: ExperimentConfig, out: Outcome, executor):
    P, o, solver = cfg.model, cfg.options, cfg.solver
    g = ball_grid(P, solver.ss_cells)
    zero = np.zeros_like(g)
    E1 = lyapunov(SelfSimFrame(g, np.full_like(g, P.kappa0), zero, 0.0, P))
    exact = constant_energy(P, 1.0)
    out.check("closed_form_energy", abs(E1 - exact) <= o["closed_form_tol"], abs(E1 - exact), o["closed_form_tol"], E=E1, exact=exact)
    if o["mode"] == "criterion":
        lam = o["scale"]
        start = SelfSimFrame(g, np.full_like(g, lam * P.kappa0), zero, 0.0, P)
        E = lyapunov(start)
        ex = constant_energy(P, lam)
        out.check("scaled_energy", abs(E - ex) <= o["closed_form_tol"], abs(E - ex), o["closed_form_tol"], E=E, exact=ex)
        try:
            frames = evolve(start, o["s_limit"], solver)
            out.check("diverges", False, None, o["s_limit"], reason="no divergence before s_limit")
        except SelfSimDivergence as exc:
            frames = exc.frames
            out.check("diverges", blowup_criterion(start) and exc.s < o["s_limit"], exc.s, o["s_limit"])
        out.table("energy", *energy_trace(frames).table())
        return
    if o["mode"] != "perturbed":
        raise ConfigError(f"unknown energy-trace mode {o['mode']!r}")
    jobs = [(P, solver, k, cfg.seed, o) for k in range(o["runs"])]
    results = _map(executor, _energy_job, jobs)
    rows, summary = [], []
    for k, (d, tol, div, tr, mono) in enumerate(results):
        rows += [[k, s, E] for s, E in tr.samples]
        summary.append([k, d, tol, mono["max_increment"], float(div)])
        out.check(f"monotone_run{k:02d}", mono["passed"], mono["max_increment"], tol, d=d, diverged=div)
    out.table("energy", ["run", "s", "E"], rows)
    out.table("runs", ["run", "d", "tol", "max_increment", "diverged"], summary)


KINDS: dict[str, ExperimentKind] = {}


def _kind(name, checks, criteria, options, runner, solver_defaults=None, model_check=None):
    KINDS[name] = ExperimentKind(name, checks, criteria, tuple(Option(*o) for o in options), runner, solver_defaults or {}, model_check)


_kind(
    "ode-check",
    "space-independent data blow up at the time of the ODE solution kappa0 (T - t)^(-2/(p-1))",
    (2,),
    [
        ("T", float, 1.0, "blow-up time of the ODE data"),
        ("tol", float, 1e-3, "relative tolerance on the fitted blow-up time"),
    ],
    _run_ode_check,
    {"boundary": "reflect", "domain": 1.0, "cells": 200},
)
_kind(
    "soliton-check",
    "a boosted soliton has the planar blow-up surface T* + d (x - x*) with Lipschitz ratio |d|",
    (9,),
    [
        ("d", float, 0.5, "soliton velocity, |d| < 1"),
        ("x_star", float, 0.0, "anchor point"),
        ("T_star", float, 1.0, "blow-up time at the anchor"),
        ("probes", int, 9, "number of probes"),
        ("probe_span", float, 0.4, "probes are evenly spaced on [-span, span]"),
        ("tol", float, 2e-3, "absolute tolerance on T and on the Lipschitz ratio"),
    ],
    _run_soliton_check,
    {"boundary": "dirichlet", "domain": 1.0, "cells": 500, "u_max": 1e3},
    _line_only,
)
_kind(
    "surface-build",
    "at the minimum of a simulated blow-up surface the slope of T equals the fitted soliton velocity; "
    "even data give a strict minimum at 0 with d = 0",
    (8, 12),
    [
        ("amplitude", float, 1.5, "peak of the datum in units of kappa0"),
        ("radius", float, 1.2, "support radius of the quintic bump datum"),
        ("tilt", float, 0.25, "u0 = amplitude * bump * (1 + tilt x)"),
        ("velocity", float, 0.4, "u1 = velocity * amplitude * x * bump"),
        ("symmetric", _bool, False, "drop tilt and velocity (even datum) and centre probes at 0"),
        ("cells", _ints, (1000, 2000), "grid refinements"),
        ("half_width", int, 60, "probe half-width in nodes at 2000 cells"),
        ("stride", int, 4, "nodes between probes"),
        ("tau_cells", float, 25.0, "profile fit at T(x0) - tau_cells * h"),
        ("M", int, 200, "self-similar grid for the fit"),
        ("tol", float, 5e-2, "bound on |grad T - d| (or on |d| for even data)"),
    ],
    _run_surface_build,
    {"boundary": "sponge", "domain": 2.0, "u_max": 1e3},
    _line_only,
)
_kind(
    "modulation-decay",
    "data near kappa(d) converge exponentially to a nearby soliton, with drift of d bounded by K eps",
    (7,),
    [
        ("d", float, 0.3, "soliton velocity of the base profile"),
        ("eps", float, 1e-2, "H norm of the bump perturbation"),
        ("bump_center", float, 0.1, "bump centre in y"),
        ("bump_radius", float, 0.5, "bump radius in y"),
        ("shoot", _bool, True, "remove the blow-up-time instability by bisection"),
        ("shoot_tol", float, 1e-8, "bisection tolerance"),
        ("s_end", float, 20.0, "length of the run in s"),
        ("window_lo", float, 1.0, "decay fit window start"),
        ("window_hi", float, 12.0, "decay fit window end"),
        ("r2_min", float, 0.95, "required quality of the exponential fit"),
    ],
    _run_modulation_decay,
    {"ss_cells": 400},
)
_kind(
    "rigidity",
    "a soliton on the unit ball persists there whatever the data outside (forward consequence only)",
    (10,),
    [
        ("d_star", float, 0.3, "soliton velocity"),
        ("A_star", float, 1.6, "outer radius of the extended ball"),
        ("seeds", _ints, (0, 1, 2), "bump seeds, offset by the run seed"),
        ("M", _ints, (320, 640), "grid refinements"),
        ("ds", float, 3.0, "length of the run in s"),
        ("tol", float, 1e-4, "bound on the deviation on |y| < 1"),
        ("floor", float, 1e-10, "roundoff floor below which refinement need not decrease"),
    ],
    _run_rigidity,
    {},
    _line_only,
)
_kind(
    "stability",
    "blow-up times depend continuously on the data and non-characteristic points persist under perturbation",
    (11,),
    [
        ("d", float, 0.5, "velocity of the base soliton"),
        ("x_star", float, 0.0, "anchor point"),
        ("T_star", float, 1.0, "blow-up time at the anchor"),
        ("eps", _floats, (1e-1, 1e-2, 1e-3), "perturbation sizes in H^1 x L^2"),
        ("probes", int, 9, "number of probes"),
        ("probe_span", float, 0.4, "probes are evenly spaced on [-span, span]"),
        ("bump_center", float, 0.0, "perturbation centre"),
        ("bump_radius", float, 0.3, "perturbation radius"),
        ("tau", float, 0.05, "profile fits at T(x) - tau"),
        ("M", int, 200, "self-similar grid for the fits"),
        ("delta0", float, 0.75, "cone slope"),
        ("control_eps", float, -40.0, "negative control expected to lose the fit (0 disables)"),
    ],
    _run_stability,
    {"boundary": "dirichlet", "domain": 1.0, "cells": 500, "u_max": 1e3},
    _line_only,
)
_kind(
    "energy-trace",
    "the Lyapunov functional matches its closed form on constants, never increases, and E < 0 forces divergence",
    (1, 5, 6),
    [
        ("mode", str, "perturbed", "perturbed: seeded soliton perturbations; criterion: constant data scale * kappa0"),
        ("runs", int, 20, "number of perturbed runs"),
        ("d_max", float, 0.6, "soliton velocities drawn from [-d_max, d_max]"),
        ("eps", float, 1e-2, "H norm of each perturbation"),
        ("s_end", float, 5.0, "length of each run"),
        ("tol_factor", float, 10.0, "tolerance = factor * drift of the unperturbed soliton"),
        ("scale", float, 1.5, "constant data scale (criterion mode)"),
        ("s_limit", float, 50.0, "divergence must happen before this s (criterion mode)"),
        ("closed_form_tol", float, 1e-6, "tolerance against closed-form energies"),
    ],
    _run_energy_trace,
    {"ss_cells": 400},
)


# -- driver -----------------------------------------------------------------

def _out_root(out) -> Path:
    if out is not None:
        return Path(out)
    return Path(os.environ.get(OUT_ENV, "runs"))


def _run_dir(root: Path, cfg: ExperimentConfig) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    base = root / f"{cfg.kind}-{stamp}-{cfg.digest()[:8]}"
    path, k = base, 1
    while path.exists():
        path = Path(f"{base}-{k}")
        k += 1
    path.mkdir(parents=True)
    return path


def run_experiment(cfg: ExperimentConfig, out=None, threads: int = 1) -> tuple[Path, dict]:
    """Run ``cfg``, write its artifacts and manifest; return ``(directory, manifest)``."""
    directory = _run_dir(_out_root(out), cfg)
    start = time.time()
    outcome = Outcome()
    error = None
    executor = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        KINDS[cfg.kind].runner(cfg, outcome, executor)
    except (SelfSimDivergence, RuntimeError, ValueError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    finally:
        if executor is not None:
            executor.shutdown()
    artifacts = {}
    meta = {"kind": cfg.kind, "config_hash": cfg.digest(), "seed": cfg.seed}
    for name, (cols, rows, extra) in outcome.tables.items():
        path = write_csv(directory / f"{name}.csv", cols, rows, {**meta, "table": name, **extra})
        artifacts[path.name] = sha256_file(path)
    for name, rep in outcome.reports.items():
        if isinstance(rep, dict):
            write_report(directory / name, f"{cfg.kind}: {name}", rep)
        else:
            write_json(directory / f"{name}.json", rep)
    tolerances = {k: v for k, v in cfg.options.items() if "tol" in k or k in ("floor", "r2_min", "delta0")}
    passed = error is None and bool(outcome.checks) and outcome.passed
    manifest = {
        "schema": 1,
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "tolerances": tolerances,
        "checks": outcome.checks,
        "passed": passed,
        "error": error,
        "artifacts": artifacts,
        "versions": {"blowuplab": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "created": _dt.datetime.now().isoformat(timespec="seconds"),
        "wall_time_s": round(time.time() - start, 3),
        "threads": threads,
    }
    write_json(directory / "manifest.json", manifest)
    return directory, manifest
