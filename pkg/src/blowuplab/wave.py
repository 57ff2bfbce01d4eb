"""Physical-space solver for ``u_tt = Lap u + |u|^{p-1} u`` and blow-up surfaces.

Grids are vertex based: ``x_j = -L + j h`` on a line, ``r_j = j h`` radially.
Time stepping is kick-drift-kick leapfrog.  The step size follows the CFL
bound and the local ODE time scale ``(kappa0 / max|u|)^{(p-1)/2}``, so the
approach to a singularity is resolved geometrically.

Once ``|u|`` passes ``u_max`` at a node the node is excised: it is frozen and
its live neighbours see a value extrapolated from the live side.  A blow-up
surface with slope below 1 leaves the remaining region causally independent
of the excised set, so the run can continue until every probe has blown up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .config import SolverConfig
from .profiles import ModelParams
from .simvars import FieldSnapshot

__all__ = [
    "BlowupDivergence",
    "TimeStepUnderflow",
    "BlowupFitError",
    "physical_grid",
    "snapshot_from",
    "step",
    "simulate",
    "RunResult",
    "BlowupFit",
    "fit_blowup_time",
    "estimate_blowup_time",
    "BlowupTimeEstimator",
    "BlowupSurface",
    "build_surface",
]


class BlowupDivergence(RuntimeError):
    """``max|u|`` passed ``u_max``: the blow-up detector fired."""

    def __init__(self, state: FieldSnapshot, where):
        super().__init__(f"|u| > u_max at t={state.t:.12g}")
        self.state = state
        self.where = where


class TimeStepUnderflow(RuntimeError):
    """The adaptive step fell below ``dt_min``."""


class BlowupFitError(ValueError):
    """The trace does not show clean blow-up growth to extrapolate from."""


def physical_grid(params: ModelParams, cfg: SolverConfig) -> np.ndarray:
    """Vertex grid with ``cfg.cells`` intervals on ``[-domain, domain]`` or ``[0, domain]``."""
    if params.N == 1:
        return np.linspace(-cfg.domain, cfg.domain, cfg.cells + 1)
    return np.linspace(0.0, cfg.domain, cfg.cells + 1)


def snapshot_from(params: ModelParams, cfg: SolverConfig, u0, ut0=None, t0: float = 0.0) -> FieldSnapshot:
    """Sample callables ``u0(x)``, ``ut0(x)`` on the solver grid."""
    x = physical_grid(params, cfg)
    u = np.asarray(u0(x), dtype=float) * np.ones_like(x)
    ut = np.zeros_like(x) if ut0 is None else np.asarray(ut0(x), dtype=float) * np.ones_like(x)
    return FieldSnapshot(x, u, ut, t0, params)


class _Stepper:
    """Mutable working state behind :func:`step` and :func:`simulate`."""

    def __init__(self, state: FieldSnapshot, cfg: SolverConfig):
        params = state.params
        self.params, self.cfg = params, cfg
        self.x = np.asarray(state.grid, dtype=float)
        self.h = state.h
        if not np.allclose(np.diff(self.x), self.h, rtol=1e-9, atol=0):
            raise ValueError("the physical solver needs a uniform grid")
        self.radial = params.N > 1
        if self.radial and self.x[0] != 0.0:
            raise ValueError("radial grids must start at r = 0")
        self.u = np.array(state.u, dtype=float)
        self.v = np.array(state.ut, dtype=float)
        self.t = state.t
        self.alive = state.live.copy()
        self.n = self.x.size
        self.pm1 = params.p - 1.0
        self.dirichlet = cfg.boundary == "dirichlet"
        if self.dirichlet:
            ends = [0, self.n - 1] if not self.radial else [self.n - 1]
            self.pinned = np.array(ends)
            self._setup_pin()
        else:
            self.pinned = np.array([], dtype=int)
        self.free = np.ones(self.n, bool)
        self.free[self.pinned] = False
        self.damp = np.zeros(self.n)
        if cfg.boundary == "sponge":
            L = self.x[-1]
            dist = np.abs(self.x) if not self.radial else self.x
            z = np.clip((dist - (L - cfg.sponge_width)) / cfg.sponge_width, 0.0, None)
            self.damp = cfg.sponge_strength * z**2
        if self.radial:
            self.coef = np.zeros(self.n)
            self.coef[1:] = (params.N - 1) / self.x[1:]

    def snapshot(self) -> FieldSnapshot:
        alive = None if self.alive.all() else self.alive
        return FieldSnapshot(self.x, self.u, self.v, self.t, self.params, alive)

    # -- boundary data ---------------------------------------------------
    def _setup_pin(self):
        e, d, xs, Ts = self.cfg.pin
        d = np.atleast_1d(np.asarray(d, float))
        if d.size != self.params.N or not np.linalg.norm(d) < 1.0:
            raise ValueError("pin velocity must be a vector of length N inside the unit ball")
        if self.radial and np.any(d != 0):
            raise ValueError("radial runs can only pin d = 0 solitons")
        xb = self.x[self.pinned]
        shift = d[0] * (xb - float(np.squeeze(xs))) if not self.radial else 0.0 * xb
        amp = self.params.kappa0 * (1.0 - d @ d) ** (1.0 / self.pm1)
        self._pin = (int(e) * amp, float(Ts) + shift)

    def _apply_pin(self, t):
        """Overwrite pinned nodes with the boosted soliton; excise them once it has blown up."""
        if not self.dirichlet:
            return
        amp, Tb = self._pin
        den = Tb - t
        ok = den > 0
        a = self.params.rate
        idx = self.pinned
        gone = idx[~ok]
        self.alive[gone] = False
        idx, den = idx[ok], den[ok]
        u = amp / den**a
        self.u[idx] = u
        self.v[idx] = a * u / den

    # -- spatial operator ------------------------------------------------
    def _ghost(self, j, step):
        """Value seen by live node ``j`` in place of its excised neighbour ``j - step``."""
        u, a = self.u, self.alive
        j1, j2 = j + step, j + 2 * step
        ok1 = (j1 >= 0) & (j1 < self.n)
        ok1[ok1] = a[j1[ok1]]
        ok2 = ok1 & (j2 >= 0) & (j2 < self.n)
        ok2[ok2] = a[j2[ok2]]
        g = u[j].copy()
        m1 = ok1 & ~ok2
        g[m1] = 2.0 * u[j[m1]] - u[j1[m1]]
        g[ok2] = 3.0 * u[j[ok2]] - 3.0 * u[j1[ok2]] + u[j2[ok2]]
        return g

    def accel(self):
        u, h = self.u, self.h
        h2 = h * h
        lap = np.empty(self.n)
        lap[1:-1] = (u[:-2] - 2.0 * u[1:-1] + u[2:]) / h2
        # even reflection at the ends (Neumann; symmetry at r = 0)
        lap[0] = 2.0 * (u[1] - u[0]) / h2
        lap[-1] = 2.0 * (u[-2] - u[-1]) / h2
        if self.radial:
            lap[1:-1] += self.coef[1:-1] * (u[2:] - u[:-2]) / (2.0 * h)
            lap[0] *= self.params.N
        if not self.alive.all():
            a = self.alive
            # live nodes with an excised left / right neighbour
            jl = np.flatnonzero(a[1:] & ~a[:-1]) + 1
            jr = np.flatnonzero(a[:-1] & ~a[1:])
            for js, side in ((jl, -1), (jr, 1)):
                if js.size == 0:
                    continue
                other = js - side
                valid = (other >= 0) & (other < self.n)
                nb_far = np.where(valid, u[np.clip(other, 0, self.n - 1)], u[js])
                nb_dead = self._ghost(js, -side)
                # rebuild the stencil at js from (dead ghost, u_j, far neighbour)
                if side == -1:
                    uL, uR = nb_dead, nb_far
                else:
                    uL, uR = nb_far, nb_dead
                # outer ends keep their reflection ghost
                end = ~valid
                uL = np.where(end & (side == 1), uR, uL)
                uR = np.where(end & (side == -1), uL, uR)
                val = (uL - 2.0 * u[js] + uR) / h2
                if self.radial:
                    val = val + self.coef[js] * (uR - uL) / (2.0 * h)
                    val = np.where(js == 0, self.params.N * val, val)
                lap[js] = val
        acc = lap + np.abs(u) ** self.pm1 * u
        acc[~(self.alive & self.free)] = 0.0
        return acc

    # -- time step -------------------------------------------------------
    def dt(self, t_cap=math.inf):
        cfg = self.cfg
        live = np.abs(self.u[self.alive])
        m = float(live.max()) if live.size else 0.0
        dt = cfg.cfl * self.h
        if m > 0.0:
            dt = min(dt, cfg.ode_cfl * (self.params.kappa0 / m) ** (self.pm1 / 2.0))
        dt = min(dt, t_cap - self.t)
        if dt < cfg.dt_min:
            raise TimeStepUnderflow(f"dt = {dt:.3g} < dt_min = {cfg.dt_min:.3g} at t = {self.t:.12g}")
        return dt

    def advance(self, dt):
        """One KDK step; returns the indices excised during the step."""
        before = self.alive.copy()
        live = self.alive & self.free
        half = np.exp(-0.5 * dt * self.damp) if self.damp.any() else None
        if half is not None:
            self.v[live] *= half[live]
        self.v[live] += 0.5 * dt * self.accel()[live]
        self.u[live] += dt * self.v[live]
        t_new = self.t + dt
        self._apply_pin(t_new)
        big = self.alive & ~(np.abs(self.u) <= self.cfg.u_max)
        if big.any():
            if not self.cfg.excise:
                self.t = t_new
                raise BlowupDivergence(self.snapshot(), np.flatnonzero(big))
            self.alive &= ~big
            live &= ~big
        big |= before & ~self.alive  # pinned nodes whose closed form ended
        self.v[live] += 0.5 * dt * self.accel()[live]
        if half is not None:
            self.v[live] *= half[live]
        bad = live & ~np.isfinite(self.v)
        if bad.any():
            self.alive &= ~bad
            big |= bad
        self.t = t_new
        return np.flatnonzero(big)


def step(state: FieldSnapshot, cfg: SolverConfig, dt: float | None = None) -> FieldSnapshot:
    """Advance ``state`` by one adaptive leapfrog step.

    With ``cfg.excise`` nodes passing ``u_max`` are excised in the returned
    snapshot and :class:`BlowupDivergence` is raised only once nothing is
    left alive; without it the first such node raises.
    """
    st = _Stepper(state, cfg)
    if not st.alive.any():
        raise BlowupDivergence(state, np.arange(state.grid.size))
    st.advance(st.dt() if dt is None else dt)
    snap = st.snapshot()
    if not st.alive.any():
        raise BlowupDivergence(snap, np.arange(state.grid.size))
    return snap


@dataclass
class RunResult:
    """Everything a :func:`simulate` call records."""

    final: FieldSnapshot
    probes: np.ndarray
    probe_index: np.ndarray
    probe_t: list
    probe_u: list
    death_time: np.ndarray
    trace_t: np.ndarray
    trace_max: np.ndarray
    snapshots: list = field(default_factory=list)
    status: str = ""
    steps: int = 0


def _snap_probes(x, probes, radial):
    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    if radial and np.any(probes < 0):
        raise ValueError("radial probes are radii >= 0")
    idx = np.clip(np.rint((probes - x[0]) / (x[1] - x[0])).astype(int), 0, x.size - 1)
    return idx


def simulate(
    data: FieldSnapshot,
    cfg: SolverConfig,
    probes: Sequence[float] = (),
    capture_times: Sequence[float] = (),
    stop_when_probes_dead: bool = True,
) -> RunResult:
    """Run the leapfrog scheme from ``data``.

    Records ``u`` at each probe node after every step, the live ``max|u|``
    and the excision time of each node.  Snapshots are taken exactly at
    ``capture_times``.  The run stops when every probe (or every node) has
    been excised, at ``cfg.t_max`` or after ``cfg.max_steps`` steps.
    """
    st = _Stepper(data, cfg)
    pidx = _snap_probes(st.x, probes, st.radial) if len(probes) else np.array([], int)
    captures = sorted(float(c) for c in capture_times if c > data.t)
    death = np.full(st.n, np.nan)
    pt, pu = [[data.t] for _ in pidx], [[float(data.u[i])] for i in pidx]
    tt, tm = [data.t], [float(np.max(np.abs(data.u[st.alive]))) if st.alive.any() else 0.0]
    snaps = []
    status = "max_steps"
    steps = 0
    while steps < cfg.max_steps:
        if not st.alive.any():
            status = "all_dead"
            break
        if pidx.size and stop_when_probes_dead and not st.alive[pidx].any():
            status = "probes_dead"
            break
        if st.t >= cfg.t_max:
            status = "t_max"
            break
        cap = captures[0] if captures else math.inf
        dt = st.dt(min(cap, cfg.t_max))
        gone = st.advance(dt)
        steps += 1
        if captures and st.t >= captures[0]:
            st.t = captures.pop(0)
            snaps.append(st.snapshot())
        death[gone] = st.t
        for k, i in enumerate(pidx):
            if st.alive[i]:
                pt[k].append(st.t)
                pu[k].append(float(st.u[i]))
        live = np.abs(st.u[st.alive])
        tt.append(st.t)
        tm.append(float(live.max()) if live.size else math.inf)
    return RunResult(
        final=st.snapshot(),
        probes=st.x[pidx],
        probe_index=pidx,
        probe_t=[np.array(a) for a in pt],
        probe_u=[np.array(a) for a in pu],
        death_time=death,
        trace_t=np.array(tt),
        trace_max=np.array(tm),
        snapshots=snaps,
        status=status,
        steps=steps,
    )


class BlowupFit(NamedTuple):
    T: float
    sigma: float
    slope: float
    n: int


def _line_root(t, z):
    t0 = t[-1]
    X = np.column_stack([np.ones_like(t), t - t0])
    coef, *_ = np.linalg.lstsq(X, z, rcond=None)
    A, B = coef
    if not B < 0:
        raise BlowupFitError("transformed trace is not decreasing")
    T = t0 - A / B
    n = t.size
    resid = z - X @ coef
    var = float(resid @ resid) / max(n - 2, 1)
    cov = var * np.linalg.inv(X.T @ X)
    g = np.array([-1.0 / B, A / B**2])
    return T, float(math.sqrt(max(g @ cov @ g, 0.0))), B


def fit_blowup_time(t, u, p: float, decade: float = 10.0) -> BlowupFit:
    """Blow-up time from the last decade of growth of ``|u|``.

    ``|u|^{-(p-1)/2}`` is linear in ``t`` for both the ODE solution and the
    boosted solitons; the slope is left free (it carries the boost factor)
    and the root of the least-squares line is returned.  ``sigma`` combines
    the regression standard error with the shift of the root when only the
    second half of the window is used.
    """
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(u, dtype=float))
    if t.shape != a.shape or t.ndim != 1:
        raise ValueError("t and u must be one-dimensional and of equal length")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(t))):
        raise BlowupFitError("non-finite samples in the trace")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be strictly increasing")
    top = a[-1]
    below = np.flatnonzero(a < top / decade)
    if top == 0.0 or below.size == 0:
        raise BlowupFitError("no decade of growth in the trace")
    w0 = below[-1] + 1
    tw, aw = t[w0:], a[w0:]
    if tw.size < 4:
        raise BlowupFitError("fewer than 4 samples in the fit window")
    z = aw ** (-(p - 1.0) / 2.0)
    if np.any(np.diff(z) >= 0):
        raise BlowupFitError("growth is not monotone in the fit window")
    T, se, B = _line_root(tw, z)
    half = tw.size // 2
    T2 = _line_root(tw[half:], z[half:])[0] if tw.size - half >= 3 else T
    if not T >= t[-1]:
        raise BlowupFitError("extrapolated blow-up time precedes the last finite sample")
    return BlowupFit(float(T), float(math.hypot(se, T - T2)), float(B), int(tw.size))


def estimate_blowup_time(history: Sequence[FieldSnapshot], x: float, decade: float = 10.0) -> BlowupFit:
    """:func:`fit_blowup_time` on the values at the grid node nearest ``x``."""
    if not history:
        raise BlowupFitError("empty history")
    snap0 = history[0]
    j = int(_snap_probes(snap0.grid, [x], snap0.params.N > 1)[0])
    ts, us = [], []
    for snap in history:
        if snap.live[j]:
            ts.append(snap.t)
            us.append(snap.u[j])
    return fit_blowup_time(np.array(ts), np.array(us), snap0.params.p, decade)


class BlowupTimeEstimator(BaseEstimator):
    """Estimator form of :func:`fit_blowup_time`: ``fit(t, u)`` sets ``T_`` and ``sigma_``."""

    def __init__(self, p: float = 3.0, decade: float = 10.0):
        self.p = p
        self.decade = decade

    def fit(self, t, u):
        res = fit_blowup_time(t, u, self.p, self.decade)
        self.T_, self.sigma_, self.slope_, self.n_window_ = res
        return self

    def predict(self, t):
        """Fitted ``|u|`` model ``(slope (t - T))^{-2/(p-1)}`` for ``t < T_``."""
        t = np.asarray(t, dtype=float)
        return (self.slope_ * (t - self.T_)) ** (-2.0 / (self.p - 1.0))


@dataclass(frozen=True)
class BlowupSurface:
    """Samples ``(x, T, sigma)`` of the blow-up surface of one run."""

    samples: tuple
    params: ModelParams
    t0: float = 0.0
    report: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rows = tuple((float(x), float(T), float(s)) for x, T, s in self.samples)
        for x, T, s in rows:
            if not (math.isfinite(T) and T > self.t0):
                raise ValueError(f"blow-up time {T} at x={x} must be finite and after t0={self.t0}")
            if not s >= 0:
                raise ValueError("sigma must be non-negative")
        rows = tuple(sorted(rows))
        object.__setattr__(self, "samples", rows)

    def __len__(self):
        return len(self.samples)

    @property
    def x(self) -> np.ndarray:
        return np.array([r[0] for r in self.samples])

    @property
    def T(self) -> np.ndarray:
        return np.array([r[1] for r in self.samples])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([r[2] for r in self.samples])

    def table(self) -> tuple[list[str], np.ndarray]:
        return ["x", "T", "sigma"], np.array(self.samples, dtype=float).reshape(-1, 3)

    @classmethod
    def from_table(cls, rows, params: ModelParams, t0: float = 0.0) -> "BlowupSurface":
        rows = np.asarray(rows, dtype=float).reshape(-1, 3)
        return cls(tuple(map(tuple, rows)), params, t0)


def build_surface(
    data: FieldSnapshot,
    cfg: SolverConfig,
    probes: Sequence[float],
    decade: float = 10.0,
    run: RunResult | None = None,
) -> tuple[BlowupSurface, RunResult]:
    """Simulate until every probe blows up and fit ``T`` at each one.

    Probes snap to grid nodes.  Probes that never blow up or whose fit fails
    are left out and listed in ``surface.report["omitted"]``.
    """
    if run is None:
        run = simulate(data, cfg, probes)
    samples, omitted = [], []
    for k, x in enumerate(run.probes):
        j = run.probe_index[k]
        if run.final.live[j]:
            omitted.append({"x": float(x), "reason": "no blow-up within the run"})
            continue
        try:
            fit = fit_blowup_time(run.probe_t[k], run.probe_u[k], data.params.p, decade)
        except BlowupFitError as exc:
            omitted.append({"x": float(x), "reason": str(exc)})
            continue
        samples.append((float(x), fit.T, fit.sigma))
    report = {
        "status": run.status,
        "steps": run.steps,
        "t_end": run.final.t,
        "omitted": omitted,
        "empty": not samples,
    }
    return BlowupSurface(tuple(samples), data.params, data.t, report), run
