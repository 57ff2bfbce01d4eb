"""Similarity variables, the weight rho and the weighted energy space.

Two geometries are supported throughout the package:

* ``N == 1``: a line, points ``y`` in ``(-1, 1)``;
* ``N >= 2``: radial functions, the grid stores radii ``r`` in ``(0, 1)``.

Self-similar grids are cell centred, so the outermost node sits half a cell
inside ``|y| = 1`` where ``rho`` vanishes.  Integrals against ``rho dy`` use
product weights: the weight (and the radial measure) is integrated exactly
against piecewise-linear hats, the rest of the integrand is sampled at nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma, roots_jacobi, roots_legendre

from .profiles import ModelParams, ProfileParams, kappa_star

__all__ = [
    "SelfSimFrame",
    "FieldSnapshot",
    "Quadrature",
    "ball_grid",
    "quadrature",
    "rho_weight",
    "ball_integral",
    "h_norm",
    "h_inner_terms",
    "h_distance_to_profile",
    "profile_frame",
    "to_selfsim",
    "from_selfsim",
]

_GL_NODES = 20


def _check_1d(name, a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return a


@dataclass(frozen=True, eq=False)
class SelfSimFrame:
    """``(w, d_s w)`` sampled on a grid of the ball ``|y| < radius`` at time ``s``.

    ``radius`` is 1 except for the extended frames used by the rigidity runs.
    """

    grid: np.ndarray
    w: np.ndarray
    ws: np.ndarray
    s: float
    params: ModelParams
    radius: float = 1.0

    def __post_init__(self):
        grid = _check_1d("grid", self.grid)
        w = _check_1d("w", self.w)
        ws = _check_1d("ws", self.ws)
        if not (w.shape == ws.shape == grid.shape):
            raise ValueError("grid, w and ws must have the same length")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with >= 2 points")
        if np.any(np.abs(grid) >= self.radius):
            raise ValueError(f"grid points must satisfy |y| < {self.radius}")
        if self.params.N > 1 and grid[0] <= 0:
            raise ValueError("radial grids must hold positive radii")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(ws))):
            raise ValueError("frame values must be finite")
        for name, a in (("grid", grid), ("w", w), ("ws", ws)):
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "radius", float(self.radius))

    def with_fields(self, w=None, ws=None, s=None) -> "SelfSimFrame":
        return replace(
            self,
            w=self.w if w is None else w,
            ws=self.ws if ws is None else ws,
            s=self.s if s is None else s,
        )

    def __neg__(self):
        return self.with_fields(-self.w, -self.ws)

    def __mul__(self, c):
        return self.with_fields(c * self.w, c * self.ws)

    __rmul__ = __mul__

    def __sub__(self, other: "SelfSimFrame"):
        if not np.array_equal(self.grid, other.grid):
            raise ValueError("frames live on different grids")
        return self.with_fields(self.w - other.w, self.ws - other.ws)

    def inner(self) -> "SelfSimFrame":
        """Restriction to the unit ball (identity when ``radius == 1``)."""
        if self.radius == 1.0:
            return self
        keep = np.abs(self.grid) < 1.0
        return SelfSimFrame(self.grid[keep], self.w[keep], self.ws[keep], self.s, self.params)


@dataclass(frozen=True, eq=False)
class FieldSnapshot:
    """``(u, u_t)`` on a physical grid at time ``t``.

    ``alive`` marks grid points that have not been excised after blowing up;
    ``None`` means every point is alive.
    """

    grid: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    t: float
    params: ModelParams
    alive: np.ndarray | None = None

    def __post_init__(self):
        grid = _check_1d("grid", self.grid)
        u = _check_1d("u", self.u)
        ut = _check_1d("ut", self.ut)
        if not (u.shape == ut.shape == grid.shape):
            raise ValueError("grid, u and ut must have the same length")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.params.N > 1 and grid[0] < 0:
            raise ValueError("radial grids must hold non-negative radii")
        alive = None
        if self.alive is not None:
            alive = np.asarray(self.alive, dtype=bool).copy()
            if alive.shape != grid.shape:
                raise ValueError("alive mask has the wrong shape")
            alive.setflags(write=False)
        live = slice(None) if alive is None else alive
        if not (np.all(np.isfinite(u[live])) and np.all(np.isfinite(ut[live]))):
            raise ValueError("snapshot values must be finite")
        for name, a in (("grid", grid), ("u", u), ("ut", ut)):
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "alive", alive)
        object.__setattr__(self, "t", float(self.t))

    @property
    def live(self) -> np.ndarray:
        return np.ones(self.grid.shape, bool) if self.alive is None else self.alive

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])


def ball_grid(params: ModelParams, M: int, radius: float = 1.0) -> np.ndarray:
    """Cell-centred grid with ``M`` cells on ``(-radius, radius)`` (line) or ``(0, radius)`` (radial)."""
    if M < 2:
        raise ValueError("need at least 2 cells")
    if params.N == 1:
        h = 2.0 * radius / M
        return -radius + (np.arange(M) + 0.5) * h
    h = radius / M
    return (np.arange(M) + 0.5) * h


def _rho_r(params: ModelParams, r):
    r2 = np.asarray(r, dtype=float) ** 2
    if np.any(r2 > 1.0):
        raise ValueError("rho is only defined for |y| <= 1")
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(params.alpha * np.log1p(-r2[inside]))
    return out


def rho_weight(params: ModelParams, y):
    """``(1 - |y|^2)^alpha``; zero on the unit sphere.

    ``y`` follows the point convention of :mod:`blowuplab.profiles`.
    """
    y = np.asarray(y, dtype=float)
    r = np.abs(y) if params.N == 1 else np.linalg.norm(y, axis=-1)
    out = _rho_r(params, r)
    return out if out.ndim else float(out)


def _sphere_area(N: int) -> float:
    return float(2.0 * np.pi ** (N / 2.0) / gamma(N / 2.0))


def _measure(params: ModelParams, y):
    """Density of ``rho dy`` in the 1D coordinate (radial measure included)."""
    y = np.asarray(y, dtype=float)
    r = _rho_r(params, np.clip(np.abs(y), 0.0, 1.0))
    if params.N > 1:
        r = r * _sphere_area(params.N) * np.abs(y) ** (params.N - 1)
    return r


class Quadrature(NamedTuple):
    """Product weights on a node set.

    ``mass[j]`` integrates ``f`` against ``rho dy`` from nodal values; ``face[k]``
    integrates a value held on ``[x_k, x_{k+1}]`` against ``(1-|y|^2) rho dy``.
    """

    nodes: np.ndarray
    mass: np.ndarray
    face: np.ndarray
    dx: np.ndarray


@lru_cache(maxsize=64)
def _quadrature_cached(N: int, p: float, key: bytes) -> Quadrature:
    params = ModelParams(N, p)
    x = np.frombuffer(key, dtype=float)
    n = x.size
    lo = -1.0 if N == 1 else 0.0
    t, wt = roots_legendre(_GL_NODES)
    t01 = 0.5 * (t + 1.0)
    a, b = x[:-1], x[1:]
    L = (b - a)[:, None]
    yy = a[:, None] + L * t01[None, :]
    ww = 0.5 * L * wt[None, :]
    mu = _measure(params, yy)
    mass = np.zeros(n)
    mass[:-1] += np.sum(ww * mu * (1.0 - t01), axis=1)
    mass[1:] += np.sum(ww * mu * t01, axis=1)
    face = np.sum(ww * mu * (1.0 - yy * yy), axis=1)

    alpha = params.alpha
    xj, wj = roots_jacobi(_GL_NODES, alpha, 0.0)

    def edge(length, outward_sign):
        # integral of rho * measure over the half cell touching |y| = 1
        tt = 0.5 * length * (1.0 - xj)  # distance to the sphere
        yb = outward_sign * (1.0 - tt)
        g = np.exp(alpha * np.log(2.0 - tt))
        if N > 1:
            g = g * _sphere_area(N) * np.abs(yb) ** (N - 1)
        return (0.5 * length) ** (alpha + 1.0) * np.sum(wj * g)

    mass[-1] += edge(1.0 - x[-1], 1.0)
    if N == 1:
        mass[0] += edge(x[0] - lo, -1.0)
    else:
        L0 = x[0]
        y0 = L0 * t01
        mass[0] += np.sum(0.5 * L0 * wt * _measure(params, y0))
    return Quadrature(x, mass, face, np.diff(x))


def quadrature(params: ModelParams, grid) -> Quadrature:
    grid = np.ascontiguousarray(grid, dtype=float)
    if np.any(np.abs(grid) >= 1.0):
        raise ValueError("quadrature nodes must lie inside the unit ball")
    return _quadrature_cached(params.N, params.p, grid.tobytes())


def ball_integral(params: ModelParams, grid, f) -> float:
    """``int f rho dy`` over the unit ball from nodal values of ``f``."""
    q = quadrature(params, grid)
    return float(np.dot(q.mass, np.asarray(f, dtype=float)))


def h_inner_terms(frame: SelfSimFrame):
    """The three non-negative pieces of the squared H norm: ``(|q1|^2, gradient, |q2|^2)``."""
    fr = frame.inner()
    q = quadrature(fr.params, fr.grid)
    grad = np.diff(fr.w) / q.dx
    return (
        float(np.dot(q.mass, fr.w * fr.w)),
        float(np.dot(q.face, grad * grad)),
        float(np.dot(q.mass, fr.ws * fr.ws)),
    )


def h_norm(frame: SelfSimFrame) -> float:
    """Discrete norm of ``(w, d_s w)`` in the weighted energy space."""
    return float(np.sqrt(sum(h_inner_terms(frame))))


def profile_frame(params: ModelParams, prof: ProfileParams, grid, s: float = 0.0) -> SelfSimFrame:
    """Frame holding ``e * kappa_star(d, nu)`` sampled on ``grid``."""
    pts = _grid_points(params, grid)
    k1, k2 = kappa_star(params, prof, pts)
    return SelfSimFrame(np.asarray(grid, float), prof.e * k1, prof.e * k2, s, params)


def _grid_points(params: ModelParams, grid):
    grid = np.asarray(grid, dtype=float)
    if params.N == 1:
        return grid
    pts = np.zeros(grid.shape + (params.N,))
    pts[..., 0] = grid
    return pts


def h_distance_to_profile(frame: SelfSimFrame, prof: ProfileParams) -> float:
    """H norm of ``(w, d_s w) - e kappa_star(d, nu)`` on the frame's grid."""
    if frame.params.N > 1 and np.any(prof.dvec != 0):
        raise ValueError("radial frames can only be compared with d = 0 profiles")
    fr = frame.inner()
    ref = profile_frame(fr.params, prof, fr.grid, fr.s)
    return h_norm(fr - ref)


def _spline(params: ModelParams, x, v):
    """Not-a-knot cubic spline; radial data are mirrored to keep evenness at r = 0."""
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    if params.N > 1:
        k = 1 if x[0] == 0.0 else 0
        x = np.concatenate([-x[::-1][: x.size - k], x])
        v = np.concatenate([v[::-1][: v.size - k], v])
    return CubicSpline(x, v)


def to_selfsim(
    snap: FieldSnapshot, x0: float, T0: float, grid=None, M: int = 200
) -> SelfSimFrame:
    """Transport a physical snapshot to similarity variables about ``(x0, T0)``.

    ``w = tau^{2/(p-1)} u(x0 + y tau)`` and
    ``d_s w = tau^{2/(p-1)} (tau u_t - tau y.grad u - 2/(p-1) u)`` with
    ``tau = T0 - t``; values come from cubic splines of the snapshot.
    """
    params = snap.params
    tau = T0 - snap.t
    if not tau > 0:
        raise ValueError("snapshot time must precede T0")
    if params.N > 1 and x0 != 0:
        raise ValueError("radial snapshots can only be centred at the origin")
    y = ball_grid(params, M) if grid is None else np.asarray(grid, float)
    x = x0 + y * tau
    lo, hi = snap.grid[0], snap.grid[-1]
    if params.N > 1:
        lo = -hi
    if x.min() < lo or x.max() > hi:
        raise ValueError("the cone about (x0, T0) leaves the snapshot's domain")
    if snap.alive is not None and not np.all(snap.alive):
        r = np.abs(x - x0) if params.N == 1 else np.abs(x)
        reach = r.max() + 2.0 * snap.h
        near = np.abs(snap.grid - (x0 if params.N == 1 else 0.0)) <= reach
        if not np.all(snap.alive[near]):
            raise ValueError("the cone about (x0, T0) meets excised points")
    su = _spline(params, snap.grid, snap.u)
    sut = _spline(params, snap.grid, snap.ut)
    xe = np.abs(x) if params.N > 1 else x
    u = su(xe)
    ux = su(xe, 1)
    ut = sut(xe)
    a = params.rate
    scale = tau**a
    w = scale * u
    ws = scale * (tau * ut - tau * y * ux - a * u)
    return SelfSimFrame(y, w, ws, -np.log(tau), params)


def from_selfsim(frame: SelfSimFrame, x0: float, T0: float) -> FieldSnapshot:
    """Inverse transport: ``u(x, t) = e^{2s/(p-1)} w((x - x0) e^s, s)`` with ``t = T0 - e^{-s}``."""
    params = frame.params
    if params.N > 1 and x0 != 0:
        raise ValueError("radial frames can only be centred at the origin")
    tau = np.exp(-frame.s)
    a = params.rate
    sw = _spline(params, frame.grid, frame.w)
    wy = sw(frame.grid, 1)
    u = tau ** (-a) * frame.w
    ut = tau ** (-a - 1.0) * (frame.ws + a * frame.w + frame.grid * wy)
    x = (x0 if params.N == 1 else 0.0) + frame.grid * tau
    return FieldSnapshot(x, u, ut, T0 - tau, params)
