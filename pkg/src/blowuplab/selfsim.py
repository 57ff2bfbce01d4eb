"""Direct evolution of the self-similar equation on the unit ball.

    w_ss - L w + 2(p+1)/(p-1)^2 w - |w|^{p-1} w = -(p+3)/(p-1) w_s - 2 y.grad w_s

with ``L w = rho^{-1} div(rho grad w - rho (y.grad w) y)``.  On the unit ball the
operator is discretised in flux form: face fluxes ``rho (1-|y|^2) d_y w`` are
differentiated and divided by the nodal weight (radially, the ``r^{N-1}`` part
of the measure is expanded into a first-order term).  The fluxes through ``|y| = 1``
(and through ``r = 0`` in the radial case) vanish, so no boundary data enter.
Stencils are centred where possible and one-sided next to ``|y| = 1``; the
accuracy order is ``cfg.order``.

Balls of radius ``A > 1`` (rigidity runs) use the equivalent non-divergence
form ``(1-|y|^2) w_rr + ((N-1)/r - 2(p+1)/(p-1) r) w_r`` with ``w_rr`` taken as
the squared centred gradient; at ``|y| = A`` every characteristic leaves the
domain, so one-sided stencils close the scheme.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .config import SolverConfig
from .profiles import ModelParams
from .simvars import SelfSimFrame, _rho_r, h_norm

__all__ = ["apply_L", "evolve", "SelfSimOperator", "SelfSimDivergence", "fd_weights"]


class SelfSimDivergence(RuntimeError):
    """The self-similar solution left every configured bound (blow-up in finite s)."""

    def __init__(self, s: float, frames: list, reason: str):
        super().__init__(f"divergence at s={s:.6g}: {reason}")
        self.s = s
        self.frames = frames
        self.reason = reason


def fd_weights(x0: float, xs, m: int) -> np.ndarray:
    """Fornberg weights for the ``m``-th derivative at ``x0`` from nodes ``xs``."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, -1, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3 if k else c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _stencil_rows(targets, nodes, deriv, spec, mirror):
    """Sparse rows applying derivative stencils.

    ``spec[i] = (lo, width)`` selects source indices ``lo .. lo+width-1`` for
    target ``i``.  Negative indices stand for mirror images about the origin:
    ``mirror = (sign, index_map)`` gives the value sign and the source index.
    """
    rows, cols, vals = [], [], []
    sign_m, index_map = mirror
    for i, (x0, (lo, width)) in enumerate(zip(targets, spec)):
        idx = np.arange(lo, lo + width)
        src = np.array([j if j >= 0 else index_map(j) for j in idx])
        coords = np.where(idx >= 0, nodes[src], -nodes[src])
        sign = np.where(idx >= 0, 1.0, sign_m)
        wts = fd_weights(x0, coords, deriv) * sign
        rows.extend([i] * width)
        cols.extend(src.tolist())
        vals.extend(wts.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(targets), nodes.size))


class SelfSimOperator:
    """Discrete ``L`` and ``grad`` for one grid; build through :meth:`for_grid`."""

    def __init__(self, params: ModelParams, M: int, radius: float, order: int):
        from .simvars import ball_grid

        self.params, self.M, self.radius, self.order = params, M, radius, order
        N, k = params.N, order
        y = ball_grid(params, M, radius)
        self.grid = y
        self.h = float(y[1] - y[0])
        radial = N > 1
        node_mirror = (1.0, lambda j: -1 - j)  # even extension of nodal values

        def centred(n_targets, first, width, n_src):
            spec = []
            for i in range(n_targets):
                lo = min(first(i), n_src - width)
                spec.append((lo if radial else max(lo, 0), width))
            return spec

        # centred gradient with k+1 nodes
        self.G = _stencil_rows(y, y, 1, centred(M, lambda j: j - k // 2, k + 1, M), node_mirror)

        if radius == 1.0:
            faces = np.arange(M + 1) * self.h + (0.0 if radial else -1.0)
            inner = faces[1:M]
            face_mirror = (-1.0, lambda j: -j)  # odd extension of fluxes
            Df = _stencil_rows(inner, y, 1, centred(M - 1, lambda i: i + 1 - k // 2, k, M), node_mirror)
            Dn = _stencil_rows(y, faces, 1, centred(M, lambda j: j + 1 - k // 2, k, M + 1), face_mirror)
            coef = _rho_r(params, inner) * (1.0 - inner**2)
            den = _rho_r(params, y)
            # fluxes through the two end faces are identically zero
            lift = sp.csr_matrix(
                (np.ones(M - 1), (np.arange(1, M), np.arange(M - 1))), shape=(M + 1, M - 1)
            )
            L = sp.diags(1.0 / den) @ Dn @ lift @ sp.diags(coef) @ Df
            if radial:
                # r^{1-N} (r^{N-1} F)' = F' + (N-1) F / r, the second term through the
                # mirrored gradient so that r = 0 needs no special stencil
                L = L + sp.diags((N - 1) * (1.0 - y**2) / y) @ self.G
            self.L = L.tocsr()
        else:
            # second derivative as the square of the centred gradient: its symbol
            # matches that of the mixed term 2 y d_y d_s, whereas a compact second
            # difference makes grid modes grow wherever |y| > 1
            G_odd = _stencil_rows(
                y, y, 1, centred(M, lambda j: j - k // 2, k + 1, M), (-1.0, lambda j: -1 - j)
            )
            b = -(2.0 * (params.p + 1.0) / (params.p - 1.0)) * y
            if radial:
                b = b + (N - 1) / y
            self.L = (sp.diags(1.0 - y**2) @ G_odd @ self.G + sp.diags(b) @ self.G).tocsr()

    @staticmethod
    @lru_cache(maxsize=32)
    def _cached(N, p, M, radius, order):
        return SelfSimOperator(ModelParams(N, p), M, radius, order)

    @classmethod
    def for_grid(cls, params: ModelParams, grid, radius: float = 1.0, order: int = 6):
        from .simvars import ball_grid

        grid = np.asarray(grid, dtype=float)
        M = grid.size
        if not np.allclose(grid, ball_grid(params, M, radius), rtol=0, atol=1e-12 * radius):
            raise ValueError("self-similar solver needs the standard cell-centred grid")
        if M < order + 3:
            raise ValueError("grid too coarse for the requested order")
        return cls._cached(params.N, params.p, M, float(radius), int(order))


def apply_L(frame: SelfSimFrame, order: int = 6) -> np.ndarray:
    """Discrete ``L w`` on the frame's grid."""
    op = SelfSimOperator.for_grid(frame.params, frame.grid, frame.radius, order)
    return op.L @ frame.w


def _rhs(op: SelfSimOperator, w, v):
    p = op.params.p
    acc = (
        op.L @ w
        - op.params.mass_coef * w
        + np.abs(w) ** (p - 1.0) * w
        - (p + 3.0) / (p - 1.0) * v
        - 2.0 * op.grid * (op.G @ v)
    )
    return acc


def time_step(op: SelfSimOperator, cfg: SolverConfig) -> float:
    return cfg.cfl * op.h * min(1.0, 1.0 / (1.0 + float(np.max(np.abs(op.grid)))))


def evolve(
    frame: SelfSimFrame,
    s_end: float,
    cfg: SolverConfig = SolverConfig(),
    outputs=None,
    callback=None,
) -> list[SelfSimFrame]:
    """Integrate from ``frame.s`` to ``s_end`` with classical RK4.

    Returns the initial frame followed by frames at the output times
    (``outputs`` or a uniform ``cfg.ds_out`` spacing).  ``callback(frame)``
    is invoked at every output and may raise to abort the run.  Raises
    :class:`SelfSimDivergence` when ``max|w|`` passes ``cfg.u_max``, the H norm
    passes ``cfg.norm_bound`` or the state stops being finite.
    """
    if not s_end > frame.s:
        raise ValueError("s_end must exceed the frame's time")
    op = SelfSimOperator.for_grid(frame.params, frame.grid, frame.radius, cfg.order)
    if outputs is None:
        n_out = max(1, int(math.ceil((s_end - frame.s) / cfg.ds_out - 1e-9)))
        outputs = frame.s + (s_end - frame.s) * np.arange(1, n_out + 1) / n_out
    outputs = np.asarray(outputs, dtype=float)
    if np.any(np.diff(outputs) <= 0) or outputs[0] <= frame.s or outputs[-1] > s_end + 1e-12:
        raise ValueError("outputs must increase within (frame.s, s_end]")
    dt_max = time_step(op, cfg)
    if dt_max < cfg.dt_min:
        raise ValueError("time step underflow")

    w = np.array(frame.w, dtype=float)
    v = np.array(frame.ws, dtype=float)
    s = frame.s
    frames = [frame]
    for s_next in outputs:
        n = max(1, int(math.ceil((s_next - s) / dt_max - 1e-9)))
        dt = (s_next - s) / n
        for i in range(n):
            k1w, k1v = v, _rhs(op, w, v)
            k2w = v + 0.5 * dt * k1v
            k2v = _rhs(op, w + 0.5 * dt * k1w, k2w)
            k3w = v + 0.5 * dt * k2v
            k3v = _rhs(op, w + 0.5 * dt * k2w, k3w)
            k4w = v + dt * k3v
            k4v = _rhs(op, w + dt * k3w, k4w)
            w = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            amp = float(np.max(np.abs(w)))
            if not (np.isfinite(amp) and np.all(np.isfinite(v))) or amp > cfg.u_max:
                raise SelfSimDivergence(s + (i + 1) * dt, frames, f"max|w| = {amp:.3g}")
        s = float(s_next)
        out = SelfSimFrame(frame.grid, w, v, s, frame.params, frame.radius)
        norm = h_norm(out)
        if norm > cfg.norm_bound:
            raise SelfSimDivergence(s, frames, f"H norm = {norm:.3g}")
        frames.append(out)
        if callback is not None:
            callback(out)
    return frames
