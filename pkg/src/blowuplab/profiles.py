"""Closed-form objects of the subconformal semilinear wave equation.

Everything here is exact: model constants, the soliton family ``kappa(d, y)``,
its two-parameter extension ``kappa_star(d, nu, y)``, the special blow-up
solution ``w_minus``, the boosted soliton in physical variables and the
space-independent ODE solution.

Points are given as floats / arrays of shape ``(...)`` when ``N == 1`` and as
arrays of shape ``(..., N)`` otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "ModelParams",
    "ProfileParams",
    "kappa",
    "kappa_star",
    "w_minus",
    "lorentz_soliton",
    "lorentz_soliton_dt",
    "ode_solution",
]


def _pos_pow(x, a):
    """``x**a`` for strictly positive ``x`` through exp/log."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("power of a non-positive base")
    out = np.exp(a * np.log(x))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ModelParams:
    """Space dimension ``N`` and exponent ``p`` of ``u_tt = Lap u + |u|^{p-1} u``.

    Construction fails unless ``p > 1`` and, for ``N >= 2``, ``p < (N+3)/(N-1)``.
    """

    N: int = 1
    p: float = 3.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "p", float(self.p))
        if not np.isfinite(self.p) or self.p <= 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")
        if self.N >= 2 and not self.p < (self.N + 3) / (self.N - 1):
            raise ValueError(
                f"p={self.p} is not subconformal for N={self.N} "
                f"(need p < {(self.N + 3) / (self.N - 1):g})"
            )

    @cached_property
    def kappa0(self) -> float:
        return float(np.exp(np.log(2.0 * (self.p + 1.0) / (self.p - 1.0) ** 2) / (self.p - 1.0)))

    @cached_property
    def alpha(self) -> float:
        return 2.0 / (self.p - 1.0) - (self.N - 1) / 2.0

    @property
    def rate(self) -> float:
        """Self-similar exponent ``2/(p-1)``."""
        return 2.0 / (self.p - 1.0)

    @property
    def mass_coef(self) -> float:
        """Linear coefficient ``2(p+1)/(p-1)^2`` of the self-similar equation."""
        return 2.0 * (self.p + 1.0) / (self.p - 1.0) ** 2

    def to_dict(self) -> dict:
        return {"N": self.N, "p": self.p}


def _as_vec(d, N: int) -> np.ndarray:
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.shape != (N,):
        raise ValueError(f"expected a vector of length {N}, got shape {d.shape}")
    return d


def _dot(d: np.ndarray, y, N: int):
    y = np.asarray(y, dtype=float)
    if N == 1:
        return d[0] * y
    if y.shape[-1] != N:
        raise ValueError(f"points must have trailing dimension {N}")
    return y @ d


def _norm(y, N: int):
    y = np.asarray(y, dtype=float)
    return np.abs(y) if N == 1 else np.linalg.norm(y, axis=-1)


@dataclass(frozen=True)
class ProfileParams:
    """Modulation coordinates ``(e, d, nu)`` of ``e * kappa_star(d, nu)``."""

    e: int
    d: tuple
    nu: float = 0.0
    _dvec: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.e not in (1, -1):
            raise ValueError(f"e must be +1 or -1, got {self.e!r}")
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if d.ndim != 1 or not np.all(np.isfinite(d)):
            raise ValueError("d must be a finite vector")
        nd = float(np.linalg.norm(d))
        if not nd < 1.0:
            raise ValueError(f"|d| must be < 1, got {nd}")
        if not float(self.nu) > -1.0 + nd:
            raise ValueError(f"nu must exceed -1+|d| = {-1.0 + nd}, got {self.nu}")
        object.__setattr__(self, "e", int(self.e))
        object.__setattr__(self, "d", tuple(float(v) for v in d))
        object.__setattr__(self, "nu", float(self.nu))
        d.setflags(write=False)
        object.__setattr__(self, "_dvec", d)

    @property
    def dvec(self) -> np.ndarray:
        return self._dvec

    def flipped(self) -> "ProfileParams":
        return ProfileParams(-self.e, self.d, self.nu)


def _check_ball(y, N: int, what: str = "y"):
    if np.any(_norm(y, N) >= 1.0):
        raise ValueError(f"{what} must lie in the open unit ball")


def kappa(params: ModelParams, d, y):
    """Soliton ``kappa0 (1-|d|^2)^{1/(p-1)} / (1 + d.y)^{2/(p-1)}``."""
    d = _as_vec(d, params.N)
    if not np.linalg.norm(d) < 1.0:
        raise ValueError("|d| must be < 1")
    _check_ball(y, params.N)
    amp = params.kappa0 * _pos_pow(1.0 - d @ d, 1.0 / (params.p - 1.0))
    return amp / _pos_pow(1.0 + _dot(d, y, params.N), params.rate)


def kappa_star(params: ModelParams, prof: ProfileParams, y):
    """Pair ``(kappa1*, kappa2*)`` at points ``y``; ``kappa2* = nu d/dnu kappa1*``."""
    d = _as_vec(prof.d, params.N)
    _check_ball(y, params.N)
    p = params.p
    amp = params.kappa0 * _pos_pow(1.0 - d @ d, 1.0 / (p - 1.0))
    den = 1.0 + _dot(d, y, params.N) + prof.nu
    k1 = amp / _pos_pow(den, params.rate)
    k2 = -(2.0 * prof.nu / (p - 1.0)) * amp / _pos_pow(den, (p + 1.0) / (p - 1.0))
    return k1, k2


def w_minus(params: ModelParams, d0, y, s):
    """Special solution ``kappa0 (1-|d0|^2)^{1/(p-1)} / (1 - e^s + d0.y)^{2/(p-1)}``.

    Defined for ``s < log(1 - |d0|)``.
    """
    d0 = _as_vec(d0, params.N)
    nd = float(np.linalg.norm(d0))
    if not nd < 1.0:
        raise ValueError("|d0| must be < 1")
    if not s < np.log1p(-nd):
        raise ValueError(f"s={s} is past the blow-up bound log(1-|d0|)={np.log1p(-nd)}")
    _check_ball(y, params.N)
    amp = params.kappa0 * _pos_pow(1.0 - d0 @ d0, 1.0 / (params.p - 1.0))
    return amp / _pos_pow(1.0 - np.exp(s) + _dot(d0, y, params.N), params.rate)


def _lorentz_den(params, d, x_star, T_star, x, t):
    d = _as_vec(d, params.N)
    if not np.linalg.norm(d) < 1.0:
        raise ValueError("|d| must be < 1")
    x = np.asarray(x, dtype=float)
    xs = np.asarray(x_star, dtype=float) if params.N > 1 else float(np.squeeze(x_star))
    den = T_star - np.asarray(t, dtype=float) + _dot(d, x - xs, params.N)
    return d, den


def lorentz_soliton(params: ModelParams, e: int, d, x_star, T_star: float, x, t):
    """Boosted soliton ``e kappa0 (1-|d|^2)^{1/(p-1)} / (T* - t + d.(x-x*))^{2/(p-1)}``.

    Its blow-up surface is the hyperplane ``T(x) = T* + d.(x - x*)``.
    """
    if e not in (1, -1):
        raise ValueError("e must be +1 or -1")
    d, den = _lorentz_den(params, d, x_star, T_star, x, t)
    amp = params.kappa0 * _pos_pow(1.0 - d @ d, 1.0 / (params.p - 1.0))
    return e * amp / _pos_pow(den, params.rate)


def lorentz_soliton_dt(params: ModelParams, e: int, d, x_star, T_star: float, x, t):
    """Time derivative of :func:`lorentz_soliton`."""
    d, den = _lorentz_den(params, d, x_star, T_star, x, t)
    u = lorentz_soliton(params, e, d, x_star, T_star, x, t)
    return params.rate * u / den


def ode_solution(params: ModelParams, T: float, t):
    """``kappa0 (T - t)^{-2/(p-1)}``, the solution of ``u'' = u^p`` blowing up at ``T``."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= T):
        raise ValueError("t must be < T")
    return params.kappa0 / _pos_pow(T - t, params.rate)
