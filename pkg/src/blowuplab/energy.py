"""The Lyapunov functional of the self-similar equation and checks built on it.

    E(w, w_s) = int ( w_s^2/2 + (1-|y|^2) |grad w|^2 / 2 + (p+1)/(p-1)^2 w^2
                      - |w|^{p+1}/(p+1) ) rho dy

(for the radial and one-dimensional fields handled here ``|grad w|^2 - (y.grad w)^2``
reduces to ``(1-|y|^2) w_r^2``).  It uses the same product quadrature as the H norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import beta, gamma

from .profiles import ModelParams
from .simvars import SelfSimFrame, h_norm, quadrature

__all__ = [
    "lyapunov",
    "constant_energy",
    "EnergyTrace",
    "energy_trace",
    "check_monotone",
    "EnergyIncrease",
    "EnergyMonitor",
    "blowup_criterion",
    "continuity_gap",
    "calibrate_continuity_constant",
]


def lyapunov(frame: SelfSimFrame) -> float:
    """Discrete ``E(w, w_s)`` on the unit ball."""
    fr = frame.inner()
    p = fr.params.p
    q = quadrature(fr.params, fr.grid)
    grad = np.diff(fr.w) / q.dx
    aw = np.abs(fr.w)
    density = 0.5 * fr.ws**2 + (p + 1.0) / (p - 1.0) ** 2 * fr.w**2 - aw ** (p + 1.0) / (p + 1.0)
    return float(np.dot(q.mass, density) + 0.5 * np.dot(q.face, grad * grad))


def constant_energy(params: ModelParams, lam: float) -> float:
    """Exact ``E(lam kappa0, 0)``: a multiple of ``lam^2 - 2 lam^{p+1}/(p+1)``.

    ``int rho`` over the unit ball is a Beta function.
    """
    p, N, a = params.p, params.N, params.alpha
    if N == 1:
        mass = beta(0.5, a + 1.0)
    else:
        mass = np.pi ** (N / 2.0) / gamma(N / 2.0) * beta(N / 2.0, a + 1.0)
    k2 = params.kappa0**2
    return float(k2 * (p + 1.0) / (p - 1.0) ** 2 * (lam**2 - 2.0 * lam ** (p + 1.0) / (p + 1.0)) * mass)


@dataclass(frozen=True)
class EnergyTrace:
    """``(s, E)`` samples of one run."""

    samples: tuple
    params: ModelParams

    def __post_init__(self):
        rows = tuple((float(s), float(E)) for s, E in self.samples)
        if np.any(np.diff([r[0] for r in rows]) <= 0):
            raise ValueError("trace times must be strictly increasing")
        object.__setattr__(self, "samples", rows)

    @property
    def s(self) -> np.ndarray:
        return np.array([r[0] for r in self.samples])

    @property
    def E(self) -> np.ndarray:
        return np.array([r[1] for r in self.samples])

    def table(self):
        return ["s", "E"], np.array(self.samples, dtype=float).reshape(-1, 2)

    @classmethod
    def from_table(cls, rows, params: ModelParams) -> "EnergyTrace":
        rows = np.asarray(rows, dtype=float).reshape(-1, 2)
        return cls(tuple(map(tuple, rows)), params)


def energy_trace(frames: Sequence[SelfSimFrame]) -> EnergyTrace:
    if not frames:
        raise ValueError("no frames")
    return EnergyTrace(tuple((f.s, lyapunov(f)) for f in frames), frames[0].params)


def check_monotone(trace: EnergyTrace, tol: float) -> dict:
    """Flag every increment ``E(s_{k+1}) - E(s_k) > tol``."""
    inc = np.diff(trace.E)
    bad = np.flatnonzero(inc > tol)
    return {
        "passed": bool(bad.size == 0),
        "tol": float(tol),
        "max_increment": float(inc.max()) if inc.size else 0.0,
        "min_increment": float(inc.min()) if inc.size else 0.0,
        "violations": [
            {"s": float(trace.s[k + 1]), "increment": float(inc[k])} for k in bad
        ],
    }


class EnergyIncrease(RuntimeError):
    """Raised by :class:`EnergyMonitor` when ``E`` grows by more than its tolerance."""


class EnergyMonitor:
    """Callback for :func:`blowuplab.selfsim.evolve` that aborts on energy growth."""

    def __init__(self, tol: float, initial: SelfSimFrame | None = None):
        self.tol = float(tol)
        self.samples: list[tuple[float, float]] = []
        if initial is not None:
            self(initial)

    def __call__(self, frame: SelfSimFrame):
        E = lyapunov(frame)
        if self.samples and E - self.samples[-1][1] > self.tol:
            s0, E0 = self.samples[-1]
            raise EnergyIncrease(
                f"E grew by {E - E0:.3g} (> {self.tol:.3g}) between s={s0:.6g} and s={frame.s:.6g}"
            )
        self.samples.append((frame.s, E))

    def trace(self, params: ModelParams) -> EnergyTrace:
        return EnergyTrace(tuple(self.samples), params)


def blowup_criterion(frame: SelfSimFrame) -> bool:
    """``E < 0``, which forces the self-similar solution to leave every bound in finite time."""
    return lyapunov(frame) < 0.0


def _continuity_scale(A: SelfSimFrame, B: SelfSimFrame) -> float:
    p = A.params.p
    return (1.0 + h_norm(A) ** p + h_norm(B) ** p) * h_norm(A - B)


def continuity_gap(A: SelfSimFrame, B: SelfSimFrame, C: float) -> tuple[float, float]:
    """``(|E(A) - E(B)|, C (1 + |A|^p + |B|^p) |A - B|)`` in the H norm."""
    if not np.array_equal(A.grid, B.grid):
        raise ValueError("frames live on different grids")
    return abs(lyapunov(A) - lyapunov(B)), float(C) * _continuity_scale(A, B)


def calibrate_continuity_constant(pairs: Iterable[tuple[SelfSimFrame, SelfSimFrame]]) -> float:
    """Twice the largest observed ratio ``lhs / scale`` over a validation family."""
    best = 0.0
    for A, B in pairs:
        scale = _continuity_scale(A, B)
        if scale > 0:
            best = max(best, abs(lyapunov(A) - lyapunov(B)) / scale)
    if not math.isfinite(best):
        raise ValueError("non-finite ratio in the validation family")
    return 2.0 * best
