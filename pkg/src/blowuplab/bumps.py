"""Compactly supported quintic bumps used as perturbations and extensions.

``b(x) = A (1 - z^2)^5`` with ``z = (x - c) / r`` on ``|z| < 1``.  The bump is
C^4 and polynomial on its support, so its physical norms integrate exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

__all__ = ["QuinticBump", "seeded_bump"]

_SHAPE = Polynomial([1.0, 0.0, -1.0]) ** 5


def _integral_pm1(poly: Polynomial) -> float:
    anti = poly.integ()
    return float(anti(1.0) - anti(-1.0))


@dataclass(frozen=True)
class QuinticBump:
    center: float
    radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")

    def __call__(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.radius
        return np.where(np.abs(z) < 1.0, self.amplitude * (1.0 - z * z) ** 5, 0.0)

    def derivative(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.radius
        inside = np.abs(z) < 1.0
        return np.where(inside, -10.0 * self.amplitude * z * (1.0 - z * z) ** 4 / self.radius, 0.0)

    def scaled(self, amplitude: float) -> "QuinticBump":
        return QuinticBump(self.center, self.radius, amplitude)

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.radius, self.center + self.radius

    def l2_norm(self) -> float:
        """Exact ``(int b^2 dx)^{1/2}`` over the line."""
        return abs(self.amplitude) * math.sqrt(self.radius * _integral_pm1(_SHAPE**2))

    def h1_seminorm(self) -> float:
        """Exact ``(int b'^2 dx)^{1/2}`` over the line."""
        return abs(self.amplitude) * math.sqrt(_integral_pm1(_SHAPE.deriv() ** 2) / self.radius)

    def energy_norm(self, velocity_share: float = 0.0) -> float:
        """Norm of ``(b cos(theta), b sin(theta))`` in ``H^1 x L^2`` with ``sin^2 theta = velocity_share``."""
        l2, h1 = self.l2_norm(), self.h1_seminorm()
        c2 = 1.0 - velocity_share
        return math.sqrt(c2 * (l2 * l2 + h1 * h1) + velocity_share * l2 * l2)


def seeded_bump(seed: int, support: tuple[float, float], amplitude: tuple[float, float]) -> QuinticBump:
    """Bump with centre, radius and signed amplitude drawn from ``numpy.random.default_rng(seed)``.

    The support of the result lies inside ``support``; the amplitude magnitude
    is uniform in ``amplitude`` with a random sign.
    """
    lo, hi = support
    if not hi > lo:
        raise ValueError("empty support interval")
    rng = np.random.default_rng(seed)
    half = 0.5 * (hi - lo)
    radius = half * rng.uniform(0.5, 1.0)
    center = rng.uniform(lo + radius, hi - radius)
    amp = rng.uniform(*amplitude) * (1.0 if rng.random() < 0.5 else -1.0)
    return QuinticBump(float(center), float(radius), float(amp))
