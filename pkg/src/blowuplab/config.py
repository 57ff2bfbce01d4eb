"""Solver configuration shared by the physical and self-similar solvers."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

__all__ = ["SolverConfig", "BOUNDARIES"]

BOUNDARIES = ("sponge", "dirichlet", "reflect")


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.4
    u_max: float = 1e6
    dt_min: float = 1e-13
    refine_levels: int = 3
    domain: float = 2.0
    cells: int = 2000
    boundary: str = "sponge"
    # exact soliton (e, d, x*, T*) pinned at the boundary when boundary == "dirichlet"
    pin: tuple | None = None
    # physical solver: dt <= ode_cfl * (kappa0/max|u|)^((p-1)/2)
    ode_cfl: float = 0.02
    excise: bool = True
    sponge_width: float = 0.5
    sponge_strength: float = 20.0
    # runs stop here even without blow-up, so data that never blow up terminate
    t_max: float = 20.0
    max_steps: int = 10_000_000
    # self-similar solver
    order: int = 6
    # self-similar grid cells (line: on (-1, 1); radial: on (0, 1))
    ss_cells: int = 800
    ds_out: float = 0.25
    norm_bound: float = 1e4

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")
        if not self.dt_min > 0:
            raise ValueError("dt_min must be positive")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if self.boundary == "dirichlet" and self.pin is None:
            raise ValueError("dirichlet boundary needs pin=(e, d, x_star, T_star)")
        if self.order not in (2, 4, 6):
            raise ValueError("order must be 2, 4 or 6")
        if self.ss_cells < 10:
            raise ValueError("need at least 10 self-similar cells")
        if self.cells < 4:
            raise ValueError("need at least 4 cells")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not 0.0 < self.ode_cfl < 1.0:
            raise ValueError("ode_cfl must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]
