"""Numerical blow-up analysis for ``u_tt = Lap u + |u|^{p-1} u``.

Physical-space leapfrog solver with blow-up time fitting, self-similar
solver, Lyapunov functional, soliton-manifold modulation and geometric
checks on blow-up surfaces.
"""
__version__ = "0.1.0"

from .config import SolverConfig
from .profiles import (
    ModelParams,
    ProfileParams,
    kappa,
    kappa_star,
    lorentz_soliton,
    lorentz_soliton_dt,
    ode_solution,
    w_minus,
)
from .simvars import FieldSnapshot, SelfSimFrame, ball_grid, from_selfsim, h_norm, to_selfsim
from .selfsim import SelfSimDivergence, apply_L, evolve
from .wave import (
    BlowupSurface,
    BlowupTimeEstimator,
    build_surface,
    estimate_blowup_time,
    fit_blowup_time,
    simulate,
    snapshot_from,
    step,
)
from .energy import EnergyMonitor, blowup_criterion, check_monotone, energy_trace, lyapunov
from .modulation import (
    ModulationTrace,
    ProfileFitter,
    estimate_decay_rate,
    fit_profile,
    modulation_trace,
    param_distance,
    trapping_check,
)
from .geometry import (
    cone_test,
    gradient_vs_d,
    lipschitz_report,
    local_min_report,
    rigidity_experiment,
    stability_experiment,
)
from .bumps import QuinticBump, seeded_bump
