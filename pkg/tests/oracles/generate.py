"""Regenerate ``frozen.json``: reference values from independent computations.

Run from the repository root with ``python tests/oracles/generate.py``.  Each
value comes from mpmath, sympy or scipy directly; only the brute-force
modulation minimiser reuses the package's distance function, because it
checks the optimiser rather than the quadrature.
"""
import json
from pathlib import Path

import mpmath as mp
import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

mp.mp.dps = 40
out = {}

# hyperbolic parameter distance
def pdist(a, b):
    a, b = mp.mpf(a), mp.mpf(b)
    return abs(mp.atanh(abs(a)) - mp.atanh(abs(b))) + abs(a - b) / mp.sqrt(1 - abs(a))

out["param_distance"] = [[0.0, 0.5, float(pdist(0, 0.5))], [0.9, 0.91, float(pdist("0.9", "0.91"))]]

# closed-form energies for N=1, p=3: E(lam) = (2 lam^2 - lam^4) * int (1-y^2) dy
y, lam = sp.symbols("y lam")
mass = sp.integrate(1 - y**2, (y, -1, 1))
E = (2 * lam**2 - lam**4) * mass
out["mass_rho"] = float(mass)
out["energy_kappa0"] = float(E.subs(lam, 1))
out["energy_1p5"] = float(E.subs(lam, sp.Rational(3, 2)))
out["continuity_lhs_1e-3"] = float(abs(E.subs(lam, sp.Rational(1001, 1000)) - E.subs(lam, 1)))
out["h_norm_one"] = float(sp.sqrt(mass))
out["h_distance_flip"] = float(2 * sp.sqrt(2) * sp.sqrt(mass))

# L w for w = y (N=1, p=3): (1/rho) d/dy ((1-y^2) rho w'), rho = 1 - y^2
w = y
Lw = sp.simplify(sp.diff((1 - y**2) * (1 - y**2) * sp.diff(w, y), y) / (1 - y**2))
pts = np.linspace(-0.9, 0.9, 10)
out["L_of_y"] = [[float(t), float(Lw.subs(y, t))] for t in pts]

# kappa_star(d, mu e^s) solves the self-similar equation exactly (symbolic residual)
s, d, mu = sp.symbols("s d mu")
p = 3
a = sp.Rational(2, p - 1)
k0 = sp.sqrt(2)
wst = k0 * (1 - d**2) ** sp.Rational(1, p - 1) / (1 + d * y + mu * sp.exp(s)) ** a
rho = 1 - y**2
res = (
    sp.diff(wst, s, 2)
    - sp.diff(rho * (1 - y**2) * sp.diff(wst, y), y) / rho
    + sp.Rational(2 * (p + 1), (p - 1) ** 2) * wst
    - wst**p
    + sp.Rational(p + 3, p - 1) * sp.diff(wst, s)
    + 2 * y * sp.diff(wst, y, s)
)
vals = [float(res.subs({d: 0.3, mu: 0.1, s: 0.0, y: t})) for t in (-0.5, 0.0, 0.7)]
out["kappa_star_residual_max"] = max(abs(v) for v in vals)

# ODE u'' = u^3 from the T = 1 data: blow-up time by adaptive integration
T = 1.0
u0 = np.sqrt(2.0) * T ** -1.0
v0 = np.sqrt(2.0) * T ** -2.0
big = lambda t, z: z[0] - 1e6
big.terminal = True
sol = solve_ivp(lambda t, z: [z[1], z[0] ** 3], (0, 2), [u0, v0], events=big, rtol=1e-12, atol=1e-14)
tb = sol.t_events[0][0]
out["ode_blowup_time"] = float(tb + np.sqrt(2.0) / 1e6)  # u ~ sqrt(2)/(T - t) near T

# direct substitutions used in the profile tests
out["kappa_d05_y0"] = float(mp.sqrt(2) * mp.sqrt(mp.mpf("0.75")))
out["lorentz_d05_x04"] = float(mp.sqrt(2) * mp.sqrt(mp.mpf("0.75")) / mp.mpf("1.2"))

# brute-force minimiser for kappa(0.3) + bump of H norm 1e-2 (M = 400)
from blowuplab.bumps import QuinticBump
from blowuplab.profiles import ModelParams, ProfileParams, kappa
from blowuplab.simvars import SelfSimFrame, ball_grid, h_distance_to_profile, h_norm

P = ModelParams()
g = ball_grid(P, 400)
b = QuinticBump(0.1, 0.5)(g)
b *= 1e-2 / h_norm(SelfSimFrame(g, b, 0 * g, 0.0, P))
fr = SelfSimFrame(g, kappa(P, [0.3], g) + b, 0 * g, 0.0, P)
best = (np.inf, None, None)
for dd in np.arange(0.25, 0.35 + 1e-9, 1e-3):
    for nu in np.arange(-0.05, 0.05 + 1e-9, 1e-3):
        q = h_distance_to_profile(fr, ProfileParams(1, (float(dd),), float(nu)))
        if q < best[0]:
            best = (q, float(dd), float(nu))
out["modulation_bruteforce"] = {"qnorm": best[0], "d": best[1], "nu": best[2], "grid_step": 1e-3}

path = Path(__file__).with_name("frozen.json")
path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
print(json.dumps(out, indent=2, sort_keys=True))
