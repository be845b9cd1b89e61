"""Brute force on a tiny instance.

With two power levels, two rounds and ages up to six there are few enough
deterministic policies to evaluate every one exactly.  Mixing any two of
them traces out the achievable (power, objective) region; its lower convex
hull at the budget is the true constrained optimum, which the Lagrangian
solver should reproduce.
"""
from aoi_energy import SystemConfig, exponential_gain, quantize_channel, solve_cmdp
from aoi_energy.oracle import evaluate_all, oracle_solve

model = quantize_channel(exponential_gain(), K=2, rate=1.0)
base = SystemConfig(M=2, delta_max=6, c_max=1.0, omega=1.0)
ev = evaluate_all(model, base)
print(f"{len(ev.transmit)} policies after removing dominated actions")

for c in (0.2, 0.5, 1.0, 2.0):
    cfg = SystemConfig(M=2, delta_max=6, c_max=c, omega=1.0)
    o = oracle_solve(model, cfg, evaluated=ev)
    s = solve_cmdp(model, cfg)
    print(f"c_max={c:3.1f} W  oracle {o.objective:.9f}  solver {s.objective(1.0):.9f}  xi {s.xi:.3f}")
