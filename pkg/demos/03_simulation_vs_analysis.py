"""Checking the Markov chain analysis against Monte Carlo.

The long-run averages of a policy come from the stationary distribution of
the chain it induces.  Here the same numbers are estimated by simulating the
link slot by slot with fresh fading draws, including the randomization
between the two bracketing policies.
"""
from aoi_energy import SystemConfig, exponential_gain, quantize_channel, solve_cmdp
from aoi_energy.simulator import baseline_generation, baseline_retransmission, simulate_replicas
from aoi_energy.analysis import evaluate_policy

model = quantize_channel(exponential_gain(), K=128, rate=1.0)
cfg = SystemConfig()
sol = solve_cmdp(model, cfg)

candidates = {
    "optimal": (sol.mixed_policy(), sol.mixed),
    "retransmission": None,
    "generation": None,
}
for name, make in (("retransmission", baseline_retransmission), ("generation", baseline_generation)):
    pol = make(cfg.c_max, model, cfg)
    candidates[name] = (pol, evaluate_policy(pol, cfg)[0])

print(f"{'policy':<15}{'age (chain)':>12}{'age (sim)':>16}{'psi (chain)':>13}{'psi (sim)':>16}")
for name, (pol, m) in candidates.items():
    s = simulate_replicas(pol, cfg, 200_000, seeds=range(5))
    print(f"{name:<15}{m.avg_age:12.4f}{s.mean['time_avg_age']:10.4f} ±{s.stderr['time_avg_age']:.3f}"
          f"{m.energy_efficiency:13.4f}{s.mean['energy_efficiency']:10.4f} ±{s.stderr['energy_efficiency']:.3f}")
