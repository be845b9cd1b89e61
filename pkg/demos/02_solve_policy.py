"""Solving for the age-optimal transmission policy under a power budget.

The source can retransmit the pending packet (r) or sense a fresh one (g)
and pick one of K power levels.  The solver relaxes the average power
budget with a multiplier eta, solves each relaxed problem by value
iteration, and bisects on eta.  The answer is a mix of the two policies
that bracket the budget.
"""
from aoi_energy import SystemConfig, exponential_gain, quantize_channel, solve_cmdp

model = quantize_channel(exponential_gain(), K=128, rate=1.0)
cfg = SystemConfig(M=4, delta_max=100, c_max=10 ** -0.3, alpha=0.5, omega=1.0)
sol = solve_cmdp(model, cfg)

print(f"bisection ended with eta in [{sol.eta_minus:.6f}, {sol.eta_plus:.6f}] after {len(sol.trace)} solves")
print(f"mixing weight xi = {sol.xi:.4f}")
print(f"average age {sol.mixed_age:.4f}, transmit power {sol.mixed_cost:.4f} W "
      f"(budget {cfg.c_max:.4f} W), efficiency {sol.mixed_efficiency:.4f}")

# At low ages the source waits; once the information is stale enough it
# spends power, and more of it as the age grows.
pol = sol.policy_plus
for m in range(1, cfg.M + 1):
    row = [pol.action((d, m)) for d in range(m, 41)]
    first = next((d for d, a in zip(range(m, 41), row) if a.level < model.K), None)
    print(f"round {m}: silent until age {first - 1 if first else 40}, then",
          " ".join(f"{a.kind}{a.level}" for a in row[first - m:first - m + 8]) if first else "")
