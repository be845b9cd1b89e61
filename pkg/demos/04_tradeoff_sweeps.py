"""How age and energy efficiency move with the budget and the weights.

Each sweep is a config file in configs/; the same runs are available from
the command line as ``aoi-energy sweep --config configs/<name>.ini``.
"""
import os
from dataclasses import replace

from aoi_energy.experiments import load_config, run_sweep

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, os.pardir, "configs")


def rows(name):
    spec = load_config(os.path.join(CONFIGS, name))
    return run_sweep(replace(spec, output=None), resume=False)


print("Budget sweep, optimal vs fixed-power baselines (age):")
table = {}
for r in rows("cmax_sweep.ini"):
    table.setdefault(r["sweep_value"], {})[r["policy"]] = r["age"]
print(f"{'dBw':>5}  {'optimal':>8}  {'retx':>8}  {'gen':>8}")
for v, ages in table.items():
    print(f"{v:5.0f}  {ages['optimal']:8.3f}  {ages['retransmission']:8.3f}  {ages['generation']:8.3f}")

print("\nA larger omega weighs power more: older information, less sensing overhead.")
for w in ("omega2_sweep.ini", "omega3_sweep.ini"):
    print(w, " ".join(f"{r['sweep_value']:g}:{r['age']:.2f}/{r['efficiency']:.3f}" for r in rows(w)))

print("\nSensing cost alpha, budget -1 to -4 dBw as (age, efficiency); efficiency need not be monotone.")
for a in ("0.25", "0.5", "1.0"):
    print(f"alpha={a}", " ".join(f"({r['age']:.2f}, {r['efficiency']:.3f})" for r in rows(f"alpha{a}_sweep.ini")))
