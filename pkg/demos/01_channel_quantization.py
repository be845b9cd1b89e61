"""Quantizing a Rayleigh fading channel into power levels.

With unit-mean exponential power gain and K equiprobable bins, the k-th
threshold is the gain the transmitter assumes when it picks level k.  A
packet at level k fails exactly when the true gain falls below that
threshold, which happens with probability k/K.  The last level assumes an
infinite gain: it costs nothing and never gets through.
"""
import numpy as np

from aoi_energy import exponential_gain, quantize_channel, watt_to_dbw

model = quantize_channel(exponential_gain(), K=8, rate=1.0)

print(" k   threshold   power [W]   power [dBw]   P(fail)")
for k in range(1, model.K + 1):
    z, p, eps = model.thresholds[k], model.powers[k - 1], model.failure_probs[k - 1]
    dbw = f"{watt_to_dbw(p):9.2f}" if p > 0 else "     -inf"
    print(f"{k:2d}  {z:10.4f}  {p:10.4f}  {dbw}     {eps:.4f}")

# The failure probabilities can be checked by drawing gains directly.
rng = np.random.default_rng(1)
gains = rng.exponential(size=200_000)
empirical = [(gains < model.thresholds[k]).mean() for k in range(1, model.K)]
print("\nempirical failure rates:", np.round(empirical, 3))
