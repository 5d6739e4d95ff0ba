"""Link budget: path loss, shadowing, Rician fading.

Draws a few thousand links of the indoor setup and checks the defining
power identities empirically.
"""

import numpy as np

from gfra import channel as ch
from gfra.config import default_config

radio = default_config().radio
rng = np.random.default_rng(7)

print(f"deployment: {radio.L_x} x {radio.L_y} x {radio.L_z} m, "
      f"d_max = {radio.d_max:.3f} m")
p0 = ch.received_power(radio.d_ref, radio, 0.0).P_i
print(f"received power at d_ref (no shadowing): {p0:.3e} W")
print(f"noise floor per antenna: {radio.sigma_w2:.1e} W "
      f"-> reference SNR {10 * np.log10(p0 / radio.sigma_w2):.1f} dB")

snrs = []
for _ in range(5000):
    budget = ch.received_power(ch.draw_distance(radio, rng), radio,
                               rng.standard_normal())
    snrs.append(budget.P_i / radio.sigma_w2)
snrs = 10 * np.log10(np.array(snrs))
print(f"link SNR over random placements: median {np.median(snrs):.1f} dB, "
      f"5th pct {np.percentile(snrs, 5):.1f} dB, "
      f"95th pct {np.percentile(snrs, 95):.1f} dB")

# Rician split: P = 2 sigma^2 (K+1), K = |mu|^2 / (2 sigma^2)
budget = ch.fill_budget(ch.received_power(3.0, radio, 0.0), radio.K_lin, rng)
draws = np.stack([ch.draw_channel(budget, radio.R, rng).h
                  for _ in range(20000)])
print(f"\nRician identities at d = 3 m, K = {radio.K_dB} dB:")
print(f"  P_i                      = {budget.P_i:.4e} W")
print(f"  2 sigma^2 (K+1)          = {2 * budget.sigma_i2 * (budget.K_i + 1):.4e} W")
print(f"  empirical E|h|^2         = {np.mean(np.abs(draws) ** 2):.4e} W")
mu_hat = draws.mean()
sigma2_hat = 0.5 * (draws.real.var() + draws.imag.var())
print(f"  empirical K              = {abs(mu_hat) ** 2 / (2 * sigma2_hat):.3f} "
      f"(configured {budget.K_i:.3f})")
