"""Closed-form tail-confusion probability against its Monte Carlo oracle.

The victim's dangerous set holds the instants where an interferer's tail
would mimic a shorter unit's tail; under Poisson activations the confusion
probability has the closed form 1 - exp(-lambda * sum_tau q_D(tau)).
"""

import numpy as np

from gfra import analysis
from gfra.config import default_config

frame = default_config().frame
rng = np.random.default_rng(5)

victim = analysis.VictimReplica(tau_v=500, iota_v=5, slot=1, offset=0)
dset = analysis.dangerous_set(victim, frame)
print(f"victim: iota_v={victim.iota_v}, replica start {victim.start(frame)}")
print(f"dangerous instants: {dset.instants}")
rate = analysis.dangerous_activation_rate(victim, frame)
print(f"dangerous-activation rate (sum of q_D): {rate:.4f}\n")

print(f"{'lambda':>8s} {'closed form':>12s} {'Monte Carlo':>12s} {'std err':>9s}")
for lam in (1e-4, 1e-3, 1e-2):
    closed = analysis.tail_confusion_prob(victim, frame, lam)
    mc = analysis.mc_tail_confusion(victim, frame, lam, trials=40_000, rng=rng)
    print(f"{lam:8.0e} {closed:12.5e} {mc.value:12.5e} {mc.stderr:9.1e}")

print("\nconfusion probability by victim length (lambda = 1e-3):")
for iota_v in range(1, 6):
    v = analysis.VictimReplica(tau_v=500, iota_v=iota_v, slot=1, offset=0)
    print(f"  iota_v={iota_v}: P = {analysis.tail_confusion_prob(v, frame, 1e-3):.4e}")
