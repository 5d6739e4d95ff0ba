"""Packet loss rate versus traffic load (desk scale).

Full-scale campaigns (tens of thousands of packets per point) run via the
CLI: `gfra plr --lambda-grid 7.5e-4,2.5e-3 --packets 20000 --workers 2`.
"""

import time

from gfra import harness
from gfra.config import default_config
from gfra.receiver import GlrtDetector, Thresholds

cfg = default_config()
grid = [5e-4, 1e-3, 2.5e-3, 5e-3]
packets = 800  # per point; keep small for a quick demo

print(f"{'lambda':>9s} {'packets':>8s} {'err':>5s} {'miss':>5s} {'PLR':>10s}")
start = time.time()
records = harness.plr_campaign(cfg, GlrtDetector(), Thresholds(0.8, 0.8),
                               grid, packets_target=packets, seed=11,
                               workers=2)
for rec in records:
    print(f"{rec.lam:9.1e} {rec.n_tx:8d} {rec.n_err:5d} {rec.n_miss:5d} "
          f"{rec.plr:10.3e}")
print(f"({time.time() - start:.0f}s; losses are interference-driven, "
      f"so the curve climbs with lambda)")
