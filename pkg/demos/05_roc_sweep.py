"""Boundary-detection ROC of the correlation detector (and, if a weights
file is given on the command line, the trained CNN) at a fixed traffic
level. Desk-scale window counts; raise them for smoother curves.
"""

import sys

import numpy as np

from gfra import detect, harness
from gfra.config import default_config
from gfra.receiver import CnnDetector, GlrtDetector

LAM = 0.01
COUNT = 300  # windows per class (half for the start-over-tail class)

cfg = default_config()
rng = np.random.default_rng(2)
thresholds = np.linspace(0.0, 1.0, 201)

detectors = {"glrt": GlrtDetector()}
if len(sys.argv) > 1:
    detectors["cnn"] = CnnDetector(detect.load_weights(sys.argv[1]))

for name, det in detectors.items():
    curves = harness.roc_campaign(cfg, det, LAM, COUNT, thresholds,
                                  np.random.default_rng(2))
    print(f"\n{name} detector, lambda = {LAM}")
    for label, points in curves.items():
        r = harness.recall_at_false_alarm(points, 0.1)
        print(f"  {label:5s}: recall at false-alarm 0.1 = {r:.3f}")
        sampled = [p for p in points if p.false_alarm <= 0.5][::40]
        for p in sampled[:5]:
            print(f"         thr={p.threshold:.2f} F={p.false_alarm:.3f} "
                  f"R={p.recall:.3f}")
