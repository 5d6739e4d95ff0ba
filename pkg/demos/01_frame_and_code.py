"""Frame geometry and the (128, 64) block code.

A command unit is [start | iota codewords | tail]; every length is derived
from the frame config. The decoder always runs a fixed number of
iterations and keeps the whole posterior-LLR trajectory, because the tail
detector wants comparable decoder states across blocks.
"""

import numpy as np

from gfra import ldpc
from gfra.config import default_config

cfg = default_config()
frame = cfg.frame

print("frame geometry")
print(f"  unit budget L_max         = {cfg.L_max} symbols")
print(f"  virtual frame T_VF        = {cfg.T_VF} symbols")
print(f"  admissible activations    = [0, {cfg.T_act - 1}]")
for iota in range(1, frame.iota_max + 1):
    print(f"  iota={iota}: unit length {frame.unit_length(iota):4d}, "
          f"max in-slot offset {frame.offset_max(iota):3d}")

code = ldpc.ParityCheckMatrix.default()
rng = np.random.default_rng(1)
info = rng.integers(0, 2, code.k).astype(np.uint8)
word = code.encode(info)
print("\nblock code")
print(f"  ({code.n}, {code.k}), parity rows: {len(code.rows)}, "
      f"syndrome of a codeword: {int(code.syndrome(word).sum())}")

# corrupt three coded bits and watch the decoder walk back to the codeword
llrs = 8.0 * (1.0 - 2.0 * word.astype(float))
llrs[rng.choice(code.n, 3, replace=False)] *= -1.0
result = ldpc.nms_decode(llrs, i_max=frame.i_max)
errors_per_iteration = [
    int(((row < 0).astype(np.uint8) != word).sum())
    for row in result.llr_trajectory
]
print(f"  3 flipped signs -> converged={result.converged}, "
      f"bit errors per iteration: {errors_per_iteration[:6]} ...")
assert (result.hard_bits == word).all()
