"""The two monotonic strategies: penalize violations or rebuild the IMV.

The soft penalty turns the constraints into a loss an optimizer can push
down; the hard transform rectifies, re-accumulates, and rescales any raw
IMV into a constraint-satisfying one in a single differentiable shot.
"""

import numpy as np

from imvalign import (
    Imv,
    KernelConfig,
    SmaWeights,
    StreamingHmaState,
    align_from_imv,
    compute_imv,
    hma_transform,
    sma_loss,
    streaming_hma_step,
    validate_imv,
)

np.set_printoptions(precision=3, suppress=True)

# Soft penalty: zero when every constraint holds, positive otherwise.
print("soft penalty on a clean IMV:   ", sma_loss(Imv(np.array([0.0, 0.5, 1.0]), 2)))
print("soft penalty on a rewinding one:", sma_loss(Imv(np.array([0.0, -1.0, 1.0]), 2)))
print("boundary-only violation:        ", sma_loss(Imv(np.array([0.5, 1.0]), 2)))

# Hard transform: [0.5, 0.2, 1.0] rewinds in the middle. Differences are
# [-0.3, 0.8]; rectifying kills the rewind, re-accumulating from zero
# gives [0, 0, 0.8], and rescaling lands the end on t1-1 = 4.
raw = Imv(np.array([0.5, 0.2, 1.0]), 5)
star = hma_transform(raw)
print("\nhard transform of [0.5, 0.2, 1.0] with 5 tokens:", star.values)
print("validation:", validate_imv(star).summary())
print("penalty after transform:", float(sma_loss(star, SmaWeights(lambda1=0.0))))

# A monotone IMV reconstructs into an alignment matrix via a Gaussian
# bump per column; small variance concentrates each column on one token.
sharp = KernelConfig(sigma2=0.01)
alpha = align_from_imv(Imv(np.array([0.0, 1.0, 2.0]), 3), sharp)
print("\nsharp reconstruction of the diagonal IMV:\n", np.asarray(alpha))
print("round trip:", compute_imv(alpha).values)

# The streaming variant applies the same idea one output step at a time:
# the advance over the running position is clipped to [0, 1], so the
# position never rewinds and never skips a token.
rng = np.random.default_rng(1)
state = StreamingHmaState(t1=5)
trail = []
for _ in range(10):
    col = rng.random(5)
    col /= col.sum()
    state, _ = streaming_hma_step(state, col)
    trail.append(state.pi)
print("\nstreaming positions over 10 random columns:")
print(np.array(trail))
