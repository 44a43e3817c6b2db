"""Index mapping vectors and the monotonicity constraints.

The IMV of an alignment matrix is the expected input position at every
output step. Walk through computing it, checking the step and boundary
constraints, and the exhaustive hard-path oracle behind them.
"""

import numpy as np

from imvalign import (
    Imv,
    compute_imv,
    enumerate_monotonic_paths,
    validate_imv,
)

np.set_printoptions(precision=3, suppress=True)

# A tiny alignment: 3 input tokens, 2 output steps, columns normalized.
alpha = np.array(
    [
        [0.25, 0.1],
        [0.50, 0.2],
        [0.25, 0.7],
    ]
)
imv = compute_imv(alpha)
print("alignment:\n", alpha)
print("IMV:", imv.values)  # [1.0, 1.6] by hand

# Validation reports the step constraint (each delta in [0, 1]) and the
# boundary conditions (starts at 0, ends at t1-1).
print("\ngood IMV:", validate_imv(Imv(np.array([0.0, 0.5, 1.0]), 2)).summary())
print("rewinding IMV:", validate_imv(Imv(np.array([0.0, -1.0, 1.0]), 2)).summary())
print("short IMV:", validate_imv(Imv(np.array([0.0, 1.0, 1.5]), 2)).summary())

# Why [0, 1] steps exactly? Every hard monotonic alignment -- one-hot
# columns that start on token 0, end on the last token, and advance at
# most one token per step -- has IMV deltas that are exactly 0 or 1.
# Enumerate all of them for small sizes and check.
print("\nhard-path oracle:")
for t1, t2 in [(2, 3), (3, 5), (4, 6)]:
    paths = enumerate_monotonic_paths(t1, t2)
    deltas_ok = all(
        np.all(np.isin(compute_imv(m).deltas, (0.0, 1.0))) for m in paths
    )
    print(f"  t1={t1}, t2={t2}: {len(paths)} paths, all deltas in {{0,1}}: {deltas_ok}")

# Convex mixtures of hard paths stay inside the constraint set: the IMV
# is linear in the alignment, so deltas interpolate between 0 and 1.
paths = enumerate_monotonic_paths(3, 6)
rng = np.random.default_rng(0)
w = rng.random(len(paths))
w /= w.sum()
mix = np.tensordot(w, np.stack(paths), axes=1)
report = validate_imv(compute_imv(mix), tol=1e-12)
print("\nrandom mixture of hard paths:", report.summary())
