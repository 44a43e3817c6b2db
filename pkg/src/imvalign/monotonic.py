"""Monotonic alignment machinery built on index mapping vectors.

Two complementary strategies: a soft penalty (:func:`sma_loss`) that pushes
an unconstrained IMV toward the monotonicity, continuity, and completeness
constraints, and a hard transform (:func:`hma_transform`) that rebuilds any
raw IMV into one satisfying them by construction. A Gaussian kernel turns a
monotone IMV back into a full alignment matrix, and a streaming variant
applies the hard constraint one output step at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Value
from .core import AlignmentError, Imv, check_alignment, index_vector

__all__ = [
    "DegenerateImvError",
    "SmaWeights",
    "KernelConfig",
    "StreamingHmaState",
    "sma_loss",
    "hma_transform",
    "align_from_imv",
    "streaming_hma_step",
    "streaming_hma_run",
]

# Forward-motion threshold: below this cumulative advance the rescaling
# division is meaningless.
DEGENERATE_EPS = 1e-8


class DegenerateImvError(AlignmentError):
    """Raised when a raw IMV has no forward motion to rescale."""


@dataclass(frozen=True)
class SmaWeights:
    """Non-negative coefficients of the four soft-constraint penalty terms:
    backward motion, steps larger than one, and the two boundary offsets."""

    lambda0: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "lambda2", "lambda3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian reconstruction kernel; sigma2 is the alignment variation in
    squared token-index units."""

    sigma2: float = 0.25

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")


def sma_loss(imv: Imv, weights: SmaWeights = SmaWeights(), boundary: str = "square"):
    """Soft monotonic alignment penalty.

    Sums four terms: L1 of the negative parts of the IMV steps, L1 of the
    step excess over one, and the two boundary offsets normalized by t1-1.
    The boundary penalty is squared by default; ``boundary="abs"`` uses the
    absolute value instead (the magnitude reading of a scalar norm). Zero
    exactly when every constraint holds.
    """
    if imv.t1 < 2:
        raise AlignmentError("sma_loss needs t1 >= 2 (boundary terms divide by t1-1)")
    if imv.t2 < 2:
        raise AlignmentError("sma_loss needs at least 2 output steps")
    if boundary not in ("square", "abs"):
        raise ValueError(f"boundary must be 'square' or 'abs', got {boundary!r}")
    pi = imv.pi
    d = pi[1:] - pi[:-1]
    backward_motion = ad.asum(ad.absolute(d) - d)
    overshoot = ad.asum(ad.absolute(d - 1.0) + (d - 1.0))
    start = pi[0] / float(imv.t1 - 1)
    end = pi[-1] / float(imv.t1 - 1) - 1.0
    if boundary == "square":
        start_pen = start * start
        end_pen = end * end
    else:
        start_pen = ad.absolute(start)
        end_pen = ad.absolute(end)
    return (
        weights.lambda0 * backward_motion
        + weights.lambda1 * overshoot
        + weights.lambda2 * start_pen
        + weights.lambda3 * end_pen
    )


def hma_transform(imv: Imv) -> Imv:
    """Rebuild a raw IMV into a strictly monotone, boundary-complete one.

    Differences of the raw IMV are rectified, re-accumulated from zero,
    and rescaled so the final entry lands exactly on t1-1. Raises
    :class:`DegenerateImvError` when the rectified IMV never moves
    forward (the rescaling would divide by ~0).
    """
    if imv.t2 < 2:
        raise AlignmentError("hma_transform needs at least 2 output steps")
    raw = imv.pi
    d = ad.relu(raw[1:] - raw[:-1])
    pi = ad.concat([np.zeros(1), ad.cumsum(d)])
    end_value = float(pi.data[-1] if isinstance(pi, Value) else pi[-1])
    if end_value <= DEGENERATE_EPS:
        raise DegenerateImvError("degenerate IMV: no forward motion")
    pi_star = pi * float(imv.t1 - 1) / pi[-1]
    return Imv(pi_star, imv.t1)


def _gaussian_logits(centers, grid: np.ndarray, sigma2: float):
    """-(grid_i - centers_j)^2 / sigma2 as a (len(grid), len(centers)) block."""
    col = grid.reshape(-1, 1)
    diff = col - centers
    return diff * diff * (-1.0 / sigma2)


def align_from_imv(imv: Imv, kernel: KernelConfig = KernelConfig()):
    """Alignment matrix whose column j is a Gaussian bump centered on pi_j.

    Columns are normalized over the input axis, so the result is a valid
    alignment regardless of where the centers fall.
    """
    logits = _gaussian_logits(imv.pi, index_vector(imv.t1), kernel.sigma2)
    return ad.softmax(logits, axis=0)


@dataclass(frozen=True)
class StreamingHmaState:
    """Running cumulative position for the one-step-at-a-time hard monotonic
    constraint; ``pi`` never decreases and advances at most 1 per step."""

    t1: int
    pi: float = 0.0


def streaming_hma_step(
    state: StreamingHmaState,
    alpha_col: np.ndarray,
    kernel: KernelConfig = KernelConfig(),
) -> tuple[StreamingHmaState, np.ndarray]:
    """Advance the streaming position by one output step.

    The raw attended position of the column is compared against the
    running position; the advance is clipped to [0, 1] (the streaming path
    cannot rescale afterwards, so continuity is enforced directly) and the
    replacement column is the Gaussian bump at the new position.
    """
    col = np.asarray(alpha_col, dtype=np.float64)
    if col.ndim != 1 or col.shape[0] != state.t1:
        raise AlignmentError(f"expected a length-{state.t1} column, got {col.shape}")
    if abs(col.sum() - 1.0) > 1e-3:
        raise AlignmentError(f"column sums to {col.sum():.6g}, expected 1")
    p = index_vector(state.t1)
    raw = float(col @ p)
    delta = float(np.clip(raw - state.pi, 0.0, 1.0))
    new_pi = state.pi + delta
    logits = -((new_pi - p) ** 2) / kernel.sigma2
    logits -= logits.max()
    weights = np.exp(logits)
    return replace(state, pi=new_pi), weights / weights.sum()


def streaming_hma_run(
    alpha, kernel: KernelConfig = KernelConfig()
) -> tuple[np.ndarray, np.ndarray]:
    """Whole-sequence form of the streaming constraint.

    Computes all raw attended positions at once, runs the clamp recurrence
    over them, and reconstructs every column in one kernel evaluation.
    Returns (position sequence, reconstructed alignment); matches stepping
    :func:`streaming_hma_step` column by column.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    check_alignment(alpha)
    t1, t2 = alpha.shape
    p = index_vector(t1)
    raw = p @ alpha
    pi_path = np.empty(t2)
    pos = 0.0
    for j in range(t2):
        pos += float(np.clip(raw[j] - pos, 0.0, 1.0))
        pi_path[j] = pos
    reconstructed = align_from_imv(Imv(pi_path, t1), kernel)
    return pi_path, reconstructed
