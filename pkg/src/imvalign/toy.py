"""Desk-scale monotonic seq2seq task and trainer.

Synthetic stand-in for a text-to-frames problem: each vocabulary token has
a fixed frame pattern which the target repeats for a random duration, plus
noise. A small encoder/decoder is trained end to end through the alignment
machinery; the constraint mode (none, soft penalty, hard transform) is the
only thing that changes between runs, which makes the convergence contrast
between the three directly comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import autodiff as ad
from .attention import scaled_dot_alignment
from .core import AlignmentError, compute_imv, context_map
from .monotonic import DegenerateImvError, KernelConfig, SmaWeights, hma_transform, sma_loss
from .positions import ApLossConfig, AlignedPositions, align_from_positions, ap_loss, extract_positions, infer_t2, scale_positions

__all__ = [
    "MODES",
    "ToyTask",
    "ToyBatch",
    "TrainConfig",
    "TrainReport",
    "ToyModel",
    "TrainDivergenceError",
    "UntrainedModelError",
    "token_patterns",
    "positions_from_durations",
    "make_batch",
    "train",
    "infer",
    "alignment_accuracy",
    "diagonality_score",
]

MODES = ("NM", "SMA", "HMA")


class TrainDivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, cause: str):
        super().__init__(f"training diverged at step {step}: {cause}")
        self.step = step


class UntrainedModelError(RuntimeError):
    """Inference was requested from a model that was never trained."""


@dataclass(frozen=True)
class ToyTask:
    """Synthetic monotonic transduction task definition."""

    vocab: int = 6
    embed_dim: int = 16
    frame_dim: int = 8
    dmin: int = 1
    dmax: int = 4
    noise_sigma: float = 0.1
    t1_min: int = 4
    t1_max: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.vocab < 2:
            raise ValueError("vocab must be >= 2")
        if self.dmin < 1 or self.dmax < self.dmin:
            raise ValueError("need 1 <= dmin <= dmax")
        if self.t1_min < 2 or self.t1_max < self.t1_min:
            raise ValueError("need 2 <= t1_min <= t1_max")


@dataclass(frozen=True)
class ToyBatch:
    """One synthetic sequence pair with its ground-truth alignment."""

    token_ids: np.ndarray
    frames: np.ndarray
    durations: np.ndarray
    e_star: np.ndarray

    @property
    def t1(self) -> int:
        return self.token_ids.shape[0]

    @property
    def t2(self) -> int:
        return self.frames.shape[0]


def token_patterns(task: ToyTask) -> np.ndarray:
    """The fixed per-token frame pattern bank (vocab, frame_dim)."""
    rng = np.random.default_rng(np.random.SeedSequence((task.seed, 0x9A77E)))
    return rng.normal(size=(task.vocab, task.frame_dim))


def positions_from_durations(durations) -> np.ndarray:
    """Centre of each token's frame span: cumulative duration minus half
    the token's own duration."""
    d = np.asarray(durations, dtype=np.float64)
    return np.cumsum(d) - d / 2.0


def _positionally_degenerate(token_ids: np.ndarray) -> bool:
    """True when every distinct token's positions share the same mean.

    Repeated tokens receive identical attention weights (identical keys),
    so the expected input position of any content-only attention column is
    a weight-independent constant for such sequences — palindromes like
    [4, 1, 1, 4] being the common case. Nothing can align them.
    """
    sums: dict[int, int] = {}
    counts: dict[int, int] = {}
    for i, t in enumerate(token_ids):
        sums[int(t)] = sums.get(int(t), 0) + i
        counts[int(t)] = counts.get(int(t), 0) + 1
    items = list(sums)
    first = items[0]
    return all(
        sums[v] * counts[first] == sums[first] * counts[v] for v in items[1:]
    )


def make_batch(task: ToyTask, seed: int) -> ToyBatch:
    """Deterministic sequence sample: same (task, seed) gives identical data.

    Positionally degenerate token sequences (see
    :func:`_positionally_degenerate`) are resampled; they admit no
    alignment signal at all.
    """
    rng = np.random.default_rng(np.random.SeedSequence((task.seed, 1, seed)))
    t1 = int(rng.integers(task.t1_min, task.t1_max + 1))
    token_ids = rng.integers(0, task.vocab, size=t1)
    while _positionally_degenerate(token_ids):
        token_ids = rng.integers(0, task.vocab, size=t1)
    durations = rng.integers(task.dmin, task.dmax + 1, size=t1)
    patterns = token_patterns(task)
    frames = np.repeat(patterns[token_ids], durations, axis=0)
    if task.noise_sigma > 0:
        frames = frames + task.noise_sigma * rng.normal(size=frames.shape)
    return ToyBatch(
        token_ids=token_ids,
        frames=frames,
        durations=durations,
        e_star=positions_from_durations(durations),
    )


@dataclass(frozen=True)
class TrainConfig:
    """Trainer settings; ``mode`` selects the monotonic strategy."""

    mode: str = "HMA"
    steps: int = 800
    lr: float = 1e-2
    batch_size: int = 8
    pool_size: int = 64
    sma_weights: SmaWeights = field(default_factory=SmaWeights)
    ap_weight: float = 1.0
    sigma2: float = 0.25
    epsilon: float = 1e-6
    seed: int = 0
    optimizer: str = "sgd"
    accuracy_threshold: float = 0.9
    report_path: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.steps < 0 or self.lr <= 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0, lr > 0, batch_size >= 1")
        if self.pool_size < self.batch_size:
            raise ValueError("pool_size must be >= batch_size")


@dataclass
class TrainReport:
    """Per-step training trace plus convergence summaries."""

    mode: str
    recon_loss: np.ndarray
    ap_loss: np.ndarray
    sma_loss: np.ndarray
    total_loss: np.ndarray
    accuracy: np.ndarray
    diagonality: np.ndarray
    steps_to_threshold: Optional[int]
    accuracy_threshold: float

    @property
    def final_loss(self) -> float:
        return float(self.recon_loss[-1])

    @property
    def final_accuracy(self) -> float:
        return float(self.accuracy[-1])

    @property
    def final_diagonality(self) -> float:
        return float(self.diagonality[-1])

    @property
    def best_accuracy(self) -> float:
        return float(self.accuracy.max())

    def records(self):
        for i in range(self.total_loss.shape[0]):
            yield {
                "step": i,
                "recon_loss": float(self.recon_loss[i]),
                "ap_loss": float(self.ap_loss[i]),
                "sma_loss": float(self.sma_loss[i]),
                "total_loss": float(self.total_loss[i]),
                "accuracy": float(self.accuracy[i]),
                "diagonality": float(self.diagonality[i]),
            }

    def write_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.records():
                fh.write(json.dumps(record) + "\n")


_PARAM_SHAPES = ("embed", "frame_proj", "decoder", "decoder_bias", "pred_w1", "pred_b1", "pred_w2", "pred_b2")


class ToyModel:
    """Parameter container: embeddings, frame projection, linear decoder,
    and the two-layer increment predictor."""

    def __init__(self, task: ToyTask, seed: int):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
        d, f, h = task.embed_dim, task.frame_dim, task.embed_dim
        scale = d**-0.5
        self.task = task
        self.params: dict[str, np.ndarray] = {
            "embed": rng.normal(size=(task.vocab, d)),
            "frame_proj": rng.normal(size=(f, d)) * f**-0.5,
            "decoder": rng.normal(size=(d, f)) * scale,
            "decoder_bias": np.zeros(f),
            "pred_w1": rng.normal(size=(d, h)) * scale,
            "pred_b1": np.zeros(h),
            "pred_w2": rng.normal(size=h) * h**-0.5,
            "pred_b2": np.zeros(()),
        }
        self.trained = False

    def variables(self, tape: ad.Tape) -> dict[str, ad.Value]:
        return {name: tape.variable(self.params[name]) for name in _PARAM_SHAPES}


def _sequence_forward(
    params,
    batch: ToyBatch,
    cfg: TrainConfig,
    kernel: KernelConfig,
    ap_targets: Optional[np.ndarray] = None,
):
    """Loss terms and the reconstructed alignment for one sequence.

    ``ap_targets`` overrides the increment-predictor targets; by default
    they are recomputed (detached) from the current alignment.
    """
    emb = ad.take_rows(params["embed"], batch.token_ids)
    queries = ad.matmul(batch.frames, params["frame_proj"])
    alpha = scaled_dot_alignment(queries, emb)
    imv = compute_imv(alpha)
    imv_mono = hma_transform(imv) if cfg.mode == "HMA" else imv
    positions = extract_positions(imv_mono, kernel)
    alpha_recon = align_from_positions(positions, batch.t2, kernel)
    ctx = context_map(alpha_recon, emb)
    pred = ad.matmul(ctx, params["decoder"]) + params["decoder_bias"]
    err = pred - batch.frames
    recon = ad.amean(err * err)

    # increment predictor is trained against the extracted positions;
    # targets are detached and rectified so the log-scale loss sees
    # non-negative increments even under a non-monotone mode
    if ap_targets is None:
        target_deltas = np.maximum(AlignedPositions(positions.values).deltas, 0.0)
    else:
        target_deltas = ap_targets
    hidden = ad.tanh(ad.matmul(emb, params["pred_w1"]) + params["pred_b1"])
    raw = ad.matmul(hidden, params["pred_w2"]) + params["pred_b2"]
    predicted_deltas = ad.exp(raw)
    ap = ap_loss(predicted_deltas, target_deltas, ApLossConfig(epsilon=cfg.epsilon))

    sma = sma_loss(imv, cfg.sma_weights) if cfg.mode == "SMA" else None
    return recon, ap, sma, alpha_recon


def alignment_accuracy(alpha: np.ndarray, e_star: np.ndarray) -> float:
    """Fraction of tokens whose attended span midpoint lands within one
    frame of the true token centre."""
    t1 = alpha.shape[0]
    owner = np.argmax(alpha, axis=0)
    hits = 0
    for i in range(t1):
        span = np.flatnonzero(owner == i)
        if span.size == 0:
            continue
        midpoint = (span[0] + span[-1]) / 2.0
        if abs(midpoint - e_star[i]) <= 1.0:
            hits += 1
    return hits / t1


def diagonality_score(alpha: np.ndarray) -> float:
    """Column sharpness times the rank correlation between attended token
    and output step; near 1 for a clean diagonal, near 0 for mush."""
    sharpness = float(alpha.max(axis=0).mean())
    owner = np.argmax(alpha, axis=0)
    if np.all(owner == owner[0]) or alpha.shape[1] < 2:
        return 0.0
    rho = stats.spearmanr(owner, np.arange(alpha.shape[1])).statistic
    if not np.isfinite(rho):
        return 0.0
    return sharpness * float(rho)


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for name, g in grads.items():
            params[name] -= self.lr * g


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _evaluate_step(model, batches, cfg, kernel, tape):
    """One optimization step's forward pass over a batch of sequences.

    A sequence whose raw IMV happens to be non-increasing (a transient
    reversed-alignment state; the hard transform has nothing to rescale)
    contributes no gradient this step and is skipped; updates from the
    rest of the batch move the model out of such states.
    """
    params = model.variables(tape)
    total = None
    n = 0
    recon_sum = ap_sum = sma_sum = 0.0
    acc_sum = diag_sum = 0.0
    for batch in batches:
        try:
            recon, ap, sma, alpha_recon = _sequence_forward(params, batch, cfg, kernel)
        except DegenerateImvError:
            continue
        n += 1
        seq_loss = recon + cfg.ap_weight * ap
        if sma is not None:
            seq_loss = seq_loss + sma
            sma_sum += float(sma.data)
        total = seq_loss if total is None else total + seq_loss
        recon_sum += float(recon.data)
        ap_sum += float(ap.data)
        acc_sum += alignment_accuracy(alpha_recon.data, batch.e_star)
        diag_sum += diagonality_score(alpha_recon.data)
    if total is None:
        raise DegenerateImvError("every sequence in the batch has a degenerate IMV")
    metrics = {
        "recon": recon_sum / n,
        "ap": ap_sum / n,
        "sma": sma_sum / n,
        "accuracy": acc_sum / n,
        "diagonality": diag_sum / n,
    }
    mean_loss = total * (1.0 / n)
    metrics["total"] = float(mean_loss.data)
    return mean_loss, params, metrics


def train(task: ToyTask, cfg: TrainConfig) -> tuple[ToyModel, TrainReport]:
    """Run the toy trainer; returns the model and its per-step report.

    Fully deterministic for a fixed (task, cfg): data, initialization, and
    updates derive from the seeds alone. ``steps=0`` evaluates the initial
    state once without updating. Raises :class:`TrainDivergenceError` with
    the offending step if the loss goes non-finite.
    """
    model = ToyModel(task, cfg.seed)
    kernel = KernelConfig(sigma2=cfg.sigma2)
    optimizer = _Adam(cfg.lr) if cfg.optimizer == "adam" else _Sgd(cfg.lr)
    pool = [make_batch(task, s) for s in range(cfg.pool_size)]

    n_records = max(cfg.steps, 1)
    recon = np.zeros(n_records)
    ap = np.zeros(n_records)
    sma = np.zeros(n_records)
    total = np.zeros(n_records)
    accuracy = np.zeros(n_records)
    diagonality = np.zeros(n_records)
    steps_to_threshold = None

    for step in range(n_records):
        batches = [
            pool[(step * cfg.batch_size + b) % cfg.pool_size]
            for b in range(cfg.batch_size)
        ]
        tape = ad.Tape()
        try:
            mean_loss, params, metrics = _evaluate_step(model, batches, cfg, kernel, tape)
        except (ad.NonFiniteError, DegenerateImvError) as exc:
            raise TrainDivergenceError(step, str(exc)) from exc
        recon[step] = metrics["recon"]
        ap[step] = metrics["ap"]
        sma[step] = metrics["sma"]
        total[step] = metrics["total"]
        accuracy[step] = metrics["accuracy"]
        diagonality[step] = metrics["diagonality"]
        if steps_to_threshold is None and metrics["accuracy"] >= cfg.accuracy_threshold:
            steps_to_threshold = step
        if cfg.steps > 0:
            tape.backward(mean_loss)
            grads = {name: v.grad for name, v in params.items() if v.grad is not None}
            optimizer.step(model.params, grads)

    model.trained = cfg.steps > 0
    report = TrainReport(
        mode=cfg.mode,
        recon_loss=recon,
        ap_loss=ap,
        sma_loss=sma,
        total_loss=total,
        accuracy=accuracy,
        diagonality=diagonality,
        steps_to_threshold=steps_to_threshold,
        accuracy_threshold=cfg.accuracy_threshold,
    )
    if cfg.report_path:
        report.write_jsonl(cfg.report_path)
    return model, report


def infer(
    model: ToyModel,
    token_ids,
    rate: float = 1.0,
    sigma2: float = 0.25,
    t2: Optional[int] = None,
) -> np.ndarray:
    """Generate frames for a token sequence without any reference output.

    The increment predictor supplies aligned positions, the positions are
    stretched by ``rate``, the output length follows from the stretched
    positions (or an explicit ``t2`` override), and the decoder runs on the
    reconstructed alignment.
    """
    if not model.trained:
        raise UntrainedModelError("model has not been trained")
    ids = np.asarray(token_ids, dtype=np.intp)
    if ids.size == 0:
        raise AlignmentError("token sequence is empty")
    p = model.params
    emb = p["embed"][ids]
    hidden = np.tanh(emb @ p["pred_w1"] + p["pred_b1"])
    deltas = np.exp(hidden @ p["pred_w2"] + p["pred_b2"])
    positions = scale_positions(AlignedPositions(np.cumsum(deltas)), rate)
    length = t2 if t2 is not None else infer_t2(positions)
    alpha = align_from_positions(positions, length, KernelConfig(sigma2=sigma2))
    ctx = context_map(alpha, emb)
    return ctx @ p["decoder"] + p["decoder_bias"]
