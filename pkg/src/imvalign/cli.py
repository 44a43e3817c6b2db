"""Command-line interface.

Exit codes: 0 success, 2 usage or parse error, 3 contract violation
(invalid alignment/IMV input), 4 numeric failure (degenerate transform,
failed gradient check, diverged training).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields

import numpy as np

from .attention import scaled_dot_alignment
from .autodiff import NonFiniteError
from .checks import CHECKABLE_OPS, run_check
from .core import (
    AlignmentError,
    Imv,
    compute_imv,
    enumerate_monotonic_paths,
    validate_imv,
)
from .matrixio import MatrixFormatError, read_matrix, read_vector, write_matrix, write_pgm, write_vector
from .monotonic import (
    DegenerateImvError,
    KernelConfig,
    SmaWeights,
    align_from_imv,
    hma_transform,
    sma_loss,
)
from .positions import align_from_positions, extract_positions
from .toy import ToyTask, TrainConfig, TrainDivergenceError, make_batch, train

__all__ = ["main", "RunConfig", "load_run_config", "ConfigError"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONTRACT = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    """A run-configuration document is malformed."""


@dataclass(frozen=True)
class RunConfig:
    """JSON-backed settings for the toy trainer command.

    Unknown keys are rejected; absent keys take these defaults.
    """

    mode: str = "HMA"
    sigma2: float = 0.25
    sma_weights: tuple = (1.0, 1.0, 1.0, 1.0)
    epsilon: float = 1e-6
    seed: int = 1
    steps: int = 1200
    lr: float = 1e-2
    batch_size: int = 8
    pool_size: int = 32
    optimizer: str = "adam"
    ap_weight: float = 1.0
    accuracy_threshold: float = 0.9
    report_path: str = "toy_report.jsonl"
    heatmap_path: str = "toy_alignment.pgm"
    vocab: int = 6
    embed_dim: int = 16
    frame_dim: int = 8
    dmin: int = 1
    dmax: int = 4
    noise_sigma: float = 0.1
    t1_min: int = 4
    t1_max: int = 8
    task_seed: int = 0

    def task(self) -> ToyTask:
        return ToyTask(
            vocab=self.vocab,
            embed_dim=self.embed_dim,
            frame_dim=self.frame_dim,
            dmin=self.dmin,
            dmax=self.dmax,
            noise_sigma=self.noise_sigma,
            t1_min=self.t1_min,
            t1_max=self.t1_max,
            seed=self.task_seed,
        )

    def train_config(self) -> TrainConfig:
        w = self.sma_weights
        return TrainConfig(
            mode=self.mode,
            steps=self.steps,
            lr=self.lr,
            batch_size=self.batch_size,
            pool_size=self.pool_size,
            sma_weights=SmaWeights(*w),
            ap_weight=self.ap_weight,
            sigma2=self.sigma2,
            epsilon=self.epsilon,
            seed=self.seed,
            optimizer=self.optimizer,
            accuracy_threshold=self.accuracy_threshold,
            report_path=self.report_path,
        )


def load_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top-level JSON must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    if "sma_weights" in raw:
        w = raw["sma_weights"]
        if not isinstance(w, (list, tuple)) or len(w) != 4:
            raise ConfigError(f"{path}: sma_weights must be a list of 4 numbers")
        raw["sma_weights"] = tuple(float(x) for x in w)
    try:
        cfg = RunConfig(**raw)
        cfg.train_config()
        cfg.task()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def _read_imv(args) -> Imv:
    values = read_vector(args.imv)
    return Imv(values, args.t1)


def cmd_imv(args) -> int:
    alpha = read_matrix(args.alignment)
    imv = compute_imv(alpha)
    report = validate_imv(imv)
    print(report.summary())
    if args.out:
        write_vector(args.out, imv.values)
    else:
        print(",".join(f"{x:.12g}" for x in imv.values))
    return EXIT_OK


def cmd_hma(args) -> int:
    out = hma_transform(_read_imv(args))
    if args.out:
        write_vector(args.out, out.values)
    print(",".join(f"{x:.12g}" for x in out.values))
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    alpha = align_from_imv(_read_imv(args), KernelConfig(sigma2=args.sigma2))
    write_matrix(args.out, alpha)
    print(f"wrote {alpha.shape[0]}x{alpha.shape[1]} alignment to {args.out}")
    return EXIT_OK


def cmd_positions(args) -> int:
    pos = extract_positions(_read_imv(args), KernelConfig(sigma2=args.sigma2))
    if args.out:
        write_vector(args.out, pos.values)
    print(",".join(f"{x:.12g}" for x in pos.values))
    return EXIT_OK


def cmd_sma(args) -> int:
    weights = SmaWeights(args.lambda0, args.lambda1, args.lambda2, args.lambda3)
    loss = sma_loss(_read_imv(args), weights, boundary=args.boundary)
    print(repr(float(loss)))
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.t1 > args.t2:
        print(f"error: no monotonic path from {args.t1} tokens to {args.t2} steps", file=sys.stderr)
        return EXIT_USAGE
    paths = enumerate_monotonic_paths(args.t1, args.t2)
    ok = True
    for m in paths:
        imv = compute_imv(m)
        deltas = imv.deltas
        if not (
            np.all((deltas == 0.0) | (deltas == 1.0))
            and imv.values[0] == 0.0
            and imv.values[-1] == args.t1 - 1
        ):
            ok = False
    print(f"{len(paths)} paths, {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_gradcheck(args) -> int:
    if args.op not in CHECKABLE_OPS:
        print(
            f"error: unknown op {args.op!r}; known: {', '.join(sorted(CHECKABLE_OPS))}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    report = run_check(args.op, seed=args.seed, h=args.h, tol=args.tol)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_train_toy(args) -> int:
    cfg = load_run_config(args.config)
    task = cfg.task()
    model, report = train(task, cfg.train_config())
    print(
        f"mode={cfg.mode} steps={cfg.steps}: "
        f"final loss {report.final_loss:.4f}, accuracy {report.final_accuracy:.3f}, "
        f"diagonality {report.final_diagonality:.3f}, "
        f"steps-to-threshold {report.steps_to_threshold}"
    )
    # final alignment of the first pool sequence, for eyeballing convergence
    batch = make_batch(task, 0)
    p = model.params
    alpha = scaled_dot_alignment(batch.frames @ p["frame_proj"], p["embed"][batch.token_ids])
    imv = compute_imv(alpha)
    if cfg.mode == "HMA":
        imv = hma_transform(imv)
    pos = extract_positions(imv, KernelConfig(sigma2=cfg.sigma2))
    final_alpha = align_from_positions(pos, batch.t2, KernelConfig(sigma2=cfg.sigma2))
    write_pgm(cfg.heatmap_path, final_alpha)
    print(f"report: {cfg.report_path}; heatmap: {cfg.heatmap_path}")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    write_pgm(args.out, read_matrix(args.alignment))
    print(f"wrote {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imvalign",
        description="Monotonic sequence alignment via index mapping vectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("imv", help="compute and validate the IMV of an alignment matrix")
    p.add_argument("--alignment", required=True, help="matrix CSV (rows,cols header)")
    p.add_argument("--out", help="write the IMV as single-column CSV")
    p.set_defaults(func=cmd_imv)

    def imv_args(p):
        p.add_argument("--imv", required=True, help="IMV file, one float per line")
        p.add_argument("--t1", required=True, type=int, help="input length bound")

    p = sub.add_parser("hma", help="hard monotonic transform of a raw IMV")
    imv_args(p)
    p.add_argument("--out", help="write the transformed IMV")
    p.set_defaults(func=cmd_hma)

    p = sub.add_parser("reconstruct", help="Gaussian alignment matrix from an IMV")
    imv_args(p)
    p.add_argument("--sigma2", type=float, default=0.25)
    p.add_argument("--out", required=True, help="output matrix CSV")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("positions", help="aligned output position per input token")
    imv_args(p)
    p.add_argument("--sigma2", type=float, default=0.25)
    p.add_argument("--out", help="write the positions as single-column CSV")
    p.set_defaults(func=cmd_positions)

    p = sub.add_parser("sma", help="soft monotonic alignment loss of an IMV")
    imv_args(p)
    for i in range(4):
        p.add_argument(f"--lambda{i}", type=float, default=1.0)
    p.add_argument("--boundary", choices=("square", "abs"), default="square")
    p.set_defaults(func=cmd_sma)

    p = sub.add_parser("oracle", help="enumerate hard monotonic paths and verify their IMVs")
    p.add_argument("--t1", required=True, type=int)
    p.add_argument("--t2", required=True, type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gradcheck", help="finite-difference check of a named operation")
    p.add_argument("--op", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train-toy", help="run the toy trainer from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("heatmap", help="export an alignment matrix as an ASCII PGM image")
    p.add_argument("--alignment", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (MatrixFormatError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateImvError, NonFiniteError, TrainDivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AlignmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
