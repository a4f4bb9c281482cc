"""Command-line entry point: ``simad {train,score,eval,bench-metrics,gen-synth}``.

Exit status is 0 on success, 1 when a run fails (for example training
diverges) and 2 for usage errors, missing files or malformed inputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .datasets import make_sine_spike
from .errors import CheckpointError, ConfigError, DataFormatError, SimADError, TrainingError
from .metrics import BiasSpec, ThresholdSpec, evaluate
from .model import score_series
from .presets import preset
from .synthbench import DEFAULT_MODELS, gen_labels, demos_from_arg, run_bench
from .trainer import train

log = logging.getLogger("simad")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {p}")
    return p


def _parse_rows(text: str | None, n: int) -> slice:
    if not text:
        return slice(0, n)
    lo, sep, hi = text.partition(":")
    if not sep:
        raise UsageError(f"--rows must look like START:END, got {text!r}")
    try:
        return slice(int(lo) if lo else 0, int(hi) if hi else n)
    except ValueError:
        raise UsageError(f"--rows must look like START:END, got {text!r}") from None


def _load_config(args):
    base = {}
    if args.config:
        if args.config.startswith("preset:"):
            try:
                base = preset(args.config[7:])
            except KeyError as exc:
                raise UsageError(exc.args[0]) from None
        else:
            path = _existing(args.config)
            try:
                base = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise DataFormatError(exc.msg, path, exc.lineno, exc.colno) from None
    overrides = list(args.set or [])
    if args.epochs is not None:
        overrides.append(f"train.epochs={args.epochs}")
    if args.seed is not None:
        overrides.append(f"train.seed={args.seed}")
    return io.RunConfig.from_dict(io.apply_overrides(base, overrides))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    data = io.read_dataset(_existing(args.data))
    cfg = _load_config(args)
    # the label column, if present, is never passed to training
    series = data.values[_parse_rows(args.rows, len(data))]
    if series.shape[1] != cfg.model.channels:
        raise ConfigError(f"data has {series.shape[1]} channels, config expects {cfg.model.channels}")
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.jsonl")
    try:
        model, records = train(series, cfg.model, cfg.train)
    except TrainingError as exc:
        if exc.model is not None:
            io.save_checkpoint(exc.model, args.out)
        io.write_log(log_path, exc.log)
        print(f"training failed: {exc}; last good checkpoint written to {args.out}", file=sys.stderr)
        return EXIT_FAIL
    io.save_checkpoint(model, args.out)
    io.write_log(log_path, records)
    if records:
        first, last = records[0], records[-1]
        print(f"{len(records)} iterations; L_rec {first['L_rec']:.4g} -> {last['L_rec']:.4g}; "
              f"checkpoint {args.out}")
    else:
        print(f"0 iterations; initial checkpoint {args.out}")
    return EXIT_OK


def cmd_score(args) -> int:
    try:
        model = io.load_checkpoint(_existing(args.model))
    except CheckpointError as exc:
        raise UsageError(f"{args.model}: {exc}") from None
    data = io.read_dataset(_existing(args.data))
    total, mse, sim = score_series(model, data.values)
    io.write_scores(args.out, total, mse, sim)
    print(f"scored {len(total)} timestamps -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    scores = io.read_scores(_existing(args.scores))
    labels = io.read_labels(_existing(args.labels))
    if scores.size != labels.size:
        raise UsageError(f"{scores.size} scores but {labels.size} labels")
    try:
        threshold = ThresholdSpec.parse(args.threshold)
        bias = BiasSpec.parse(args.bias, repetitions=args.bias_reps, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = evaluate(scores, labels, threshold, bias)
    if args.out:
        io.write_report(args.out, report)
    else:
        print(report.to_json())
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        demos = demos_from_arg(args.demo, seed=args.seed)
    except (KeyError, ValueError):
        raise UsageError(f"--demo must be 1, 2, 3 or all, got {args.demo!r}") from None
    table = run_bench(demos, DEFAULT_MODELS, reps=args.reps, seed=args.seed)
    for (demo, method), msg in table.errors.items():
        print(f"warning: {demo}/{method}: {msg}", file=sys.stderr)
    if args.out:
        Path(args.out).write_text(table.to_csv())
    else:
        sys.stdout.write(table.to_text())
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "sine-spike":
        x, y = make_sine_spike(length=args.length, channels=args.channels,
                               anomaly_ratio=args.ratio, seed=args.seed)
        io.write_dataset(args.out, x, y, timestamps=list(range(len(y))))
        print(f"{len(y)} rows, {int(y.sum())} anomalous -> {args.out}")
        return EXIT_OK
    if args.kind.startswith("demo:"):
        try:
            spec = demos_from_arg(args.kind[5:], seed=args.seed)[0]
        except (KeyError, ValueError):
            raise UsageError(f"unknown demo in --kind {args.kind!r}") from None
        y = gen_labels(spec, np.random.default_rng(args.seed))
        io.write_labels(args.out, y)
        print(f"{len(y)} labels, {int(y.sum())} anomalous -> {args.out}")
        return EXIT_OK
    raise UsageError(f"--kind must be sine-spike or demo:N, got {args.kind!r}")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simad", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model on an unlabeled CSV")
    t.add_argument("--config", help="JSON run config or preset:NAME (tiny, desk, full)")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="training log path (default: OUT.log.jsonl)")
    t.add_argument("--rows", help="row range START:END used for training")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="config override, repeatable")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="per-timestamp anomaly scores")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("eval", help="metric report for a scores file")
    e.add_argument("--scores", required=True)
    e.add_argument("--labels", required=True, help="CSV with a label column")
    e.add_argument("--bias", default="empirical", help="empirical, ideal or constant:B")
    e.add_argument("--bias-reps", type=int, default=20)
    e.add_argument("--threshold", default="best-f1", help="best-f1, quantile:Q or fixed:V")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench-metrics", help="synthetic metric benchmark table")
    b.add_argument("--demo", default="all")
    b.add_argument("--reps", type=int)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen-synth", help="write a synthetic dataset")
    g.add_argument("--kind", default="sine-spike", help="sine-spike or demo:N")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--length", type=int, default=3000)
    g.add_argument("--channels", type=int, default=2)
    g.add_argument("--ratio", type=float, default=0.05)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimADError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
