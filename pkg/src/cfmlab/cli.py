"""Command-line surface.

Exit codes are a stable contract: 0 success, 1 usage error, 2 check
failure, 3 runtime abort.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .theorems import SUITES, run_suite
from .train import TrainingAbort, run_distill, run_eval, run_sample, run_training

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cfmlab",
                     description="velocity-consistency flow matching lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a JSON config")
    p_train.add_argument("--config", required=True)

    p_sample = sub.add_parser("sample", help="sample from a checkpoint")
    p_sample.add_argument("--ckpt", required=True)
    p_sample.add_argument("--nfe-k", type=int, required=True,
                          help="number of segments K")
    p_sample.add_argument("--steps-per-segment", type=int, required=True,
                          help="Euler sub-steps per segment m (NFE = K*m)")
    p_sample.add_argument("--n", type=int, required=True)
    p_sample.add_argument("--out", required=True)
    p_sample.add_argument("--ppm", action="store_true",
                          help="also write a PPM scatter plot")
    p_sample.add_argument("--seed", type=int, default=0)

    p_distill = sub.add_parser("distill", help="distill a student from a teacher")
    p_distill.add_argument("--config", required=True)

    p_verify = sub.add_parser("verify", help="run numerical verification suites")
    p_verify.add_argument("--suite", required=True,
                          help=f"one of {sorted(SUITES)} or 'all'")
    p_verify.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint at several NFE")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--nfe", required=True,
                        help="comma-separated NFE list, e.g. 2,6,8")
    p_eval.add_argument("--n", type=int, required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--dataset", default=None,
                        help="JSON file with a dataset spec overriding the "
                             "checkpoint's target")
    return parser


def _cmd_train(args) -> int:
    cfg = RunConfig.from_json(args.config)
    if cfg.loss == "distill":
        raise UsageError("use the 'distill' subcommand for distillation configs")
    result = run_training(cfg)
    print(json.dumps(result))
    return EXIT_OK


def _cmd_distill(args) -> int:
    cfg = RunConfig.from_json(args.config)
    result = run_distill(cfg)
    print(json.dumps(result))
    return EXIT_OK


def _cmd_sample(args) -> int:
    result = run_sample(args.ckpt, args.nfe_k, args.steps_per_segment, args.n,
                        args.out, seed=args.seed, ppm=args.ppm)
    print(json.dumps(result))
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.suite != "all" and args.suite not in SUITES:
        raise UsageError(f"unknown suite '{args.suite}' "
                         f"(choose from {sorted(SUITES)} or 'all')")
    rows = run_suite(args.suite)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "verify.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("check_name,parameter,residual,tolerance,pass\n")
        for r in rows:
            fh.write(f"{r.check_name},{r.parameter},{r.residual!r},"
                     f"{r.tolerance!r},{str(r.passed).lower()}\n")
    n_fail = sum(not r.passed for r in rows)
    for r in rows:
        mark = "pass" if r.passed else "FAIL"
        print(f"[{mark}] {r.check_name} {r.parameter}: residual={r.residual:.3e} "
              f"tol={r.tolerance:.3e}")
    print(f"{len(rows) - n_fail}/{len(rows)} checks passed -> {csv_path}")
    return EXIT_OK if n_fail == 0 else EXIT_CHECK_FAILED


def _cmd_eval(args) -> int:
    try:
        nfes = [int(tok) for tok in args.nfe.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--nfe must be a comma-separated int list, got {args.nfe!r}")
    if not nfes:
        raise UsageError("--nfe list is empty")
    dataset = None
    if args.dataset:
        dataset = json.loads(Path(args.dataset).read_text(encoding="utf-8"))
    rows = run_eval(args.ckpt, nfes, args.n, seed=args.seed, dataset=dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "eval.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("nfe,w2,energy,straightness,residual\n")
        for r in rows:
            fh.write(f"{r['nfe']},{r['w2']!r},{r['energy']!r},"
                     f"{r['straightness']!r},{r['residual']!r}\n")
    for r in rows:
        print(f"nfe={r['nfe']}: w2={r['w2']:.4f} energy={r['energy']:.4f} "
              f"straightness={r['straightness']:.5f} residual={r['residual']:.4f}")
    print(f"wrote {csv_path}")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "sample": _cmd_sample,
    "distill": _cmd_distill,
    "verify": _cmd_verify,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, FloatingPointError, ValueError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
