"""Command-line driver.

Subcommands::

    ttrank gen       --out DIR            target.tt3, train.csv, test.csv
    ttrank complete  --out DIR            solve at --rank, write trace.csv, solution.tt3
    ttrank estimate  --out DIR            solve and estimate, write all artifacts
    ttrank reproduce {fig1,fig2,fig3}     a reference experiment
    ttrank selftest                       quick internal consistency checks

Values come from the built-in defaults (or a preset), then from
``--config FILE`` (JSON mirroring :class:`ExperimentConfig`), then from
explicit flags. ``complete`` and ``estimate`` read ``--train`` (and
``--test``, ``--solution``) when given instead of generating data.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from . import __version__
from .completion import CompletionProblem, solve, test_rmse
from .experiments import PRESETS, ExperimentConfig, generate, preset, run, streams
from .rank import estimate_tt_rank, naive_estimate
from .tensor import read_samples_csv, write_samples_csv
from .tt import evaluate_samples, orthogonalize, random_tt, read_tt, write_tt

logger = logging.getLogger("ttrank")

# flag -> (section, key) in the config dict
_FLAG_MAP = {
    "dims": (None, "dims"),
    "rank": (None, "solve_rank"),
    "true_rank": (None, "true_rank"),
    "samples": (None, "num_samples"),
    "test_samples": (None, "num_test"),
    "noise": (None, "noise"),
    "noise_mode": (None, "noise_mode"),
    "seed": (None, "seed"),
    "max_iters": ("solver", "max_iters"),
    "grad_tol_sq": ("solver", "grad_tol_sq"),
    "beta_rule": ("solver", "beta_rule"),
    "cap_s": ("estimator", "s"),
    "zero_tol": ("estimator", "zero_tol"),
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file mirroring ExperimentConfig")
    p.add_argument("--dims", type=int, nargs=3, metavar=("N1", "N2", "N3"))
    p.add_argument("--rank", type=int, nargs=2, metavar=("R1", "R2"), help="solve rank")
    p.add_argument("--true-rank", type=int, nargs=2, metavar=("R1", "R2"))
    p.add_argument("--samples", type=int, help="training sample count |Omega|")
    p.add_argument("--test-samples", type=int, help="test sample count |Gamma|")
    p.add_argument("--noise", type=float, help="noise level eta")
    p.add_argument("--noise-mode", choices=("sampled", "dense"))
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--grad-tol-sq", type=float)
    p.add_argument("--beta-rule", choices=("pr+", "hs+", "fr", "sd"))
    p.add_argument("--cap-s", type=int, help="rank cap s (default 20)")
    p.add_argument("--zero-tol", type=float)
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 so that outputs are byte-reproducible")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttrank", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("gen", help="generate a target tensor and sample sets"))
    for name, text in (("complete", "run fixed-rank completion"),
                       ("estimate", "complete and estimate the TT-rank")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--train", type=Path, help="training SampleSet CSV (1-based)")
        p.add_argument("--test", type=Path, help="test SampleSet CSV (1-based)")
        if name == "estimate":
            p.add_argument("--solution", type=Path, help="TT3 file to estimate at (skips solving)")
    p = sub.add_parser("reproduce", help="run a reference experiment")
    p.add_argument("figure", choices=sorted(PRESETS))
    _common(p)
    p = sub.add_parser("selftest", help="quick consistency checks")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Merge defaults, the JSON config file and explicit flags."""
    d = (base or ExperimentConfig()).to_dict()
    if getattr(args, "config", None) is not None:
        loaded = json.loads(Path(args.config).read_text())
        for section in ("solver", "estimator"):
            d[section].update(loaded.pop(section, {}) or {})
        d.update(loaded)
    for flag, (section, key) in _FLAG_MAP.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        (d[section] if section else d)[key] = value
    if getattr(args, "no_timing", False):
        d["solver"]["record_time"] = False
    # sample counts of files given on the command line replace the generated ones
    if getattr(args, "train", None) is not None:
        d["num_samples"] = _count_rows(args.train)
        d["num_test"] = _count_rows(args.test) if args.test is not None else 0
    return ExperimentConfig.from_dict(d)


def _count_rows(path: Path) -> int:
    with open(path) as fh:
        return max(sum(1 for line in fh if line.strip()) - 1, 0)


def _echo(cfg: ExperimentConfig, out: Path) -> None:
    (out / "config.echo.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def _load_or_generate(args, cfg: ExperimentConfig):
    if args.train is not None:
        train = read_samples_csv(args.train, cfg.dims)
        test = read_samples_csv(args.test, cfg.dims) if args.test is not None else None
        return train, test
    _, train, test = generate(cfg)
    return train, (test if len(test) else None)


def _solve(cfg: ExperimentConfig, train, test):
    rngs = streams(cfg.seed)
    p = CompletionProblem(cfg.dims, cfg.solve_rank, train=train, test=test)
    X0 = random_tt(cfg.dims, cfg.solve_rank, rngs["x0"])
    solver_cfg = replace(cfg.solver, seed=int(rngs["solver"].integers(2**32)))
    X, trace = solve(p, solver_cfg, X0)
    return p, X, trace


def cmd_gen(args) -> int:
    cfg = resolve_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    A, train, test = generate(cfg)
    write_tt(A, out / "target.tt3")
    write_samples_csv(train, out / "train.csv")
    write_samples_csv(test, out / "test.csv")
    _echo(cfg, out)
    print(f"wrote {len(train)} training and {len(test)} test samples to {out}")
    return 0


def cmd_complete(args) -> int:
    cfg = resolve_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    train, test = _load_or_generate(args, cfg)
    _, X, trace = _solve(cfg, train, test)
    trace.to_csv(out / "trace.csv")
    write_tt(X, out / "solution.tt3")
    _echo(cfg, out)
    print(f"iterations={trace.n_iter} grad_norm_sq={trace.grad_norm_sq:.3e} f_omega={trace.f_omega:.6e}")
    return _finish(trace, out)


def cmd_estimate(args) -> int:
    cfg = resolve_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.train is None and args.solution is None:
        result = run(cfg, out)
        _report(result.estimate, result.naive)
        return _finish(result.trace, out)

    train, test = _load_or_generate(args, cfg)
    p = CompletionProblem(cfg.dims, cfg.solve_rank, train=train, test=test)
    trace = None
    if args.solution is not None:
        X = orthogonalize(read_tt(args.solution))
        if X.dims != cfg.dims:
            raise ValueError(f"solution dims {X.dims} differ from {cfg.dims}")
        p = replace(p, rank=X.ranks)
    else:
        p, X, trace = _solve(cfg, train, test)
        trace.to_csv(out / "trace.csv")
        write_tt(X, out / "solution.tt3")
    est = estimate_tt_rank(X, p, cfg.estimator)
    G = train.with_values(evaluate_samples(X, train).values - train.values)
    naive = naive_estimate(G, cfg.dims, cfg.estimator)
    est.write_singular_values_csv(out / "singular_values.csv")
    d = json.loads(est.to_json())
    d["naive_delta"] = naive
    if test is not None and len(test):
        d["test_rmse"] = test_rmse(X, test)
    (out / "estimate.json").write_text(json.dumps(d, indent=2) + "\n")
    _echo(cfg, out)
    _report(est, naive)
    return _finish(trace, out) if trace is not None else 0


def cmd_reproduce(args) -> int:
    cfg = resolve_config(args, base=preset(args.figure))
    result = run(cfg, args.out)
    print(f"{args.figure}: iterations={result.trace.n_iter} "
          f"grad_norm_sq={result.trace.grad_norm_sq:.3e} test_rmse={result.test_rmse:.3e}")
    _report(result.estimate, result.naive)
    return _finish(result.trace, args.out)


def _report(est, naive) -> None:
    print(f"delta={tuple(est.delta)} proposed={tuple(est.proposed)} naive={naive}")


def _finish(trace, out: Path) -> int:
    if trace is not None and trace.diagnostic:
        _write_diagnostic(out, {"error": "solver failure", "detail": trace.diagnostic,
                                "iterations": trace.n_iter})
        return 2
    return 0


def _write_diagnostic(out: Path, payload: dict) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "diagnostic.json").write_text(json.dumps(payload, indent=2) + "\n")
    except OSError:
        pass
    print(json.dumps(payload), file=sys.stderr)


def cmd_selftest(args) -> int:
    from .selftest import run_checks

    failures = 0
    for name, ok, detail in run_checks():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += not ok
    return 1 if failures else 0


COMMANDS = {
    "gen": cmd_gen,
    "complete": cmd_complete,
    "estimate": cmd_estimate,
    "reproduce": cmd_reproduce,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        out = getattr(args, "out", None)
        payload = {"error": type(exc).__name__, "detail": str(exc)}
        if args.verbose:
            payload["traceback"] = traceback.format_exc()
        if out is not None:
            _write_diagnostic(out, payload)
        else:
            print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
