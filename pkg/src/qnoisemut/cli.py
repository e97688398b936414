"""Command-line entry point: ``qnoisemut [global flags] <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .circuit import QasmError, load_qasm
from .inputs import build_suite, save_suite
from .pipeline import (
    ConfigError,
    DataError,
    ExperimentConfig,
    apply_thresholds,
    bundled_noise_dir,
    calibrate,
    compute_distances,
    load_corpus,
    report,
    run_all,
    run_experiment,
    stage_mutants,
    analyze,
)
from .seeding import task_seed
from .thresholds import Strategy, ThresholdError

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

log = logging.getLogger("qnoisemut")


def _noise_path(name: str) -> Path:
    """A JSON path, or the stem of a bundled model such as ``depolarizing``."""
    p = Path(name)
    if p.exists():
        return p
    bundled = bundled_noise_dir() / f"{name}.json"
    if bundled.exists():
        return bundled
    raise ConfigError(f"noise model {name!r} is neither a file nor a bundled model")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnoisemut", description=__doc__)
    ap.add_argument("--seed", type=int, help="master seed (default 0)")
    ap.add_argument("--shots", type=int, help="shots per execution (default 10000)")
    ap.add_argument("--runs", type=int, help="repetitions r per execution (default 30)")
    ap.add_argument("--percentile", type=float, help="calibration percentile q (default 0.875)")
    ap.add_argument(
        "--noise-model", action="append", default=None, metavar="JSON",
        help="noise model file or bundled name; repeatable",
    )
    ap.add_argument("--out", type=Path, default=Path("qnm-run"), help="run directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def corpus_flags(p):
        p.add_argument("--corpus", type=Path, help="directory of .qasm programs (default: bundled)")
        p.add_argument("--circuits", nargs="+", help="restrict to these circuit names")

    p = sub.add_parser("mutate", help="stage A: test suites, mutants and equivalence labels")
    corpus_flags(p)
    p.add_argument("--quota", type=int, default=10, help="sampled mutants per CUT")
    p.add_argument("--equivalents", type=int, default=10, help="reversibility equivalents per CUT")
    p.add_argument("--operators", nargs="+", default=["add", "remove", "replace"])
    p.add_argument("--no-noiseless", action="store_true", help="skip the noiseless backend")

    p = sub.add_parser("inputs", help="build the test suite of one QASM program")
    p.add_argument("qasm", type=Path)

    sub.add_parser("run", help="stage B: execute CUTs and mutants on every backend")
    sub.add_parser("distances", help="stage C: distances CSV")
    sub.add_parser("calibrate", help="calibrate thresholds on the CUTs")

    p = sub.add_parser("detect", help="stage D: apply a threshold strategy")
    p.add_argument("--strategy", nargs="+", choices=[s.value for s in Strategy], default=[s.value for s in Strategy])
    p.add_argument("--thresholds", type=Path, help="thresholds JSON (default: <out>/thresholds.json)")

    sub.add_parser("report", help="stage E: confusion matrices and scores")
    sub.add_parser("analyze", help="stage E: statistical tests to stats.csv")

    p = sub.add_parser("demo", help="every stage at desk scale with the bundled corpus")
    p.add_argument("--quota", type=int, default=10)
    p.add_argument("--equivalents", type=int, default=10)
    return ap


def _config(args, **fields) -> ExperimentConfig:
    """Config from flags, layered over ``<out>/config.json`` when one exists."""
    overrides = {
        "master_seed": args.seed,
        "shots": args.shots,
        "runs": args.runs,
        "percentile": args.percentile,
    }
    if args.noise_model is not None:
        overrides["noise_models"] = tuple(_noise_path(s) for s in args.noise_model)
    overrides.update(fields)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if (args.out / "config.json").exists() and args.command not in ("mutate", "demo"):
        base = ExperimentConfig.from_run_dir(args.out)
        return replace(base, **overrides)
    return ExperimentConfig(out_dir=args.out, **overrides)


def _detection_csvs(out: Path) -> list[Path]:
    paths = sorted((out / "detections").glob("*.csv"))
    if not paths:
        raise DataError(f"{out} has no detections; run 'detect' first")
    return paths


def dispatch(args) -> None:
    cmd = args.command
    out: Path = args.out
    if cmd == "mutate":
        cfg = _config(
            args,
            corpus_dir=args.corpus,
            circuits=tuple(args.circuits) if args.circuits else None,
            mutant_quota=args.quota,
            equivalents=args.equivalents,
            operators=tuple(args.operators),
            include_noiseless=not args.no_noiseless,
        )
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        corpus = stage_mutants(cfg)
        print(f"mutants for {len(corpus)} circuits written to {out / 'mutants'}")
    elif cmd == "inputs":
        try:
            circ = load_qasm(args.qasm)
        except OSError as exc:
            raise DataError(str(exc)) from None
        seed = args.seed or 0
        suite = build_suite(circ.n_qubits, task_seed(seed, "suite", circ.name))
        path = save_suite(suite, out / "suites" / circ.name)
        print(f"{len(suite.inputs)} inputs written to {path.parent}")
    elif cmd == "run":
        cfg = _config(args)
        run_experiment(cfg, generate=False)
        print(f"executions written to {out / 'executions'}")
    elif cmd == "distances":
        print(compute_distances(out))
    elif cmd == "calibrate":
        print(calibrate(_config(args)))
    elif cmd == "detect":
        thresholds = args.thresholds or out / "thresholds.json"
        if not Path(thresholds).exists():
            raise DataError(f"{thresholds} does not exist; run 'calibrate' first")
        for s in args.strategy:
            print(apply_thresholds(out / "distances.csv", thresholds, s))
    elif cmd == "report":
        print(report(_detection_csvs(out), out / "report.json"))
    elif cmd == "analyze":
        print(analyze(out))
    elif cmd == "demo":
        cfg = _config(
            args,
            mutant_quota=args.quota,
            equivalents=args.equivalents,
            shots=1000 if args.shots is None else args.shots,
            runs=5 if args.runs is None else args.runs,
            noise_models=tuple(_noise_path(s) for s in (args.noise_model or ["depolarizing", "damping"])),
        )
        t0 = time.perf_counter()
        paths = run_all(cfg)
        n = len(load_corpus(cfg.corpus_dir, cfg.circuits))
        print(f"demo over {n} circuits finished in {time.perf_counter() - t0:.1f} s")
        for k, v in paths.items():
            print(f"  {k}: {v}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        dispatch(args)
    except (ConfigError, ThresholdError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, QasmError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
