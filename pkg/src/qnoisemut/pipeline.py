"""Five-stage workflow: mutants, execution, distances, detection, analysis.

Everything written to the output directory is a deterministic function of the
configuration, so two runs with the same master seed are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import shutil
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .analysis import (
    Scores,
    confusion_and_scores,
    correlate_batch,
    mann_whitney_cliffs,
    variance_ratio,
)
from .circuit import Circuit, characteristics, compose, emit_qasm, load_qasm
from .inputs import TestSuite, build_suite, load_suite, save_suite
from .metrics import (
    ALL_METRICS,
    MetricKind,
    expectation_diff,
    fidelity,
    hellinger,
    jensen_shannon,
    trace_distance,
)
from .mutate import (
    Mutant,
    Operator,
    enumerate_mutants,
    gen_equivalent,
    is_equivalent,
    load_mutants,
    sample_balanced,
    save_mutants,
)
from .seeding import task_seed
from .sim import (
    DEFAULT_MAX_QUBITS,
    RNG_ALGORITHM,
    DensityMatrix,
    NoiseModel,
    OutputDistribution,
    SimulationError,
    expectation_from_counts,
    run_density,
    sample_density,
)
from .thresholds import (
    NOISELESS,
    Strategy,
    ThresholdError,
    ThresholdSet,
    calibrate_all,
    classify,
)

log = logging.getLogger(__name__)

CUT_ID = "CUT"

DISTANCE_HEADER = [
    "algorithm",
    "circuit_id",
    "n_qubits",
    "mutant_id",
    "mutant_label",
    "operator",
    "gate_type",
    "segment",
    "input_id",
    "input_type",
    "backend",
    "run_index",
    "metric",
    "value",
]
DETECTION_HEADER = DISTANCE_HEADER + ["strategy", "threshold", "detected"]
STATS_HEADER = ["metric", "variable", "test", "statistic", "p", "p_holm", "effect", "strength", "label", "backend"]


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


class DataError(RuntimeError):
    """Missing or inconsistent pipeline data (CLI exit code 3)."""


def bundled_corpus_dir() -> Path:
    return Path(str(resources.files("qnoisemut") / "data" / "corpus"))


def bundled_noise_dir() -> Path:
    return Path(str(resources.files("qnoisemut") / "data" / "noise"))


@dataclass
class ExperimentConfig:
    out_dir: Path
    corpus_dir: Path | None = None
    operators: tuple[str, ...] = ("add", "remove", "replace")
    mutant_quota: int = 10
    equivalents: int = 10
    shots: int = 10_000
    runs: int = 30
    percentile: float = 0.875
    noise_models: tuple = ()
    include_noiseless: bool = True
    master_seed: int = 0
    max_qubits: int = DEFAULT_MAX_QUBITS
    circuits: tuple[str, ...] | None = None
    workers: int = 1

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.corpus_dir is not None:
            self.corpus_dir = Path(self.corpus_dir)
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.runs < 2:
            raise ConfigError("runs must be >= 2")
        if not 0.0 < self.percentile < 1.0:
            raise ConfigError("percentile must lie in (0, 1)")
        if self.mutant_quota < 0 or self.equivalents < 0:
            raise ConfigError("mutant quota and equivalents count must be non-negative")
        try:
            self.operators = tuple(Operator(o).value for o in self.operators)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        models = []
        for nm in self.noise_models:
            if isinstance(nm, NoiseModel):
                models.append(nm)
            else:
                try:
                    models.append(NoiseModel.load(nm))
                except (OSError, ValueError, KeyError) as exc:
                    raise ConfigError(f"cannot load noise model {nm}: {exc}") from None
        names = [m.name for m in models]
        if len(set(names)) != len(names) or NOISELESS in names:
            raise ConfigError("noise model names must be unique and differ from 'noiseless'")
        self.noise_models = tuple(models)

    @property
    def backends(self) -> list[NoiseModel | None]:
        return ([None] if self.include_noiseless else []) + list(self.noise_models)

    def to_json(self) -> dict:
        return {
            "corpus_dir": None if self.corpus_dir is None else str(self.corpus_dir),
            "circuits": None if self.circuits is None else list(self.circuits),
            "operators": list(self.operators),
            "mutant_quota": self.mutant_quota,
            "equivalents": self.equivalents,
            "shots": self.shots,
            "runs": self.runs,
            "percentile": self.percentile,
            "noise_models": [nm.to_json() for nm in self.noise_models],
            "include_noiseless": self.include_noiseless,
            "master_seed": self.master_seed,
            "max_qubits": self.max_qubits,
            "rng": RNG_ALGORITHM,
            "seed_derivation": "master_seed XOR fnv1a64('circuit|mutant|input|backend|run')",
            "version": __version__,
        }

    @classmethod
    def from_run_dir(cls, run_dir) -> "ExperimentConfig":
        run_dir = Path(run_dir)
        try:
            obj = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"{run_dir} has no config.json") from None
        return cls(
            out_dir=run_dir,
            corpus_dir=obj["corpus_dir"],
            operators=tuple(obj["operators"]),
            mutant_quota=obj["mutant_quota"],
            equivalents=obj["equivalents"],
            shots=obj["shots"],
            runs=obj["runs"],
            percentile=obj["percentile"],
            noise_models=tuple(NoiseModel.from_json(m) for m in obj["noise_models"]),
            include_noiseless=obj["include_noiseless"],
            master_seed=obj["master_seed"],
            max_qubits=obj["max_qubits"],
            circuits=None if obj["circuits"] is None else tuple(obj["circuits"]),
        )


def _backend_name(nm: NoiseModel | None) -> str:
    return NOISELESS if nm is None else nm.name


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------


@dataclass
class CorpusEntry:
    circuit: Circuit
    algorithm: str
    output_type: str


def load_corpus(corpus_dir: Path | None = None, names: Sequence[str] | None = None) -> list[CorpusEntry]:
    """QASM files of a directory, with optional ``corpus.json`` metadata."""
    corpus_dir = Path(corpus_dir) if corpus_dir is not None else bundled_corpus_dir()
    if not corpus_dir.is_dir():
        raise ConfigError(f"corpus directory {corpus_dir} does not exist")
    meta_path = corpus_dir / "corpus.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    entries = []
    for path in sorted(corpus_dir.glob("*.qasm")):
        if names is not None and path.stem not in names:
            continue
        try:
            circuit = load_qasm(path)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
        m = meta.get(path.stem, {})
        entries.append(CorpusEntry(circuit, m.get("algorithm", path.stem), m.get("output_type", "unknown")))
    if not entries:
        raise ConfigError(f"no QASM programs found in {corpus_dir}")
    if names is not None:
        missing = set(names) - {e.circuit.name for e in entries}
        if missing:
            raise ConfigError(f"circuits not in corpus: {sorted(missing)}")
    return entries


# ---------------------------------------------------------------------------
# stage A: mutants and suites
# ---------------------------------------------------------------------------


def generate_mutants(cut: Circuit, suite: TestSuite, cfg: ExperimentConfig) -> list[Mutant]:
    """Balanced non-equivalent sample plus reversibility equivalents, all labelled."""
    out: list[Mutant] = []
    if cfg.mutant_quota:
        pool = enumerate_mutants(cut, cfg.operators, task_seed(cfg.master_seed, "enumerate", cut.name))
        sample = sample_balanced(pool, min(cfg.mutant_quota, len(pool)), task_seed(cfg.master_seed, "sample", cut.name))
        for m in sample:
            is_equivalent(cut, m, suite)
        out.extend(sample)
    if cfg.equivalents:
        eqs = gen_equivalent(cut, cfg.equivalents, task_seed(cfg.master_seed, "equivalent", cut.name))
        for m in eqs:
            if not is_equivalent(cut, m, suite):
                raise DataError(f"{m.id} failed the equivalence oracle")
        out.extend(eqs)
    return sorted(out, key=lambda m: m.id)


def stage_mutants(cfg: ExperimentConfig) -> list[CorpusEntry]:
    corpus = load_corpus(cfg.corpus_dir, cfg.circuits)
    out = cfg.out_dir
    for e in corpus:
        cut = e.circuit
        if cut.n_qubits > cfg.max_qubits:
            log.warning("skipping %s: %d qubits exceeds cap %d", cut.name, cut.n_qubits, cfg.max_qubits)
            continue
        (out / "corpus").mkdir(parents=True, exist_ok=True)
        (out / "corpus" / f"{cut.name}.qasm").write_text(emit_qasm(cut), encoding="utf-8")
        suite = build_suite(cut.n_qubits, task_seed(cfg.master_seed, "suite", cut.name), cfg.max_qubits)
        save_suite(suite, out / "suites" / cut.name)
        save_mutants(generate_mutants(cut, suite, cfg), out / "mutants" / cut.name)
    meta = {
        e.circuit.name: {
            "algorithm": e.algorithm,
            "output_type": e.output_type,
            **asdict(characteristics(e.circuit)),
        }
        for e in corpus
        if e.circuit.n_qubits <= cfg.max_qubits
    }
    _write_json(out / "corpus" / "corpus.json", meta)
    return corpus


# ---------------------------------------------------------------------------
# stage B: execution
# ---------------------------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _store_density(rho: DensityMatrix, density_dir: Path) -> str:
    raw = rho.to_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    path = density_dir / digest[:2] / f"{digest}.bin"
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(raw)
    return digest


def _execute_circuit(args) -> list[dict]:
    """All (input, backend, run) executions of one circuit; returns records."""
    cut_name, circuit_id, circuit, suite, backends, shots, runs, seed, max_qubits, density_dir = args
    records = []
    for t in suite.inputs:
        program = compose(t.prep, circuit)
        for nm in backends:
            bname = _backend_name(nm)
            try:
                rho = run_density(program, nm, max_qubits)
            except SimulationError as exc:
                log.warning("skipping %s/%s on %s: %s", circuit_id, t.id, bname, exc)
                continue
            digest = _store_density(rho, Path(density_dir))
            for j in range(runs):
                s = task_seed(seed, cut_name, circuit_id, t.id, bname, j)
                counts = sample_density(rho, nm, shots, s)
                records.append(
                    {
                        "circuit": cut_name,
                        "mutant": circuit_id,
                        "input": t.id,
                        "backend": bname,
                        "run": j,
                        "seed": s,
                        "shots": shots,
                        "counts": dict(sorted(counts.counts.items())),
                        "expectation": expectation_from_counts(counts),
                        "density": digest,
                    }
                )
    return records


def run_experiment(cfg: ExperimentConfig, generate: bool = True) -> Path:
    """Stages A and B: mutants (unless already present) and every execution."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_json())
    if generate or not (out / "mutants").exists():
        stage_mutants(cfg)
    density_dir = out / "density"
    density_dir.mkdir(exist_ok=True)
    exec_dir = out / "executions"
    if exec_dir.exists():
        shutil.rmtree(exec_dir)
    exec_dir.mkdir()
    tasks = []
    for cut_path in sorted((out / "corpus").glob("*.qasm")):
        cut = load_qasm(cut_path)
        suite = load_suite(out / "suites" / cut.name)
        mutants = load_mutants(out / "mutants" / cut.name)
        circuits = [(CUT_ID, cut)] + [(m.id, m.circuit) for m in mutants]
        for cid, circ in circuits:
            tasks.append(
                (cut.name, cid, circ, suite, cfg.backends, cfg.shots, cfg.runs, cfg.master_seed,
                 cfg.max_qubits, str(density_dir))
            )
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_execute_circuit, tasks))
    else:
        results = [_execute_circuit(t) for t in tasks]
    by_cut: dict[str, list[dict]] = defaultdict(list)
    for recs in results:
        for r in recs:
            by_cut[r["circuit"]].append(r)
    for cut_name, recs in sorted(by_cut.items()):
        recs.sort(key=lambda r: (r["mutant"], r["input"], r["backend"], r["run"]))
        with open(exec_dir / f"{cut_name}.jsonl", "w", encoding="utf-8") as fh:
            for r in recs:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    return out


def load_executions(run_dir: Path) -> list[dict]:
    exec_dir = Path(run_dir) / "executions"
    if not exec_dir.is_dir():
        raise DataError(f"{run_dir} has no executions; run stage B first")
    recs = []
    for path in sorted(exec_dir.glob("*.jsonl")):
        with open(path, encoding="utf-8") as fh:
            recs.extend(json.loads(line) for line in fh if line.strip())
    return recs


# ---------------------------------------------------------------------------
# stage C: distances
# ---------------------------------------------------------------------------


def _load_density(run_dir: Path, digest: str, cache: dict) -> DensityMatrix:
    if digest not in cache:
        path = run_dir / "density" / digest[:2] / f"{digest}.bin"
        if not path.exists():
            raise DataError(f"missing density matrix {digest}")
        cache[digest] = DensityMatrix.load(path)
    return cache[digest]


def compute_distances(run_dir, out_csv: Path | None = None) -> Path:
    """Distances between each mutant execution and the matching CUT execution."""
    run_dir = Path(run_dir)
    records = load_executions(run_dir)
    corpus_meta = json.loads((run_dir / "corpus" / "corpus.json").read_text(encoding="utf-8"))
    mutant_meta: dict[str, dict] = {}
    input_types: dict[tuple[str, str], str] = {}
    for cut_name in corpus_meta:
        for m in json.loads((run_dir / "mutants" / cut_name / "manifest.json").read_text(encoding="utf-8")):
            mutant_meta[m["id"]] = m
        for t in json.loads((run_dir / "suites" / cut_name / "manifest.json").read_text(encoding="utf-8")):
            input_types[(cut_name, t["id"])] = t["type"]

    cut_exec = {}
    for r in records:
        if r["mutant"] == CUT_ID:
            cut_exec[(r["circuit"], r["input"], r["backend"], r["run"])] = r

    rows = []
    dens_cache: dict[str, DensityMatrix] = {}
    pair_cache: dict[tuple[str, str], tuple[float, float]] = {}
    for r in records:
        if r["mutant"] == CUT_ID:
            continue
        key = (r["circuit"], r["input"], r["backend"], r["run"])
        ref = cut_exec.get(key)
        if ref is None:
            raise DataError(f"no CUT execution for {r['mutant']} at {key}")
        m = mutant_meta[r["mutant"]]
        cmeta = corpus_meta[r["circuit"]]
        n = cmeta["n_qubits"]
        base = [
            cmeta["algorithm"], r["circuit"], n, r["mutant"], m["label"], m["operator"],
            m["gate_type"], m["segment"], r["input"], input_types[(r["circuit"], r["input"])],
            r["backend"], r["run"],
        ]
        values: dict[MetricKind, float] = {}
        if r.get("density") and ref.get("density"):
            pk = (ref["density"], r["density"])
            if pk not in pair_cache:
                a = _load_density(run_dir, ref["density"], dens_cache)
                b = _load_density(run_dir, r["density"], dens_cache)
                pair_cache[pk] = (trace_distance(a, b), fidelity(a, b))
            values[MetricKind.TRACE_DISTANCE], values[MetricKind.FIDELITY] = pair_cache[pk]
        p = OutputDistribution(n, ref["counts"], ref["shots"])
        q = OutputDistribution(n, r["counts"], r["shots"])
        values[MetricKind.HELLINGER] = hellinger(p, q)
        values[MetricKind.JENSEN_SHANNON] = jensen_shannon(p, q)
        values[MetricKind.EXPECTATION_DIFF] = expectation_diff(ref["expectation"], r["expectation"])
        for metric in ALL_METRICS:
            if metric in values:
                rows.append(base + [metric.value, _fmt(values[metric])])
    rows.sort(key=lambda row: (row[3], row[8], row[10], row[11], row[12]))
    out_csv = Path(out_csv) if out_csv is not None else run_dir / "distances.csv"
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DISTANCE_HEADER)
        w.writerows(rows)
    return out_csv


def read_csv(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# calibration and stage D: detection
# ---------------------------------------------------------------------------


def calibrate(cfg: ExperimentConfig, out_json: Path | None = None) -> Path:
    """Calibrate every threshold on the CUTs (never on mutants) of the run."""
    out = cfg.out_dir
    corpus = []
    for cut_path in sorted((out / "corpus").glob("*.qasm")):
        cut = load_qasm(cut_path)
        corpus.append((cut, load_suite(out / "suites" / cut.name)))
    if not corpus:
        raise DataError(f"{out} has no corpus; run the mutate stage first")
    ts = calibrate_all(
        corpus, list(cfg.noise_models), ALL_METRICS, cfg.runs, cfg.shots, cfg.percentile, cfg.master_seed
    )
    out_json = Path(out_json) if out_json is not None else out / "thresholds.json"
    ts.save(out_json)
    return out_json


def apply_thresholds(distances_csv, thresholds: ThresholdSet | Path | str, strategy, out_csv=None) -> Path:
    """Append threshold and detection flag to every distance row."""
    strategy = Strategy(strategy)
    ts = thresholds if isinstance(thresholds, ThresholdSet) else ThresholdSet.load(thresholds)
    rows = read_csv(distances_csv)
    out_csv = Path(out_csv) if out_csv is not None else Path(distances_csv).parent / "detections" / f"{strategy.value}.csv"
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTION_HEADER)
        for row in rows:
            metric = MetricKind(row["metric"])
            try:
                t = ts.value(metric, strategy, row["backend"])
            except ThresholdError as exc:
                raise DataError(str(exc)) from None
            flag = classify(float(row["value"]), t, metric.orientation)
            w.writerow([row[h] for h in DISTANCE_HEADER] + [strategy.value, _fmt(t), int(flag)])
    return out_csv


# ---------------------------------------------------------------------------
# stage E: report and analysis
# ---------------------------------------------------------------------------


def _cell_scores(rows: Sequence[dict]) -> tuple[Scores, Scores]:
    per_comparison = confusion_and_scores(
        {"true_label": r["mutant_label"], "detected": r["detected"] == "1"} for r in rows
    )
    by_mutant: dict[str, tuple[str, bool]] = {}
    for r in rows:
        label, hit = by_mutant.get(r["mutant_id"], (r["mutant_label"], False))
        by_mutant[r["mutant_id"]] = (label, hit or r["detected"] == "1")
    per_mutant = confusion_and_scores(
        {"true_label": label, "detected": hit} for label, hit in by_mutant.values()
    )
    return per_mutant, per_comparison


def report(detection_csvs: Iterable, out_json: Path | None = None) -> Path:
    """Confusion matrices and scores per (metric, strategy, backend).

    ``per_mutant`` flags a mutant when any of its executions is flagged;
    ``per_comparison`` scores each execution pair on its own.
    """
    detection_csvs = [Path(p) for p in detection_csvs]
    rows = []
    for p in detection_csvs:
        rows.extend(read_csv(p))
    if not rows:
        raise DataError("no detection rows to report")
    cells: dict[tuple[str, str, str], list[dict]] = defaultdict(list)
    for r in rows:
        cells[(r["metric"], r["strategy"], r["backend"])].append(r)
    body = []
    for (metric, strategy, backend), cell in sorted(cells.items()):
        per_mutant, per_comparison = _cell_scores(cell)
        body.append(
            {
                "metric": metric,
                "strategy": strategy,
                "backend": backend,
                "threshold": float(cell[0]["threshold"]),
                "mutants": len({r["mutant_id"] for r in cell}),
                "per_mutant": per_mutant.to_json(),
                "per_comparison": per_comparison.to_json(),
            }
        )
    out_json = Path(out_json) if out_json is not None else detection_csvs[0].parent.parent / "report.json"
    _write_json(out_json, {"cells": body})
    return out_json


QUANT_VARS = ["n_qubits", "n_gates", "depth", "relative_position"]
CAT_VARS = ["gate_type", "input_type", "output_type", "algorithm", "operator"]
_SEGMENT_ORDINAL = {"beginning": 1, "pre_middle": 2, "middle": 3, "post_middle": 4, "end": 5}


def analyze(run_dir, out_csv: Path | None = None) -> Path:
    """Statistical characterisation of the distance table.

    Writes variance ratios (noisy vs noiseless, per label), equivalent vs
    non-equivalent separation per backend, and characteristic correlations
    over noisy executions with Holm correction per (metric, label) batch.
    """
    run_dir = Path(run_dir)
    rows = read_csv(run_dir / "distances.csv")
    corpus_meta = json.loads((run_dir / "corpus" / "corpus.json").read_text(encoding="utf-8"))
    for r in rows:
        c = corpus_meta[r["circuit_id"]]
        r["n_gates"] = c["n_gates"]
        r["depth"] = c["depth"]
        r["output_type"] = c["output_type"]
        r["relative_position"] = _SEGMENT_ORDINAL[r["segment"]]
    out_rows = []

    def emit(metric, variable, res, label="", backend=""):
        strength = "" if res.strength is None else res.strength.value
        p_holm = res.details.get("p_holm", "")
        out_rows.append(
            [metric, variable, res.test_name, _fmt(res.statistic), _fmt(res.p_value),
             "" if p_holm == "" else _fmt(p_holm), _fmt(res.effect_size), strength, label, backend]
        )

    groups: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        groups[(r["metric"], r["mutant_label"], r["backend"])].append(float(r["value"]))
    metrics = sorted({r["metric"] for r in rows})
    backends = sorted({r["backend"] for r in rows})
    noisy = [b for b in backends if b != NOISELESS]
    for metric in metrics:
        for label in ("equivalent", "non_equivalent"):
            base = groups.get((metric, label, NOISELESS), [])
            for b in noisy:
                vals = groups.get((metric, label, b), [])
                if len(base) >= 2 and len(vals) >= 2:
                    emit(metric, "noise_dispersion", variance_ratio(vals, base), label, b)
        for b in backends:
            eq = groups.get((metric, "equivalent", b), [])
            ne = groups.get((metric, "non_equivalent", b), [])
            if eq and ne:
                emit(metric, "mutant_label", mann_whitney_cliffs(ne, eq), "", b)
        for label in ("equivalent", "non_equivalent"):
            subset = [r for r in rows if r["metric"] == metric and r["mutant_label"] == label and r["backend"] != NOISELESS]
            if not subset:
                continue
            variables = QUANT_VARS + [v for v in CAT_VARS if not (label == "equivalent" and v == "operator")]
            for v, res in correlate_batch(subset, variables).items():
                emit(metric, v, res, label, "noisy")
    out_csv = Path(out_csv) if out_csv is not None else run_dir / "stats.csv"
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        w.writerows(out_rows)
    return out_csv


def run_all(cfg: ExperimentConfig, strategies: Sequence[Strategy] = tuple(Strategy)) -> dict[str, Path]:
    """Every stage, A to E, into ``cfg.out_dir``."""
    run_dir = run_experiment(cfg)
    distances = compute_distances(run_dir)
    thresholds = calibrate(cfg)
    ts = ThresholdSet.load(thresholds)
    has_derived = all(t.middle is not None for t in ts.thresholds.values())
    detections = []
    for s in strategies:
        s = Strategy(s)
        if s in (Strategy.MIDDLE, Strategy.ABOVE) and not has_derived:
            continue
        detections.append(apply_thresholds(distances, ts, s))
    rep = report(detections, run_dir / "report.json")
    stats = analyze(run_dir)
    return {"run_dir": run_dir, "distances": distances, "thresholds": thresholds, "report": rep, "stats": stats}
