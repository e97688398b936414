"""Detection thresholds: calibration against theoretical outputs and derived variants."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuit import Circuit, compose, emit_qasm
from .inputs import TestSuite
from .metrics import (
    ALL_METRICS,
    MetricKind,
    Orientation,
    expectation_diff,
    fidelity,
    hellinger,
    jensen_shannon,
    trace_distance,
)
from .seeding import task_seed
from .sim import (
    NoiseModel,
    OutputDistribution,
    expectation_from_counts,
    expectation_from_density,
    run_density,
    sample_density,
)

DEFAULT_PERCENTILE = 0.875
DEFAULT_RUNS = 30
DEFAULT_SHOTS = 10_000

# fixed noiseless thresholds for the density-matrix metrics: without shots these
# only move by floating-point rounding
NOISELESS_FIXED = {
    MetricKind.TRACE_DISTANCE: 1e-13,
    MetricKind.FIDELITY: 1.0 - 1e-14,
}

NOISELESS = "noiseless"


class ThresholdError(ValueError):
    pass


class Strategy(enum.Enum):
    NOISELESS = "noiseless"
    NOISE = "noise"
    MIDDLE = "middle"
    ABOVE = "above"


def percentile(values: Sequence[float], q: float) -> float:
    """Linear interpolation between closest ranks: h = (n - 1) q."""
    if len(values) == 0:
        raise ValueError("percentile of an empty list")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    xs = sorted(float(v) for v in values)
    h = (len(xs) - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


@dataclass
class CalibrationSample:
    program_id: str
    distances: list[float]

    @property
    def runs(self) -> int:
        return len(self.distances)

    @property
    def mean(self) -> float:
        return float(np.mean(self.distances))

    @property
    def std(self) -> float:
        if self.runs < 2:
            raise ThresholdError("at least two runs are needed for a standard deviation")
        return float(np.std(self.distances, ddof=1))

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(self.runs)


def threshold_from_samples(
    samples: Sequence[CalibrationSample], orientation: Orientation, q: float = DEFAULT_PERCENTILE
) -> float:
    """Aggregate per-program means and standard errors into one threshold.

    Dissimilarities use Q_q(means) + Q_q(errors). Similarities mirror it:
    Q_{1-q}(means) - Q_q(errors).
    """
    if not samples:
        raise ThresholdError("no calibration samples")
    if not 0.0 < q < 1.0:
        raise ThresholdError("percentile must lie in (0, 1)")
    samples = sorted(samples, key=lambda s: s.program_id)
    means = [s.mean for s in samples]
    errs = [s.stderr for s in samples]
    if Orientation(orientation) is Orientation.SIMILARITY:
        return percentile(means, 1.0 - q) - percentile(errs, q)
    return percentile(means, q) + percentile(errs, q)


def _backend_name(nm: NoiseModel | None) -> str:
    return NOISELESS if nm is None else nm.name


def calibration_samples(
    corpus: Sequence[tuple[Circuit, TestSuite]],
    backend: NoiseModel | None,
    metrics: Iterable[MetricKind] = ALL_METRICS,
    r: int = DEFAULT_RUNS,
    shots: int = DEFAULT_SHOTS,
    seed: int = 0,
) -> dict[MetricKind, list[CalibrationSample]]:
    """Per-run distances between theoretical outputs and backend executions.

    One program is one (circuit, input) pair. Theoretical references come from
    the noiseless density matrix; each of the ``r`` runs draws fresh shots with
    its own task seed.
    """
    metrics = [MetricKind(m) for m in metrics]
    if not corpus:
        raise ThresholdError("empty calibration corpus")
    if r < 2:
        raise ThresholdError("calibration needs r >= 2 runs")
    if backend is None and any(m.needs_density for m in metrics):
        raise ThresholdError(
            "density-matrix metrics use fixed noiseless thresholds; calibrate them on a noise backend"
        )
    bname = _backend_name(backend)
    out: dict[MetricKind, list[CalibrationSample]] = {m: [] for m in metrics}
    for circuit, suite in corpus:
        if suite.n_qubits != circuit.n_qubits:
            raise ThresholdError(f"suite size does not match {circuit.name}")
        for t in suite.inputs:
            program = compose(t.prep, circuit)
            pid = f"{circuit.name}/{t.id}"
            ideal = run_density(program)
            p_ideal = OutputDistribution.exact(ideal.probabilities(), shots)
            z_ideal = expectation_from_density(ideal)
            observed = run_density(program, backend) if backend is not None else ideal
            fixed = {}
            if MetricKind.TRACE_DISTANCE in out:
                fixed[MetricKind.TRACE_DISTANCE] = trace_distance(ideal, observed)
            if MetricKind.FIDELITY in out:
                fixed[MetricKind.FIDELITY] = fidelity(ideal, observed)
            per_metric: dict[MetricKind, list[float]] = {m: [] for m in metrics}
            for j in range(r):
                counts = sample_density(
                    observed, backend, shots, task_seed(seed, "calibrate", circuit.name, t.id, bname, j)
                )
                for m in metrics:
                    if m in fixed:
                        d = fixed[m]
                    elif m is MetricKind.HELLINGER:
                        d = hellinger(p_ideal, counts)
                    elif m is MetricKind.JENSEN_SHANNON:
                        d = jensen_shannon(p_ideal, counts)
                    else:
                        d = expectation_diff(z_ideal, expectation_from_counts(counts))
                    per_metric[m].append(d)
            for m in metrics:
                out[m].append(CalibrationSample(pid, per_metric[m]))
    return out


def calibrate_threshold(
    corpus: Sequence[tuple[Circuit, TestSuite]],
    backend: NoiseModel | None,
    metric: MetricKind,
    r: int = DEFAULT_RUNS,
    shots: int = DEFAULT_SHOTS,
    q: float = DEFAULT_PERCENTILE,
    seed: int = 0,
) -> float:
    metric = MetricKind(metric)
    samples = calibration_samples(corpus, backend, [metric], r, shots, seed)[metric]
    return threshold_from_samples(samples, metric.orientation, q)


def derive_middle(t_noiseless: float, t_noise: Sequence[float], orientation: Orientation) -> float:
    """Midpoint between the noiseless threshold and the nearest noise threshold."""
    if not t_noise:
        raise ThresholdError("no noise-specific thresholds")
    nearest = max(t_noise) if Orientation(orientation) is Orientation.SIMILARITY else min(t_noise)
    return (nearest + t_noiseless) / 2


def derive_above(t_noise: Sequence[float], t_middle: float, orientation: Orientation) -> float:
    """Step past the farthest noise threshold by the middle-to-nearest gap."""
    if not t_noise:
        raise ThresholdError("no noise-specific thresholds")
    if Orientation(orientation) is Orientation.SIMILARITY:
        return min(t_noise) - (t_middle - max(t_noise))
    return max(t_noise) + (min(t_noise) - t_middle)


def classify(value: float, threshold: float, orientation: Orientation) -> bool:
    """Detected iff the value is strictly beyond the threshold."""
    if Orientation(orientation) is Orientation.SIMILARITY:
        return value < threshold
    return value > threshold


@dataclass
class MetricThresholds:
    noiseless: float
    noise: dict[str, float] = field(default_factory=dict)
    middle: float | None = None
    above: float | None = None

    def derive(self, orientation: Orientation) -> None:
        vals = list(self.noise.values())
        self.middle = derive_middle(self.noiseless, vals, orientation)
        self.above = derive_above(vals, self.middle, orientation)

    def value(self, strategy: Strategy, backend: str | None = None) -> float:
        strategy = Strategy(strategy)
        if strategy is Strategy.NOISELESS:
            return self.noiseless
        if strategy is Strategy.NOISE:
            if backend is None or backend == NOISELESS:
                return self.noiseless
            if backend not in self.noise:
                raise ThresholdError(f"no noise-specific threshold for backend '{backend}'")
            return self.noise[backend]
        val = self.middle if strategy is Strategy.MIDDLE else self.above
        if val is None:
            raise ThresholdError(f"{strategy.value} threshold has not been derived")
        return val

    def ordered(self, orientation: Orientation) -> bool:
        """Noiseless <= Middle <= min Noise <= max Noise <= Above (mirrored for similarities)."""
        if not self.noise or self.middle is None or self.above is None:
            return True
        chain = [self.noiseless, self.middle, min(self.noise.values()), max(self.noise.values()), self.above]
        if Orientation(orientation) is Orientation.SIMILARITY:
            chain = [self.noiseless, self.middle, max(self.noise.values()), min(self.noise.values()), self.above]
            return all(a >= b for a, b in zip(chain, chain[1:]))
        return all(a <= b for a, b in zip(chain, chain[1:]))


@dataclass
class ThresholdSet:
    thresholds: dict[MetricKind, MetricThresholds]
    meta: dict = field(default_factory=dict)

    def value(self, metric: MetricKind, strategy: Strategy, backend: str | None = None) -> float:
        metric = MetricKind(metric)
        if metric not in self.thresholds:
            raise ThresholdError(f"no thresholds for metric {metric.value}")
        return self.thresholds[metric].value(strategy, backend)

    def to_json(self) -> dict:
        body = {}
        for m in ALL_METRICS:
            if m not in self.thresholds:
                continue
            t = self.thresholds[m]
            body[m.value] = {
                "noiseless": t.noiseless,
                "noise": dict(sorted(t.noise.items())),
                "middle": t.middle,
                "above": t.above,
            }
        return {"meta": self.meta, "thresholds": body}

    @classmethod
    def from_json(cls, obj: Mapping) -> "ThresholdSet":
        th = {}
        for key, t in obj["thresholds"].items():
            th[MetricKind(key)] = MetricThresholds(
                float(t["noiseless"]),
                {k: float(v) for k, v in t.get("noise", {}).items()},
                t.get("middle"),
                t.get("above"),
            )
        return cls(th, dict(obj.get("meta", {})))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ThresholdSet":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def corpus_hash(corpus: Sequence[tuple[Circuit, TestSuite]]) -> str:
    h = hashlib.sha256()
    for circuit, suite in corpus:
        h.update(emit_qasm(circuit).encode())
        for t in suite.inputs:
            h.update(t.id.encode())
            h.update(emit_qasm(t.prep).encode())
    return h.hexdigest()[:16]


def calibrate_all(
    corpus: Sequence[tuple[Circuit, TestSuite]],
    backends: Sequence[NoiseModel],
    metrics: Iterable[MetricKind] = ALL_METRICS,
    r: int = DEFAULT_RUNS,
    shots: int = DEFAULT_SHOTS,
    q: float = DEFAULT_PERCENTILE,
    seed: int = 0,
) -> ThresholdSet:
    """Noiseless and per-backend thresholds for every metric, plus Middle and Above."""
    metrics = [MetricKind(m) for m in metrics]
    shot_metrics = [m for m in metrics if not m.needs_density]
    noiseless = {m: NOISELESS_FIXED[m] for m in metrics if m.needs_density}
    if shot_metrics:
        samples = calibration_samples(corpus, None, shot_metrics, r, shots, seed)
        for m in shot_metrics:
            noiseless[m] = threshold_from_samples(samples[m], m.orientation, q)
    result = {m: MetricThresholds(noiseless[m]) for m in metrics}
    for nm in backends:
        samples = calibration_samples(corpus, nm, metrics, r, shots, seed)
        for m in metrics:
            result[m].noise[nm.name] = threshold_from_samples(samples[m], m.orientation, q)
    if backends:
        for m in metrics:
            result[m].derive(m.orientation)
    meta = {
        "q": q,
        "r": r,
        "shots": shots,
        "seed": seed,
        "corpus_hash": corpus_hash(corpus),
        "similarity_rule": "Q_(1-q)(means) - Q_q(stderr)",
        "backends": [nm.name for nm in backends],
    }
    return ThresholdSet(result, meta)
