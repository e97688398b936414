"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured quantity
next to its tolerance, then asserts. Run with ``pytest tests/test_acceptance.py -v``.
"""

import collections
import math
import time

import numpy as np
import pytest

from oracles import brute_cliffs, brute_midranks, brute_u, companion_eigenvalues, holm_by_hand
from qnoisemut.analysis import cliffs_delta, holm_correct, mann_whitney_cliffs, midranks, variance_ratio
from qnoisemut.cli import main
from qnoisemut.metrics import (
    MetricKind,
    Orientation,
    expectation_diff,
    fidelity,
    hellinger,
    hermitian_eigenvalues,
    jensen_shannon,
    trace_distance,
)
from qnoisemut.pipeline import ExperimentConfig, bundled_noise_dir, load_corpus, read_csv, run_all
from qnoisemut.sim import DensityMatrix, OutputDistribution, run_density, sample_density
from qnoisemut.thresholds import Strategy, derive_above, derive_middle

DEPOL = bundled_noise_dir() / "depolarizing.json"


@pytest.fixture
def verdict(capsys):
    """Print one criterion line outside pytest's capture, then assert."""

    def _emit(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
        assert ok, detail

    return _emit


def _rate(rows, predicate):
    hits = sum(1 for r in rows if predicate(r))
    return hits / len(rows) if rows else float("nan")


# ---------------------------------------------------------------------------
# 1. published threshold arithmetic
# ---------------------------------------------------------------------------

# metric: (noiseless, three noise-specific, published middle, published above)
PUBLISHED = {
    MetricKind.TRACE_DISTANCE: (1e-13, (0.08959, 0.07080, 0.14328), 0.03540, 0.17868),
    MetricKind.FIDELITY: (1 - 1e-14, (0.80481, 0.82417, 0.66146), 0.91208, 0.57354),
    MetricKind.EXPECTATION_DIFF: (0.01428, (0.17837, 0.27261, 0.25560), 0.09633, 0.35465),
    MetricKind.HELLINGER: (0.06561, (0.32652, 0.36616, 0.42757), 0.19607, 0.55802),
    MetricKind.JENSEN_SHANNON: (0.06045, (0.27611, 0.30977, 0.36368), 0.16828, 0.47151),
}


def test_criterion_1_threshold_arithmetic(verdict):
    t0 = time.perf_counter()
    checks = []
    for metric, (t_nl, t_noise, mid_pub, above_pub) in PUBLISHED.items():
        o = metric.orientation
        mid = derive_middle(t_nl, t_noise, o)
        above = derive_above(t_noise, mid, o)
        checks.append((f"{metric.value} middle", abs(mid - mid_pub)))
        checks.append((f"{metric.value} above", abs(above - above_pub)))
        # the published columns must themselves satisfy the equal-gap rule
        near, far = (min(t_noise), max(t_noise)) if o is Orientation.DISSIMILARITY else (max(t_noise), min(t_noise))
        checks.append((f"{metric.value} gap", abs(abs(above_pub - far) - abs(near - mid_pub))))
    worst_name, worst = max(checks, key=lambda c: c[1])
    elapsed = time.perf_counter() - t0
    ok = len(checks) == 15 and worst <= 2e-5 and elapsed < 1.0
    verdict(1, "threshold arithmetic", ok, f"15 checks, worst {worst_name} off by {worst:.2e} <= 2e-5, {elapsed:.3f} s")


# ---------------------------------------------------------------------------
# 2. metric oracles
# ---------------------------------------------------------------------------


def _js_closed_form(p, q):
    m = [(a + b) / 2 for a, b in zip(p, q)]
    kl = lambda x: sum(a * math.log2(a / c) for a, c in zip(x, m) if a > 0)  # noqa: E731
    return math.sqrt((kl(p) + kl(q)) / 2)


def test_criterion_2_metric_oracles(verdict):
    t0 = time.perf_counter()
    zero = DensityMatrix.from_statevector([1, 0])
    one = DensityMatrix.from_statevector([0, 1])
    plus = DensityMatrix.from_statevector([1, 1])
    dist = lambda d: OutputDistribution(len(next(iter(d))), {k: v * 1000 for k, v in d.items()}, 1000)  # noqa: E731
    p_same = dist({"00": 0.25, "01": 0.25, "11": 0.5})
    trivial = [
        trace_distance(plus, plus) - 0.0,
        trace_distance(zero, one) - 1.0,
        fidelity(plus, plus) - 1.0,
        fidelity(zero, one) - 0.0,
        hellinger(p_same, p_same) - 0.0,
        hellinger(dist({"0": 1.0}), dist({"1": 1.0})) - 1.0,
        jensen_shannon(p_same, p_same) - 0.0,
        jensen_shannon(dist({"0": 1.0}), dist({"1": 1.0})) - 1.0,
        expectation_diff(0.3, 0.3) - 0.0,
        expectation_diff(1.0, -1.0) - 2.0,
        expectation_diff(1.0, 0.0) - 1.0,
    ]
    derived = [
        trace_distance(zero, plus) - 1 / math.sqrt(2),
        fidelity(zero, plus) - 0.5,
        hellinger(dist({"00": 0.5, "11": 0.5}), dist({"00": 1.0})) - math.sqrt(1 - 1 / math.sqrt(2)),
        jensen_shannon(dist({"0": 0.5, "1": 0.5}), dist({"0": 0.75, "1": 0.25}))
        - _js_closed_form([0.5, 0.5], [0.75, 0.25]),
        max(abs(np.array(hermitian_eigenvalues(np.diag([1.0, 2.0, 3.0]))) - [1, 2, 3])),
        max(abs(np.array(hermitian_eigenvalues(np.array([[0, 1], [1, 0]], dtype=complex))) - [-1, 1])),
    ]
    rng = np.random.default_rng(2024)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    h = (a + a.conj().T) / 2
    derived.append(max(abs(np.array(hermitian_eigenvalues(h)) - companion_eigenvalues(h))))
    derived.append(trace_distance(zero, plus, method="jacobi") - 1 / math.sqrt(2))
    pure_gap = 0.0
    for _ in range(200):
        states = []
        for _ in range(2):
            n = int(rng.integers(1, 4))
            states.append(rng.normal(size=2**n) + 1j * rng.normal(size=2**n))
        n = min(int(math.log2(len(s))) for s in states)
        s, t = (DensityMatrix.from_statevector(v[: 2**n]) for v in states)
        pure_gap = max(pure_gap, abs(trace_distance(s, t) - math.sqrt(max(0.0, 1 - fidelity(s, t)))))
    worst_trivial = max(abs(x) for x in trivial)
    worst_derived = max(abs(x) for x in derived)
    elapsed = time.perf_counter() - t0
    ok = worst_trivial < 1e-12 and worst_derived < 1e-9 and pure_gap < 1e-8 and elapsed < 10
    verdict(
        2,
        "metric oracles",
        ok,
        f"trivial {worst_trivial:.1e} < 1e-12, closed-form {worst_derived:.1e} < 1e-9, "
        f"pure-state link {pure_gap:.1e} < 1e-8 over 200 pairs, {elapsed:.2f} s",
    )


# ---------------------------------------------------------------------------
# 3. noiseless equivalents
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_3_noiseless_equivalents(tmp_path, verdict):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(
        out_dir=tmp_path / "c3", mutant_quota=0, equivalents=50, shots=1000, runs=5, noise_models=(), master_seed=0
    )
    run_all(cfg, strategies=(Strategy.NOISELESS,))
    elapsed = time.perf_counter() - t0
    rows = read_csv(cfg.out_dir / "detections" / "noiseless.csv")
    by_metric = collections.defaultdict(list)
    for r in rows:
        by_metric[r["metric"]].append(r)
    n_eq = len({r["mutant_id"] for r in rows})
    density_fp = sum(r["detected"] == "1" for m in ("trace_distance", "fidelity") for r in by_metric[m])
    shot_fp = {m: _rate(by_metric[m], lambda r: r["detected"] == "1") for m in ("hellinger", "jensen_shannon", "expectation_diff")}
    ok = n_eq >= 200 and density_fp == 0 and max(shot_fp.values()) <= 0.15 and elapsed < 300
    shots = ", ".join(f"{m} {v:.1%}" for m, v in shot_fp.items())
    verdict(
        3,
        "noiseless zero-FP",
        ok,
        f"{n_eq} equivalents, density-metric FP {density_fp} (need 0), shot-metric FP {shots} (need <= 15%), {elapsed:.0f} s",
    )


# ---------------------------------------------------------------------------
# 4, 5, 8. one depolarizing run shared by three criteria
# ---------------------------------------------------------------------------


def _depol_config(out):
    return ExperimentConfig(
        out_dir=out, mutant_quota=10, equivalents=10, shots=1000, runs=5, noise_models=(DEPOL,), master_seed=7
    )


@pytest.fixture(scope="module")
def depol_run(tmp_path_factory):
    cfg = _depol_config(tmp_path_factory.mktemp("depol") / "run")
    t0 = time.perf_counter()
    paths = run_all(cfg)
    return cfg, paths, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_4_noise_threshold_benefit(depol_run, verdict):
    cfg, _, elapsed = depol_run
    nl = read_csv(cfg.out_dir / "detections" / "noiseless.csv")
    nz = read_csv(cfg.out_dir / "detections" / "noise.csv")
    wrong = lambda r: (r["detected"] == "1") != (r["mutant_label"] == "non_equivalent")  # noqa: E731
    parts, ok = [], elapsed < 600
    for metric in ("trace_distance", "fidelity"):
        sel = lambda rows: [r for r in rows if r["metric"] == metric and r["backend"] == "depolarizing"]  # noqa: E731
        before, after = _rate(sel(nl), wrong), _rate(sel(nz), wrong)
        ok = ok and before - after >= 0.10
        parts.append(f"{metric} {before:.1%} -> {after:.1%}")
    verdict(4, "noise threshold lowers misclassification", ok, f"{'; '.join(parts)}; need >= 10 pp drop, {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_5_variance_direction(depol_run, verdict):
    cfg, paths, _ = depol_run
    rows = [r for r in read_csv(paths["distances"]) if r["metric"] == "trace_distance" and r["mutant_label"] == "equivalent"]
    noisy = [float(r["value"]) for r in rows if r["backend"] == "depolarizing"]
    clean = [float(r["value"]) for r in rows if r["backend"] == "noiseless"]
    res = variance_ratio(noisy, clean)
    ok = res.effect_size > 10 and res.p_value < 0.05
    verdict(5, "equivalent-mutant variance ratio", ok, f"VR {res.effect_size:.3g} > 10, Fligner-Killeen p {res.p_value:.3g} < 0.05")


@pytest.mark.slow
def test_criterion_8_determinism(depol_run, tmp_path, verdict):
    cfg, paths, _ = depol_run
    again = run_all(_depol_config(tmp_path / "again"))
    same = {k: paths[k].read_bytes() == again[k].read_bytes() for k in ("distances", "report")}
    verdict(8, "byte-identical reruns", all(same.values()), ", ".join(f"{k} {'identical' if v else 'differs'}" for k, v in same.items()))


# ---------------------------------------------------------------------------
# 6. sampling fidelity
# ---------------------------------------------------------------------------


def test_criterion_6_sampling_fidelity(verdict):
    worst_pass, parts = 30, []
    for entry in load_corpus():
        rho = run_density(entry.circuit)
        exact = OutputDistribution.exact(rho.probabilities(), 10_000)
        hs = [hellinger(sample_density(rho, None, 10_000, seed), exact) for seed in range(30)]
        passed = sum(h < 0.03 for h in hs)
        worst_pass = min(worst_pass, passed)
        parts.append(f"{entry.circuit.name} {passed}/30 max {max(hs):.4f}")
    verdict(6, "10k-shot sampling fidelity", worst_pass >= 29, f"{'; '.join(parts)}; need 29/30 below 0.03")


# ---------------------------------------------------------------------------
# 7. statistics oracles
# ---------------------------------------------------------------------------

HOLM_VECTORS = [
    ([0.01, 0.04, 0.03], [0.03, 0.06, 0.06]),
    ([0.5], [0.5]),
    ([0.2, 0.2], [0.4, 0.4]),
    ([0.001, 0.01, 0.02, 0.04], [0.004, 0.03, 0.04, 0.04]),
    ([0.04, 0.001], [0.04, 0.002]),
    ([0.3, 0.6, 0.9], [0.9, 1.0, 1.0]),
    ([0.0, 0.05, 0.01], [0.0, 0.05, 0.02]),
    ([0.02, 0.02, 0.02, 0.02, 0.02], [0.1, 0.1, 0.1, 0.1, 0.1]),
    ([0.1, 0.001, 0.05, 0.002], [0.1, 0.004, 0.1, 0.006]),
    ([1.0, 0.25, 0.125, 0.5], [1.0, 0.75, 0.5, 1.0]),
]


def test_criterion_7_statistics_oracles(verdict):
    rng = np.random.default_rng(77)
    delta_bad = 0
    for _ in range(50):
        a, b = rng.integers(0, 12, 20), rng.integers(0, 12, 20)
        delta_bad += cliffs_delta(a, b) != brute_cliffs(a.tolist(), b.tolist())
    u_bad = 0
    for n1 in range(1, 21):
        n2 = int(rng.integers(1, 21))
        a, b = rng.integers(0, 8, n1).astype(float), rng.integers(0, 8, n2).astype(float)
        pooled = np.concatenate([a, b])
        u_bad += mann_whitney_cliffs(a, b).statistic != brute_u(a.tolist(), b.tolist())
        u_bad += list(midranks(pooled)) != brute_midranks(pooled.tolist())
    holm_bad = 0
    for p, expected in HOLM_VECTORS:
        got = holm_correct(p)
        holm_bad += got != holm_by_hand(p)
        holm_bad += max(abs(g - e) for g, e in zip(got, expected)) > 1e-15
    ok = delta_bad == 0 and u_bad == 0 and holm_bad == 0
    verdict(
        7,
        "statistics oracles",
        ok,
        f"Cliff's delta mismatches {delta_bad}/50, U/rank mismatches {u_bad}/40, Holm mismatches {holm_bad}/20",
    )


# ---------------------------------------------------------------------------
# 9. desk-scale budget
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_9_demo_budget(tmp_path, verdict):
    t0 = time.perf_counter()
    code = main(["--out", str(tmp_path / "demo"), "demo"])
    elapsed = time.perf_counter() - t0
    n_mutants = len({r["mutant_id"] for r in read_csv(tmp_path / "demo" / "distances.csv")})
    ok = code == 0 and elapsed < 600 and n_mutants >= 60
    verdict(9, "demo budget", ok, f"exit {code}, {n_mutants} mutants, noiseless + 2 noise models, {elapsed:.0f} s < 600 s")
