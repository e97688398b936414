"""Test-suite construction: basis-state inputs plus entangled U/CNOT inputs."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .circuit import Circuit, GateKind, GateOp, emit_qasm, load_qasm
from .seeding import task_seed
from .sim import DEFAULT_MAX_QUBITS, make_rng

# suites switch from exhaustive to half-sampled classical inputs above this size
SMALL_CIRCUIT_QUBITS = 4


class InputType(enum.Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"


class Regime(enum.Enum):
    EXHAUSTIVE = "exhaustive"
    HALF_SAMPLED = "half_sampled"


@dataclass(frozen=True)
class TestInput:
    __test__ = False  # keep pytest from collecting the Test* names

    id: str
    input_type: InputType
    prep: Circuit


@dataclass(frozen=True)
class TestSuite:
    __test__ = False

    n_qubits: int
    inputs: tuple[TestInput, ...]
    seed: int = 0

    def __post_init__(self):
        ids = [t.id for t in self.inputs]
        if len(set(ids)) != len(ids):
            raise ValueError("test input ids must be unique")
        for t in self.inputs:
            if t.prep.n_qubits != self.n_qubits:
                raise ValueError(f"input {t.id} has {t.prep.n_qubits} qubits, expected {self.n_qubits}")
            if t.prep.measured:
                raise ValueError(f"input {t.id} must not measure")
            if t.input_type is InputType.CLASSICAL and any(op.kind is not GateKind.X for op in t.prep.ops):
                raise ValueError(f"classical input {t.id} may only contain x gates")

    def __len__(self) -> int:
        return len(self.inputs)

    def __iter__(self):
        return iter(self.inputs)


def basis_prep(n: int, index: int) -> Circuit:
    """x on every set bit of ``index`` (qubit 0 = least significant bit)."""
    ops = [GateOp(GateKind.X, (q,)) for q in range(n) if (index >> q) & 1]
    return Circuit(n, tuple(ops), name=f"basis_{index:0{n}b}")


def _check_n(n: int, cap: int) -> None:
    if not 1 <= n <= cap:
        raise ValueError(f"qubit count {n} outside [1, {cap}]")


def classical_indices(n: int, regime: Regime, seed: int, cap: int = DEFAULT_MAX_QUBITS) -> list[int]:
    _check_n(n, cap)
    if Regime(regime) is Regime.EXHAUSTIVE:
        return list(range(2**n))
    rng = make_rng(seed)
    return sorted(int(k) for k in rng.choice(2**n, size=2 ** (n - 1), replace=False))


def gen_classical(n: int, regime: Regime, seed: int, cap: int = DEFAULT_MAX_QUBITS) -> list[Circuit]:
    return [basis_prep(n, k) for k in classical_indices(n, regime, seed, cap)]


def gen_quantum(n: int, count: int, seed: int) -> list[Circuit]:
    """One layer of random ``u`` gates followed by a CNOT chain, per input."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = make_rng(seed)
    preps = []
    for i in range(count):
        angles = rng.uniform(0.0, 2 * math.pi, size=(n, 3))
        ops = [GateOp(GateKind.U, (q,), tuple(angles[q])) for q in range(n)]
        ops += [GateOp(GateKind.CX, (q, q + 1)) for q in range(n - 1)]
        preps.append(Circuit(n, tuple(ops), name=f"ucnot_{i}"))
    return preps


def build_suite(n: int, seed: int, cap: int = DEFAULT_MAX_QUBITS) -> TestSuite:
    """Classical inputs complemented by the same number of quantum inputs.

    Up to four qubits every basis state is used; above that half of them are
    sampled.
    """
    _check_n(n, cap)
    regime = Regime.EXHAUSTIVE if n <= SMALL_CIRCUIT_QUBITS else Regime.HALF_SAMPLED
    idx = classical_indices(n, regime, task_seed(seed, "classical", n), cap)
    inputs = []
    for k in idx:
        tid = f"c{k:0{n}b}"
        prep = basis_prep(n, k)
        inputs.append(TestInput(tid, InputType.CLASSICAL, prep.with_ops(prep.ops, name=tid)))
    quantum = gen_quantum(n, len(idx), task_seed(seed, "quantum", n))
    for i, prep in enumerate(quantum):
        tid = f"u{i:03d}"
        inputs.append(TestInput(tid, InputType.QUANTUM, prep.with_ops(prep.ops, name=tid)))
    return TestSuite(n, tuple(inputs), seed)


def save_suite(suite: TestSuite, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for t in suite.inputs:
        fname = f"{t.id}.qasm"
        (directory / fname).write_text(emit_qasm(t.prep), encoding="utf-8")
        manifest.append({"id": t.id, "type": t.input_type.value, "file": fname, "seed": suite.seed})
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_suite(directory) -> TestSuite:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    inputs = []
    for entry in manifest:
        prep = load_qasm(directory / entry["file"])
        inputs.append(TestInput(entry["id"], InputType(entry["type"]), prep))
    if not inputs:
        raise ValueError(f"empty suite in {directory}")
    seed = manifest[0].get("seed", 0)
    return TestSuite(inputs[0].prep.n_qubits, tuple(inputs), seed)
