"""Mutant generation, reversibility-based equivalents, equivalence oracle, sampling."""

from __future__ import annotations

import enum
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .circuit import UNITARY_KINDS, Circuit, GateKind, GateOp, compose, emit_qasm, load_qasm
from .inputs import TestSuite
from .metrics import fidelity, trace_distance
from .sim import make_rng, run_density

DEFAULT_EQUIVALENCE_TOL = 1e-10


class Operator(enum.Enum):
    ADD = "add"
    REMOVE = "remove"
    REPLACE = "replace"


class Segment(enum.Enum):
    BEGINNING = "beginning"
    PRE_MIDDLE = "pre_middle"
    MIDDLE = "middle"
    POST_MIDDLE = "post_middle"
    END = "end"

    @property
    def ordinal(self) -> int:
        return _SEGMENTS.index(self) + 1

    @classmethod
    def of(cls, position: int, n_gates: int) -> "Segment":
        """Quintile of ``position`` within a gate list of length ``n_gates``."""
        if n_gates <= 0:
            return cls.BEGINNING
        return _SEGMENTS[min(4, (5 * position) // n_gates)]


_SEGMENTS = list(Segment)


class GateType(enum.Enum):
    SINGLE_QUBIT = "single"
    MULTI_QUBIT = "multi"

    @classmethod
    def of(cls, kind: GateKind) -> "GateType":
        return cls.SINGLE_QUBIT if kind.arity == 1 else cls.MULTI_QUBIT


class Label(enum.Enum):
    EQUIVALENT = "equivalent"
    NON_EQUIVALENT = "non_equivalent"
    UNLABELED = "unlabeled"


# the identity gate is left out: adding or swapping in ``id`` is trivially equivalent
MUTATION_KINDS: tuple[GateKind, ...] = tuple(k for k in UNITARY_KINDS if k is not GateKind.ID)

# G -> m with G^m = I
SELF_CANCELLING: dict[GateKind, int] = {
    GateKind.X: 2,
    GateKind.Y: 2,
    GateKind.Z: 2,
    GateKind.H: 2,
    GateKind.CX: 2,
    GateKind.CZ: 2,
    GateKind.SWAP: 2,
    GateKind.S: 4,
    GateKind.SDG: 4,
    GateKind.T: 8,
    GateKind.TDG: 8,
}


@dataclass(frozen=True)
class Mutation:
    operator: Operator
    position: int
    gate_kind: GateKind
    segment: Segment
    new_gate: GateOp | None = None
    copies: int = 1

    def __post_init__(self):
        if (self.operator is Operator.REMOVE) != (self.new_gate is None):
            raise ValueError("Remove carries no new gate; Add and Replace carry exactly one")

    @property
    def gate_type(self) -> GateType:
        return GateType.of(self.gate_kind)


@dataclass
class Mutant:
    id: str
    cut_name: str
    circuit: Circuit
    mutation: Mutation
    label: Label = Label.UNLABELED

    def manifest(self) -> dict:
        m = self.mutation
        return {
            "id": self.id,
            "cut": self.cut_name,
            "operator": m.operator.value,
            "position": m.position,
            "segment": m.segment.value,
            "gate_kind": m.gate_kind.qasm_name,
            "gate_type": m.gate_type.value,
            "label": self.label.value,
            "new_gate": None
            if m.new_gate is None
            else {"kind": m.new_gate.name, "qubits": list(m.new_gate.qubits), "params": list(m.new_gate.params)},
            "copies": m.copies,
        }


def _op_index(c: Circuit, gate_pos: int) -> int:
    """Index into ``c.ops`` of the ``gate_pos``-th unitary gate (barriers skipped)."""
    seen = 0
    for i, op in enumerate(c.ops):
        if op.kind.is_pseudo:
            continue
        if seen == gate_pos:
            return i
        seen += 1
    return len(c.ops)


def _random_params(kind: GateKind, rng) -> tuple[float, ...]:
    return tuple(float(x) for x in rng.uniform(0.0, 2 * math.pi, size=kind.n_params))


def enumerate_mutants(
    cut: Circuit,
    operators: Iterable[Operator] = tuple(Operator),
    seed: int = 0,
    kinds: Sequence[GateKind] | None = None,
) -> list[Mutant]:
    """First-order mutants at every gate position.

    Per position: one Remove, one Replace for each other kind with the same
    arity and parameter count (parameters copied), and one Add per kind of the
    same arity inserted before the position on the same qubits (rotation
    angles drawn uniformly from [0, 2pi)).
    """
    gates = cut.gates
    if not gates:
        raise ValueError(f"{cut.name}: cannot mutate an empty circuit")
    ops_set = {Operator(o) for o in operators}
    pool = tuple(kinds) if kinds is not None else MUTATION_KINDS
    rng = make_rng(seed)
    n = len(gates)
    out: list[Mutant] = []

    def emit(op: Operator, pos: int, kind: GateKind, new_gate, new_ops):
        mid = f"{cut.name}-{op.value}-{pos:03d}-{kind.qasm_name}"
        mutation = Mutation(op, pos, kind, Segment.of(pos, n), new_gate)
        out.append(Mutant(mid, cut.name, cut.with_ops(new_ops, name=mid), mutation))

    for pos, gate in enumerate(gates):
        i = _op_index(cut, pos)
        before, after = cut.ops[:i], cut.ops[i + 1 :]
        if Operator.REMOVE in ops_set:
            emit(Operator.REMOVE, pos, gate.kind, None, before + after)
        if Operator.REPLACE in ops_set:
            for kind in pool:
                if kind is gate.kind or kind.arity != gate.kind.arity or kind.n_params != gate.kind.n_params:
                    continue
                new = GateOp(kind, gate.qubits, gate.params)
                emit(Operator.REPLACE, pos, kind, new, before + (new,) + after)
        if Operator.ADD in ops_set:
            for kind in pool:
                if kind.arity != gate.kind.arity:
                    continue
                new = GateOp(kind, gate.qubits, _random_params(kind, rng))
                emit(Operator.ADD, pos, kind, new, before + (new, gate) + after)
    return out


def gen_equivalent(
    cut: Circuit, count: int, seed: int, kinds: Sequence[GateKind] | None = None
) -> list[Mutant]:
    """Equivalent mutants made by inserting ``m`` adjacent copies of a gate with G^m = I."""
    if count < 1:
        raise ValueError("count must be positive")
    candidates = [
        k for k in (kinds or SELF_CANCELLING) if k in SELF_CANCELLING and k.arity <= cut.n_qubits
    ]
    if not candidates:
        raise ValueError("no self-cancelling gate fits this circuit")
    rng = make_rng(seed)
    n = len(cut.gates)
    out: list[Mutant] = []
    seen: set[tuple] = set()
    attempts = 0
    while len(out) < count and attempts < 50 * count:
        attempts += 1
        kind = candidates[int(rng.integers(len(candidates)))]
        qubits = tuple(int(q) for q in rng.choice(cut.n_qubits, size=kind.arity, replace=False))
        pos = int(rng.integers(n + 1))
        key = (kind, qubits, pos)
        if key in seen:
            continue
        seen.add(key)
        gate = GateOp(kind, qubits)
        copies = SELF_CANCELLING[kind]
        i = _op_index(cut, pos)
        new_ops = cut.ops[:i] + (gate,) * copies + cut.ops[i:]
        mid = f"{cut.name}-eq-{len(out):04d}"
        mutation = Mutation(Operator.ADD, pos, kind, Segment.of(pos, n), gate, copies)
        out.append(Mutant(mid, cut.name, cut.with_ops(new_ops, name=mid), mutation, Label.EQUIVALENT))
    return out


def is_equivalent(
    cut: Circuit, m: Mutant, suite: TestSuite, tol: float = DEFAULT_EQUIVALENCE_TOL
) -> bool:
    """Noiseless density-matrix oracle over the suite inputs; sets ``m.label``."""
    if not suite.inputs:
        raise ValueError("empty test suite")
    if suite.n_qubits != cut.n_qubits or m.circuit.n_qubits != cut.n_qubits:
        raise ValueError("suite, CUT and mutant must have the same qubit count")
    result = True
    for t in suite.inputs:
        a = run_density(compose(t.prep, cut))
        b = run_density(compose(t.prep, m.circuit))
        if trace_distance(a, b) >= tol or 1.0 - fidelity(a, b) >= tol:
            result = False
            break
    m.label = Label.EQUIVALENT if result else Label.NON_EQUIVALENT
    return result


def _gate_kind_of(m: Mutant) -> GateKind:
    return m.mutation.gate_kind


def sample_balanced(pool: Sequence[Mutant], quota: int, seed: int) -> list[Mutant]:
    """Stratified selection balancing operators and spreading positions.

    Operators are served round-robin (fewest picked first), so per-operator
    counts differ by at most one while every operator still has mutants left.
    Inside an operator, segments are visited cyclically and a mutant whose
    gate kind is not yet represented is preferred. The result is ordered by id.
    """
    if quota > len(pool):
        raise ValueError(f"quota {quota} exceeds pool size {len(pool)}")
    if quota < 0:
        raise ValueError("quota must be non-negative")
    if quota == len(pool):
        return sorted(pool, key=lambda m: m.id)
    rng = make_rng(seed)

    cells: dict[Operator, dict[Segment, list[Mutant]]] = defaultdict(lambda: defaultdict(list))
    for m in sorted(pool, key=lambda m: m.id):
        cells[m.mutation.operator][m.mutation.segment].append(m)
    op_order = [o for o in Operator if o in cells]
    op_order = [op_order[i] for i in rng.permutation(len(op_order))]
    queues: dict[Operator, list[list[Mutant]]] = {}
    for o in op_order:
        segs = []
        for seg in Segment:
            items = cells[o].get(seg, [])
            if items:
                segs.append([items[i] for i in rng.permutation(len(items))])
        queues[o] = segs
    pointer = {o: 0 for o in op_order}
    picked_per_op = {o: 0 for o in op_order}
    covered: set[GateKind] = set()
    chosen: list[Mutant] = []

    def take(o: Operator) -> Mutant:
        segs = queues[o]
        k = len(segs)
        order = [(pointer[o] + i) % k for i in range(k) if segs[(pointer[o] + i) % k]]
        for si in order:
            for j, m in enumerate(segs[si]):
                if _gate_kind_of(m) not in covered:
                    pointer[o] = si + 1
                    return segs[si].pop(j)
        pointer[o] = order[0] + 1
        return segs[order[0]].pop(0)

    while len(chosen) < quota:
        live = [o for o in op_order if any(queues[o])]
        o = min(live, key=lambda x: (picked_per_op[x], op_order.index(x)))
        m = take(o)
        picked_per_op[o] += 1
        covered.add(_gate_kind_of(m))
        chosen.append(m)
    return sorted(chosen, key=lambda m: m.id)


def save_mutants(mutants: Sequence[Mutant], directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = []
    for m in mutants:
        (directory / f"{m.id}.qasm").write_text(emit_qasm(m.circuit), encoding="utf-8")
        manifest.append(m.manifest())
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_mutants(directory) -> list[Mutant]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    out = []
    for e in manifest:
        circ = load_qasm(directory / f"{e['id']}.qasm")
        g = e.get("new_gate")
        new_gate = None if g is None else GateOp(GateKind.from_name(g["kind"]), g["qubits"], g["params"])
        mutation = Mutation(
            Operator(e["operator"]),
            e["position"],
            GateKind.from_name(e["gate_kind"]),
            Segment(e["segment"]),
            new_gate,
            e.get("copies", 1),
        )
        out.append(Mutant(e["id"], e["cut"], circ, mutation, Label(e["label"])))
    return out
