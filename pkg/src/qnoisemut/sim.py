"""Density-matrix execution with parametric Kraus noise and shot sampling."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, GateKind, GateOp, decompose_ccx
from .circuit import gate_matrix as _gate_matrix

DEFAULT_MAX_QUBITS = 12
DENSITY_MAGIC = b"QNMDENS1"
RNG_ALGORITHM = "numpy.random.Philox (4x64-10)"


class SimulationError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every stochastic step."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


# ---------------------------------------------------------------------------
# states and distributions
# ---------------------------------------------------------------------------


@dataclass
class DensityMatrix:
    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        dim = 2 ** self.n_qubits
        if self.data.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {self.data.shape}")

    @classmethod
    def zero(cls, n_qubits: int) -> "DensityMatrix":
        data = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
        data[0, 0] = 1.0
        return cls(n_qubits, data)

    @classmethod
    def from_statevector(cls, psi: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        n = int(round(math.log2(psi.size)))
        if 2**n != psi.size:
            raise ValueError("statevector length must be a power of two")
        psi = psi / np.linalg.norm(psi)
        return cls(n, np.outer(psi, psi.conj()))

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def probabilities(self) -> np.ndarray:
        p = np.clip(np.diagonal(self.data).real, 0.0, None)
        return p / p.sum()

    def check(self, atol: float = 1e-10, eig_atol: float = 1e-9) -> None:
        """Raise ``ValueError`` unless Hermitian, unit-trace and PSD within tolerance."""
        if np.max(np.abs(self.data - self.data.conj().T)) > atol:
            raise ValueError("density matrix is not Hermitian")
        if abs(self.trace - 1.0) > atol:
            raise ValueError(f"density matrix trace is {self.trace}")
        if np.linalg.eigvalsh(self.data).min() < -eig_atol:
            raise ValueError("density matrix is not positive semidefinite")

    def to_bytes(self) -> bytes:
        flat = np.ascontiguousarray(self.data, dtype="<c16")
        return DENSITY_MAGIC + struct.pack("<I", self.n_qubits) + flat.tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "DensityMatrix":
        if raw[:8] != DENSITY_MAGIC:
            raise ValueError("not a density-matrix file")
        (n,) = struct.unpack("<I", raw[8:12])
        dim = 2**n
        data = np.frombuffer(raw[12:], dtype="<c16")
        if data.size != dim * dim:
            raise ValueError("truncated density-matrix file")
        return cls(n, data.reshape(dim, dim).astype(complex))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DensityMatrix":
        return cls.from_bytes(Path(path).read_bytes())


def bitstring(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b")


@dataclass
class OutputDistribution:
    """Outcome counts keyed by bitstring (qubit 0 rightmost).

    Sampled distributions carry integer counts. Exact (theoretical)
    distributions carry real-valued counts ``p * shots``.
    """

    n_qubits: int
    counts: dict[str, float]
    shots: int

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be positive")
        for key, v in self.counts.items():
            if len(key) != self.n_qubits or set(key) - {"0", "1"}:
                raise ValueError(f"bad outcome key {key!r} for {self.n_qubits} qubits")
            if v < 0:
                raise ValueError("negative count")
        total = sum(self.counts.values())
        if not math.isclose(total, self.shots, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"counts sum to {total}, expected {self.shots}")

    @classmethod
    def exact(cls, probs: np.ndarray, shots: int) -> "OutputDistribution":
        probs = np.asarray(probs, dtype=float)
        n = int(round(math.log2(probs.size)))
        probs = probs / probs.sum()
        counts = {bitstring(i, n): float(p) * shots for i, p in enumerate(probs) if p > 0}
        return cls(n, counts, shots)

    @classmethod
    def from_vector(cls, counts: np.ndarray, n_qubits: int) -> "OutputDistribution":
        counts = np.asarray(counts)
        return cls(
            n_qubits,
            {bitstring(i, n_qubits): int(c) for i, c in enumerate(counts) if c > 0},
            int(counts.sum()),
        )

    def probabilities(self) -> dict[str, float]:
        total = sum(self.counts.values())
        return {k: v / total for k, v in self.counts.items()}

    def vector(self) -> np.ndarray:
        out = np.zeros(2**self.n_qubits)
        for k, v in self.counts.items():
            out[int(k, 2)] = v
        return out / out.sum()

    def to_json(self) -> dict:
        return {"n_qubits": self.n_qubits, "shots": self.shots, "counts": dict(sorted(self.counts.items()))}


# ---------------------------------------------------------------------------
# noise channels
# ---------------------------------------------------------------------------

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def depolarizing_kraus(p: float, n_qubits: int = 1) -> list[np.ndarray]:
    """Kraus set of rho -> (1 - p) rho + p I/d on ``n_qubits`` qubits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    d2 = 4**n_qubits
    paulis = [np.eye(1, dtype=complex)]
    for _ in range(n_qubits):
        paulis = [np.kron(a, b) for a in paulis for b in _PAULI]
    ops = [math.sqrt(1 - p * (d2 - 1) / d2) * paulis[0]]
    ops += [math.sqrt(p / d2) * P for P in paulis[1:]]
    return ops


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("damping parameter must lie in [0, 1]")
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def phase_damping_kraus(lam: float) -> list[np.ndarray]:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("damping parameter must lie in [0, 1]")
    return [
        np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex),
        np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex),
    ]


def kraus_completeness_error(kraus: Sequence[np.ndarray]) -> float:
    total = sum(k.conj().T @ k for k in kraus)
    return float(np.max(np.abs(total - np.eye(total.shape[0]))))


@dataclass(frozen=True)
class NoiseModel:
    """Parametric noise: per-gate channels plus readout confusion.

    ``readout`` is either one 2x2 row-stochastic matrix applied to every
    qubit or a list with one matrix per qubit. Row ``b`` holds
    ``P(read 0 | b), P(read 1 | b)``.
    """

    name: str
    oneq_depolarizing: float = 0.0
    twoq_depolarizing: float = 0.0
    amplitude_damping: float = 0.0
    phase_damping: float = 0.0
    readout: tuple | None = None

    def __post_init__(self):
        for attr in ("oneq_depolarizing", "twoq_depolarizing", "amplitude_damping", "phase_damping"):
            v = getattr(self, attr)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{attr} must lie in [0, 1], got {v}")
        if self.readout is not None:
            ro = np.asarray(self.readout, dtype=float)
            if ro.shape == (2, 2):
                ro = ro[None]
            if ro.ndim != 3 or ro.shape[1:] != (2, 2):
                raise ValueError("readout must be a 2x2 matrix or a list of them")
            if np.any(ro < 0) or np.any(np.abs(ro.sum(axis=2) - 1.0) > 1e-12):
                raise ValueError("readout rows must be probability vectors")
            object.__setattr__(
                self, "readout", tuple(tuple(tuple(float(x) for x in row) for row in m) for m in ro)
            )

    def readout_matrix(self, qubit: int) -> np.ndarray | None:
        if self.readout is None:
            return None
        ro = np.asarray(self.readout, dtype=float)
        if len(ro) == 1:
            return ro[0]
        if qubit >= len(ro):
            raise SimulationError(f"noise model '{self.name}' has no readout entry for qubit {qubit}")
        return ro[qubit]

    def oneq_channels(self) -> list[list[np.ndarray]]:
        return _oneq_channels(self.oneq_depolarizing, self.amplitude_damping, self.phase_damping)

    def twoq_channels(self) -> list[list[np.ndarray]]:
        if self.twoq_depolarizing > 0:
            return [_depol(self.twoq_depolarizing, 2)]
        return []

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "oneq_depolarizing": self.oneq_depolarizing,
            "twoq_depolarizing": self.twoq_depolarizing,
            "amplitude_damping": self.amplitude_damping,
            "phase_damping": self.phase_damping,
        }
        if self.readout is not None:
            ro = [list(map(list, m)) for m in self.readout]
            out["readout"] = ro[0] if len(ro) == 1 else ro
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "NoiseModel":
        unknown = set(obj) - {"name", "oneq_depolarizing", "twoq_depolarizing",
                              "amplitude_damping", "phase_damping", "readout"}
        if unknown:
            raise ValueError(f"unknown noise-model fields: {sorted(unknown)}")
        return cls(
            name=str(obj["name"]),
            oneq_depolarizing=float(obj.get("oneq_depolarizing", 0.0)),
            twoq_depolarizing=float(obj.get("twoq_depolarizing", 0.0)),
            amplitude_damping=float(obj.get("amplitude_damping", 0.0)),
            phase_damping=float(obj.get("phase_damping", 0.0)),
            readout=obj.get("readout"),
        )

    @classmethod
    def load(cls, path) -> "NoiseModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@lru_cache(maxsize=64)
def _depol(p: float, n: int) -> list[np.ndarray]:
    return depolarizing_kraus(p, n)


@lru_cache(maxsize=64)
def _oneq_channels(p1: float, gamma: float, lam: float) -> list[list[np.ndarray]]:
    chans = []
    if p1 > 0:
        chans.append(_depol(p1, 1))
    if gamma > 0:
        chans.append(amplitude_damping_kraus(gamma))
    if lam > 0:
        chans.append(phase_damping_kraus(lam))
    return chans


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


def _left(t: np.ndarray, mat: np.ndarray, axes: list[int]) -> np.ndarray:
    k = len(axes)
    m = mat.reshape((2,) * (2 * k))
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _right_dagger(t: np.ndarray, mat: np.ndarray, axes: list[int]) -> np.ndarray:
    # (rho M^dagger)[a, b] = sum_c rho[a, c] conj(M[b, c])
    k = len(axes)
    m = mat.conj().reshape((2,) * (2 * k))
    out = np.tensordot(t, m, axes=(axes, list(range(k, 2 * k))))
    nd = t.ndim
    return np.moveaxis(out, list(range(nd - k, nd)), axes)


def _axes(qubits: Sequence[int], n: int) -> tuple[list[int], list[int]]:
    rows = [n - 1 - q for q in qubits]
    return rows, [n + r for r in rows]


def _channel(t: np.ndarray, kraus: Sequence[np.ndarray], qubits: Sequence[int], n: int) -> np.ndarray:
    rows, cols = _axes(qubits, n)
    acc = None
    for k in kraus:
        term = _right_dagger(_left(t, k, rows), k, cols)
        acc = term if acc is None else acc + term
    return acc


def apply_channel(
    rho: DensityMatrix, kraus: Sequence[np.ndarray], targets: Sequence[int], atol: float = 1e-10
) -> DensityMatrix:
    """Return sum_K K rho K^dagger with the Kraus set acting on ``targets``."""
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    dim = 2 ** len(targets)
    if any(k.shape != (dim, dim) for k in kraus):
        raise ValueError(f"Kraus operators must be {dim}x{dim} for {len(targets)} target(s)")
    if kraus_completeness_error(kraus) > atol:
        raise ValueError("Kraus operators violate completeness (sum K^dagger K != I)")
    n = rho.n_qubits
    t = rho.data.reshape((2,) * (2 * n))
    out = _channel(t, kraus, list(targets), n)
    return DensityMatrix(n, out.reshape(2**n, 2**n))


def _expand(ops: Sequence[GateOp], noisy: bool) -> list[GateOp]:
    out = []
    for op in ops:
        if op.kind.is_pseudo:
            continue
        if noisy and op.kind is GateKind.CCX:
            out.extend(decompose_ccx(op))
        else:
            out.append(op)
    return out


def superoperator(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Row-major vectorised channel: vec(sum K rho K^dagger) = S vec(rho)."""
    return sum(np.kron(k, k.conj()) for k in kraus)


@lru_cache(maxsize=4096)
def _gate_superop(kind: GateKind, params: tuple, oneq: tuple, twoq: float) -> np.ndarray:
    u = _gate_matrix(kind, params)
    s = np.kron(u, u.conj())
    chans = _oneq_channels(*oneq) if kind.arity == 1 else ([_depol(twoq, 2)] if twoq > 0 else [])
    for kraus in chans:
        s = superoperator(kraus) @ s
    k = kind.arity
    return s.reshape((2,) * (4 * k))


def _apply_superop(t: np.ndarray, sop: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    rows, cols = _axes(qubits, n)
    k = len(qubits)
    out = np.tensordot(sop, t, axes=(list(range(2 * k, 4 * k)), rows + cols))
    return np.moveaxis(out, list(range(2 * k)), rows + cols)


def evolve(
    rho: DensityMatrix, ops: Sequence[GateOp], nm: NoiseModel | None = None
) -> DensityMatrix:
    """Apply ``ops`` to ``rho``; with ``nm``, each gate is followed by its noise.

    1q gates get depolarizing, amplitude and phase damping on their qubit;
    2q gates get two-qubit depolarizing. ccx is decomposed under noise.
    """
    n = rho.n_qubits
    t = rho.data.reshape((2,) * (2 * n))
    if nm is None:
        oneq, twoq = (0.0, 0.0, 0.0), 0.0
    else:
        oneq = (nm.oneq_depolarizing, nm.amplitude_damping, nm.phase_damping)
        twoq = nm.twoq_depolarizing
    for op in _expand(ops, nm is not None):
        t = _apply_superop(t, _gate_superop(op.kind, op.params, oneq, twoq), op.qubits, n)
    return DensityMatrix(n, t.reshape(2**n, 2**n))


def run_density(
    c: Circuit, nm: NoiseModel | None = None, max_qubits: int = DEFAULT_MAX_QUBITS
) -> DensityMatrix:
    """Final pre-measurement state of ``c`` started from |0...0>."""
    if c.n_qubits > max_qubits:
        raise SimulationError(
            f"{c.name}: {c.n_qubits} qubits exceeds the density-matrix cap of {max_qubits}"
        )
    return evolve(DensityMatrix.zero(c.n_qubits), c.ops, nm)


def _apply_readout(counts: np.ndarray, nm: NoiseModel, n: int, rng: np.random.Generator) -> np.ndarray:
    idx = np.arange(counts.size)
    for q in range(n):
        ro = nm.readout_matrix(q)
        if ro is None:
            continue
        flip_p = np.where((idx >> q) & 1, ro[1, 0], ro[0, 1])
        flips = rng.binomial(counts, flip_p)
        counts = counts - flips
        np.add.at(counts, idx ^ (1 << q), flips)
    return counts


def sample_density(
    rho: DensityMatrix, nm: NoiseModel | None, shots: int, seed: int
) -> OutputDistribution:
    """Multinomial draw from diag(rho), then bit-wise readout confusion."""
    if shots < 1:
        raise ValueError("shots must be positive")
    rng = make_rng(seed)
    counts = rng.multinomial(shots, rho.probabilities())
    if nm is not None and nm.readout is not None:
        counts = _apply_readout(counts, nm, rho.n_qubits, rng)
    return OutputDistribution.from_vector(counts, rho.n_qubits)


def sample_counts(
    c: Circuit,
    nm: NoiseModel | None = None,
    shots: int = 10_000,
    seed: int = 0,
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> OutputDistribution:
    return sample_density(run_density(c, nm, max_qubits), nm, shots, seed)


@lru_cache(maxsize=16)
def _parity_signs(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    pop = np.zeros_like(idx)
    for q in range(n):
        pop += (idx >> q) & 1
    return np.where(pop % 2, -1.0, 1.0)


def expectation_from_density(rho: DensityMatrix) -> float:
    """<Z...Z> = Tr(rho Z^{(x)n})."""
    return float(np.dot(np.diagonal(rho.data).real, _parity_signs(rho.n_qubits)))


def expectation_from_counts(d: OutputDistribution) -> float:
    total = sum(d.counts.values())
    val = 0.0
    for key, c in d.counts.items():
        val += (-1.0 if key.count("1") % 2 else 1.0) * c / total
    return val
