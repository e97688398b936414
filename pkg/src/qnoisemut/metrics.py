"""Divergence measures between quantum states and between output distributions."""

from __future__ import annotations

import enum
import math
from typing import Mapping, Union

import numpy as np

from .sim import DensityMatrix, OutputDistribution


class EigenError(ArithmeticError):
    pass


class Orientation(enum.Enum):
    DISSIMILARITY = "dissimilarity"
    SIMILARITY = "similarity"


class MetricKind(enum.Enum):
    TRACE_DISTANCE = "trace_distance"
    FIDELITY = "fidelity"
    HELLINGER = "hellinger"
    JENSEN_SHANNON = "jensen_shannon"
    EXPECTATION_DIFF = "expectation_diff"

    @property
    def orientation(self) -> Orientation:
        if self is MetricKind.FIDELITY:
            return Orientation.SIMILARITY
        return Orientation.DISSIMILARITY

    @property
    def needs_density(self) -> bool:
        return self in (MetricKind.TRACE_DISTANCE, MetricKind.FIDELITY)

    @property
    def value_range(self) -> tuple[float, float]:
        return (0.0, 2.0) if self is MetricKind.EXPECTATION_DIFF else (0.0, 1.0)

    @property
    def ideal(self) -> float:
        """Value obtained when comparing a state with itself."""
        return 1.0 if self is MetricKind.FIDELITY else 0.0


ALL_METRICS = tuple(MetricKind)

StateLike = Union[DensityMatrix, np.ndarray]
DistLike = Union[OutputDistribution, Mapping[str, float]]


# ---------------------------------------------------------------------------
# Hermitian eigensolver
# ---------------------------------------------------------------------------


def jacobi_eigh(
    m: np.ndarray, tol: float = 1e-12, max_sweeps: int = 50, herm_tol: float = 1e-8
) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a complex Hermitian matrix by cyclic Jacobi rotations.

    Each rotation first removes the phase of the pivot ``a[p, q]`` with a
    diagonal unitary and then applies a real plane rotation that zeroes it.
    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol * ||m||_F``.

    Returns:
        (w, v): ascending eigenvalues and the unitary whose columns are the
        matching eigenvectors, so that ``m = v @ diag(w) @ v^dagger``.

    Raises:
        ValueError: if ``m`` is not square or not Hermitian within ``herm_tol``.
        EigenError: if the off-diagonal norm has not converged after ``max_sweeps``.
    """
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.size and np.max(np.abs(a - a.conj().T)) >= herm_tol:
        raise ValueError("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    target = tol * np.linalg.norm(a)

    def off_norm() -> float:
        return float(np.linalg.norm(a - np.diag(np.diagonal(a))))

    for _ in range(max_sweeps):
        if off_norm() <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # U = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                u = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = u.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ u
    else:
        if off_norm() > target:
            raise EigenError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diagonal(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def hermitian_eigenvalues(m: np.ndarray, **kwargs) -> list[float]:
    """Ascending real eigenvalues of a Hermitian matrix (cyclic Jacobi)."""
    w, _ = jacobi_eigh(m, **kwargs)
    return [float(x) for x in w]


def _eigh(m: np.ndarray, method: str) -> tuple[np.ndarray, np.ndarray]:
    if method == "jacobi":
        return jacobi_eigh(m)
    if method == "lapack":
        return np.linalg.eigh(m)
    raise ValueError(f"unknown eigensolver {method!r}")


def _eigvalsh(m: np.ndarray, method: str) -> np.ndarray:
    if method == "jacobi":
        return jacobi_eigh(m)[0]
    if method == "lapack":
        return np.linalg.eigvalsh(m)
    raise ValueError(f"unknown eigensolver {method!r}")


# ---------------------------------------------------------------------------
# density-matrix metrics
# ---------------------------------------------------------------------------


def _matrix(x: StateLike) -> np.ndarray:
    return x.data if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _pair(s: StateLike, t: StateLike) -> tuple[np.ndarray, np.ndarray]:
    a, b = _matrix(s), _matrix(t)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def trace_distance(s: StateLike, t: StateLike, method: str = "lapack") -> float:
    """Half the trace norm of ``s - t``, in [0, 1]."""
    a, b = _pair(s, t)
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    val = 0.5 * float(np.sum(np.abs(_eigvalsh(diff, method))))
    return min(max(val, 0.0), 1.0)


# eigenvalues below this are treated as rounding noise before taking roots
_EIG_FLOOR = 1e-15


def _psd_sqrt(m: np.ndarray, method: str) -> np.ndarray:
    w, v = _eigh(0.5 * (m + m.conj().T), method)
    w = np.where(w > _EIG_FLOOR, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(s: StateLike, t: StateLike, method: str = "lapack") -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(s) t sqrt(s)))^2``, clamped to [0, 1]."""
    a, b = _pair(s, t)
    root = _psd_sqrt(a, method)
    inner = root @ b @ root
    w = _eigvalsh(0.5 * (inner + inner.conj().T), method)
    w = np.where(w > _EIG_FLOOR, w, 0.0)
    val = float(np.sum(np.sqrt(w)) ** 2)
    return min(max(val, 0.0), 1.0)


# ---------------------------------------------------------------------------
# distribution metrics
# ---------------------------------------------------------------------------


def _probs(d: DistLike) -> tuple[dict[str, float], int | None]:
    if isinstance(d, OutputDistribution):
        return d.probabilities(), d.n_qubits
    total = float(sum(d.values()))
    if total <= 0:
        raise ValueError("distribution has no mass")
    widths = {len(k) for k in d}
    return {k: v / total for k, v in d.items()}, (widths.pop() if len(widths) == 1 else None)


def _aligned(p: DistLike, q: DistLike) -> tuple[np.ndarray, np.ndarray]:
    pp, np_ = _probs(p)
    qq, nq = _probs(q)
    if np_ is not None and nq is not None and np_ != nq:
        raise ValueError(f"qubit-count mismatch: {np_} vs {nq}")
    keys = sorted(set(pp) | set(qq))
    return (
        np.array([pp.get(k, 0.0) for k in keys]),
        np.array([qq.get(k, 0.0) for k in keys]),
    )


def hellinger(p: DistLike, q: DistLike) -> float:
    """Hellinger distance over the union of supports, in [0, 1]."""
    a, b = _aligned(p, q)
    val = math.sqrt(float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))) / math.sqrt(2.0)
    return min(val, 1.0)


def _kl2(a: np.ndarray, m: np.ndarray) -> float:
    mask = a > 0
    return float(np.sum(a[mask] * np.log2(a[mask] / m[mask])))


def jensen_shannon(p: DistLike, q: DistLike) -> float:
    """Jensen-Shannon distance (square root of the base-2 divergence), in [0, 1]."""
    a, b = _aligned(p, q)
    m = 0.5 * (a + b)
    div = 0.5 * (_kl2(a, m) + _kl2(b, m))
    return min(math.sqrt(max(div, 0.0)), 1.0)


def expectation_diff(a: float, b: float) -> float:
    return abs(float(a) - float(b))
