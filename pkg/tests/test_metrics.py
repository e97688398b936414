import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import companion_eigenvalues
from qnoisemut.metrics import (
    ALL_METRICS,
    EigenError,
    MetricKind,
    Orientation,
    expectation_diff,
    fidelity,
    hellinger,
    hermitian_eigenvalues,
    jacobi_eigh,
    jensen_shannon,
    trace_distance,
)
from qnoisemut.sim import DensityMatrix, OutputDistribution

ZERO = DensityMatrix.from_statevector([1, 0])
ONE = DensityMatrix.from_statevector([0, 1])
PLUS = DensityMatrix.from_statevector([1, 1])


def random_state(rng, n, rank=None):
    dim = 2**n
    rank = rank or dim
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return DensityMatrix(n, rho / np.trace(rho))


def random_pure(rng, n):
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return DensityMatrix.from_statevector(psi)


def random_dist(rng, n):
    w = rng.dirichlet(np.ones(2**n)) * (rng.random(2**n) > 0.3)
    if w.sum() == 0:
        w[0] = 1.0
    return OutputDistribution.exact(w, 1000)


def herm(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def test_orientation():
    assert MetricKind.FIDELITY.orientation is Orientation.SIMILARITY
    assert all(m.orientation is Orientation.DISSIMILARITY for m in ALL_METRICS if m is not MetricKind.FIDELITY)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_density_closed_forms(method):
    assert trace_distance(PLUS, PLUS, method) < 1e-12
    assert trace_distance(ZERO, ONE, method) == pytest.approx(1.0, abs=1e-12)
    # the difference |0><0| - |+><+| has eigenvalues +-1/sqrt(2)
    assert trace_distance(ZERO, PLUS, method) == pytest.approx(0.7071067811865476, abs=1e-9)
    assert fidelity(PLUS, PLUS, method) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(ZERO, ONE, method) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(ZERO, PLUS, method) == pytest.approx(0.5, abs=1e-9)


def test_mixed_fidelity_closed_form():
    # commuting states: F = (sum sqrt(p_i q_i))^2
    p, q = np.array([0.7, 0.2, 0.1, 0.0]), np.array([0.1, 0.3, 0.4, 0.2])
    expected = float(np.sum(np.sqrt(p * q)) ** 2)
    assert fidelity(DensityMatrix(2, np.diag(p)), DensityMatrix(2, np.diag(q))) == pytest.approx(expected, abs=1e-12)


def test_distribution_closed_forms():
    p = {"00": 50, "11": 50}
    assert hellinger(p, p) == 0.0
    assert jensen_shannon(p, p) == 0.0
    assert hellinger({"0": 10}, {"1": 10}) == pytest.approx(1.0, abs=1e-12)
    assert jensen_shannon({"0": 10}, {"1": 10}) == pytest.approx(1.0, abs=1e-12)
    assert hellinger({"00": 0.5, "11": 0.5}, {"00": 1.0}) == pytest.approx(0.541196100146197, abs=1e-9)


def _js_mpmath(p, q):
    mpmath.mp.dps = 40
    m = [(a + b) / 2 for a, b in zip(p, q)]
    kl = lambda x: sum(mpmath.mpf(a) * mpmath.log(mpmath.mpf(a) / mpmath.mpf(b), 2) for a, b in zip(x, m) if a > 0)
    return float(mpmath.sqrt((kl(p) + kl(q)) / 2))


def test_jensen_shannon_oracle():
    value = jensen_shannon({"0": 0.5, "1": 0.5}, {"0": 0.75, "1": 0.25})
    assert value == pytest.approx(_js_mpmath([0.5, 0.5], [0.75, 0.25]), abs=1e-12)
    assert value == pytest.approx(0.22089576884901741, abs=1e-9)


def test_union_of_supports():
    assert jensen_shannon({"00": 1}, {"00": 1, "01": 1}) == pytest.approx(_js_mpmath([1, 0], [0.5, 0.5]), abs=1e-12)
    with pytest.raises(ValueError):
        hellinger(OutputDistribution(1, {"0": 1}, 1), OutputDistribution(2, {"00": 1}, 1))


def test_expectation_diff():
    assert expectation_diff(0.3, 0.3) == 0.0
    assert expectation_diff(1.0, -1.0) == 2.0
    assert expectation_diff(1.0, 0.0) == 1.0


def test_pure_state_link():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(1, 4))
        a, b = random_pure(rng, n), random_pure(rng, n)
        assert abs(trace_distance(a, b) - math.sqrt(max(0.0, 1 - fidelity(a, b)))) < 1e-8


def test_range_symmetry_identity():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        n = int(rng.integers(1, 3))
        s, t = random_state(rng, n, int(rng.integers(1, 2**n + 1))), random_state(rng, n)
        p, q = random_dist(rng, n), random_dist(rng, n)
        d, f = trace_distance(s, t), fidelity(s, t)
        h, js = hellinger(p, q), jensen_shannon(p, q)
        assert 0.0 <= d <= 1.0 and 0.0 <= f <= 1.0 and 0.0 <= h <= 1.0 and 0.0 <= js <= 1.0
        assert abs(d - trace_distance(t, s)) < 1e-12
        assert abs(f - fidelity(t, s)) < 1e-9
        assert abs(h - hellinger(q, p)) < 1e-12 and abs(js - jensen_shannon(q, p)) < 1e-12
        a, b = rng.uniform(-1, 1, 2)
        assert 0.0 <= expectation_diff(a, b) == expectation_diff(b, a) <= 2.0
    for _ in range(50):
        s = random_state(rng, 2)
        assert trace_distance(s, s) < 1e-12
        assert fidelity(s, s) == pytest.approx(1.0, abs=1e-12)


def test_symmetric_fidelity_on_rank_deficient_pairs():
    rng = np.random.default_rng(5)
    for _ in range(200):
        s, t = random_state(rng, 2, 1), random_state(rng, 2, 2)
        assert abs(fidelity(s, t) - fidelity(t, s)) < 1e-12


def test_triangle_inequalities():
    rng = np.random.default_rng(17)
    for _ in range(200):
        a, b, c = (random_state(rng, 2) for _ in range(3))
        assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-10
        p, q, r = (random_dist(rng, 2) for _ in range(3))
        assert hellinger(p, r) <= hellinger(p, q) + hellinger(q, r) + 1e-10


def test_jacobi_examples():
    assert hermitian_eigenvalues(np.diag([3.0, 1.0, 2.0])) == [1.0, 2.0, 3.0]
    assert hermitian_eigenvalues(np.array([[0, 1], [1, 0]])) == pytest.approx([-1.0, 1.0], abs=1e-15)


def test_jacobi_against_companion_oracle():
    rng = np.random.default_rng(8)
    for _ in range(20):
        m = herm(rng, 8)
        assert np.max(np.abs(np.array(hermitian_eigenvalues(m)) - companion_eigenvalues(m))) < 1e-9


def test_jacobi_against_lapack_and_reconstruction():
    rng = np.random.default_rng(12)
    for n in (1, 2, 5, 16):
        m = herm(rng, n)
        w, v = jacobi_eigh(m)
        assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-10)
        assert np.allclose(v @ np.diag(w) @ v.conj().T, m, atol=1e-10)
        assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-10)
        assert abs(w.sum() - np.trace(m).real) < 1e-10


def test_jacobi_degenerate_and_errors():
    w = hermitian_eigenvalues(np.eye(4) * 2.5)
    assert w == [2.5] * 4
    with pytest.raises(ValueError, match="Hermitian"):
        jacobi_eigh(np.array([[0, 1], [0, 0]]))
    with pytest.raises(EigenError):
        jacobi_eigh(herm(np.random.default_rng(1), 6), max_sweeps=1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jacobi_route_agrees_on_states(seed):
    rng = np.random.default_rng(seed)
    s, t = random_state(rng, 2, 1), random_state(rng, 2)
    assert trace_distance(s, t, "jacobi") == pytest.approx(trace_distance(s, t), abs=1e-10)
    assert fidelity(s, t, "jacobi") == pytest.approx(fidelity(s, t), abs=1e-9)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        trace_distance(ZERO, DensityMatrix.zero(2))
