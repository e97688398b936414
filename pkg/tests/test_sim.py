import numpy as np
import pytest

from oracles import noisy_density, statevector
from qnoisemut.circuit import Circuit, GateKind, GateOp, parse_qasm
from qnoisemut.metrics import hellinger
from qnoisemut.sim import (
    DensityMatrix,
    NoiseModel,
    OutputDistribution,
    SimulationError,
    amplitude_damping_kraus,
    apply_channel,
    depolarizing_kraus,
    expectation_from_counts,
    expectation_from_density,
    kraus_completeness_error,
    phase_damping_kraus,
    run_density,
    sample_counts,
    sample_density,
)

H0 = Circuit(1, (GateOp(GateKind.H, (0,)),), measured=True)
X0 = Circuit(1, (GateOp(GateKind.X, (0,)),), measured=True)
BELL = Circuit(2, (GateOp(GateKind.H, (0,)), GateOp(GateKind.CX, (0, 1))), measured=True)


def test_hadamard_density():
    assert np.allclose(run_density(H0).data, 0.5, atol=1e-15)


def test_full_depolarization_after_x():
    nm = NoiseModel("full", oneq_depolarizing=1.0)
    rho = run_density(X0, nm)
    assert np.allclose(rho.data, np.eye(2) / 2, atol=1e-15)
    assert abs(expectation_from_density(rho)) < 1e-15


def test_bell_density():
    expected = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expected[i, j] = 0.5
    assert np.allclose(run_density(BELL).data, expected, atol=1e-15)


def test_channel_examples():
    rho = DensityMatrix.zero(1)
    assert np.allclose(apply_channel(rho, [np.eye(2)], [0]).data, rho.data)
    plus = DensityMatrix.from_statevector([1, 1])
    relaxed = apply_channel(plus, amplitude_damping_kraus(1.0), [0])
    assert np.allclose(relaxed.data, [[1, 0], [0, 0]], atol=1e-15)
    half = apply_channel(rho, depolarizing_kraus(0.5), [0])
    assert np.allclose(half.data, np.diag([0.75, 0.25]), atol=1e-15)
    with pytest.raises(ValueError, match="completeness"):
        apply_channel(rho, [0.5 * np.eye(2)], [0])


def test_depolarizing_closed_form():
    rng = np.random.default_rng(3)
    for n in (1, 2):
        a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        p = 0.37
        out = apply_channel(DensityMatrix(n, rho), depolarizing_kraus(p, n), list(range(n)))
        assert np.allclose(out.data, (1 - p) * rho + p * np.eye(2**n) / 2**n, atol=1e-13)


def test_phase_damping_shrinks_coherence():
    lam = 0.36
    out = apply_channel(DensityMatrix.from_statevector([1, 1]), phase_damping_kraus(lam), [0])
    assert out.data[0, 1] == pytest.approx(0.5 * np.sqrt(1 - lam))


@pytest.mark.parametrize("p", [0.0, 0.01, 0.5, 1.0])
def test_kraus_completeness(p):
    for kraus in (depolarizing_kraus(p), depolarizing_kraus(p, 2), amplitude_damping_kraus(p), phase_damping_kraus(p)):
        assert kraus_completeness_error(kraus) < 1e-10


def test_noiseless_matches_statevector_oracle(corpus):
    for e in corpus:
        psi = statevector(e.circuit)
        assert np.allclose(run_density(e.circuit).data, np.outer(psi, psi.conj()), atol=1e-12)


def test_noisy_matches_full_matrix_oracle(corpus, noise_models):
    for nm in noise_models:
        for e in corpus:
            rho = run_density(e.circuit, nm)
            ref = noisy_density(e.circuit, nm.oneq_channels(), nm.twoq_channels())
            assert np.max(np.abs(rho.data - ref)) < 1e-12


def test_trace_and_psd(corpus, noise_models):
    for nm in [None, *noise_models, NoiseModel("heavy", 0.2, 0.3, 0.25, 0.15)]:
        for e in corpus:
            rho = run_density(e.circuit, nm)
            rho.check(atol=1e-9)
            assert np.linalg.eigvalsh(rho.data).min() > -1e-9


def test_qubit_cap():
    c = Circuit(13)
    with pytest.raises(SimulationError):
        run_density(c)
    assert run_density(Circuit(3), max_qubits=3).n_qubits == 3


def test_density_binary_round_trip(tmp_path):
    rho = run_density(BELL, NoiseModel("d", 0.1, 0.2))
    rho.save(tmp_path / "r.bin")
    raw = (tmp_path / "r.bin").read_bytes()
    assert raw[:8] == b"QNMDENS1" and int.from_bytes(raw[8:12], "little") == 2
    assert len(raw) == 12 + 16 * 16
    assert np.array_equal(DensityMatrix.load(tmp_path / "r.bin").data, rho.data)


def test_sampling_examples():
    assert sample_counts(X0, shots=100, seed=1).counts == {"1": 100}
    d = sample_counts(H0, shots=10_000, seed=11)
    assert set(d.counts) == {"0", "1"} and sum(d.counts.values()) == 10_000
    assert abs(d.counts["0"] - 5000) < 200
    bell = sample_counts(BELL, shots=10_000, seed=5)
    assert set(bell.counts) <= {"00", "11"}


def test_bit_order():
    c = parse_qasm("OPENQASM 2.0; qreg q[3]; x q[0];")
    assert sample_counts(c, shots=10, seed=0).counts == {"001": 10}


def test_sampling_determinism():
    nm = NoiseModel("ro", 0.01, 0.02, readout=[[0.9, 0.1], [0.2, 0.8]])
    a = sample_counts(BELL, nm, 500, seed=42)
    b = sample_counts(BELL, nm, 500, seed=42)
    assert a.counts == b.counts
    assert sample_counts(BELL, nm, 500, seed=43).counts != a.counts


def test_readout_flips_every_bit():
    nm = NoiseModel("flip", readout=[[0.0, 1.0], [1.0, 0.0]])
    assert sample_counts(X0, nm, 50, seed=0).counts == {"0": 50}
    per_qubit = NoiseModel("q1", readout=[[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]])
    assert sample_counts(Circuit(2), per_qubit, 20, seed=0).counts == {"10": 20}


def test_readout_rate():
    nm = NoiseModel("ro", readout=[[0.9, 0.1], [0.3, 0.7]])
    d = sample_counts(Circuit(1), nm, 200_000, seed=9)
    assert d.counts["1"] / 200_000 == pytest.approx(0.1, abs=0.005)


def test_expectation_examples():
    assert expectation_from_density(DensityMatrix.zero(1)) == 1.0
    assert expectation_from_density(run_density(X0)) == -1.0
    assert expectation_from_density(DensityMatrix(1, np.eye(2) / 2)) == 0.0
    assert expectation_from_counts(OutputDistribution(1, {"0": 100}, 100)) == 1.0
    assert expectation_from_counts(OutputDistribution(2, {"01": 50, "10": 50}, 100)) == -1.0
    assert expectation_from_counts(OutputDistribution(2, {"00": 75, "11": 25}, 100)) == 1.0


def test_expectation_shot_limit(corpus, noise_models):
    for nm in [None, *noise_models]:
        for i, e in enumerate(corpus):
            rho = run_density(e.circuit, nm)
            d = sample_density(rho, None, 100_000, seed=i)
            assert abs(expectation_from_density(rho) - expectation_from_counts(d)) < 0.02


def test_sampling_hellinger_to_exact(corpus):
    for e in corpus:
        rho = run_density(e.circuit)
        exact = OutputDistribution.exact(rho.probabilities(), 10_000)
        d = sample_density(rho, None, 10_000, seed=123)
        assert hellinger(exact, d) < 0.03


def test_distribution_validation():
    with pytest.raises(ValueError):
        OutputDistribution(2, {"0": 10}, 10)
    with pytest.raises(ValueError):
        OutputDistribution(1, {"0": 10}, 11)


def test_noise_model_json_round_trip(tmp_path, noise_models):
    for nm in noise_models:
        assert NoiseModel.from_json(nm.to_json()) == nm
    with pytest.raises(ValueError):
        NoiseModel("bad", oneq_depolarizing=1.5)
    with pytest.raises(ValueError):
        NoiseModel("bad", readout=[[0.5, 0.6], [0.0, 1.0]])
    with pytest.raises(ValueError, match="unknown"):
        NoiseModel.from_json({"name": "x", "crosstalk": 0.1})
