import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from plaquette import qsim
from plaquette.device import default_plaquette


def random_state(n, rng):
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = a @ a.conj().T
    return qsim.DensityMatrix(n, rho / np.trace(rho))


def test_bit_flip():
    out = qsim.apply_unitary(qsim.DensityMatrix.from_label("0"), qsim.X, [0])
    assert np.allclose(out.elements, qsim.DensityMatrix.from_label("1").elements)


def test_identity_unitary_leaves_state():
    rho = random_state(3, np.random.default_rng(1))
    out = qsim.apply_unitary(rho, np.eye(8), [0, 1, 2])
    assert np.max(np.abs(out.elements - rho.elements)) < 1e-12


def test_zx90_matches_matrix_exponential():
    zx = np.kron(qsim.Z, qsim.X)
    u = expm(-1j * np.pi / 4 * zx)
    direct = u @ qsim.DensityMatrix.from_label("00").elements @ u.conj().T
    out = qsim.apply_unitary(qsim.DensityMatrix.from_label("00"), u, [0, 1])
    assert np.max(np.abs(out.elements - direct)) < 1e-10
    # composed half rotations
    half = expm(-1j * np.pi / 8 * zx)
    rho = qsim.DensityMatrix.from_label("00")
    rho = qsim.apply_unitary(qsim.apply_unitary(rho, half, [0, 1]), half, [0, 1])
    assert np.max(np.abs(rho.elements - direct)) < 1e-10


def test_unitary_embedding_on_reversed_targets():
    rng = np.random.default_rng(3)
    rho = random_state(3, rng)
    cnot = np.eye(4)[[0, 1, 3, 2]]
    out = qsim.apply_unitary(rho, cnot, [2, 0])
    # build the full matrix: control qubit 2, target qubit 0
    full = np.zeros((8, 8))
    for b in range(8):
        bits = [(b >> (2 - q)) & 1 for q in range(3)]
        if bits[2]:
            bits[0] ^= 1
        full[bits[0] * 4 + bits[1] * 2 + bits[2], b] = 1
    assert np.allclose(out.elements, full @ rho.elements @ full.T)


def test_apply_unitary_errors():
    rho = qsim.DensityMatrix.from_label("00")
    with pytest.raises(ValueError):
        qsim.apply_unitary(rho, np.array([[1, 1], [0, 1]]), [0])
    with pytest.raises(ValueError):
        qsim.apply_unitary(rho, np.eye(4), [1, 1])
    with pytest.raises(ValueError):
        qsim.apply_unitary(rho, qsim.X, [2])


def test_state_validation():
    with pytest.raises(ValueError):
        qsim.StateVector(1, [1, 1])
    with pytest.raises(ValueError):
        qsim.DensityMatrix(8, np.eye(256))
    with pytest.raises(ValueError):
        qsim.DensityMatrix(1, np.diag([1.5, -0.5])).check()
    qsim.DensityMatrix.from_label("+0").check()


def test_evolve_zero_coefficients():
    rho = random_state(2, np.random.default_rng(0))
    out = qsim.evolve_diagonal(rho, {"IZ": 0.0, "ZZ": 0.0}, 3e-6)
    assert np.allclose(out.elements, rho.elements)


def test_quarter_turn_about_z():
    # 1 MHz for 250 ns under exp(-i 2 pi H t): |1> gains +pi/2 relative to |0>
    out = qsim.evolve_diagonal(qsim.DensityMatrix.from_label("+"), {"Z": 1e6}, 250e-9)
    assert out.fidelity_pure(qsim._KET["r"]) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.angle(out.elements[1, 0] / out.elements[0, 1])) == pytest.approx(np.pi, abs=1e-12)


def test_eta_matches_hadamard_transform():
    from scipy.linalg import hadamard

    from plaquette.device import z_labels

    rng = np.random.default_rng(7)
    alpha = rng.uniform(-1e6, 1e6, 16)
    eta = qsim.diagonal_energies(dict(zip(z_labels(4), alpha)), 4)
    assert np.allclose(eta, hadamard(16) @ alpha / 2, rtol=1e-9, atol=0)


def test_evolve_diagonal_rejects_non_z():
    with pytest.raises(ValueError):
        qsim.evolve_diagonal(qsim.DensityMatrix.from_label("00"), {"XZ": 1.0}, 1e-6)
    with pytest.raises(ValueError):
        qsim.evolve_diagonal(qsim.DensityMatrix.from_label("00"), {"Z": 1.0}, -1.0)


def test_evolve_diagonal_commutes():
    rho = random_state(3, np.random.default_rng(2))
    a = {"ZIZ": 3e5, "IZI": -2e5}
    b = {"ZZZ": 1e5, "ZII": 4e5}
    ab = qsim.evolve_diagonal(qsim.evolve_diagonal(rho, a, 1e-6), b, 2e-6)
    ba = qsim.evolve_diagonal(qsim.evolve_diagonal(rho, b, 2e-6), a, 1e-6)
    assert np.max(np.abs(ab.elements - ba.elements)) < 1e-10


def test_full_amplitude_damping():
    out = qsim.apply_channel(qsim.DensityMatrix.from_label("1"), qsim.amplitude_damping(1.0, 0))
    assert np.allclose(out.elements, qsim.DensityMatrix.from_label("0").elements)


def test_identity_channel():
    rho = random_state(2, np.random.default_rng(4))
    out = qsim.apply_channel(rho, qsim.KrausChannel([np.eye(2)], 1))
    assert np.allclose(out.elements, rho.elements)


def test_damping_for_one_t1():
    t1 = 20e-6
    ch = qsim.amplitude_damping(1 - np.exp(-t1 / t1), 0)
    out = qsim.apply_channel(qsim.DensityMatrix.from_label("1"), ch)
    assert out.elements[1, 1].real == pytest.approx(np.exp(-1), abs=1e-9)


def test_channel_must_preserve_trace():
    with pytest.raises(ValueError):
        qsim.KrausChannel([np.diag([1.0, 0.5])], 0)


def test_idle_t1_d1():
    dev = default_plaquette()
    t1 = dev.qubit("D1").t1_s
    assert t1 == pytest.approx(35.1e-6)
    out = qsim.idle_noise(qsim.DensityMatrix.from_label("1"), [0], t1, dev, labels=["D1"])
    assert out.elements[1, 1].real == pytest.approx(np.exp(-1), abs=1e-6)


def test_idle_zero_duration_and_negative():
    dev = default_plaquette()
    rho = qsim.DensityMatrix.from_label("+")
    assert np.allclose(qsim.idle_noise(rho, [0], 0.0, dev, ["S1"]).elements, rho.elements)
    with pytest.raises(ValueError):
        qsim.idle_noise(rho, [0], -1e-9, dev, ["S1"])


@pytest.mark.parametrize("label", ["D1", "D2", "S1"])
def test_ramsey_contrast_follows_t2(label):
    dev = default_plaquette()
    q = dev.qubit(label)
    for t in (1e-6, 10e-6, 40e-6):
        out = qsim.idle_noise(qsim.DensityMatrix.from_label("+"), [0], t, dev, [label])
        coherence = 2 * abs(out.elements[0, 1])
        assert coherence == pytest.approx(np.exp(-t / q.t2_s), abs=1e-6)


def test_dephasing_clamped_when_t2_exceeds_2t1():
    ops = qsim.idle_kraus(10e-6, 30e-6, 5e-6)
    rho = np.full((2, 2), 0.5, dtype=complex)
    for kraus in ops:
        rho = sum(k @ rho @ k.conj().T for k in kraus)
    # only T1 contributes: coherence decays as exp(-t / 2T1)
    assert 2 * abs(rho[0, 1]) == pytest.approx(np.exp(-5 / 20), abs=1e-12)


def test_measure_ground_state():
    shots = qsim.measure_z(qsim.DensityMatrix.from_label("0"), 0, 1000, rng_seed=1)
    assert shots.sum() == 0


def test_measure_plus_binomial():
    n = 100_000
    shots = qsim.measure_z(qsim.DensityMatrix.from_label("+"), 0, n, rng_seed=11)
    assert abs(shots.mean() - 0.5) < 5 * np.sqrt(0.25 / n)


def test_measure_deterministic_for_seed():
    rho = qsim.DensityMatrix.from_label("+0")
    a = qsim.measure_z(rho, 0, 500, rng_seed=5)
    b = qsim.measure_z(rho, 0, 500, rng_seed=5)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        qsim.measure_z(rho, 0, 0)
    with pytest.raises(ValueError):
        qsim.measure_z(rho, 2, 10)


def test_bell_correlation():
    psi = qsim.StateVector.from_label("00").apply_unitary(qsim.HAD, [0])
    psi = psi.apply_unitary(np.eye(4)[[0, 1, 3, 2]], [0, 1])
    rho = psi.to_density()
    for outcome in (0, 1):
        p, post = qsim.project(rho, 0, outcome)
        assert p == pytest.approx(0.5)
        second = qsim.measure_z(post, 1, 200, rng_seed=3)
        assert np.all(second == outcome)


def test_state_vector_and_density_agree():
    rng = np.random.default_rng(8)
    psi = qsim.StateVector.from_label("0+1")
    rho = psi.to_density()
    for _ in range(5):
        q, r = rng.choice(3, size=2, replace=False)
        u = expm(-1j * rng.normal() * np.kron(qsim.PAULI[rng.choice(list("XYZ"))], qsim.Y))
        psi = psi.apply_unitary(u, [q, r])
        rho = qsim.apply_unitary(rho, u, [q, r])
    for ops in ("ZII", "XYZ", "IXX", "ZZZ"):
        m = qsim.PauliString(ops).matrix()
        assert abs(psi.expectation(m) - rho.expectation(m)) < 1e-9


def test_pauli_string():
    p = qsim.PauliString("ZIZ")
    assert p.is_diagonal and p.z_mask() == 0b101 and len(p) == 3
    assert not qsim.PauliString("XZ").is_diagonal
    with pytest.raises(ValueError):
        qsim.PauliString("ZQ")


def test_superoperator_of_unitary():
    u = qsim.rotation("Y", 0.3)
    s = qsim.superoperator(lambda rho: qsim._apply_unitary_arr(rho, u, [0], 1), 1)
    assert np.allclose(s, np.kron(u, u.conj()))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    t=st.floats(0, 50e-6),
    alpha=st.floats(-2e6, 2e6),
)
def test_operations_preserve_state_properties(seed, t, alpha):
    dev = default_plaquette()
    rho = random_state(3, np.random.default_rng(seed))
    rho = qsim.evolve_diagonal(rho, {"ZZI": alpha, "IIZ": -alpha / 3}, t)
    rho = qsim.idle_noise(rho, [0, 1, 2], t, dev, ["D1", "D2", "S1"])
    rho = qsim.apply_unitary(rho, qsim.rotation("X", alpha * 1e-6), [1])
    rho.check(atol=1e-10, eig_tol=1e-8)
