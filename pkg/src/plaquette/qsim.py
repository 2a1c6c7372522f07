"""Dense state engine for small qubit registers.

Qubit 0 is the leftmost character of a ket label, i.e. the most significant
bit of the basis index. Density matrices are stored as plain complex arrays;
the array-level helpers (prefixed ``_``) broadcast over leading batch axes so
a whole operator basis can be propagated at once when building superoperators.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

MAX_QUBITS = 7

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

_KET = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "r": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "l": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def rotation(axis: str, angle: float) -> np.ndarray:
    """exp(-i angle/2 sigma_axis)."""
    sigma = PAULI[axis.upper()]
    return np.cos(angle / 2) * I2 - 1j * np.sin(angle / 2) * sigma


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n}")


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_n(self.n_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError("amplitude vector has wrong length")
        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if abs(norm - 1) > 1e-10:
            raise ValueError(f"state not normalised (norm^2 = {norm})")

    @classmethod
    def from_label(cls, label: str) -> "StateVector":
        """Product state from characters in {0, 1, +, -, r, l}."""
        vec = np.array([1.0 + 0j])
        for ch in label:
            vec = np.kron(vec, _KET[ch])
        return cls(len(label), vec)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def apply_unitary(self, u, targets) -> "StateVector":
        u = _as_unitary(u, targets, self.n_qubits)
        psi = self.amplitudes.reshape((2,) * self.n_qubits)
        out = _contract(psi, u, list(targets))
        return StateVector(self.n_qubits, out.reshape(-1))

    def expectation(self, op: np.ndarray) -> complex:
        return np.vdot(self.amplitudes, op @ self.amplitudes)


@dataclass
class DensityMatrix:
    n_qubits: int
    elements: np.ndarray

    def __post_init__(self):
        _check_n(self.n_qubits)
        self.elements = np.asarray(self.elements, dtype=complex)
        dim = 2**self.n_qubits
        if self.elements.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {self.elements.shape}")

    @classmethod
    def from_label(cls, label: str) -> "DensityMatrix":
        return StateVector.from_label(label).to_density()

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def trace(self) -> complex:
        return np.trace(self.elements)

    def check(self, atol: float = 1e-10, eig_tol: float = 1e-8) -> None:
        """Raise if the matrix is not a valid state."""
        rho = self.elements
        if np.max(np.abs(rho - rho.conj().T)) > atol:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(rho) - 1) > atol:
            raise ValueError(f"trace {np.trace(rho)} != 1")
        if np.linalg.eigvalsh(rho).min() < -eig_tol:
            raise ValueError("density matrix has negative eigenvalues")

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.elements)), 0.0, None)

    def reduced(self, keep: Sequence[int]) -> "DensityMatrix":
        """Partial trace onto ``keep`` (kept in the given order)."""
        n = self.n_qubits
        keep = list(keep)
        drop = [q for q in range(n) if q not in keep]
        t = self.elements.reshape((2,) * (2 * n))
        perm = keep + drop + [n + q for q in keep] + [n + q for q in drop]
        t = t.transpose(perm)
        k, d = 2 ** len(keep), 2 ** len(drop)
        t = t.reshape(k, d, k, d)
        return DensityMatrix(len(keep), np.einsum("ajbj->ab", t))

    def expectation(self, op: np.ndarray) -> complex:
        return np.trace(self.elements @ op)

    def fidelity_pure(self, psi: np.ndarray) -> float:
        psi = np.asarray(psi, dtype=complex)
        return float(np.real(np.vdot(psi, self.elements @ psi)))


@dataclass(frozen=True)
class PauliString:
    """Per-qubit Pauli labels; position 0 is the CR control in a CR frame."""

    ops: str

    def __post_init__(self):
        if not self.ops or any(c not in "IXYZ" for c in self.ops):
            raise ValueError(f"invalid Pauli string {self.ops!r}")

    def __len__(self):
        return len(self.ops)

    @property
    def is_diagonal(self) -> bool:
        return set(self.ops) <= {"I", "Z"}

    def matrix(self) -> np.ndarray:
        m = np.array([[1.0 + 0j]])
        for c in self.ops:
            m = np.kron(m, PAULI[c])
        return m

    def z_mask(self) -> int:
        """Bit mask of Z positions, MSB = position 0."""
        n = len(self.ops)
        return sum(1 << (n - 1 - i) for i, c in enumerate(self.ops) if c == "Z")


@dataclass
class KrausChannel:
    operators: list
    target: int

    def __post_init__(self):
        self.operators = [np.asarray(k, dtype=complex) for k in self.operators]
        for k in self.operators:
            if k.shape != (2, 2):
                raise ValueError("Kraus operators must be 2x2")
        total = sum(k.conj().T @ k for k in self.operators)
        if np.max(np.abs(total - I2)) > 1e-9:
            raise ValueError("channel is not trace preserving")


def amplitude_damping(gamma: float, target: int) -> KrausChannel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return KrausChannel([k0, k1], target)


def phase_damping(lam: float, target: int) -> KrausChannel:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - lam)]])
    k1 = np.array([[0, 0], [0, np.sqrt(lam)]])
    return KrausChannel([k0, k1], target)


# --- array-level kernels ---------------------------------------------------


def _contract(psi: np.ndarray, u: np.ndarray, targets: list) -> np.ndarray:
    """Apply ``u`` to the ``targets`` axes of a state tensor."""
    k = len(targets)
    u_t = u.reshape((2,) * (2 * k))
    out = np.tensordot(u_t, psi, axes=(list(range(k, 2 * k)), targets))
    return np.moveaxis(out, list(range(k)), targets)


def _apply_unitary_arr(rho: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    batch = rho.shape[:-2]
    t = rho.reshape(batch + (2,) * (2 * n))
    nb = len(batch)
    targets = list(targets)
    k = len(targets)
    u_t = u.reshape((2,) * (2 * k))
    axes = [nb + q for q in targets]
    t = np.moveaxis(np.tensordot(u_t, t, axes=(list(range(k, 2 * k)), axes)), list(range(k)), axes)
    axes = [nb + n + q for q in targets]
    t = np.moveaxis(
        np.tensordot(u_t.conj(), t, axes=(list(range(k, 2 * k)), axes)), list(range(k)), axes
    )
    return t.reshape(rho.shape)


def _apply_kraus_arr(rho: np.ndarray, ops: Sequence[np.ndarray], target: int, n: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in ops:
        out += _apply_unitary_arr(rho, k, [target], n)
    return out


def _apply_phases_arr(rho: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """rho -> D rho D^dagger for D = diag(exp(-i phases))."""
    d = np.exp(-1j * phases)
    return rho * d[:, None] * d.conj()[None, :]


def _as_unitary(u, targets, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError("duplicate target qubits")
    if any(not 0 <= q < n for q in targets):
        raise ValueError("target qubit out of range")
    if u.shape != (2 ** len(targets),) * 2:
        raise ValueError("unitary size does not match number of targets")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-9:
        raise ValueError("matrix is not unitary")
    return u


# --- public operations ------------------------------------------------------


def apply_unitary(state: DensityMatrix, u, targets: Sequence[int]) -> DensityMatrix:
    u = _as_unitary(u, targets, state.n_qubits)
    return DensityMatrix(state.n_qubits, _apply_unitary_arr(state.elements, u, targets, state.n_qubits))


def _parse_coeffs(coeffs: Mapping[str, float], width: int) -> list[tuple[int, float]]:
    terms = []
    for label, value in coeffs.items():
        p = PauliString(label)
        if len(p) != width:
            raise ValueError(f"string {label!r} does not span {width} qubits")
        if not p.is_diagonal:
            raise ValueError(f"non-diagonal Pauli string {label!r} in Z-coefficient table")
        terms.append((p.z_mask(), float(value)))
    return terms


def diagonal_energies(coeffs: Mapping[str, float], width: int) -> np.ndarray:
    """Eigenvalues (Hz) of sum_s coeff_s P_s / 2 on ``width`` qubits, one per basis index."""
    idx = np.arange(2**width)
    eta = np.zeros(2**width)
    for mask, value in _parse_coeffs(coeffs, width):
        parity = np.array([bin(b & mask).count("1") & 1 for b in idx])
        eta += value * (1 - 2 * parity) / 2
    return eta


def _embed_diagonal(eta_sub: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Lift per-basis energies on ``qubits`` to the full register."""
    idx = np.arange(2**n)
    sub = np.zeros_like(idx)
    for q in qubits:
        sub = (sub << 1) | ((idx >> (n - 1 - q)) & 1)
    return eta_sub[sub]


def evolve_diagonal(
    state: DensityMatrix,
    coeffs: Mapping[str, float],
    duration: float,
    qubits: Sequence[int] | None = None,
) -> DensityMatrix:
    """Evolve under H = sum alpha_s P_s / 2 (Hz, Z strings only) for ``duration`` seconds.

    ``qubits`` names the register positions the string characters refer to;
    defaults to all qubits in order.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    n = state.n_qubits
    qubits = list(range(n)) if qubits is None else list(qubits)
    eta = diagonal_energies(coeffs, len(qubits))
    phases = 2 * np.pi * duration * _embed_diagonal(eta, qubits, n)
    return DensityMatrix(n, _apply_phases_arr(state.elements, phases))


def apply_channel(state: DensityMatrix, ch: KrausChannel) -> DensityMatrix:
    if not 0 <= ch.target < state.n_qubits:
        raise ValueError("channel target out of range")
    return DensityMatrix(
        state.n_qubits, _apply_kraus_arr(state.elements, ch.operators, ch.target, state.n_qubits)
    )


def idle_kraus(t1: float, t2: float, duration: float) -> list[list[np.ndarray]]:
    """Amplitude damping then pure dephasing for one qubit idling ``duration`` seconds."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    gamma = 1 - np.exp(-duration / t1)
    inv_tphi = 1 / t2 - 1 / (2 * t1)
    if inv_tphi <= 0:
        lam = 0.0
    else:
        lam = 1 - np.exp(-2 * duration * inv_tphi)
    return [amplitude_damping(gamma, 0).operators, phase_damping(lam, 0).operators]


def _idle_arr(rho: np.ndarray, params: Sequence, qubits: Sequence[int], duration: float, n: int) -> np.ndarray:
    if duration == 0:
        return rho
    for q in qubits:
        p = params[q]
        for ops in idle_kraus(p.t1_s, p.t2_s, duration):
            rho = _apply_kraus_arr(rho, ops, q, n)
    return rho


def idle_noise(
    state: DensityMatrix,
    qubits: Sequence[int],
    duration: float,
    device,
    labels: Sequence[str] | None = None,
) -> DensityMatrix:
    """T1/T2 decoherence on ``qubits`` for ``duration`` seconds.

    ``labels`` maps register positions to device qubit labels; by default the
    register follows ``device.qubits`` order.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    params = register_params(device, labels, state.n_qubits)
    return DensityMatrix(state.n_qubits, _idle_arr(state.elements, params, qubits, duration, state.n_qubits))


def register_params(device, labels, n):
    if labels is None:
        params = list(device.qubits)[:n]
    else:
        params = [device.qubit(lbl) for lbl in labels]
    if len(params) != n:
        raise ValueError("register size does not match qubit labels")
    return params


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator used for every stochastic step."""
    return np.random.Generator(np.random.Philox(seed))


def measure_z(state: DensityMatrix, qubit: int, shots: int, rng_seed=None, rng=None) -> np.ndarray:
    """Sample ``shots`` ideal Z outcomes of ``qubit``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not 0 <= qubit < state.n_qubits:
        raise ValueError("qubit out of range")
    p1 = float(np.clip(state.reduced([qubit]).elements[1, 1].real, 0.0, 1.0))
    rng = make_rng(rng_seed) if rng is None else rng
    return (rng.random(shots) < p1).astype(np.int8)


def project(state: DensityMatrix, qubit: int, outcome: int) -> tuple[float, DensityMatrix]:
    """Probability of ``outcome`` and the normalised post-measurement state."""
    n = state.n_qubits
    proj = np.diag([1.0 - outcome, float(outcome)]).astype(complex)
    full = np.array([[1.0 + 0j]])
    for q in range(n):
        full = np.kron(full, proj if q == qubit else I2)
    rho = full @ state.elements @ full
    p = float(np.trace(rho).real)
    if p <= 0:
        return 0.0, state
    return p, DensityMatrix(n, rho / p)


def superoperator(fn, n: int) -> np.ndarray:
    """Matrix S with vec(fn(rho)) = S vec(rho) (row-major vec) for a linear map ``fn``."""
    dim = 2**n
    basis = np.eye(dim * dim, dtype=complex).reshape(dim * dim, dim, dim)
    out = fn(basis)
    return out.reshape(dim * dim, dim * dim).T
