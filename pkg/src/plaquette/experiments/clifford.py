"""One- and two-qubit Clifford groups, keyed by their Pauli tableau.

Two-qubit elements use the canonical four-class form (single-qubit, CNOT-like,
iSWAP-like, SWAP-like) with every CNOT compiled onto an arbitrary entangler
``E`` that equals a CNOT up to single-qubit gates, so each element needs at most
three applications of ``E``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import qsim

_PAULI_1 = [qsim.I2, qsim.X, qsim.Y, qsim.Z]


@lru_cache(maxsize=None)
def _pauli_basis(n: int) -> np.ndarray:
    mats = []
    for combo in itertools.product(_PAULI_1, repeat=n):
        m = np.array([[1.0 + 0j]])
        for p in combo:
            m = np.kron(m, p)
        mats.append(m)
    return np.array(mats)


@lru_cache(maxsize=None)
def _generators(n: int) -> np.ndarray:
    """X_q and Z_q for every qubit q."""
    basis = _pauli_basis(n)
    gens = []
    for q in range(n):
        for p in (1, 3):
            idx = sum((p if k == q else 0) * 4 ** (n - 1 - k) for k in range(n))
            gens.append(basis[idx])
    return np.array(gens)


def tableau_keys(us: np.ndarray) -> np.ndarray:
    """Integer key of the conjugation action of each Clifford in ``us`` (batch, d, d)."""
    us = np.asarray(us)
    if us.ndim == 2:
        us = us[None]
    d = us.shape[-1]
    n = int(np.log2(d))
    basis = _pauli_basis(n)
    gens = _generators(n)
    imgs = np.einsum("bij,gjk,blk->bgil", us, gens, us.conj())
    coeff = np.einsum("pji,bgij->bgp", basis.conj(), imgs) / d
    idx = np.argmax(np.abs(coeff), axis=-1)
    val = np.take_along_axis(coeff, idx[..., None], axis=-1)[..., 0]
    if np.max(np.abs(np.abs(val) - 1)) > 1e-6:
        raise ValueError("matrix is not a Clifford")
    code = idx * 2 + (val.real < 0)
    radix = 2 * 4**n
    keys = np.zeros(code.shape[0], dtype=object)
    for g in range(code.shape[1]):
        keys = keys * radix + code[:, g]
    return keys


def tableau_key(u: np.ndarray) -> int:
    return int(tableau_keys(u)[0])


@lru_cache(maxsize=None)
def single_qubit_cliffords() -> tuple[np.ndarray, ...]:
    """The 24 single-qubit Cliffords, identity first."""
    gens = [qsim.HAD, np.diag([1, 1j])]
    found = {tableau_key(qsim.I2): qsim.I2}
    frontier = [qsim.I2]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                v = g @ u
                k = tableau_key(v)
                if k not in found:
                    found[k] = v
                    nxt.append(v)
        frontier = nxt
    return tuple(found.values())


def _axis_rotation(axis, angle):
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    sig = n[0] * qsim.X + n[1] * qsim.Y + n[2] * qsim.Z
    return np.cos(angle / 2) * qsim.I2 - 1j * np.sin(angle / 2) * sig


def local_factors(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a 4x4 product unitary into its two 2x2 factors."""
    m = k.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vt = np.linalg.svd(m)
    if s[1] > 1e-9 * s[0]:
        raise ValueError("matrix is not a product of single-qubit gates")
    a = np.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    b = np.sqrt(s[0]) * vt[0].reshape(2, 2)
    return a, b


_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


@dataclass
class TwoQubitClifford:
    layers: tuple[tuple[int, int], ...]  # single-qubit Clifford indices (control, target), time order
    n_entangler: int
    unitary: np.ndarray


class CliffordGroup:
    """Lookup tables for sampling, composing and inverting Cliffords."""

    def __init__(self, elements, unitaries):
        self.elements = list(elements)
        self.unitaries = np.asarray(unitaries)
        keys = tableau_keys(self.unitaries)
        self.index = {int(k): i for i, k in enumerate(keys)}
        if len(self.index) != len(self.elements):
            raise ValueError("duplicate Clifford elements")

    def __len__(self):
        return len(self.elements)

    def lookup(self, u: np.ndarray) -> int:
        return self.index[tableau_key(u)]

    def inverse_of(self, u: np.ndarray) -> int:
        return self.lookup(u.conj().T)


@lru_cache(maxsize=None)
def one_qubit_group() -> CliffordGroup:
    c1 = single_qubit_cliffords()
    return CliffordGroup(range(len(c1)), c1)


def two_qubit_group(entangler: np.ndarray) -> CliffordGroup:
    """All 11520 two-qubit Cliffords compiled over ``entangler`` (control = qubit 0)."""
    return _two_qubit_group(_freeze(entangler))


def _freeze(u):
    return tuple(np.round(np.asarray(u).ravel(), 12).tolist())


@lru_cache(maxsize=8)
def _two_qubit_group(frozen) -> CliffordGroup:
    ent = np.array(frozen, dtype=complex).reshape(4, 4)
    c1 = single_qubit_cliffords()
    c1_index = {tableau_key(u): i for i, u in enumerate(c1)}
    # CNOT = K E with K local
    kc, kt = local_factors(_CNOT @ ent.conj().T)

    def idx(u):
        return c1_index[tableau_key(u)]

    s1 = [qsim.I2, _axis_rotation((1, 1, 1), 2 * np.pi / 3), _axis_rotation((1, 1, 1), 4 * np.pi / 3)]
    ry90 = qsim.rotation("Y", np.pi / 2)

    def compile_word(first: list, mids: list[tuple[np.ndarray, np.ndarray]]):
        """first layer, then (E, K * mid) repeated: CNOT, mid, CNOT, mid, ..."""
        layers = [(idx(first[0]), idx(first[1]))]
        for a, b in mids:
            layers.append((idx(a @ kc), idx(b @ kt)))
        return tuple(layers)

    words: list[tuple[tuple[int, int], ...]] = []
    for a, b in itertools.product(range(24), repeat=2):
        words.append(((a, b),))
    tails = {
        "cnot": [[(s, t)] for s in s1 for t in s1],
        "iswap": [[(ry90, ry90), (s, t)] for s in s1 for t in s1],
        "swap": [[(ry90, ry90), (ry90, ry90), (qsim.I2, qsim.I2)]],
    }
    for tail_set in tails.values():
        for tail in tail_set:
            for a, b in itertools.product(range(24), repeat=2):
                words.append(compile_word([c1[a], c1[b]], tail))

    unitaries = np.array([_word_unitary(w, ent, c1) for w in words])
    elements = [TwoQubitClifford(w, len(w) - 1, u) for w, u in zip(words, unitaries)]
    return CliffordGroup(elements, unitaries)


def _word_unitary(word, ent, c1) -> np.ndarray:
    a, b = word[0]
    u = np.kron(c1[a], c1[b])
    for a, b in word[1:]:
        u = np.kron(c1[a], c1[b]) @ ent @ u
    return u
