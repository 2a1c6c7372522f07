"""Clifford randomized benchmarking on the simulated device."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import qsim
from ..analysis import RBResult, fit_rb_decay
from ..device import DeviceModel
from ..schedule import build_ecr, schedule_superop, schedule_unitary
from .clifford import CliffordGroup, one_qubit_group, single_qubit_cliffords, two_qubit_group

KINDS = ("single", "simultaneous", "two_qubit")


@dataclass
class RBConfig:
    kind: str = "single"
    target: str = "D1"  # qubit label (single) or gate name (two_qubit); unused for simultaneous
    variant: str = "two_pulse"
    lengths: tuple[int, ...] = (1, 5, 10, 20, 40, 60, 80, 100)
    n_sequences: int = 30
    shots: int = 1000
    seed: int = 0
    decoherence: bool = True
    crosstalk: bool = True
    depolarizing: float = 0.0  # injected average error per Clifford

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        m = np.asarray(self.lengths)
        if m.size < 2 or np.any(np.diff(m) <= 0) or m[0] < 1:
            raise ValueError("lengths must be ascending positive integers (at least two)")
        if self.n_sequences < 1 or self.shots < 1:
            raise ValueError("n_sequences and shots must be >= 1")
        if not 0 <= self.depolarizing < 1:
            raise ValueError("depolarizing error must be in [0, 1)")


@dataclass
class RBRun:
    config: RBConfig
    results: dict[str, RBResult] = field(default_factory=dict)  # keyed by qubit or gate
    per_sequence: dict[str, np.ndarray] = field(default_factory=dict)  # (lengths, sequences)


def unitary_superop(u: np.ndarray) -> np.ndarray:
    """Row-major superoperator of rho -> U rho U^dagger."""
    return np.kron(u, u.conj())


def depolarizing_superop(p: float, d: int) -> np.ndarray:
    """rho -> p rho + (1 - p) Tr(rho) I/d."""
    eye = np.eye(d).reshape(-1)
    return p * np.eye(d * d) + (1 - p) * np.outer(eye, eye) / d


def depolarizing_parameter(r: float, d: int) -> float:
    """Decay parameter of a depolarizing channel with average error ``r``."""
    return 1 - r * d / (d - 1)


def _idle_superop(device, labels, duration):
    n = len(labels)
    params = qsim.register_params(device, labels, n)
    return qsim.superoperator(lambda rho: qsim._idle_arr(rho, params, range(n), duration, n), n)


class _Benchmark:
    """Ideal unitaries and noisy superoperators for every group element."""

    def __init__(self, group: CliffordGroup, superops: np.ndarray, d: int):
        self.group = group
        self.superops = superops
        self.d = d

    def survival(self, rng: np.random.Generator, lengths, n_sequences: int, depol: np.ndarray | None):
        """Return probabilities (len(lengths), n_sequences) of ending in |0...0>."""
        size = len(self.group)
        d = self.d
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[0, 0] = 1
        out = np.empty((len(lengths), n_sequences))
        for li, m in enumerate(lengths):
            idx = rng.integers(0, size, size=(n_sequences, m))
            vec = np.broadcast_to(rho0.reshape(-1), (n_sequences, d * d)).copy()
            ideal = np.broadcast_to(np.eye(d, dtype=complex), (n_sequences, d, d)).copy()
            for step in range(m):
                k = idx[:, step]
                vec = np.einsum("bij,bj->bi", self.superops[k], vec)
                if depol is not None:
                    vec = vec @ depol.T
                ideal = self.group.unitaries[k] @ ideal
            inv = np.array([self.group.inverse_of(u) for u in ideal])
            vec = np.einsum("bij,bj->bi", self.superops[inv], vec)
            if depol is not None:
                vec = vec @ depol.T
            out[li] = np.clip(vec[:, 0].real, 0.0, 1.0)
        return out


def single_qubit_benchmark(device: DeviceModel | None, qubit: str, decoherence: bool = True) -> _Benchmark:
    group = one_qubit_group()
    ops = np.array([unitary_superop(u) for u in single_qubit_cliffords()])
    if decoherence and device is not None:
        idle = _idle_superop(device, [qubit], device.single_qubit_gate_duration_s)
        ops = idle @ ops
    return _Benchmark(group, ops, 2)


def two_qubit_benchmark(
    device: DeviceModel, gate_name: str, variant: str, decoherence: bool = True, crosstalk: bool = True
) -> _Benchmark:
    """Two-qubit Cliffords on (control, target) compiled over the ECR schedule.

    Spectators stay out of the register and are treated as ground-state Z
    eigenstates for the crosstalk phases.
    """
    gate = device.gate(gate_name)
    labels = [gate.control, gate.target]
    sched = build_ecr(gate, variant, 1, device.single_qubit_gate_duration_s)
    ent = schedule_unitary(sched, labels, crosstalk=False)
    group = two_qubit_group(ent)
    ent_op = schedule_superop(sched, device, labels, crosstalk=crosstalk, decoherence=decoherence)
    c1 = single_qubit_cliffords()
    local = np.array([unitary_superop(np.kron(a, b)) for a in c1 for b in c1])
    if decoherence:
        local = _idle_superop(device, labels, device.single_qubit_gate_duration_s) @ local
    ops = np.empty((len(group), 16, 16), dtype=complex)
    by_len: dict[int, list[int]] = {}
    for i, el in enumerate(group.elements):
        by_len.setdefault(len(el.layers), []).append(i)
    for n_layers, members in by_len.items():
        layers = np.array([[a * 24 + b for a, b in group.elements[i].layers] for i in members])
        acc = local[layers[:, 0]]
        for k in range(1, n_layers):
            acc = local[layers[:, k]] @ ent_op @ acc
        ops[members] = acc
    return _Benchmark(group, ops, 4)


def _sample_and_fit(bench: _Benchmark, config: RBConfig, rng: np.random.Generator):
    d = bench.d
    depol = None
    if config.depolarizing > 0:
        depol = depolarizing_superop(depolarizing_parameter(config.depolarizing, d), d)
    probs = bench.survival(rng, config.lengths, config.n_sequences, depol)
    counts = rng.binomial(config.shots, probs)
    surv = counts / config.shots
    mean = surv.mean(axis=1)
    if config.n_sequences > 1:
        se = surv.std(axis=1, ddof=1) / np.sqrt(config.n_sequences)
    else:
        se = np.sqrt(mean * (1 - mean) / config.shots)
    # floor the SE at the binomial limit so noiseless points keep finite weight
    floor = np.sqrt(np.maximum(mean * (1 - mean), 1 / config.shots) / (config.shots * config.n_sequences))
    se = np.maximum(se, floor)
    return fit_rb_decay(config.lengths, mean, se, d=d), surv


def run_rb(config: RBConfig, device: DeviceModel) -> RBRun:
    config.validate()
    run = RBRun(config)
    if config.kind == "single":
        targets = [config.target]
    elif config.kind == "simultaneous":
        targets = device.labels
    else:
        targets = [device.gate(config.target).name]
    children = np.random.SeedSequence(config.seed).spawn(len(targets))
    for name, child in zip(targets, children):
        rng = qsim.make_rng(child)
        if config.kind == "two_qubit":
            bench = two_qubit_benchmark(device, name, config.variant, config.decoherence, config.crosstalk)
        else:
            device.qubit(name)
            bench = single_qubit_benchmark(device, name, config.decoherence)
        res, surv = _sample_and_fit(bench, config, rng)
        run.results[name] = res
        run.per_sequence[name] = surv
    return run
