"""Weight-four ZZZZ / XXXX parity checks over all sixteen data input states."""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import qsim
from ..device import DeviceModel
from ..schedule import PulseSchedule, build_cnot, hadamard_pulses, layer, _Register, _run_arr

BASES = ("ZZZZ", "XXXX")
VARIANTS = ("two_pulse", "four_pulse")
XXXX_REALIZATIONS = ("data_conjugation", "syndrome_plus")
NOISE_KINDS = ("crosstalk", "decoherence", "assignment")


@dataclass
class ParityRunConfig:
    basis: str = "ZZZZ"
    ecr_variant: str = "four_pulse"
    shots: int = 20000
    seed: int = 0
    crosstalk: bool = True
    decoherence: bool = True
    assignment: bool = True
    gate_order: tuple[str, ...] = ("CR1", "CR2", "CR3", "CR4")
    xxxx_realization: str = "data_conjugation"

    def validate(self) -> None:
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}")
        if self.ecr_variant not in VARIANTS:
            raise ValueError(f"ecr_variant must be one of {VARIANTS}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.xxxx_realization not in XXXX_REALIZATIONS:
            raise ValueError(f"xxxx_realization must be one of {XXXX_REALIZATIONS}")
        if len(self.gate_order) != 4:
            raise ValueError("gate_order must list four CR gates")

    def with_noise(self, kinds) -> "ParityRunConfig":
        """Copy with exactly the named noise sources enabled."""
        kinds = set(kinds)
        unknown = kinds - set(NOISE_KINDS)
        if unknown:
            raise ValueError(f"unknown noise kinds {sorted(unknown)}")
        d = asdict(self)
        d.update({k: k in kinds for k in NOISE_KINDS})
        d["gate_order"] = tuple(d["gate_order"])
        return ParityRunConfig(**d)


@dataclass
class StateResult:
    label: str  # data-qubit preparation, e.g. "0110" or "+--+"
    ideal_parity: int
    p_correct: float
    se: float
    p_exact: float  # probability of a correct readout before shot sampling


@dataclass
class ParityResult:
    config: ParityRunConfig
    states: list[StateResult] = field(default_factory=list)

    @property
    def p_values(self) -> np.ndarray:
        return np.array([s.p_correct for s in self.states])

    @property
    def mean(self) -> float:
        return float(self.p_values.mean())

    @property
    def std(self) -> float:
        return float(self.p_values.std(ddof=1))

    def summary(self) -> dict:
        return {
            "basis": self.config.basis,
            "ecr_variant": self.config.ecr_variant,
            "shots": self.config.shots,
            "seed": self.config.seed,
            "mean_p_correct": self.mean,
            "std_p_correct": self.std,
            "min_p_correct": float(self.p_values.min()),
            "max_p_correct": float(self.p_values.max()),
        }


def standard_error(p: float, shots: int) -> float:
    """Binomial standard error of an estimated probability."""
    return float(np.sqrt(p * (1 - p) / shots))


def plaquette_layout(device: DeviceModel, gate_order) -> tuple[list[str], str]:
    """Data qubits (in gate order) and the syndrome qubit shared by every gate."""
    gates = [device.gate(g) for g in gate_order]
    pairs = [{g.control, g.target} for g in gates]
    common = set.intersection(*pairs)
    if len(common) != 1:
        raise ValueError("gates do not share a single syndrome qubit")
    syndrome = common.pop()
    data = [next(iter(p - {syndrome})) for p in pairs]
    if len(set(data)) != len(data):
        raise ValueError("gates must touch four distinct data qubits")
    return data, syndrome


def parity_schedule(config: ParityRunConfig, device: DeviceModel) -> PulseSchedule:
    data, syndrome = plaquette_layout(device, config.gate_order)
    slot = device.single_qubit_gate_duration_s
    sched = PulseSchedule(())
    syndrome_plus = config.basis == "XXXX" and config.xxxx_realization == "syndrome_plus"
    if syndrome_plus:
        sched = sched + PulseSchedule((layer(hadamard_pulses(syndrome), slot),))
    for name, q in zip(config.gate_order, data):
        gate = device.gate(name)
        if syndrome_plus:
            sched = sched + build_cnot(gate, syndrome, config.ecr_variant, slot)
        elif config.basis == "XXXX":
            h = PulseSchedule((layer(hadamard_pulses(q), slot),))
            sched = sched + h + build_cnot(gate, q, config.ecr_variant, slot) + h
        else:
            sched = sched + build_cnot(gate, q, config.ecr_variant, slot)
    if syndrome_plus:
        sched = sched + PulseSchedule((layer(hadamard_pulses(syndrome), slot),))
    return sched


def input_labels(basis: str) -> list[str]:
    chars = "01" if basis == "ZZZZ" else "+-"
    return ["".join(c) for c in itertools.product(chars, repeat=4)]


def ideal_parity(label: str) -> int:
    return sum(c in "1-" for c in label) % 2


def _initial_states(labels: list[str], syndrome_label: str) -> np.ndarray:
    return np.array([qsim.DensityMatrix.from_label(lbl + syndrome_label).elements for lbl in labels])


def syndrome_one_probabilities(config: ParityRunConfig, device: DeviceModel) -> tuple[list[str], np.ndarray]:
    """Probability that the syndrome ends in |1> for each of the sixteen inputs."""
    config.validate()
    data, syndrome = plaquette_layout(device, config.gate_order)
    labels = data + [syndrome]
    n = len(labels)
    inputs = input_labels(config.basis)
    rho = _initial_states(inputs, "0")
    sched = parity_schedule(config, device)
    params = qsim.register_params(device, labels, n) if config.decoherence else None
    rho = _run_arr(rho, sched, _Register(labels), params, config.crosstalk, config.decoherence)
    idx = np.arange(2**n)
    one = (idx & 1).astype(bool)  # syndrome is the last register qubit
    diag = np.einsum("bii->bi", rho).real
    p1 = np.clip(diag[:, one].sum(axis=1), 0.0, 1.0)
    return inputs, p1


def run_parity(config: ParityRunConfig, device: DeviceModel) -> ParityResult:
    inputs, p1 = syndrome_one_probabilities(config, device)
    _, syndrome = plaquette_layout(device, config.gate_order)
    sq = device.qubit(syndrome)
    p10, p01 = (sq.readout_p10, sq.readout_p01) if config.assignment else (0.0, 0.0)
    children = np.random.SeedSequence(config.seed).spawn(len(inputs))
    result = ParityResult(config)
    for label, p, child in zip(inputs, p1, children):
        rng = qsim.make_rng(child)
        # sample ideal outcomes from a one-qubit stand-in with the same populations
        stand_in = qsim.DensityMatrix(1, np.diag([1 - p, p]).astype(complex))
        bits = qsim.measure_z(stand_in, 0, config.shots, rng=rng)
        u = rng.random(config.shots)
        flip = np.where(bits == 1, u < p01, u < p10)
        read = bits ^ flip.astype(np.int8)
        target = ideal_parity(label)
        p_c = float(np.mean(read == target))
        p_read1 = p * (1 - p01) + (1 - p) * p10
        p_exact = p_read1 if target == 1 else 1 - p_read1
        result.states.append(StateResult(label, target, p_c, standard_error(p_c, config.shots), float(p_exact)))
    return result
