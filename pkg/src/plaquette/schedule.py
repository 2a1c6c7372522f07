"""Pulse schedules for echoed cross-resonance gates and their execution."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import qsim
from .device import SINGLE_QUBIT_GATE_S, CRGateSpec, z_labels

ECR2_SEGMENT_ANGLE = np.pi / 4  # ZX rotation per segment, two segments per gate
ECR4_SEGMENT_ANGLE = np.pi / 8  # four segments per gate


@dataclass(frozen=True)
class Pulse:
    qubit: str
    axis: str
    angle: float

    def matrix(self) -> np.ndarray:
        return qsim.rotation(self.axis, self.angle)


@dataclass(frozen=True, eq=False)
class CRDrive:
    gate: CRGateSpec
    sign: int
    zx_angle: float

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("CR drive sign must be +1 or -1")


@dataclass(frozen=True)
class PulseLayer:
    """Single-qubit rotations played in one slot; pulses on one qubit apply in order."""

    pulses: tuple[Pulse, ...]

    @property
    def virtual(self) -> bool:
        return all(p.axis == "Z" for p in self.pulses)


@dataclass(frozen=True)
class Idle:
    pass


SegmentKind = Union[CRDrive, PulseLayer, Idle]


@dataclass(frozen=True, eq=False)
class Segment:
    kind: SegmentKind
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("segment duration must be >= 0")


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    segments: tuple[Segment, ...]
    corrections: tuple[Pulse, ...] = ()

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def cr_time(self) -> float:
        return sum(s.duration for s in self.segments if isinstance(s.kind, CRDrive))

    def __add__(self, other: "PulseSchedule") -> "PulseSchedule":
        return PulseSchedule(self.segments + other.segments, other.corrections)

    def qubits(self) -> list[str]:
        out: list[str] = []
        for seg in self.segments:
            names = []
            if isinstance(seg.kind, CRDrive):
                names = [seg.kind.gate.control, seg.kind.gate.target]
            elif isinstance(seg.kind, PulseLayer):
                names = [p.qubit for p in seg.kind.pulses]
            out += [q for q in names if q not in out]
        return out

    def timeline(self) -> list[dict]:
        rows, t = [], 0.0
        for seg in self.segments:
            row = {"start_s": t, "duration_s": seg.duration}
            k = seg.kind
            if isinstance(k, CRDrive):
                row.update(kind="cr", gate=k.gate.name, qubits=[k.gate.control, k.gate.target],
                           sign=k.sign, zx_angle=k.zx_angle)
            elif isinstance(k, PulseLayer):
                row.update(kind="pulse", qubits=sorted({p.qubit for p in k.pulses}),
                           pulses=[[p.qubit, p.axis, p.angle] for p in k.pulses], sign=None)
            else:
                row.update(kind="idle", qubits=[], sign=None)
            rows.append(row)
            t += seg.duration
        return rows

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.timeline())


def layer(pulses: Sequence[Pulse], slot_s: float = SINGLE_QUBIT_GATE_S) -> Segment:
    lay = PulseLayer(tuple(pulses))
    return Segment(lay, 0.0 if lay.virtual else slot_s)


def _cr(gate: CRGateSpec, sign: int, angle: float, duration: float) -> Segment:
    return Segment(CRDrive(gate, sign, angle * gate.zx_scale), duration)


def _xpi(qubit: str) -> Pulse:
    return Pulse(qubit, "X", np.pi)


def build_ecr_2pulse(gate: CRGateSpec, sign: int = 1, slot_s: float = SINGLE_QUBIT_GATE_S) -> PulseSchedule:
    """CR(+) / X_pi on control / CR(-): ZX_90 followed by a residual X_pi on the control.

    The residual is returned in ``corrections``; applying it restores a bare ZX_90.
    """
    t = gate.segment_duration_2pulse_s
    segs = (
        _cr(gate, sign, ECR2_SEGMENT_ANGLE, t),
        layer([_xpi(gate.control)], slot_s),
        _cr(gate, -sign, ECR2_SEGMENT_ANGLE, t),
    )
    return PulseSchedule(segs, corrections=(_xpi(gate.control),))


def build_ecr_4pulse(gate: CRGateSpec, sign: int = 1, slot_s: float = SINGLE_QUBIT_GATE_S) -> PulseSchedule:
    """Two half-angle 2-pulse cores separated and closed by X_pi on every spectator.

    The second core runs with opposite drive signs so that, together with the
    control echoes, it adds to the first; the net gate is ZX_90 with no residual.
    """
    t = gate.segment_duration_4pulse_s
    spect = layer([_xpi(q) for q in gate.spectators], slot_s)
    segs = (
        _cr(gate, sign, ECR4_SEGMENT_ANGLE, t),
        layer([_xpi(gate.control)], slot_s),
        _cr(gate, -sign, ECR4_SEGMENT_ANGLE, t),
        spect,
        _cr(gate, -sign, ECR4_SEGMENT_ANGLE, t),
        layer([_xpi(gate.control)], slot_s),
        _cr(gate, sign, ECR4_SEGMENT_ANGLE, t),
        spect,
    )
    return PulseSchedule(segs)


def build_ecr(gate: CRGateSpec, variant: str, sign: int = 1, slot_s: float = SINGLE_QUBIT_GATE_S) -> PulseSchedule:
    if variant in ("two_pulse", "2pulse"):
        return build_ecr_2pulse(gate, sign, slot_s)
    if variant in ("four_pulse", "4pulse"):
        return build_ecr_4pulse(gate, sign, slot_s)
    raise ValueError(f"unknown ECR variant {variant!r}")


def hadamard_pulses(qubit: str) -> list[Pulse]:
    # Y_90 then X_180 equals H up to global phase
    return [Pulse(qubit, "Y", np.pi / 2), Pulse(qubit, "X", np.pi)]


def build_cnot(
    gate: CRGateSpec,
    desired_control: str,
    variant: str = "four_pulse",
    slot_s: float = SINGLE_QUBIT_GATE_S,
) -> PulseSchedule:
    """CNOT from the ECR core: (S^dag on control, X_-90 on target) after ZX_90.

    A CNOT against the native CR direction is conjugated by Hadamards on both qubits.
    """
    if desired_control not in (gate.control, gate.target):
        raise ValueError(f"{desired_control} is not part of {gate.name}")
    core = build_ecr(gate, variant, 1, slot_s)
    c, t = gate.control, gate.target
    post = list(core.corrections) + [Pulse(c, "Z", -np.pi / 2), Pulse(t, "X", -np.pi / 2)]
    segs = list(core.segments)
    if desired_control != gate.control:
        segs.insert(0, layer(hadamard_pulses(c) + hadamard_pulses(t), slot_s))
        post += hadamard_pulses(c) + hadamard_pulses(t)
    segs.append(layer(post, slot_s))
    return PulseSchedule(tuple(segs))


# --- Pauli-frame sign tracking ----------------------------------------------


@dataclass
class FrameReport:
    gate: str
    coefficients: dict[str, float] = field(default_factory=dict)

    @property
    def surviving(self) -> dict[str, bool]:
        return {k: abs(v) > 1e-12 for k, v in self.coefficients.items()}

    def phases(self, alphas: dict[str, float]) -> dict[str, float]:
        """Accumulated rotation angle 2*pi*alpha*coefficient per string (rad)."""
        return {k: 2 * np.pi * alphas.get(k, 0.0) * c for k, c in self.coefficients.items()}


def _flip_effect(p: Pulse) -> bool:
    """True if the pulse inverts Z on its qubit; raise if it is not trackable."""
    if p.axis == "Z":
        return False
    turns = (p.angle / np.pi) % 2
    if min(abs(turns), abs(turns - 2)) < 1e-12:
        return False
    if abs(turns - 1) < 1e-12:
        return True
    raise ValueError(f"cannot track {p.axis} rotation by {p.angle} on {p.qubit}")


def frame_report(sched: PulseSchedule, gate: CRGateSpec) -> FrameReport:
    """Signed CR-on time (s) accumulated by every Z string of ``gate``'s frame."""
    frame = gate.frame
    labels = z_labels(len(frame))
    flipped = {q: False for q in frame}
    coeff = {lbl: 0.0 for lbl in labels}
    for seg in sched.segments:
        k = seg.kind
        if isinstance(k, PulseLayer):
            for p in k.pulses:
                if p.qubit in flipped and _flip_effect(p):
                    flipped[p.qubit] = not flipped[p.qubit]
        elif isinstance(k, CRDrive):
            if k.gate.name != gate.name:
                raise ValueError(f"schedule drives {k.gate.name}, report requested for {gate.name}")
            for lbl in labels:
                s = 1
                for q, ch in zip(frame, lbl):
                    if ch == "Z" and flipped[q]:
                        s = -s
                if gate.parity(lbl) == "odd":
                    s *= k.sign
                coeff[lbl] += s * seg.duration
    return FrameReport(gate.name, coeff)


# --- execution ---------------------------------------------------------------


def _zx_unitary(angle: float) -> np.ndarray:
    zx = np.kron(qsim.Z, qsim.X)
    return np.cos(angle / 2) * np.eye(4) - 1j * np.sin(angle / 2) * zx


class _Register:
    """Maps device labels to register positions; tracks absent qubits classically."""

    def __init__(self, labels: Sequence[str], absent_state: dict[str, int] | None = None):
        self.labels = list(labels)
        self.index = {q: i for i, q in enumerate(self.labels)}
        self.absent = dict(absent_state or {})

    def bit(self, q: str) -> int:
        return self.absent.get(q, 0)

    def pulse(self, p: Pulse):
        if p.qubit in self.index:
            return self.index[p.qubit]
        if _flip_effect(p):
            self.absent[p.qubit] = 1 - self.bit(p.qubit)
        return None


def crosstalk_phases(gate: CRGateSpec, reg: _Register, sign: int, duration: float) -> np.ndarray | None:
    """Per-basis-state phases of the CR crosstalk on the register, absent qubits as Z eigenstates."""
    n = len(reg.labels)
    present = [q for q in gate.frame if q in reg.index]
    coeffs: dict[str, float] = {}
    for lbl, value in gate.crosstalk.values.items():
        if value == 0.0:
            continue
        if gate.parity(lbl) == "odd":
            value *= sign
        for q, ch in zip(gate.frame, lbl):
            if ch == "Z" and q not in reg.index and reg.bit(q):
                value = -value
        sub = "".join(ch for q, ch in zip(gate.frame, lbl) if q in reg.index)
        if sub and "Z" in sub:
            coeffs[sub] = coeffs.get(sub, 0.0) + value
    if not coeffs:
        return None
    eta = qsim.diagonal_energies(coeffs, len(present))
    full = qsim._embed_diagonal(eta, [reg.index[q] for q in present], n)
    return 2 * np.pi * duration * full


def _run_arr(rho, sched, reg: _Register, params, crosstalk: bool, decoherence: bool):
    n = len(reg.labels)
    for seg in sched.segments:
        k = seg.kind
        if isinstance(k, CRDrive):
            g = k.gate
            u = _zx_unitary(k.sign * k.zx_angle)
            rho = qsim._apply_unitary_arr(rho, u, [reg.index[g.control], reg.index[g.target]], n)
            if crosstalk:
                ph = crosstalk_phases(g, reg, k.sign, seg.duration)
                if ph is not None:
                    rho = qsim._apply_phases_arr(rho, ph)
        elif isinstance(k, PulseLayer):
            for p in k.pulses:
                q = reg.pulse(p)
                if q is not None:
                    rho = qsim._apply_unitary_arr(rho, p.matrix(), [q], n)
        if decoherence and seg.duration > 0:
            rho = qsim._idle_arr(rho, params, range(n), seg.duration, n)
    return rho


def run_schedule(
    state: qsim.DensityMatrix,
    sched: PulseSchedule,
    device,
    labels: Sequence[str],
    *,
    crosstalk: bool = True,
    decoherence: bool = False,
    absent_state: dict[str, int] | None = None,
) -> qsim.DensityMatrix:
    """Simulate ``sched`` on a register whose positions carry device ``labels``.

    Crosstalk is active only during CR segments. Decoherence is applied to every
    register qubit once per segment for that segment's duration. Frame qubits not
    in the register are treated as Z eigenstates (``absent_state``, default 0).
    """
    reg = _Register(labels, absent_state)
    params = qsim.register_params(device, labels, state.n_qubits) if decoherence else None
    rho = _run_arr(state.elements, sched, reg, params, crosstalk, decoherence)
    return qsim.DensityMatrix(state.n_qubits, rho)


def schedule_superop(sched, device, labels, *, crosstalk=True, decoherence=False, absent_state=None):
    reg_labels = list(labels)
    params = qsim.register_params(device, reg_labels, len(reg_labels)) if decoherence else None

    def fn(batch):
        reg = _Register(reg_labels, absent_state)
        return _run_arr(batch, sched, reg, params, crosstalk, decoherence)

    return qsim.superoperator(fn, len(reg_labels))


def schedule_unitary(sched, labels, *, crosstalk=True, absent_state=None, include_corrections=False) -> np.ndarray:
    """Noiseless propagator of ``sched`` on the register ``labels``."""
    n = len(labels)
    reg = _Register(labels, absent_state)
    u = np.eye(2**n, dtype=complex)
    ops = list(sched.segments)
    if include_corrections and sched.corrections:
        ops.append(Segment(PulseLayer(tuple(sched.corrections)), 0.0))
    for seg in ops:
        k = seg.kind
        if isinstance(k, CRDrive):
            g = k.gate
            u = _embed(_zx_unitary(k.sign * k.zx_angle), [reg.index[g.control], reg.index[g.target]], n) @ u
            if crosstalk:
                ph = crosstalk_phases(g, reg, k.sign, seg.duration)
                if ph is not None:
                    u = np.exp(-1j * ph)[:, None] * u
        elif isinstance(k, PulseLayer):
            for p in k.pulses:
                q = reg.pulse(p)
                if q is not None:
                    u = _embed(p.matrix(), [q], n) @ u
    return u


def _embed(u: np.ndarray, targets: list[int], n: int) -> np.ndarray:
    """Full-register matrix of ``u`` acting on ``targets``."""
    dim = 2**n
    eye = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * n)
    k = len(targets)
    u_t = u.reshape((2,) * (2 * k))
    axes = [1 + q for q in targets]
    out = np.tensordot(u_t, eye, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(dim, dim).T
