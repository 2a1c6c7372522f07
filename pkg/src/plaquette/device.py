"""Device parameters and CR crosstalk tables for the five-qubit plaquette."""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

DEVICE_ENV_VAR = "PLAQUETTE_DEVICE"
SENSITIVITY_HZ = 100e3
DEFAULT_P10 = 0.016
DEFAULT_P01 = 0.025
SINGLE_QUBIT_GATE_S = 50e-9


class DeviceError(ValueError):
    """Invalid device description."""


@dataclass
class QubitParams:
    label: str
    f01_hz: float
    t1_s: float
    t2_s: float
    readout_p10: float = DEFAULT_P10
    readout_p01: float = DEFAULT_P01

    def validate(self) -> None:
        where = f"qubit {self.label}"
        if self.t1_s <= 0:
            raise DeviceError(f"{where}: t1_s must be > 0")
        if self.t2_s <= 0:
            raise DeviceError(f"{where}: t2_s must be > 0")
        for name in ("readout_p10", "readout_p01"):
            p = getattr(self, name)
            if not 0 <= p < 0.5:
                raise DeviceError(f"{where}: {name} must be in [0, 0.5)")


def z_labels(n: int) -> list[str]:
    """All I/Z strings on ``n`` qubits in natural binary order (Z = 1, MSB first)."""
    return ["".join(p) for p in itertools.product("IZ", repeat=n)]


@dataclass
class AlphaTable:
    """Z-string strengths (Hz) for one CR frame: control followed by spectators."""

    n: int
    values: dict[str, float] = field(default_factory=dict)
    below_sensitivity: set[str] = field(default_factory=set)

    def validate(self, where: str = "alpha table") -> None:
        for label in list(self.values) + list(self.below_sensitivity):
            if len(label) != self.n or set(label) - {"I", "Z"}:
                raise DeviceError(f"{where}: bad Z-string label {label!r}")
        ident = "I" * self.n
        ctrl = "Z" + "I" * (self.n - 1)
        for fixed in (ident, ctrl):
            if self.values.get(fixed, 0.0) != 0.0:
                raise DeviceError(f"{where}: {fixed} must be 0 by convention")

    def get(self, label: str) -> float:
        return self.values.get(label, 0.0)

    def nonzero(self) -> dict[str, float]:
        return {k: v for k, v in self.values.items() if v != 0.0}

    def scaled(self, factor: float) -> "AlphaTable":
        return AlphaTable(self.n, {k: factor * v for k, v in self.values.items()}, set(self.below_sensitivity))


@dataclass
class CRGateSpec:
    name: str
    control: str
    target: str
    spectators: tuple[str, ...]
    zx_rate_hz: float
    segment_duration_2pulse_s: float
    segment_duration_4pulse_s: float
    crosstalk: AlphaTable
    parity_tags: dict[str, str] = field(default_factory=dict)
    zx_scale: float = 1.0

    @property
    def frame(self) -> tuple[str, ...]:
        """Qubits the crosstalk strings refer to, in character order."""
        return (self.control, *self.spectators)

    def parity(self, label: str) -> str:
        return self.parity_tags.get(label, "even")

    def validate(self, labels: set[str], n_qubits: int) -> None:
        where = f"gate {self.name}"
        involved = [self.control, self.target, *self.spectators]
        if len(set(involved)) != len(involved):
            raise DeviceError(f"{where}: control, target and spectators must be distinct")
        for q in involved:
            if q not in labels:
                raise DeviceError(f"{where}: unknown qubit {q}")
        if len(self.spectators) != n_qubits - 2:
            raise DeviceError(f"{where}: expected {n_qubits - 2} spectators")
        if self.zx_rate_hz <= 0:
            raise DeviceError(f"{where}: zx_rate_hz must be > 0")
        if self.segment_duration_2pulse_s <= 0 or self.segment_duration_4pulse_s <= 0:
            raise DeviceError(f"{where}: segment durations must be > 0")
        if self.crosstalk.n != len(self.frame):
            raise DeviceError(f"{where}: crosstalk table must span control + spectators")
        self.crosstalk.validate(where)
        for label, tag in self.parity_tags.items():
            if tag not in ("even", "odd"):
                raise DeviceError(f"{where}: parity tag for {label} must be even/odd")
            if len(label) != self.crosstalk.n or set(label) - {"I", "Z"}:
                raise DeviceError(f"{where}: bad parity-tag label {label!r}")


@dataclass
class DeviceModel:
    qubits: list[QubitParams]
    cr_gates: list[CRGateSpec]
    single_qubit_gate_duration_s: float = SINGLE_QUBIT_GATE_S
    assignment_integration_time_s: float = 1.248e-6

    def qubit(self, label: str) -> QubitParams:
        for q in self.qubits:
            if q.label == label:
                return q
        raise KeyError(label)

    def gate(self, name: str) -> CRGateSpec:
        for g in self.cr_gates:
            if g.name.lower() == name.lower():
                return g
        raise KeyError(name)

    @property
    def labels(self) -> list[str]:
        return [q.label for q in self.qubits]

    def validate(self) -> None:
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise DeviceError("duplicate qubit labels")
        for q in self.qubits:
            q.validate()
        names = [g.name for g in self.cr_gates]
        if len(set(names)) != len(names):
            raise DeviceError("duplicate gate names")
        for g in self.cr_gates:
            g.validate(set(labels), len(self.qubits))
        if self.single_qubit_gate_duration_s <= 0:
            raise DeviceError("single_qubit_gate_duration_s must be > 0")
        if self.assignment_integration_time_s <= 0:
            raise DeviceError("assignment_integration_time_s must be > 0")


def effective_assignment_fidelity(q: QubitParams) -> float:
    return 1 - (q.readout_p10 + q.readout_p01) / 2


# --- built-in plaquette ------------------------------------------------------

# (f01 GHz, T1 us, T2 us)
_QUBITS = {
    "D1": (4.79098, 35.1, 40.8),
    "D2": (4.80196, 46.9, 31.4),
    "D3": (4.89785, 56.1, 44.7),
    "D4": (4.94908, 48.5, 35.5),
    "S1": (4.65808, 54.3, 44.0),
}

# name: control, target, spectators, 2-pulse ns, 4-pulse ns, {string: kHz or None for epsilon}
_GATES = {
    "CR1": ("D1", "S1", ("D2", "D3", "D4"), 660, 740,
            {"IIIZ": -298, "IIZI": -348, "IZII": -129, "ZIIZ": None, "ZIZI": None}),
    "CR2": ("D2", "S1", ("D1", "D3", "D4"), 340, 580,
            {"IIIZ": -688, "IIZI": None, "IZII": -140, "ZIIZ": None, "ZIZI": -129}),
    "CR3": ("S1", "D3", ("D1", "D2", "D4"), 720, 820,
            {"IIIZ": -178, "IIZI": 130, "IZII": None, "ZIIZ": 113, "ZIZI": None}),
    "CR4": ("S1", "D4", ("D1", "D2", "D3"), 1010, 940,
            {"IIIZ": 640, "IIZI": None, "IZII": None, "ZIIZ": 105, "ZIZI": None}),
}

ECR2_ECHO_SLOTS = 1
ECR4_ECHO_SLOTS = 4


def segment_durations(total_2pulse_s: float, total_4pulse_s: float, slot_s: float = SINGLE_QUBIT_GATE_S):
    """CR segment lengths that make the echo schedules add up to the given totals."""
    seg2 = (total_2pulse_s - ECR2_ECHO_SLOTS * slot_s) / 2
    seg4 = (total_4pulse_s - ECR4_ECHO_SLOTS * slot_s) / 4
    return seg2, seg4


def default_plaquette() -> DeviceModel:
    qubits = [
        QubitParams(label, f * 1e9, t1 / 1e6, t2 / 1e6)
        for label, (f, t1, t2) in _QUBITS.items()
    ]
    gates = []
    for name, (ctrl, tgt, spect, ns2, ns4, table) in _GATES.items():
        seg2, seg4 = (x / 1e9 for x in segment_durations(ns2, ns4, SINGLE_QUBIT_GATE_S * 1e9))
        values = {k: (0.0 if v is None else v * 1e3) for k, v in table.items()}
        eps = {k for k, v in table.items() if v is None}
        gates.append(
            CRGateSpec(
                name=name,
                control=ctrl,
                target=tgt,
                spectators=spect,
                # ZX/2 coefficient giving a quarter turn over the two 2-pulse segments
                zx_rate_hz=1 / (4 * 2 * seg2),
                segment_duration_2pulse_s=seg2,
                segment_duration_4pulse_s=seg4,
                crosstalk=AlphaTable(4, values, eps),
                parity_tags={k: "even" for k in table},
            )
        )
    model = DeviceModel(qubits, gates)
    model.validate()
    return model


# --- serialisation -----------------------------------------------------------

_TOP_KEYS = {"qubits", "cr_gates", "single_qubit_gate_duration_s", "assignment_integration_time_s"}
_QUBIT_KEYS = {"label", "f01_hz", "t1_s", "t2_s", "readout_p10", "readout_p01"}
_GATE_KEYS = {
    "name", "control", "target", "spectators", "zx_rate_hz", "segment_duration_2pulse_s",
    "segment_duration_4pulse_s", "crosstalk_hz", "below_sensitivity", "parity_tags", "zx_scale",
}


def device_to_dict(model: DeviceModel) -> dict:
    return {
        "single_qubit_gate_duration_s": float(model.single_qubit_gate_duration_s),
        "assignment_integration_time_s": float(model.assignment_integration_time_s),
        "qubits": [
            {
                "label": q.label,
                "f01_hz": float(q.f01_hz),
                "t1_s": float(q.t1_s),
                "t2_s": float(q.t2_s),
                "readout_p10": float(q.readout_p10),
                "readout_p01": float(q.readout_p01),
            }
            for q in model.qubits
        ],
        "cr_gates": [
            {
                "name": g.name,
                "control": g.control,
                "target": g.target,
                "spectators": list(g.spectators),
                "zx_rate_hz": float(g.zx_rate_hz),
                "zx_scale": float(g.zx_scale),
                "segment_duration_2pulse_s": float(g.segment_duration_2pulse_s),
                "segment_duration_4pulse_s": float(g.segment_duration_4pulse_s),
                "crosstalk_hz": {k: float(v) for k, v in g.crosstalk.values.items()},
                "below_sensitivity": sorted(g.crosstalk.below_sensitivity),
                "parity_tags": dict(g.parity_tags),
            }
            for g in model.cr_gates
        ],
    }


def _check_keys(d, allowed: set, where: str, required: set | None = None) -> None:
    if not isinstance(d, dict):
        raise DeviceError(f"{where}: expected a mapping")
    unknown = set(d) - allowed
    if unknown:
        raise DeviceError(f"{where}: unknown keys {sorted(unknown)}")
    missing = (allowed if required is None else required) - set(d)
    if missing:
        raise DeviceError(f"{where}: missing keys {sorted(missing)}")


def _num(d: dict, key: str, where: str) -> float:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DeviceError(f"{where}: {key} must be a number")
    return float(v)


def device_from_dict(d: dict) -> DeviceModel:
    _check_keys(d, _TOP_KEYS, "device", required={"qubits", "cr_gates"})
    qubits = []
    for i, q in enumerate(d["qubits"]):
        where = f"qubits[{i}]"
        _check_keys(q, _QUBIT_KEYS, where, required={"label", "f01_hz", "t1_s", "t2_s"})
        where = f"qubit {q['label']}"
        qubits.append(
            QubitParams(
                label=str(q["label"]),
                f01_hz=_num(q, "f01_hz", where),
                t1_s=_num(q, "t1_s", where),
                t2_s=_num(q, "t2_s", where),
                readout_p10=_num(q, "readout_p10", where) if "readout_p10" in q else DEFAULT_P10,
                readout_p01=_num(q, "readout_p01", where) if "readout_p01" in q else DEFAULT_P01,
            )
        )
    gates = []
    for i, g in enumerate(d["cr_gates"]):
        optional = {"below_sensitivity", "parity_tags", "zx_scale"}
        _check_keys(g, _GATE_KEYS, f"cr_gates[{i}]", required=_GATE_KEYS - optional)
        where = f"gate {g['name']}"
        spect = tuple(str(s) for s in g["spectators"])
        xt = g["crosstalk_hz"] or {}
        if not isinstance(xt, dict):
            raise DeviceError(f"{where}: crosstalk_hz must be a mapping")
        values = {str(k): _num(xt, k, where) for k in xt}
        gates.append(
            CRGateSpec(
                name=str(g["name"]),
                control=str(g["control"]),
                target=str(g["target"]),
                spectators=spect,
                zx_rate_hz=_num(g, "zx_rate_hz", where),
                segment_duration_2pulse_s=_num(g, "segment_duration_2pulse_s", where),
                segment_duration_4pulse_s=_num(g, "segment_duration_4pulse_s", where),
                crosstalk=AlphaTable(len(spect) + 1, values, set(g.get("below_sensitivity") or [])),
                parity_tags={str(k): str(v) for k, v in (g.get("parity_tags") or {}).items()},
                zx_scale=_num(g, "zx_scale", where) if "zx_scale" in g else 1.0,
            )
        )
    model = DeviceModel(qubits, gates)
    if "single_qubit_gate_duration_s" in d:
        model.single_qubit_gate_duration_s = _num(d, "single_qubit_gate_duration_s", "device")
    if "assignment_integration_time_s" in d:
        model.assignment_integration_time_s = _num(d, "assignment_integration_time_s", "device")
    model.validate()
    return model


def save_device(model: DeviceModel, path) -> None:
    text = yaml.safe_dump(device_to_dict(model), sort_keys=False)
    Path(path).write_text(text)


def load_device(path) -> DeviceModel:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise DeviceError(f"cannot parse {path}: {exc}") from exc
    return device_from_dict(data)


def resolve_device(path=None) -> DeviceModel:
    """Explicit path, then $PLAQUETTE_DEVICE, then the built-in plaquette."""
    path = path or os.environ.get(DEVICE_ENV_VAR)
    return load_device(path) if path else default_plaquette()


def default_device_path() -> Path:
    return Path(__file__).parent / "data" / "default_device.yaml"
