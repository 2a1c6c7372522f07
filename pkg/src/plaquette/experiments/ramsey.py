"""CR Ramsey interferometry on spectator qubits and the full 24-entry zeta sweep."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import qsim
from ..analysis import FrequencyExtractionError, ZetaTable, extract_frequency, zeta_label, zeta_rows
from ..device import CRGateSpec, DeviceModel

DEFAULT_DETUNING_HZ = 2e6
DEFAULT_MAX_DELAY_S = 33e-6
DEFAULT_POINTS = 256


@dataclass
class RamseyTrace:
    gate: str
    measured: str
    conditioning: str  # bits of the other frame qubits, in frame order
    label: str  # e.g. "00^1": conditioning bits with ^ at the measured position
    delays: np.ndarray
    signal: np.ndarray
    cr_on: bool
    detuning_hz: float


def _batched_1q(rho: np.ndarray, ops: np.ndarray, q: int, n: int) -> np.ndarray:
    """Apply a per-batch 2x2 operator (B, 2, 2) as K rho K^dagger on qubit ``q``."""
    b = rho.shape[0]
    t = rho.reshape((b,) + (2,) * (2 * n))
    t = np.moveaxis(t, (1 + q, 1 + n + q), (1, 2))
    t = np.einsum("bij,bjk...->bik...", ops, t)
    t = np.einsum("bij,bkj...->bki...", ops.conj(), t)
    return np.moveaxis(t, (1, 2), (1 + q, 1 + n + q)).reshape(rho.shape)


def _idle_batched(rho: np.ndarray, params, delays: np.ndarray, n: int) -> np.ndarray:
    for q, p in enumerate(params):
        gamma = 1 - np.exp(-delays / p.t1_s)
        rate = 1 / p.t2_s - 1 / (2 * p.t1_s)
        lam = 1 - np.exp(-2 * delays * max(rate, 0.0))
        zero = np.zeros_like(delays)
        one = np.ones_like(delays)
        channels = (
            [np.stack([[one, zero], [zero, np.sqrt(1 - gamma)]]), np.stack([[zero, np.sqrt(gamma)], [zero, zero]])],
            [np.stack([[one, zero], [zero, np.sqrt(1 - lam)]]), np.stack([[zero, zero], [zero, np.sqrt(lam)]])],
        )
        for kraus in channels:
            out = np.zeros_like(rho)
            for k in kraus:
                out += _batched_1q(rho, np.moveaxis(k, -1, 0).astype(complex), q, n)
            rho = out
    return rho


def _closing_pulses(phi: np.ndarray) -> np.ndarray:
    """pi/2 rotations about the in-plane axis at angle ``phi`` (one per delay)."""
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    u = np.empty(phi.shape + (2, 2), dtype=complex)
    u[:, 0, 0] = c
    u[:, 1, 1] = c
    u[:, 0, 1] = -1j * s * np.exp(-1j * phi)
    u[:, 1, 0] = -1j * s * np.exp(1j * phi)
    return u


def run_cr_ramsey(
    gate: CRGateSpec,
    measured: str,
    conditioning: str,
    cr_on: bool,
    device: DeviceModel,
    *,
    detuning_hz: float = DEFAULT_DETUNING_HZ,
    n_points: int = DEFAULT_POINTS,
    max_delay_s: float = DEFAULT_MAX_DELAY_S,
    decoherence: bool = True,
) -> RamseyTrace:
    """Ramsey fringe of ``measured`` with the other frame qubits in the ``conditioning`` basis state.

    With ``cr_on`` the gate's Z-crosstalk acts for the whole delay. The closing
    pi/2 pulse phase advances at ``detuning_hz``, so the fringe oscillates at the
    detuning plus the measured qubit's frequency shift.
    """
    frame = list(gate.frame)
    if measured not in gate.spectators:
        raise ValueError(f"{measured} is not a spectator of {gate.name}")
    if len(conditioning) != len(frame) - 1 or set(conditioning) - {"0", "1"}:
        raise ValueError(f"conditioning must be {len(frame) - 1} bits")
    n = len(frame)
    pos = frame.index(measured)
    ket = conditioning[:pos] + "+" + conditioning[pos:]
    delays = np.linspace(0.0, max_delay_s, n_points)
    rho0 = qsim.DensityMatrix.from_label(ket).elements
    rho = np.broadcast_to(rho0, (n_points,) + rho0.shape).copy()
    if cr_on:
        eta = qsim.diagonal_energies(gate.crosstalk.values, n)
        d = np.exp(-2j * np.pi * delays[:, None] * eta[None, :])
        rho = rho * d[:, :, None] * d.conj()[:, None, :]
    if decoherence:
        rho = _idle_batched(rho, qsim.register_params(device, frame, n), delays, n)
    keep = [q for q in range(n) if q != pos]
    t = rho.reshape((n_points,) + (2,) * (2 * n))
    for k, q in enumerate(sorted(keep, reverse=True)):
        t = np.trace(t, axis1=1 + q, axis2=1 + q + (n - k))
    red = t.reshape(n_points, 2, 2)
    u = _closing_pulses(-(2 * np.pi * detuning_hz * delays + np.pi / 2))
    red = u @ red @ u.conj().transpose(0, 2, 1)
    signal = (red[:, 0, 0] - red[:, 1, 1]).real
    label = zeta_label(pos + 1, conditioning)
    return RamseyTrace(gate.name, measured, conditioning, label, delays, signal, cr_on, detuning_hz)


def run_full_zeta_sweep(gate: CRGateSpec, device: DeviceModel, **kwargs) -> ZetaTable:
    """24 conditional frequency shifts (CR on minus CR off) in zeta_rows() order."""
    if len(gate.spectators) != 3:
        raise ValueError("zeta sweep needs exactly three spectators")
    values = []
    for pos, bits in zeta_rows():
        measured = gate.frame[pos - 1]
        freqs = []
        for cr_on in (True, False):
            trace = run_cr_ramsey(gate, measured, bits, cr_on, device, **kwargs)
            try:
                freqs.append(extract_frequency(trace).frequency)
            except FrequencyExtractionError as exc:
                state = "on" if cr_on else "off"
                raise FrequencyExtractionError(
                    f"{gate.name} trace {trace.label} (CR {state}): {exc}"
                ) from exc
        values.append(freqs[0] - freqs[1])
    return ZetaTable(gate.name, np.array(values))
