import numpy as np
import pytest

from plaquette import qsim
from plaquette.device import AlphaTable, CRGateSpec, z_labels
from plaquette.schedule import run_schedule, schedule_unitary


def with_crosstalk(gate: CRGateSpec, values: dict) -> CRGateSpec:
    return CRGateSpec(
        gate.name, gate.control, gate.target, gate.spectators, gate.zx_rate_hz,
        gate.segment_duration_2pulse_s, gate.segment_duration_4pulse_s,
        AlphaTable(len(gate.frame), dict(values)), dict(gate.parity_tags), gate.zx_scale,
    )


def random_alphas(rng, scale=1e6) -> dict:
    labels = [lbl for lbl in z_labels(4) if lbl not in ("IIII", "ZIII")]
    return dict(zip(labels, rng.uniform(-scale, scale, len(labels))))


def simulated_string_phase(sched_builder, gate: CRGateSpec, device, label: str, alpha: float) -> float:
    """Phase (rad) picked up by one Z string in a full density-matrix run.

    Frame qubits start in |+>, the target in |0>. The simulated state is mapped
    back through the ideal propagator, leaving D rho0 D^dagger with
    D = exp(-i theta P / 2); theta is read from a coherence between basis
    states with opposite eigenvalues of P.
    """
    g = with_crosstalk(gate, {label: alpha})
    sched = sched_builder(g)
    labels = list(g.frame) + [g.target]
    rho0 = qsim.DensityMatrix.from_label("+" * len(g.frame) + "0")
    out = run_schedule(rho0, sched, device, labels, crosstalk=True)
    u0 = schedule_unitary(sched, labels, crosstalk=False)
    back = u0.conj().T @ out.elements @ u0
    n = len(labels)
    mask = qsim.PauliString(label + "I").z_mask()
    a = 0  # eigenvalue +1
    b = mask  # flip every Z position: eigenvalue (-1)^{weight}
    if bin(mask).count("1") % 2 == 0:
        b = 1 << (n - 1 - [i for i, c in enumerate(label) if c == "Z"][0])
    ratio = back[a, b] / rho0.elements[a, b]
    # D_aa D_bb^* = exp(-i theta (P_a - P_b) / 2) = exp(-i theta)
    return float(-np.angle(ratio))


def wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def simulated_frame_phases(sched_builder, gate: CRGateSpec, device, values: dict) -> np.ndarray:
    """Conditional phase of every frame basis state relative to |0...0>, full table at once.

    Same construction as ``simulated_string_phase``: returns phi_a - phi_0 where
    the effective diagonal is exp(-i phi_a) on frame state a.
    """
    g = with_crosstalk(gate, values)
    sched = sched_builder(g)
    labels = list(g.frame) + [g.target]
    n_frame = len(g.frame)
    rho0 = qsim.DensityMatrix.from_label("+" * n_frame + "0")
    out = run_schedule(rho0, sched, device, labels, crosstalk=True)
    u0 = schedule_unitary(sched, labels, crosstalk=False)
    back = u0.conj().T @ out.elements @ u0
    idx = np.arange(2**n_frame) << 1  # target bit stays 0
    return -np.angle(back[idx, 0] / rho0.elements[idx, 0])


def predicted_frame_phases(coefficients: dict, values: dict, n_frame: int) -> np.ndarray:
    """phi_a - phi_0 from frame_report coefficients: phi_a = sum_P 2 pi alpha_P c_P s_P(a) / 2."""
    states = np.arange(2**n_frame)
    phi = np.zeros(states.size)
    for lbl, a in values.items():
        mask = qsim.PauliString(lbl).z_mask()
        sign = 1 - 2 * (np.array([bin(s & mask).count("1") for s in states]) % 2)
        phi += np.pi * a * coefficients[lbl] * sign
    return phi - phi[0]


# --- acceptance report --------------------------------------------------------

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Collect one summary line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
