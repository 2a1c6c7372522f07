import json

import numpy as np
import pytest
from conftest import random_alphas, simulated_string_phase, with_crosstalk, wrap
from scipy.linalg import expm

from plaquette import qsim
from plaquette.device import default_plaquette, z_labels
from plaquette.schedule import (
    CRDrive,
    Pulse,
    PulseLayer,
    PulseSchedule,
    Segment,
    build_cnot,
    build_ecr,
    build_ecr_2pulse,
    build_ecr_4pulse,
    frame_report,
    layer,
    run_schedule,
    schedule_unitary,
)

DEV = default_plaquette()
ZX90 = expm(-1j * np.pi / 4 * np.kron(qsim.Z, qsim.X))
CNOT = np.eye(4)[[0, 1, 3, 2]]
CNOT_REV = np.eye(4)[[0, 3, 2, 1]]
GATE_LENGTHS_NS = {"CR1": (660, 740), "CR2": (340, 580), "CR3": (720, 820), "CR4": (1010, 940)}


def phase_free_distance(u, v):
    """1 - |Tr(U^dagger V)| / d: zero iff equal up to global phase."""
    return 1 - abs(np.trace(u.conj().T @ v)) / u.shape[0]


def pair_unitary(sched, gate, **kw):
    return schedule_unitary(sched, [gate.control, gate.target], crosstalk=False, **kw)


@pytest.mark.parametrize("name", ["CR1", "CR2", "CR3", "CR4"])
def test_durations_match_gate_table(name):
    g = DEV.gate(name)
    ns2, ns4 = GATE_LENGTHS_NS[name]
    assert build_ecr_2pulse(g).total_duration == pytest.approx(ns2 * 1e-9, abs=1e-15)
    assert build_ecr_4pulse(g).total_duration == pytest.approx(ns4 * 1e-9, abs=1e-15)


def test_cr2_lengths():
    g = DEV.gate("CR2")
    assert round(build_ecr_2pulse(g).total_duration * 1e9, 9) == 340
    assert round(build_ecr_4pulse(g).total_duration * 1e9, 9) == 580


@pytest.mark.parametrize("name", ["CR1", "CR4"])
def test_ecr2_with_correction_is_zx90(name):
    g = DEV.gate(name)
    u = pair_unitary(build_ecr_2pulse(g), g, include_corrections=True)
    assert phase_free_distance(u, ZX90) < 1e-9
    # without the correction the control carries an extra X_pi
    bare = pair_unitary(build_ecr_2pulse(g), g)
    assert phase_free_distance(bare, np.kron(qsim.X, qsim.I2) @ ZX90) < 1e-9


def test_ecr2_sign_flip_gives_negative_rotation():
    g = DEV.gate("CR2")
    u = pair_unitary(build_ecr_2pulse(g, sign=-1), g, include_corrections=True)
    assert phase_free_distance(u, ZX90.conj().T) < 1e-9
    assert build_ecr_2pulse(g, sign=-1).corrections == build_ecr_2pulse(g).corrections


@pytest.mark.parametrize("name", ["CR2", "CR3"])
def test_ecr4_ideal_is_zx90_on_pair_and_identity_on_spectators(name):
    g = DEV.gate(name)
    labels = [g.control, g.target, *g.spectators]
    u = schedule_unitary(build_ecr_4pulse(g), labels, crosstalk=False)
    assert phase_free_distance(u, np.kron(ZX90, np.eye(8))) < 1e-9


def test_ecr_variants_agree_on_pair():
    g = DEV.gate("CR3")
    u2 = pair_unitary(build_ecr_2pulse(g), g, include_corrections=True)
    u4 = pair_unitary(build_ecr_4pulse(g), g, include_corrections=True)
    assert phase_free_distance(u2, u4) < 1e-9


def test_ecr4_spectators_get_two_pulses():
    g = DEV.gate("CR1")
    sched = build_ecr_4pulse(g)
    for q in g.spectators:
        pulses = [p for s in sched.segments if isinstance(s.kind, PulseLayer) for p in s.kind.pulses if p.qubit == q]
        assert len(pulses) == 2 and all(p.axis == "X" and p.angle == np.pi for p in pulses)


def test_build_ecr_rejects_unknown_variant():
    with pytest.raises(ValueError):
        build_ecr(DEV.gate("CR1"), "three_pulse")


@pytest.mark.parametrize("variant", ["two_pulse", "four_pulse"])
@pytest.mark.parametrize("name", ["CR1", "CR2", "CR3", "CR4"])
def test_cnot_both_orientations(name, variant):
    g = DEV.gate(name)
    native = pair_unitary(build_cnot(g, g.control, variant), g)
    assert phase_free_distance(native, CNOT) < 1e-9
    rev = pair_unitary(build_cnot(g, g.target, variant), g)
    assert phase_free_distance(rev, CNOT_REV) < 1e-9
    assert phase_free_distance(native @ native, np.eye(4)) < 1e-8


def test_cnot_rejects_foreign_qubit():
    with pytest.raises(ValueError):
        build_cnot(DEV.gate("CR1"), "D4")


def test_cnot_density_matrix_path():
    g = DEV.gate("CR3")
    sched = build_cnot(g, "D3", "four_pulse")
    for label, expected in [("00", "00"), ("01", "11"), ("10", "10"), ("11", "01")]:
        # register order (S1, D3); D3 is the desired control
        rho = run_schedule(qsim.DensityMatrix.from_label(label), sched, DEV, ["S1", "D3"], crosstalk=False)
        assert rho.fidelity_pure(qsim.StateVector.from_label(expected).amplitudes) > 1 - 1e-9


def test_frame_report_ecr2_keeps_spectator_terms():
    g = DEV.gate("CR4")
    rep = frame_report(build_ecr_2pulse(g), g)
    cr_time = build_ecr_2pulse(g).cr_time
    assert rep.coefficients["IIIZ"] == pytest.approx(cr_time)
    assert rep.surviving["IIIZ"]
    assert rep.coefficients["ZIIZ"] == pytest.approx(0.0, abs=1e-18)


def test_frame_report_ecr4_cancels_single_spectator_terms():
    g = DEV.gate("CR4")
    rep = frame_report(build_ecr_4pulse(g), g)
    for lbl, c in rep.coefficients.items():
        if lbl == "IIII":
            continue
        if lbl[0] == "Z" or lbl.count("Z") != 2:
            assert abs(c) < 1e-12, lbl
        else:
            # two spectator flips leave the sign unchanged
            assert c == pytest.approx(build_ecr_4pulse(g).cr_time)
    for lbl in ("IIIZ", "IIZI", "IZII", "ZIIZ", "ZIZI", "ZZII"):
        assert not rep.surviving[lbl]


def test_frame_report_empty_schedule():
    rep = frame_report(PulseSchedule(()), DEV.gate("CR1"))
    assert set(rep.coefficients) == set(z_labels(4))
    assert all(v == 0 for v in rep.coefficients.values())


def test_frame_report_untouched_strings_equal_cr_time():
    g = DEV.gate("CR2")
    sched = PulseSchedule((Segment(CRDrive(g, 1, 0.1), 100e-9), Segment(CRDrive(g, -1, 0.1), 60e-9)))
    rep = frame_report(sched, g)
    assert all(v == pytest.approx(160e-9) for v in rep.coefficients.values())


def test_frame_report_odd_terms_follow_drive_sign():
    g = DEV.gate("CR4")
    g.parity_tags = dict(g.parity_tags, IIIZ="odd")
    rep = frame_report(build_ecr_2pulse(g), g)
    assert rep.coefficients["IIIZ"] == pytest.approx(0.0, abs=1e-18)
    g.parity_tags["IIIZ"] = "even"


def test_frame_report_rejects_untrackable_pulses():
    g = DEV.gate("CR1")
    sched = build_ecr_2pulse(g) + PulseSchedule((layer([Pulse("D2", "X", np.pi / 2)]),)) + build_ecr_2pulse(g)
    with pytest.raises(ValueError):
        frame_report(sched, g)


@pytest.mark.parametrize("variant", [build_ecr_2pulse, build_ecr_4pulse])
def test_frame_report_matches_density_matrix_phases(variant):
    rng = np.random.default_rng(12)
    g = DEV.gate("CR2")
    rep = frame_report(variant(g), g)
    alphas = random_alphas(rng)
    for lbl, a in alphas.items():
        sim = simulated_string_phase(variant, g, DEV, lbl, a)
        assert abs(wrap(sim - 2 * np.pi * a * rep.coefficients[lbl])) < 1e-8, lbl


def test_ecr4_spectator_identity_without_pair_terms():
    """Z-basis spectator states never change; superpositions survive unless two spectators share a string."""
    rng = np.random.default_rng(5)
    base = DEV.gate("CR1")
    alphas = random_alphas(rng)
    pair_terms = {lbl for lbl in alphas if lbl[0] == "I" and lbl.count("Z") == 2}
    g = with_crosstalk(base, {k: v for k, v in alphas.items() if k not in pair_terms})
    labels = [g.control, g.target, *g.spectators]
    sched = build_ecr_4pulse(g)
    for spect in ("+-+", "0+1", "rl-"):
        rho = qsim.DensityMatrix.from_label("+0" + spect)
        out = run_schedule(rho, sched, DEV, labels).reduced([2, 3, 4])
        assert out.fidelity_pure(qsim.StateVector.from_label(spect).amplitudes) >= 1 - 1e-9
    # the excluded strings do act
    g2 = with_crosstalk(base, {"IZZI": 4e5})
    rho = qsim.DensityMatrix.from_label("+0++0")
    out = run_schedule(rho, build_ecr_4pulse(g2), DEV, labels).reduced([2, 3, 4])
    assert out.fidelity_pure(qsim.StateVector.from_label("++0").amplitudes) < 0.999


def test_timeline_jsonl():
    g = DEV.gate("CR2")
    sched = build_ecr_2pulse(g)
    rows = [json.loads(line) for line in sched.to_jsonl().splitlines()]
    assert [r["kind"] for r in rows] == ["cr", "pulse", "cr"]
    assert rows[2]["start_s"] == pytest.approx(195e-9)
    assert [r["sign"] for r in rows] == [1, None, -1]
    assert sum(r["duration_s"] for r in rows) == pytest.approx(sched.total_duration)


def test_virtual_z_takes_no_time():
    assert layer([Pulse("D1", "Z", 0.3)]).duration == 0.0
    assert layer([Pulse("D1", "X", 0.3)]).duration == pytest.approx(50e-9)
    with pytest.raises(ValueError):
        Segment(PulseLayer(()), -1.0)
    with pytest.raises(ValueError):
        CRDrive(DEV.gate("CR1"), 2, 0.1)


def test_absent_spectator_tracked_classically():
    g = with_crosstalk(DEV.gate("CR4"), {"ZIIZ": 3e5})
    t = 200e-9
    sched = PulseSchedule((Segment(CRDrive(g, 1, 0.0), t),))
    pair = [g.control, g.target]
    u0 = schedule_unitary(sched, pair, crosstalk=True, absent_state={"D3": 0})
    u1 = schedule_unitary(sched, pair, crosstalk=True, absent_state={"D3": 1})
    # the absent D3 bit sets the sign of the control-Z rotation
    phi = 2 * np.pi * 3e5 * t
    expected = np.kron(np.diag([np.exp(-1j * phi), np.exp(1j * phi)]), qsim.I2)
    assert np.allclose(u0 @ u1.conj().T, expected, atol=1e-12)
    # a flip of the absent qubit during the schedule is remembered
    flip = PulseSchedule((layer([Pulse("D3", "X", np.pi)]),)) + sched
    assert np.allclose(schedule_unitary(flip, pair, absent_state={"D3": 0}), u1 @ np.eye(4), atol=1e-12)
