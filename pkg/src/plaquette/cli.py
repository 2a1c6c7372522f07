"""Command-line front end: ``plaquette <subcommand> [flags]``.

Every run writes its data files plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .device import DEVICE_ENV_VAR, DeviceError, device_to_dict, resolve_device
from .experiments.parity import NOISE_KINDS, ParityRunConfig, run_parity
from .experiments.ramsey import (
    DEFAULT_DETUNING_HZ,
    DEFAULT_MAX_DELAY_S,
    DEFAULT_POINTS,
    run_cr_ramsey,
    run_full_zeta_sweep,
)
from .experiments.rb import RBConfig, run_rb
from .experiments.readout import run_readout_cal

log = logging.getLogger("plaquette")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
VARIANTS = {"2pulse": "two_pulse", "4pulse": "four_pulse"}


class UsageError(Exception):
    pass


# --- output helpers -------------------------------------------------------------


@contextlib.contextmanager
def atomic_path(path: Path):
    """Yield a temporary path in the destination directory; rename on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_json(path: Path, obj) -> None:
    with atomic_path(path) as tmp:
        tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with atomic_path(path) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


class Run:
    """Collects outputs of one subcommand and writes the manifest last."""

    def __init__(self, args, out: Path):
        self.args = args
        self.out = out
        self.outputs: list[str] = []
        self.start = time.time()

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def finish(self, device=None, seed=None) -> None:
        config = {k: v for k, v in sorted(vars(self.args).items()) if k != "func" and not k.startswith("_")}
        manifest = {
            "subcommand": self.args.command,
            "argv": getattr(self.args, "_argv", sys.argv[1:]),
            "config": config,
            "device": device_to_dict(device) if device is not None else None,
            "seed": seed,
            "version": __version__,
            "outputs": sorted(self.outputs),
            "wall_clock_s": time.time() - self.start,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        write_json(self.out / "manifest.json", manifest)


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _device(args):
    try:
        return resolve_device(args.device)
    except (OSError, DeviceError) as exc:
        raise UsageError(f"device: {exc}") from exc


def _gate(device, name: str):
    try:
        return device.gate(name)
    except KeyError:
        raise UsageError(f"unknown gate {name!r}; device has {[g.name for g in device.cr_gates]}") from None


def _noise(text: str, allowed) -> set[str]:
    text = text.strip().lower()
    if text == "all":
        return set(allowed)
    if text in ("", "none"):
        return set()
    kinds = {k.strip() for k in text.split(",")}
    bad = kinds - set(allowed)
    if bad:
        raise UsageError(f"unknown noise kinds {sorted(bad)}; choose from {list(allowed)}, all, none")
    return kinds


# --- subcommands -------------------------------------------------------------------


def cmd_parity(args) -> int:
    device = _device(args)
    out = _out_dir(args.out)
    order = tuple(g.strip().upper() for g in args.gate_order.split(","))
    for g in order:
        _gate(device, g)
    cfg = ParityRunConfig(
        basis=args.basis.upper(),
        ecr_variant=VARIANTS[args.variant],
        shots=args.shots,
        seed=args.seed,
        gate_order=order,
        xxxx_realization=args.xxxx_realization,
    ).with_noise(_noise(args.noise, NOISE_KINDS))
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = run_parity(cfg, device)
    run = Run(args, out)
    write_csv(
        run.path("parity_states.csv"),
        ["input_state", "ideal_parity", "p_correct", "se"],
        [[s.label, s.ideal_parity, s.p_correct, s.se] for s in res.states],
    )
    write_json(run.path("parity_summary.json"), res.summary())
    run.finish(device, args.seed)
    log.info("mean P_C = %.4f (std %.4f)", res.mean, res.std)
    return EXIT_OK


def cmd_ramsey(args) -> int:
    device = _device(args)
    gate = _gate(device, args.gate)
    out = _out_dir(args.out)
    kw = dict(detuning_hz=args.detuning_hz, n_points=args.points, max_delay_s=args.max_delay_s,
              decoherence=not args.no_decoherence)
    run = Run(args, out)
    if args.measured is None and args.conditioning is None:
        table = run_full_zeta_sweep(gate, device, **kw)
        with atomic_path(run.path("zeta.csv")) as tmp:
            analysis.write_zeta_csv(table, tmp)
    else:
        if args.measured is None or args.conditioning is None:
            raise UsageError("--measured and --conditioning must be given together")
        if args.measured not in gate.spectators:
            raise UsageError(f"{args.measured} is not a spectator of {gate.name}")
        if len(args.conditioning) != 3 or set(args.conditioning) - {"0", "1"}:
            raise UsageError("--conditioning must be three bits")
        result = {}
        for cr_on in (True, False):
            trace = run_cr_ramsey(gate, args.measured, args.conditioning, cr_on, device, **kw)
            tag = "on" if cr_on else "off"
            write_csv(run.path(f"trace_cr_{tag}.csv"), ["delay_s", "signal"], zip(trace.delays, trace.signal))
            try:
                fit = analysis.extract_frequency(trace)
            except analysis.FrequencyExtractionError as exc:
                raise analysis.FrequencyExtractionError(f"trace {trace.label} (CR {tag}): {exc}") from exc
            result[f"cr_{tag}"] = {
                "frequency_hz": fit.frequency, "frequency_se_hz": fit.frequency_se,
                "amplitude": fit.amplitude, "decay_rate_per_s": fit.decay_rate,
            }
        result.update(gate=gate.name, label=trace.label, measured=args.measured,
                      conditioning=args.conditioning,
                      zeta_hz=result["cr_on"]["frequency_hz"] - result["cr_off"]["frequency_hz"])
        write_json(run.path("frequency.json"), result)
    run.finish(device, None)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    try:
        table = analysis.read_zeta_csv(args.zeta)
    except analysis.ZetaFormatError as exc:
        raise UsageError(f"{args.zeta}: {exc}") from exc
    out = _out_dir(args.out)
    est = analysis.reconstruct_alpha(table, sensitivity_hz=args.sensitivity_hz)
    run = Run(args, out)
    with atomic_path(run.path("alpha.csv")) as tmp:
        analysis.write_alpha_csv(est, tmp)
    write_json(run.path("reconstruction.json"), {
        "gate": est.gate,
        "residual_hz": est.residual_hz,
        "sensitivity_hz": args.sensitivity_hz,
        "below_sensitivity": [lbl for lbl, f in zip(est.labels, est.below_sensitivity) if f],
        "single_entry_sensitivity": analysis.single_entry_sensitivity(),
        "rank": analysis.min_norm_pinv(analysis.build_b_matrix())[1],
    })
    run.finish(None, None)
    return EXIT_OK


def cmd_rb(args) -> int:
    device = _device(args)
    out = _out_dir(args.out)
    try:
        lengths = tuple(int(x) for x in args.lengths.split(","))
    except ValueError:
        raise UsageError("--lengths must be a comma-separated list of integers") from None
    kind = args.kind.replace("-", "_")
    target = args.target
    if kind == "two_qubit":
        target = _gate(device, target or "CR2").name
    elif kind == "single":
        target = target or device.labels[0]
        if target not in device.labels:
            raise UsageError(f"unknown qubit {target!r}")
    noise = _noise(args.noise, ("decoherence", "crosstalk"))
    cfg = RBConfig(kind=kind, target=target or "", variant=VARIANTS[args.variant], lengths=lengths,
                   n_sequences=args.sequences, shots=args.shots, seed=args.seed,
                   decoherence="decoherence" in noise, crosstalk="crosstalk" in noise,
                   depolarizing=args.depolarizing)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = run_rb(cfg, device)
    run = Run(args, out)
    rows = []
    for name, r in res.results.items():
        rows += [[name, int(m), s, se] for m, s, se in zip(r.lengths, r.survival, r.survival_se)]
    write_csv(run.path("rb_survival.csv"), ["target", "length", "survival", "se"], rows)
    write_json(run.path("rb_fit.json"), {name: r.to_dict() for name, r in res.results.items()})
    run.finish(device, args.seed)
    return EXIT_OK


def cmd_readout_cal(args) -> int:
    device = _device(args)
    try:
        q = device.qubit(args.qubit)
    except KeyError:
        raise UsageError(f"unknown qubit {args.qubit!r}") from None
    if args.shots < 100:
        raise UsageError("--shots must be >= 100")
    if args.bins < 1:
        raise UsageError("--bins must be >= 1")
    out = _out_dir(args.out)
    cal = run_readout_cal(q, args.shots, seed=args.seed, bins=args.bins)
    run = Run(args, out)
    e = cal.bin_edges
    write_csv(run.path("readout_histogram.csv"), ["bin_left", "bin_right", "ground", "excited"],
              [[e[i], e[i + 1], int(g), int(x)] for i, (g, x) in enumerate(zip(cal.ground_counts, cal.excited_counts))])
    write_json(run.path("readout.json"), cal.to_dict())
    run.finish(device, args.seed)
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plaquette", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--device", default=None,
                        help=f"device YAML (default: ${DEVICE_ENV_VAR} or the built-in plaquette)")
        sp.add_argument("--out", required=True, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("parity", help="weight-four parity check over all 16 inputs")
    common(sp)
    sp.add_argument("--basis", choices=["zzzz", "xxxx", "ZZZZ", "XXXX"], default="zzzz")
    sp.add_argument("--variant", choices=list(VARIANTS), default="4pulse")
    sp.add_argument("--shots", type=int, default=20000)
    sp.add_argument("--noise", default="all", help="comma list of crosstalk,decoherence,assignment; or all/none")
    sp.add_argument("--gate-order", default="CR1,CR2,CR3,CR4")
    sp.add_argument("--xxxx-realization", choices=["data_conjugation", "syndrome_plus"], default="data_conjugation")
    sp.set_defaults(func=cmd_parity)

    sp = sub.add_parser("ramsey", help="CR Ramsey sweep (24 zeta entries) or a single trace")
    common(sp, seed=False)
    sp.add_argument("--gate", required=True)
    sp.add_argument("--measured", default=None)
    sp.add_argument("--conditioning", default=None, help="bits of the other frame qubits, frame order")
    sp.add_argument("--detuning-hz", type=float, default=DEFAULT_DETUNING_HZ)
    sp.add_argument("--points", type=int, default=DEFAULT_POINTS)
    sp.add_argument("--max-delay-s", type=float, default=DEFAULT_MAX_DELAY_S)
    sp.add_argument("--no-decoherence", action="store_true")
    sp.set_defaults(func=cmd_ramsey)

    sp = sub.add_parser("reconstruct", help="Z-string strengths from a zeta CSV")
    sp.add_argument("--zeta", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--sensitivity-hz", type=float, default=analysis.SENSITIVITY_HZ)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("rb", help="randomized benchmarking")
    common(sp)
    sp.add_argument("--kind", choices=["single", "simultaneous", "two-qubit"], default="single")
    sp.add_argument("--target", default=None, help="qubit label (single) or gate name (two-qubit)")
    sp.add_argument("--variant", choices=list(VARIANTS), default="2pulse")
    sp.add_argument("--lengths", default="1,2,4,8,16,32,64")
    sp.add_argument("--sequences", type=int, default=30)
    sp.add_argument("--shots", type=int, default=1000)
    sp.add_argument("--noise", default="all", help="comma list of decoherence,crosstalk; or all/none")
    sp.add_argument("--depolarizing", type=float, default=0.0, help="injected average error per Clifford")
    sp.set_defaults(func=cmd_rb)

    sp = sub.add_parser("readout-cal", help="readout histograms, threshold and assignment fidelity")
    common(sp)
    sp.add_argument("--qubit", required=True)
    sp.add_argument("--shots", type=int, default=20000)
    sp.add_argument("--bins", type=int, default=60)
    sp.set_defaults(func=cmd_readout_cal)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    args._argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"plaquette {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (analysis.FrequencyExtractionError, analysis.RBFitError, FloatingPointError, np.linalg.LinAlgError,
            ValueError) as exc:
        print(f"plaquette {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
