"""Ramsey frequency extraction, Z-interaction reconstruction and RB fitting."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from .device import SENSITIVITY_HZ, z_labels

RANK_RTOL = 1e-10
N_SPECTATORS = 3
PEAK_THRESHOLD = 10.0


class FrequencyExtractionError(RuntimeError):
    pass


class RBFitError(RuntimeError):
    pass


class ZetaFormatError(ValueError):
    pass


# --- zeta table layout -------------------------------------------------------


def zeta_rows(n_spectators: int = N_SPECTATORS) -> list[tuple[int, str]]:
    """(measured position, conditioning bits) per row.

    Positions are 1-based over the CR frame (1 = control). Blocks run from the
    last spectator down to the first; conditioning bits ascend in binary and
    list the other frame qubits in frame order.
    """
    n = n_spectators + 1
    rows = []
    for pos in range(n, 1, -1):
        for c in range(2 ** (n - 1)):
            rows.append((pos, format(c, f"0{n - 1}b")))
    return rows


def zeta_label(pos: int, bits: str) -> str:
    return bits[: pos - 1] + "^" + bits[pos - 1 :]


@dataclass
class ZetaTable:
    gate: str
    values: np.ndarray  # Hz, in zeta_rows() order

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(zeta_rows()),):
            raise ZetaFormatError(f"expected {len(zeta_rows())} zeta entries, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ZetaFormatError("zeta entries must be finite")

    @property
    def labels(self) -> list[str]:
        return [zeta_label(p, b) for p, b in zeta_rows()]

    def block_mean(self, pos: int, control: int | None = None) -> float:
        sel = [
            v for (p, b), v in zip(zeta_rows(), self.values)
            if p == pos and (control is None or int(b[0]) == control)
        ]
        return float(np.mean(sel))


def build_b_matrix(n_spectators: int = N_SPECTATORS) -> np.ndarray:
    """Map from diagonal energies eta (natural binary order) to Ramsey differences zeta."""
    n = n_spectators + 1
    rows = zeta_rows(n_spectators)
    b = np.zeros((len(rows), 2**n))
    for r, (pos, bits) in enumerate(rows):
        i0 = int(bits[: pos - 1] + "0" + bits[pos - 1 :], 2)
        i1 = int(bits[: pos - 1] + "1" + bits[pos - 1 :], 2)
        b[r, i0] = 1.0
        b[r, i1] = -1.0
    return b


def eta_from_alpha(alpha: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    return hadamard(alpha.size) @ alpha / 2


def alpha_from_eta(eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    return hadamard(eta.size) @ eta / (eta.size / 2)


def alpha_vector(values: dict[str, float], n: int = N_SPECTATORS + 1) -> np.ndarray:
    return np.array([values.get(lbl, 0.0) for lbl in z_labels(n)], dtype=float)


def forward_zeta(alpha: dict[str, float] | np.ndarray, gate: str = "") -> ZetaTable:
    """Ideal Ramsey differences for a Z-string table."""
    a = alpha_vector(alpha) if isinstance(alpha, dict) else np.asarray(alpha, dtype=float)
    return ZetaTable(gate, build_b_matrix() @ eta_from_alpha(a))


def min_norm_pinv(b: np.ndarray, rtol: float = RANK_RTOL) -> tuple[np.ndarray, int]:
    """Pseudo-inverse from an SVD with explicit rank cut; returns (B+, rank)."""
    u, s, vt = np.linalg.svd(b, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0]))
    pinv = vt[:rank].T @ np.diag(1 / s[:rank]) @ u[:, :rank].T
    return pinv, rank


@dataclass
class AlphaEstimate:
    gate: str
    values: np.ndarray
    eta: np.ndarray
    residual_hz: float
    sensitivity_hz: float = SENSITIVITY_HZ
    labels: list[str] = field(default_factory=lambda: z_labels(N_SPECTATORS + 1))

    @property
    def below_sensitivity(self) -> np.ndarray:
        return np.abs(self.values) < self.sensitivity_hz

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.values.tolist()))

    def __getitem__(self, label: str) -> float:
        return float(self.values[self.labels.index(label)])


def reconstruct_alpha(zeta, sensitivity_hz: float = SENSITIVITY_HZ) -> AlphaEstimate:
    """Minimum-norm eta from the Ramsey differences, then the Hadamard transform to alpha."""
    table = zeta if isinstance(zeta, ZetaTable) else ZetaTable("", zeta)
    b = build_b_matrix()
    pinv, _ = min_norm_pinv(b)
    eta = pinv @ table.values
    alpha = alpha_from_eta(eta)
    # global energy and control-only Z are unobservable; gauge them to zero
    alpha[0] = 0.0
    alpha[len(alpha) // 2] = 0.0
    residual = float(np.linalg.norm(b @ eta - table.values))
    return AlphaEstimate(table.gate, alpha, eta, residual, sensitivity_hz)


def single_entry_sensitivity() -> float:
    """Largest change in any alpha per unit change of one zeta entry."""
    pinv, _ = min_norm_pinv(build_b_matrix())
    m = hadamard(pinv.shape[0]) @ pinv / 8
    return float(np.max(np.abs(m)))


# --- CSV formats --------------------------------------------------------------

ZETA_HEADER = ["gate", "label", "measured_position", "conditioning_bits", "zeta_hz"]
ALPHA_HEADER = ["gate", "string", "alpha_hz", "below_sensitivity"]


def write_zeta_csv(table: ZetaTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ZETA_HEADER)
        for (pos, bits), lbl, v in zip(zeta_rows(), table.labels, table.values):
            w.writerow([table.gate, lbl, pos, bits, repr(float(v))])


def read_zeta_csv(path) -> ZetaTable:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ZetaFormatError(str(exc)) from exc
    if not rows or rows[0] != ZETA_HEADER:
        raise ZetaFormatError(f"header must be {','.join(ZETA_HEADER)}")
    body = [r for r in rows[1:] if r]
    expected = [zeta_label(p, b) for p, b in zeta_rows()]
    if len(body) != len(expected):
        raise ZetaFormatError(f"expected {len(expected)} rows, found {len(body)}")
    by_label = {}
    for r in body:
        if len(r) != len(ZETA_HEADER):
            raise ZetaFormatError(f"bad row {r}")
        try:
            by_label[r[1]] = float(r[4])
        except ValueError:
            raise ZetaFormatError(f"non-numeric zeta in row {r}") from None
    if set(by_label) != set(expected):
        raise ZetaFormatError("row labels do not match the position-block layout")
    gates = {r[0] for r in body}
    return ZetaTable(gates.pop() if len(gates) == 1 else "", [by_label[k] for k in expected])


def write_alpha_csv(est: AlphaEstimate, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ALPHA_HEADER)
        for lbl, v, flag in zip(est.labels, est.values, est.below_sensitivity):
            w.writerow([est.gate, lbl, repr(float(v)), int(flag)])


def data_path(name: str) -> Path:
    return Path(__file__).parent / "data" / name


def shipped_zeta(gate: str) -> ZetaTable:
    """Shipped Ramsey differences for one gate."""
    return read_zeta_csv(data_path(f"zeta_{gate.lower()}.csv"))


def reference_alpha() -> dict[str, dict[str, float | None]]:
    """Published Z strengths per gate (Hz); None marks below-sensitivity entries."""
    out: dict[str, dict[str, float | None]] = {}
    with open(data_path("reference_alpha.csv"), newline="") as fh:
        for r in csv.DictReader(fh):
            val = None if int(r["below_sensitivity"]) else float(r["alpha_hz"])
            out.setdefault(r["gate"], {})[r["string"]] = val
    return out


# --- Ramsey frequency extraction ---------------------------------------------


@dataclass
class FrequencyFit:
    frequency: float  # Hz, software detuning removed
    amplitude: float
    decay_rate: float  # 1/s
    frequency_se: float
    raw_frequency: float


def decaying_cosine(t, a, gamma, f, phi, c):
    return a * np.exp(-gamma * t) * np.cos(2 * np.pi * f * t + phi) + c


def _spectrum(t, y, pad: int, window=None):
    n = len(t)
    dt = t[1] - t[0]
    nfft = 1 << int(np.ceil(np.log2(pad * n)))
    w = np.ones(n) if window is None else window
    spec = np.abs(np.fft.rfft((y - y.mean()) * w, nfft)) * 2 / w.sum()
    return np.fft.rfftfreq(nfft, dt), spec


def _check_grid(t):
    t = np.asarray(t, dtype=float)
    if t.size < 16:
        raise FrequencyExtractionError("need at least 16 samples")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * dt.mean():
        raise FrequencyExtractionError("delay grid must be uniform and increasing")
    return t


def fit_decaying_cosine(t, y, pad: int = 8) -> FrequencyFit:
    t = _check_grid(t)
    y = np.asarray(y, dtype=float)
    if np.std(y) < 1e-12:
        raise FrequencyExtractionError("trace is constant")
    freqs, spec = _spectrum(t, y, pad)
    body = spec[1:]
    k = int(np.argmax(body)) + 1
    floor = np.median(body)
    spread = 1.4826 * np.median(np.abs(body - floor))
    # white noise alone rarely exceeds ~7 robust spreads
    if spec[k] <= floor + PEAK_THRESHOLD * spread:
        raise FrequencyExtractionError("no spectral peak above the noise floor")
    f0 = freqs[k]
    t0 = t - t[0]
    basis = np.column_stack([np.cos(2 * np.pi * f0 * t0), np.sin(2 * np.pi * f0 * t0), np.ones_like(t0)])
    (ca, sa, c0), *_ = np.linalg.lstsq(basis, y, rcond=None)
    a0, phi0 = np.hypot(ca, sa), np.arctan2(-sa, ca)
    window = t0[-1]
    df = 1 / window
    p0 = [a0, 1 / window, f0, phi0, c0]
    lo = [0, 0, max(f0 - 2 * df, 0), -np.inf, -np.inf]
    hi = [np.inf, np.inf, f0 + 2 * df, np.inf, np.inf]
    p0[1] = min(max(p0[1], lo[1]), hi[1])
    try:
        popt, pcov = curve_fit(decaying_cosine, t0, y, p0=p0, bounds=(lo, hi), maxfev=20000)
    except RuntimeError as exc:
        raise FrequencyExtractionError(f"fit did not converge: {exc}") from exc
    se = float(np.sqrt(pcov[2, 2])) if np.all(np.isfinite(pcov)) else float("nan")
    return FrequencyFit(float(popt[2]), float(popt[0]), float(popt[1]), se, float(popt[2]))


def extract_frequency(trace) -> FrequencyFit:
    """Frequency of a Ramsey trace relative to its software detuning (signed)."""
    fit = fit_decaying_cosine(trace.delays, trace.signal)
    fit.frequency = fit.raw_frequency - getattr(trace, "detuning_hz", 0.0)
    return fit


def spectral_peaks(t, y, pad: int = 8, min_prominence: float = 0.1) -> np.ndarray:
    """Frequencies of distinct peaks in the zero-padded, Hann-windowed amplitude spectrum."""
    t = _check_grid(t)
    freqs, spec = _spectrum(t, np.asarray(y, dtype=float), pad, np.hanning(len(t)))
    idx, _ = find_peaks(spec, prominence=min_prominence * spec.max())
    return freqs[idx]


def resolution_floor(window_s: float) -> float:
    """Smallest resolvable frequency separation for a record of this length."""
    return 1 / window_s


# --- randomized benchmarking --------------------------------------------------


@dataclass
class RBResult:
    lengths: np.ndarray
    survival: np.ndarray
    survival_se: np.ndarray
    a: float
    b: float
    p: float
    covariance: np.ndarray
    d: int
    degenerate: bool = False

    @property
    def p_se(self) -> float:
        return float(np.sqrt(max(self.covariance[2, 2], 0.0)))

    @property
    def fidelity(self) -> float:
        return 1 - (1 - self.p) * (self.d - 1) / self.d

    @property
    def fidelity_se(self) -> float:
        return self.p_se * (self.d - 1) / self.d

    def to_dict(self) -> dict:
        return {
            "A": self.a, "B": self.b, "p": self.p, "p_se": self.p_se,
            "fidelity": self.fidelity, "fidelity_se": self.fidelity_se,
            "d": self.d, "degenerate": self.degenerate,
            "covariance": np.asarray(self.covariance).tolist(),
        }


def rb_model(m, a, b, p):
    return a * p**m + b


def fit_rb_decay(lengths, survivals, ses=None, d: int = 2) -> RBResult:
    """Weighted fit of A p^m + B."""
    m = np.asarray(lengths, dtype=float)
    s = np.asarray(survivals, dtype=float)
    if m.size < 3:
        raise RBFitError("need at least three lengths")
    se = None if ses is None else np.asarray(ses, dtype=float)
    if np.ptp(s) < 1e-12:
        return RBResult(m, s, se if se is not None else np.zeros_like(s),
                        0.0, float(s.mean()), 1.0, np.zeros((3, 3)), d, degenerate=True)
    b0 = 1 / d
    a0 = s[0] - b0
    excess = s - b0
    ok = excess > 0
    if ok.sum() >= 2:
        slope = np.polyfit(m[ok], np.log(excess[ok]), 1)[0]
        p0 = float(np.clip(np.exp(slope), 1e-3, 1.0))
    else:
        p0 = 0.9
    sigma = None
    if se is not None and np.all(se > 0):
        sigma = se
    try:
        popt, pcov = curve_fit(
            rb_model, m, s, p0=[a0, b0, p0], sigma=sigma, absolute_sigma=sigma is not None,
            bounds=([-2.0, -1.0, 0.0], [2.0, 2.0, 1.0]), maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise RBFitError(f"RB fit did not converge: {exc}") from exc
    if not 0 < popt[2] <= 1 or not np.all(np.isfinite(pcov)):
        raise RBFitError(f"rejected fit with p = {popt[2]}")
    return RBResult(m, s, se if se is not None else np.zeros_like(s),
                    float(popt[0]), float(popt[1]), float(popt[2]), pcov, d)
