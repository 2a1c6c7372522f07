"""Readout calibration: single-shot soft values, threshold and assignment fidelity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .. import qsim
from ..device import QubitParams

GROUND_MEAN = -1.0
EXCITED_MEAN = 1.0


@dataclass
class ReadoutModel:
    """Two unit-separated Gaussians of width ``sigma`` plus state-flip fractions.

    The overlap of the Gaussians sets the smaller of the two error rates; the
    excess of the larger one is carried by shots whose state flipped before
    integration (relaxation for p01, spurious excitation for p10) and therefore
    land in the opposite Gaussian.
    """

    sigma: float
    relax_fraction: float
    excite_fraction: float

    @classmethod
    def from_errors(cls, p10: float, p01: float) -> "ReadoutModel":
        base = min(p10, p01)
        sigma = 0.0 if base <= 0 else 1.0 / norm.isf(base)
        relax = (p01 - base) / (1 - 2 * base)
        excite = (p10 - base) / (1 - 2 * base)
        return cls(float(sigma), float(relax), float(excite))

    def error_rates(self) -> tuple[float, float]:
        """Exact (p10, p01) for a threshold at the midpoint between the means."""
        overlap = 0.0 if self.sigma == 0 else float(norm.sf(1.0 / self.sigma))
        p10 = self.excite_fraction * (1 - overlap) + (1 - self.excite_fraction) * overlap
        p01 = self.relax_fraction * (1 - overlap) + (1 - self.relax_fraction) * overlap
        return p10, p01

    def sample(self, prepared: int, shots: int, rng: np.random.Generator) -> np.ndarray:
        flip_p = self.relax_fraction if prepared == 1 else self.excite_fraction
        state = np.full(shots, prepared)
        state = np.where(rng.random(shots) < flip_p, 1 - state, state)
        means = np.where(state == 1, EXCITED_MEAN, GROUND_MEAN)
        return means + self.sigma * rng.standard_normal(shots)


@dataclass
class ReadoutCalibration:
    qubit: str
    shots: int
    threshold: float
    p10: float
    p01: float
    assignment_fidelity: float
    assignment_fidelity_se: float
    bin_edges: np.ndarray
    ground_counts: np.ndarray
    excited_counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "qubit": self.qubit,
            "shots": self.shots,
            "threshold": self.threshold,
            "p10": self.p10,
            "p01": self.p01,
            "assignment_fidelity": self.assignment_fidelity,
            "assignment_fidelity_se": self.assignment_fidelity_se,
            "bins": int(len(self.ground_counts)),
        }


def run_readout_cal(qubit: QubitParams, shots: int, seed: int = 0, bins: int = 60) -> ReadoutCalibration:
    if shots < 100:
        raise ValueError("readout calibration needs at least 100 shots")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    model = ReadoutModel.from_errors(qubit.readout_p10, qubit.readout_p01)
    rng = qsim.make_rng(seed)
    ground = model.sample(0, shots, rng)
    excited = model.sample(1, shots, rng)
    # equal-width Gaussians cross halfway between their centres; medians resist the flip tails
    threshold = float((np.median(ground) + np.median(excited)) / 2)
    p10 = float(np.mean(ground > threshold))
    p01 = float(np.mean(excited <= threshold))
    fid = 1 - (p10 + p01) / 2
    se = float(np.sqrt(p10 * (1 - p10) + p01 * (1 - p01)) / (2 * np.sqrt(shots)))
    lo = min(ground.min(), excited.min())
    hi = max(ground.max(), excited.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    g_counts, _ = np.histogram(ground, edges)
    e_counts, _ = np.histogram(excited, edges)
    return ReadoutCalibration(qubit.label, shots, threshold, p10, p01, float(fid), se, edges, g_counts, e_counts)
