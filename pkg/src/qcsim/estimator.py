"""Photon-counting QCS estimator and its error analysis."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counts import CountDistribution
from .errors import ConditioningError, NumericalError

__all__ = [
    "CountDistribution",
    "QcsEstimate",
    "EtaEstimate",
    "qcs_from_distribution",
    "qcs_variance",
    "poisson_reduction_residual",
    "sample_counts",
    "eta_from_energy",
    "truncated_estimate",
    "theory_error_band",
    "mean_photon_and_difference_moment",
]

PARITY_FLOOR = {"exact": 1e-10, "sampled": 1e-4}


@dataclass(frozen=True)
class QcsEstimate:
    qcs: float
    purity: float
    variance: float
    n_trials: int | None
    flags: tuple[str, ...] = ()

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def to_text(self) -> str:
        n = "" if self.n_trials is None else str(self.n_trials)
        return (
            f"qcs = {self.qcs!r}\npurity = {self.purity!r}\n"
            f"variance = {self.variance!r}\nn_trials = {n}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "QcsEstimate":
        fields = {}
        for line in text.splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                fields[key.strip()] = value.strip()
        n = fields.get("n_trials", "")
        return cls(float(fields["qcs"]), float(fields["purity"]), float(fields["variance"]), int(n) if n else None)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


def _moments(probs: np.ndarray) -> tuple[float, float]:
    n = np.arange(len(probs))
    sign = (-1.0) ** n
    return float(sign @ probs), float((n * sign) @ probs)


def qcs_from_distribution(
    dist: CountDistribution,
    parity_floor: float | None = None,
    n_trials: int | None = None,
) -> QcsEstimate:
    """QCS = 1 + 2 sum n (-1)^n p_n / sum (-1)^n p_n; the denominator is the purity.

    The variance uses the tallies of a sampled distribution, or ``n_trials``
    if given (a prediction for an exact distribution); otherwise it is zero.
    """
    floor = PARITY_FLOOR[dist.provenance] if parity_floor is None else parity_floor
    parity, odd = _moments(dist.probs)
    if abs(parity) < floor:
        raise ConditioningError(
            f"parity {parity:.3e} is below the conditioning floor {floor:.1e}", parity=parity
        )
    qcs = 1.0 + 2.0 * odd / parity
    flags = []
    if qcs < 0 or parity < 0:
        flags.append("out_of_range")
    n = dist.n_trials if n_trials is None else n_trials
    variance = qcs_variance(dist, qcs, parity, n) if n is not None else 0.0
    return QcsEstimate(qcs, parity, variance, n, tuple(flags))


def qcs_variance(dist: CountDistribution, qcs: float, purity: float, n_trials: int | None = None) -> float:
    """Multinomial variance of the estimator, sum_n p_n (2n + 1 - C^2)^2 / ((N - 1) P^2)."""
    n_trials = dist.n_trials if n_trials is None else n_trials
    if n_trials is None or n_trials < 2:
        raise ValueError("the variance needs at least two trials")
    n = np.arange(len(dist.probs))
    return float(dist.probs @ (2 * n + 1 - qcs) ** 2 / ((n_trials - 1) * purity**2))


def poisson_reduction_residual(dist: CountDistribution, qcs: float) -> float:
    """sum_m p_m (-1)^m (2m + 1 - C^2); zero when C^2 was estimated from the same p."""
    n = np.arange(len(dist.probs))
    return float(dist.probs @ ((-1.0) ** n * (2 * n + 1 - qcs)))


def sample_counts(dist: CountDistribution, n_trials: int, seed: int | None) -> CountDistribution:
    """Multinomial tallies of ``n_trials`` detector readings.

    Uses numpy's PCG64 stream seeded with ``seed``.  Any truncated tail of the
    exact distribution is ignored (probabilities are rescaled to the support).
    """
    if dist.provenance != "exact":
        raise ValueError("sampling needs an exact distribution")
    if n_trials < 1:
        raise ValueError("at least one trial is required")
    rng = np.random.default_rng(seed)
    probs = dist.probs / dist.probs.sum()
    counts = rng.multinomial(n_trials, probs)
    return CountDistribution.from_counts(counts)


@dataclass(frozen=True)
class EtaEstimate:
    value: float
    raw: float

    @property
    def exceeds_unity(self) -> bool:
        return self.raw > 1.0


def eta_from_energy(mean_photon_out: float, r: float) -> EtaEstimate:
    """Transmission from transmitted energy, <n_out> / sinh^2 r.

    Values above one are reported clamped to one, with ``raw`` kept and a warning.
    """
    if r <= 0:
        raise ValueError("input energy sinh^2 r must be positive")
    raw = mean_photon_out / math.sinh(r) ** 2
    if raw > 1.0:
        warnings.warn(f"energy-based transmission {raw:.6g} exceeds 1", RuntimeWarning, stacklevel=2)
    return EtaEstimate(min(raw, 1.0), raw)


def truncated_estimate(
    dist: CountDistribution,
    n_max: int = 4,
    renormalize: bool = True,
    parity_floor: float | None = None,
) -> QcsEstimate:
    """Re-estimate after discarding counts above ``n_max`` photons."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    probs = np.array(dist.probs[: n_max + 1])
    if renormalize:
        probs = probs / probs.sum()
    if dist.counts is not None:
        counts = dist.counts[: n_max + 1]
        truncated = CountDistribution.from_counts(counts)
    else:
        truncated = CountDistribution(probs, provenance="exact", tail_tol=1.0)
    return qcs_from_distribution(truncated, parity_floor=parity_floor)


def theory_error_band(p_obs: CountDistribution, p_theory: CountDistribution) -> float:
    """Variance of the theory QCS when each p_n is uniform within |p_n - p~_n| of theory.

    Cov(p_m, p_n) = delta_mn (p_n - p~_n)^2 / 3, propagated through the
    derivative (-1)^n (2n + 1 - C^2) / P evaluated at the theory distribution.
    """
    size = max(p_obs.n_max, p_theory.n_max)
    obs, th = p_obs.padded(size), p_theory.padded(size)
    parity, odd = _moments(th)
    if parity <= 0:
        raise NumericalError("theory distribution has non-positive parity")
    qcs = 1.0 + 2.0 * odd / parity
    n = np.arange(size + 1)
    grad = (-1.0) ** n * (2 * n + 1 - qcs) / parity
    return float(((obs - th) ** 2 / 3.0) @ grad**2)


def mean_photon_and_difference_moment(result, tol: float = 1e-8) -> tuple[float, float]:
    """Difference-mode <n> and eta * (<a^dag a> - |<a>|^2) of the input; they must agree."""
    mean_out = float(result.mean_photon_out)
    moment = float(result.eta * result.input_moment)
    if abs(mean_out - moment) > tol:
        raise NumericalError(
            f"difference-mode photon number {mean_out:.10g} disagrees with eta*moment {moment:.10g}"
        )
    return mean_out, moment
