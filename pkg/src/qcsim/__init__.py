"""Simulate and analyse two-copy measurements of the quadrature coherence scale (QCS).

Two engines cross-check each other: :mod:`qcsim.gaussian` (covariance
matrices, closed forms) and :mod:`qcsim.fock` (truncated density operators).
:mod:`qcsim.protocol` builds and runs the experiments, :mod:`qcsim.estimator`
turns photon counts into QCS estimates with error bars.
"""

from .counts import CountDistribution
from .errors import ConditioningError, CutoffError, InvalidStateError, NumericalError, QcsError
from .estimator import QcsEstimate, qcs_from_distribution, sample_counts
from .gaussian import (
    GaussianState,
    eta_star,
    qcs_gaussian,
    qcs_lossy_gaussian,
    qcs_squeezed_lossy,
    qcs_thermal_lossy,
)
from .protocol import CircuitSpec, ExperimentResult, build_sv_experiment, build_thermal_experiment, run_circuit

__version__ = "0.1.0"
