"""Covariance-matrix calculus for Gaussian states.

Conventions: x = (a + a^dagger)/sqrt(2), p = -i(a - a^dagger)/sqrt(2), so the
vacuum covariance is I/2.  Phase-space vectors are ordered (x1, p1, x2, p2, ...).
Passive operations are described by the Heisenberg map U^dagger a_i U = sum_j M_ij a_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidStateError

SYMMETRY_TOL = 1e-12
SYMPLECTIC_TOL = 1e-10
PHYSICALITY_TOL = 1e-9

# Physicality (uncertainty relation) checks are O(m^3); off unless requested.
_VALIDATE = False


def set_validation(enabled: bool) -> None:
    """Toggle the uncertainty-relation check that runs after every transform."""
    global _VALIDATE
    _VALIDATE = bool(enabled)


def symplectic_form(num_modes: int) -> np.ndarray:
    omega = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(num_modes), omega)


@dataclass(frozen=True)
class GaussianState:
    """An m-mode Gaussian state given by its first and second moments."""

    num_modes: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.num_modes < 1:
            raise InvalidStateError("num_modes must be positive")
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        dim = 2 * self.num_modes
        if mean.shape != (dim,):
            raise InvalidStateError(f"mean must have length {dim}, got {mean.shape}")
        if cov.shape != (dim, dim):
            raise InvalidStateError(f"cov must be {dim}x{dim}, got {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
            raise InvalidStateError("covariance matrix is not symmetric")
        mean.setflags(write=False)
        cov = 0.5 * (cov + cov.T)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if _VALIDATE:
            self.check_physical()

    @classmethod
    def vacuum(cls, num_modes: int = 1) -> "GaussianState":
        return cls(num_modes, np.zeros(2 * num_modes), 0.5 * np.eye(2 * num_modes))

    def check_physical(self) -> None:
        """Raise if cov + i*Omega/2 is not positive semidefinite."""
        omega = symplectic_form(self.num_modes)
        eigs = np.linalg.eigvalsh(self.cov + 0.5j * omega)
        if eigs.min() < -PHYSICALITY_TOL:
            raise InvalidStateError(
                f"covariance violates the uncertainty relation (min eigenvalue {eigs.min():.3e})"
            )

    def reduced(self, modes: Sequence[int]) -> "GaussianState":
        """Marginal state on the given modes, in the given order."""
        idx = _quadrature_indices(modes, self.num_modes)
        return GaussianState(len(modes), self.mean[idx], self.cov[np.ix_(idx, idx)])

    def tensor(self, other: "GaussianState") -> "GaussianState":
        n = self.num_modes + other.num_modes
        cov = np.zeros((2 * n, 2 * n))
        k = 2 * self.num_modes
        cov[:k, :k] = self.cov
        cov[k:, k:] = other.cov
        return GaussianState(n, np.concatenate([self.mean, other.mean]), cov)

    @property
    def is_centred(self) -> bool:
        return bool(np.all(np.abs(self.mean) < 1e-12))


def _quadrature_indices(modes: Sequence[int], num_modes: int) -> list[int]:
    modes = [int(m) for m in modes]
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated mode index in {modes}")
    for m in modes:
        if not 0 <= m < num_modes:
            raise ValueError(f"mode {m} out of range for a {num_modes}-mode state")
    idx = []
    for m in modes:
        idx.extend((2 * m, 2 * m + 1))
    return idx


# --------------------------------------------------------------------------
# Symplectic operations
# --------------------------------------------------------------------------

BS_SYMMETRIC = np.array([[1.0, 1.0j], [1.0j, 1.0]]) / math.sqrt(2)
BS_BALANCED = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)


@dataclass(frozen=True)
class SymplecticOp:
    matrix: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise ValueError(f"symplectic matrix must be 2m x 2m, got {s.shape}")
        omega = symplectic_form(s.shape[0] // 2)
        if np.max(np.abs(s.T @ omega @ s - omega)) > SYMPLECTIC_TOL:
            raise ValueError("matrix is not symplectic")
        s.setflags(write=False)
        object.__setattr__(self, "matrix", s)

    @property
    def num_modes(self) -> int:
        return self.matrix.shape[0] // 2


def passive_symplectic(mode_matrix: np.ndarray) -> np.ndarray:
    """Real symplectic image of the passive map a -> M a."""
    m = np.asarray(mode_matrix, dtype=complex)
    n = m.shape[0]
    s = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            x, y = m[i, j].real, m[i, j].imag
            s[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = [[x, -y], [y, x]]
    return s


def squeeze_op(r: float, phi: float = 0.0) -> SymplecticOp:
    refl = np.array([[math.cos(phi), math.sin(phi)], [math.sin(phi), -math.cos(phi)]])
    s = math.cosh(r) * np.eye(2) - math.sinh(r) * refl
    return SymplecticOp(s, "squeeze", {"r": r, "phi": phi})


def phase_op(theta: float) -> SymplecticOp:
    return SymplecticOp(passive_symplectic(np.array([[np.exp(1j * theta)]])), "phase", {"theta": theta})


def beam_splitter_op(kind: str) -> SymplecticOp:
    """Symplectic matrix of the symmetric ('symmetric') or balanced ('balanced') splitter."""
    if kind == "symmetric":
        return SymplecticOp(passive_symplectic(BS_SYMMETRIC), "bs_symmetric")
    if kind == "balanced":
        return SymplecticOp(passive_symplectic(BS_BALANCED), "bs_balanced")
    raise ValueError(f"unknown beam splitter kind {kind!r}")


def apply_symplectic(state: GaussianState, op: SymplecticOp, modes: Sequence[int]) -> GaussianState:
    if op.num_modes != len(modes):
        raise ValueError(f"operation acts on {op.num_modes} modes but {len(modes)} were given")
    idx = _quadrature_indices(modes, state.num_modes)
    full = np.eye(2 * state.num_modes)
    full[np.ix_(idx, idx)] = op.matrix
    return GaussianState(state.num_modes, full @ state.mean, full @ state.cov @ full.T)


def apply_loss(state: GaussianState, eta: float, mode: int) -> GaussianState:
    """Pure-loss channel of transmission eta on one mode."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    idx = _quadrature_indices([mode], state.num_modes)
    scale = np.ones(2 * state.num_modes)
    scale[idx] = math.sqrt(eta)
    cov = state.cov * np.outer(scale, scale)
    cov[np.ix_(idx, idx)] += 0.5 * (1.0 - eta) * np.eye(2)
    return GaussianState(state.num_modes, state.mean * scale, cov)


# --------------------------------------------------------------------------
# States
# --------------------------------------------------------------------------


def make_squeezed_vacuum(r: float, phi: float = 0.0) -> GaussianState:
    if not math.isfinite(r):
        raise ValueError("squeezing must be finite")
    refl = np.array([[math.cos(phi), math.sin(phi)], [math.sin(phi), -math.cos(phi)]])
    cov = 0.5 * math.cosh(2 * r) * np.eye(2) - 0.5 * math.sinh(2 * r) * refl
    return GaussianState(1, np.zeros(2), cov)


def make_thermal(nbar: float) -> GaussianState:
    if nbar < 0:
        raise ValueError(f"mean photon number must be non-negative, got {nbar}")
    return GaussianState(1, np.zeros(2), (nbar + 0.5) * np.eye(2))


# --------------------------------------------------------------------------
# Scalar properties
# --------------------------------------------------------------------------


def purity(state: GaussianState) -> float:
    det = float(np.linalg.det(state.cov))
    if det <= 0:
        raise InvalidStateError(f"covariance determinant {det} is not positive")
    return 1.0 / (2**state.num_modes * math.sqrt(det))


def total_variance(state: GaussianState) -> float:
    """Var(x) + Var(p) of a single-mode state."""
    _require_single_mode(state)
    return float(state.cov[0, 0] + state.cov[1, 1])


def mean_photon_number(state: GaussianState, mode: int = 0) -> float:
    i = 2 * mode
    v = state.cov[i : i + 2, i : i + 2]
    mu = state.mean[i : i + 2]
    return float((np.trace(v) + mu @ mu - 1.0) / 2.0)


def qcs_gaussian(state: GaussianState) -> float:
    """QCS of a centred single-mode Gaussian state, tr(V^-1)/4."""
    _require_single_mode(state)
    if not state.is_centred:
        raise InvalidStateError("the Gaussian QCS formula holds only for centred states")
    det = float(np.linalg.det(state.cov))
    if det <= 0:
        raise InvalidStateError("singular covariance matrix")
    return total_variance(state) / (4.0 * det)


def qcs_lossy_gaussian(total_var: float, purity_initial: float, eta: float) -> float:
    """QCS after loss eta of a Gaussian state with total variance W and purity P_i."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    if not 0.0 < purity_initial <= 1.0:
        raise ValueError(f"purity must lie in (0, 1], got {purity_initial}")
    if total_var < 1.0:
        raise ValueError(f"total variance must be at least 1, got {total_var}")
    p2 = purity_initial**2
    num = (eta * (total_var - 1.0) + 1.0) * p2
    den = eta**2 + (1.0 - eta) * (eta * (2.0 * total_var - 1.0) + 1.0) * p2
    return num / den


def qcs_squeezed_lossy(r: float, eta: float) -> float:
    if r < 0:
        raise ValueError("squeezing must be non-negative")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    g = eta * math.cosh(2 * r) - eta
    return 1.0 / (1.0 + (1.0 - 2.0 * eta) * g / (g + 1.0))


def qcs_thermal_lossy(nbar: float, eta: float) -> float:
    if nbar < 0:
        raise ValueError("mean photon number must be non-negative")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    return 1.0 / (1.0 + 2.0 * eta * nbar)


def eta_star(total_var: float, purity_initial: float) -> float:
    """Transmission at which the lossy QCS falls back to 1.

    Defined only when the lossless state has QCS > 1, i.e. W * P_i**2 > 1.
    """
    p2 = purity_initial**2
    if not 0.0 < purity_initial <= 1.0:
        raise ValueError(f"purity must lie in (0, 1], got {purity_initial}")
    if total_var * p2 <= 1.0:
        raise ValueError(
            f"W*P_i^2 = {total_var * p2:.6g} <= 1: the state is never certified, no crossing exists"
        )
    return p2 * (total_var - 1.0) / (2.0 * p2 * total_var - p2 - 1.0)


def photon_number_distribution(state: GaussianState, n_max: int, mode: int = 0) -> np.ndarray:
    """Photon-number probabilities p_0..p_n_max of one mode of a centred state.

    Uses the generating function sum_n p_n z^n = det[(1-z) V + (1+z) I/2]^(-1/2),
    expanded as a power series through a first-order recurrence.
    """
    reduced = state.reduced([mode])
    if not reduced.is_centred:
        raise InvalidStateError("photon statistics are implemented for centred states only")
    v = reduced.cov
    m0 = v + 0.5 * np.eye(2)
    m1 = 0.5 * np.eye(2) - v
    a = float(np.linalg.det(m0))
    c = float(np.linalg.det(m1))
    b = float(np.linalg.det(m0 + m1)) - a - c
    # D(z) = a + b z + c z^2, f = D^(-1/2), f' D = -(1/2) D' f
    f = np.zeros(n_max + 1)
    f[0] = a**-0.5
    for n in range(n_max):
        s = (n + 0.5) * b * f[n]
        if n >= 1:
            s += n * c * f[n - 1]
        f[n + 1] = -s / ((n + 1) * a)
    return np.clip(f, 0.0, None)


def _require_single_mode(state: GaussianState) -> None:
    if state.num_modes != 1:
        raise ValueError(f"expected a single-mode state, got {state.num_modes} modes")
