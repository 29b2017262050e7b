"""Truncated Fock-space engine.

States live on a box {0..d_0} x ... x {0..d_{m-1}} of photon numbers.  Nothing is
renormalised after truncation: the missing probability is kept as a trace (or
norm) deficit and reported.

Passive operations follow the Heisenberg convention U^dagger a_i U = sum_j M_ij a_j,
the same one used by :mod:`qcsim.gaussian`.  With it the symmetric splitter
turns two squeezed vacua of phase phi + pi/2 into the two-mode squeezed vacuum
of phase phi, and output mode 1 of the balanced splitter is the difference mode
(a_0 - a_1)/sqrt(2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .counts import CountDistribution
from .errors import CutoffError, InvalidStateError, NumericalError
from .gaussian import BS_BALANCED, BS_SYMMETRIC

TRUNCATION_TOL = 1e-10
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-9
UNITARY_TOL = 1e-10


# states with less missing trace than this were not truncated
DEFICIT_FLOOR = 1e-13


class TruncationWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# Operators
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LadderOps:
    """Single-mode operators on {|0>, ..., |cutoff>}."""

    cutoff: int
    a: np.ndarray
    ad: np.ndarray
    x: np.ndarray
    p: np.ndarray
    n: np.ndarray
    parity: np.ndarray


@lru_cache(maxsize=64)
def ladder_ops(cutoff: int) -> LadderOps:
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1).astype(complex)
    ad = a.conj().T
    x = (a + ad) / math.sqrt(2)
    p = -1j * (a - ad) / math.sqrt(2)
    n = np.diag(np.arange(cutoff + 1, dtype=float)).astype(complex)
    parity = np.diag((-1.0) ** np.arange(cutoff + 1)).astype(complex)
    for arr in (a, ad, x, p, n, parity):
        arr.setflags(write=False)
    return LadderOps(cutoff, a, ad, x, p, n, parity)


@dataclass(frozen=True)
class PassiveTransform:
    """A linear-optical map a -> M a on one or two modes, lifted exactly block by block."""

    mode_matrix: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        m = np.asarray(self.mode_matrix, dtype=complex)
        if m.shape not in ((1, 1), (2, 2)):
            raise ValueError("passive transforms act on one or two modes")
        if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > UNITARY_TOL:
            raise ValueError("mode matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "mode_matrix", m)

    @property
    def num_modes(self) -> int:
        return self.mode_matrix.shape[0]

    def generator(self) -> np.ndarray:
        """Hermitian K with M = exp(iK)."""
        t, z = scipy.linalg.schur(self.mode_matrix, output="complex")
        return z @ np.diag(np.angle(np.diag(t))) @ z.conj().T

    def block(self, total: int) -> np.ndarray:
        """Exact action on the span of |k, total-k>, k = 0..total (index k)."""
        return _passive_block(self.mode_matrix.tobytes(), total)


@lru_cache(maxsize=2048)
def _passive_block(key: bytes, total: int) -> np.ndarray:
    m = np.frombuffer(key, dtype=complex).reshape(2, 2)
    k = PassiveTransform(m).generator()
    idx = np.arange(total + 1)
    g = np.diag(k[0, 0] * idx + k[1, 1] * (total - idx)).astype(complex)
    # a_0^dagger a_1 |k, N-k> = sqrt((k+1)(N-k)) |k+1, N-k-1>
    hop = np.sqrt((idx[:-1] + 1.0) * (total - idx[:-1]))
    g[idx[1:], idx[:-1]] += k[0, 1] * hop
    g[idx[:-1], idx[1:]] += k[1, 0] * hop
    w, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    u = (v * np.exp(1j * w)) @ v.conj().T
    u.setflags(write=False)
    return u


def beam_splitter(kind: str) -> PassiveTransform:
    if kind == "symmetric":
        return PassiveTransform(BS_SYMMETRIC, "bs_symmetric")
    if kind == "balanced":
        return PassiveTransform(BS_BALANCED, "bs_balanced")
    raise ValueError(f"unknown beam splitter kind {kind!r}")


def phase_shift(theta: float) -> PassiveTransform:
    return PassiveTransform(np.array([[np.exp(1j * theta)]]), "phase")


def passive_matrix(op: PassiveTransform, cutoffs_in: Sequence[int], cutoffs_out: Sequence[int]) -> np.ndarray:
    """Fock matrix of a passive transform between two truncation boxes."""
    if op.num_modes == 1:
        (din,), (dout,) = cutoffs_in, cutoffs_out
        phase = op.mode_matrix[0, 0]
        u = np.zeros((dout + 1, din + 1), dtype=complex)
        n = np.arange(min(din, dout) + 1)
        u[n, n] = phase**n
        return u
    d0, d1 = cutoffs_in
    e0, e1 = cutoffs_out
    u = np.zeros(((e0 + 1) * (e1 + 1), (d0 + 1) * (d1 + 1)), dtype=complex)
    for total in range(d0 + d1 + 1):
        blk = op.block(total)
        kin = np.arange(max(0, total - d1), min(total, d0) + 1)
        kout = np.arange(max(0, total - e1), min(total, e0) + 1)
        if len(kout) == 0:
            continue
        rows = kout * (e1 + 1) + (total - kout)
        cols = kin * (d1 + 1) + (total - kin)
        u[np.ix_(rows, cols)] = blk[np.ix_(kout, kin)]
    return u


# --------------------------------------------------------------------------
# State containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FockKet:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim < 1:
            raise InvalidStateError("a ket needs at least one mode")
        if np.linalg.norm(amps) > 1.0 + 1e-10:
            raise InvalidStateError("ket norm exceeds one")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(s - 1 for s in self.amplitudes.shape)

    @property
    def norm_deficit(self) -> float:
        return max(0.0, 1.0 - float(np.vdot(self.amplitudes, self.amplitudes).real))

    def density(self) -> "FockDensityOperator":
        v = self.amplitudes
        return FockDensityOperator(np.multiply.outer(v, v.conj()))


@dataclass(frozen=True)
class FockDensityOperator:
    """Density operator stored as a tensor of shape cutoffs+1 (rows) then cutoffs+1 (columns)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim % 2 or data.shape[: data.ndim // 2] != data.shape[data.ndim // 2 :]:
            raise InvalidStateError(f"density tensor has inconsistent shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, cutoffs: Sequence[int]) -> "FockDensityOperator":
        dims = tuple(d + 1 for d in cutoffs)
        return cls(np.asarray(matrix).reshape(dims + dims))

    @property
    def num_modes(self) -> int:
        return self.data.ndim // 2

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[: self.num_modes]

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(s - 1 for s in self.dims)

    @property
    def matrix(self) -> np.ndarray:
        size = int(np.prod(self.dims))
        return self.data.reshape(size, size)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def trace_deficit(self) -> float:
        return max(0.0, 1.0 - self.trace)

    def check(self, deficit_tol: float | None = None) -> None:
        """Raise if the operator is not Hermitian, not positive or has lost too much trace."""
        mat = self.matrix
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvalidStateError("density operator is not Hermitian")
        lowest = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min()
        if lowest < -POSITIVITY_TOL:
            raise InvalidStateError(f"density operator has negative eigenvalue {lowest:.3e}")
        if deficit_tol is not None and self.trace_deficit > deficit_tol:
            raise InvalidStateError(f"trace deficit {self.trace_deficit:.3e} exceeds {deficit_tol:.1e}")


State = Union[FockKet, FockDensityOperator]


def as_density(state: State) -> FockDensityOperator:
    return state.density() if isinstance(state, FockKet) else state


def tensor(*states: State) -> State:
    """Tensor product; kets stay kets unless a density operator is involved."""
    if all(isinstance(s, FockKet) for s in states):
        out = states[0].amplitudes
        for s in states[1:]:
            out = np.multiply.outer(out, s.amplitudes)
        return FockKet(out)
    rhos = [as_density(s) for s in states]
    out = rhos[0].data
    m = rhos[0].num_modes
    for rho in rhos[1:]:
        k = rho.num_modes
        out = np.multiply.outer(out, rho.data)
        # (r_1, c_1, r_2, c_2) -> (r_1, r_2, c_1, c_2)
        order = list(range(m)) + list(range(2 * m, 2 * m + k)) + list(range(m, 2 * m)) + list(range(2 * m + k, 2 * m + 2 * k))
        out = out.transpose(order)
        m += k
    return FockDensityOperator(out)


def embed(state: State, cutoffs: Sequence[int]) -> State:
    """Zero-pad or cut a state to new per-mode cutoffs."""
    dims = tuple(d + 1 for d in cutoffs)
    if isinstance(state, FockKet):
        out = np.zeros(dims, dtype=complex)
        sl = tuple(slice(0, min(a, b)) for a, b in zip(dims, state.amplitudes.shape))
        out[sl] = state.amplitudes[sl]
        return FockKet(out)
    out = np.zeros(dims + dims, dtype=complex)
    sl = tuple(slice(0, min(a, b)) for a, b in zip(dims, state.dims))
    out[sl + sl] = state.data[sl + sl]
    return FockDensityOperator(out)


# --------------------------------------------------------------------------
# Cutoff selection
# --------------------------------------------------------------------------


def squeezed_probabilities(r: float, n_max: int) -> np.ndarray:
    """Photon-number probabilities of squeezed vacuum (closed form)."""
    probs = np.zeros(n_max + 1)
    t2 = math.tanh(r) ** 2
    probs[0] = 1.0 / math.cosh(r)
    for k in range(1, n_max // 2 + 1):
        probs[2 * k] = probs[2 * k - 2] * t2 * (2 * k - 1) / (2 * k)
    return probs


def required_cutoff_squeezed(r: float, tol: float = TRUNCATION_TOL) -> int:
    """Smallest even cutoff whose discarded squeezed-vacuum probability is <= tol."""
    if r == 0:
        return 0
    t2 = math.tanh(r) ** 2
    term = 1.0 / math.cosh(r)
    k = 0
    while True:
        # bound the tail sum_{j>k} P(2j) by a geometric series with ratio t2
        nxt = term * t2 * (2 * k + 1) / (2 * k + 2)
        if nxt / (1.0 - t2) <= tol:
            return 2 * k
        term, k = nxt, k + 1


def required_cutoff_thermal(nbar: float, tol: float = TRUNCATION_TOL) -> int:
    if nbar == 0:
        return 0
    q = nbar / (nbar + 1.0)
    return max(0, math.ceil(math.log(tol) / math.log(q)) - 1)


def _check_deficit(deficit: float, tol: float, required: int, what: str) -> None:
    if deficit > tol:
        raise CutoffError(
            f"{what}: discarded probability {deficit:.3e} exceeds tolerance {tol:.1e}; "
            f"a cutoff of about {required} is needed",
            required_cutoff=required,
        )


# --------------------------------------------------------------------------
# State preparation
# --------------------------------------------------------------------------


def fock_ket(n: int, cutoff: int) -> FockKet:
    if not 0 <= n <= cutoff:
        raise ValueError(f"photon number {n} outside cutoff {cutoff}")
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[n] = 1.0
    return FockKet(amps)


def vacuum(num_modes: int = 1, cutoff: int = 0) -> FockKet:
    amps = np.zeros((cutoff + 1,) * num_modes, dtype=complex)
    amps[(0,) * num_modes] = 1.0
    return FockKet(amps)


def squeezed_vacuum_ket(r: float, phi: float = 0.0, cutoff: int | None = None, tol: float = TRUNCATION_TOL) -> FockKet:
    """Squeezed vacuum exp(-(r e^{i phi} a^dag^2 - h.c.)/2)|0>, by matrix exponential.

    The generator is exponentiated on a padded space so that amplitudes up to
    ``cutoff`` are unaffected by the edge of the truncation.
    """
    required = required_cutoff_squeezed(r, tol)
    if cutoff is None:
        cutoff = required
    pad = 2 * cutoff + 40
    ops = ladder_ops(pad)
    z = r * np.exp(1j * phi)
    gen = -0.5 * (z * ops.ad @ ops.ad - np.conj(z) * ops.a @ ops.a)
    vac = np.zeros(pad + 1, dtype=complex)
    vac[0] = 1.0
    full = scipy.linalg.expm(gen) @ vac
    ket = FockKet(full[: cutoff + 1])
    _check_deficit(ket.norm_deficit, tol, required, f"squeezed vacuum r={r} at cutoff {cutoff}")
    return ket


def tmsv_ket(r: float, phi: float = 0.0, cutoff: int | None = None, tol: float = TRUNCATION_TOL) -> FockKet:
    """Two-mode squeezed vacuum sum_m (e^{i phi} tanh r)^m / cosh r |m, m>."""
    required = required_cutoff_thermal(math.sinh(r) ** 2, tol)
    if cutoff is None:
        cutoff = required
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    m = np.arange(cutoff + 1)
    amps[m, m] = (np.exp(1j * phi) * math.tanh(r)) ** m / math.cosh(r)
    ket = FockKet(amps)
    _check_deficit(ket.norm_deficit, tol, required, f"two-mode squeezed vacuum r={r} at cutoff {cutoff}")
    return ket


def thermal_state(nbar: float, cutoff: int | None = None, tol: float = TRUNCATION_TOL) -> FockDensityOperator:
    if nbar < 0:
        raise ValueError("mean photon number must be non-negative")
    required = required_cutoff_thermal(nbar, tol)
    if cutoff is None:
        cutoff = required
    q = nbar / (nbar + 1.0)
    probs = (1.0 - q) * q ** np.arange(cutoff + 1)
    rho = FockDensityOperator(np.diag(probs).astype(complex))
    _check_deficit(rho.trace_deficit, tol, required, f"thermal state nbar={nbar} at cutoff {cutoff}")
    return rho


# --------------------------------------------------------------------------
# Channels
# --------------------------------------------------------------------------


def _contract(tensor_: np.ndarray, op: np.ndarray, axes: Sequence[int], out_dims: Sequence[int]) -> np.ndarray:
    """Apply op (prod(out_dims) x prod(in_dims)) to the given tensor axes."""
    axes = list(axes)
    front = list(range(len(axes)))
    t = np.moveaxis(tensor_, axes, front)
    rest = t.shape[len(axes) :]
    t = op @ t.reshape(op.shape[1], -1)
    t = t.reshape(tuple(out_dims) + rest)
    return np.moveaxis(t, front, axes)


def _check_modes(modes: Sequence[int], num_modes: int) -> list[int]:
    modes = [int(m) for m in modes]
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated mode index in {modes}")
    for m in modes:
        if not 0 <= m < num_modes:
            raise ValueError(f"mode {m} out of range for a {num_modes}-mode state")
    return modes


def apply_unitary(
    state: State,
    op: Union[PassiveTransform, np.ndarray],
    modes: Sequence[int],
    out_cutoffs: Sequence[int] | None = None,
) -> State:
    """Evolve a state by a unitary acting on ``modes``.

    ``op`` is either a :class:`PassiveTransform`, lifted exactly onto the
    truncation box (output components outside ``out_cutoffs`` are dropped and
    show up as a norm deficit), or an explicit square matrix on the product
    space of the selected modes, which must be unitary.
    """
    nmodes = state.num_modes
    modes = _check_modes(modes, nmodes)
    cut_in = [state.cutoffs[m] for m in modes]
    if isinstance(op, PassiveTransform):
        if op.num_modes != len(modes):
            raise ValueError(f"transform acts on {op.num_modes} modes, got {len(modes)}")
        cut_out = list(out_cutoffs) if out_cutoffs is not None else cut_in
        if op.num_modes == 1:
            u = passive_matrix(op, cut_in, cut_out)
            apply = lambda t, axes, conj: _contract(t, u.conj() if conj else u, axes, [cut_out[0] + 1])
        else:
            apply = lambda t, axes, conj: _apply_two_mode_blocks(t, op, axes, cut_in, cut_out, conj)
    else:
        u = np.asarray(op, dtype=complex)
        size = int(np.prod([d + 1 for d in cut_in]))
        if u.shape != (size, size):
            raise ValueError(f"unitary has shape {u.shape}, expected {(size, size)}")
        if np.max(np.abs(u.conj().T @ u - np.eye(size))) > UNITARY_TOL:
            raise ValueError("operator is not unitary")
        dims = [d + 1 for d in cut_in]
        apply = lambda t, axes, conj: _contract(t, u.conj() if conj else u, axes, dims)
    if isinstance(state, FockKet):
        return FockKet(apply(state.amplitudes, modes, False))
    data = apply(state.data, modes, False)
    data = apply(data, [m + nmodes for m in modes], True)
    return FockDensityOperator(data)


def _apply_two_mode_blocks(
    tensor_: np.ndarray,
    op: PassiveTransform,
    axes: Sequence[int],
    cut_in: Sequence[int],
    cut_out: Sequence[int],
    conj: bool,
) -> np.ndarray:
    """Apply a two-mode passive transform one fixed-photon-number block at a time."""
    axes = list(axes)
    t = np.moveaxis(tensor_, axes, [0, 1])
    rest = t.shape[2:]
    (d0, d1), (e0, e1) = cut_in, cut_out
    out = np.zeros((e0 + 1, e1 + 1) + rest, dtype=complex)
    for total in range(min(d0 + d1, e0 + e1) + 1):
        kin = np.arange(max(0, total - d1), min(total, d0) + 1)
        kout = np.arange(max(0, total - e1), min(total, e0) + 1)
        if len(kout) == 0 or len(kin) == 0:
            continue
        blk = op.block(total)[np.ix_(kout, kin)]
        if conj:
            blk = blk.conj()
        gathered = t[kin, total - kin].reshape(len(kin), -1)
        out[kout, total - kout] = (blk @ gathered).reshape((len(kout),) + rest)
    return np.moveaxis(out, [0, 1], axes)


def loss_kraus(eta: float, cutoff: int) -> np.ndarray:
    """Kraus operators K_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>, stacked over k."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    kraus = np.zeros((cutoff + 1, cutoff + 1, cutoff + 1))
    for k in range(cutoff + 1):
        n = np.arange(k, cutoff + 1)
        log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        amp = np.exp(0.5 * log_binom) * np.power(eta, 0.5 * (n - k)) * np.power(1.0 - eta, 0.5 * k)
        kraus[k, n - k, n] = amp
    return kraus


def apply_loss_channel(state: State, eta: float, mode: int) -> FockDensityOperator:
    """Pure-loss channel of transmission eta on one mode, as a Kraus sum."""
    rho = as_density(state)
    (mode,) = _check_modes([mode], rho.num_modes)
    d = rho.cutoffs[mode]
    dims = [d + 1]
    nmodes = rho.num_modes
    out = np.zeros_like(rho.data)
    for k_op in loss_kraus(eta, d):
        if not k_op.any():
            continue
        t = _contract(rho.data, k_op, [mode], dims)
        out += _contract(t, k_op, [mode + nmodes], dims)
    return FockDensityOperator(out)


def partial_trace(state: State, keep: Sequence[int]) -> FockDensityOperator:
    nmodes = state.num_modes
    keep = _check_modes(keep, nmodes)
    if isinstance(state, FockKet):
        drop = [i for i in range(nmodes) if i not in keep]
        amps = np.moveaxis(state.amplitudes, keep + drop, range(nmodes))
        kept_dims = amps.shape[: len(keep)]
        mat = amps.reshape(int(np.prod(kept_dims)), -1)
        return FockDensityOperator((mat @ mat.conj().T).reshape(kept_dims + kept_dims))
    rho = state
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = [letters[i] for i in range(nmodes)]
    cols = [letters[i] if i not in keep else letters[i].upper() for i in range(nmodes)]
    out = [rows[i] for i in keep] + [cols[i] for i in keep]
    spec = "".join(rows) + "".join(cols) + "->" + "".join(out)
    return FockDensityOperator(np.einsum(spec, rho.data))


def trim(rho: FockDensityOperator, tol: float = TRUNCATION_TOL) -> FockDensityOperator:
    """Lower a single-mode cutoff while the discarded diagonal weight stays <= tol."""
    if rho.num_modes != 1:
        raise ValueError("trim works on single-mode states")
    diag = np.diag(rho.matrix).real
    tail = np.cumsum(diag[::-1])[::-1]  # tail[k] = sum_{n>=k} p_n
    cutoff = rho.cutoffs[0]
    while cutoff > 0 and tail[cutoff] <= tol:
        cutoff -= 1
    return embed(rho, [cutoff])  # type: ignore[return-value]


# --------------------------------------------------------------------------
# Measurements and figures of merit
# --------------------------------------------------------------------------


def photon_distribution(state: State, modes: Sequence[int] | None = None) -> np.ndarray:
    """Joint photon-number probabilities p(n_i, n_j, ...) over the given modes."""
    if isinstance(state, FockKet):
        joint = np.abs(state.amplitudes) ** 2
    else:
        joint = np.diagonal(state.matrix).real.reshape(state.dims).copy()
    nmodes = state.num_modes
    modes = list(range(nmodes)) if modes is None else _check_modes(modes, nmodes)
    drop = tuple(i for i in range(nmodes) if i not in modes)
    marg = joint.sum(axis=drop) if drop else joint
    kept = [i for i in range(nmodes) if i in modes]
    return np.clip(np.transpose(marg, [kept.index(m) for m in modes]), 0.0, None)


def marginal_distribution(state: State, mode: int) -> CountDistribution:
    probs = photon_distribution(state, [mode])
    return CountDistribution(probs, provenance="exact")


def mean_photon(state: State, mode: int = 0) -> float:
    probs = photon_distribution(state, [mode])
    return float(np.arange(len(probs)) @ probs)


def purity_fock(state: State) -> float:
    if isinstance(state, FockKet):
        return float(np.vdot(state.amplitudes, state.amplitudes).real ** 2)
    mat = state.matrix
    return float(np.vdot(mat.conj().T, mat).real)


def qcs_direct(rho: State, purity_floor: float = 1e-6) -> float:
    """QCS from the commutator definition, (||[rho,x]||^2 + ||[rho,p]||^2) / (2 Tr rho^2).

    The state is padded by one level so the truncated quadratures act exactly
    on its support; the result is therefore exact for the stored matrix.
    """
    rho = as_density(rho)
    if rho.num_modes != 1:
        raise ValueError("qcs_direct needs a single-mode state")
    d = rho.cutoffs[0]
    mat = embed(rho, [d + 1]).matrix  # type: ignore[union-attr]
    ops = ladder_ops(d + 1)
    pur = float(np.vdot(mat.conj().T, mat).real)
    if pur < purity_floor:
        raise NumericalError(f"purity {pur:.3e} is below the floor {purity_floor:.1e}")
    if rho.trace_deficit > DEFICIT_FLOOR:
        _warn_if_heavy_tail(np.diag(rho.matrix).real)
    cx = mat @ ops.x - ops.x @ mat
    cp = mat @ ops.p - ops.p @ mat
    num = np.vdot(cx, cx).real + np.vdot(cp, cp).real
    return float(num / (2.0 * pur))


def _warn_if_heavy_tail(diag: np.ndarray, rel_tol: float = 1e-6) -> None:
    n = np.arange(len(diag))
    second = float(n**2 @ diag)
    top = float(n[-2:] ** 2 @ diag[-2:]) if len(diag) > 1 else 0.0
    if second > 0 and top > rel_tol * second:
        warnings.warn(
            f"photon-number tail at the cutoff carries {top / second:.2e} of <n^2>; "
            "increase the cutoff",
            TruncationWarning,
            stacklevel=3,
        )


def two_copy_joint_distribution(rho: State, other: State | None = None) -> np.ndarray:
    """Output photon statistics p(n_0, n_1) of rho (x) other through the balanced splitter.

    Uses photon-number conservation: only blocks of fixed total number N are
    mixed, so each block is transformed exactly and nothing is lost at the
    output.  The result has shape (d0 + d1 + 1, d0 + d1 + 1).
    """
    r1 = as_density(rho).matrix
    r2 = as_density(other if other is not None else rho).matrix
    if r1.ndim != 2 or as_density(rho).num_modes != 1:
        raise ValueError("two-copy statistics need single-mode inputs")
    d1, d2 = r1.shape[0] - 1, r2.shape[0] - 1
    size = d1 + d2 + 1
    joint = np.zeros((size, size))
    bs = beam_splitter("balanced")
    for total in range(d1 + d2 + 1):
        kin = np.arange(max(0, total - d2), min(total, d1) + 1)
        block_in = r1[np.ix_(kin, kin)] * r2[np.ix_(total - kin, total - kin)]
        u = bs.block(total)[:, kin]
        probs = np.einsum("ij,jk,ik->i", u, block_in, u.conj()).real
        kout = np.arange(total + 1)
        joint[kout, total - kout] = probs
    return np.clip(joint, 0.0, None)


def two_copy_distribution(rho: State) -> CountDistribution:
    """Photon statistics of the difference (destructive-interference) output mode."""
    joint = two_copy_joint_distribution(rho)
    deficit = as_density(rho).trace_deficit
    return CountDistribution(joint.sum(axis=0), provenance="exact", tail_tol=max(TRUNCATION_TOL, 3 * deficit))


def qcs_two_copy(rho: State, purity_floor: float = 1e-6) -> float:
    """QCS as <(-1)^n (1 + 2n)> / <(-1)^n> on the difference mode of rho (x) rho."""
    probs = two_copy_distribution(rho).probs
    n = np.arange(len(probs))
    sign = (-1.0) ** n
    parity = float(sign @ probs)
    if parity < purity_floor:
        raise NumericalError(f"parity {parity:.3e} is below the floor {purity_floor:.1e}")
    return float((sign * (1 + 2 * n)) @ probs / parity)
