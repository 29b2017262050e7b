"""Two-copy QCS experiments as declarative circuits, and their execution.

Time-bin modes are modelled as spatial modes; delay loops are pure routing.
A circuit is a list of squeezed sources followed by beam splitters, phase
shifts and loss channels, ending in photon counting.  The QCS is read from the
difference output of the last balanced beam splitter (``marginal``).

Text form, one element per line::

    source <mode> r=<f> phi=<f>
    bs <symmetric|balanced> <m1> <m2>
    loss <mode> eta=<f>
    phase <mode> theta=<f>
    detect <modes...>
    marginal <mode>
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from . import fock, gaussian
from .counts import CountDistribution
from .errors import InvalidStateError, NumericalError

ROUTE_TOL = 1e-5
SOURCE_TOL = 1e-12


@dataclass(frozen=True)
class Source:
    mode: int
    r: float
    phi: float = 0.0


@dataclass(frozen=True)
class BeamSplitter:
    kind: str
    modes: tuple[int, int]


@dataclass(frozen=True)
class Phase:
    mode: int
    theta: float


@dataclass(frozen=True)
class Loss:
    mode: int
    eta: float


Element = Union[BeamSplitter, Phase, Loss]


@dataclass(frozen=True)
class CircuitSpec:
    sources: tuple[Source, ...]
    elements: tuple[Element, ...]
    detected: tuple[int, ...]
    marginal_mode: int
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "detected", tuple(int(m) for m in self.detected))
        self.validate()

    @property
    def num_modes(self) -> int:
        modes = [s.mode for s in self.sources] + list(self.detected) + [self.marginal_mode]
        for el in self.elements:
            modes.extend(el.modes if isinstance(el, BeamSplitter) else [el.mode])
        return max(modes) + 1

    def validate(self) -> None:
        src_modes = [s.mode for s in self.sources]
        if len(set(src_modes)) != len(src_modes):
            raise ValueError("two sources drive the same mode")
        for s in self.sources:
            if s.mode < 0 or s.r < 0 or not math.isfinite(s.r) or not math.isfinite(s.phi):
                raise ValueError(f"invalid source {s}")
        for el in self.elements:
            if isinstance(el, BeamSplitter):
                if el.kind not in ("symmetric", "balanced"):
                    raise ValueError(f"unknown beam splitter kind {el.kind!r}")
                a, b = el.modes
                if a == b or min(a, b) < 0:
                    raise ValueError(f"invalid beam splitter modes {el.modes}")
            elif isinstance(el, Loss):
                if not 0.0 <= el.eta <= 1.0 or el.mode < 0:
                    raise ValueError(f"invalid loss element {el}")
            elif isinstance(el, Phase):
                if el.mode < 0 or not math.isfinite(el.theta):
                    raise ValueError(f"invalid phase element {el}")
            else:
                raise TypeError(f"unknown element {el!r}")
        if self.marginal_mode not in self.detected:
            raise ValueError("the marginal mode must be one of the detected modes")

    # -- text form ---------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"source {s.mode} r={s.r!r} phi={s.phi!r}" for s in self.sources]
        for el in self.elements:
            if isinstance(el, BeamSplitter):
                lines.append(f"bs {el.kind} {el.modes[0]} {el.modes[1]}")
            elif isinstance(el, Loss):
                lines.append(f"loss {el.mode} eta={el.eta!r}")
            else:
                lines.append(f"phase {el.mode} theta={el.theta!r}")
        lines.append("detect " + " ".join(str(m) for m in self.detected))
        lines.append(f"marginal {self.marginal_mode}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CircuitSpec":
        sources, elements, detected, marginal = [], [], None, None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            word, *args = line.split()
            try:
                if word == "source":
                    mode, r, phi = args
                    sources.append(Source(int(mode), _kv(r, "r"), _kv(phi, "phi")))
                elif word == "bs":
                    kind, a, b = args
                    elements.append(BeamSplitter(kind, (int(a), int(b))))
                elif word == "loss":
                    mode, eta = args
                    elements.append(Loss(int(mode), _kv(eta, "eta")))
                elif word == "phase":
                    mode, theta = args
                    elements.append(Phase(int(mode), _kv(theta, "theta")))
                elif word == "detect":
                    detected = tuple(int(a) for a in args)
                elif word == "marginal":
                    (mode,) = args
                    marginal = int(mode)
                else:
                    raise ValueError(f"unknown keyword {word!r}")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        if detected is None or marginal is None:
            raise ValueError("circuit needs 'detect' and 'marginal' lines")
        return cls(tuple(sources), tuple(elements), detected, marginal)

    @classmethod
    def load(cls, path: str | Path) -> "CircuitSpec":
        return cls.from_text(Path(path).read_text())


def _kv(token: str, key: str) -> float:
    name, sep, value = token.partition("=")
    if name != key or not sep:
        raise ValueError(f"expected {key}=<value>, got {token!r}")
    return float(value)


# --------------------------------------------------------------------------
# The two experiments
# --------------------------------------------------------------------------


def build_sv_experiment(r: float, phi: float = 0.0, eta: float = 1.0) -> CircuitSpec:
    """Two squeezed vacua, identical loss on each, balanced splitter, count both outputs."""
    _check_params(r, eta)
    return CircuitSpec(
        sources=(Source(0, r, phi), Source(1, r, phi)),
        elements=(Loss(0, eta), Loss(1, eta), BeamSplitter("balanced", (0, 1))),
        detected=(0, 1),
        marginal_mode=1,
        metadata={"kind": "squeezed", "r": r, "phi": phi, "eta": eta},
    )


def build_thermal_experiment(r: float, phi: float = 0.0, eta: float = 1.0) -> CircuitSpec:
    """Two TMSV pairs; one branch of each (modes 1 and 3) is compared on a balanced splitter.

    Sources carry phase phi + pi/2 so that the symmetric splitter produces the
    two-mode squeezed vacuum of phase phi.  Modes 0 and 2 are counted but never
    enter the QCS.
    """
    _check_params(r, eta)
    src_phi = phi + math.pi / 2
    return CircuitSpec(
        sources=tuple(Source(m, r, src_phi) for m in range(4)),
        elements=(
            BeamSplitter("symmetric", (0, 1)),
            BeamSplitter("symmetric", (2, 3)),
            Loss(1, eta),
            Loss(3, eta),
            BeamSplitter("balanced", (1, 3)),
        ),
        detected=(0, 1, 2, 3),
        marginal_mode=3,
        metadata={"kind": "thermal", "r": r, "phi": phi, "eta": eta},
    )


def _check_params(r: float, eta: float) -> None:
    if r < 0:
        raise ValueError("squeezing must be non-negative")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")


# --------------------------------------------------------------------------
# Circuit analysis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Layout:
    """Where the two copies come from and where they meet."""

    final_index: int
    inputs: tuple[int, int]
    marginal_output: int  # 0 or 1: which splitter output is counted
    components: tuple[tuple[int, ...], tuple[int, ...]]
    pre: tuple[tuple[Element, ...], tuple[Element, ...]]
    eta: float  # aggregate transmission seen by each copy


def _analyse(spec: CircuitSpec) -> _Layout:
    final = None
    for i, el in enumerate(spec.elements):
        if isinstance(el, BeamSplitter) and el.kind == "balanced" and spec.marginal_mode in el.modes:
            final = i
    if final is None:
        raise ValueError("no balanced beam splitter feeds the marginal mode")
    bs = spec.elements[final]
    a, b = bs.modes

    # uniform loss on both outputs commutes with the splitter; fold it back
    post_eta = {a: 1.0, b: 1.0}
    for el in spec.elements[final + 1 :]:
        if isinstance(el, Loss) and el.mode in (a, b):
            post_eta[el.mode] *= el.eta
        elif isinstance(el, BeamSplitter) and set(el.modes) & {a, b}:
            raise ValueError("elements mixing the compared modes after the final splitter are not supported")
    if abs(post_eta[a] - post_eta[b]) > 1e-15:
        raise ValueError("loss after the final splitter must act identically on both outputs")

    parent = list(range(spec.num_modes))

    def find(m):
        while parent[m] != m:
            parent[m] = parent[parent[m]]
            m = parent[m]
        return m

    for el in spec.elements[:final]:
        if isinstance(el, BeamSplitter):
            parent[find(el.modes[0])] = find(el.modes[1])
    if find(a) == find(b):
        raise ValueError("the two compared modes are correlated; the two-copy protocol needs independent copies")
    comps = tuple(tuple(m for m in range(spec.num_modes) if find(m) == find(x)) for x in (a, b))
    pre = tuple(
        tuple(el for el in spec.elements[:final] if set(_modes(el)) <= set(comp)) for comp in comps
    )
    etas = []
    for mode, elems in zip((a, b), pre):
        eta = 1.0
        seen_two_mode = False
        for el in reversed(elems):
            if isinstance(el, BeamSplitter):
                seen_two_mode = True
            elif isinstance(el, Loss):
                if el.mode != mode or seen_two_mode:
                    eta = math.nan  # loss inside the preparation stage; no single aggregate value
                else:
                    eta *= el.eta
        etas.append(eta * post_eta[mode])
    if not (math.isnan(etas[0]) or math.isnan(etas[1])) and abs(etas[0] - etas[1]) > 1e-15:
        raise ValueError(
            f"asymmetric loss on the compared copies ({etas[0]} vs {etas[1]}); "
            "the protocol requires identical transmission on each input"
        )
    return _Layout(final, (a, b), bs.modes.index(spec.marginal_mode), comps, pre, etas[0])


def _modes(el: Element) -> tuple[int, ...]:
    return el.modes if isinstance(el, BeamSplitter) else (el.mode,)


# --------------------------------------------------------------------------
# Results
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentResult:
    """Outcome of one circuit run.

    ``qcs_direct`` is the single-copy value (commutator definition for the Fock
    engine, covariance formula for the Gaussian one); ``qcs_two_copy`` is read
    from the counted difference mode.
    """

    exact_distribution: CountDistribution
    qcs_analytic: float
    qcs_direct: float
    qcs_two_copy: float
    purity: float
    mean_photon_out: float
    input_moment: float
    eta: float
    engine: str
    metadata: dict

    @property
    def route_spread(self) -> float:
        vals = [v for v in (self.qcs_analytic, self.qcs_direct, self.qcs_two_copy) if not math.isnan(v)]
        return max(vals) - min(vals)


def run_circuit(
    spec: CircuitSpec,
    engine: str = "gaussian",
    cutoff: int | None = None,
    tol: float = SOURCE_TOL,
    route_tol: float = ROUTE_TOL,
) -> ExperimentResult:
    """Execute a two-copy circuit on the 'gaussian' or 'fock' engine."""
    layout = _analyse(spec)
    if engine == "gaussian":
        result = _run_gaussian(spec, layout, tol)
    elif engine == "fock":
        result = _run_fock(spec, layout, cutoff, tol)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if result.route_spread > route_tol:
        warnings.warn(f"QCS routes disagree by {result.route_spread:.2e}", RuntimeWarning, stacklevel=2)
    return result


def _analytic(spec: CircuitSpec, layout: _Layout) -> tuple[float, float]:
    """Closed-form QCS of the copy entering the final splitter, and its lossless <a^dag a>."""
    lossless = _gaussian_state(spec, layout.final_index, include_loss=False)
    single = lossless.reduced([layout.inputs[0]])
    moment = gaussian.mean_photon_number(single) - float(single.mean @ single.mean) / 2
    if math.isnan(layout.eta):
        return math.nan, moment
    w = gaussian.total_variance(single)
    return gaussian.qcs_lossy_gaussian(max(w, 1.0), min(gaussian.purity(single), 1.0), layout.eta), moment


def _gaussian_state(spec: CircuitSpec, stop: int | None = None, include_loss: bool = True) -> gaussian.GaussianState:
    state = gaussian.GaussianState.vacuum(spec.num_modes)
    for s in spec.sources:
        state = gaussian.apply_symplectic(state, gaussian.squeeze_op(s.r, s.phi), [s.mode])
    for el in spec.elements[:stop]:
        if isinstance(el, BeamSplitter):
            state = gaussian.apply_symplectic(state, gaussian.beam_splitter_op(el.kind), el.modes)
        elif isinstance(el, Phase):
            state = gaussian.apply_symplectic(state, gaussian.phase_op(el.theta), [el.mode])
        elif include_loss:
            state = gaussian.apply_loss(state, el.eta, el.mode)
    return state


def _gaussian_distribution(state: gaussian.GaussianState, mode: int, tol: float) -> CountDistribution:
    n_max = 32
    while True:
        probs = gaussian.photon_number_distribution(state, n_max, mode)
        if 1.0 - probs.sum() <= tol or n_max > 4096:
            return CountDistribution(probs, provenance="exact", tail_tol=max(tol, 1e-12))
        n_max *= 2


def _ratio_qcs(dist: CountDistribution) -> float:
    n = np.arange(len(dist.probs))
    sign = (-1.0) ** n
    parity = float(sign @ dist.probs)
    if parity <= 0:
        raise NumericalError(f"non-positive parity {parity:.3e}")
    return float((sign * (1 + 2 * n)) @ dist.probs / parity)


def _run_gaussian(spec: CircuitSpec, layout: _Layout, tol: float) -> ExperimentResult:
    final_state = _gaussian_state(spec)
    dist = _gaussian_distribution(final_state, spec.marginal_mode, tol)
    copy = _gaussian_state(spec, layout.final_index).reduced([layout.inputs[0]])
    if not math.isnan(layout.eta):
        post = _post_eta(layout)
        copy = gaussian.apply_loss(copy, post, 0) if post < 1 else copy
    analytic, moment = _analytic(spec, layout)
    return ExperimentResult(
        exact_distribution=dist,
        qcs_analytic=analytic,
        qcs_direct=gaussian.qcs_gaussian(copy),
        qcs_two_copy=_ratio_qcs(dist),
        purity=gaussian.purity(copy),
        mean_photon_out=gaussian.mean_photon_number(final_state, spec.marginal_mode),
        input_moment=moment,
        eta=layout.eta,
        engine="gaussian",
        metadata=dict(spec.metadata, n_max=dist.n_max),
    )


def _pre_eta(layout: _Layout) -> float:
    eta = 1.0
    for el in layout.pre[0]:
        if isinstance(el, Loss):
            eta *= el.eta
    return eta


def _post_eta(layout: _Layout) -> float:
    """Transmission of the loss folded back from behind the final splitter."""
    pre = _pre_eta(layout)
    return layout.eta / pre if pre > 0 else 1.0


def prepare_copy(spec: CircuitSpec, which: int = 0, cutoff: int | None = None, tol: float = SOURCE_TOL,
                 include_loss: bool = True) -> fock.FockDensityOperator:
    """Single-mode Fock state of one copy entering the final balanced splitter.

    Each copy is simulated on its own (at most two modes), as a ket until the
    first loss; modes that never reach the splitter are traced out before any
    loss on the kept mode is applied.
    """
    layout = _analyse(spec)
    return _prepare_copy(spec, layout, which, cutoff, tol, include_loss)


def _prepare_copy(spec, layout, which, cutoff, tol, include_loss=True):
    comp = list(layout.components[which])
    keep = layout.inputs[which]
    if len(comp) > 2:
        raise ValueError("copies prepared from more than two modes are not supported")
    local = {m: i for i, m in enumerate(comp)}
    srcs = {s.mode: s for s in spec.sources}
    kets = []
    for m in comp:
        s = srcs.get(m)
        if s is None:
            kets.append(fock.vacuum(1, cutoff or 0))
        else:
            kets.append(fock.squeezed_vacuum_ket(s.r, s.phi, cutoff=cutoff, tol=tol))
    dmax = max(k.cutoffs[0] for k in kets)
    state = fock.tensor(*[fock.embed(k, [dmax]) for k in kets])
    elems = list(layout.pre[which])
    # pure two-mode stage
    while elems and not isinstance(elems[0], Loss):
        el = elems.pop(0)
        if isinstance(el, BeamSplitter):
            state = fock.apply_unitary(state, fock.beam_splitter(el.kind), [local[m] for m in el.modes])
        else:
            state = fock.apply_unitary(state, fock.phase_shift(el.theta), [local[el.mode]])
    if any(isinstance(el, BeamSplitter) for el in elems) or any(el.mode != keep for el in elems if isinstance(el, Loss)):
        raise ValueError("loss before the last two-mode operation of a copy is not supported by the Fock engine")
    rho = fock.partial_trace(state, [local[keep]])
    for el in elems:
        if isinstance(el, Loss):
            if include_loss:
                rho = fock.apply_loss_channel(rho, el.eta, 0)
        elif isinstance(el, Phase) and el.mode == keep:
            rho = fock.apply_unitary(rho, fock.phase_shift(el.theta), [0])  # type: ignore[assignment]
    if include_loss:
        post = _post_eta(layout) if not math.isnan(layout.eta) else 1.0
        if post < 1.0:
            rho = fock.apply_loss_channel(rho, post, 0)
    return rho


def _run_fock(spec: CircuitSpec, layout: _Layout, cutoff: int | None, tol: float) -> ExperimentResult:
    rhos = [_prepare_copy(spec, layout, w, cutoff, tol) for w in (0, 1)]
    d = max(r.cutoffs[0] for r in rhos)
    m0, m1 = (fock.embed(r, [d]).matrix for r in rhos)
    if np.max(np.abs(m0 - m1)) > 1e-8:
        raise InvalidStateError("the two copies entering the balanced splitter differ")
    rho = fock.trim(rhos[0], tol)
    joint = fock.two_copy_joint_distribution(rho)
    marg = joint.sum(axis=1 - layout.marginal_output)
    dist = CountDistribution(marg, provenance="exact", tail_tol=max(10 * tol, 1e-10))
    lossless = _prepare_copy(spec, layout, 0, cutoff, tol, include_loss=False)
    analytic, _ = _analytic(spec, layout)
    return ExperimentResult(
        exact_distribution=dist,
        qcs_analytic=analytic,
        qcs_direct=fock.qcs_direct(rho),
        qcs_two_copy=_ratio_qcs(dist),
        purity=fock.purity_fock(rho),
        mean_photon_out=dist.mean,
        input_moment=fock.mean_photon(lossless),
        eta=layout.eta,
        engine="fock",
        metadata=dict(spec.metadata, cutoff=rho.cutoffs[0], trace_deficit=rho.trace_deficit),
    )


def simulate_dense(spec: CircuitSpec, cutoff: int) -> fock.State:
    """Brute-force simulation of every mode at a common cutoff (small circuits only)."""
    srcs = {s.mode: s for s in spec.sources}
    kets = []
    for m in range(spec.num_modes):
        s = srcs.get(m)
        kets.append(fock.squeezed_vacuum_ket(s.r, s.phi, cutoff=cutoff, tol=1.0) if s else fock.vacuum(1, cutoff))
    state: fock.State = fock.tensor(*kets)
    for el in spec.elements:
        if isinstance(el, BeamSplitter):
            state = fock.apply_unitary(state, fock.beam_splitter(el.kind), list(el.modes))
        elif isinstance(el, Phase):
            state = fock.apply_unitary(state, fock.phase_shift(el.theta), [el.mode])
        else:
            state = fock.apply_loss_channel(state, el.eta, el.mode)
    return state
