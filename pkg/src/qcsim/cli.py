"""Command-line front end: ``qcsim analytic | table1 | simulate | etastar``.

Exit codes: 0 on success, 1 on usage or parameter errors, 2 on numerical or
conditioning failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimator, gaussian, protocol
from .errors import NumericalError

DEFAULT_R = (0.653, 0.978, 1.156)

# state, r, eta_C, eta_M, measured QCS, its standard error
TABLE1 = (
    ("squeezed", 0.653, 0.190, 0.2010, 0.9003, 0.0009),
    ("squeezed", 0.978, 0.190, 0.1901, 0.809, 0.002),
    ("squeezed", 1.156, 0.190, 0.183, 0.760, 0.003),
    ("thermal", 0.653, 0.267, 0.2564, 0.792, 0.001),
    ("thermal", 0.978, 0.267, 0.2447, 0.584, 0.003),
    ("thermal", 1.156, 0.267, 0.240, 0.459, 0.005),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    r: list[float] = field(default_factory=list)
    nbar: list[float] = field(default_factory=list)
    eta: list[float] = field(default_factory=list)
    total_var: list[float] = field(default_factory=list)
    purity: list[float] = field(default_factory=list)
    phi: float = 0.0
    engine: str = "gaussian"
    trials: int = 1_000_000
    seed: int = 7
    cutoff: int | None = None
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1
    experiment: str | None = None
    spec: str | None = None

    def validate(self) -> None:
        if any(r < 0 for r in self.r):
            raise UsageError("--r values must be non-negative")
        if any(n < 0 for n in self.nbar):
            raise UsageError("--nbar values must be non-negative")
        if any(not 0.0 <= e <= 1.0 for e in self.eta):
            raise UsageError("--eta values must lie in [0, 1]")
        if self.trials < 2:
            raise UsageError("--trials must be at least 2")
        if self.cutoff is not None and self.cutoff < 1:
            raise UsageError("--cutoff must be positive")


def parse_floats(text: str) -> list[float]:
    """Parse ``a,b,c`` or an inclusive grid ``start:stop:step``."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}")
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _flatten(groups) -> list[float]:
    return [x for g in groups or [] for x in g]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, trials=False):
        p.add_argument("--out", help="output file (directory for simulate); stdout if omitted")
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
        if trials:
            p.add_argument("--trials", type=int, default=1_000_000)
            p.add_argument("--seed", type=int, default=7)
            p.add_argument("--engine", choices=("gaussian", "fock"), default="gaussian")
            p.add_argument("--cutoff", type=int)

    p = sub.add_parser("analytic", help="closed-form QCS grids for squeezed and thermal light")
    p.add_argument("--r", type=parse_floats, nargs="+")
    p.add_argument("--nbar", type=parse_floats, nargs="+")
    p.add_argument("--eta", type=parse_floats, nargs="+")
    common(p)

    p = sub.add_parser("table1", help="theory, simulated and reported values for the six measured states")
    p.add_argument("--r", type=parse_floats, nargs="+", help="custom rows instead of the reported ones")
    p.add_argument("--eta", type=parse_floats, nargs="+")
    common(p, trials=True)

    p = sub.add_parser("simulate", help="run one experiment end to end")
    p.add_argument("experiment", nargs="?", choices=("sv", "thermal"))
    p.add_argument("--spec", help="circuit description file")
    p.add_argument("--r", type=parse_floats, nargs="+")
    p.add_argument("--eta", type=parse_floats, nargs="+")
    p.add_argument("--phi", type=float, default=0.0)
    common(p, trials=True)

    p = sub.add_parser("etastar", help="transmission below which the QCS stops certifying quantumness")
    p.add_argument("--W", dest="total_var", type=parse_floats, nargs="+", help="total variance Var(x)+Var(p)")
    p.add_argument("--purity", type=parse_floats, nargs="+")
    p.add_argument("--r", type=parse_floats, nargs="+", help="pure squeezed vacuum, W = cosh 2r")
    common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    for name in ("r", "nbar", "eta", "total_var", "purity"):
        setattr(cfg, name, _flatten(getattr(args, name, None)))
    for name in ("phi", "engine", "trials", "seed", "cutoff", "out", "fmt", "workers", "experiment", "spec"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_analytic(cfg: RunConfig) -> list[dict]:
    r_values = cfg.r or list(DEFAULT_R)
    nbars = cfg.nbar or [math.sinh(r) ** 2 for r in r_values]
    etas = cfg.eta or parse_floats("0:1:0.01")
    rows = []
    for r in r_values:
        w = math.cosh(2 * r)
        star = gaussian.eta_star(w, 1.0) if r > 0 else None
        for eta in etas:
            rows.append({"state": "squeezed", "r": r, "nbar": math.sinh(r) ** 2, "eta": eta,
                         "qcs": gaussian.qcs_squeezed_lossy(r, eta), "eta_star": star})
    for i, nbar in enumerate(nbars):
        r = r_values[i] if not cfg.nbar and i < len(r_values) else None
        for eta in etas:
            rows.append({"state": "thermal", "r": r, "nbar": nbar, "eta": eta,
                         "qcs": gaussian.qcs_thermal_lossy(nbar, eta), "eta_star": None})
    return rows


def cmd_etastar(cfg: RunConfig) -> list[dict]:
    pairs = [(math.cosh(2 * r), 1.0) for r in cfg.r]
    if cfg.total_var:
        purities = cfg.purity or [1.0]
        if len(purities) == 1:
            purities = purities * len(cfg.total_var)
        if len(purities) != len(cfg.total_var):
            raise UsageError("--W and --purity need the same number of values")
        pairs += list(zip(cfg.total_var, purities))
    if not pairs:
        raise UsageError("give --r or --W (with optional --purity)")
    rows = []
    for w, pur in pairs:
        if w < 1 or not 0 < pur <= 1:
            raise UsageError(f"invalid (W, purity) = ({w}, {pur})")
        certifiable = w * pur**2 > 1
        rows.append({"W": w, "purity": pur, "certifiable": certifiable,
                     "eta_star": gaussian.eta_star(w, pur) if certifiable else None})
    return rows


def _builder(state: str):
    return protocol.build_sv_experiment if state == "squeezed" else protocol.build_thermal_experiment


def _table_row(task) -> dict:
    index, state, r, eta, eta_label, measured, measured_err, cfg = task
    theory = (gaussian.qcs_squeezed_lossy(r, eta) if state == "squeezed"
              else gaussian.qcs_thermal_lossy(math.sinh(r) ** 2, eta))
    result = protocol.run_circuit(_builder(state)(r, cfg.phi, eta), cfg.engine, cutoff=cfg.cutoff)
    sampled = estimator.sample_counts(result.exact_distribution, cfg.trials, cfg.seed + index)
    est = estimator.qcs_from_distribution(sampled)
    row = {"state": state, "r": r, "eta_kind": eta_label, "eta": eta, "theory": theory,
           "exact_two_copy": result.qcs_two_copy, "sampled": est.qcs, "sampled_std": est.std,
           "n_trials": cfg.trials, "reported": measured, "reported_std": measured_err,
           "reported_rel_below": None if measured is None else (theory - measured) / theory}
    return row


def cmd_table1(cfg: RunConfig) -> list[dict]:
    tasks = []
    if cfg.r:
        etas = cfg.eta or [1.0]
        for state in ("squeezed", "thermal"):
            for r in cfg.r:
                for eta in etas:
                    tasks.append((state, r, eta, "custom", None, None))
    else:
        for state, r, eta_c, eta_m, measured, err in TABLE1:
            tasks.append((state, r, eta_c, "calibrated", measured, err))
            tasks.append((state, r, eta_m, "measured", measured, err))
    tasks = [(i, *t, cfg) for i, t in enumerate(tasks)]
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        return list(pool.map(_table_row, tasks))


def cmd_simulate(cfg: RunConfig) -> dict:
    if cfg.spec:
        spec = protocol.CircuitSpec.load(cfg.spec)
        r_in = spec.sources[0].r if spec.sources else 0.0
    elif cfg.experiment:
        if len(cfg.r) != 1 or len(cfg.eta) > 1:
            raise UsageError("simulate takes exactly one --r and at most one --eta")
        r_in = cfg.r[0]
        eta = cfg.eta[0] if cfg.eta else 1.0
        build = protocol.build_sv_experiment if cfg.experiment == "sv" else protocol.build_thermal_experiment
        spec = build(r_in, cfg.phi, eta)
    else:
        raise UsageError("give a built-in experiment (sv | thermal) or --spec")
    result = protocol.run_circuit(spec, cfg.engine, cutoff=cfg.cutoff)
    exact = result.exact_distribution
    sampled = estimator.sample_counts(exact, cfg.trials, cfg.seed)
    est = estimator.qcs_from_distribution(sampled)
    trunc = estimator.truncated_estimate(sampled, 4)
    band = estimator.theory_error_band(sampled, exact)
    eta_hat = estimator.eta_from_energy(sampled.mean, r_in) if r_in > 0 else None
    summary = {
        "engine": cfg.engine,
        "eta": result.eta,
        "qcs_analytic": result.qcs_analytic,
        "qcs_direct": result.qcs_direct,
        "qcs_two_copy": result.qcs_two_copy,
        "purity": result.purity,
        "mean_photon_out": result.mean_photon_out,
        "sampled_qcs": est.qcs,
        "sampled_purity": est.purity,
        "sampled_variance": est.variance,
        "sampled_std": est.std,
        "n_trials": est.n_trials,
        "seed": cfg.seed,
        "eta_from_energy": None if eta_hat is None else eta_hat.value,
        "eta_from_energy_raw": None if eta_hat is None else eta_hat.raw,
        "truncated4_qcs": trunc.qcs,
        "theory_band_variance": band,
        "theory_band_std": math.sqrt(band),
    }
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        exact.to_csv(out / "exact.csv")
        sampled.to_csv(out / "sampled.csv")
        est.save(out / "estimate.txt")
        (out / "circuit.txt").write_text(spec.to_text())
        (out / f"summary.{cfg.fmt}").write_text(_render([summary], cfg.fmt, single=True))
    return summary


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render(rows: list[dict], fmt: str, single: bool = False) -> str:
    if fmt == "json":
        payload = rows[0] if single else rows
        return json.dumps(payload, indent=2, default=float) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if rows:
        writer.writerow(rows[0].keys())
        for row in rows:
            writer.writerow(_cell(v) for v in row.values())
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if cfg.command == "analytic":
            rows = cmd_analytic(cfg)
        elif cfg.command == "etastar":
            rows = cmd_etastar(cfg)
        elif cfg.command == "table1":
            rows = cmd_table1(cfg)
        else:
            summary = cmd_simulate(cfg)
            if not cfg.out:
                sys.stdout.write(_render([summary], cfg.fmt, single=True))
            return 0
    except (UsageError, ValueError) as exc:
        print(f"qcsim: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"qcsim: numerical error: {exc}", file=sys.stderr)
        return 2
    text = _render(rows, cfg.fmt)
    if cfg.out and cfg.out != "-":
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
