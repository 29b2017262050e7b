"""Acceptance suite: one PASS/FAIL line per criterion, at the contract tolerances.

Two criteria are known to be unattainable and are marked as strict expected
failures; they still evaluate the original assertion and print FAIL.
"""

import math
import time

import numpy as np
import pytest

from qcsim import cli, estimator, fock, gaussian
from qcsim import protocol as pr
from qcsim.counts import CountDistribution

# state, r, eta_M, reported QCS
TABLE = [
    ("squeezed", 0.653, 0.2010, 0.9003),
    ("squeezed", 0.978, 0.1901, 0.809),
    ("squeezed", 1.156, 0.183, 0.760),
    ("thermal", 0.653, 0.2564, 0.792),
    ("thermal", 0.978, 0.2447, 0.584),
    ("thermal", 1.156, 0.240, 0.459),
]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def build(state, r, eta):
    maker = pr.build_sv_experiment if state == "squeezed" else pr.build_thermal_experiment
    return maker(r, 0.0, eta)


def test_1_closed_forms(report):
    worst_formula, worst_gap = 0.0, 0.0
    below = True
    for state, r, eta, measured in TABLE:
        if state == "squeezed":
            value = gaussian.qcs_squeezed_lossy(r, eta)
            g = eta * math.cosh(2 * r) - eta
            oracle = 1 / (1 + (1 - 2 * eta) * g / (g + 1))
        else:
            value = gaussian.qcs_thermal_lossy(math.sinh(r) ** 2, eta)
            oracle = 1 / (1 + 2 * eta * math.sinh(r) ** 2)
        worst_formula = max(worst_formula, abs(value - oracle))
        gap = (value - measured) / value
        below &= 0 <= gap <= 0.10
        worst_gap = max(worst_gap, gap)
    ok = worst_formula <= 1e-10 and below
    report(1, ok, f"max |formula - oracle| = {worst_formula:.1e}; measured below theory by <= {worst_gap:.1%}")
    assert ok


def test_2_engine_equivalence(report):
    start = time.perf_counter()
    worst, max_cut = 0.0, 0
    for state, r, eta, _ in TABLE:
        spec = build(state, r, eta)
        g = pr.run_circuit(spec, "gaussian")
        f = pr.run_circuit(spec, "fock")
        closed = g.qcs_analytic
        worst = max(worst, abs(f.qcs_direct - closed), abs(f.qcs_two_copy - closed), abs(g.qcs_two_copy - closed))
        max_cut = max(max_cut, f.metadata["cutoff"])
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and elapsed < 60 and max_cut <= 40
    report(2, ok, f"max route disagreement {worst:.1e}, largest cutoff {max_cut}, {elapsed:.1f} s")
    assert ok


def test_3_protocol_identities(report):
    d = 25
    bs_err, marg_err = 0.0, 0.0
    for r in (0.653, 0.978, 1.156):
        sq = fock.squeezed_vacuum_ket(r, math.pi / 2, cutoff=2 * d, tol=1.0)
        pair = fock.apply_unitary(fock.tensor(sq, sq), fock.beam_splitter("symmetric"), [0, 1], out_cutoffs=[d, d])
        tmsv = fock.tmsv_ket(r, 0.0, cutoff=d, tol=1.0)
        bs_err = max(bs_err, np.max(np.abs(pair.amplitudes - tmsv.amplitudes)))
        marginal = fock.partial_trace(tmsv, [1]).matrix
        thermal = fock.thermal_state(math.sinh(r) ** 2, cutoff=d, tol=1.0).matrix
        marg_err = max(marg_err, np.max(np.abs(marginal - thermal)))
    rng = np.random.default_rng(2024)
    parity_err = 0.0
    for k in range(20):
        vecs = rng.normal(size=(8, 1 + k % 4)) + 1j * rng.normal(size=(8, 1 + k % 4))
        mat = vecs @ vecs.conj().T
        rho = fock.FockDensityOperator(mat / np.trace(mat).real)
        parity = fock.two_copy_distribution(rho).parity
        parity_err = max(parity_err, abs(parity - fock.purity_fock(rho)))
    ok = bs_err <= 1e-8 and marg_err <= 1e-6 and parity_err <= 1e-8
    report(3, ok, f"BS_S vs TMSV {bs_err:.1e}, marginal vs thermal {marg_err:.1e}, parity vs purity {parity_err:.1e}")
    assert ok


def _bisect(f, lo, hi):
    flo = f(lo)
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.xfail(strict=True, reason="every pure state, (|1>+|2>)/sqrt 2 included, has QCS exactly 1 at eta = 1/2")
def test_4_eta_star_law(report):
    half = max(abs(gaussian.qcs_lossy_gaussian(w, 1.0, 0.5) - 1.0) for w in (1.5, 2.0, 5.0, 20.0))
    rng = np.random.default_rng(4)
    root_err, drawn = 0.0, 0
    while drawn < 50:
        w, p = rng.uniform(1.0, 30.0), rng.uniform(0.05, 1.0)
        if w * p * p <= 1.0:
            continue
        drawn += 1
        root = _bisect(lambda e: gaussian.qcs_lossy_gaussian(w, p, e) - 1.0, 1e-12, 1.0)
        root_err = max(root_err, abs(gaussian.eta_star(w, p) - root))
    ket = fock.FockKet(np.array([0.0, 1.0, 1.0]) / math.sqrt(2))
    qcs = fock.qcs_direct(fock.apply_loss_channel(ket, 0.5, 0))
    ok = half <= 1e-10 and root_err <= 1e-8 and abs(qcs - 1.0) > 1e-3
    report(4, ok, f"|C2(W,1,1/2) - 1| <= {half:.1e}, eta* vs bisection {root_err:.1e}, "
                  f"(|1>+|2>)/sqrt2 at eta=1/2 gives {qcs:.15f} (needs |C2 - 1| > 1e-3)")
    assert ok


def test_5_sampling_statistics(report):
    exact = pr.run_circuit(pr.build_sv_experiment(0.653, 0.0, 0.2010)).exact_distribution
    n_trials = 10**6
    values = np.array([
        estimator.qcs_from_distribution(estimator.sample_counts(exact, n_trials, seed)).qcs for seed in range(200)
    ])
    predicted = estimator.qcs_from_distribution(exact, n_trials=n_trials).std
    empirical = float(np.std(values, ddof=1))
    ratio = empirical / predicted
    ok = 0.5 <= ratio <= 2.0 and 1e-4 <= predicted < 1e-2
    report(5, ok, f"empirical std {empirical:.2e} vs predicted {predicted:.2e} (ratio {ratio:.2f}) over 200 seeds")
    assert ok


@pytest.mark.xfail(strict=True, reason="thermal r=1.156 keeps 7.7% of its QCS signal above four photons")
def test_6_truncation(report):
    worst, where = 0.0, None
    for state, r, eta, _ in TABLE:
        dist = pr.run_circuit(build(state, r, eta)).exact_distribution
        full = estimator.qcs_from_distribution(dist).qcs
        cut = estimator.truncated_estimate(dist, 4).qcs
        dev = abs(cut - full) / full
        if dev > worst:
            worst, where = dev, (state, r)
    ok = worst <= 0.05
    report(6, ok, f"largest deviation at n_max=4 is {worst:.2%} ({where[0]} r={where[1]}); limit 5%")
    assert ok


def test_7_curves(report):
    cfg = cli.RunConfig(command="analytic", eta=cli.parse_floats("0:1:0.01") + [0.49, 0.51])
    rows = cli.cmd_analytic(cfg)
    squeezed_ok = all(
        (row["qcs"] > 1.0) == (row["eta"] > 0.5) for row in rows if row["state"] == "squeezed" and row["eta"] != 0.5
    )
    at_half = [row["qcs"] for row in rows if row["state"] == "squeezed" and row["eta"] == 0.5]
    thermal_ok = all(row["qcs"] <= 1.0 for row in rows if row["state"] == "thermal")
    zero_ok = all(abs(row["qcs"] - 1.0) < 1e-15 for row in rows if row["eta"] == 0.0)
    ok = squeezed_ok and thermal_ok and zero_ok and all(abs(v - 1.0) < 1e-12 for v in at_half)
    report(7, ok, f"squeezed > 1 iff eta > 1/2: {squeezed_ok}; thermal <= 1: {thermal_ok}; all 1 at eta = 0: {zero_ok}")
    assert ok


def test_8_fock_states(report):
    worst = max(abs(fock.qcs_direct(fock.fock_ket(n, n)) - (2 * n + 1)) for n in range(6))
    ok = worst <= 1e-8
    report(8, ok, f"max |C2(|n>) - (2n+1)| for n <= 5 is {worst:.1e}")
    assert ok
