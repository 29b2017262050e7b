import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcsim import fock, gaussian
from qcsim.errors import CutoffError, InvalidStateError, NumericalError


def random_density(rng, cutoff, rank=3):
    vecs = rng.normal(size=(cutoff + 1, rank)) + 1j * rng.normal(size=(cutoff + 1, rank))
    mat = vecs @ vecs.conj().T
    return fock.FockDensityOperator(mat / np.trace(mat).real)


def quadrature_cov(rho):
    """Covariance matrix of a single-mode density operator, from the truncated quadratures."""
    d = rho.cutoffs[0]
    mat = fock.embed(rho, [d + 2]).matrix
    ops = fock.ladder_ops(d + 2)
    x, p = ops.x, ops.p
    ex = lambda o: np.trace(mat @ o).real
    mx, mp = ex(x), ex(p)
    return np.array(
        [[ex(x @ x) - mx**2, ex(x @ p + p @ x) / 2 - mx * mp], [ex(x @ p + p @ x) / 2 - mx * mp, ex(p @ p) - mp**2]]
    )


class TestLadder:
    def test_commutator_below_cutoff(self):
        ops = fock.ladder_ops(12)
        comm = ops.x @ ops.p - ops.p @ ops.x
        np.testing.assert_allclose(comm[:-1, :-1], 1j * np.eye(12), atol=1e-14)

    def test_number_and_parity(self):
        ops = fock.ladder_ops(6)
        np.testing.assert_allclose(np.diag(ops.n), np.arange(7))
        np.testing.assert_allclose(np.diag(ops.parity), (-1.0) ** np.arange(7))


class TestSqueezedKet:
    def test_zero_squeezing_is_vacuum(self):
        ket = fock.squeezed_vacuum_ket(0.0, 0.0, cutoff=8)
        np.testing.assert_allclose(ket.amplitudes, fock.vacuum(1, 8).amplitudes, atol=1e-15)

    def test_mean_photon(self):
        ket = fock.squeezed_vacuum_ket(0.653, 0.0, cutoff=30, tol=1e-6)
        assert fock.mean_photon(ket) == pytest.approx(math.sinh(0.653) ** 2, abs=1e-6)

    def test_odd_amplitudes_vanish(self):
        ket = fock.squeezed_vacuum_ket(1.156, 0.7, cutoff=40, tol=1e-2)
        assert np.max(np.abs(ket.amplitudes[1::2])) < 1e-12

    @pytest.mark.parametrize("r,phi", [(0.653, 0.0), (0.978, 1.3), (1.156, -2.0)])
    def test_closed_form(self, r, phi):
        ket = fock.squeezed_vacuum_ket(r, phi)
        d = ket.cutoffs[0]
        oracle = np.zeros(d + 1, dtype=complex)
        for k in range(d // 2 + 1):
            oracle[2 * k] = (
                (-np.exp(1j * phi) * math.tanh(r)) ** k * math.sqrt(math.factorial(2 * k)) / (2**k * math.factorial(k))
            ) / math.sqrt(math.cosh(r))
        np.testing.assert_allclose(ket.amplitudes, oracle, atol=1e-12)

    def test_cutoff_too_small(self):
        with pytest.raises(CutoffError) as info:
            fock.squeezed_vacuum_ket(1.156, 0.0, cutoff=10)
        assert info.value.required_cutoff > 10
        fock.squeezed_vacuum_ket(1.156, 0.0, cutoff=info.value.required_cutoff)

    def test_default_cutoff_meets_tolerance(self):
        ket = fock.squeezed_vacuum_ket(0.978, 0.0, tol=1e-10)
        assert ket.norm_deficit <= 1e-10

    def test_matches_gaussian_covariance(self):
        rho = fock.squeezed_vacuum_ket(0.5, 0.9).density()
        np.testing.assert_allclose(quadrature_cov(rho), gaussian.make_squeezed_vacuum(0.5, 0.9).cov, atol=1e-8)


class TestTmsv:
    def test_zero_squeezing(self):
        ket = fock.tmsv_ket(0.0, cutoff=3)
        np.testing.assert_allclose(ket.amplitudes, fock.vacuum(2, 3).amplitudes)

    def test_marginal_is_thermal(self):
        r = 0.978
        rho = fock.partial_trace(fock.tmsv_ket(r, cutoff=25, tol=1e-6), [0])
        np.testing.assert_allclose(rho.matrix, fock.thermal_state(math.sinh(r) ** 2, cutoff=25, tol=1e-6).matrix, atol=1e-6)

    def test_symmetric_splitter_builds_tmsv(self):
        r, phi = 0.653, 0.4
        sq = fock.squeezed_vacuum_ket(r, phi + math.pi / 2, cutoff=50, tol=1.0)
        pair = fock.apply_unitary(fock.tensor(sq, sq), fock.beam_splitter("symmetric"), [0, 1], out_cutoffs=[25, 25])
        np.testing.assert_allclose(pair.amplitudes, fock.tmsv_ket(r, phi, cutoff=25, tol=1.0).amplitudes, atol=1e-8)

    def test_traced_mode_does_not_matter(self):
        ket = fock.tmsv_ket(0.653, cutoff=30, tol=1e-8)
        base = fock.partial_trace(ket, [1]).matrix
        rotated = fock.apply_unitary(ket, fock.phase_shift(1.1), [0])
        np.testing.assert_allclose(fock.partial_trace(rotated, [1]).matrix, base, atol=1e-12)
        lossy = fock.apply_loss_channel(ket, 0.3, 0)
        np.testing.assert_allclose(fock.partial_trace(lossy, [1]).matrix, base, atol=1e-12)


class TestUnitaries:
    def test_balanced_on_single_photon(self):
        out = fock.apply_unitary(fock.tensor(fock.fock_ket(1, 2), fock.fock_ket(0, 2)), fock.beam_splitter("balanced"), [0, 1])
        probs = fock.photon_distribution(out)
        assert probs[1, 0] == pytest.approx(0.5)
        assert probs[0, 1] == pytest.approx(0.5)

    def test_hong_ou_mandel(self):
        pair = fock.tensor(fock.fock_ket(1, 2), fock.fock_ket(1, 2))
        probs = fock.photon_distribution(fock.apply_unitary(pair, fock.beam_splitter("symmetric"), [0, 1]))
        assert probs[1, 1] == pytest.approx(0.0, abs=1e-15)
        assert probs[2, 0] == pytest.approx(0.5)

    def test_vacuum_invariant(self):
        vac = fock.vacuum(2, 4)
        out = fock.apply_unitary(vac, fock.beam_splitter("symmetric"), [0, 1])
        np.testing.assert_allclose(out.amplitudes, vac.amplitudes, atol=1e-15)

    @pytest.mark.parametrize("kind", ["symmetric", "balanced"])
    def test_energy_conserved(self, kind):
        rng = np.random.default_rng(5)
        rho = fock.tensor(random_density(rng, 4), random_density(rng, 4))
        out = fock.apply_unitary(rho, fock.beam_splitter(kind), [0, 1], out_cutoffs=[8, 8])
        before = fock.mean_photon(rho, 0) + fock.mean_photon(rho, 1)
        assert fock.mean_photon(out, 0) + fock.mean_photon(out, 1) == pytest.approx(before, abs=1e-12)
        assert out.trace == pytest.approx(1.0, abs=1e-12)

    def test_explicit_matrix_agrees_with_blocks(self):
        rng = np.random.default_rng(8)
        rho = fock.tensor(random_density(rng, 3), random_density(rng, 3))
        op = fock.beam_splitter("balanced")
        via_blocks = fock.apply_unitary(rho, op, [0, 1], out_cutoffs=[6, 6])
        u = fock.passive_matrix(op, [6, 6], [6, 6])
        # the box matrix is exact on total photon number <= 6, which holds all of rho
        padded = fock.embed(rho, [6, 6]).matrix
        np.testing.assert_allclose(u @ padded @ u.conj().T, via_blocks.matrix, atol=1e-12)

    def test_box_matrix_unitary_on_low_blocks(self):
        u = fock.passive_matrix(fock.beam_splitter("symmetric"), [5, 5], [5, 5])
        n = np.add.outer(np.arange(6), np.arange(6)).reshape(-1)
        low = n <= 5
        np.testing.assert_allclose(u[np.ix_(low, low)].conj().T @ u[np.ix_(low, low)], np.eye(low.sum()), atol=1e-12)

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError):
            fock.apply_unitary(fock.vacuum(1, 2), np.diag([1.0, 2.0, 1.0]), [0])

    def test_mode_out_of_range(self):
        with pytest.raises(ValueError):
            fock.apply_unitary(fock.vacuum(1, 2), fock.beam_splitter("balanced"), [0, 1])

    def test_phase_matches_gaussian_rotation(self):
        rho = fock.squeezed_vacuum_ket(0.4, 0.0, cutoff=40, tol=1e-6).density()
        rotated = fock.apply_unitary(rho, fock.phase_shift(math.pi / 2), [0])
        np.testing.assert_allclose(quadrature_cov(rotated), gaussian.make_squeezed_vacuum(0.4, math.pi).cov, atol=1e-8)


class TestLoss:
    def test_kraus_complete(self):
        kraus = fock.loss_kraus(0.37, 9)
        total = sum(k.T @ k for k in kraus)
        np.testing.assert_allclose(total, np.eye(10), atol=1e-13)

    def test_identity(self):
        rho = random_density(np.random.default_rng(1), 5)
        np.testing.assert_allclose(fock.apply_loss_channel(rho, 1.0, 0).matrix, rho.matrix, atol=1e-15)

    def test_full_loss_is_vacuum(self):
        rho = random_density(np.random.default_rng(2), 5)
        out = fock.apply_loss_channel(rho, 0.0, 0)
        assert out.matrix[0, 0].real == pytest.approx(1.0)

    @pytest.mark.parametrize("nbar,eta", [(1.3034, 0.267), (0.5, 0.8)])
    def test_thermal_stays_thermal(self, nbar, eta):
        out = fock.apply_loss_channel(fock.thermal_state(nbar, tol=1e-14), eta, 0)
        ref = fock.thermal_state(eta * nbar, cutoff=out.cutoffs[0], tol=1.0)
        np.testing.assert_allclose(out.matrix, ref.matrix, atol=1e-8)

    def test_squeezed_matches_gaussian(self):
        r, phi, eta = 0.653, 0.5, 0.201
        rho = fock.apply_loss_channel(fock.squeezed_vacuum_ket(r, phi), eta, 0)
        ref = gaussian.apply_loss(gaussian.make_squeezed_vacuum(r, phi), eta, 0)
        np.testing.assert_allclose(quadrature_cov(rho), ref.cov, atol=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(eta=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
    def test_mean_photon_linear_and_state_valid(self, eta, seed):
        rho = random_density(np.random.default_rng(seed), 6)
        out = fock.apply_loss_channel(rho, eta, 0)
        assert fock.mean_photon(out) == pytest.approx(eta * fock.mean_photon(rho), abs=1e-10)
        out.check(deficit_tol=1e-12)

    @pytest.mark.parametrize("eta", [-0.01, 1.01])
    def test_range(self, eta):
        with pytest.raises(ValueError):
            fock.apply_loss_channel(fock.vacuum(1, 2), eta, 0)


class TestQcsDirect:
    def test_vacuum(self):
        assert fock.qcs_direct(fock.vacuum(1, 3)) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", range(6))
    def test_fock_state(self, n):
        assert fock.qcs_direct(fock.fock_ket(n, n)) == pytest.approx(2 * n + 1, abs=1e-8)

    def test_pure_state_is_total_variance(self):
        rng = np.random.default_rng(4)
        amps = rng.normal(size=7) + 1j * rng.normal(size=7)
        ket = fock.FockKet(amps / np.linalg.norm(amps))
        cov = quadrature_cov(ket.density())
        assert fock.qcs_direct(ket) == pytest.approx(np.trace(cov), abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_pure_states_reach_one_at_half_loss(self, seed):
        # holds for every pure state, including (|1> + |2>)/sqrt 2
        rng = np.random.default_rng(seed)
        amps = rng.normal(size=6) + 1j * rng.normal(size=6)
        for ket in (fock.FockKet(amps / np.linalg.norm(amps)), fock.FockKet(np.array([0, 1, 1]) / math.sqrt(2))):
            assert fock.qcs_direct(fock.apply_loss_channel(ket, 0.5, 0)) == pytest.approx(1.0, abs=1e-12)

    def test_mixed_fock_state_below_one_at_half_loss(self):
        rho = fock.FockDensityOperator(np.diag([0.0, 0.5, 0.5]))
        assert fock.qcs_direct(fock.apply_loss_channel(rho, 0.5, 0)) < 1.0

    def test_squeezed_lossy_matches_closed_form(self):
        r, eta = 0.978, 0.1901
        rho = fock.apply_loss_channel(fock.squeezed_vacuum_ket(r), eta, 0)
        assert fock.qcs_direct(rho) == pytest.approx(gaussian.qcs_squeezed_lossy(r, eta), abs=1e-8)

    def test_phase_invariance(self):
        rho = random_density(np.random.default_rng(12), 6)
        base = fock.qcs_direct(rho)
        for theta in np.linspace(0, 2 * np.pi, 25):
            assert fock.qcs_direct(fock.apply_unitary(rho, fock.phase_shift(theta), [0])) == pytest.approx(base, abs=1e-10)

    def test_purity_floor(self):
        mixed = fock.FockDensityOperator(np.eye(4) / 4)
        with pytest.raises(NumericalError):
            fock.qcs_direct(mixed, purity_floor=0.5)

    def test_heavy_tail_warns(self):
        with pytest.warns(fock.TruncationWarning):
            fock.qcs_direct(fock.squeezed_vacuum_ket(1.156, cutoff=8, tol=1.0))

    def test_exact_finite_state_does_not_warn(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fock.qcs_direct(fock.fock_ket(5, 5))

    def test_multimode_rejected(self):
        with pytest.raises(ValueError):
            fock.qcs_direct(fock.vacuum(2, 2))


class TestTwoCopy:
    def test_vacuum(self):
        assert fock.qcs_two_copy(fock.vacuum(1, 2)) == pytest.approx(1.0)

    def test_lossless_squeezed(self):
        assert fock.qcs_two_copy(fock.squeezed_vacuum_ket(0.653)) == pytest.approx(math.cosh(1.306), abs=1e-6)

    def test_thermal(self):
        rho = fock.thermal_state(math.sinh(1.156) ** 2 * 0.240, tol=1e-13)
        assert fock.qcs_two_copy(rho) == pytest.approx(0.5042, abs=1e-4)

    @pytest.mark.parametrize("seed", range(20))
    def test_parity_is_purity(self, seed):
        rho = random_density(np.random.default_rng(seed), 6, rank=1 + seed % 4)
        dist = fock.two_copy_distribution(rho)
        assert dist.parity == pytest.approx(fock.purity_fock(rho), abs=1e-8)

    @pytest.mark.parametrize("seed", range(10))
    def test_agrees_with_commutator_form(self, seed):
        rho = random_density(np.random.default_rng(100 + seed), 7, rank=2)
        assert fock.qcs_two_copy(rho) == pytest.approx(fock.qcs_direct(rho), abs=1e-8)

    def test_joint_matches_dense_simulation(self):
        rho = random_density(np.random.default_rng(9), 3)
        pair = fock.tensor(rho, rho)
        dense = fock.apply_unitary(pair, fock.beam_splitter("balanced"), [0, 1], out_cutoffs=[6, 6])
        np.testing.assert_allclose(fock.two_copy_joint_distribution(rho), fock.photon_distribution(dense), atol=1e-13)

    def test_identical_gaussian_copies_give_input_statistics(self):
        # for identical centred Gaussian copies the difference mode reproduces the input
        rho = fock.apply_loss_channel(fock.squeezed_vacuum_ket(0.5), 0.4, 0)
        np.testing.assert_allclose(fock.two_copy_distribution(rho).padded(rho.cutoffs[0] * 2)[: rho.cutoffs[0] + 1],
                                   fock.photon_distribution(rho), atol=1e-10)


class TestMisc:
    def test_purity(self):
        assert fock.purity_fock(fock.squeezed_vacuum_ket(0.3)) == pytest.approx(1.0, abs=1e-9)
        assert fock.purity_fock(fock.thermal_state(0.7, tol=1e-14)) == pytest.approx(1 / 2.4, abs=1e-10)

    def test_lossy_purity_matches_gaussian(self):
        r, eta = 0.978, 0.3
        rho = fock.apply_loss_channel(fock.squeezed_vacuum_ket(r), eta, 0)
        ref = gaussian.purity(gaussian.apply_loss(gaussian.make_squeezed_vacuum(r), eta, 0))
        assert fock.purity_fock(rho) == pytest.approx(ref, abs=1e-8)

    def test_partial_trace_ket_and_density_agree(self):
        ket = fock.tmsv_ket(0.5, cutoff=8, tol=1.0)
        a = fock.partial_trace(ket, [1]).matrix
        b = fock.partial_trace(ket.density(), [1]).matrix
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_trim(self):
        rho = fock.thermal_state(0.2, cutoff=40, tol=1.0)
        small = fock.trim(rho, 1e-8)
        assert small.cutoffs[0] < 40
        assert small.trace_deficit <= 1e-8

    def test_density_check(self):
        bad = fock.FockDensityOperator(np.diag([1.2, -0.2]))
        with pytest.raises(InvalidStateError):
            bad.check()

    def test_ket_norm_checked(self):
        with pytest.raises(InvalidStateError):
            fock.FockKet(np.array([1.0, 1.0]))

    def test_marginals(self):
        ket = fock.tmsv_ket(0.653, tol=1e-12)
        nbar = math.sinh(0.653) ** 2
        probs = fock.marginal_distribution(ket, 1).probs
        n = np.arange(len(probs))
        np.testing.assert_allclose(probs, nbar**n / (1 + nbar) ** (n + 1), atol=1e-14)
