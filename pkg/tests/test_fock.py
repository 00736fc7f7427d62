import numpy as np
import pytest
from scipy.linalg import expm

from cvkit import fock

CUT = fock.FockCutoff(9)
D2 = CUT.dim2


def bell_state(cut=CUT):
    ket = (fock.number_ket(0, 0, cut) + fock.number_ket(1, 1, cut)) / np.sqrt(2)
    return fock.state_from_ket(ket)


def random_state(seed, cut=CUT):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((cut.dim2, cut.dim2)) \
        + 1j * rng.standard_normal((cut.dim2, cut.dim2))
    rho = m @ m.conj().T
    return fock.make_state(rho, check_psd=False)


class TestCutoffAndOperators:
    def test_cutoff_below_two_rejected(self):
        with pytest.raises(ValueError):
            fock.FockCutoff(1)

    def test_dimensions(self):
        assert CUT.d == 10
        assert CUT.dim2 == 100

    def test_annihilation_entries(self):
        ops = fock.build_mode_operators(fock.FockCutoff(2))
        expected = np.zeros((3, 3), dtype=complex)
        expected[0, 1] = 1.0
        expected[1, 2] = np.sqrt(2)
        assert np.abs(ops.a - expected).max() == 0

    def test_vacuum_x2_expectation_is_one(self):
        ops = fock.build_mode_operators(CUT)
        assert abs(ops.x2[0, 0] - 1.0) < 1e-14

    def test_commutator_on_interior_subblock(self):
        ops = fock.build_mode_operators(CUT)
        comm = ops.x @ ops.p - ops.p @ ops.x
        interior = comm[:CUT.n_max, :CUT.n_max]
        target = 2j * np.eye(CUT.n_max)
        assert np.abs(interior - target).max() < 1e-12

    def test_quadratures_hermitian_and_consistent(self):
        ops = fock.build_mode_operators(CUT)
        for mat in (ops.x, ops.p, ops.x2, ops.p2, ops.sym_xp):
            assert np.abs(mat - mat.conj().T).max() < 1e-12
        assert np.abs(ops.sym_xp - (ops.x @ ops.p + ops.p @ ops.x) / 2).max() == 0


class TestGaussianUnitary:
    def test_all_zero_parameters_identity(self):
        u = fock.gaussian_unitary(fock.GaussianCircuit(), CUT)
        assert np.abs(u - np.eye(D2)).max() < 1e-14

    def test_squeezed_vacuum_variance(self):
        # e^{-2r} for r = 0.5; the 1e-6 tolerance needs headroom above the
        # n_max >= 12 precondition (truncation error ~1.6e-4 at exactly 12)
        cut = fock.FockCutoff(20)
        circ = fock.GaussianCircuit(squeeze=(0.5 + 0j, 0j))
        psi = fock.gaussian_unitary(circ, cut) @ fock.number_ket(0, 0, cut)
        ops = fock.build_mode_operators(cut)
        x2 = np.kron(ops.x2, np.eye(cut.d))
        var = np.real(psi.conj() @ x2 @ psi)
        assert abs(var - np.exp(-1.0)) < 1e-6

    def test_beamsplitter_splits_single_photon(self):
        u = fock.gaussian_unitary(fock.GaussianCircuit(bs_in=np.pi / 4), CUT)
        out = u @ fock.number_ket(1, 0, CUT)
        d = CUT.d
        p10 = abs(out[1 * d + 0]) ** 2
        p01 = abs(out[0 * d + 1]) ** 2
        assert abs(p10 - 0.5) < 1e-9
        assert abs(p01 - 0.5) < 1e-9
        assert abs(p10 + p01 - 1.0) < 1e-9

    def test_unitarity_at_generation_magnitudes(self):
        cut = fock.FockCutoff(10)
        circ = fock.GaussianCircuit(
            bs_in=1.2 * np.exp(0.7j),
            squeeze=(1.15 * np.exp(0.3j), 1.15 * np.exp(-2.1j)),
            displace=(1.0 * np.exp(1.9j), 1.0 * np.exp(-0.4j)),
            bs_out=0.8 * np.exp(-1.3j))
        u = fock.gaussian_unitary(circ, cut)
        defect = np.abs(u.conj().T @ u - np.eye(cut.dim2)).max()
        assert defect <= 1e-8

    def test_block_beamsplitter_matches_dense_expm(self):
        for phi in (np.pi / 4, 0.3 + 0.2j, 0.9 - 1.1j):
            dense = expm(fock._beamsplitter_generator(phi, CUT.d))
            block = fock._beamsplitter_unitary(phi, CUT.d)
            assert np.abs(dense - block).max() < 1e-12

    def test_ket_fast_path_matches_full_unitary(self):
        rng = np.random.default_rng(3)
        circ = fock.GaussianCircuit(
            bs_in=0.3 + 0.2j, squeeze=(0.4 - 0.1j, -0.25 + 0.3j),
            displace=(0.5 + 0.1j, -0.2j), bs_out=0.7 - 0.4j)
        ket = rng.standard_normal(D2) + 1j * rng.standard_normal(D2)
        ket /= np.linalg.norm(ket)
        full = fock.gaussian_unitary(circ, CUT) @ ket
        fast = fock.apply_gaussian_to_ket(circ, ket, CUT)
        assert np.abs(full - fast).max() < 1e-10


class TestLossChannel:
    def test_zero_loss_is_identity(self):
        st = random_state(0)
        out = fock.apply_loss(st, 0.0, 0.0)
        assert np.abs(out.rho - st.rho).max() < 1e-14

    def test_full_loss_gives_vacuum(self):
        st = random_state(1)
        out = fock.apply_loss(st, 1.0, 1.0)
        assert abs(out.rho[0, 0].real - 1.0) < 1e-10
        assert np.abs(out.rho).sum() - 1.0 < 1e-9

    def test_single_photon_kraus_sum(self):
        st = fock.state_from_ket(fock.number_ket(1, 0, CUT))
        out = fock.apply_loss(st, 0.3, 0.0)
        d = CUT.d
        assert abs(out.rho[0, 0].real - 0.3) < 1e-14
        assert abs(out.rho[d, d].real - 0.7) < 1e-14

    def test_kraus_stack_is_trace_preserving(self):
        for eta in (0.0, 0.17, 0.5, 0.93, 1.0):
            kraus = fock.loss_kraus(eta, CUT)
            total = np.einsum("kmn,kml->nl", kraus.conj(), kraus)
            assert np.abs(total - np.eye(CUT.d)).max() < 1e-12

    def test_loss_composition(self):
        st = random_state(2)
        twice = fock.apply_loss(fock.apply_loss(st, 0.2, 0.1), 0.25, 0.3)
        once = fock.apply_loss(st, 1 - 0.8 * 0.75, 1 - 0.9 * 0.7)
        assert np.abs(twice.rho - once.rho).max() < 1e-8

    def test_channel_preserves_trace_and_hermiticity(self):
        st = random_state(3)
        out = fock.apply_loss(st, 0.37, 0.54)
        assert abs(np.trace(out.rho).real - 1.0) <= 1e-10
        assert np.abs(out.rho - out.rho.conj().T).max() <= 1e-10

    def test_invalid_eta_rejected(self):
        st = random_state(4)
        with pytest.raises(ValueError):
            fock.apply_loss(st, -0.1, 0.0)
        with pytest.raises(ValueError):
            fock.apply_loss(st, 0.0, 1.1)


class TestSpectral:
    def test_vacuum_projector(self):
        evals, _ = fock.spectral(fock.vacuum_state(CUT))
        assert abs(evals[-1] - 1.0) < 1e-12
        assert np.abs(evals[:-1]).max() < 1e-12

    def test_maximally_mixed(self):
        st = fock.make_state(np.eye(D2) / D2, check_psd=False)
        evals, _ = fock.spectral(st)
        assert np.abs(evals - 1.0 / D2).max() < 1e-14

    def test_random_hermitian_orthonormal_and_reconstructs(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        h = (m + m.conj().T) / 2
        evals, evecs = fock.spectral(h)
        assert np.all(np.diff(evals) >= 0)
        assert np.abs(evecs.conj().T @ evecs - np.eye(16)).max() < 1e-10
        recon = (evecs * evals) @ evecs.conj().T
        assert np.abs(recon - h).max() <= 1e-9

    def test_non_hermitian_rejected(self):
        m = np.eye(4, dtype=complex)
        m[0, 1] = 1e-6
        with pytest.raises(ValueError):
            fock.spectral(m)


class TestPartialTranspose:
    def test_product_state_spectrum_unchanged(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((CUT.d, CUT.d)) + 1j * rng.standard_normal((CUT.d, CUT.d))
        b = rng.standard_normal((CUT.d, CUT.d)) + 1j * rng.standard_normal((CUT.d, CUT.d))
        rho1 = a @ a.conj().T
        rho1 /= np.trace(rho1)
        rho2 = b @ b.conj().T
        rho2 /= np.trace(rho2)
        st = fock.make_state(np.kron(rho1, rho2), check_psd=False)
        for mode in (1, 2):
            pt = fock.partial_transpose(st, mode)
            ref = np.kron(rho1.T, rho2) if mode == 1 else np.kron(rho1, rho2.T)
            assert np.abs(pt - ref).max() < 1e-12
            got = np.sort(np.linalg.eigvalsh(pt))
            want = np.sort(np.linalg.eigvalsh(st.rho))
            assert np.abs(got - want).max() < 1e-10

    def test_bell_minimum_eigenvalue(self):
        pt = fock.partial_transpose(bell_state(), 2)
        evals = np.linalg.eigvalsh(pt)
        assert abs(evals[0] + 0.5) < 1e-12

    def test_double_transpose_is_identity(self):
        st = random_state(7)
        for mode in (1, 2):
            pt = fock.partial_transpose(st, mode)
            ptst = fock.TwoModeState(rho=pt)  # PT output may be non-PSD
            back = fock.partial_transpose(ptst, mode)
            assert np.abs(back - st.rho).max() == 0

    def test_trace_and_hermiticity_exact(self):
        st = random_state(8)
        pt = fock.partial_transpose(st, 2)
        assert np.trace(pt) == np.trace(st.rho)
        assert np.abs(pt - pt.conj().T).max() < 1e-15

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            fock.partial_transpose(random_state(9), 3)


class TestFidelity:
    def test_self_fidelity_one(self):
        st = random_state(10)
        assert abs(fock.fidelity(st, st) - 1.0) <= 1e-9

    def test_orthogonal_pure_states(self):
        a = fock.state_from_ket(fock.number_ket(1, 0, CUT))
        b = fock.state_from_ket(fock.number_ket(0, 1, CUT))
        assert fock.fidelity(a, b) < 1e-12

    def test_pure_mixed_closed_form(self):
        vac = fock.vacuum_state(CUT)
        mixed = fock.make_state(np.eye(D2) / D2, check_psd=False)
        assert abs(fock.fidelity(vac, mixed) - 1.0 / D2) < 1e-10

    def test_symmetry(self):
        a = fock.apply_loss(bell_state(), 0.2, 0.3)
        b = random_state(11)
        assert abs(fock.fidelity(a, b) - fock.fidelity(b, a)) < 1e-8

    def test_root_fidelity_is_square_root(self):
        a = random_state(12)
        b = random_state(13)
        assert abs(fock.root_fidelity(a, b) ** 2 - fock.fidelity(a, b)) < 1e-12

    def test_dimension_mismatch_rejected(self):
        small = fock.vacuum_state(fock.FockCutoff(3))
        with pytest.raises(ValueError):
            fock.fidelity(small, fock.vacuum_state(CUT))


class TestStateValidation:
    def test_non_hermitian_rejected(self):
        rho = np.eye(D2, dtype=complex) / D2
        rho[0, 1] = 1e-6
        with pytest.raises(ValueError):
            fock.make_state(rho)

    def test_trace_renormalized(self):
        st = fock.make_state(2.0 * np.eye(D2), check_psd=False)
        assert abs(np.trace(st.rho).real - 1.0) < 1e-12

    def test_negative_eigenvalue_rejected(self):
        rho = np.eye(D2, dtype=complex) / D2
        rho[0, 0] = -1e-6
        with pytest.raises(ValueError):
            fock.make_state(rho, check_psd=True)

    def test_states_are_immutable(self):
        st = fock.vacuum_state(CUT)
        with pytest.raises(ValueError):
            st.rho[0, 0] = 0.5
