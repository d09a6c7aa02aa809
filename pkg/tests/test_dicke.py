import numpy as np
import pytest

from catspin.dicke import (
    DimensionError,
    EnsembleDims,
    N_ATOMS_CAP,
    SpinState,
    apply_dark_phase,
    apply_oats,
    apply_rotation,
    basis_state,
    build_operator_set,
    css_state,
    total_spin_expectation,
)

from conftest import cached_ops


class TestEnsembleDims:
    def test_derived_quantities(self):
        dims = EnsembleDims(41)
        assert dims.j == 20.5
        assert dims.dim == 42
        assert dims.m_values()[0] == -20.5
        assert dims.m_values()[-1] == 20.5

    def test_rejects_bad_sizes(self):
        with pytest.raises(DimensionError):
            EnsembleDims(0)
        with pytest.raises(DimensionError):
            EnsembleDims(N_ATOMS_CAP + 1)
        with pytest.raises(DimensionError):
            EnsembleDims(2.5)


class TestOperatorSet:
    def test_single_spin_matrices(self):
        ops = cached_ops(1)
        assert np.allclose(np.diag(ops.jz), [-0.5, 0.5])
        assert ops.jx[1, 0] == pytest.approx(0.5, abs=0)

    def test_two_spin_raising_coefficient(self):
        # A(1,-1) = sqrt((1+1)(1-1+1)) = sqrt(2), halved on the off-diagonal
        ops = cached_ops(2)
        assert ops.jx[1, 0] == pytest.approx(np.sqrt(2) / 2, abs=1e-15)

    def test_jz_eigenvalues_exact_integers(self, ops40):
        assert np.array_equal(np.diag(ops40.jz), np.arange(41) - 20)

    def test_hermiticity(self, ops41):
        assert np.max(np.abs(ops41.jx - ops41.jx.conj().T)) < 1e-12
        assert np.max(np.abs(ops41.jy - ops41.jy.conj().T)) < 1e-12

    def test_commutator(self, ops40):
        assert ops40.check_commutator() < 1e-10

    def test_eigensystem_reconstruction(self, ops40, ops41):
        for ops in (ops40, ops41):
            assert ops.jx_eigensystem.reconstruction_error(ops.jx) < 1e-10
            assert ops.jy_eigensystem.reconstruction_error(ops.jy) < 1e-10

    def test_jz_sq_diagonal(self, ops40):
        assert np.allclose(ops40.jz_sq, (np.arange(41) - 20.0) ** 2)

    def test_immutable_arrays(self, ops40):
        with pytest.raises(ValueError):
            ops40.jx[0, 0] = 1.0


class TestCssState:
    def test_north_pole_is_top_state(self, dims40):
        state = css_state(dims40, 0.0, 1.234)
        assert state.amps[40] == pytest.approx(1.0)
        assert np.sum(np.abs(state.amps[:40])) < 1e-15

    def test_south_pole_is_bottom_state(self, dims40):
        state = css_state(dims40, np.pi, 0.7)
        assert abs(state.amps[0]) == pytest.approx(1.0)

    def test_css_along_y_expectation(self, dims40, ops40):
        state = css_state(dims40, np.pi / 2, np.pi / 2)
        jy = np.vdot(state.amps, ops40.jy @ state.amps).real
        assert jy == pytest.approx(20.0, abs=1e-9)

    def test_normalized_at_large_n(self):
        dims = EnsembleDims(2000)
        for theta in (0.3, np.pi / 2, 2.9):
            assert css_state(dims, theta, 1.0).norm() == pytest.approx(1.0, abs=1e-12)


class TestRotation:
    def test_pi_pulse_flips_all_spins(self, dims40, ops40):
        out = apply_rotation(basis_state(dims40, 0), ops40, "x", np.pi)
        assert out.populations()[40] == pytest.approx(1.0, abs=1e-12)
        # global phase (-i)^N = +1 for N = 40
        assert out.amps[40] == pytest.approx(1.0, abs=1e-10)

    def test_half_pi_pulse_reaches_css_along_y(self, dims40, ops40):
        out = apply_rotation(basis_state(dims40, 0), ops40, "x", np.pi / 2)
        target = css_state(dims40, np.pi / 2, np.pi / 2)
        assert np.max(np.abs(out.populations() - target.populations())) < 1e-12

    def test_zero_angle_identity(self, dims41, ops41):
        state = css_state(dims41, 1.0, 2.0)
        out = apply_rotation(state, ops41, "y", 0.0)
        assert np.max(np.abs(out.amps - state.amps)) < 1e-12

    def test_composition(self, dims40, ops40):
        state = css_state(dims40, 0.9, 0.4)
        one = apply_rotation(apply_rotation(state, ops40, "x", 0.7), ops40, "x", 1.1)
        two = apply_rotation(state, ops40, "x", 1.8)
        assert np.max(np.abs(one.amps - two.amps)) < 1e-10

    def test_full_turn_restores_populations(self):
        for n in (4, 7):
            ops = cached_ops(n)
            state = css_state(ops.dims, 1.1, 0.3)
            out = apply_rotation(state, ops, "x", 2 * np.pi)
            assert np.max(np.abs(out.populations() - state.populations())) < 1e-10
            # global phase (-1)^N
            assert np.max(np.abs(out.amps - (-1.0) ** n * state.amps)) < 1e-10

    def test_z_rotation_is_diagonal_phase(self, dims40, ops40):
        state = css_state(dims40, 1.2, 0.1)
        out = apply_rotation(state, ops40, "z", 0.37)
        expected = np.exp(-1j * 0.37 * ops40.m) * state.amps
        assert np.max(np.abs(out.amps - expected)) == 0.0

    def test_dimension_mismatch(self, dims40, ops41):
        with pytest.raises(DimensionError):
            apply_rotation(basis_state(dims40, 0), ops41, "x", 0.1)

    def test_bad_axis(self, dims40, ops40):
        with pytest.raises(ValueError):
            apply_rotation(basis_state(dims40, 0), ops40, "q", 0.1)


class TestOats:
    def test_even_cat_splits_between_antipodal_css(self, dims40, ops40):
        state = css_state(dims40, np.pi / 2, np.pi / 2)
        out = apply_oats(state, ops40, np.pi / 2, -1)
        plus = css_state(dims40, np.pi / 2, np.pi / 2)
        minus = css_state(dims40, np.pi / 2, 3 * np.pi / 2)
        assert abs(np.vdot(plus.amps, out.amps)) ** 2 == pytest.approx(0.5, abs=1e-12)
        assert abs(np.vdot(minus.amps, out.amps)) ** 2 == pytest.approx(0.5, abs=1e-12)

    def test_odd_cat_splits_along_x(self, dims41, ops41):
        state = css_state(dims41, np.pi / 2, np.pi / 2)
        out = apply_oats(state, ops41, np.pi / 2, -1)
        plus = css_state(dims41, np.pi / 2, 0.0)
        minus = css_state(dims41, np.pi / 2, np.pi)
        assert abs(np.vdot(plus.amps, out.amps)) ** 2 == pytest.approx(0.5, abs=1e-12)
        assert abs(np.vdot(minus.amps, out.amps)) ** 2 == pytest.approx(0.5, abs=1e-12)

    def test_unsqueeze_is_exact_inverse(self, dims40, ops40):
        state = css_state(dims40, 0.8, 1.9)
        roundtrip = apply_oats(apply_oats(state, ops40, 0.77, -1), ops40, 0.77, +1)
        assert np.max(np.abs(roundtrip.amps - state.amps)) < 1e-14


class TestDarkPhase:
    def test_zero_phase_identity(self, dims40, ops40):
        state = css_state(dims40, 1.0, 1.0)
        out = apply_dark_phase(state, ops40, 0.0, +1)
        assert np.array_equal(out.amps, state.amps)

    def test_bottom_state_gains_global_phase(self, dims40, ops40):
        state = basis_state(dims40, 0)
        out = apply_dark_phase(state, ops40, 0.3, +1)
        # m = -j on |E_0>, so the phase is e^{+i sign*phase*j}
        assert out.amps[0] == pytest.approx(np.exp(1j * 0.3 * 20), abs=1e-12)
        assert np.max(np.abs(out.populations() - state.populations())) < 1e-15

    def test_cat_state_accumulates_n_fold_phase(self, dims40, ops40):
        n = 40
        eta = 1j
        cat = np.zeros(41, dtype=complex)
        cat[0], cat[n] = 1 / np.sqrt(2), eta / np.sqrt(2)
        state = SpinState(dims40, cat)
        phi = 0.0173
        state = apply_dark_phase(state, ops40, phi / 2, +1)
        state = apply_rotation(state, ops40, "x", np.pi)
        state = apply_dark_phase(state, ops40, phi / 2, -1)
        ratio = state.amps[n] / state.amps[0]
        assert ratio * eta == pytest.approx(np.exp(1j * n * phi), abs=1e-10)


class TestInvariants:
    def test_unitarity_along_pulse_sequence(self):
        for n in (3, 40, 1000):
            ops = cached_ops(n)
            state = css_state(ops.dims, 0.6, 0.2)
            state = apply_rotation(state, ops, "x", 1.234)
            state = apply_oats(state, ops, 0.9, -1)
            state = apply_rotation(state, ops, "y", -0.77)
            state = apply_dark_phase(state, ops, 0.31, -1)
            assert abs(state.norm() - 1.0) < 1e-12

    def test_total_spin_conserved(self, dims40, ops40):
        j = dims40.j
        state = css_state(dims40, 0.4, 2.2)
        for move in range(4):
            state = apply_rotation(state, ops40, "xy"[move % 2], 0.3 + move)
            state = apply_oats(state, ops40, 0.2 * (move + 1), -1)
            assert total_spin_expectation(state, ops40) == pytest.approx(
                j * (j + 1), abs=1e-9
            )

    @pytest.mark.parametrize("n", [4, 6, 40, 42])
    def test_even_cat_phase_after_squeeze(self, n):
        # coefficient of the antipodal coherent state in the post-squeeze cat
        ops = cached_ops(n)
        state = apply_rotation(basis_state(ops.dims, 0), ops, "x", np.pi / 2)
        state = apply_oats(state, ops, np.pi / 2, -1)
        c_plus = np.vdot(css_state(ops.dims, np.pi / 2, np.pi / 2).amps, state.amps)
        c_minus = np.vdot(css_state(ops.dims, np.pi / 2, 3 * np.pi / 2).amps, state.amps)
        eta = c_minus / c_plus
        assert eta == pytest.approx(1j * (-1) ** (n // 2), abs=1e-9)

    @pytest.mark.parametrize("n", [3, 5, 41, 43])
    def test_odd_cat_phase_after_squeeze(self, n):
        ops = cached_ops(n)
        state = apply_rotation(basis_state(ops.dims, 0), ops, "x", np.pi / 2)
        state = apply_oats(state, ops, np.pi / 2, -1)
        c_plus = np.vdot(css_state(ops.dims, np.pi / 2, 0.0).amps, state.amps)
        c_minus = np.vdot(css_state(ops.dims, np.pi / 2, np.pi).amps, state.amps)
        eta = c_minus / c_plus
        assert eta == pytest.approx(1j * (-1) ** ((n + 1) // 2), abs=1e-9)


@pytest.mark.slow
class TestLargeEnsemble:
    def test_cap_documented_size_works(self):
        ops = cached_ops(2000)
        state = css_state(ops.dims, np.pi / 2, np.pi / 2)
        out = apply_rotation(state, ops, "x", 0.7)
        assert abs(out.norm() - 1.0) < 1e-11
        assert ops.jx_eigensystem.reconstruction_error(ops.jx) < 1e-10
