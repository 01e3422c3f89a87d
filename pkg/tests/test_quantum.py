"""Unit tests for the state containers, factories and Bloch maps."""

import math

import numpy as np
import pytest

from steergame.quantum import (
    DIR_X,
    DIR_Z,
    KET_H,
    KET_V,
    OutcomeNeverOccursError,
    QubitState,
    TwoQubitState,
    bloch_of,
    bloch_to_state,
    conditional_state,
    direction_projector,
    make_psi,
    make_rho1,
    make_rho2,
    partial_trace_A,
    partial_trace_B,
    pure_qubit,
    as_direction,
)


def random_two_qubit_state(rng) -> TwoQubitState:
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    m = g @ g.conj().T
    return TwoQubitState(m / np.trace(m).real)


def random_direction(rng) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


class TestFactories:
    def test_psi_product_case(self):
        m = make_psi(0.0).matrix
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(m, expected, atol=1e-15)

    def test_psi_bell_case(self):
        m = make_psi(np.pi / 4).matrix
        for i, j in ((0, 0), (0, 3), (3, 0), (3, 3)):
            assert m[i, j] == pytest.approx(0.5, abs=1e-15)
        assert abs(m[1, 1]) < 1e-15 and abs(m[2, 2]) < 1e-15

    def test_psi_pi_sixths(self):
        # cos^2(pi/6)=3/4, sin^2=1/4, cos*sin = sqrt(3)/4
        m = make_psi(np.pi / 6).matrix
        np.testing.assert_allclose(
            np.diag(m).real, [0.75, 0.0, 0.0, 0.25], atol=1e-15
        )
        assert m[0, 3].real == pytest.approx(math.sqrt(3) / 4, abs=1e-15)

    def test_rho1_bell_limit(self):
        np.testing.assert_allclose(
            make_rho1(np.pi / 4, 1.0).matrix, make_psi(np.pi / 4).matrix, atol=1e-15
        )

    def test_rho1_eta_zero_is_swapped_pair(self):
        # cos(t)|VH> + sin(t)|HV>
        t = 0.9
        m = make_rho1(t, 0.0).matrix
        ket = np.array([0, np.sin(t), np.cos(t), 0], dtype=complex)
        np.testing.assert_allclose(m, np.outer(ket, ket.conj()), atol=1e-15)

    def test_rho1_even_mixture(self):
        m = make_rho1(np.pi / 4, 0.5).matrix
        np.testing.assert_allclose(np.diag(m).real, [0.25] * 4, atol=1e-15)
        assert m[0, 3] == pytest.approx(0.25, abs=1e-15)
        assert m[1, 2] == pytest.approx(0.25, abs=1e-15)

    def test_rho2_pure_limit(self):
        np.testing.assert_allclose(
            make_rho2(0.3, 1.0).matrix, make_psi(0.3).matrix, atol=1e-15
        )

    def test_rho2_classical_mixture(self):
        m = make_rho2(np.pi / 4, 0.0).matrix
        np.testing.assert_allclose(np.diag(m).real, [0.5, 0, 0, 0.5], atol=1e-15)
        assert abs(m[0, 3]) < 1e-15

    def test_rho2_partial_coherence(self):
        m = make_rho2(np.pi / 4, 0.8).matrix
        np.testing.assert_allclose(np.diag(m).real, [0.5, 0, 0, 0.5], atol=1e-15)
        assert m[0, 3].real == pytest.approx(0.4, abs=1e-15)

    @pytest.mark.parametrize("eta", [-0.1, 1.2])
    def test_eta_domain(self, eta):
        with pytest.raises(ValueError):
            make_rho1(0.5, eta)
        with pytest.raises(ValueError):
            make_rho2(0.5, eta)

    def test_affine_in_eta(self):
        rng = np.random.default_rng(11)
        for factory in (make_rho1, make_rho2):
            for _ in range(25):
                theta = rng.uniform(0, np.pi)
                eta = rng.uniform(0, 1)
                lo, hi = factory(theta, 0.0).matrix, factory(theta, 1.0).matrix
                np.testing.assert_allclose(
                    factory(theta, eta).matrix, eta * hi + (1 - eta) * lo, atol=1e-12
                )

    def test_factory_invariants_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            theta, eta = rng.uniform(0, np.pi), rng.uniform(0, 1)
            for state in (make_psi(theta), make_rho1(theta, eta), make_rho2(theta, eta)):
                m = state.matrix
                assert np.max(np.abs(m - m.conj().T)) < 1e-10
                assert np.trace(m).real == pytest.approx(1.0, abs=1e-10)
                assert np.linalg.eigvalsh(m)[0] >= -1e-10


class TestValidation:
    def test_rejects_non_hermitian(self):
        m = np.eye(4, dtype=complex) / 4
        m[0, 1] = 0.1
        with pytest.raises(ValueError, match="Hermitian"):
            TwoQubitState(m)

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            QubitState(np.diag([0.7, 0.7]))

    def test_clamps_rounding_noise(self):
        eps = 5e-11
        state = QubitState(np.diag([1.0 - eps, eps]) + np.diag([eps, -eps]))
        assert np.linalg.eigvalsh(state.matrix)[0] >= 0.0

    def test_rejects_real_negativity(self):
        with pytest.raises(ValueError, match="positive"):
            QubitState(np.diag([1.0 + 5e-9, -5e-9]))

    def test_direction_must_be_unit(self):
        with pytest.raises(ValueError):
            as_direction([1.0, 1.0, 0.0])

    def test_matrices_read_only(self):
        state = make_psi(0.3)
        with pytest.raises(ValueError):
            state.matrix[0, 0] = 9.0


class TestPartialTraces:
    def test_schmidt_marginal(self):
        np.testing.assert_allclose(
            partial_trace_A(make_psi(np.pi / 6)).matrix, np.diag([0.75, 0.25]), atol=1e-12
        )

    def test_bell_marginal_maximally_mixed(self):
        np.testing.assert_allclose(
            partial_trace_A(make_psi(np.pi / 4)).matrix, np.eye(2) / 2, atol=1e-12
        )

    def test_rho1_marginal_shared_by_both_terms(self):
        # Both mixture components of rho1 have the same Bob marginal.
        np.testing.assert_allclose(
            partial_trace_A(make_rho1(np.pi / 3, 0.7)).matrix,
            np.diag([0.25, 0.75]),
            atol=1e-12,
        )

    def test_rho2_marginal_mixes_toward_identity(self):
        # eta * diag(cos^2, sin^2) + (1 - eta) * I/2 for theta=pi/3, eta=0.7.
        np.testing.assert_allclose(
            partial_trace_A(make_rho2(np.pi / 3, 0.7)).matrix,
            np.diag([0.325, 0.675]),
            atol=1e-12,
        )

    def test_traces_complementary(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            rho = random_two_qubit_state(rng)
            assert np.trace(partial_trace_A(rho).matrix).real == pytest.approx(1.0, abs=1e-10)
            assert np.trace(partial_trace_B(rho).matrix).real == pytest.approx(1.0, abs=1e-10)


class TestConditionalStates:
    def test_bell_x_conditional(self):
        p, cond = conditional_state(make_psi(np.pi / 4), DIR_X, +1)
        assert p == pytest.approx(0.5, abs=1e-12)
        target = pure_qubit((KET_H + KET_V) / np.sqrt(2))
        np.testing.assert_allclose(cond.matrix, target.matrix, atol=1e-12)

    def test_schmidt_x_conditional(self):
        theta = 0.7
        p, cond = conditional_state(make_psi(theta), DIR_X, +1)
        assert p == pytest.approx(0.5, abs=1e-12)
        target = pure_qubit(np.cos(theta) * KET_H + np.sin(theta) * KET_V)
        np.testing.assert_allclose(cond.matrix, target.matrix, atol=1e-12)

    def test_dead_branch_raises(self):
        hh = TwoQubitState(np.diag([1.0, 0, 0, 0]).astype(complex))
        with pytest.raises(OutcomeNeverOccursError, match="outcome never occurs"):
            conditional_state(hh, DIR_Z, -1)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            rho = random_two_qubit_state(rng)
            n = random_direction(rng)
            p_plus, _ = conditional_state(rho, n, +1)
            p_minus, _ = conditional_state(rho, n, -1)
            assert p_plus + p_minus == pytest.approx(1.0, abs=1e-12)

    def test_no_signalling(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            rho = random_two_qubit_state(rng)
            n = random_direction(rng)
            p_plus, c_plus = conditional_state(rho, n, +1)
            p_minus, c_minus = conditional_state(rho, n, -1)
            mixture = p_plus * c_plus.matrix + p_minus * c_minus.matrix
            np.testing.assert_allclose(mixture, partial_trace_A(rho).matrix, atol=1e-10)

    def test_projector_completeness(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            n = random_direction(rng)
            total = direction_projector(n, +1) + direction_projector(n, -1)
            np.testing.assert_allclose(total, np.eye(2), atol=1e-12)


class TestBlochMaps:
    def test_h_projector(self):
        np.testing.assert_allclose(bloch_of(pure_qubit(KET_H)), [0, 0, 1], atol=1e-12)

    def test_maximally_mixed(self):
        np.testing.assert_allclose(
            bloch_of(QubitState(np.eye(2) / 2)), [0, 0, 0], atol=1e-12
        )

    def test_tilted_pure_state(self):
        theta = np.pi / 6
        state = pure_qubit(np.cos(theta) * KET_H + np.sin(theta) * KET_V)
        np.testing.assert_allclose(
            bloch_of(state), [math.sqrt(3) / 2, 0.0, 0.5], atol=1e-12
        )

    def test_round_trip_on_ball(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            b = rng.standard_normal(3)
            b *= rng.uniform(0, 1) / np.linalg.norm(b)
            np.testing.assert_allclose(bloch_of(bloch_to_state(b)), b, atol=1e-10)

    def test_state_round_trip(self):
        rng = np.random.default_rng(32)
        for _ in range(100):
            g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            m = g @ g.conj().T
            state = QubitState(m / np.trace(m).real)
            np.testing.assert_allclose(
                bloch_to_state(bloch_of(state)).matrix, state.matrix, atol=1e-10
            )

    def test_rejects_outside_ball(self):
        with pytest.raises(ValueError, match="unit ball"):
            bloch_to_state([1.1, 0.0, 0.0])
