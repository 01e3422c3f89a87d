"""Unit tests for the steering game: verification, scans, bounds, transcripts."""

import math

import numpy as np
import pytest

from steergame.game import (
    GameSettings,
    analytic_rho1,
    analytic_rho2,
    c_lhs,
    c_lhs_closed_form,
    maximize_w,
    play_game,
    settings_for_rho1,
    settings_for_rho2,
    verify_ncs,
    w_expectation,
)
from steergame.quantum import (
    DIR_X,
    DIR_Y,
    DIR_Z,
    KET_H,
    KET_V,
    OutcomeNeverOccursError,
    QubitState,
    TwoQubitState,
    bloch_to_state,
    conditional_state,
    make_psi,
    make_rho1,
    make_rho2,
    partial_trace_B,
    pure_qubit,
)

from test_quantum import random_two_qubit_state


BELL = make_psi(np.pi / 4)


class TestSettings:
    def test_directions_must_be_orthogonal(self):
        with pytest.raises(ValueError, match="orthogonal"):
            GameSettings(
                ncs_direction=DIR_X,
                check_direction=DIR_X,
                expected_ncs_plus=pure_qubit(KET_H),
                expected_ncs_minus=pure_qubit(KET_V),
            )

    def test_targets_must_be_pure(self):
        mixed = QubitState(np.diag([0.6, 0.4]))
        with pytest.raises(ValueError, match="pure"):
            GameSettings(
                ncs_direction=DIR_X,
                check_direction=DIR_Z,
                expected_ncs_plus=mixed,
                expected_ncs_minus=pure_qubit(KET_V),
            )


class TestVerifyNcs:
    def test_bell_ideal(self):
        result = verify_ncs(BELL, settings_for_rho1(np.pi / 4))
        np.testing.assert_allclose(result, (1.0, 0.0, 1.0, 0.0), atol=1e-12)

    def test_rho1_pure_announced_states(self):
        # Conditional states are cos(t)|H> +/- sin(t)|V> for every eta.
        for eta in (1.0, 0.6, 0.0):
            result = verify_ncs(make_rho1(np.pi / 6, eta), settings_for_rho1(np.pi / 6))
            np.testing.assert_allclose(result, (1.0, 0.0, 1.0, 0.0), atol=1e-12)

    def test_rho2_diagonal_noise_keeps_ncs_pure(self):
        result = verify_ncs(make_rho2(np.pi / 6, 0.8), settings_for_rho2())
        np.testing.assert_allclose(result, (1.0, 0.0, 1.0, 0.0), atol=1e-12)

    def test_wrong_targets_show_errors(self):
        p_plus, p_plus_err, _, _ = verify_ncs(BELL, settings_for_rho1(np.pi / 3))
        assert p_plus_err > 0.01
        assert p_plus + p_plus_err == pytest.approx(1.0, abs=1e-12)

    def test_dead_branch_raises(self):
        hh = TwoQubitState(np.diag([1, 0, 0, 0]).astype(complex))
        with pytest.raises(OutcomeNeverOccursError):
            verify_ncs(hh, settings_for_rho2())


class TestWExpectation:
    def test_bell_z_plus_at_zero(self):
        value = w_expectation(BELL, settings_for_rho1(np.pi / 4), +1, 0.0)
        assert value == pytest.approx(0.5, abs=1e-12)

    def test_rho2_closed_form_curve(self):
        theta, eta = 0.6, 0.77
        rho = make_rho2(theta, eta)
        settings = settings_for_rho2()
        for theta_b in np.linspace(0, 2 * np.pi, 17):
            w_plus = w_expectation(rho, settings, +1, theta_b)
            w_minus = w_expectation(rho, settings, -1, theta_b)
            expect_plus = eta / 2 * np.cos(theta - theta_b / 2) ** 2 + (1 - eta) / 4
            expect_minus = eta / 2 * np.cos(theta + theta_b / 2) ** 2 + (1 - eta) / 4
            assert w_plus == pytest.approx(expect_plus, abs=1e-12)
            assert w_minus == pytest.approx(expect_minus, abs=1e-12)

    def test_orthogonal_axis_gives_zero(self):
        # Bob's axis orthogonal to his conditional support on a branch with support |H>.
        hh = TwoQubitState(np.diag([1, 0, 0, 0]).astype(complex))
        value = w_expectation(hh, settings_for_rho2(), +1, np.pi)
        assert value == pytest.approx(0.0, abs=1e-12)


class TestMaximizeW:
    def test_rho1_small_theta(self):
        w, theta_b, _, outcome, p_d, w_other = maximize_w(
            make_rho1(np.pi / 6, 1.0), settings_for_rho1(np.pi / 6)
        )
        assert w == pytest.approx(0.75, abs=1e-9)
        assert theta_b == pytest.approx(0.0, abs=1e-6)
        assert outcome == +1
        assert p_d == pytest.approx(0.75, abs=1e-12)
        assert w_other == pytest.approx(0.0, abs=1e-9)

    def test_rho1_large_theta(self):
        w, theta_b, _, outcome, _, _ = maximize_w(
            make_rho1(np.pi / 3, 1.0), settings_for_rho1(np.pi / 3)
        )
        assert w == pytest.approx(0.75, abs=1e-9)
        assert theta_b == pytest.approx(np.pi, abs=1e-6)
        assert outcome == -1

    def test_rho2_peak_position(self):
        w, theta_b, _, _, _, _ = maximize_w(make_rho2(np.pi / 4, 1.0), settings_for_rho2())
        assert w == pytest.approx(0.5, abs=1e-9)
        assert theta_b == pytest.approx(np.pi / 2, abs=1e-6)

    def test_bell_tie_break(self):
        w, theta_b, phi_b, outcome, p_d, w_other = maximize_w(BELL, settings_for_rho1(np.pi / 4))
        assert outcome == +1
        assert theta_b == pytest.approx(0.0, abs=1e-6)
        assert phi_b == 0.0
        assert w == pytest.approx(0.5, abs=1e-12)
        assert w_other == pytest.approx(0.0, abs=1e-12)

    def test_w_other_never_exceeds_w_max(self):
        rng = np.random.default_rng(17)
        settings = settings_for_rho1(np.pi / 5)
        for _ in range(30):
            rho = random_two_qubit_state(rng)
            w, _, _, _, _, w_other = maximize_w(rho, settings)
            assert w_other <= w + 1e-12
            assert 0.0 <= w <= 1.0

    def test_p_d_matches_alice_marginal(self):
        rng = np.random.default_rng(18)
        settings = settings_for_rho2()
        from steergame.quantum import direction_projector

        for _ in range(30):
            rho = random_two_qubit_state(rng)
            _, _, _, outcome, p_d, _ = maximize_w(rho, settings)
            marginal = partial_trace_B(rho).matrix
            proj = direction_projector(settings.check_direction, outcome)
            assert p_d == pytest.approx(float(np.trace(proj @ marginal).real), abs=1e-10)


class TestCLhs:
    def test_bell_value(self):
        assert c_lhs(BELL, settings_for_rho1(np.pi / 4)) == pytest.approx(0.25, abs=1e-10)

    def test_rho1_value(self):
        value = c_lhs(make_rho1(np.pi / 6, 1.0), settings_for_rho1(np.pi / 6))
        assert value == pytest.approx(0.375, abs=1e-10)

    def test_rho2_extreme(self):
        value = c_lhs(make_rho2(np.pi / 2, 1.0), settings_for_rho2())
        assert value == pytest.approx(0.5, abs=1e-10)

    def test_scan_agrees_with_closed_form(self):
        rng = np.random.default_rng(7)
        settings = settings_for_rho1(np.pi / 4)
        for _ in range(200):
            rho = random_two_qubit_state(rng)
            assert abs(c_lhs(rho, settings) - c_lhs_closed_form(rho)) <= 1e-8


class TestPlayGame:
    def test_bell_transcript(self):
        t = play_game(BELL, settings_for_rho1(np.pi / 4))
        np.testing.assert_allclose(
            (t.p_plus, t.p_plus_err, t.p_minus, t.p_minus_err), (1, 0, 1, 0), atol=1e-12
        )
        assert t.w_max == pytest.approx(0.5, abs=1e-12)
        assert t.c_lhs == pytest.approx(0.25, abs=1e-10)
        assert t.delta == pytest.approx(0.25, abs=1e-10)
        assert t.failure_reason is None

    def test_boundary_mixture(self):
        t = play_game(make_rho1(np.pi / 4, 0.5), settings_for_rho1(np.pi / 4))
        assert t.delta == pytest.approx(0.0, abs=1e-10)

    def test_product_state_reports_dead_branch(self):
        hh = TwoQubitState(np.diag([1, 0, 0, 0]).astype(complex))
        t = play_game(hh, settings_for_rho2())
        assert t.failure_reason == "outcome-never-occurs"
        assert math.isnan(t.p_minus)
        # Joint-check quantities are still available.
        assert t.w_max == pytest.approx(0.5, abs=1e-9)
        assert t.c_lhs == pytest.approx(0.5, abs=1e-10)

    def test_delta_identity(self):
        rng = np.random.default_rng(41)
        settings = settings_for_rho1(0.8)
        for _ in range(20):
            rho = random_two_qubit_state(rng)
            t = play_game(rho, settings)
            assert t.delta == t.w_max - t.c_lhs

    def test_probability_complements(self):
        t = play_game(make_rho1(0.5, 0.8), settings_for_rho1(0.5))
        assert t.p_plus + t.p_plus_err == pytest.approx(1.0, abs=1e-12)
        assert t.p_minus + t.p_minus_err == pytest.approx(1.0, abs=1e-12)

    def test_balanced_product_states_never_win(self):
        # Product states with an unbiased check marginal saturate the bound.
        rng = np.random.default_rng(42)
        settings = settings_for_rho1(np.pi / 4)
        for _ in range(100):
            b_alice = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0])
            if np.linalg.norm(b_alice) > 1:
                b_alice /= np.linalg.norm(b_alice) * rng.uniform(1, 2)
            ketb = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            rho = TwoQubitState(
                np.kron(bloch_to_state(b_alice).matrix, pure_qubit(ketb).matrix)
            )
            w, *_ = maximize_w(rho, settings)
            assert w - c_lhs(rho, settings) <= 1e-9


class TestAnalyticOracles:
    def test_rho1_values(self):
        assert analytic_rho1(np.pi / 6, 1.0) == pytest.approx((0.375, 0.75))
        # theta=0 is a product state: the joint-check maximum saturates at 1
        # (the game is decided at the verification stage there, not by delta).
        c, w = analytic_rho1(0.0, 1.0)
        assert (c, w) == pytest.approx((0.5, 1.0))

    def test_rho1_branch_continuity(self):
        below = analytic_rho1(np.pi / 4 - 1e-12, 0.7)[1]
        above = analytic_rho1(np.pi / 4 + 1e-12, 0.7)[1]
        assert below == pytest.approx(above, abs=1e-9)

    def test_rho2_values(self):
        w, c = analytic_rho2(np.pi / 4, 1.0, np.pi / 2)
        assert w == pytest.approx(0.5)
        assert c == pytest.approx(0.25)

    def test_rho2_flat_at_eta_zero(self):
        values = [analytic_rho2(0.8, 0.0, tb)[0] for tb in np.linspace(0, 2 * np.pi, 7)]
        np.testing.assert_allclose(values, 0.25, atol=1e-12)

    def test_numeric_matches_analytic_rho1(self):
        for theta in np.linspace(0, np.pi / 2, 10):
            for eta in (0.0, 0.3, 0.5, 0.8, 1.0):
                rho = make_rho1(theta, eta)
                settings = settings_for_rho1(theta)
                c_ref, w_ref = analytic_rho1(theta, eta)
                w, *_ = maximize_w(rho, settings)
                assert abs(w - w_ref) <= 1e-6
                assert abs(c_lhs(rho, settings) - c_ref) <= 1e-8

    def test_numeric_matches_analytic_rho2_curve(self):
        settings = settings_for_rho2()
        for theta, eta in ((0.2, 0.9), (np.pi / 4, 1.0), (1.1, 0.4)):
            rho = make_rho2(theta, eta)
            for theta_b in np.linspace(0, 2 * np.pi, 25):
                w = max(
                    w_expectation(rho, settings, +1, theta_b),
                    w_expectation(rho, settings, -1, theta_b),
                )
                assert abs(w - analytic_rho2(theta, eta, theta_b)[0]) <= 1e-9


class TestComplexStates:
    def test_phase_scan_finds_y_axis(self):
        # A state whose optimal analysis axis needs a nonzero phase angle.
        ket = np.zeros(4, dtype=complex)
        ket[0] = 1 / np.sqrt(2)
        ket[3] = 1j / np.sqrt(2)
        rho = TwoQubitState(np.outer(ket, ket.conj()))
        settings = settings_for_rho1(np.pi / 4)
        w, theta_b, phi_b, *_ = maximize_w(rho, settings)
        assert w == pytest.approx(0.5, abs=1e-9)
        assert c_lhs(rho, settings) == pytest.approx(0.25, abs=1e-8)
