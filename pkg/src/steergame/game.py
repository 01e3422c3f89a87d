"""The two-setting steering game.

Alice measures along `ncs_direction` and announces which pure state Bob
should hold; Bob verifies by projecting onto the announced targets
(success probabilities P+, P- and error probabilities P+', P-'). The
pair then runs a joint check: Alice measures along the orthogonal
`check_direction` while Bob scans his analysis axis to maximize the
joint projection probability <W>. The game's figure of merit is
delta = <W>_max - C_LHS, where C_LHS is the bound any local-hidden-state
model that passed the verification step can reach.

All operations are pure; scans use a fixed reduction order so results do
not depend on evaluation scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import (
    OutcomeNeverOccursError,
    QubitState,
    TwoQubitState,
    as_direction,
    axis_ket,
    bloch_of,
    conditional_state,
    partial_trace_A,
    pure_qubit,
    unnormalized_conditional,
    DIR_X,
    DIR_Z,
    KET_H,
    KET_V,
)

ORTHOGONALITY_TOL = 1e-9
PURITY_TOL = 1e-9
ANGLE_REFINE_TOL = 1e-10
CLHS_AGREEMENT_TOL = 1e-8
IMAG_COHERENCE_TOL = 1e-10
PHI_COARSE_POINTS = 73

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class InternalConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree."""


@dataclass(frozen=True)
class GameSettings:
    """Measurement configuration for one run of the game.

    ncs_direction: Alice's axis n for the verification step.
    check_direction: Alice's axis for the joint check, orthogonal to n.
    expected_ncs_plus / expected_ncs_minus: the pure states Bob projects
        onto for Alice outcomes +1 / -1.
    scan_resolution: number of theta_B grid points on [0, 2pi).
    """

    ncs_direction: np.ndarray
    check_direction: np.ndarray
    expected_ncs_plus: QubitState
    expected_ncs_minus: QubitState
    scan_resolution: int = 721

    def __post_init__(self) -> None:
        object.__setattr__(self, "ncs_direction", as_direction(self.ncs_direction))
        object.__setattr__(self, "check_direction", as_direction(self.check_direction))
        if abs(float(np.dot(self.ncs_direction, self.check_direction))) > ORTHOGONALITY_TOL:
            raise ValueError("check_direction must be orthogonal to ncs_direction")
        for target in (self.expected_ncs_plus, self.expected_ncs_minus):
            if not target.is_pure(PURITY_TOL):
                raise ValueError("expected conditional states must be pure")
        if self.scan_resolution < 8:
            raise ValueError("scan_resolution too small")


@dataclass(frozen=True)
class GameTranscript:
    """Everything measured during one run of the game.

    p_plus/p_minus are the verification success probabilities, with the
    corresponding error probabilities p_plus_err/p_minus_err (detector D2).
    w_max is the maximal joint expectation, attained at Bob angles
    (theta_b_star, phi_b_star) with Alice outcome alice_outcome_star of
    the check direction; p_d is that outcome's marginal probability and
    w_other the same-axis expectation of the losing outcome. delta is
    w_max - c_lhs. failure_reason is set when the verification step hit a
    zero-probability branch (the game then reports instead of raising).
    """

    p_plus: float
    p_plus_err: float
    p_minus: float
    p_minus_err: float
    w_max: float
    theta_b_star: float
    phi_b_star: float
    alice_outcome_star: int
    p_d: float
    w_other: float
    c_lhs: float
    delta: float
    failure_reason: str | None = None


def settings_for_rho1(theta: float, scan_resolution: int = 721) -> GameSettings:
    """Standard configuration for the rho1 family: n = x, check = z.

    The announced targets are cos(theta)|H> +/- sin(theta)|V>.
    """
    return GameSettings(
        ncs_direction=DIR_X,
        check_direction=DIR_Z,
        expected_ncs_plus=pure_qubit(np.cos(theta) * KET_H + np.sin(theta) * KET_V),
        expected_ncs_minus=pure_qubit(np.cos(theta) * KET_H - np.sin(theta) * KET_V),
        scan_resolution=scan_resolution,
    )


def settings_for_rho2(scan_resolution: int = 721) -> GameSettings:
    """Standard configuration for the rho2 family: n = z, check = x, targets |H>, |V>."""
    return GameSettings(
        ncs_direction=DIR_Z,
        check_direction=DIR_X,
        expected_ncs_plus=pure_qubit(KET_H),
        expected_ncs_minus=pure_qubit(KET_V),
        scan_resolution=scan_resolution,
    )


def _verify_branch(
    rho: TwoQubitState, settings: GameSettings, outcome: int
) -> tuple[float, float]:
    target = settings.expected_ncs_plus if outcome == +1 else settings.expected_ncs_minus
    _, cond = conditional_state(rho, settings.ncs_direction, outcome)
    success = float(np.trace(target.matrix @ cond.matrix).real)
    success = min(max(success, 0.0), 1.0)
    return success, 1.0 - success


def verify_ncs(rho: TwoQubitState, settings: GameSettings) -> tuple[float, float, float, float]:
    """Verification probabilities (P+, P+', P-, P-').

    Raises OutcomeNeverOccursError when either of Alice's outcomes has
    probability below 1e-12.
    """
    p_plus, p_plus_err = _verify_branch(rho, settings, +1)
    p_minus, p_minus_err = _verify_branch(rho, settings, -1)
    return p_plus, p_plus_err, p_minus, p_minus_err


def w_expectation(
    rho: TwoQubitState,
    settings: GameSettings,
    alice_outcome: int,
    theta_b: float,
    phi_b: float = 0.0,
) -> float:
    """Joint probability Tr[rho (Pi_check,outcome x |n_B><n_B|)]."""
    tilde = unnormalized_conditional(rho, settings.check_direction, alice_outcome)
    ket = axis_ket(theta_b, phi_b)
    return float((ket.conj() @ tilde @ ket).real)


def _quadratic_form_params(matrix_2x2: np.ndarray) -> tuple[float, np.ndarray]:
    """Decompose a Hermitian 2x2 M as (tr M + m . sigma)/2; return (tr M, m)."""
    m = matrix_2x2
    trace = float(np.trace(m).real)
    mvec = np.array(
        [2.0 * m[0, 1].real, -2.0 * m[0, 1].imag, float((m[0, 0] - m[1, 1]).real)]
    )
    return trace, mvec


def _axis_value(trace: float, mvec: np.ndarray, theta_b, phi_b):
    bx = np.sin(theta_b) * np.cos(phi_b)
    by = np.sin(theta_b) * np.sin(phi_b)
    bz = np.cos(theta_b)
    return 0.5 * (trace + mvec[0] * bx + mvec[1] * by + mvec[2] * bz)


def _golden_max(func, lo: float, hi: float, tol: float = ANGLE_REFINE_TOL) -> tuple[float, float]:
    """Golden-section maximization on [lo, hi]; returns (argmax, max).

    Tracks the best evaluated point so the result never falls below any
    probe value.
    """
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = func(c), func(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = func(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = func(d)
            if fd > best_f:
                best_x, best_f = d, fd
    mid = 0.5 * (a + b)
    fmid = func(mid)
    if fmid > best_f:
        best_x, best_f = mid, fmid
    return best_x, best_f


def _wrap_angle(angle: float) -> float:
    wrapped = angle % (2.0 * math.pi)
    if 2.0 * math.pi - wrapped < 1e-9:
        wrapped = 0.0
    return wrapped


def _scan_axis_max(
    matrix_2x2: np.ndarray, resolution: int, scan_phi: bool
) -> tuple[float, float, float]:
    """Maximize <n_B|M|n_B> over Bob's analysis axis.

    Coarse grid over theta_b on [0, 2pi) (and phi_b when scan_phi), then
    golden-section refinement of each coordinate in turn; a refinement step
    is only accepted when it improves the value, so the result is
    deterministic and never falls below the grid maximum. Grid argmax ties
    resolve to the smallest angle.
    """
    trace, mvec = _quadratic_form_params(matrix_2x2)
    thetas = np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False)
    spacing_t = 2.0 * math.pi / resolution
    if scan_phi:
        phis = np.linspace(0.0, 2.0 * math.pi, PHI_COARSE_POINTS, endpoint=False)
        values = _axis_value(trace, mvec, thetas[:, None], phis[None, :])
        i, j = np.unravel_index(int(np.argmax(values)), values.shape)
        theta, phi, value = float(thetas[i]), float(phis[j]), float(values[i, j])
        spacing_p = 2.0 * math.pi / PHI_COARSE_POINTS
        rounds = 8
    else:
        values = _axis_value(trace, mvec, thetas, 0.0)
        i = int(np.argmax(values))
        theta, phi, value = float(thetas[i]), 0.0, float(values[i])
        spacing_p = 0.0
        rounds = 1
    for _ in range(rounds):
        cand_t, cand_v = _golden_max(
            lambda t: _axis_value(trace, mvec, t, phi), theta - spacing_t, theta + spacing_t
        )
        if cand_v > value:
            theta, value = cand_t, float(cand_v)
        if scan_phi:
            cand_p, cand_v = _golden_max(
                lambda p: _axis_value(trace, mvec, theta, p), phi - spacing_p, phi + spacing_p
            )
            if cand_v > value:
                phi, value = cand_p, float(cand_v)
    return value, _wrap_angle(theta), _wrap_angle(phi)


def _needs_phi_scan(rho: TwoQubitState) -> bool:
    return bool(np.max(np.abs(rho.matrix.imag)) > IMAG_COHERENCE_TOL)


def maximize_w(
    rho: TwoQubitState, settings: GameSettings
) -> tuple[float, float, float, int, float, float]:
    """Maximize the joint expectation over Bob's axis and Alice's check outcome.

    Returns (w_max, theta_b_star, phi_b_star, alice_outcome_star, p_d, w_other).
    phi_b is scanned only when the state carries imaginary coherences,
    otherwise it is fixed to 0. Ties resolve to outcome +1 and the smaller
    theta_b.
    """
    scan_phi = _needs_phi_scan(rho)
    best = None
    for outcome in (+1, -1):
        tilde = unnormalized_conditional(rho, settings.check_direction, outcome)
        value, theta_b, phi_b = _scan_axis_max(tilde, settings.scan_resolution, scan_phi)
        if best is None or value > best[0]:
            best = (value, theta_b, phi_b, outcome)
    w_max, theta_star, phi_star, outcome_star = best
    p_d, _ = conditional_state(rho, settings.check_direction, outcome_star)
    w_other = w_expectation(rho, settings, -outcome_star, theta_star, phi_star)
    return w_max, theta_star, phi_star, outcome_star, p_d, w_other


def c_lhs_closed_form(rho: TwoQubitState) -> float:
    """(1 + |r_Bob|)/4 where r_Bob is the Bloch vector of Bob's marginal."""
    return (1.0 + float(np.linalg.norm(bloch_of(partial_trace_A(rho))))) / 4.0


def c_lhs(rho: TwoQubitState, settings: GameSettings) -> float:
    """Local-hidden-state bound max_nB Tr[rho (1/2 x |n_B><n_B|)].

    Computed by grid scan plus golden-section refinement and cross-checked
    against the closed form (1 + |r_Bob|)/4; disagreement beyond 1e-8
    raises InternalConsistencyError.
    """
    half_marginal = partial_trace_A(rho).matrix / 2.0
    value, _, _ = _scan_axis_max(half_marginal, settings.scan_resolution, _needs_phi_scan(rho))
    closed = c_lhs_closed_form(rho)
    if abs(value - closed) > CLHS_AGREEMENT_TOL:
        raise InternalConsistencyError(
            f"LHS bound mismatch: scan {value!r} vs closed form {closed!r}"
        )
    return value


def play_game(rho: TwoQubitState, settings: GameSettings) -> GameTranscript:
    """Run verification plus joint check and assemble the transcript.

    A zero-probability verification branch does not raise; the transcript
    carries failure_reason="outcome-never-occurs" with NaN probabilities
    for the dead branch, and the joint-check quantities are still filled.
    """
    failure = None
    try:
        p_plus, p_plus_err = _verify_branch(rho, settings, +1)
    except OutcomeNeverOccursError:
        p_plus, p_plus_err, failure = math.nan, math.nan, "outcome-never-occurs"
    try:
        p_minus, p_minus_err = _verify_branch(rho, settings, -1)
    except OutcomeNeverOccursError:
        p_minus, p_minus_err, failure = math.nan, math.nan, "outcome-never-occurs"

    w_max, theta_star, phi_star, outcome_star, p_d, w_other = maximize_w(rho, settings)
    bound = c_lhs(rho, settings)
    return GameTranscript(
        p_plus=p_plus,
        p_plus_err=p_plus_err,
        p_minus=p_minus,
        p_minus_err=p_minus_err,
        w_max=w_max,
        theta_b_star=theta_star,
        phi_b_star=phi_star,
        alice_outcome_star=outcome_star,
        p_d=p_d,
        w_other=w_other,
        c_lhs=bound,
        delta=w_max - bound,
        failure_reason=failure,
    )


def analytic_rho1(theta: float, eta: float) -> tuple[float, float]:
    """Closed-form (c_lhs, w_max) for the rho1 family, valid for theta in [0, pi/2]."""
    c = (1.0 + abs(math.cos(2.0 * theta))) / 4.0
    scale = 0.5 + abs(0.5 - eta)
    w = scale * (math.cos(theta) ** 2 if theta <= math.pi / 4.0 else math.sin(theta) ** 2)
    return c, w


def analytic_rho2(theta: float, eta: float, theta_b: float) -> tuple[float, float]:
    """Closed-form (w_curve_value, c_lhs) for the rho2 family.

    The curve value is the larger of the two check-outcome branches
    eta/2 cos^2(theta -/+ theta_b/2) + (1-eta)/4 at the given theta_b.
    """
    w_plus = eta / 2.0 * math.cos(theta - theta_b / 2.0) ** 2 + (1.0 - eta) / 4.0
    w_minus = eta / 2.0 * math.cos(theta + theta_b / 2.0) ** 2 + (1.0 - eta) / 4.0
    c = (1.0 + eta * abs(math.cos(2.0 * theta))) / 4.0
    return max(w_plus, w_minus), c
