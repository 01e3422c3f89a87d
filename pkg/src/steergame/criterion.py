"""Noise-robust steering criterion in the Bloch-disk plane.

The measured game data pin each of Bob's four conditional states to a
chord of the unit disk: the verification probabilities give chords at
distances r_i = 1 - 2 P_i' perpendicular to the announced target axes,
and the joint-check probabilities give horizontal chords at heights
h = 2 <W>_cond - 1 on the axis of Bob's optimal analysis direction.

Any local-hidden-state explanation of such data can be brought to a
mirror-symmetric form with four hidden states, two on each horizontal
chord. That model can place the symmetrized conditional point B no
further from the axis than G, the convex combination of the extreme
chord points E and F taken with the check-outcome weights. The data
itself places B on the merged verification chord at the height forced
by the hidden-state bookkeeping. |OB| - |OG| > 0 therefore excludes
every local-hidden-state model; minimizing it over the reported error
box yields the robust verdict delta_prime.

A brute-force feasibility oracle that enumerates candidate hidden-state
ensembles on a grid provides an independent check of the geometric
formula.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .game import GameSettings, GameTranscript
from .quantum import (
    OutcomeNeverOccursError,
    TwoQubitState,
    bloch_of,
    conditional_state,
    DIR_X,
    DIR_Y,
)

SIN_GAMMA_FLOOR = 1e-6
COPLANARITY_TOL = 1e-6
MARGINAL_FLOOR = 1e-9
MODEL_TOL = 1e-6
CONTAINMENT_TOL = 1e-12

SETTING_NCS = "ncs"
SETTING_CHECK = "check"

# Hidden-state roles: index 0 and 3 answer the verification setting with -1,
# indices 1 and 2 with +1; indices 0 and 1 answer the check setting with +1
# (the p_D branch), indices 2 and 3 with -1.
STANDARD_RESPONSE = {
    (SETTING_NCS, +1): (0, 1, 1, 0),
    (SETTING_NCS, -1): (1, 0, 0, 1),
    (SETTING_CHECK, +1): (1, 1, 0, 0),
    (SETTING_CHECK, -1): (0, 0, 1, 1),
}


class OutOfPlaneError(ValueError):
    """Conditional-state Bloch vectors do not lie in a common plane."""


class DegenerateSettingError(ValueError):
    """A measurement branch is too unlikely (or absent) to build a record from."""


class DegenerateGeometryError(ValueError):
    """The plane geometry is degenerate (verification chord parallel to the axis)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class InconsistentRecordError(ValueError):
    """The record places the conditional point outside the quantum state space."""


@dataclass(frozen=True)
class GeometricRecord:
    """Measured plane-geometry data with one-sigma uncertainties.

    r1, r2 are the verification chord distances, gamma1, gamma2 the angles
    between the target axes and the frame z-axis, h3, h4 the signed heights
    of the check-setting chords, and p_C, p_D the check-outcome marginals
    (p_D belongs to the branch that achieved the maximum). err_p is the
    uncertainty of p_D; p_C always mirrors p_D.
    """

    r1: float
    r2: float
    gamma1: float
    gamma2: float
    h3: float
    h4: float
    p_c: float
    p_d: float
    err_r1: float = 0.0
    err_r2: float = 0.0
    err_gamma1: float = 0.0
    err_gamma2: float = 0.0
    err_h3: float = 0.0
    err_h4: float = 0.0
    err_p: float = 0.0

    def __post_init__(self) -> None:
        for name in ("r1", "r2", "h3", "h4"):
            if abs(getattr(self, name)) > 1.0 + 1e-9:
                raise ValueError(f"{name} outside [-1, 1]")
        for name in ("gamma1", "gamma2"):
            if not -1e-9 <= getattr(self, name) <= math.pi + 1e-9:
                raise ValueError(f"{name} outside [0, pi]")
        if abs(self.p_c + self.p_d - 1.0) > 1e-9 or min(self.p_c, self.p_d) < -1e-9:
            raise ValueError("p_c and p_d must be probabilities summing to 1")
        for name, value in vars(self).items():
            if name.startswith("err_") and value < 0.0:
                raise ValueError("uncertainties must be non-negative")


@dataclass(frozen=True)
class SymmetrizedRecord:
    """Mirror-symmetric record: one merged verification chord plus the heights."""

    r12: float
    gamma: float
    h3n: float
    h4n: float
    p_c: float
    p_d: float
    containment_violation: float = 0.0


@dataclass(frozen=True)
class LHSModel:
    """A deterministic four-hidden-state local model.

    hidden_states holds (Bloch vector, weight) pairs; response maps
    (setting, outcome) to a 0/1 flag per hidden state. For each setting a
    hidden state must answer exactly one outcome.
    """

    hidden_states: tuple[tuple[np.ndarray, float], ...]
    response: dict[tuple[str, int], tuple[int, ...]]

    def __post_init__(self) -> None:
        states = tuple(
            (np.asarray(vec, dtype=float).reshape(3), float(weight))
            for vec, weight in self.hidden_states
        )
        object.__setattr__(self, "hidden_states", states)
        total = sum(w for _, w in states)
        if abs(total - 1.0) > 1e-9 or any(w < -1e-12 for _, w in states):
            raise ValueError("hidden-state weights must be non-negative and sum to 1")
        if any(np.linalg.norm(vec) > 1.0 + 1e-9 for vec, _ in states):
            raise ValueError("hidden states must lie inside the Bloch ball")
        settings = {setting for setting, _ in self.response}
        n = len(states)
        for setting in settings:
            flags = [self.response.get((setting, o), (0,) * n) for o in (+1, -1)]
            for k in range(n):
                if flags[0][k] + flags[1][k] != 1:
                    raise ValueError("each hidden state must answer exactly one outcome per setting")


@dataclass(frozen=True)
class SteeringVerdict:
    """Outcome of the robust criterion.

    value is |OB| - |OG| at the nominal record (NaN when the nominal point
    is degenerate or inconsistent), delta_prime its minimum over the error
    box. A witness model is attached when a local-hidden-state ensemble
    reproducing the nominal record was found.
    """

    value: float
    delta_prime: float
    steerable: bool
    witness: LHSModel | None
    reason: str


def _perp_axis(z_axis: np.ndarray) -> np.ndarray:
    seed = DIR_X if abs(float(np.dot(z_axis, DIR_X))) < 0.9 else DIR_Y
    raw = seed - float(np.dot(seed, z_axis)) * z_axis
    return raw / np.linalg.norm(raw)


def build_geometric_record(
    rho: TwoQubitState, transcript: GameTranscript, settings: GameSettings
) -> GeometricRecord:
    """Map a game transcript to plane geometry.

    The frame z-axis is the Bloch direction of Bob's optimal analysis axis.
    All four conditional states must lie in one plane through that axis
    (true for real-amplitude states); otherwise OutOfPlaneError is raised.
    """
    if transcript.failure_reason is not None:
        raise DegenerateSettingError(
            f"cannot build a record from a failed game ({transcript.failure_reason})"
        )
    p_d = transcript.p_d
    p_c = 1.0 - p_d
    if min(p_c, p_d) < MARGINAL_FLOOR:
        raise DegenerateSettingError("check-setting marginal too small")

    t, p = transcript.theta_b_star, transcript.phi_b_star
    z_axis = np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])
    m_plus = bloch_of(settings.expected_ncs_plus)
    m_minus = bloch_of(settings.expected_ncs_minus)

    cond_blochs = []
    for direction, outcome in (
        (settings.ncs_direction, +1),
        (settings.ncs_direction, -1),
        (settings.check_direction, +1),
        (settings.check_direction, -1),
    ):
        try:
            _, cond = conditional_state(rho, direction, outcome)
        except OutcomeNeverOccursError as exc:
            raise DegenerateSettingError(str(exc)) from exc
        cond_blochs.append(bloch_of(cond))

    residuals = [
        vec - float(np.dot(vec, z_axis)) * z_axis for vec in [m_plus, m_minus, *cond_blochs]
    ]
    norms = [float(np.linalg.norm(r)) for r in residuals]
    k = int(np.argmax(norms))
    x_axis = residuals[k] / norms[k] if norms[k] > 1e-9 else _perp_axis(z_axis)
    y_axis = np.cross(z_axis, x_axis)
    for vec in cond_blochs:
        if abs(float(np.dot(vec, y_axis))) >= COPLANARITY_TOL:
            raise OutOfPlaneError("out-of-plane data: conditional states are not coplanar")

    clip = lambda x: min(max(x, -1.0), 1.0)
    return GeometricRecord(
        r1=1.0 - 2.0 * transcript.p_plus_err,
        r2=1.0 - 2.0 * transcript.p_minus_err,
        gamma1=math.acos(clip(float(np.dot(m_plus, z_axis)))),
        gamma2=math.acos(clip(float(np.dot(m_minus, z_axis)))),
        h3=clip(2.0 * transcript.w_max / p_d - 1.0),
        h4=clip(2.0 * transcript.w_other / p_c - 1.0),
        p_c=p_c,
        p_d=p_d,
    )


def _merge_chords(
    r1: float, gamma1: float, r2: float, gamma2: float
) -> tuple[float, float, float]:
    """Merge two chords (after mirroring the second onto the first's side).

    Both chords' endpoints lie on the unit circle at polar angles
    gamma_i +/- arccos(r_i). The merged chord spans the two angular
    extremes, which is the smallest cap containing all four endpoints.
    Returns (r12, gamma, containment_violation).
    """
    a1 = math.acos(min(max(r1, -1.0), 1.0))
    a2 = math.acos(min(max(r2, -1.0), 1.0))
    endpoints = (gamma1 - a1, gamma1 + a1, gamma2 - a2, gamma2 + a2)
    lo, hi = min(endpoints), max(endpoints)
    gamma = 0.5 * (lo + hi)
    r12 = math.cos(0.5 * (hi - lo))
    violation = max(0.0, max(r12 - math.cos(t - gamma) for t in endpoints))
    return r12, gamma, violation


def symmetrize(rec: GeometricRecord) -> SymmetrizedRecord:
    """Mirror the second verification chord across the axis and merge.

    The check-setting chords are horizontal and centered on the axis, so
    mirroring leaves them unchanged and the heights pass through. When the
    chord angles coincide the merge reduces to r12 = min(r1, r2).
    """
    r12, gamma, violation = _merge_chords(rec.r1, rec.gamma1, rec.r2, rec.gamma2)
    return SymmetrizedRecord(
        r12=r12,
        gamma=gamma,
        h3n=rec.h3,
        h4n=rec.h4,
        p_c=rec.p_c,
        p_d=rec.p_d,
        containment_violation=violation,
    )


def criterion_value(
    sym: SymmetrizedRecord, disk_slack: float = 1e-9
) -> tuple[float, tuple[float, float], tuple[float, float]]:
    """|OB| - |OG| for a symmetrized record; returns (value, B, G).

    E and F are the extreme points of the two horizontal chords, G their
    convex combination with the check-outcome weights, and B the point of
    the merged verification chord at the height z_B = p_D h3 + p_C h4
    forced on the conditional state. B further than disk_slack outside the
    unit disk marks the record as inconsistent with any quantum state.
    """
    sin_g, cos_g = math.sin(sym.gamma), math.cos(sym.gamma)
    if abs(sin_g) <= SIN_GAMMA_FLOOR:
        raise DegenerateGeometryError("degenerate-gamma")
    e_x = math.sqrt(max(0.0, 1.0 - sym.h3n**2))
    f_x = math.sqrt(max(0.0, 1.0 - sym.h4n**2))
    z_b = sym.p_d * sym.h3n + sym.p_c * sym.h4n
    x_g = sym.p_d * e_x + sym.p_c * f_x
    x_b = (sym.r12 - cos_g * z_b) / sin_g
    if math.hypot(x_b, z_b) > 1.0 + disk_slack:
        raise InconsistentRecordError("record inconsistent with quantum state space")
    return abs(x_b) - x_g, (x_b, z_b), (x_g, z_b)


def lhs_oracle(sym: SymmetrizedRecord, grid_n: int = 2001) -> LHSModel | None:
    """Brute-force search for a local-hidden-state model of a symmetrized record.

    Hidden states H1 = (-x2, h3n), H2 = (x2, h3n) carry weight p_D/2 each
    and H3 = (x3, h4n), H4 = (-x3, h4n) weight p_C/2. x2 is scanned on a
    grid_n-point grid over its admissible range; for each x2 the balance
    equation fixes x3 exactly, and the candidate is accepted when that x3
    lies inside its own range. Returns the first feasible model in grid
    order, or None. Models returned satisfy the balance equations to
    machine precision.
    """
    sin_g, cos_g = math.sin(sym.gamma), math.cos(sym.gamma)
    if abs(sin_g) <= SIN_GAMMA_FLOOR:
        raise DegenerateGeometryError("degenerate-gamma")
    x2_max = math.sqrt(max(0.0, 1.0 - sym.h3n**2))
    x3_max = math.sqrt(max(0.0, 1.0 - sym.h4n**2))
    z_b = sym.p_d * sym.h3n + sym.p_c * sym.h4n
    x_b = (sym.r12 - cos_g * z_b) / sin_g

    if sym.p_c <= 1e-12 or sym.p_d <= 1e-12:
        weight, limit, other_limit = (
            (sym.p_d, x2_max, x3_max) if sym.p_c <= 1e-12 else (sym.p_c, x3_max, x2_max)
        )
        exact = x_b / weight
        if abs(exact) > limit + 1e-12:
            return None
        x2, x3 = (
            (min(max(exact, -limit), limit), 0.0)
            if sym.p_c <= 1e-12
            else (0.0, min(max(exact, -limit), limit))
        )
    else:
        x2_grid = np.linspace(-x2_max, x2_max, grid_n) if x2_max > 0.0 else np.zeros(1)
        x3_required = (x_b - sym.p_d * x2_grid) / sym.p_c
        feasible = np.abs(x3_required) <= x3_max + 1e-12
        if not feasible.any():
            return None
        idx = int(np.argmax(feasible))
        x2 = float(x2_grid[idx])
        x3 = min(max(float(x3_required[idx]), -x3_max), x3_max)

    hidden = (
        (np.array([-x2, 0.0, sym.h3n]), sym.p_d / 2.0),
        (np.array([x2, 0.0, sym.h3n]), sym.p_d / 2.0),
        (np.array([x3, 0.0, sym.h4n]), sym.p_c / 2.0),
        (np.array([-x3, 0.0, sym.h4n]), sym.p_c / 2.0),
    )
    return LHSModel(hidden_states=hidden, response=dict(STANDARD_RESPONSE))


def model_conditionals(model: LHSModel) -> dict[tuple[str, int], tuple[float, np.ndarray]]:
    """Outcome probabilities and conditional Bloch vectors implied by a model."""
    out = {}
    for key, flags in model.response.items():
        prob = sum(w for (_, w), f in zip(model.hidden_states, flags) if f)
        if prob > 0.0:
            vec = sum(
                (w * v for (v, w), f in zip(model.hidden_states, flags) if f),
                start=np.zeros(3),
            ) / prob
        else:
            vec = np.zeros(3)
        out[key] = (prob, vec)
    return out


def record_residual(model: LHSModel, rec: GeometricRecord) -> float:
    """Worst violation of the (possibly asymmetric) record constraints by a model.

    The verification-setting conditionals must sit on their chords (the +1
    branch on the chord at +gamma1, the -1 branch on the mirrored chord at
    gamma2), the check-setting conditionals on the horizontal chords, and
    the check marginals must match the record.
    """
    cond = model_conditionals(model)
    p_b, b = cond[(SETTING_NCS, +1)]
    p_a, a = cond[(SETTING_NCS, -1)]
    p_d, d = cond[(SETTING_CHECK, +1)]
    p_c, c = cond[(SETTING_CHECK, -1)]
    residuals = [
        abs(p_d - rec.p_d),
        abs(p_c - rec.p_c),
        abs(b[0] * math.sin(rec.gamma1) + b[2] * math.cos(rec.gamma1) - rec.r1),
        abs(-a[0] * math.sin(rec.gamma2) + a[2] * math.cos(rec.gamma2) - rec.r2),
        abs(d[2] - rec.h3),
        abs(c[2] - rec.h4),
    ]
    return max(residuals)


def symmetrized_residual(model: LHSModel, sym: SymmetrizedRecord) -> float:
    """Worst violation of a symmetrized record's constraints by a model."""
    cond = model_conditionals(model)
    p_b, b = cond[(SETTING_NCS, +1)]
    p_a, a = cond[(SETTING_NCS, -1)]
    p_d, d = cond[(SETTING_CHECK, +1)]
    p_c, c = cond[(SETTING_CHECK, -1)]
    sin_g, cos_g = math.sin(sym.gamma), math.cos(sym.gamma)
    residuals = [
        abs(p_b - 0.5),
        abs(p_a - 0.5),
        abs(p_d - sym.p_d),
        abs(p_c - sym.p_c),
        abs(b[0] * sin_g + b[2] * cos_g - sym.r12),
        abs(-a[0] * sin_g + a[2] * cos_g - sym.r12),
        abs(d[0]),
        abs(d[2] - sym.h3n),
        abs(c[0]),
        abs(c[2] - sym.h4n),
    ]
    return max(residuals)


def _model_roles(model: LHSModel) -> tuple[int, int, int, int]:
    """Indices of the hidden states in role order (H1, H2, H3, H4)."""
    ncs = model.response[(SETTING_NCS, +1)]
    check = model.response[(SETTING_CHECK, +1)]
    roles = {}
    for k in range(len(model.hidden_states)):
        roles[(ncs[k], check[k])] = roles.get((ncs[k], check[k]), []) + [k]
    try:
        (i1,), (i2,), (i3,), (i4,) = (
            roles[(0, 1)],
            roles[(1, 1)],
            roles[(1, 0)],
            roles[(0, 0)],
        )
    except (KeyError, ValueError) as exc:
        raise ValueError("model must have exactly one hidden state per response role") from exc
    return i1, i2, i3, i4


def symmetrize_lhs_model(model: LHSModel, rec: GeometricRecord, tol: float = MODEL_TOL) -> LHSModel:
    """Mirror-average a feasible model into the symmetric normal form.

    Given a model reproducing an asymmetric record, returns the ensemble
    with mirror-paired hidden states and equal weights within each check
    branch; the output still reproduces the record's balance equations and
    satisfies the symmetry constraints. Rejects models that do not satisfy
    the record within `tol` or are not in-plane.
    """
    if any(abs(vec[1]) > 1e-9 for vec, _ in model.hidden_states):
        raise ValueError("model must lie in the x-z plane")
    residual = record_residual(model, rec)
    if residual > tol:
        raise ValueError(f"model does not satisfy the record (residual {residual:.3e})")
    i1, i2, i3, i4 = _model_roles(model)
    states = model.hidden_states
    mirror = lambda v: np.array([-v[0], v[1], v[2]])
    (h1, w1), (h2, w2), (h3, w3), (h4, w4) = states[i1], states[i2], states[i3], states[i4]
    p_d, p_c = w1 + w2, w3 + w4
    if min(p_c, p_d) < MARGINAL_FLOOR:
        raise ValueError("model assigns vanishing weight to a check branch")
    hidden = (
        ((w1 * h1 + w2 * mirror(h2)) / p_d, p_d / 2.0),
        ((w2 * h2 + w1 * mirror(h1)) / p_d, p_d / 2.0),
        ((w3 * h3 + w4 * mirror(h4)) / p_c, p_c / 2.0),
        ((w4 * h4 + w3 * mirror(h3)) / p_c, p_c / 2.0),
    )
    return LHSModel(hidden_states=hidden, response=dict(STANDARD_RESPONSE))


_BOX_FIELDS = ("r1", "r2", "gamma1", "gamma2", "h3", "h4", "p_d")


def _box_axis(value: float, err: float, lo: float, hi: float) -> tuple[float, ...]:
    if err <= 0.0:
        return (value,)
    points = sorted({min(max(value - err, lo), hi), value, min(max(value + err, lo), hi)})
    return tuple(points)


def _evaluate_point(
    point: dict[str, float], disk_slack: float
) -> tuple[str, float | None, SymmetrizedRecord]:
    """Symmetrize and score one error-box point.

    Returns (status, value, sym) where status is "ok", "degenerate-gamma",
    "cap-degenerate" or "inconsistent"; value is set only for "ok".
    """
    r12, gamma, _ = _merge_chords(point["r1"], point["gamma1"], point["r2"], point["gamma2"])
    p_d = point["p_d"]
    sym = SymmetrizedRecord(
        r12=r12, gamma=gamma, h3n=point["h3"], h4n=point["h4"], p_c=1.0 - p_d, p_d=p_d
    )
    if abs(math.sin(gamma)) <= SIN_GAMMA_FLOOR:
        return "degenerate-gamma", None, sym
    if r12 <= 0.0:
        return "cap-degenerate", None, sym
    try:
        value, _, _ = criterion_value(sym, disk_slack=disk_slack)
    except InconsistentRecordError:
        return "inconsistent", None, sym
    return "ok", value, sym


def delta_prime(rec: GeometricRecord, oracle_grid_n: int = 2001) -> SteeringVerdict:
    """Minimize the criterion over the record's error box.

    Every field is scanned over {v - err, v, v + err} (clipped to its
    physical range) and the criterion is evaluated at every grid point.
    Degenerate points (merged cap covering the disk, or a chord parallel
    to the axis) force a not-steerable verdict. Points that place B
    outside the unit disk by more than the error box allows are skipped;
    if every point does so the record is rejected as inconsistent. A
    witness model is attached when the nominal value is non-positive and
    the feasibility oracle finds an ensemble.
    """
    errs = (rec.err_r1, rec.err_r2, rec.err_gamma1, rec.err_gamma2, rec.err_h3, rec.err_h4, rec.err_p)
    disk_slack = 1e-9 + 2.0 * sum(errs)
    axes = (
        _box_axis(rec.r1, rec.err_r1, -1.0, 1.0),
        _box_axis(rec.r2, rec.err_r2, -1.0, 1.0),
        _box_axis(rec.gamma1, rec.err_gamma1, 0.0, math.pi),
        _box_axis(rec.gamma2, rec.err_gamma2, 0.0, math.pi),
        _box_axis(rec.h3, rec.err_h3, -1.0, 1.0),
        _box_axis(rec.h4, rec.err_h4, -1.0, 1.0),
        _box_axis(rec.p_d, rec.err_p, 0.0, 1.0),
    )

    nominal_point = dict(zip(_BOX_FIELDS, (rec.r1, rec.r2, rec.gamma1, rec.gamma2, rec.h3, rec.h4, rec.p_d)))
    nominal_status, nominal_value, nominal_sym = _evaluate_point(nominal_point, disk_slack)

    values = []
    degenerate_reason = None
    for combo in itertools.product(*axes):
        status, value, _ = _evaluate_point(dict(zip(_BOX_FIELDS, combo)), disk_slack)
        if status == "ok":
            values.append(value)
        elif status in ("degenerate-gamma", "cap-degenerate") and degenerate_reason is None:
            degenerate_reason = status

    if degenerate_reason is not None:
        dp = min(values + [0.0])
        return SteeringVerdict(
            value=nominal_value if nominal_status == "ok" else math.nan,
            delta_prime=dp,
            steerable=False,
            witness=None,
            reason=degenerate_reason,
        )
    if not values:
        raise InconsistentRecordError(
            "record inconsistent with quantum state space over the whole error box"
        )
    dp = min(values)
    steerable = dp > 0.0
    witness = None
    if nominal_status == "ok" and nominal_value <= 0.0:
        witness = lhs_oracle(nominal_sym, grid_n=oracle_grid_n)
    return SteeringVerdict(
        value=nominal_value if nominal_status == "ok" else math.nan,
        delta_prime=dp,
        steerable=steerable,
        witness=witness,
        reason="steerable" if steerable else "criterion-nonpositive",
    )


def sample_symmetrized_record(rng: np.random.Generator) -> SymmetrizedRecord:
    """Draw a random symmetrized record whose B point lies inside the disk."""
    while True:
        r12 = float(rng.uniform(0.05, 1.0))
        gamma = float(rng.uniform(0.15, math.pi - 0.15))
        h3n = float(rng.uniform(-0.999, 0.999))
        h4n = float(rng.uniform(-0.999, 0.999))
        p_d = float(rng.uniform(0.05, 0.95))
        sym = SymmetrizedRecord(r12=r12, gamma=gamma, h3n=h3n, h4n=h4n, p_c=1.0 - p_d, p_d=p_d)
        try:
            _, b_point, _ = criterion_value(sym)
        except InconsistentRecordError:
            continue
        if math.hypot(*b_point) <= 1.0 - 1e-9:
            return sym
