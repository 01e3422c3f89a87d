"""Monte-Carlo photon counting for the steering game.

Counts are multinomial draws from the exact outcome probabilities, and
probability estimates carry Poisson-style error bars (sigma = sqrt(k)/N
for a count k out of N). Randomness is fully seeded: every setting draws
from its own substream derived from (seed, setting index), so runs are
reproducible and settings can be sampled in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .criterion import GeometricRecord, build_geometric_record
from .game import GameSettings, GameTranscript, play_game
from .quantum import TwoQubitState, conditional_state

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class CountRecord:
    """Raw counts for one measurement setting."""

    setting_label: str
    counts: dict[str, int]
    total: int

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts must sum to total")


@dataclass(frozen=True)
class EstimatedProbability:
    value: float
    sigma: float


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator for substream `index` of the master seed (mix via SeedSequence)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def simulate_counts(
    probabilities: Mapping[str, float] | Sequence[float],
    n_total: int,
    seed: int,
    setting_label: str = "",
) -> CountRecord:
    """Multinomial draw of n_total counts from the given outcome probabilities.

    Deterministic for fixed (probabilities, n_total, seed). Sequences get
    outcome labels "0", "1", ...
    """
    if isinstance(probabilities, Mapping):
        labels = list(probabilities.keys())
        probs = np.array([probabilities[k] for k in labels], dtype=float)
    else:
        probs = np.asarray(probabilities, dtype=float)
        labels = [str(i) for i in range(probs.size)]
    if n_total < 1:
        raise ValueError("n_total must be at least 1")
    if probs.min() < -1e-12 or abs(probs.sum() - 1.0) > PROB_SUM_TOL:
        raise ValueError("probabilities must be non-negative and sum to 1")
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    draw = rng.multinomial(int(n_total), probs)
    return CountRecord(
        setting_label=setting_label,
        counts={label: int(k) for label, k in zip(labels, draw)},
        total=int(n_total),
    )


def estimate(rec: CountRecord, zero_floor: bool = False) -> dict[str, EstimatedProbability]:
    """Per-outcome probability estimates k/N with Poisson sigma sqrt(k)/N.

    A zero count gets sigma 0; with zero_floor=True it gets the one
    pseudo-count floor sqrt(1)/N instead.
    """
    if rec.total < 1:
        raise ValueError("cannot estimate from an empty record")
    out = {}
    for label, k in rec.counts.items():
        keff = 1 if (zero_floor and k == 0) else k
        out[label] = EstimatedProbability(value=k / rec.total, sigma=np.sqrt(keff) / rec.total)
    return out


def branch_sigma(k_success: int, k_fail: int) -> float:
    """Poisson error bar shared by a two-outcome conditional probability pair.

    The pair (k, N-k) estimates complementary probabilities whose
    uncertainties coincide; the Poisson fluctuation of the pair is set by
    the dominant count, giving sigma = sqrt(max(k, N-k)) / N. Unlike the
    raw per-outcome estimator this never collapses to zero on perfect
    data, which keeps finite-sample error bars honest.
    """
    total = k_success + k_fail
    if total < 1:
        raise ValueError("empty branch")
    return float(np.sqrt(max(k_success, k_fail)) / total)


def noisy_game(
    rho: TwoQubitState,
    settings: GameSettings,
    n_per_setting: int | None,
    seed: int,
    gamma_err: float = 0.0,
) -> tuple[GameTranscript, GeometricRecord]:
    """Run the game with finite counting statistics.

    Two settings are sampled with n_per_setting counts each: the
    verification setting (Alice outcome x detector D1/D2) and the joint
    check at the optimal analysis angle (Alice outcome x Bob success/fail).
    The returned transcript holds the estimated probabilities and the
    record carries error bars from the Poisson sigmas. The chord angles
    are set by the wave plates, not measured, so their uncertainty
    defaults to zero; pass gamma_err to model imperfect settings.
    n_per_setting=None is the exact shortcut: no sampling, zero error bars.
    """
    if gamma_err < 0.0:
        raise ValueError("gamma_err must be non-negative")
    exact = play_game(rho, settings)
    if exact.failure_reason is not None:
        raise ValueError(f"game failed before sampling ({exact.failure_reason})")
    record_exact = build_geometric_record(rho, exact, settings)
    if gamma_err > 0.0:
        record_exact = replace(record_exact, err_gamma1=gamma_err, err_gamma2=gamma_err)
    if n_per_setting is None:
        return exact, record_exact
    if n_per_setting < 4:
        raise ValueError("n_per_setting too small to populate both branches")

    # Verification setting: joint distribution over (Alice outcome, D1/D2).
    p_up, _ = conditional_state(rho, settings.ncs_direction, +1)
    p_dn = 1.0 - p_up
    probs_ncs = {
        "+D1": p_up * exact.p_plus,
        "+D2": p_up * exact.p_plus_err,
        "-D1": p_dn * exact.p_minus,
        "-D2": p_dn * exact.p_minus_err,
    }
    ncs_counts = simulate_counts(probs_ncs, n_per_setting, seed=_mix(seed, 0), setting_label="ncs")
    k = ncs_counts.counts
    n_up, n_dn = k["+D1"] + k["+D2"], k["-D1"] + k["-D2"]
    if min(n_up, n_dn) < 1:
        raise ValueError("a verification branch received no counts")
    p_plus_hat = k["+D1"] / n_up
    p_minus_hat = k["-D1"] / n_dn
    sigma_plus = branch_sigma(k["+D1"], k["+D2"])
    sigma_minus = branch_sigma(k["-D1"], k["-D2"])

    # Joint check at the optimal axis: (Alice outcome, Bob success/fail).
    p_d_exact = exact.p_d
    probs_check = {
        "winB1": exact.w_max,
        "winB0": p_d_exact - exact.w_max,
        "loseB1": exact.w_other,
        "loseB0": (1.0 - p_d_exact) - exact.w_other,
    }
    check_counts = simulate_counts(
        probs_check, n_per_setting, seed=_mix(seed, 1), setting_label="check"
    )
    m = check_counts.counts
    n_d, n_c = m["winB1"] + m["winB0"], m["loseB1"] + m["loseB0"]
    if min(n_d, n_c) < 1:
        raise ValueError("a check branch received no counts")
    w_max_hat = m["winB1"] / n_per_setting
    w_other_hat = m["loseB1"] / n_per_setting
    p_d_hat = n_d / n_per_setting
    h3_hat = 2.0 * m["winB1"] / n_d - 1.0
    h4_hat = 2.0 * m["loseB1"] / n_c - 1.0

    transcript = replace(
        exact,
        p_plus=p_plus_hat,
        p_plus_err=1.0 - p_plus_hat,
        p_minus=p_minus_hat,
        p_minus_err=1.0 - p_minus_hat,
        w_max=w_max_hat,
        w_other=w_other_hat,
        p_d=p_d_hat,
        delta=w_max_hat - exact.c_lhs,
    )
    record = replace(
        record_exact,
        r1=1.0 - 2.0 * (1.0 - p_plus_hat),
        r2=1.0 - 2.0 * (1.0 - p_minus_hat),
        h3=h3_hat,
        h4=h4_hat,
        p_c=1.0 - p_d_hat,
        p_d=p_d_hat,
        err_r1=2.0 * sigma_plus,
        err_r2=2.0 * sigma_minus,
        err_h3=2.0 * branch_sigma(m["winB1"], m["winB0"]),
        err_h4=2.0 * branch_sigma(m["loseB1"], m["loseB0"]),
        err_p=float(np.sqrt(max(n_d, n_c)) / n_per_setting),
    )
    return transcript, record


def _mix(seed: int, setting_index: int) -> int:
    """Derive a 63-bit substream seed for one setting from the master seed."""
    ss = np.random.SeedSequence([int(seed), int(setting_index)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
