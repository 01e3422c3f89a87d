"""Simulator for a two-setting EPR steering game with a noise-robust verdict.

The package decides steerability of two-qubit states along two routes:
the ideal gap delta = <W>_max - C_LHS from exact quantum probabilities,
and the geometric criterion delta_prime that survives finite counting
statistics, cross-checked by a brute-force local-hidden-state oracle.
"""

from .counting import CountRecord, EstimatedProbability, estimate, noisy_game, simulate_counts
from .criterion import (
    GeometricRecord,
    LHSModel,
    SteeringVerdict,
    SymmetrizedRecord,
    build_geometric_record,
    criterion_value,
    delta_prime,
    lhs_oracle,
    symmetrize,
    symmetrize_lhs_model,
)
from .game import (
    GameSettings,
    GameTranscript,
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
from .quantum import (
    OutcomeNeverOccursError,
    QubitState,
    TwoQubitState,
    bloch_of,
    bloch_to_state,
    conditional_state,
    make_psi,
    make_rho1,
    make_rho2,
    partial_trace_A,
    partial_trace_B,
)
from .tomography import (
    ChiMatrix,
    TomographyData,
    apply_process,
    depolarizing_chi,
    identity_chi,
    process_fidelity,
    reconstruct_chi,
    simulate_tomography,
)

__version__ = "0.1.0"
