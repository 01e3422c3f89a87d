"""Exact linear algebra for one and two qubits.

Density matrices are complex numpy arrays wrapped in thin validated
containers. Two-qubit states use the basis order (HH, HV, VH, VV) with
H = |0> and V = |1>; the first tensor factor is Alice's qubit, the
second is Bob's. Every object is immutable after construction and every
operation is pure, so values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = 1e-10
DIRECTION_TOL = 1e-12
BLOCH_BALL_TOL = 1e-9
PROB_FLOOR = 1e-12

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)

KET_H = np.array([1.0, 0.0], dtype=complex)
KET_V = np.array([0.0, 1.0], dtype=complex)

DIR_X = np.array([1.0, 0.0, 0.0])
DIR_Y = np.array([0.0, 1.0, 0.0])
DIR_Z = np.array([0.0, 0.0, 1.0])


class OutcomeNeverOccursError(ValueError):
    """A measurement branch has zero probability, so no conditional state exists."""


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(array)
    out.setflags(write=False)
    return out


def _validated_density(matrix: np.ndarray, dim: int) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; clamp rounding noise.

    Eigenvalues in [-EIG_TOL, 0) are treated as rounding noise and projected
    onto the PSD cone; anything below -EIG_TOL rejects the matrix.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > HERM_TOL:
        raise ValueError("matrix is not Hermitian within tolerance")
    if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
        raise ValueError("matrix does not have unit trace within tolerance")
    eigvals, eigvecs = np.linalg.eigh(m)
    if eigvals[0] < -EIG_TOL:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {eigvals[0]:.3e})")
    if eigvals[0] < 0.0:
        eigvals = np.clip(eigvals, 0.0, None)
        m = (eigvecs * eigvals) @ eigvecs.conj().T
        m = 0.5 * (m + m.conj().T)
    return _frozen(m)


@dataclass(frozen=True)
class QubitState:
    """A single-qubit density matrix (2x2, Hermitian, unit trace, PSD)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _validated_density(self.matrix, 2))

    @property
    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def is_pure(self, tol: float = 1e-9) -> bool:
        return self.purity >= 1.0 - tol


@dataclass(frozen=True)
class TwoQubitState:
    """A two-qubit density matrix in the (HH, HV, VH, VV) basis."""

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _validated_density(self.matrix, 4))


def pure_qubit(ket: np.ndarray) -> QubitState:
    """Projector onto a (not necessarily normalized) single-qubit ket."""
    k = np.asarray(ket, dtype=complex).reshape(2)
    norm = np.linalg.norm(k)
    if norm < 1e-15:
        raise ValueError("cannot normalize the zero ket")
    k = k / norm
    return QubitState(np.outer(k, k.conj()))


def axis_ket(theta_b: float, phi_b: float = 0.0) -> np.ndarray:
    """Bob's analysis ket cos(theta_b/2)|0> + sin(theta_b/2) e^{i phi_b} |1>."""
    return np.array(
        [np.cos(theta_b / 2.0), np.sin(theta_b / 2.0) * np.exp(1j * phi_b)], dtype=complex
    )


def as_direction(vector: np.ndarray) -> np.ndarray:
    """Validate a measurement direction: a real unit 3-vector."""
    v = np.asarray(vector, dtype=float).reshape(3)
    if abs(np.linalg.norm(v) - 1.0) > DIRECTION_TOL:
        raise ValueError("direction must be a unit 3-vector")
    return _frozen(v)


def direction_projector(direction: np.ndarray, outcome: int) -> np.ndarray:
    """Projector onto the +1/-1 eigenstate of n.sigma for unit vector n."""
    n = as_direction(direction)
    if outcome not in (+1, -1):
        raise ValueError("outcome must be +1 or -1")
    n_sigma = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    return 0.5 * (PAULI_I + outcome * n_sigma)


def _psi_ket(theta: float) -> np.ndarray:
    return np.array([np.cos(theta), 0.0, 0.0, np.sin(theta)], dtype=complex)


def _phi_ket(theta: float) -> np.ndarray:
    return np.array([0.0, np.sin(theta), np.cos(theta), 0.0], dtype=complex)


def make_psi(theta: float) -> TwoQubitState:
    """Projector onto cos(theta)|HH> + sin(theta)|VV>."""
    k = _psi_ket(theta)
    return TwoQubitState(np.outer(k, k.conj()), label=f"psi(theta={theta:.6g})")


def make_rho1(theta: float, eta: float) -> TwoQubitState:
    """Mixture eta * Psi(theta) + (1-eta) * Phi(theta).

    Psi(theta) = cos(theta)|HH> + sin(theta)|VV> and
    Phi(theta) = cos(theta)|VH> + sin(theta)|HV>.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    kp, kq = _psi_ket(theta), _phi_ket(theta)
    m = eta * np.outer(kp, kp.conj()) + (1.0 - eta) * np.outer(kq, kq.conj())
    return TwoQubitState(m, label=f"rho1(theta={theta:.6g}, eta={eta:.6g})")


def make_rho2(theta: float, eta: float) -> TwoQubitState:
    """Mixture eta * Psi(theta) + (1-eta)/2 * (|HH><HH| + |VV><VV|)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    kp = _psi_ket(theta)
    m = eta * np.outer(kp, kp.conj())
    m[0, 0] += (1.0 - eta) / 2.0
    m[3, 3] += (1.0 - eta) / 2.0
    return TwoQubitState(m, label=f"rho2(theta={theta:.6g}, eta={eta:.6g})")


def partial_trace_A(rho: TwoQubitState) -> QubitState:
    """Bob's reduced state, tracing out Alice's qubit."""
    r = rho.matrix.reshape(2, 2, 2, 2)
    return QubitState(np.einsum("abac->bc", r))


def partial_trace_B(rho: TwoQubitState) -> QubitState:
    """Alice's reduced state, tracing out Bob's qubit."""
    r = rho.matrix.reshape(2, 2, 2, 2)
    return QubitState(np.einsum("abcb->ac", r))


def unnormalized_conditional(rho: TwoQubitState, direction: np.ndarray, outcome: int) -> np.ndarray:
    """Tr_A[(Pi_a x 1) rho]: Bob's conditional state scaled by the outcome probability."""
    proj = direction_projector(direction, outcome)
    r = rho.matrix.reshape(2, 2, 2, 2)
    return np.einsum("ac,cbad->bd", proj, r)


def conditional_state(
    rho: TwoQubitState, direction: np.ndarray, outcome: int
) -> tuple[float, QubitState]:
    """Probability of Alice's outcome along `direction` and Bob's normalized conditional state."""
    tilde = unnormalized_conditional(rho, direction, outcome)
    p = float(np.trace(tilde).real)
    if p < PROB_FLOOR:
        raise OutcomeNeverOccursError(
            f"outcome never occurs: probability {p:.3e} below {PROB_FLOOR:.0e}"
        )
    return p, QubitState(tilde / p)


def bloch_of(state: QubitState) -> np.ndarray:
    """Bloch vector (x, y, z) of a qubit state."""
    m = state.matrix
    return np.array([float(np.trace(m @ p).real) for p in PAULIS])


def bloch_to_state(bloch: np.ndarray) -> QubitState:
    """Qubit state (1 + b.sigma)/2 for a Bloch vector inside the unit ball."""
    b = np.asarray(bloch, dtype=float).reshape(3)
    if np.linalg.norm(b) > 1.0 + BLOCH_BALL_TOL:
        raise ValueError("Bloch vector lies outside the unit ball")
    m = 0.5 * (PAULI_I + b[0] * PAULI_X + b[1] * PAULI_Y + b[2] * PAULI_Z)
    return QubitState(m)
