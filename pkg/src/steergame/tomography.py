"""Single-qubit process tomography in the Pauli operator basis.

A channel is represented by its 4x4 process matrix chi over the basis
(I, X, Y, Z): E(rho) = sum_ij chi_ij E_i rho E_j. Probe data comes from
the six Pauli eigenstates measured along the three Pauli axes (18
configurations, 36 outcomes). Reconstruction starts from linear
inversion projected onto the positive cone and polishes with a
maximum-likelihood fit over a Cholesky-style parametrization, with
trace preservation enforced through a quadratic penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .counting import CountRecord, simulate_counts, _mix
from .quantum import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, QubitState, pure_qubit

CHI_HERM_TOL = 1e-9
CHI_TRACE_TOL = 1e-9
CHI_EIG_TOL = 1e-9
TP_PENALTY_WEIGHT = 1e4
MAX_ITERATIONS = 10_000
RELATIVE_LIKELIHOOD_TOL = 1e-10

OPERATOR_BASIS = np.stack([PAULI_I, PAULI_X, PAULI_Y, PAULI_Z])

INPUT_KETS = {
    "z+": np.array([1.0, 0.0], dtype=complex),
    "z-": np.array([0.0, 1.0], dtype=complex),
    "x+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "x-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
    "y+": np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0),
    "y-": np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2.0),
}
MEAS_AXES = ("x", "y", "z")
CONFIGURATIONS = tuple((inp, axis) for inp in INPUT_KETS for axis in MEAS_AXES)


@dataclass(frozen=True)
class ChiMatrix:
    """Process matrix over (I, X, Y, Z): Hermitian, unit trace, positive."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("chi must be 4x4")
        if np.max(np.abs(m - m.conj().T)) > CHI_HERM_TOL:
            raise ValueError("chi must be Hermitian")
        if abs(np.trace(m).real - 1.0) > CHI_TRACE_TOL:
            raise ValueError("chi must have unit trace")
        eigvals, eigvecs = np.linalg.eigh(m)
        if eigvals[0] < -CHI_EIG_TOL:
            raise ValueError(f"chi is not completely positive (min eigenvalue {eigvals[0]:.3e})")
        if eigvals[0] < 0.0:
            m = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.conj().T
            m = 0.5 * (m + m.conj().T)
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class TomoEntry:
    input_label: str
    axis: str
    frequencies: np.ndarray  # (p_plus, p_minus) along the axis
    total: int | None  # None marks exact probabilities


@dataclass(frozen=True)
class TomographyData:
    entries: tuple[TomoEntry, ...]

    def __post_init__(self) -> None:
        seen = {(e.input_label, e.axis) for e in self.entries}
        missing = set(CONFIGURATIONS) - seen
        if missing:
            raise ValueError(f"tomography data not informationally complete; missing {sorted(missing)}")


def identity_chi() -> ChiMatrix:
    return ChiMatrix(np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex))


def pauli_gate_chi(axis: str) -> ChiMatrix:
    index = {"x": 1, "y": 2, "z": 3}[axis]
    diag = np.zeros(4)
    diag[index] = 1.0
    return ChiMatrix(np.diag(diag).astype(complex))


def depolarizing_chi(p: float) -> ChiMatrix:
    """Depolarizing channel rho -> (1-p) rho + p I/2."""
    if not 0.0 <= p <= 4.0 / 3.0:
        raise ValueError("depolarizing strength out of range")
    return ChiMatrix(np.diag([1.0 - 3.0 * p / 4.0, p / 4.0, p / 4.0, p / 4.0]).astype(complex))


def apply_process(chi: ChiMatrix, rho: QubitState) -> QubitState:
    """E(rho) = sum_ij chi_ij E_i rho E_j for the Pauli operator basis."""
    out = np.einsum(
        "ij,iab,bc,jcd->ad", chi.matrix, OPERATOR_BASIS, rho.matrix, OPERATOR_BASIS
    )
    return QubitState(out)


def _axis_projectors(axis: str) -> tuple[np.ndarray, np.ndarray]:
    pauli = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}[axis]
    return 0.5 * (PAULI_I + pauli), 0.5 * (PAULI_I - pauli)


def _design_tensor() -> np.ndarray:
    """T[cfg, out, i, j] = tr(Pi_out E_i rho_cfg E_j), so p = Re sum_ij chi_ij T."""
    tensor = np.zeros((len(CONFIGURATIONS), 2, 4, 4), dtype=complex)
    for c, (inp, axis) in enumerate(CONFIGURATIONS):
        rho_in = pure_qubit(INPUT_KETS[inp]).matrix
        for o, proj in enumerate(_axis_projectors(axis)):
            for i in range(4):
                for j in range(4):
                    tensor[c, o, i, j] = np.trace(
                        proj @ OPERATOR_BASIS[i] @ rho_in @ OPERATOR_BASIS[j]
                    )
    return tensor


_DESIGN = _design_tensor()


def exact_probabilities(chi: ChiMatrix) -> np.ndarray:
    """Outcome probabilities (n_config, 2) for every probe configuration."""
    return np.einsum("coij,ij->co", _DESIGN, chi.matrix).real


def simulate_tomography(chi: ChiMatrix, n_per_config: int | None, seed: int) -> TomographyData:
    """Probe data for every configuration; n_per_config=None yields exact frequencies."""
    probs = exact_probabilities(chi)
    entries = []
    for c, (inp, axis) in enumerate(CONFIGURATIONS):
        p = np.clip(probs[c], 0.0, None)
        p = p / p.sum()
        if n_per_config is None:
            entries.append(TomoEntry(inp, axis, frequencies=p, total=None))
        else:
            rec = simulate_counts(
                {"+": p[0], "-": p[1]},
                n_per_config,
                seed=_mix(seed, c),
                setting_label=f"{inp}/{axis}",
            )
            freq = np.array([rec.counts["+"], rec.counts["-"]], dtype=float) / rec.total
            entries.append(TomoEntry(inp, axis, frequencies=freq, total=rec.total))
    return TomographyData(entries=tuple(entries))


@dataclass(frozen=True)
class ReconstructionResult:
    chi: ChiMatrix
    converged: bool
    iterations: int
    log_likelihood: float


_HERM_BASIS = []
for _i in range(4):
    _m = np.zeros((4, 4), dtype=complex)
    _m[_i, _i] = 1.0
    _HERM_BASIS.append(_m)
for _i in range(4):
    for _j in range(_i + 1, 4):
        _m = np.zeros((4, 4), dtype=complex)
        _m[_i, _j] = _m[_j, _i] = 1.0
        _HERM_BASIS.append(_m)
        _m = np.zeros((4, 4), dtype=complex)
        _m[_i, _j] = -1.0j
        _m[_j, _i] = 1.0j
        _HERM_BASIS.append(_m)
_HERM_BASIS = np.stack(_HERM_BASIS)


def _linear_inversion(freqs: np.ndarray) -> np.ndarray:
    """Least-squares chi from frequencies, without positivity."""
    design = np.einsum("coij,bij->cob", _DESIGN, _HERM_BASIS).real.reshape(-1, 16)
    coeff, *_ = np.linalg.lstsq(design, freqs.reshape(-1), rcond=None)
    chi = np.einsum("b,bij->ij", coeff, _HERM_BASIS)
    return 0.5 * (chi + chi.conj().T)


def _project_to_state_cone(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    eigvals = np.clip(eigvals, 0.0, None)
    if eigvals.sum() <= 0.0:
        return np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    eigvals = eigvals / eigvals.sum()
    return (eigvecs * eigvals) @ eigvecs.conj().T


def _tp_violation(chi: np.ndarray) -> float:
    """Frobenius norm of sum_ij chi_ij E_j E_i - I (zero for trace-preserving chi)."""
    s = np.einsum("ij,jab,ibc->ac", chi, OPERATOR_BASIS, OPERATOR_BASIS)
    return float(np.linalg.norm(s - PAULI_I))


_TRIL_ROWS, _TRIL_COLS = np.tril_indices(4)
_DIAG_MASK = _TRIL_ROWS == _TRIL_COLS


def _params_to_chi(params: np.ndarray) -> np.ndarray:
    imag = np.zeros(10)
    imag[~_DIAG_MASK] = params[10:]
    t = np.zeros((4, 4), dtype=complex)
    t[_TRIL_ROWS, _TRIL_COLS] = params[:10] + 1.0j * imag
    chi = t @ t.conj().T
    trace = np.trace(chi).real
    if trace <= 0.0:
        return np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    return chi / trace


def _chi_to_params(chi: np.ndarray) -> np.ndarray:
    jitter = 1e-10 * np.eye(4)
    t = np.linalg.cholesky(chi + jitter)
    tril = t[_TRIL_ROWS, _TRIL_COLS]
    params = np.zeros(16)
    params[:10] = tril.real
    params[10:] = tril.imag[~_DIAG_MASK]
    return params


def reconstruct_chi(
    data: TomographyData,
    penalty_weight: float = TP_PENALTY_WEIGHT,
    max_iterations: int = MAX_ITERATIONS,
) -> ReconstructionResult:
    """Maximum-likelihood process matrix from probe data.

    The multinomial log-likelihood is maximized over chi = T T^dag / tr
    with T lower triangular (16 real parameters), plus a quadratic
    penalty on trace-preservation violation. The optimizer starts from
    the linear-inversion estimate projected onto the positive cone and
    stops when the relative likelihood change drops below 1e-10 or after
    max_iterations; the result carries a convergence flag.
    """
    freqs = np.stack([e.frequencies for e in data.entries])
    weights = np.array([1.0 if e.total is None else float(e.total) for e in data.entries])
    order = [CONFIGURATIONS.index((e.input_label, e.axis)) for e in data.entries]
    design = _DESIGN[order]

    def negative_objective(params: np.ndarray) -> float:
        chi = _params_to_chi(params)
        probs = np.clip(np.einsum("coij,ij->co", design, chi).real, 1e-12, None)
        loglik = float(np.sum(weights[:, None] * freqs * np.log(probs)))
        return -loglik + penalty_weight * _tp_violation(chi) ** 2

    start_chi = _project_to_state_cone(_linear_inversion(freqs))
    start = _chi_to_params(start_chi)
    result = optimize.minimize(
        negative_objective,
        start,
        method="L-BFGS-B",
        options={"maxiter": max_iterations, "ftol": RELATIVE_LIKELIHOOD_TOL, "maxfun": 10 * max_iterations},
    )
    chi = _project_to_state_cone(_params_to_chi(result.x))
    return ReconstructionResult(
        chi=ChiMatrix(chi),
        converged=bool(result.success),
        iterations=int(result.nit),
        log_likelihood=-float(result.fun),
    )


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.conj().T


def process_fidelity(chi: ChiMatrix, chi_ideal: ChiMatrix) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(chi) chi_ideal sqrt(chi)))^2 between process matrices."""
    root = _psd_sqrt(chi.matrix)
    inner = _psd_sqrt(root @ chi_ideal.matrix @ root)
    fidelity = float(np.trace(inner).real) ** 2
    return min(max(fidelity, 0.0), 1.0)


def random_cp_chi(rng: np.random.Generator, kraus_rank: int = 4) -> ChiMatrix:
    """Random completely positive trace-preserving process matrix.

    Draws Ginibre Kraus operators, normalizes them to a valid channel,
    and expands in the Pauli basis.
    """
    kraus = rng.standard_normal((kraus_rank, 2, 2)) + 1.0j * rng.standard_normal((kraus_rank, 2, 2))
    gram = np.einsum("kba,kbc->ac", kraus.conj(), kraus)
    eigvals, eigvecs = np.linalg.eigh(gram)
    inv_root = (eigvecs / np.sqrt(eigvals)) @ eigvecs.conj().T
    kraus = np.einsum("kab,bc->kac", kraus, inv_root)
    coeffs = np.einsum("iab,kba->ki", OPERATOR_BASIS, kraus) / 2.0
    chi = np.einsum("ki,kj->ij", coeffs, coeffs.conj())
    return ChiMatrix(chi)
