"""
Dense complex linear-algebra foundation for the NESS library.

Provides the validated matrix types (Hermitian, positive semi-definite),
spectral decomposition with degeneracy merging, and the damped-generator
fixed-point solver every other module calls:

    (P + iH) X + X (P - iH) = 2 S

which is the stationarity condition of the covariance dynamics. Its unique
solution for P > 0 is X = 2 * int_0^inf exp(-(P+iH)s) S exp(-(P-iH)s) ds.

Construction of ``HermitianMatrix`` / ``PsdMatrix`` directly is the
unchecked path used for solver outputs; ``validate_hermitian`` and
``validate_psd`` are the checked entry points for anything user supplied.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from ness_config import DEFAULT_TOLERANCES, ToleranceConfig
from ness_errors import (
    NessError,
    NotHermitianError,
    NotPsdError,
    NotSquareError,
    SingularGeneratorError,
    SolverResidualError,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[Sequence[complex]]]

# The dense vectorized reference path builds an m^2 x m^2 system.
KRON_MAX_DIM = 8
MAX_REFINEMENT_STEPS = 2


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Immutable Hermitian m x m matrix."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def scaled(self, factor: float) -> "HermitianMatrix":
        return type(self)(factor * self.entries)


@dataclass(frozen=True, eq=False)
class PsdMatrix(HermitianMatrix):
    """Immutable positive semi-definite matrix (a rate matrix such as A, D or P)."""


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """H = sum_k E_k R_k with eigenvalue clusters merged into one eigenspace."""

    eigenvalues: Tuple[float, ...]
    projectors: Tuple[np.ndarray, ...]
    multiplicities: Tuple[int, ...]
    bases: Tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return sum(self.multiplicities)

    def reconstruct(self) -> np.ndarray:
        return sum(e * r for e, r in zip(self.eigenvalues, self.projectors))


def hermitize(arr: np.ndarray) -> np.ndarray:
    return 0.5 * (arr + arr.conj().T)


def frobenius(arr: np.ndarray) -> float:
    return float(np.linalg.norm(arr, "fro"))


def _as_square(raw: ArrayLike, name: str) -> np.ndarray:
    arr = np.array(raw, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NotSquareError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise NotSquareError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise NessError(f"{name} contains non-finite entries", reason="non_finite")
    return arr


def validate_hermitian(raw: ArrayLike, name: str = "matrix",
                       tol: ToleranceConfig = DEFAULT_TOLERANCES) -> HermitianMatrix:
    """Check Hermiticity relative to the largest entry and symmetrize away drift.

    Raises NotSquareError or NotHermitianError.
    """
    arr = _as_square(raw, name)
    scale = float(np.max(np.abs(arr)))
    asymmetry = float(np.max(np.abs(arr - arr.conj().T)))
    if scale > 0 and asymmetry > tol.hermitian_rtol * scale:
        raise NotHermitianError(
            f"{name} is not Hermitian (relative asymmetry {asymmetry / scale:.3e})"
        )
    return HermitianMatrix(hermitize(arr))


def validate_psd(raw: ArrayLike, name: str = "matrix",
                 tol: ToleranceConfig = DEFAULT_TOLERANCES) -> PsdMatrix:
    """Validate a PSD matrix, clipping eigenvalues in [-psd_rtol*scale, 0) to zero."""
    herm = validate_hermitian(raw, name, tol)
    w, v = np.linalg.eigh(herm.entries)
    scale = max(1.0, float(w[-1]))
    if w[0] < -tol.psd_rtol * scale:
        raise NotPsdError(
            f"{name} is not positive semi-definite (smallest eigenvalue {w[0]:.3e})"
        )
    if w[0] < 0:
        entries = hermitize((v * np.clip(w, 0.0, None)) @ v.conj().T)
        return PsdMatrix(entries)
    return PsdMatrix(herm.entries)


def spectral_decompose(H: HermitianMatrix, degeneracy_tol: Optional[float] = None,
                       tol: ToleranceConfig = DEFAULT_TOLERANCES) -> SpectralDecomposition:
    """Eigen-decompose H, merging eigenvalues closer than ``degeneracy_tol``.

    The default tolerance is degeneracy_rtol times the spectral range (or
    times max(1, |E|) for a fully degenerate spectrum).
    """
    w, v = np.linalg.eigh(H.entries)
    if degeneracy_tol is None:
        span = float(w[-1] - w[0])
        reference = span if span > 0 else max(1.0, float(np.max(np.abs(w))))
        degeneracy_tol = tol.degeneracy_rtol * reference
    if degeneracy_tol <= 0:
        raise ValueError(f"degeneracy_tol must be positive, got {degeneracy_tol}")

    groups: List[List[int]] = [[0]]
    for i in range(1, len(w)):
        # chained merge: consecutive gaps within tolerance share an eigenspace
        if w[i] - w[i - 1] <= degeneracy_tol:
            groups[-1].append(i)
        else:
            groups.append([i])

    eigenvalues, projectors, multiplicities, bases = [], [], [], []
    for group in groups:
        basis = v[:, group]
        basis.setflags(write=False)
        projector = basis @ basis.conj().T
        projector.setflags(write=False)
        eigenvalues.append(float(np.mean(w[group])))
        projectors.append(projector)
        multiplicities.append(len(group))
        bases.append(basis)

    return SpectralDecomposition(
        eigenvalues=tuple(eigenvalues),
        projectors=tuple(projectors),
        multiplicities=tuple(multiplicities),
        bases=tuple(bases),
    )


def check_strictly_positive(P: HermitianMatrix, name: str = "P",
                            tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """Return lambda_min(P), raising SingularGeneratorError when it is not strictly positive."""
    w = np.linalg.eigvalsh(P.entries)
    scale = max(1.0, float(w[-1]))
    if w[0] <= tol.positivity_rtol * scale:
        raise SingularGeneratorError(
            f"{name} is not strictly positive (lambda_min = {w[0]:.3e}); "
            "the damped generator integral may diverge"
        )
    return float(w[0])


def _sylvester_residual(G: np.ndarray, X: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return rhs - (G @ X + X @ G.conj().T)


def _solve_kron(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    m = G.shape[0]
    if m > KRON_MAX_DIM:
        raise ValueError(f"kron reference path is limited to m <= {KRON_MAX_DIM}, got {m}")
    eye = np.eye(m)
    # column-major vec: vec(G X) = (I (x) G) vec X, vec(X G^H) = (conj(G) (x) I) vec X
    K = np.kron(eye, G) + np.kron(G.conj(), eye)
    x = np.linalg.solve(K, rhs.reshape(-1, order="F"))
    return x.reshape((m, m), order="F")


def _solve_schur(P: np.ndarray, H: np.ndarray, rhs: np.ndarray, threshold: float) -> np.ndarray:
    # Rotate to the eigenbasis of H so the large coherent part is diagonal.
    energies, V = np.linalg.eigh(H)
    Vh = V.conj().T
    G_rot = Vh @ P @ V + 1j * np.diag(energies)
    rhs_rot = Vh @ rhs @ V

    X = solve_continuous_lyapunov(G_rot, rhs_rot)
    for step in range(MAX_REFINEMENT_STEPS):
        R = _sylvester_residual(G_rot, X, rhs_rot)
        if frobenius(R) <= threshold:
            break
        logger.debug(f"Refinement step {step + 1}: residual {frobenius(R):.3e}")
        X = X + solve_continuous_lyapunov(G_rot, R)
    return V @ X @ Vh


def solve_damped_fixed_point(P: HermitianMatrix, H: HermitianMatrix, S: HermitianMatrix,
                             method: str = "schur",
                             tol: ToleranceConfig = DEFAULT_TOLERANCES) -> HermitianMatrix:
    """Solve (P + iH) X + X (P - iH) = 2 S for Hermitian X.

    Args:
        P: strictly positive damping matrix
        H: Hermitian coherent part
        S: Hermitian source term (A for the NESS covariance)
        method: "schur" (Bartels-Stewart in H's eigenbasis with iterative
            refinement) or "kron" (dense vectorized reference, m <= 8)

    Raises:
        SingularGeneratorError: P is not strictly positive
        SolverResidualError: the accepted residual could not be reached
    """
    m = P.dim
    if H.dim != m or S.dim != m:
        raise NotSquareError(f"Dimension mismatch: P is {m}, H is {H.dim}, S is {S.dim}")
    check_strictly_positive(P, tol=tol)

    G = P.entries + 1j * H.entries
    rhs = 2.0 * S.entries
    rhs_norm = frobenius(rhs)
    eps = np.finfo(float).eps

    if method == "kron":
        X = _solve_kron(G, rhs)
    elif method == "schur":
        X = _solve_schur(P.entries, H.entries, rhs, tol.residual_rtol * rhs_norm)
    else:
        raise ValueError(f"Unknown solver method: {method}")

    X = hermitize(X)
    residual = frobenius(_sylvester_residual(G, X, rhs))
    strict = tol.residual_rtol * rhs_norm
    # second term: floating-point floor of forming G X for large ||lambda H||
    threshold = strict + 64 * eps * frobenius(G) * frobenius(X)
    logger.debug(f"Damped fixed point ({method}, m={m}): residual {residual:.3e}, threshold {threshold:.3e}")
    if residual > threshold:
        raise SolverResidualError(
            f"Fixed-point residual {residual:.3e} exceeds accepted threshold {threshold:.3e}"
        )
    if residual > strict:
        logger.warning(
            f"Fixed-point residual {residual:.3e} above {strict:.3e}, accepted on the "
            f"floating-point floor (||G|| = {frobenius(G):.3e})"
        )
    return HermitianMatrix(X)


def channel_matrix(rates: Sequence[float], vectors: ArrayLike, name: str = "channels",
                   tol: ToleranceConfig = DEFAULT_TOLERANCES) -> PsdMatrix:
    """Build sum_j (rate_j / 2) |v_j><v_j| from channel rates and row vectors."""
    rates = np.asarray(rates, dtype=float).reshape(-1)
    W = np.array(vectors, dtype=complex)
    if W.ndim == 1:
        W = W.reshape(1, -1)
    if W.shape[0] != rates.shape[0]:
        raise NotSquareError(
            f"{name}: {rates.shape[0]} rates but {W.shape[0]} channel vectors"
        )
    if np.any(rates < 0):
        raise NotPsdError(f"{name}: channel rates must be non-negative, got {rates.tolist()}")
    M = W.T @ ((0.5 * rates)[:, None] * W.conj())
    return validate_psd(M, name, tol)


def expectation(B: ArrayLike, Q: HermitianMatrix) -> complex:
    """One-particle expectation value tr(B Q)."""
    return complex(np.trace(np.asarray(B, dtype=complex) @ Q.entries))
