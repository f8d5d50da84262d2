"""
The strong-Hamiltonian limit lambda -> infinity.

When H dominates, coherences between different eigenspaces of H dephase and
the steady state becomes block diagonal in H's eigenbasis. Within each
eigenspace (basis B_k) only the compressed rates survive:

    P_k = B_k^H P B_k,  A_k = B_k^H A B_k,  D_k = B_k^H D B_k,
    P_k X_k + X_k P_k = 2 A_k,
    J_inf = sum_k 2 tr(D_k X_k).

A symmetry U with [H, U] = 0 and D = U^H A U forces a_k = d_k on every
non-degenerate level, so every block sits at half filling and J_inf = tr A,
the largest current the fermionic bound allows.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import schur

from linalg_core import (
    HermitianMatrix,
    PsdMatrix,
    frobenius,
    hermitize,
    solve_damped_fixed_point,
    spectral_decompose,
)
from ness_config import DEFAULT_TOLERANCES, ToleranceConfig
from ness_errors import DegenerateSpectrumError, NotSquareError, NotUnitaryError
from ness_fermion import (
    CovarianceMatrix,
    Statistics,
    SystemSpec,
    bound_ratio,
    current_bound_fermion,
    require_statistics,
)

logger = logging.getLogger(__name__)

SATURATION_RTOL = 1e-8


@dataclass(frozen=True)
class DesignSaturationReport:
    J_inf: float
    J_max: float
    commutator_norm: float
    ratio: float
    saturated: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "J_inf": self.J_inf,
            "J_max": self.J_max,
            "commutator_norm": self.commutator_norm,
            "ratio": self.ratio,
            "saturated": self.saturated,
        }


def _block_solutions(spec: SystemSpec, degeneracy_tol: Optional[float],
                     tol: ToleranceConfig) -> List[Tuple[np.ndarray, HermitianMatrix]]:
    require_statistics(spec, Statistics.FERMION)
    decomposition = spectral_decompose(spec.H, degeneracy_tol, tol)
    P = spec.P.entries
    A = spec.A.entries
    blocks = []
    for B in decomposition.bases:
        Bh = B.conj().T
        k = B.shape[1]
        P_k = PsdMatrix(hermitize(Bh @ P @ B))
        A_k = HermitianMatrix(hermitize(Bh @ A @ B))
        # H restricted to one eigenspace is a multiple of the identity and drops out
        X_k = solve_damped_fixed_point(P_k, HermitianMatrix(np.zeros((k, k))), A_k, tol=tol)
        blocks.append((B, X_k))
    logger.debug(f"Strong-H limit: {len(blocks)} eigenspaces for m={spec.m}")
    return blocks


def covariance_infinite_lambda(spec: SystemSpec, degeneracy_tol: Optional[float] = None,
                               tol: ToleranceConfig = DEFAULT_TOLERANCES) -> CovarianceMatrix:
    """Block-diagonal steady state sum_k B_k X_k B_k^H reached as lambda -> infinity."""
    Q = np.zeros((spec.m, spec.m), dtype=complex)
    for B, X_k in _block_solutions(spec, degeneracy_tol, tol):
        Q += B @ X_k.entries @ B.conj().T
    return CovarianceMatrix(HermitianMatrix(hermitize(Q)))


def current_infinite_lambda(spec: SystemSpec, degeneracy_tol: Optional[float] = None,
                            tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """J_inf = sum_k 2 tr(D_k X_k) over the eigenspaces of H."""
    D = spec.D.entries
    total = 0.0
    for B, X_k in _block_solutions(spec, degeneracy_tol, tol):
        D_k = B.conj().T @ D @ B
        total += 2.0 * float(np.trace(D_k @ X_k.entries).real)
    return total


def check_unitary(U: np.ndarray, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise NotSquareError(f"U must be a square matrix, got shape {U.shape}")
    defect = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    if defect > tol.unitarity_atol:
        raise NotUnitaryError(f"U is not unitary (max |U^H U - 1| = {defect:.3e})")
    return U


def check_distinct_energies(energies: Sequence[float], degeneracy_tol: Optional[float] = None,
                            tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """Return the energies as an array, raising DegenerateSpectrumError on a collision."""
    E = np.asarray(energies, dtype=float).reshape(-1)
    if E.size < 2:
        return E
    gaps = np.diff(np.sort(E))
    if degeneracy_tol is None:
        span = float(E.max() - E.min())
        degeneracy_tol = tol.degeneracy_rtol * (span if span > 0 else 1.0)
    if float(gaps.min()) <= degeneracy_tol:
        raise DegenerateSpectrumError(
            f"Energies collide within {degeneracy_tol:.3e} (smallest gap {gaps.min():.3e})"
        )
    return E


def unitary_eigenbasis(U: np.ndarray) -> np.ndarray:
    """Orthonormal eigenvectors of a unitary, from its complex Schur form."""
    _, Z = schur(U, output="complex")
    return Z


def designed_spec(U: np.ndarray, A: PsdMatrix, energies: Sequence[float]) -> SystemSpec:
    """H diagonal in U's eigenbasis with the given energies, D = U^H A U."""
    Z = unitary_eigenbasis(U)
    E = np.asarray(energies, dtype=float)
    if E.shape[0] != U.shape[0] or A.dim != U.shape[0]:
        raise NotSquareError(
            f"U is {U.shape[0]}-dimensional, A is {A.dim}, got {E.shape[0]} energies"
        )
    H = hermitize((Z * E) @ Z.conj().T)
    D = hermitize(U.conj().T @ A.entries @ U)
    return SystemSpec(H=HermitianMatrix(H), A=A, D=PsdMatrix(D))


def verify_design_saturation(U: np.ndarray, A: PsdMatrix, energies: Sequence[float],
                             degeneracy_tol: Optional[float] = None,
                             tol: ToleranceConfig = DEFAULT_TOLERANCES) -> DesignSaturationReport:
    """Build the symmetric design from (U, A, energies) and compare J_inf with J_max.

    Raises NotUnitaryError or DegenerateSpectrumError when the design
    hypotheses fail. A ratio away from one is reported, not raised.
    """
    U = check_unitary(U, tol)
    check_distinct_energies(energies, degeneracy_tol, tol)
    spec = designed_spec(U, A, energies)
    commutator = frobenius(spec.H.entries @ U - U @ spec.H.entries)
    J_inf = current_infinite_lambda(spec, degeneracy_tol, tol)
    J_max = current_bound_fermion(spec.A, spec.D)
    ratio = bound_ratio(J_inf, J_max)
    saturated = abs(ratio - 1.0) <= SATURATION_RTOL
    if not saturated:
        logger.warning(f"Designed system does not saturate: J_inf/J_max = {ratio:.12g}")
    return DesignSaturationReport(
        J_inf=J_inf,
        J_max=J_max,
        commutator_norm=commutator,
        ratio=ratio,
        saturated=saturated,
    )
