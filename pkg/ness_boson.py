"""
Bosonic non-equilibrium steady states.

For bosons the pump enters the damping with the opposite sign, P = D - A,
so a steady state exists only when D - A is strictly positive. The current
J = 2 tr(D Q_NESS) has no upper bound but is bounded from below by
J_min = 2 tr(A) tr(D) / tr(D - A).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from linalg_core import HermitianMatrix, PsdMatrix, expectation, solve_damped_fixed_point
from ness_config import DEFAULT_TOLERANCES, ToleranceConfig
from ness_errors import (
    DegenerateChannelsError,
    NotSquareError,
    NumericallyMarginalError,
    UnstableError,
)
from ness_fermion import (
    CovarianceMatrix,
    Statistics,
    SystemSpec,
    require_statistics,
    bound_ratio,
    check_covariance_window,
    particle_number,
    propagate,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BosonStabilityReport:
    stable: bool
    lambda_min_of_D_minus_A: float


@dataclass(frozen=True, eq=False)
class BosonNessReport:
    Q_ness: CovarianceMatrix
    J: float
    J_min: float
    ratio: float
    balance_residual: float
    continuity_residual: float
    particle_number: float
    lambda_min_of_D_minus_A: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "statistics": Statistics.BOSON.value,
            "J": self.J,
            "J_min": self.J_min,
            "ratio": self.ratio,
            "balance_residual": self.balance_residual,
            "continuity_residual": self.continuity_residual,
            "particle_number": self.particle_number,
            "lambda_min_D_minus_A": self.lambda_min_of_D_minus_A,
            "Q_ness": self.Q_ness.entries,
        }


def _stability_threshold(A: PsdMatrix, D: PsdMatrix, tol: ToleranceConfig) -> float:
    scale = max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(D.entries)))),
                float(np.max(np.abs(np.linalg.eigvalsh(A.entries)))))
    return tol.stability_rtol * scale


def check_stability(A: PsdMatrix, D: PsdMatrix,
                    tol: ToleranceConfig = DEFAULT_TOLERANCES) -> BosonStabilityReport:
    """Report lambda_min(D - A) and whether it clears the strict-stability threshold."""
    if A.dim != D.dim:
        raise NotSquareError(f"A has dimension {A.dim}, D has {D.dim}")
    lam_min = float(np.linalg.eigvalsh(D.entries - A.entries)[0])
    return BosonStabilityReport(
        stable=lam_min > _stability_threshold(A, D, tol),
        lambda_min_of_D_minus_A=lam_min,
    )


def _require_stable(spec: SystemSpec, tol: ToleranceConfig) -> BosonStabilityReport:
    report = check_stability(spec.A, spec.D, tol)
    if report.stable:
        return report
    lam_min = report.lambda_min_of_D_minus_A
    if lam_min > 0:
        raise NumericallyMarginalError(
            f"D - A is only marginally positive (lambda_min = {lam_min:.3e}); refusing to solve"
        )
    raise UnstableError(
        f"D - A is not positive (lambda_min = {lam_min:.3e}); the system never reaches a steady state"
    )


def ness_covariance_boson(spec: SystemSpec,
                          tol: ToleranceConfig = DEFAULT_TOLERANCES) -> CovarianceMatrix:
    """Q_NESS from (D - A + iH) Q + Q (D - A - iH) = 2A."""
    require_statistics(spec, Statistics.BOSON)
    _require_stable(spec, tol)
    P = PsdMatrix(spec.P.entries)
    X = solve_damped_fixed_point(P, spec.H, spec.A, tol=tol)
    check_covariance_window(X.entries, Statistics.BOSON, tol)
    return CovarianceMatrix(X)


def evolve_covariance_boson(spec: SystemSpec, Q0: CovarianceMatrix, t: float,
                            tol: ToleranceConfig = DEFAULT_TOLERANCES) -> CovarianceMatrix:
    """Bosonic covariance at time t starting from Q0."""
    if t < 0:
        raise ValueError(f"Evolution time must be non-negative, got {t}")
    if Q0.dim != spec.m:
        raise NotSquareError(f"Q0 has dimension {Q0.dim}, system has {spec.m}")
    if t == 0:
        return Q0
    Q_inf = ness_covariance_boson(spec, tol)
    G = spec.P.entries + 1j * spec.H.entries
    Qt = propagate(G, Q0.entries, Q_inf.entries, t)
    check_covariance_window(Qt, Statistics.BOSON, tol)
    return CovarianceMatrix(HermitianMatrix(Qt))


def current_boson(spec: SystemSpec, Q: CovarianceMatrix) -> float:
    """J = 2 tr(D Q); at the NESS this equals 2 tr(A (1 + Q))."""
    return 2.0 * expectation(spec.D.entries, Q.Q).real


def current_lower_bound_boson(A: PsdMatrix, D: PsdMatrix) -> float:
    """J_min = 2 tr(A) tr(D) / tr(D - A)."""
    tr_a, tr_d = A.trace, D.trace
    if tr_d - tr_a <= 0:
        raise DegenerateChannelsError(
            f"tr(D - A) must be positive, got {tr_d - tr_a:.3e}"
        )
    return 2.0 * tr_a * tr_d / (tr_d - tr_a)


def current_lambda_boson(spec: SystemSpec, lam: float,
                         tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    scaled = spec.with_hamiltonian_scale(lam)
    return current_boson(scaled, ness_covariance_boson(scaled, tol))


def boson_balance_residual(spec: SystemSpec, Q: CovarianceMatrix) -> float:
    """|2 tr(A (1 + Q)) - 2 tr(D Q)|"""
    A, D, q = spec.A.entries, spec.D.entries, Q.entries
    inflow = 2.0 * (np.trace(A) + np.trace(A @ q))
    return float(abs((inflow - 2.0 * np.trace(D @ q)).real))


def continuity_residual(spec: SystemSpec, Q: CovarianceMatrix) -> float:
    """|2 tr(P Q) - 2 tr(A)| with the statistics-dependent P."""
    return float(abs(2.0 * np.trace(spec.P.entries @ Q.entries).real - 2.0 * spec.A.trace))


def ness_report_boson(spec: SystemSpec,
                      tol: ToleranceConfig = DEFAULT_TOLERANCES) -> BosonNessReport:
    stability = check_stability(spec.A, spec.D, tol)
    Q = ness_covariance_boson(spec, tol)
    J = current_boson(spec, Q)
    J_min = current_lower_bound_boson(spec.A, spec.D)
    balance = boson_balance_residual(spec, Q)
    if balance > tol.balance_rtol * max(1.0, J):
        logger.warning(f"Bosonic balance residual {balance:.3e} above tolerance for J = {J:.6g}")
    if J < J_min * (1.0 - tol.bound_rtol):
        logger.warning(f"Bosonic current {J:.12g} below the lower bound {J_min:.12g}")
    return BosonNessReport(
        Q_ness=Q,
        J=J,
        J_min=J_min,
        ratio=bound_ratio(J, J_min),
        balance_residual=balance,
        continuity_residual=continuity_residual(spec, Q),
        particle_number=particle_number(Q),
        lambda_min_of_D_minus_A=stability.lambda_min_of_D_minus_A,
    )
