"""
Fermionic non-equilibrium steady states.

The covariance Q of a pumped, lossy system of non-interacting fermions
relaxes under

    dQ/dt = -(P + iH) Q - Q (P - iH) + 2A,    P = A + D,

to the NESS covariance Q_NESS = 2 int_0^inf e^{-(P+iH)s} A e^{-(P-iH)s} ds.
The outflowing particle current is J = 2 tr(D Q_NESS) and never exceeds
J_max = 2 tr(A) tr(D) / tr(A + D), whatever the Hamiltonian.

``SystemSpec`` and ``CovarianceMatrix`` defined here are shared with the
bosonic module.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Union

import numpy as np
from scipy.linalg import expm

from linalg_core import (
    ArrayLike,
    HermitianMatrix,
    PsdMatrix,
    expectation,
    hermitize,
    solve_damped_fixed_point,
    validate_hermitian,
    validate_psd,
)
from ness_config import DEFAULT_TOLERANCES, ToleranceConfig
from ness_errors import (
    DegenerateChannelsError,
    InvalidCovarianceError,
    NegativeCurrentError,
    NotSquareError,
    StatisticsMismatchError,
)

logger = logging.getLogger(__name__)


class Statistics(str, Enum):
    FERMION = "fermion"
    BOSON = "boson"


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Full input to a NESS computation: H, the absorption A and dissipation D rates."""

    H: HermitianMatrix
    A: PsdMatrix
    D: PsdMatrix
    statistics: Statistics = Statistics.FERMION

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics(self.statistics))
        dims = (self.H.dim, self.A.dim, self.D.dim)
        if len(set(dims)) != 1:
            raise NotSquareError(f"H, A and D must share one dimension, got {dims}")

    @property
    def m(self) -> int:
        return self.H.dim

    @property
    def P(self) -> HermitianMatrix:
        """Damping matrix: A + D for fermions, D - A for bosons."""
        if self.statistics is Statistics.FERMION:
            return HermitianMatrix(self.A.entries + self.D.entries)
        return HermitianMatrix(self.D.entries - self.A.entries)

    @classmethod
    def from_arrays(cls, H: ArrayLike, A: ArrayLike, D: ArrayLike,
                    statistics: Union[str, Statistics] = Statistics.FERMION,
                    tol: ToleranceConfig = DEFAULT_TOLERANCES) -> "SystemSpec":
        return cls(
            H=validate_hermitian(H, "H", tol),
            A=validate_psd(A, "A", tol),
            D=validate_psd(D, "D", tol),
            statistics=Statistics(statistics),
        )

    def with_hamiltonian_scale(self, lam: float) -> "SystemSpec":
        return replace(self, H=self.H.scaled(lam))

    def with_rate_scale(self, gamma: float) -> "SystemSpec":
        return replace(self, A=self.A.scaled(gamma), D=self.D.scaled(gamma))


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Single-particle covariance Q_ij = <c^dagger_j c_i>."""

    Q: HermitianMatrix

    @property
    def entries(self) -> np.ndarray:
        return self.Q.entries

    @property
    def dim(self) -> int:
        return self.Q.dim


@dataclass(frozen=True, eq=False)
class NessReport:
    Q_ness: CovarianceMatrix
    J: float
    J_bound: float
    ratio: float
    balance_residual: float
    particle_number: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "statistics": Statistics.FERMION.value,
            "J": self.J,
            "J_max": self.J_bound,
            "ratio": self.ratio,
            "balance_residual": self.balance_residual,
            "particle_number": self.particle_number,
            "Q_ness": self.Q_ness.entries,
        }


def require_statistics(spec: SystemSpec, statistics: Statistics) -> None:
    if spec.statistics is not statistics:
        raise StatisticsMismatchError(
            f"Expected a {statistics.value} system, got {spec.statistics.value}"
        )


def check_covariance_window(Q: np.ndarray, statistics: Statistics,
                            tol: ToleranceConfig = DEFAULT_TOLERANCES) -> None:
    """Raise InvalidCovarianceError when Q leaves the Pauli (or bosonic positivity) window."""
    w = np.linalg.eigvalsh(Q)
    if w[0] < -tol.pauli_atol:
        raise InvalidCovarianceError(
            f"Covariance has eigenvalue {w[0]:.3e} below zero", reason="positivity_violation"
        )
    if statistics is Statistics.FERMION and w[-1] > 1.0 + tol.pauli_atol:
        raise InvalidCovarianceError(
            f"Fermionic covariance has eigenvalue {w[-1]:.12g} above one", reason="pauli_violation"
        )


def covariance_from_array(raw: ArrayLike, statistics: Union[str, Statistics] = Statistics.FERMION,
                          tol: ToleranceConfig = DEFAULT_TOLERANCES) -> CovarianceMatrix:
    """Validate a user supplied covariance matrix."""
    Q = validate_hermitian(raw, "Q", tol)
    check_covariance_window(Q.entries, Statistics(statistics), tol)
    return CovarianceMatrix(Q)


def ness_covariance(spec: SystemSpec, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> CovarianceMatrix:
    """Q_NESS from (A + D + iH) Q + Q (A + D - iH) = 2A."""
    require_statistics(spec, Statistics.FERMION)
    P = PsdMatrix(spec.P.entries)
    X = solve_damped_fixed_point(P, spec.H, spec.A, tol=tol)
    check_covariance_window(X.entries, Statistics.FERMION, tol)
    return CovarianceMatrix(X)


def propagate(G: np.ndarray, Q0: np.ndarray, Q_inf: np.ndarray, t: float) -> np.ndarray:
    """e^{-Gt} (Q0 - Q_inf) e^{-G^H t} + Q_inf, the exact transient solution."""
    E = expm(-G * t)
    return hermitize(E @ (Q0 - Q_inf) @ E.conj().T + Q_inf)


def evolve_covariance(spec: SystemSpec, Q0: CovarianceMatrix, t: float,
                      tol: ToleranceConfig = DEFAULT_TOLERANCES) -> CovarianceMatrix:
    """Covariance at time t starting from Q0.

    The transient integral 2 int_0^t e^{-Gs} A e^{-G^H s} ds equals
    Q_NESS - e^{-Gt} Q_NESS e^{-G^H t}, so no quadrature is needed.
    """
    if t < 0:
        raise ValueError(f"Evolution time must be non-negative, got {t}")
    if Q0.dim != spec.m:
        raise NotSquareError(f"Q0 has dimension {Q0.dim}, system has {spec.m}")
    if t == 0:
        return Q0
    Q_inf = ness_covariance(spec, tol)
    G = spec.P.entries + 1j * spec.H.entries
    Qt = propagate(G, Q0.entries, Q_inf.entries, t)
    check_covariance_window(Qt, Statistics.FERMION, tol)
    return CovarianceMatrix(HermitianMatrix(Qt))


def current(spec: SystemSpec, Q: CovarianceMatrix, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """Outflowing current J = 2 tr(D Q).

    No absolute value is taken: a clearly negative result is a bug and raises.
    """
    J = 2.0 * expectation(spec.D.entries, Q.Q).real
    if J < -tol.current_atol * max(1.0, spec.D.trace):
        raise NegativeCurrentError(f"Current came out negative: J = {J:.3e}")
    return J


def current_bound_fermion(A: PsdMatrix, D: PsdMatrix) -> float:
    """J_max = 2 tr(A) tr(D) / tr(A + D)."""
    tr_a, tr_d = A.trace, D.trace
    if tr_a + tr_d <= 0:
        raise DegenerateChannelsError("tr(A) + tr(D) must be positive to bound the current")
    return 2.0 * tr_a * tr_d / (tr_a + tr_d)


def balance_residual(spec: SystemSpec, Q: CovarianceMatrix) -> float:
    """|2 tr(A (1 - Q)) - 2 tr(D Q)|, zero at stationarity."""
    A, D, q = spec.A.entries, spec.D.entries, Q.entries
    inflow = 2.0 * (np.trace(A) - np.trace(A @ q))
    outflow = 2.0 * np.trace(D @ q)
    return float(abs((inflow - outflow).real))


def particle_number(Q: CovarianceMatrix) -> float:
    return expectation(np.eye(Q.dim), Q.Q).real


def current_lambda(spec: SystemSpec, lam: float, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """Current with H replaced by lam * H."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    scaled = spec.with_hamiltonian_scale(lam)
    return current(scaled, ness_covariance(scaled, tol), tol)


def current_gamma(spec: SystemSpec, gamma: float, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """Current with A -> gamma A and D -> gamma D, H unchanged."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    scaled = spec.with_rate_scale(gamma)
    return current(scaled, ness_covariance(scaled, tol), tol)


def bound_ratio(J: float, bound: float) -> float:
    """J / bound, with 0/0 (no pumping) reported as 0."""
    if bound == 0:
        return 0.0 if J == 0 else float("inf")
    return J / bound


def ness_report(spec: SystemSpec, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> NessReport:
    """Q_NESS together with the current, its bound and the stationarity diagnostics."""
    Q = ness_covariance(spec, tol)
    J = current(spec, Q, tol)
    J_max = current_bound_fermion(spec.A, spec.D)
    residual = balance_residual(spec, Q)
    if residual > tol.balance_rtol * max(1.0, J):
        logger.warning(f"Balance residual {residual:.3e} above tolerance for J = {J:.6g}")
    ratio = bound_ratio(J, J_max)
    if ratio > 1.0 + tol.bound_rtol:
        logger.warning(f"Current {J:.12g} exceeds the fermionic bound {J_max:.12g}")
    return NessReport(
        Q_ness=Q,
        J=J,
        J_bound=J_max,
        ratio=ratio,
        balance_residual=residual,
        particle_number=particle_number(Q),
    )
