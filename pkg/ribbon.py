"""
Shift-invariant quantum ribbons.

A ribbon is infinite along one axis and d sites wide. Shift-invariant H, A
and D are represented by their symbols, the trigonometric polynomials

    X(x) = sum_r T_r e^{irx},    T_{-r} = T_r^H,

on x in [0, 2pi). The NESS decouples into one d x d problem per momentum x,
and densities per site are momentum averages of traces, evaluated on a
uniform grid x_j = 2 pi j / n_k (exact for trig polynomials of degree < n_k).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from linalg_core import HermitianMatrix, PsdMatrix, hermitize
from ness_config import DEFAULT_TOLERANCES, ToleranceConfig
from ness_errors import (
    ConfigError,
    NotHermitianError,
    NotSquareError,
    SingularGeneratorError,
    SymbolNotPsdError,
)
from ness_fermion import CovarianceMatrix, SystemSpec, ness_covariance
from utils import decode_matrix, encode_matrix

logger = logging.getLogger(__name__)

DEFAULT_NODES = 128

Hoppings = Dict[int, np.ndarray]
Symbol = Union[Callable[[float], np.ndarray], np.ndarray]


def complete_hoppings(raw: Mapping[int, Any], d: int, name: str,
                      tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Hoppings:
    """Fill in T_{-r} = T_r^H where missing and check it where given."""
    hoppings: Hoppings = {}
    for r, T in raw.items():
        arr = np.array(T, dtype=complex)
        if arr.shape != (d, d):
            raise NotSquareError(f"{name}: hopping r={r} has shape {arr.shape}, expected ({d}, {d})")
        hoppings[int(r)] = arr
    for r in sorted(hoppings):
        T = hoppings[r]
        partner = hoppings.get(-r)
        if partner is None:
            hoppings[-r] = T.conj().T
            continue
        scale = max(1.0, float(np.max(np.abs(T))))
        if np.max(np.abs(partner - T.conj().T)) > tol.hermitian_rtol * scale:
            which = "T_0 is not Hermitian" if r == 0 else f"T_{-r} != T_{r}^H"
            raise NotHermitianError(f"{name}: {which}")
    return {r: hoppings[r] for r in sorted(hoppings)}


@dataclass(frozen=True, eq=False)
class RibbonSpec:
    """Symbols of H, A and D on a ribbon of width d, with n_k quadrature nodes."""

    d: int
    hoppings_H: Hoppings
    hoppings_A: Hoppings
    hoppings_D: Hoppings
    n_k: int = DEFAULT_NODES

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError(f"Ribbon width d must be >= 1, got {self.d}")
        if self.n_k < 4 or self.n_k % 2:
            raise ConfigError(f"n_k must be an even integer >= 4, got {self.n_k}")
        for name in ("hoppings_H", "hoppings_A", "hoppings_D"):
            completed = complete_hoppings(getattr(self, name), self.d, name)
            object.__setattr__(self, name, completed)

    def nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_k) / self.n_k

    def with_nodes(self, n_k: int) -> "RibbonSpec":
        return RibbonSpec(self.d, self.hoppings_H, self.hoppings_A, self.hoppings_D, n_k)


@dataclass(frozen=True)
class NodeRecord:
    x: float
    tr_DQ: float
    tr_A_one_minus_Q: float
    local_bound: float


@dataclass(frozen=True)
class RibbonReport:
    j_density: float
    j_density_bound: float
    rho: float
    per_k_records: List[NodeRecord] = field(default_factory=list)
    balance_violations: int = 0
    local_bound_violations: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "j_density": self.j_density,
            "j_density_bound": self.j_density_bound,
            "ratio": self.j_density / self.j_density_bound if self.j_density_bound > 0 else 0.0,
            "rho": self.rho,
            "n_k": len(self.per_k_records),
            "balance_violations": self.balance_violations,
            "local_bound_violations": self.local_bound_violations,
        }


def _fourier_sum(hoppings: Hoppings, d: int, x: float) -> np.ndarray:
    total = np.zeros((d, d), dtype=complex)
    for r, T in hoppings.items():
        total += T * np.exp(1j * r * x)
    return total


def _check_node_psd(M: np.ndarray, x: float, symbol: str, tol: ToleranceConfig) -> PsdMatrix:
    w, v = np.linalg.eigh(M)
    if w[0] < -tol.psd_rtol * max(1.0, float(w[-1])):
        raise SymbolNotPsdError(x, symbol, float(w[0]))
    if w[0] < 0:
        M = hermitize((v * np.clip(w, 0.0, None)) @ v.conj().T)
    return PsdMatrix(M)


def eval_symbol(spec: RibbonSpec, x: float,
                tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Tuple[HermitianMatrix, PsdMatrix, PsdMatrix]:
    """(H(x), A(x), D(x)) at one momentum, with the rate symbols checked PSD."""
    if not 0.0 <= x < 2.0 * np.pi:
        raise ValueError(f"Momentum x must lie in [0, 2pi), got {x}")
    H = HermitianMatrix(hermitize(_fourier_sum(spec.hoppings_H, spec.d, x)))
    A = _check_node_psd(hermitize(_fourier_sum(spec.hoppings_A, spec.d, x)), x, "A", tol)
    D = _check_node_psd(hermitize(_fourier_sum(spec.hoppings_D, spec.d, x)), x, "D", tol)
    return H, A, D


def _solve_node(spec: RibbonSpec, x: float, tol: ToleranceConfig) -> Tuple[SystemSpec, CovarianceMatrix]:
    H, A, D = eval_symbol(spec, x, tol)
    system = SystemSpec(H=H, A=A, D=D)
    try:
        return system, ness_covariance(system, tol)
    except SingularGeneratorError as e:
        raise SingularGeneratorError(f"At momentum x={x!r}: {e}") from e


def ribbon_ness_symbol(spec: RibbonSpec, x: float,
                       tol: ToleranceConfig = DEFAULT_TOLERANCES) -> CovarianceMatrix:
    """Per-momentum fermionic NESS covariance Q(x)."""
    return _solve_node(spec, x, tol)[1]


def observable_density(spec: RibbonSpec, X: Symbol, Q: Symbol) -> float:
    """(1/2pi) int tr(X(x) Q(x)) dx on the uniform grid.

    Either symbol may be a callable of x or a constant d x d array.
    """
    def at(symbol: Symbol, x: float) -> np.ndarray:
        return np.asarray(symbol(x) if callable(symbol) else symbol, dtype=complex)

    values = np.array([np.trace(at(X, x) @ at(Q, x)) for x in spec.nodes()])
    return float(np.mean(values).real)


def _solve_nodes(spec: RibbonSpec, tol: ToleranceConfig) -> List[Tuple[float, SystemSpec, CovarianceMatrix]]:
    return [(float(x), *_solve_node(spec, float(x), tol)) for x in spec.nodes()]


def particle_density(spec: RibbonSpec, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """Particles per site, (1/2pi d) int tr Q(x) dx."""
    traces = np.array([np.trace(Q.entries).real for _, _, Q in _solve_nodes(spec, tol)])
    return float(np.mean(traces) / spec.d)


def _local_bound(tr_a: float, tr_d: float) -> float:
    total = tr_a + tr_d
    return 2.0 * tr_a * tr_d / total if total > 0 else 0.0


def current_density(spec: RibbonSpec, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> RibbonReport:
    """Current per site j = (1/pi d) int tr(D(x) Q(x)) dx, with its bound and the particle density."""
    records: List[NodeRecord] = []
    densities, bounds, traces = [], [], []
    balance_violations = 0
    bound_violations = 0
    for x, system, Q in _solve_nodes(spec, tol):
        q = Q.entries
        A, D = system.A.entries, system.D.entries
        tr_dq = float(np.trace(D @ q).real)
        tr_a_hole = float((np.trace(A) - np.trace(A @ q)).real)
        local = _local_bound(system.A.trace, system.D.trace)
        scale = max(1.0, system.A.trace + system.D.trace)

        if abs(tr_dq - tr_a_hole) > tol.balance_rtol * scale:
            balance_violations += 1
            logger.warning(f"Ribbon balance off at x={x:.6f}: {tr_dq:.12g} vs {tr_a_hole:.12g}")
        if 2.0 * tr_dq > local + tol.bound_rtol * scale:
            bound_violations += 1
            logger.warning(f"Local current bound violated at x={x:.6f}")

        records.append(NodeRecord(x=x, tr_DQ=tr_dq, tr_A_one_minus_Q=tr_a_hole, local_bound=local))
        densities.append(tr_dq)
        bounds.append(local)
        traces.append(float(np.trace(q).real))

    j_density = 2.0 * float(np.mean(densities)) / spec.d
    j_bound = float(np.mean(bounds)) / spec.d
    rho = float(np.mean(traces)) / spec.d
    logger.debug(f"Ribbon d={spec.d}, n_k={spec.n_k}: j={j_density:.6g}, bound={j_bound:.6g}, rho={rho:.6g}")
    return RibbonReport(
        j_density=j_density,
        j_density_bound=j_bound,
        rho=rho,
        per_k_records=records,
        balance_violations=balance_violations,
        local_bound_violations=bound_violations,
    )


def _decode_hoppings(entries: Sequence[Dict[str, Any]], name: str) -> Dict[int, np.ndarray]:
    hoppings: Dict[int, np.ndarray] = {}
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "r" not in entry:
            raise ConfigError(f"{name}[{i}]: expected an object with 'r', 're' and optional 'im'")
        unknown = sorted(set(entry) - {"r", "re", "im"})
        if unknown:
            raise ConfigError(f"{name}[{i}]: unknown keys {unknown}")
        r = int(entry["r"])
        if r in hoppings:
            raise ConfigError(f"{name}: hopping r={r} given twice")
        matrix = {k: entry[k] for k in ("re", "im") if k in entry}
        hoppings[r] = decode_matrix(matrix, f"{name}[r={r}]")
    return hoppings


RIBBON_KEYS = ("d", "n_k", "hoppings_H", "hoppings_A", "hoppings_D")


def ribbon_from_dict(data: Dict[str, Any]) -> RibbonSpec:
    """Build a RibbonSpec from its JSON form; hopping entries are {r, re, im}."""
    unknown = sorted(set(data) - set(RIBBON_KEYS))
    if unknown:
        raise ConfigError(f"Unknown ribbon keys: {unknown}")
    if "d" not in data:
        raise ConfigError("Ribbon config needs the width 'd'")
    return RibbonSpec(
        d=int(data["d"]),
        hoppings_H=_decode_hoppings(data.get("hoppings_H", []), "hoppings_H"),
        hoppings_A=_decode_hoppings(data.get("hoppings_A", []), "hoppings_A"),
        hoppings_D=_decode_hoppings(data.get("hoppings_D", []), "hoppings_D"),
        n_k=int(data.get("n_k", DEFAULT_NODES)),
    )


def ribbon_to_dict(spec: RibbonSpec) -> Dict[str, Any]:
    def encode(hoppings: Hoppings) -> List[Dict[str, Any]]:
        return [{"r": r, **encode_matrix(T)} for r, T in hoppings.items()]

    return {
        "d": spec.d,
        "n_k": spec.n_k,
        "hoppings_H": encode(spec.hoppings_H),
        "hoppings_A": encode(spec.hoppings_A),
        "hoppings_D": encode(spec.hoppings_D),
    }
