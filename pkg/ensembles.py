"""
Seedable random-matrix samplers: GOE Hamiltonians, Wishart channel
matrices, Haar unitaries and the designed symmetric systems.

Every sampler takes an explicit ``numpy.random.Generator``. Sweeps get one
generator per realization from ``realization_rng`` so that realization k
draws the same numbers regardless of how many realizations run or in which
worker process.
"""

import logging
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.linalg import schur

from linalg_core import HermitianMatrix, PsdMatrix, hermitize, validate_psd
from ness_config import DEFAULT_TOLERANCES, ToleranceConfig
from ness_errors import ConfigError, DegenerateSpectrumError
from ness_fermion import Statistics, SystemSpec
from perturbative import check_distinct_energies, designed_spec

logger = logging.getLogger(__name__)

# substream ids inside one seed
STREAM_REALIZATION = 0
STREAM_FIXED = 1
STREAM_DESIGNED = 2

MAX_RESAMPLE_ATTEMPTS = 100


class EnsembleKind(str, Enum):
    GOE = "goe"
    WISHART = "wishart"
    HAAR = "haar"
    DESIGNED = "designed"


class GoeConvention(str, Enum):
    # entry variance (1 + delta_ij) v^2 / m, spectral radius ~ 2v
    VARIANCE = "variance"
    # entry standard deviation (1 + delta_ij) v / sqrt(m)
    LITERAL_STD = "literal_std"


class ChannelStructure(str, Enum):
    FULL = "full"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class EnsembleConfig:
    """Parameters of a random-system ensemble, as stored in a run config."""

    m: int = 10
    v: float = 1.0
    m_A: int = 5
    m_D: int = 10
    m_P: Optional[int] = None
    seed: int = 0
    kind: EnsembleKind = EnsembleKind.GOE
    statistics: Statistics = Statistics.FERMION
    energy_halfwidth: Optional[float] = None
    goe_convention: GoeConvention = GoeConvention.VARIANCE
    channel_structure: ChannelStructure = ChannelStructure.FULL

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", EnsembleKind(self.kind))
            object.__setattr__(self, "statistics", Statistics(self.statistics))
            object.__setattr__(self, "goe_convention", GoeConvention(self.goe_convention))
            object.__setattr__(self, "channel_structure", ChannelStructure(self.channel_structure))
        except ValueError as e:
            raise ConfigError(f"Invalid ensemble setting: {e}")
        counts = {"m": self.m, "m_A": self.m_A, "m_D": self.m_D}
        if self.m_P is not None:
            counts["m_P"] = self.m_P
        for name, value in counts.items():
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"Ensemble count {name} must be an integer >= 1, got {value!r}")
        if self.v <= 0:
            raise ConfigError(f"GOE scale v must be positive, got {self.v}")
        if self.energy_halfwidth is not None and self.energy_halfwidth <= 0:
            raise ConfigError(f"energy_halfwidth must be positive, got {self.energy_halfwidth}")

    @property
    def halfwidth(self) -> float:
        return self.energy_halfwidth if self.energy_halfwidth is not None else self.m / 2.0

    @property
    def loss_channels(self) -> int:
        """m_P for bosonic ensembles (falling back to m_D), m_D otherwise."""
        if self.statistics is Statistics.BOSON and self.m_P is not None:
            return self.m_P
        return self.m_D

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnsembleConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown ensemble keys: {unknown}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("kind", "statistics", "goe_convention", "channel_structure"):
            data[key] = data[key].value
        return data


def realization_rng(seed: int, index: int, stream: int = STREAM_REALIZATION) -> np.random.Generator:
    """Independent PCG64 generator for (seed, stream, index)."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream, index))
    return np.random.Generator(np.random.PCG64(sequence))


def sample_goe(m: int, v: float, rng: np.random.Generator,
               convention: GoeConvention = GoeConvention.VARIANCE) -> HermitianMatrix:
    """Real symmetric GOE matrix with coupling scale v."""
    if m < 1 or v <= 0:
        raise ValueError(f"GOE needs m >= 1 and v > 0, got m={m}, v={v}")
    X = rng.standard_normal((m, m))
    scale = v / np.sqrt(m)
    H = (X + X.T) / np.sqrt(2.0) * scale
    if GoeConvention(convention) is GoeConvention.LITERAL_STD:
        np.fill_diagonal(H, 2.0 * scale * np.diag(X))
    return HermitianMatrix(H)


def sample_wishart_channel(m: int, m_ch: int, normalizer: int, rng: np.random.Generator,
                           name: str = "channel") -> PsdMatrix:
    """W^T W / normalizer with W an m_ch x m standard normal matrix."""
    if m < 1 or m_ch < 1 or normalizer < 1:
        raise ValueError(f"Wishart needs positive sizes, got m={m}, m_ch={m_ch}, normalizer={normalizer}")
    W = rng.standard_normal((m_ch, m))
    return validate_psd(hermitize(W.T @ W / normalizer), name)


def sample_haar_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    if m < 1:
        raise ValueError(f"Haar unitary needs m >= 1, got {m}")
    Z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    # fix the QR phase freedom so R has a positive diagonal
    L = np.diagonal(R)
    Q *= L / np.abs(L)
    return Q


def _eigenphases_distinct(U: np.ndarray, tol: ToleranceConfig) -> bool:
    T, _ = schur(U, output="complex")
    phases = np.sort(np.angle(np.diagonal(T)) % (2 * np.pi))
    if phases.size < 2:
        return True
    gaps = np.append(np.diff(phases), 2 * np.pi - (phases[-1] - phases[0]))
    return bool(gaps.min() > tol.degeneracy_rtol * 2 * np.pi)


@dataclass(frozen=True, eq=False)
class DesignedSystem:
    """A symmetric design: [H, U] = 0 and D = U^H A U."""

    spec: SystemSpec
    U: np.ndarray
    energies: np.ndarray


def build_designed_system(m: int, m_A: int, rng: np.random.Generator,
                          energy_halfwidth: Optional[float] = None,
                          A: Optional[PsdMatrix] = None,
                          tol: ToleranceConfig = DEFAULT_TOLERANCES) -> DesignedSystem:
    """Haar U, energies Uniform[-w, w] in U's eigenbasis, Wishart A (normalizer 2 m_A), D = U^H A U.

    Draws with colliding eigenphases or energies are rejected and redrawn.
    Passing ``A`` keeps the absorption matrix fixed across realizations.
    """
    halfwidth = energy_halfwidth if energy_halfwidth is not None else m / 2.0
    if halfwidth <= 0:
        raise ValueError(f"energy_halfwidth must be positive, got {halfwidth}")
    for attempt in range(MAX_RESAMPLE_ATTEMPTS):
        U = sample_haar_unitary(m, rng)
        energies = rng.uniform(-halfwidth, halfwidth, size=m)
        if not _eigenphases_distinct(U, tol):
            logger.debug(f"Resampling designed system: eigenphase collision (attempt {attempt + 1})")
            continue
        try:
            check_distinct_energies(energies, tol=tol)
        except DegenerateSpectrumError:
            logger.debug(f"Resampling designed system: energy collision (attempt {attempt + 1})")
            continue
        absorption = A if A is not None else sample_wishart_channel(m, m_A, 2 * m_A, rng, "A")
        return DesignedSystem(spec=designed_spec(U, absorption, energies), U=U, energies=energies)
    raise DegenerateSpectrumError(
        f"No non-degenerate designed system after {MAX_RESAMPLE_ATTEMPTS} draws"
    )


def _structured(M: PsdMatrix, structure: ChannelStructure) -> PsdMatrix:
    if structure is ChannelStructure.DIAGONAL:
        return PsdMatrix(np.diag(np.diag(M.entries).real))
    return M


def sample_channels(config: EnsembleConfig, rng: np.random.Generator):
    """(A, D) for the config's statistics; bosons get D = P + A with Wishart P."""
    m = config.m
    if config.statistics is Statistics.BOSON:
        m_p = config.loss_channels
        normalizer = config.m_A + m_p
        P = sample_wishart_channel(m, m_p, normalizer, rng, "P")
        A = sample_wishart_channel(m, config.m_A, normalizer, rng, "A")
        A = _structured(A, config.channel_structure)
        D = PsdMatrix(A.entries + _structured(P, config.channel_structure).entries)
        return A, D
    normalizer = config.m_A + config.m_D
    A = sample_wishart_channel(m, config.m_A, normalizer, rng, "A")
    D = sample_wishart_channel(m, config.m_D, normalizer, rng, "D")
    return _structured(A, config.channel_structure), _structured(D, config.channel_structure)


def sample_system(config: EnsembleConfig, rng: np.random.Generator,
                  tol: ToleranceConfig = DEFAULT_TOLERANCES) -> SystemSpec:
    """Draw one SystemSpec from the ensemble: H first, then the channels."""
    if config.kind is EnsembleKind.DESIGNED:
        if config.statistics is not Statistics.FERMION:
            raise ConfigError("Designed systems are fermionic")
        return build_designed_system(config.m, config.m_A, rng, config.halfwidth, tol=tol).spec
    if config.kind is not EnsembleKind.GOE:
        raise ConfigError(f"Ensemble kind '{config.kind.value}' does not describe a full system")
    H = sample_goe(config.m, config.v, rng, config.goe_convention)
    A, D = sample_channels(config, rng)
    return SystemSpec(H=H, A=A, D=D, statistics=config.statistics)


def mean_level_spacing(energies: Sequence[float]) -> float:
    """(E_max - E_min) / (m - 1) for a single realization."""
    E = np.asarray(energies, dtype=float)
    if E.size < 2:
        raise ValueError("Mean level spacing needs at least two levels")
    return float((E.max() - E.min()) / (E.size - 1))
