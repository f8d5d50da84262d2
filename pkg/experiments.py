"""
Batch experiments over random and designed systems.

Each scatter experiment draws n_realizations systems from a seeded
ensemble, computes the steady-state current at a random scale parameter and
compares it with the universal bound. Results are one CSV row per
realization plus a JSON summary; single-system reports and ribbon densities
run through the same entry point.

Realization k always uses the generator ``realization_rng(seed, k)``, so
the rows are identical whatever the worker count, and records are written
in realization order.
"""

import asyncio
import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from functools import partial, wraps
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import spearmanr

from ensembles import (
    STREAM_DESIGNED,
    STREAM_FIXED,
    ChannelStructure,
    EnsembleConfig,
    EnsembleKind,
    build_designed_system,
    mean_level_spacing,
    realization_rng,
    sample_channels,
    sample_goe,
    sample_system,
    sample_wishart_channel,
)
from linalg_core import PsdMatrix, channel_matrix, frobenius
from ness_boson import (
    current_boson,
    evolve_covariance_boson,
    ness_report_boson,
)
from ness_config import DEFAULT_TOLERANCES, ToleranceConfig
from ness_errors import ConfigError, NessError
from ness_fermion import (
    CovarianceMatrix,
    Statistics,
    SystemSpec,
    covariance_from_array,
    current,
    evolve_covariance,
    ness_report,
    particle_number,
)
from ribbon import current_density, ribbon_from_dict
from utils import current_timestamp, decode_matrix, format_float, to_jsonable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_FAILURE_RATE = 2
EXIT_VIOLATION = 3

COMMUTATOR_ATOL = 1e-10
LARGE_LAMBDA = 1e3
INSET_GAMMA_RANGE = (1e-3, 1e-2)
SMALL_GAMMA = 1e-2

# errors that signal a broken physical invariant rather than a solver failure
INVARIANT_REASONS = {"pauli_violation", "positivity_violation", "negative_current"}


class Experiment(str, Enum):
    FIG1 = "fig1_fermion_scatter"
    FIG2 = "fig2_designed_scatter"
    FIG3 = "fig3_gamma_absolute"
    FIG4 = "fig4_boson_scatter"
    RIBBON = "ribbon_demo"
    SINGLE = "single_system"


CSV_HEADERS: Dict[Experiment, List[str]] = {
    Experiment.FIG1: ["realization", "lambda", "J", "J_max", "ratio", "tr_A", "tr_D",
                      "particle_number", "balance_residual"],
    Experiment.FIG2: ["realization", "lambda", "J", "J_max", "ratio", "tr_A", "tr_D",
                      "particle_number", "balance_residual"],
    Experiment.FIG3: ["realization", "gamma", "J_gamma_in_spacing_units",
                      "gamma_J_max_in_spacing_units", "designed_flag"],
    Experiment.FIG4: ["realization", "lambda", "J", "J_min", "ratio", "lambda_min_D_minus_A"],
    Experiment.RIBBON: ["x", "tr_DQ", "tr_A_one_minus_Q", "local_bound"],
}

DEFAULT_ENSEMBLES: Dict[Experiment, EnsembleConfig] = {
    Experiment.FIG1: EnsembleConfig(m=10, v=1.0, m_A=5, m_D=10),
    Experiment.FIG2: EnsembleConfig(m=10, m_A=10, kind=EnsembleKind.DESIGNED),
    Experiment.FIG3: EnsembleConfig(m=10, v=1.0, m_A=5, m_D=10),
    Experiment.FIG4: EnsembleConfig(m=10, m_A=5, m_P=10, statistics=Statistics.BOSON),
}


# =============================================================================
# CONFIGURATION
# =============================================================================

def _log_range(value: Any, name: str) -> Tuple[float, float]:
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a pair of numbers, got {value!r}")
    if lo > hi:
        raise ConfigError(f"{name} must be ordered, got [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class RunConfig:
    """One experiment run, as read from a JSON run config."""

    experiment: Experiment
    n_realizations: int = 1000
    seed: int = 0
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    lambda_log_range: Tuple[float, float] = (-5.0, 5.0)
    gamma_log_range: Tuple[float, float] = (-5.0, 5.0)
    fixed_lambda: Optional[float] = None
    fixed_gamma: Optional[float] = None
    tolerances: ToleranceConfig = DEFAULT_TOLERANCES
    output_path: Optional[str] = None
    system: Optional[Dict[str, Any]] = None
    ribbon: Optional[Dict[str, Any]] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "experiment", Experiment(self.experiment))
        except ValueError:
            raise ConfigError(f"Unknown experiment {self.experiment!r}")
        if self.n_realizations < 1:
            raise ConfigError(f"n_realizations must be >= 1, got {self.n_realizations}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a non-negative 64-bit integer, got {self.seed}")
        if self.fixed_lambda is not None and self.fixed_lambda < 0:
            raise ConfigError(f"fixed_lambda must be non-negative, got {self.fixed_lambda}")
        if self.fixed_gamma is not None and self.fixed_gamma <= 0:
            raise ConfigError(f"fixed_gamma must be positive, got {self.fixed_gamma}")
        self._check_experiment()

    def _check_experiment(self) -> None:
        ens = self.ensemble
        if self.experiment is Experiment.FIG1:
            if ens.kind is not EnsembleKind.GOE or ens.statistics is not Statistics.FERMION:
                raise ConfigError("fig1_fermion_scatter needs a fermionic 'goe' ensemble")
        elif self.experiment is Experiment.FIG2:
            if ens.kind is not EnsembleKind.DESIGNED:
                raise ConfigError("fig2_designed_scatter needs a 'designed' ensemble")
        elif self.experiment is Experiment.FIG3:
            if ens.statistics is not Statistics.FERMION:
                raise ConfigError("fig3_gamma_absolute is a fermionic experiment")
        elif self.experiment is Experiment.FIG4:
            if ens.kind is not EnsembleKind.GOE or ens.statistics is not Statistics.BOSON:
                raise ConfigError("fig4_boson_scatter needs a bosonic 'goe' ensemble")
        elif self.experiment is Experiment.SINGLE and self.system is None:
            raise ConfigError("single_system needs a 'system' block")
        elif self.experiment is Experiment.RIBBON and self.ribbon is None:
            raise ConfigError("ribbon_demo needs a 'ribbon' block")

    @classmethod
    def from_dict(cls, data: Dict[str, Any],
                  base_tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> "RunConfig":
        """Parse a run config, rejecting unknown keys.

        Missing ensemble fields take the experiment's defaults and the
        tolerances overlay ``base_tolerances``.
        """
        if not isinstance(data, dict):
            raise ConfigError("Run config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown run config keys: {unknown}")
        if "experiment" not in data:
            raise ConfigError("Run config needs an 'experiment'")
        try:
            experiment = Experiment(data["experiment"])
        except ValueError:
            choices = [e.value for e in Experiment]
            raise ConfigError(f"Unknown experiment {data['experiment']!r}, expected one of {choices}")

        ensemble_data = data.get("ensemble") or {}
        if not isinstance(ensemble_data, dict):
            raise ConfigError("'ensemble' must be a JSON object")
        try:
            seed = int(data.get("seed", ensemble_data.get("seed", 0)))
            n_realizations = int(data.get("n_realizations", 1000))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid integer in run config: {e}")
        defaults = DEFAULT_ENSEMBLES.get(experiment, EnsembleConfig())
        ensemble = EnsembleConfig.from_dict({**defaults.to_dict(), **ensemble_data, "seed": seed})

        tolerance_data = data.get("tolerances") or {}
        tolerances = ToleranceConfig.from_dict({**base_tolerances.to_dict(), **tolerance_data})

        def optional_float(key: str) -> Optional[float]:
            return None if data.get(key) is None else float(data[key])

        return cls(
            experiment=experiment,
            n_realizations=n_realizations,
            seed=seed,
            ensemble=ensemble,
            lambda_log_range=_log_range(data.get("lambda_log_range", (-5.0, 5.0)), "lambda_log_range"),
            gamma_log_range=_log_range(data.get("gamma_log_range", (-5.0, 5.0)), "gamma_log_range"),
            fixed_lambda=optional_float("fixed_lambda"),
            fixed_gamma=optional_float("fixed_gamma"),
            tolerances=tolerances,
            output_path=data.get("output_path"),
            system=data.get("system"),
            ribbon=data.get("ribbon"),
        )

    def with_overrides(self, seed: Optional[int] = None,
                       output_path: Optional[str] = None) -> "RunConfig":
        updated = self
        if seed is not None:
            updated = replace(updated, seed=seed, ensemble=replace(updated.ensemble, seed=seed))
        if output_path is not None:
            updated = replace(updated, output_path=output_path)
        return updated

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "experiment": self.experiment.value,
            "n_realizations": self.n_realizations,
            "seed": self.seed,
            "ensemble": self.ensemble.to_dict(),
            "lambda_log_range": list(self.lambda_log_range),
            "gamma_log_range": list(self.gamma_log_range),
            "fixed_lambda": self.fixed_lambda,
            "fixed_gamma": self.fixed_gamma,
            "tolerances": self.tolerances.to_dict(),
            "output_path": self.output_path,
        }
        if self.system is not None:
            data["system"] = self.system
        if self.ribbon is not None:
            data["ribbon"] = self.ribbon
        return data


def load_run_config(path: Union[str, Path],
                    base_tolerances: ToleranceConfig = DEFAULT_TOLERANCES) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Could not read run config {path}: {e}")
    config = RunConfig.from_dict(data, base_tolerances)
    if config.system and "path" in config.system:
        # relative system files resolve against the config's directory
        system_path = Path(config.system["path"])
        if not system_path.is_absolute():
            system = {**config.system, "path": str(Path(path).parent / system_path)}
            config = replace(config, system=system)
    return config


# =============================================================================
# PER-REALIZATION TASKS
# =============================================================================

@dataclass(frozen=True)
class ScatterRecord:
    realization_index: int
    lambda_or_gamma: float
    J: float
    bound: float
    ratio: float
    aux: Dict[str, float] = field(default_factory=dict)
    invariant_violations: Tuple[str, ...] = ()


@dataclass(frozen=True)
class RealizationFailure:
    realization_index: int
    reason: str
    message: str
    sub_run: Optional[str] = None


Outcome = Union[ScatterRecord, RealizationFailure]


def realization_task(fn: Callable[..., ScatterRecord]) -> Callable[..., Outcome]:
    """Turn library errors raised by one realization into a recorded failure."""

    @wraps(fn)
    def wrapper(config: RunConfig, index: int, **kwargs) -> Outcome:
        try:
            return fn(config, index, **kwargs)
        except NessError as e:
            logger.warning(f"Realization {index} failed ({e.reason}): {e}")
            return RealizationFailure(index, e.reason, str(e), kwargs.get("sub_run"))

    return wrapper


def _draw_scale(rng: np.random.Generator, fixed: Optional[float],
                log_range: Tuple[float, float]) -> float:
    if fixed is not None:
        return float(fixed)
    lo, hi = log_range
    return float(10.0 ** rng.uniform(lo, hi))


def _balance_check(residual: float, J: float, tol: ToleranceConfig) -> Tuple[str, ...]:
    return ("balance",) if residual > tol.balance_rtol * max(1.0, J) else ()


def _bound_violated(J: float, bound: float, boson: bool, tol: ToleranceConfig) -> bool:
    # J = bound = 0 (no pumping) is not a violation for either statistics
    if boson:
        return J < bound * (1.0 - tol.bound_rtol) - tol.current_atol
    return J > bound * (1.0 + tol.bound_rtol) + tol.current_atol


@realization_task
def fig1_realization(config: RunConfig, index: int) -> ScatterRecord:
    tol = config.tolerances
    rng = realization_rng(config.seed, index)
    spec = sample_system(config.ensemble, rng, tol)
    lam = _draw_scale(rng, config.fixed_lambda, config.lambda_log_range)
    report = ness_report(spec.with_hamiltonian_scale(lam), tol)
    return ScatterRecord(
        realization_index=index,
        lambda_or_gamma=lam,
        J=report.J,
        bound=report.J_bound,
        ratio=report.ratio,
        aux={
            "tr_A": spec.A.trace,
            "tr_D": spec.D.trace,
            "particle_number": report.particle_number,
            "balance_residual": report.balance_residual,
        },
        invariant_violations=_balance_check(report.balance_residual, report.J, tol),
    )


@realization_task
def fig2_realization(config: RunConfig, index: int) -> ScatterRecord:
    tol = config.tolerances
    ens = config.ensemble
    rng = realization_rng(config.seed, index)
    designed = build_designed_system(ens.m, ens.m_A, rng, ens.halfwidth, tol=tol)
    lam = _draw_scale(rng, config.fixed_lambda, config.lambda_log_range)
    spec = designed.spec
    report = ness_report(spec.with_hamiltonian_scale(lam), tol)
    commutator = frobenius(spec.H.entries @ designed.U - designed.U @ spec.H.entries)
    violations = _balance_check(report.balance_residual, report.J, tol)
    if commutator > COMMUTATOR_ATOL:
        violations += ("commutator",)
    return ScatterRecord(
        realization_index=index,
        lambda_or_gamma=lam,
        J=report.J,
        bound=report.J_bound,
        ratio=report.ratio,
        aux={
            "tr_A": spec.A.trace,
            "tr_D": spec.D.trace,
            "particle_number": report.particle_number,
            "balance_residual": report.balance_residual,
            "commutator_norm": commutator,
        },
        invariant_violations=violations,
    )


@realization_task
def fig3_realization(config: RunConfig, index: int, A: PsdMatrix, D: Optional[PsdMatrix],
                     sub_run: str) -> ScatterRecord:
    """One gamma draw; ``sub_run`` is "random" (fixed A and D) or "designed" (fixed A)."""
    tol = config.tolerances
    ens = config.ensemble
    if sub_run == "designed":
        rng = realization_rng(config.seed, index, STREAM_DESIGNED)
        designed = build_designed_system(ens.m, ens.m_A, rng, ens.halfwidth, A=A, tol=tol)
        spec, energies = designed.spec, designed.energies
    else:
        rng = realization_rng(config.seed, index)
        H = sample_goe(ens.m, ens.v, rng, ens.goe_convention)
        spec, energies = SystemSpec(H=H, A=A, D=D), H.eigenvalues()
    gamma = _draw_scale(rng, config.fixed_gamma, config.gamma_log_range)
    report = ness_report(spec.with_rate_scale(gamma), tol)
    spacing = mean_level_spacing(energies)
    return ScatterRecord(
        realization_index=index,
        lambda_or_gamma=gamma,
        J=report.J,
        bound=report.J_bound,
        ratio=report.ratio,
        aux={
            "J_gamma_in_spacing_units": report.J / spacing,
            "gamma_J_max_in_spacing_units": report.J_bound / spacing,
            "designed_flag": 1 if sub_run == "designed" else 0,
        },
        invariant_violations=_balance_check(report.balance_residual, report.J, tol),
    )


@realization_task
def fig4_realization(config: RunConfig, index: int) -> ScatterRecord:
    tol = config.tolerances
    rng = realization_rng(config.seed, index)
    spec = sample_system(config.ensemble, rng, tol)
    lam = _draw_scale(rng, config.fixed_lambda, config.lambda_log_range)
    report = ness_report_boson(spec.with_hamiltonian_scale(lam), tol)
    violations = _balance_check(report.balance_residual, report.J, tol)
    if report.continuity_residual > tol.balance_rtol * max(1.0, 2.0 * spec.A.trace):
        violations += ("continuity",)
    return ScatterRecord(
        realization_index=index,
        lambda_or_gamma=lam,
        J=report.J,
        bound=report.J_min,
        ratio=report.ratio,
        aux={"lambda_min_D_minus_A": report.lambda_min_of_D_minus_A},
        invariant_violations=violations,
    )


# =============================================================================
# SINGLE SYSTEMS
# =============================================================================

SYSTEM_KEYS = {"path", "statistics", "H", "A", "D", "Q0", "times"}


def _decode_rates(value: Any, name: str, tol: ToleranceConfig):
    if isinstance(value, dict) and "rates" in value:
        return channel_matrix(value["rates"], decode_matrix(value.get("vectors"), f"{name}.vectors"),
                              name, tol).entries
    return decode_matrix(value, name)


def load_system_block(block: Dict[str, Any], tol: ToleranceConfig = DEFAULT_TOLERANCES
                      ) -> Tuple[SystemSpec, Optional[CovarianceMatrix], List[float]]:
    """Decode an inline or file-referenced system: H, A, D, optional Q0 and sample times.

    A and D may be given as matrices or as {"rates", "vectors"} channel lists.
    """
    data = dict(block)
    if "path" in data:
        path = data.pop("path")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = {**json.load(f), **data}
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Could not read system file {path}: {e}")
    unknown = sorted(set(data) - SYSTEM_KEYS)
    if unknown:
        raise ConfigError(f"Unknown system keys: {unknown}")
    missing = [k for k in ("H", "A", "D") if k not in data]
    if missing:
        raise ConfigError(f"System block is missing {missing}")
    try:
        statistics = Statistics(data.get("statistics", Statistics.FERMION.value))
    except ValueError:
        raise ConfigError(f"Unknown statistics {data.get('statistics')!r}")

    spec = SystemSpec.from_arrays(
        decode_matrix(data["H"], "H"),
        _decode_rates(data["A"], "A", tol),
        _decode_rates(data["D"], "D", tol),
        statistics=statistics,
        tol=tol,
    )
    Q0 = None
    if data.get("Q0") is not None:
        Q0 = covariance_from_array(decode_matrix(data["Q0"], "Q0"), statistics, tol)
    times = [float(t) for t in data.get("times", [])]
    if any(t < 0 for t in times):
        raise ConfigError(f"Sample times must be non-negative, got {times}")
    return spec, Q0, times


def single_system_report(block: Dict[str, Any], tol: ToleranceConfig = DEFAULT_TOLERANCES
                         ) -> Tuple[Dict[str, Any], Tuple[str, ...]]:
    """Full report for one system plus transient samples Q(t); returns (report, violations)."""
    spec, Q0, times = load_system_block(block, tol)
    if Q0 is None:
        Q0 = covariance_from_array(np.zeros((spec.m, spec.m)), spec.statistics, tol)

    violations: Tuple[str, ...] = ()
    if spec.statistics is Statistics.FERMION:
        report = ness_report(spec, tol)
        payload = report.to_dict()
        if _bound_violated(report.J, report.J_bound, False, tol):
            violations += ("bound",)
        evolve, flow = evolve_covariance, lambda Q: current(spec, Q, tol)
    else:
        report = ness_report_boson(spec, tol)
        payload = report.to_dict()
        if _bound_violated(report.J, report.J_min, True, tol):
            violations += ("bound",)
        evolve, flow = evolve_covariance_boson, lambda Q: current_boson(spec, Q)
    violations += _balance_check(report.balance_residual, report.J, tol)

    transient = []
    for t in times:
        Qt = evolve(spec, Q0, t, tol)
        transient.append({
            "t": t,
            "particle_number": particle_number(Qt),
            "J": flow(Qt),
            "Q": Qt.entries,
        })
    payload["m"] = spec.m
    payload["transient"] = transient
    return payload, violations


# =============================================================================
# RUNNER
# =============================================================================

@dataclass
class RunResult:
    config: RunConfig
    header: List[str]
    rows: List[List[str]]
    records: List[ScatterRecord]
    failures: List[RealizationFailure]
    summary: Dict[str, Any]
    exit_code: int
    report: Optional[Dict[str, Any]] = None


def _cell(record: ScatterRecord, column: str) -> str:
    if column == "realization":
        return str(record.realization_index)
    if column in ("lambda", "gamma"):
        return format_float(record.lambda_or_gamma)
    if column == "J":
        return format_float(record.J)
    if column in ("J_max", "J_min"):
        return format_float(record.bound)
    if column == "ratio":
        return format_float(record.ratio)
    value = record.aux[column]
    return str(value) if isinstance(value, int) else format_float(value)


def record_row(record: ScatterRecord, header: Sequence[str]) -> List[str]:
    return [_cell(record, column) for column in header]


def _ratio_stats(records: Sequence[ScatterRecord]) -> Dict[str, Optional[float]]:
    if not records:
        return {"min": None, "max": None, "mean": None}
    ratios = np.array([r.ratio for r in records])
    return {"min": float(ratios.min()), "max": float(ratios.max()), "mean": float(ratios.mean())}


def _is_bound_violation(record: ScatterRecord, boson: bool, tol: ToleranceConfig) -> bool:
    return _bound_violated(record.J, record.bound, boson, tol)


class ExperimentRunner:
    """Runs one RunConfig, dispatching realizations to a process pool when jobs > 1."""

    def __init__(self, config: RunConfig, jobs: int = 1, failure_rate_threshold: float = 0.01):
        self.config = config
        self.jobs = max(1, int(jobs))
        self.failure_rate_threshold = failure_rate_threshold

    async def _map(self, task: Callable[[int], Outcome], indices: Sequence[int]) -> List[Outcome]:
        if self.jobs <= 1:
            return [task(i) for i in indices]
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=self.jobs) as pool:
            futures = [loop.run_in_executor(pool, task, i) for i in indices]
            # gather keeps submission order, which is realization order
            return list(await asyncio.gather(*futures))

    async def run(self) -> RunResult:
        experiment = self.config.experiment
        logger.info(f"Starting {experiment.value} (seed={self.config.seed}, jobs={self.jobs})")
        runners = {
            Experiment.FIG1: self.run_fig1,
            Experiment.FIG2: self.run_fig2,
            Experiment.FIG3: self.run_fig3,
            Experiment.FIG4: self.run_fig4,
            Experiment.RIBBON: self.run_ribbon,
            Experiment.SINGLE: self.run_single,
        }
        result = await runners[experiment]()
        logger.info(f"Finished {experiment.value}: exit code {result.exit_code}")
        return result

    async def run_fig1(self) -> RunResult:
        outcomes = await self._map(partial(fig1_realization, self.config),
                                   range(self.config.n_realizations))
        return self._scatter_result(outcomes, boson=False)

    async def run_fig2(self) -> RunResult:
        outcomes = await self._map(partial(fig2_realization, self.config),
                                   range(self.config.n_realizations))
        result = self._scatter_result(outcomes, boson=False)
        large = [r for r in result.records if r.lambda_or_gamma >= LARGE_LAMBDA]
        result.summary["min_ratio_lambda_ge_1e3"] = min((r.ratio for r in large), default=None)
        result.summary["max_commutator_norm"] = max(
            (r.aux["commutator_norm"] for r in result.records), default=None
        )
        return result

    def fig3_fixed_channels(self) -> Tuple[PsdMatrix, PsdMatrix, PsdMatrix]:
        """(A, D) shared by the random sub-run and the A shared by the designed one."""
        ens = self.config.ensemble
        A, D = sample_channels(ens, realization_rng(self.config.seed, 0, STREAM_FIXED))
        rng = realization_rng(self.config.seed, 1, STREAM_FIXED)
        A_designed = sample_wishart_channel(ens.m, ens.m_A, 2 * ens.m_A, rng, "A")
        if ens.channel_structure is ChannelStructure.DIAGONAL:
            A_designed = PsdMatrix(np.diag(np.diag(A_designed.entries).real))
        return A, D, A_designed

    async def run_fig3(self) -> RunResult:
        A, D, A_designed = self.fig3_fixed_channels()
        indices = range(self.config.n_realizations)
        random_outcomes = await self._map(
            partial(fig3_realization, self.config, A=A, D=D, sub_run="random"), indices
        )
        designed_outcomes = await self._map(
            partial(fig3_realization, self.config, A=A_designed, D=None, sub_run="designed"), indices
        )
        result = self._scatter_result(random_outcomes + designed_outcomes, boson=False)

        sub_runs = {"random": 0, "designed": 1}
        inset, spearman = {}, {}
        lo, hi = INSET_GAMMA_RANGE
        for name, flag in sub_runs.items():
            records = [r for r in result.records if r.aux["designed_flag"] == flag]
            window = [r for r in records if lo <= r.lambda_or_gamma <= hi]
            inset[name] = {k: v for k, v in _ratio_stats(window).items() if k != "mean"}
            inset[name]["count"] = len(window)
            if len(records) >= 3:
                rho, _ = spearmanr([r.lambda_or_gamma for r in records],
                                   [r.aux["J_gamma_in_spacing_units"] for r in records])
                spearman[name] = float(rho)
            else:
                spearman[name] = None
        designed_small = [r.ratio for r in result.records
                          if r.aux["designed_flag"] == 1 and r.lambda_or_gamma <= SMALL_GAMMA]
        result.summary["inset"] = inset
        result.summary["spearman_gamma_J"] = spearman
        result.summary["designed_min_ratio_gamma_le_1e-2"] = min(designed_small, default=None)
        return result

    async def run_fig4(self) -> RunResult:
        outcomes = await self._map(partial(fig4_realization, self.config),
                                   range(self.config.n_realizations))
        return self._scatter_result(outcomes, boson=True)

    async def run_single(self) -> RunResult:
        report, violations = single_system_report(self.config.system, self.config.tolerances)
        summary = {
            "experiment": self.config.experiment.value,
            "violations": list(violations),
            "generated_at": current_timestamp(),
        }
        exit_code = EXIT_VIOLATION if violations else EXIT_OK
        return RunResult(self.config, [], [], [], [], summary, exit_code, report=report)

    async def run_ribbon(self) -> RunResult:
        spec = ribbon_from_dict(self.config.ribbon)
        report = current_density(spec, self.config.tolerances)
        header = CSV_HEADERS[Experiment.RIBBON]
        rows = [[format_float(n.x), format_float(n.tr_DQ), format_float(n.tr_A_one_minus_Q),
                 format_float(n.local_bound)] for n in report.per_k_records]
        bound_violated = report.j_density > report.j_density_bound * (1.0 + self.config.tolerances.bound_rtol)
        invariant_count = report.balance_violations + report.local_bound_violations
        summary = {
            "experiment": self.config.experiment.value,
            "d": spec.d,
            **report.to_dict(),
            "bound_violations": int(bound_violated),
            "invariant_violations": invariant_count,
            "generated_at": current_timestamp(),
        }
        exit_code = EXIT_VIOLATION if bound_violated or invariant_count else EXIT_OK
        return RunResult(self.config, header, rows, [], [], summary, exit_code,
                         report=report.to_dict())

    def _scatter_result(self, outcomes: Sequence[Outcome], boson: bool) -> RunResult:
        config = self.config
        tol = config.tolerances
        records = [o for o in outcomes if isinstance(o, ScatterRecord)]
        failures = [o for o in outcomes if isinstance(o, RealizationFailure)]

        failures_by_reason: Dict[str, int] = {}
        for failure in failures:
            failures_by_reason[failure.reason] = failures_by_reason.get(failure.reason, 0) + 1
        bound_violations = sum(_is_bound_violation(r, boson, tol) for r in records)
        invariant_violations = (sum(1 for r in records if r.invariant_violations)
                                + sum(1 for f in failures if f.reason in INVARIANT_REASONS))
        failure_rate = len(failures) / max(1, len(outcomes))

        if bound_violations or invariant_violations:
            exit_code = EXIT_VIOLATION
        elif failure_rate > self.failure_rate_threshold:
            exit_code = EXIT_FAILURE_RATE
        else:
            exit_code = EXIT_OK
        if bound_violations:
            logger.warning(f"{bound_violations} bound violation(s) in {config.experiment.value}")

        summary = {
            "experiment": config.experiment.value,
            "seed": config.seed,
            "n_realizations": config.n_realizations,
            "n_records": len(records),
            "n_failures": len(failures),
            "failure_rate": failure_rate,
            "failures_by_reason": dict(sorted(failures_by_reason.items())),
            "failures": [asdict(f) for f in failures],
            "bound_violations": bound_violations,
            "invariant_violations": invariant_violations,
            "ratio": _ratio_stats(records),
            "generated_at": current_timestamp(),
        }
        header = CSV_HEADERS[config.experiment]
        rows = [record_row(r, header) for r in records]
        return RunResult(config, header, rows, records, failures, summary, exit_code)


async def run_experiment(config: RunConfig, jobs: int = 1,
                         failure_rate_threshold: float = 0.01) -> RunResult:
    return await ExperimentRunner(config, jobs, failure_rate_threshold).run()


# =============================================================================
# OUTPUT
# =============================================================================

def default_output_path(config: RunConfig) -> Path:
    if config.output_path:
        return Path(config.output_path)
    suffix = ".json" if config.experiment is Experiment.SINGLE else ".csv"
    return Path("results") / f"{config.experiment.value}{suffix}"


def summary_path(output: Path) -> Path:
    return output.with_suffix(".summary.json")


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, indent=2)
        f.write("\n")


def write_outputs(result: RunResult, output: Optional[Path] = None) -> List[Path]:
    """Write the CSV (or JSON report) and the summary; returns the written paths."""
    output = output or default_output_path(result.config)
    written = []
    if result.config.experiment is Experiment.SINGLE:
        write_json(output, {**result.report, "summary": result.summary})
        return [output]
    write_csv(output, result.header, result.rows)
    written.append(output)
    summary = {**result.summary, "config": result.config.to_dict()}
    write_json(summary_path(output), summary)
    written.append(summary_path(output))
    logger.info(f"Wrote {len(result.rows)} rows to {output}")
    return written
