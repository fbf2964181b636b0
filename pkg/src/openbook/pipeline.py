import hashlib
import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

from openbook.config import RunConfig
from openbook.data_models import (
    AsymptoticSummary,
    ConditionCheck,
    EnergySummary,
    FoliationReport,
    IndexRow,
    ProfileReport,
    ResidualSummary,
    SHSReport,
    SmallPeriodReport,
)
from openbook.errors import ConfigError, OpenBookError
from openbook.geometry import ManifoldModel, build_manifold, small_period_report, verify_shs
from openbook.holomorphic import (
    PageCurve,
    assemble_page_curve,
    export_csv,
    foliation_sample,
    omega_energy,
    richardson_ratio,
)
from openbook.indices import CurveTopology, fredholm_index, index_table, normal_chern, page_curve_topology
from openbook.plotting import plot_foliation, plot_profile
from openbook.profiles import Profile, build_profile, perturb_profile, verify_profile
from openbook.utils import worker_count

logger = logging.getLogger(__name__)

RICHARDSON_RANGE = (3.5, 4.5)
EXPONENT_RTOL = 1e-2
A_SLOPE_RTOL = 1e-3
CORE_ENERGY_RTOL = 1e-5
FLAT_ENERGY_TOL = 1e-6
STAGES = ("verify", "solve", "index", "run")


@dataclass
class RunReport:
    """Outcome of a pipeline run.

    Sub-reports a verb does not compute stay ``None`` and do not enter :attr:`passed`.
    ``timings`` and ``workers`` are excluded from :meth:`to_dict` unless asked for, so
    the serialized report of a config is reproducible byte for byte.
    """

    name: str
    stage: str
    config: Dict[str, Any]
    profile: Optional[ProfileReport] = None
    shs: Dict[str, SHSReport] = field(default_factory=dict)
    small_periods: Optional[SmallPeriodReport] = None
    asymptotics: Optional[AsymptoticSummary] = None
    residuals: Optional[ResidualSummary] = None
    energy: Optional[EnergySummary] = None
    indices: List[IndexRow] = field(default_factory=list)
    topology: Optional[CurveTopology] = None
    fredholm_index: Optional[int] = None
    foliation: Optional[FoliationReport] = None
    checks: List[ConditionCheck] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    workers: int = 1

    def sub_reports(self) -> Dict[str, bool]:
        """Pass flag of every computed sub-report."""
        flags: Dict[str, bool] = {}
        if self.profile is not None:
            flags["profile"] = self.profile.passed
        for key, report in self.shs.items():
            flags[f"shs[{key}]"] = report.passed
        if self.small_periods is not None:
            flags["small_periods"] = self.small_periods.passed
        if self.foliation is not None:
            flags["foliation"] = self.foliation.passed
        flags["checks"] = all(c.passed for c in self.checks)
        return flags

    @property
    def passed(self) -> bool:
        return all(self.sub_reports().values())

    def failures(self) -> List[str]:
        return [name for name, ok in self.sub_reports().items() if not ok] + [
            c.name for c in self.checks if not c.passed
        ]

    def to_dict(self, include_timings: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "name": self.name,
            "stage": self.stage,
            "passed": self.passed,
            "sub_reports": self.sub_reports(),
            "config": self.config,
            "profile": self.profile.to_dict() if self.profile else None,
            "shs": {key: report.to_dict() for key, report in self.shs.items()},
            "small_periods": self.small_periods.to_dict() if self.small_periods else None,
            "asymptotics": self.asymptotics.to_dict() if self.asymptotics else None,
            "residuals": self.residuals.to_dict() if self.residuals else None,
            "energy": self.energy.to_dict() if self.energy else None,
            "indices": [row.to_dict() for row in self.indices],
            "topology": self.topology.to_dict() if self.topology else None,
            "fredholm_index": self.fredholm_index,
            "foliation": self.foliation.to_dict() if self.foliation else None,
            "checks": [c.to_dict() for c in self.checks],
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        if include_timings:
            data["timings"] = dict(self.timings)
            data["workers"] = self.workers
        return data


def to_json(data: Dict[str, Any], indent: int = 2) -> str:
    """Serialize a report dictionary with sorted keys and a trailing newline.

    Examples:
    - Key order does not depend on insertion order
        ```python

        >>> to_json({"b": 1, "a": 2}, indent=0) == to_json({"a": 2, "b": 1}, indent=0)
        True

        ```
    """
    return json.dumps(data, indent=indent, sort_keys=True, allow_nan=False) + "\n"


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@contextmanager
def _stage(name: str, timings: Dict[str, float]) -> Iterator[None]:
    """Time a stage and prefix library errors with its name."""
    logger.info("stage %s: start", name)
    start = time.perf_counter()
    try:
        yield
    except ConfigError:
        raise
    except OpenBookError as exc:
        raise type(exc)(f"{name}: {exc}") from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start
        logger.info("stage %s: %.3fs", name, timings[name])


def _check(report: RunReport, name: str, passed: bool, margin: float, witness: Optional[float] = None) -> None:
    check = ConditionCheck(name=name, passed=bool(passed), margin=float(margin), witness=witness)
    if not check.passed:
        logger.warning("run condition failed: %s (margin %s)", name, margin)
    report.checks.append(check)


def cover_index_check(rows: List[IndexRow]) -> ConditionCheck:
    """``mu_CZ = 1`` on every row of an index table; the margin is minus the number of offending rows."""
    off = [row for row in rows if row.mu_cz != 1]
    for row in off:
        logger.warning("binding %s, cover %s: mu_CZ = %s", row.binding, row.cover, row.mu_cz)
    return ConditionCheck(
        name="mu_CZ = 1 for every cover k <= k_max", passed=bool(rows) and not off, margin=-float(len(off))
    )


class _Run:
    """Shared state of one pipeline invocation."""

    def __init__(self, config: RunConfig, stage: str, workers: Optional[int]):
        self.config = config
        self.workers = workers if workers is not None else worker_count()
        self.report = RunReport(
            name=config.name, stage=stage, config=config.model_dump(mode="json"), workers=self.workers
        )
        self.timings = self.report.timings
        with _stage("profiles", self.timings):
            self.profile: Profile = build_profile(config.profile.params())
        with _stage("geometry", self.timings):
            self.manifold: ManifoldModel = build_manifold(config.open_book())
        self.curve: Optional[PageCurve] = None

    def verify(self) -> None:
        cfg = self.config
        with _stage("profiles", self.timings):
            self.report.profile = verify_profile(self.profile, cfg.grid.profile_grid)
            if cfg.epsilon > 0.0:
                perturb_profile(self.profile, cfg.epsilon)
        with _stage("geometry", self.timings):
            for eps in sorted({0.0, cfg.epsilon}):
                self.report.shs[f"eps={eps:g}"] = verify_shs(
                    self.manifold,
                    self.profile,
                    eps,
                    resolution=cfg.grid.shs_resolution,
                    step=cfg.grid.fd_step,
                    tolerances=cfg.grid.tolerances,
                    workers=self.workers,
                )
            if cfg.small_periods:
                self.report.small_periods = small_period_report(
                    self.manifold, self.profile, resolution=cfg.grid.shs_resolution
                )

    def page_curve(self) -> PageCurve:
        integ = self.config.integrator
        return assemble_page_curve(
            self.manifold, self.profile, 0.0, 0.0, s_max=integ.s_max, tol=integ.tol, rho_stop=integ.rho_stop
        )

    def solve(self) -> None:
        cfg = self.config
        report = self.report
        with _stage("holomorphic", self.timings):
            self.curve = self.page_curve()
            hc = self.curve.half_cylinders[0]
            report.asymptotics = hc.asymptotic
            report.residuals = richardson_ratio(
                self.profile, s_end=cfg.grid.richardson_s_end, step=cfg.grid.richardson_step
            )
            report.energy = omega_energy(self.curve, self.manifold, self.profile)
        fit = report.asymptotics
        _check(
            report,
            f"tail exponent within {EXPONENT_RTOL:g} relative of 2 pi |kappa|",
            fit.exponent_error <= EXPONENT_RTOL * abs(fit.expected_exponent),
            EXPONENT_RTOL * abs(fit.expected_exponent) - fit.exponent_error,
        )
        _check(
            report,
            f"a slope within {A_SLOPE_RTOL:g} relative of c",
            fit.a_slope_relative_error <= A_SLOPE_RTOL,
            A_SLOPE_RTOL - fit.a_slope_relative_error,
        )
        ratio = report.residuals.ratio
        lo, hi = RICHARDSON_RANGE
        _check(
            report,
            f"Richardson ratio in [{lo}, {hi}]",
            math.isfinite(ratio) and lo <= ratio <= hi,
            min(ratio - lo, hi - ratio) if math.isfinite(ratio) else -math.inf,
        )
        energy = report.energy
        _check(
            report,
            "flat energy matches quadrature",
            abs(energy.flat - energy.flat_quadrature) <= FLAT_ENERGY_TOL,
            FLAT_ENERGY_TOL - abs(energy.flat - energy.flat_quadrature),
        )
        _check(
            report,
            f"integrated core energy within {CORE_ENERGY_RTOL:g} relative of f(0) - f(1 - delta_prime)",
            energy.core_error <= CORE_ENERGY_RTOL,
            CORE_ENERGY_RTOL - energy.core_error,
        )
        _check(report, "energy finite and positive", math.isfinite(energy.total) and energy.total > 0.0, energy.total)

    def index(self) -> None:
        cfg = self.config
        report = self.report
        with _stage("indices", self.timings):
            report.indices = index_table(
                self.profile, self.manifold.spec.n_bindings, k_max=cfg.index.k_max, oracle_up_to=cfg.index.oracle_up_to
            )
            curve = self.curve or self.page_curve()
            report.topology = page_curve_topology(curve, self.profile)
            report.fredholm_index = fredholm_index(report.topology)
            chern = normal_chern(report.fredholm_index, report.topology.genus, report.topology.gamma0)
        disagreements = [row for row in report.indices if row.oracle is not None and row.oracle != row.mu_cz]
        _check(report, "crossing-form oracle agrees", not disagreements, -float(len(disagreements)))
        report.checks.append(cover_index_check(report.indices))
        expected = 2 - 2 * report.topology.genus
        _check(report, "ind(u) = 2 - 2g", report.fredholm_index == expected, float(expected - report.fredholm_index))
        _check(report, "c1(N_u) = 0", chern == 0, -float(abs(chern)))

    def foliate(self) -> List[PageCurve]:
        cfg = self.config
        with _stage("foliation", self.timings):
            leaves, self.report.foliation = foliation_sample(
                self.manifold,
                self.profile,
                n_pages=cfg.foliation.n_pages,
                n_points=cfg.foliation.n_points,
                seed=cfg.foliation.seed,
                s_max=cfg.integrator.s_max,
                tol=cfg.integrator.tol,
                workers=self.workers,
                rho_stop=cfg.integrator.rho_stop,
            )
        return leaves

    def write(self, output_dir: Path, leaves: Optional[List[PageCurve]] = None) -> Path:
        cfg = self.config.output
        output_dir.mkdir(parents=True, exist_ok=True)
        written: List[Path] = []
        with _stage("artifacts", self.timings):
            if cfg.csv and self.curve is not None:
                for hc in self.curve.half_cylinders:
                    written.append(export_csv(hc, output_dir / f"half_cylinder_binding{hc.binding}.csv"))
            if cfg.svg:
                written.append(plot_profile(self.profile, output_dir / "profile.svg", eps=self.config.epsilon))
                if leaves:
                    written.append(plot_foliation(leaves, output_dir / "foliation.svg"))
            self.report.artifacts = {path.name: sha256_file(path) for path in written}
            report_path = output_dir / "report.json"
            report_path.write_text(to_json(self.report.to_dict()), encoding="utf-8")
            (output_dir / "timings.json").write_text(
                to_json({"timings": self.timings, "workers": self.workers}), encoding="utf-8"
            )
        logger.info("run %s written to %s (passed=%s)", self.report.name, output_dir, self.report.passed)
        return report_path


def run_pipeline(
    config: RunConfig,
    output_dir: Optional[Union[str, Path]] = None,
    stage: str = "run",
    workers: Optional[int] = None,
) -> RunReport:
    """Run the pipeline up to ``stage`` and write the run directory.

    The directory holds ``report.json`` (deterministic, with the sha256 of every other
    artifact), ``timings.json``, one CSV per solved half-cylinder and the SVG plots.

    Args:
        config: Validated run configuration.
        output_dir: Run directory; defaults to ``<config.output.directory>/<config.name>``.
        stage: ``"verify"`` (profile and SHS audits), ``"solve"`` (adds half-cylinders,
            residuals and energy), ``"index"`` (adds indices and topology) or ``"run"``
            (everything, including the foliation sample).
        workers: Thread-pool size; defaults to ``OPENBOOK_WORKERS``.

    Returns:
        RunReport: Passes iff every computed sub-report and run check passes.

    Raises:
        ConfigError: For an unknown stage.
        OpenBookError: Construction or integration failures, prefixed with the stage name.
    """
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; choose one of {list(STAGES)}", fields=["stage"])
    run = _Run(config, stage, workers)
    leaves: Optional[List[PageCurve]] = None
    if stage in ("verify", "run"):
        run.verify()
    if stage in ("solve", "run"):
        run.solve()
    if stage in ("index", "run"):
        run.index()
    if stage == "run":
        leaves = run.foliate()
    target = Path(output_dir) if output_dir is not None else Path(config.output.directory) / config.name
    run.write(target, leaves)
    if not run.report.passed:
        logger.warning("run %s failed: %s", config.name, ", ".join(run.report.failures()))
    return run.report
