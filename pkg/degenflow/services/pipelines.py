import logging
import platform
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pydantic
import scipy
from pydantic import BaseModel

from degenflow import __version__
from degenflow.config import settings
from degenflow.errors import DegenflowError, InternalError
from degenflow.models import (
    ConditionSummary,
    ErrorResponse,
    ExperimentConfig,
    ExperimentKind,
    JumpScanReport,
    RunManifest,
)
from degenflow.services.classifier import classify_boundary
from degenflow.services.coefficients import (
    CoefficientSet,
    build_coefficients,
    build_initial_values,
    check_nonnegative,
)
from degenflow.services.crocco import crocco_report
from degenflow.services.problem import validate_conditions
from degenflow.services.solver import (
    Field,
    Trajectory,
    solve,
    stable_dt,
    sup_norm,
    sup_norm_monitor,
    viscosity_sweep,
)
from degenflow.services.verify import (
    comparison_report,
    default_comparison_lambdas,
    entropy_report,
    jump_degeneracy_scan,
    l1_contraction_report,
)
from degenflow.utils.geometry import Grid, build_grid
from degenflow.utils.reports import emit_report, run_id_for, write_csv, write_error, write_json, write_manifest

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[float], None]

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


@dataclass
class RunResult:
    manifest: RunManifest
    out_dir: Path

    @property
    def exit_status(self) -> int:
        return self.manifest.exit_status


@dataclass
class StageOutput:
    reports: List[BaseModel]
    verdicts: Dict[str, bool]
    extra_files: List[str]


class _Stopwatch:
    def __init__(self):
        self.timings: Dict[str, float] = {}

    def run(self, name: str, func, *args, **kwargs):
        start = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            self.timings[name] = round(time.perf_counter() - start, 6)


def _versions() -> Dict[str, str]:
    return {
        "degenflow": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


def _setup(config: ExperimentConfig) -> Tuple[Grid, CoefficientSet, Field]:
    grid = build_grid(config.domain, config.counts)
    coeffs = build_coefficients(config.coefficients, config.domain, T=config.solver.T)
    u0 = Field(grid, build_initial_values(config.initial, grid))
    if coeffs.u_range is None:
        bound = sup_norm(u0.values, grid)
        if config.initial_v is not None:
            bound = max(bound, sup_norm(build_initial_values(config.initial_v, grid, "initial_v"), grid))
        coeffs = coeffs.with_u_range(-bound, bound)
        check_nonnegative(coeffs, config.solver.T, points=grid.points[grid.inside])
    return grid, coeffs, u0


def _scaled(progress: Optional[ProgressCallback], start: float, span: float) -> Optional[ProgressCallback]:
    if progress is None:
        return None
    return lambda fraction: progress(start + span * fraction)


def _solution_files(traj: Trajectory, out_dir: Path) -> List[str]:
    grid = traj.grid
    final = traj.final
    columns = [f"x{i}" for i in range(grid.dimension)] + ["u"]
    rows = [(*grid.points[tuple(index)].tolist(), float(final.values[tuple(index)]))
            for index in np.argwhere(grid.inside)]
    diagnostics = traj.diagnostics
    names = ("time", "sup_norm", "total_variation", "energy_density", "energy")
    return [
        write_csv(out_dir, "solution.csv", columns, rows),
        write_csv(out_dir, "diagnostics.csv", names, zip(*(diagnostics[name] for name in names))),
    ]


def _run_solve(config: ExperimentConfig, out_dir: Path, clock: _Stopwatch, progress) -> StageOutput:
    grid, coeffs, u0 = clock.run("setup", _setup, config)
    traj = clock.run("solve", solve, u0, coeffs, config.solver, progress=progress)
    report = sup_norm_monitor(traj)
    verdicts = {"generalized_bound": report.generalized_bound_holds}
    if report.strict_bound_applicable:
        verdicts["strict_bound"] = bool(report.strict_bound_holds)
    return StageOutput([report], verdicts, _solution_files(traj, out_dir))


def _run_classify(config: ExperimentConfig, out_dir: Path, clock: _Stopwatch, progress) -> StageOutput:
    grid, coeffs, _ = clock.run("setup", _setup, config)
    verification = config.verification
    T = config.solver.T
    times = np.linspace(0.0, T, verification.time_samples).tolist() if T > 0 else [0.0]
    classification = clock.run(
        "classify", classify_boundary, grid, coeffs, t=0.0, tol=verification.classifier_tol,
        state_samples=verification.state_samples, time_samples=times,
    )
    summary = ConditionSummary(conditions=clock.run(
        "conditions", validate_conditions, coeffs, grid, T=T if T > 0 else 1.0,
        tol=verification.classifier_tol, state_samples=verification.state_samples, seed=config.seed,
    ))
    return StageOutput([classification, summary], {"conditions": summary.all_passed}, [])


def _run_entropy(config: ExperimentConfig, out_dir: Path, clock: _Stopwatch, progress) -> StageOutput:
    grid, coeffs, u0 = clock.run("setup", _setup, config)
    traj = clock.run("solve", solve, u0, coeffs, config.solver, progress=_scaled(progress, 0.0, 0.7))
    report = clock.run("entropy", entropy_report, traj, coeffs, config.verification)
    final = traj.final
    threshold = config.verification.gradient_threshold
    jumps = JumpScanReport(t=final.t, gradient_threshold=threshold,
                           flags=jump_degeneracy_scan(final, coeffs, threshold))
    return StageOutput([report, jumps], {"entropy": report.passed}, [])


def _run_stability(config: ExperimentConfig, out_dir: Path, clock: _Stopwatch, progress) -> StageOutput:
    grid, coeffs, u0 = clock.run("setup", _setup, config)
    v0 = Field(grid, build_initial_values(config.initial_v, grid, "initial_v"))
    solver_config = config.solver
    if solver_config.dt is None and solver_config.T > 0:
        # both runs must share their snapshot times
        dt = min(stable_dt(u0, coeffs, solver_config), stable_dt(v0, coeffs, solver_config))
        solver_config = solver_config.model_copy(update={"dt": dt})
    traj_u = clock.run("solve_u", solve, u0, coeffs, solver_config, progress=_scaled(progress, 0.0, 0.45))
    traj_v = clock.run("solve_v", solve, v0, coeffs, solver_config, progress=_scaled(progress, 0.45, 0.45))
    verification = config.verification
    stability = l1_contraction_report(traj_u, traj_v, verification.declared_c)
    reports: List[BaseModel] = [stability]
    lambdas = verification.lambda_values or default_comparison_lambdas(grid)
    if lambdas and solver_config.T > 0:
        reports.append(clock.run("comparison", comparison_report, traj_u, traj_v, coeffs, lambdas,
                                 verification.time_window))
    return StageOutput(reports, {"stability": stability.passed}, [])


def _run_sweep(config: ExperimentConfig, out_dir: Path, clock: _Stopwatch, progress) -> StageOutput:
    _, coeffs, u0 = clock.run("setup", _setup, config)
    report = clock.run("sweep", viscosity_sweep, u0, coeffs, config.solver, config.epsilons, progress=progress)
    return StageOutput([report], {"sweep": report.passed}, [])


def _run_crocco(config: ExperimentConfig, out_dir: Path, clock: _Stopwatch, progress) -> StageOutput:
    report = clock.run("crocco", crocco_report, config.crocco)
    return StageOutput([report], {"crocco": report.passed}, [])


PIPELINES = {
    ExperimentKind.SOLVE: _run_solve,
    ExperimentKind.CLASSIFY: _run_classify,
    ExperimentKind.ENTROPY_CHECK: _run_entropy,
    ExperimentKind.STABILITY_PAIR: _run_stability,
    ExperimentKind.VISCOSITY_SWEEP: _run_sweep,
    ExperimentKind.CROCCO_DEMO: _run_crocco,
}


def resolve_out_dir(config: ExperimentConfig, out_dir=None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    if config.output_dir:
        return Path(config.output_dir)
    return Path(settings.RESULTS_DIR) / run_id_for(config)


def run_experiment(config: ExperimentConfig, out_dir=None, progress: Optional[ProgressCallback] = None) -> RunResult:
    """Run the pipeline for config.kind and write manifest, reports and series

    Exit status: 0 when every verdict passes, 1 when one fails, 2 on error
    (an error.json is written next to the manifest).
    """
    out_dir = resolve_out_dir(config, out_dir)
    run_id = run_id_for(config)
    clock = _Stopwatch()
    manifest = RunManifest(
        run_id=run_id,
        kind=config.kind.value,
        config=config.model_dump(mode="json"),
        versions=_versions(),
    )
    logger.info(f"Run {run_id}: {config.kind.value} -> {out_dir}")
    files: List[str] = []

    try:
        files.append(write_json(out_dir, "config.json", manifest.config))
        output = PIPELINES[config.kind](config, out_dir, clock, progress)
        files += output.extra_files
        files += emit_report(output.reports, out_dir)
        manifest.files = files
        manifest.verdicts = output.verdicts
        manifest.passed = all(output.verdicts.values())
        manifest.exit_status = EXIT_PASSED if manifest.passed else EXIT_FAILED
    except Exception as exc:
        if isinstance(exc, DegenflowError):
            error = exc
            logger.error(f"Run {run_id} failed [{error.error_code}]: {error.detail}")
        else:
            error = InternalError.from_exception(exc)
            logger.exception(f"Run {run_id} failed with an unexpected {type(exc).__name__}")
        error_file = write_error(ErrorResponse(**error.to_dict()), out_dir)
        manifest.files = files + ([error_file] if error_file else [])
        manifest.passed = False
        manifest.exit_status = EXIT_ERROR

    manifest.timings = clock.timings
    try:
        write_manifest(manifest, out_dir)
    except DegenflowError as e:
        logger.error(f"Could not write the manifest for run {run_id}: {e.detail}")
        manifest.exit_status = EXIT_ERROR
    if progress is not None:
        progress(1.0)
    logger.info(f"Run {run_id} finished with exit status {manifest.exit_status} (verdicts {manifest.verdicts})")
    return RunResult(manifest=manifest, out_dir=out_dir)
