"""Command line driver for the elastic scattering experiments."""

from __future__ import annotations

import argparse
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from ..utils.assembly import assemble_system, build_context, dump_system
from ..utils.fields import (
    FarField,
    IncidenceKind,
    IncidentField,
    error_norms,
    farfield_from_densities,
    forward_amplitude,
    pointsource_reference,
    structure_defect,
)
from ..utils.geometry import get_surface
from ..utils.logger import (
    ConvergenceLogger,
    ReferenceCache,
    format_convergence_table,
    rows_to_frame,
    write_coefficients_csv,
    write_farfield_csv,
)
from ..utils.solver import HarmonicCoefficients, solve
from .config_loader import (
    LOG_LEVEL_ENV,
    MODES,
    RunConfig,
    RunConfigError,
    adhoc_run_config,
    load_run_config,
)

LOGGER = logging.getLogger(__name__)

STRUCTURE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SolveOutcome:
    """Densities and far field of one solve, with the two timings."""

    n: int
    coeffs: HarmonicCoefficients
    farfield: FarField
    t_coe: float
    t_sol: float


@dataclass
class RunResult:
    name: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    artifacts: List[Path] = field(default_factory=list)
    table: str = ""


def configure_logging(verbose: bool = False) -> None:
    load_dotenv()
    level = logging.DEBUG if verbose else logging.INFO
    override = os.getenv(LOG_LEVEL_ENV)
    if override and not verbose:
        level = logging.getLevelName(override.upper())
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
    )


def make_incident(config: RunConfig, kind: Optional[IncidenceKind] = None) -> IncidentField:
    return IncidentField(
        kind=kind or config.incidence,
        medium=config.medium,
        direction=config.direction,
        polarization=config.polarization,
        source=config.source,
        amplitude=config.amplitude,
    )


def solve_once(config: RunConfig, n: int, incident: IncidentField) -> SolveOutcome:
    """Assemble, solve and synthesise the far field at degree n."""

    surface = get_surface(config.geometry)
    medium = config.medium

    start = time.perf_counter()
    context = build_context(surface, medium, n, config.nprime_for(n), threads=config.threads)
    system = assemble_system(context, incident)
    t_coe = time.perf_counter() - start
    LOGGER.info("Assembled %d x %d system for %s at n=%d in %.2fs", system.dimension, system.dimension, config.geometry, n, t_coe)

    if config.dump_system:
        dump_system(system, config.output_path / f"system_n{n}.bin")

    coeffs = solve(system)
    farfield = farfield_from_densities(coeffs, surface, medium, config.obs_grid)

    radial, tangential = structure_defect(farfield)
    scale = max(float(np.max(np.abs(farfield.total), initial=0.0)), 1.0)
    if radial > STRUCTURE_TOLERANCE * scale or tangential > STRUCTURE_TOLERANCE * scale:
        LOGGER.warning(
            "Far field violates its structure at n=%d: |x x v_p| = %.2e, |x . v_s| = %.2e", n, radial, tangential
        )
    return SolveOutcome(n=n, coeffs=coeffs, farfield=farfield, t_coe=t_coe, t_sol=coeffs.solve_seconds)


def _row(config: RunConfig, outcome: SolveOutcome, **values: Any) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        "geometry": config.geometry,
        "omega": config.omega,
        "n": outcome.n,
        "t_coe": outcome.t_coe,
        "t_sol": outcome.t_sol,
    }
    row.update(values)
    return row


def _forward_columns(config: RunConfig, outcome: SolveOutcome) -> Dict[str, float]:
    forward = farfield_from_densities(
        outcome.coeffs, get_surface(config.geometry), config.medium, np.asarray([config.direction])
    )
    amplitude = forward_amplitude(forward, config.polarization)
    return {"vpw_dp_re": amplitude.real, "vpw_dp_im": amplitude.imag}


def _reference_farfield(config: RunConfig, incident: IncidentField) -> FarField:
    cache = ReferenceCache(Path(config.output_dir) / "cache")
    label = f"{config.geometry}-{incident.kind.value}"

    def compute() -> FarField:
        LOGGER.info("Computing reference far field for %s at n*=%d", config.geometry, config.reference_n)
        return solve_once(config, config.reference_n, incident).farfield

    return cache.get_or_compute(
        label, config.omega, config.reference_n, compute, expected_size=config.obs_grid.n_theta * config.obs_grid.n_phi
    )


def _run_solve(config: RunConfig, result: RunResult) -> None:
    incident = make_incident(config)
    for n in config.degrees:
        outcome = solve_once(config, n, incident)
        result.artifacts.append(write_farfield_csv(outcome.farfield, config.output_path / f"farfield_n{n}.csv"))
        result.artifacts.append(write_coefficients_csv(outcome.coeffs, config.output_path / f"coefficients_n{n}.csv"))
        extra = {} if incident.kind is IncidenceKind.POINT_SOURCE else _forward_columns(config, outcome)
        result.rows.append(_row(config, outcome, **extra))


def _run_pointsource(config: RunConfig, result: RunResult) -> None:
    incident = make_incident(config, IncidenceKind.POINT_SOURCE)
    reference = pointsource_reference(incident, config.obs_grid)
    for n in config.degrees:
        outcome = solve_once(config, n, incident)
        err_ps = error_norms(outcome.farfield, reference)
        LOGGER.info("%s, omega=%.4g, n=%d: ||eps_ps|| = %.4e", config.geometry, config.omega, n, err_ps)
        result.rows.append(_row(config, outcome, err_ps=err_ps))


def _run_selfconvergence(config: RunConfig, result: RunResult) -> None:
    incident = make_incident(config)
    reference = _reference_farfield(config, incident)
    for n in config.degrees:
        outcome = solve_once(config, n, incident)
        err_pw = error_norms(outcome.farfield, reference)
        LOGGER.info("%s, omega=%.4g, n=%d: ||eps_pw|| = %.4e", config.geometry, config.omega, n, err_pw)
        result.rows.append(_row(config, outcome, err_pw=err_pw, **_forward_columns(config, outcome)))


def _run_table(config: RunConfig, result: RunResult) -> None:
    point = make_incident(config, IncidenceKind.POINT_SOURCE)
    plane = make_incident(config) if config.incidence is not IncidenceKind.POINT_SOURCE else make_incident(
        config, IncidenceKind.PLANE_ELASTIC
    )
    exact = pointsource_reference(point, config.obs_grid)
    reference = _reference_farfield(config, plane)
    for n in config.degrees:
        ps = solve_once(config, n, point)
        pw = solve_once(config, n, plane)
        result.rows.append(
            _row(
                config,
                pw,
                err_ps=error_norms(ps.farfield, exact),
                err_pw=error_norms(pw.farfield, reference),
                **_forward_columns(config, pw),
            )
        )


RUNNERS = {
    "solve": _run_solve,
    "pointsource-test": _run_pointsource,
    "planewave-selfconvergence": _run_selfconvergence,
    "convergence-table": _run_table,
}


def emit_convergence_table(rows: Sequence[Dict[str, Any]], path: str | Path) -> str:
    """Write the rows as CSV at ``path`` and return the text table."""

    table = format_convergence_table(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(rows, key=lambda r: int(r["n"]))
    rows_to_frame(ordered).to_csv(path, index=False)
    path.with_suffix(".txt").write_text(table + "\n", encoding="utf-8")
    return table


def run(config: RunConfig) -> RunResult:
    """Run one experiment and write its artifacts under ``<output_dir>/<name>``."""

    print(f"\n🚀 Running '{config.name}' ({config.mode}, {config.geometry}, n = {list(config.degrees)})")
    result = RunResult(name=config.name)
    RUNNERS[config.mode](config, result)

    history = ConvergenceLogger(Path(config.output_dir) / "convergence.csv")
    for row in result.rows:
        history.log_result(row)

    table_path = config.output_path / "convergence.csv"
    result.table = emit_convergence_table(result.rows, table_path)
    result.artifacts.extend([table_path, table_path.with_suffix(".txt")])
    print(result.table)
    print(f"✅ Finished '{config.name}'\n")
    return result


def parse_args(argv: Iterable[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", type=str, default=None, help="Path to a YAML configuration file. Defaults to run_config.yaml.")
    parser.add_argument("--experiment", type=str, default=None, help="Run only this named experiment of the file.")
    parser.add_argument("--geometry", type=str, default=None, help="Run a single ad-hoc experiment on this surface.")
    parser.add_argument("--omega", type=float, default=None, help="Angular frequency.")
    parser.add_argument("--lambda", dest="lam", type=float, default=None, help="First Lame constant.")
    parser.add_argument("--mu", type=float, default=None, help="Shear modulus.")
    parser.add_argument("--n", type=int, nargs="+", default=None, help="Ansatz degree(s).")
    parser.add_argument("--nprime", type=int, default=None, help="Inner quadrature degree (default 2n+1).")
    parser.add_argument("--mode", choices=MODES, default=None)
    parser.add_argument("--incidence", choices=[kind.value for kind in IncidenceKind], default=None)
    parser.add_argument("--direction", type=float, nargs=3, default=None, metavar=("D1", "D2", "D3"))
    parser.add_argument("--polarization", type=float, nargs=3, default=None, metavar=("P1", "P2", "P3"))
    parser.add_argument("--source", type=float, nargs=3, default=None, metavar=("Y1", "Y2", "Y3"))
    parser.add_argument("--amplitude", type=float, default=None, help="Scale of the incident field.")
    parser.add_argument("--obs-grid", type=str, default=None, help="Observation grid as THETAxPHI, e.g. 26x50.")
    parser.add_argument("--out", type=str, default=None, help="Output directory.")
    parser.add_argument("--threads", type=int, default=None, help="Threads used by the assembly.")
    parser.add_argument("--reference-n", type=int, default=None, help="Degree n* of the self-convergence reference.")
    parser.add_argument("--dump-system", action="store_true", default=None, help="Write A and b in binary form.")
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Enable verbose logging output.",
    )
    return parser.parse_args(argv)


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "geometry": args.geometry,
        "omega": args.omega,
        "lambda": args.lam,
        "mu": args.mu,
        "n": args.n,
        "nprime": args.nprime,
        "mode": args.mode,
        "incidence": args.incidence,
        "direction": args.direction,
        "polarization": args.polarization,
        "source": args.source,
        "amplitude": args.amplitude,
        "obs_grid": args.obs_grid,
        "output_dir": args.out,
        "threads": args.threads,
        "reference_n": args.reference_n,
        "dump_system": args.dump_system,
    }


def main(argv: Iterable[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(verbose=args.verbose)

    overrides = overrides_from_args(args)
    try:
        if args.geometry:
            configs = [adhoc_run_config(overrides, args.config, name=args.experiment)]
        else:
            configs = load_run_config(args.config, overrides, only=args.experiment)
    except RunConfigError as exc:
        LOGGER.error("Invalid configuration: %s", exc)
        return 2

    failures = 0
    for config in configs:
        try:
            run(config)
        except Exception as exc:
            failures += 1
            LOGGER.exception("Experiment '%s' failed: %s", config.name, exc)

    for output_dir in sorted({str(config.output_dir) for config in configs}):
        summary = ConvergenceLogger(Path(output_dir) / "convergence.csv").get_summary()
        print(
            f"📊 {output_dir}: {summary['rows']} rows logged for {', '.join(summary['geometries']) or '-'} "
            f"(best ||err_ps|| {summary['best_err_ps']:.4e}, best ||err_pw|| {summary['best_err_pw']:.4e})"
        )

    if failures:
        LOGGER.error("%d of %d experiments failed", failures, len(configs))
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    raise SystemExit(main())
