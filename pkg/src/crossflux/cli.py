"""
Command-line entry point.

    crossflux <analyze|branches|limit|compare|evolve|verify> [--config PATH] [--out DIR] [--threads K] [-v]

Every command writes the resolved configuration and a metadata file into
its output directory next to its own artifacts.
"""

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, with_overrides
from .continuation import (
    Termination,
    estimate_onset,
    node_count,
    stability_index,
    trace_mode_branch,
)
from .enums import BranchSide, CheckGroup, ExitCode
from .errors import ConfigError, CrossfluxError, NumericalError
from .evolve import evolve, perturbed_constant
from .limit import branch_distance, ratio_defect_profile, trace_scalar_branch
from .model import ModelParams, constant_state
from .report import BifurcationDiagram, Panel, branch_series, write_json, write_rows_csv, write_state_csv
from .report.svg import PALETTE, Series
from .report.tables import write_branch_csv
from .solver import newton_solve
from .spectral import (
    RegionMap,
    critical_d2,
    discrete_critical_d2,
    limit_coefficients,
    mode_table,
    ray_critical_values,
    region_map,
    region_membership,
    require_scalar_field,
)
from .types import Branch, Grid, StateVector
from .verify import VerificationReport, run_verification

logger = logging.getLogger(__name__)

COMMANDS = ("analyze", "branches", "limit", "compare", "evolve", "verify")
MODE_COLUMNS = ("j", "lambda_j", "in_region", "d_star", "discrete_d_star", "kappa", "kappa_star",
                "threshold", "d_star_limit", "regime")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
SIDES = (BranchSide.UPPER, BranchSide.LOWER)


# --- plumbing ---


def _prepare_output(config: ExperimentConfig, command: str) -> Path:
    """Create the output directory and echo the resolved configuration into it."""
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.ini").write_text(config.to_ini(), encoding="utf-8")
    write_json({
        "tool": "crossflux",
        "version": __version__,
        "command": command,
        "measure": config.output.measure,
        "config": config.to_dict(),
    }, out / "metadata.json")
    return out


def _run_jobs(jobs: Sequence[Callable[[], Any]], threads: int) -> List[Union[Any, CrossfluxError]]:
    """
    Run independent jobs on a thread pool.

    Results come back in submission order; a job that raises a CrossfluxError
    yields the exception in its slot instead of aborting the others.
    """

    def guarded(job: Callable[[], Any]) -> Union[Any, CrossfluxError]:
        try:
            return job()
        except CrossfluxError as e:
            return e

    if threads <= 1:
        return [guarded(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(guarded, job) for job in jobs]
        return [future.result() for future in futures]


def _write_branch(branch: Branch, directory: Path, grid: Grid, stride: int) -> Path:
    """Branch CSV plus one state file for every ``stride``-th point."""
    directory.mkdir(parents=True, exist_ok=True)
    path = write_branch_csv(branch, directory / f"{branch.id}.csv")
    states = directory / branch.id
    states.mkdir(exist_ok=True)
    for index in range(0, len(branch), stride):
        write_state_csv(branch.points[index].state, grid, states / f"state-{index:04d}.csv")
    logger.info("Wrote %s (%d points)", path, len(branch))
    return path


def _branch_summary(branch: Branch, estimated_onset: Optional[float]) -> Dict[str, Any]:
    ratios = [p.harnack for p in branch.points if p.harnack is not None]
    return {
        "id": branch.id,
        "j_origin": branch.origin.tag,
        "side": branch.side,
        "points": len(branch),
        "termination": branch.termination,
        "fold_count": branch.fold_count,
        "analytic_onset": branch.analytic_onset,
        "estimated_onset": estimated_onset,
        "d2_range": [float(branch.d2_values().min()), float(branch.d2_values().max())] if len(branch) else None,
        "max_harnack": [max(r[0] for r in ratios), max(r[1] for r in ratios)] if ratios else None,
    }


def _collect(results: Sequence[Any], labels: Sequence[str]) -> List[Branch]:
    branches = []
    for label, result in zip(labels, results):
        if isinstance(result, CrossfluxError):
            logger.warning("Skipping %s: %s", label, result)
        else:
            branches.append(result)
    return branches


# --- commands ---


def _region_diagram(params: ModelParams, j_list: Sequence[int], ray: Tuple[float, float],
                    scales: Sequence[float]) -> Tuple[BifurcationDiagram, RegionMap]:
    """R_j boundaries, the line gamma = A tau* and the sweep ray on the (alpha, beta) plane."""
    beta_max = 1.2 * max([params.beta, ray[1] * max(scales, default=1.0), 1.0])
    regions = region_map(params, j_list, beta_max)
    panel = Panel(title="R_j and gamma = A tau*", x_label="alpha", y_label="beta")
    for index, (j, alphas) in enumerate(sorted(regions.boundaries.items())):
        panel.series.append(Series(label=f"R_{j}", color=PALETTE[index % (len(PALETTE) - 1)],
                                   points=tuple(zip(map(float, alphas), map(float, regions.betas)))))
    panel.series.append(Series(label="gamma = A tau*", color=PALETTE[-1], dashed=True,
                               points=tuple(zip(map(float, regions.threshold_line()), map(float, regions.betas)))))
    ray_points = sorted({0.0, *scales})
    panel.series.append(Series(label="ray", color=PALETTE[-1],
                               points=tuple((s * ray[0], s * ray[1]) for s in ray_points)))
    diagram = BifurcationDiagram([panel], title="regions", note="R_j lies right of its line; dashed: gamma = A tau*")
    return diagram, regions


def cmd_analyze(config: ExperimentConfig, threads: int = 1) -> Path:
    """Spectral table (modes.csv, modes.json) and the region map regions.svg."""
    out = _prepare_output(config, "analyze")
    params = config.params()
    grid = config.make_grid()
    table = mode_table(params, config.continuation.j_max, config.gamma())
    regime = table.regime.name.lower() if table.regime is not None else ""
    rows = []
    for row in table.rows:
        j = int(row["j"])
        rows.append(dict(row, discrete_d_star=discrete_critical_d2(j, params, grid) if row["in_region"] else None,
                         threshold=table.threshold, regime=regime))
    write_rows_csv(rows, MODE_COLUMNS, out / "modes.csv")
    cs = constant_state(params)
    ray = (config.sweep.ray[0], config.sweep.ray[1])
    diagram, regions = _region_diagram(params, config.continuation.j_list, ray, config.sweep.scales)
    diagram.write(out / "regions.svg")
    write_json({
        "modes": rows,
        "bifurcation_modes": [r["j"] for r in rows if r["in_region"]],
        "threshold": table.threshold,
        "certified": table.certified,
        "regime": regime,
        "gamma": str(config.gamma()),
        "gamma_threshold": regions.gamma_threshold,
        "ray_regime": regions.regime_at(*ray).name.lower(),
        "constant_state": dataclasses.asdict(cs),
        "ray": [dataclasses.asdict(p) for p in ray_critical_values(params, ray, config.sweep.scales)],
    }, out / "modes.json")
    logger.info("Wrote spectral table for j <= %d to %s", config.continuation.j_max, out)
    return out


def cmd_branches(config: ExperimentConfig, threads: int = 1) -> Path:
    """
    Trace upper and lower Gamma_j for every configured j.

    Raises:
        NumericalError: If no branch could be traced at all
    """
    out = _prepare_output(config, "branches")
    params = config.params()
    grid = config.make_grid()
    c = config.continuation
    controls, termination = config.step_controls(), config.termination()
    keys = [(j, side) for j in c.j_list for side in SIDES]
    jobs = [
        lambda j=j, side=side: trace_mode_branch(j, side, params, grid, controls, termination,
                                                 amplitude=c.amplitude, delta=c.delta)
        for j, side in keys
    ]
    branches = _collect(_run_jobs(jobs, threads), [f"Gamma_{j} {side.value}" for j, side in keys])
    if not branches:
        raise NumericalError("No branch could be traced for j in " + ", ".join(map(str, c.j_list)))
    for branch in branches:
        _write_branch(branch, out / "branches", grid, config.output.snapshot_stride)
    summaries = [_branch_summary(b, estimate_onset(b, params, grid)) for b in branches]
    write_json({"branches": summaries}, out / "branches.json")
    BifurcationDiagram.from_branches(branches, measure=config.output.measure,
                                     title=f"alpha = {params.alpha:g}, beta = {params.beta:g}").write(
        out / "bifurcation.svg")
    return out


def _scalar_branches(config: ExperimentConfig, grid: Grid, threads: int,
                     sides: Sequence[BranchSide] = SIDES, j_list: Optional[Sequence[int]] = None) -> List[Branch]:
    params = config.params()
    gamma = config.gamma()
    require_scalar_field(limit_coefficients(params, gamma))
    c = config.continuation
    controls, termination = config.step_controls(), config.termination()
    keys = [(j, side) for j in (j_list or c.j_list) for side in sides]
    jobs = [
        lambda j=j, side=side: trace_scalar_branch(j, side, params, gamma, grid, controls, termination,
                                                   amplitude=c.amplitude, delta=c.delta)
        for j, side in keys
    ]
    return _collect(_run_jobs(jobs, threads), [f"S_inf^({j}) {side.value}" for j, side in keys])


def cmd_limit(config: ExperimentConfig, threads: int = 1) -> Path:
    """
    Branches of the limiting scalar field equation.

    Raises:
        RegimeError: If gamma is not above A tau*
        NumericalError: If no branch could be traced
    """
    require_scalar_field(limit_coefficients(config.params(), config.gamma()))
    out = _prepare_output(config, "limit")
    params = config.params()
    grid = config.make_grid()
    branches = _scalar_branches(config, grid, threads)
    if not branches:
        raise NumericalError("No limiting branch could be traced")
    for branch in branches:
        _write_branch(branch, out / "limit", grid, config.output.snapshot_stride)
    summaries = [_branch_summary(b, estimate_onset(b, params, grid)) for b in branches]
    write_json({"gamma": str(config.gamma()), "branches": summaries}, out / "limit.json")
    BifurcationDiagram.from_branches(branches, measure=config.output.measure,
                                     title=f"limit, gamma = {config.gamma()}").write(out / "limit.svg")
    return out


def _strictly_decreasing(values: Sequence[Optional[float]]) -> Optional[bool]:
    finite = [v for v in values if v is not None]
    if len(finite) < 2 or len(finite) != len(values):
        return None
    return all(b < a for a, b in zip(finite, finite[1:]))


def cmd_compare(config: ExperimentConfig, threads: int = 1) -> Path:
    """
    Convergence of Gamma_j towards S_inf^(j) along the ray s (alpha0, beta0).

    Writes compare.json with one entry per (scale, j) and compare.svg with a
    panel per scale plus the limit panel. Failures at one scale are recorded
    in its entry and do not stop the sweep.
    """
    alpha0, beta0 = config.sweep.ray
    ray_config = with_overrides(config, model={"alpha": alpha0, "beta": beta0, "gamma": None})
    out = _prepare_output(config, "compare")
    params = ray_config.params()
    grid = config.make_grid()
    measure = config.output.measure
    stride = config.output.snapshot_stride
    j_list = config.sweep.j_list
    limit_branches = {b.origin.j: b for b in _scalar_branches(ray_config, grid, threads, (BranchSide.UPPER,), j_list)}
    for branch in limit_branches.values():
        _write_branch(branch, out / "limit", grid, stride)

    c = config.continuation
    controls, termination = config.step_controls(), config.termination()
    keys = [(s, j) for s in config.sweep.scales for j in j_list]
    jobs = [
        lambda s=s, j=j: trace_mode_branch(j, BranchSide.UPPER, params.with_flux(s * alpha0, s * beta0), grid,
                                           controls, termination, amplitude=c.amplitude, delta=c.delta)
        for s, j in keys
    ]
    results = _run_jobs(jobs, threads)

    entries = []
    panels: Dict[float, Panel] = {}
    for (s, j), result in zip(keys, results):
        scaled = params.with_flux(s * alpha0, s * beta0)
        entry: Dict[str, Any] = {"s": s, "alpha": scaled.alpha, "beta": scaled.beta, "j": j}
        panel = panels.setdefault(s, Panel(title=f"(alpha, beta) = ({scaled.alpha:g}, {scaled.beta:g})",
                                           y_label=measure.replace("_", " ")))
        if isinstance(result, CrossfluxError):
            logger.warning("Scale %g, Gamma_%d failed: %s", s, j, result)
            entry["error"] = str(result)
            entries.append(entry)
            continue
        directory = out / f"scale-{s:g}"
        _write_branch(result, directory, grid, stride)
        write_json({"alpha": scaled.alpha, "beta": scaled.beta}, directory / "flux.json")
        panel.series.append(branch_series(result, measure))
        entry["points"] = len(result)
        entry["max_ratio_defect"] = ratio_defect_profile(result).maximum
        limit_branch = limit_branches.get(j)
        if limit_branch is None:
            entry.update(hausdorff=None, onset_gap=None, measured_onset_gap=None)
        else:
            panel.series.append(branch_series(limit_branch, measure))
            distance = branch_distance(result, limit_branch, measure, params=scaled, grid=grid)
            entry.update(hausdorff=distance.hausdorff, forward=distance.forward, backward=distance.backward,
                         onset_gap=distance.onset_gap, measured_onset_gap=distance.measured_onset_gap)
        entries.append(entry)

    trends = {}
    for j in j_list:
        rows = [e for e in entries if e["j"] == j]
        trends[str(j)] = {
            name: _strictly_decreasing([e.get(name) for e in rows])
            for name in ("hausdorff", "onset_gap", "max_ratio_defect")
        }
    write_json({"ray": [alpha0, beta0], "gamma": str(ray_config.gamma()), "measure": measure,
                "scales": entries, "decreasing": trends}, out / "compare.json")

    limit_panel = Panel(title=f"limit, gamma = {ray_config.gamma()}", y_label=measure.replace("_", " "),
                        series=[branch_series(b, measure) for b in limit_branches.values()])
    BifurcationDiagram(list(panels.values()) + [limit_panel], measure=measure, title="convergence along the ray",
                       columns=3, panel_width=360.0, panel_height=280.0).write(out / "compare.svg")
    return out


def _distance_to_gamma1(state: StateVector, d2: float, config: ExperimentConfig, grid: Grid) -> Optional[float]:
    """Sup-norm distance from ``state`` to the nearest computed Gamma_1 state at the same d2."""
    params = config.params()
    if not region_membership(1, params) or d2 >= critical_d2(1, params):
        return None
    c = config.continuation
    termination = Termination(d2_floor=d2, max_points=c.max_points, max_folds=c.max_folds)
    controls = dataclasses.replace(config.step_controls(), compute_stability=False)
    distances = []
    for side in SIDES:
        try:
            branch = trace_mode_branch(1, side, params, grid, controls, termination,
                                       amplitude=c.amplitude, delta=c.delta)
        except NumericalError as e:
            logger.warning("Gamma_1 %s unavailable for the distance check: %s", side.value, e)
            continue
        if not branch.points or branch.points[-1].d2 > d2:
            continue
        on_branch, report = newton_solve(branch.points[-1].state, d2, params, grid, tol=c.tol)
        if report.converged:
            distances.append(float(np.max(np.abs(on_branch.pack() - state.pack()))))
    return min(distances) if distances else None


def cmd_evolve(config: ExperimentConfig, threads: int = 1) -> Path:
    """
    Time integration from a seeded perturbation of the constant state.

    Writes snapshot states, the distance history and a summary with the
    Newton-polished final state.
    """
    out = _prepare_output(config, "evolve")
    params = config.params()
    grid = config.make_grid()
    e = config.evolve
    state0 = perturbed_constant(params, grid.n, amplitude=e.perturbation, seed=e.seed)
    run = evolve(state0, e.d2, params, grid, config.evolution_controls())
    directory = out / "evolve"
    directory.mkdir(exist_ok=True)
    for index, (_, state) in enumerate(run.snapshots):
        write_state_csv(state, grid, directory / f"snapshot-{index:04d}.csv")
    write_rows_csv([{"t": t, "distance": d} for t, d in run.distances], ("t", "distance"),
                   directory / "distance.csv")

    polished, report = newton_solve(run.final_state, e.d2, params, grid, tol=config.continuation.tol)
    summary: Dict[str, Any] = {
        "d2": e.d2,
        "termination": run.outcome,
        "final_time": run.final_time,
        "final_distance": run.final_distance,
        "final_residual": run.final_residual,
        "final_dt": run.final_dt,
        "accepted_steps": run.accepted_steps,
        "rejected_steps": run.rejected_steps,
        "snapshot_times": [t for t, _ in run.snapshots],
        "polish": {"converged": report.converged, "residual": report.residual_norm, "message": report.message},
    }
    if report.converged:
        spread_u, _ = polished.spread()
        constant = spread_u <= 10.0 * config.continuation.tol
        summary["node_class"] = "constant" if constant else node_count(polished, grid)
        summary["stability_index"] = stability_index(polished, e.d2, params, grid)
        summary["distance_to_gamma1"] = None if constant else _distance_to_gamma1(polished, e.d2, config, grid)
    write_json(summary, out / "evolve.json")
    logger.info("Evolution summary written to %s", out / "evolve.json")
    return out


def cmd_verify(config: ExperimentConfig, threads: int = 1,
               groups: CheckGroup = CheckGroup.ALL) -> VerificationReport:
    """Run the property suite; stored branches below the output directory are audited."""
    out = _prepare_output(config, "verify")
    report = run_verification(config, groups, directory=out)
    report.write(out / "verify.txt")
    return report


COMMAND_HANDLERS: Dict[str, Callable[..., Any]] = {
    "analyze": cmd_analyze,
    "branches": cmd_branches,
    "limit": cmd_limit,
    "compare": cmd_compare,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


# --- entry point ---


def _parse_groups(text: str) -> CheckGroup:
    groups = CheckGroup.NONE
    for name in text.split(","):
        try:
            groups |= CheckGroup[name.strip().upper()]
        except KeyError as e:
            raise argparse.ArgumentTypeError(f"unknown check group {name.strip()!r}") from e
    return groups


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="crossflux",
        description="Bifurcation analysis and continuation for the cross-flux Lotka-Volterra system.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="experiment configuration (defaults when omitted)")
    parser.add_argument("--out", type=Path, help="output directory, overrides [output] directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for independent branches")
    parser.add_argument("--groups", type=_parse_groups, default=CheckGroup.ALL,
                        help="verify only: comma-separated check groups")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser.parse_args(argv)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config is not None else ExperimentConfig()
    if args.out is not None:
        config = with_overrides(config, output={"directory": str(args.out)})
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}", "<command line>")
    return config


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = _load(args)
        if args.command == "verify":
            report = cmd_verify(config, args.threads, args.groups)
            print(report.render(), end="")
            return int(ExitCode.OK if report.passed else ExitCode.VERIFICATION_FAILURE)
        out = COMMAND_HANDLERS[args.command](config, args.threads)
        print(out)
        return int(ExitCode.OK)
    except NumericalError as e:
        print(f"crossflux {args.command}: numerical failure: {e}", file=sys.stderr)
        return int(ExitCode.NUMERICAL_FAILURE)
    except CrossfluxError as e:
        # configuration errors and parameter or regime errors traced back to it
        print(f"crossflux {args.command}: {e}", file=sys.stderr)
        return int(ExitCode.CONFIG_ERROR)
    except OSError as e:
        print(f"crossflux {args.command}: {e}", file=sys.stderr)
        return int(ExitCode.IO_ERROR)
