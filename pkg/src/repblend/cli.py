"""Command-line entry points.

Exit codes: 0 on success, 2 on data errors (bad files, failed validation),
3 on solver failures.
"""

from __future__ import annotations

import sys
from functools import wraps
from pathlib import Path

import click

from .clustering import RepSelection
from .data import DataError, build_clustering_matrix, extract_rep_profiles, load_system, validate_profiles
from .harness import (
    ExperimentConfig,
    cluster_matrix,
    emit_plot_data,
    load_records,
    run_experiment,
    solve_full_cached,
    write_weights_csv,
)
from .model import build_full_model, build_model
from .solve import SolverError, SolverHandle, solve, write_lp_file
from .weights import PgdParams, canonical_weight_type, fit_weights


def _handle_errors(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (DataError, ValueError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(2)
        except (SolverError, FloatingPointError) as exc:
            click.echo(f"solver error: {exc}", err=True)
            sys.exit(3)
    return wrapper


def _common(func):
    decorators = [
        click.option("--data", "data_path", required=True,
                     type=click.Path(path_type=Path), help="dataset directory"),
        click.option("--mode", type=click.Choice(["gep", "p2x"]), default=None,
                     help="override the dataset's declared mode"),
        click.option("--method", type=click.Choice(["kmeans", "kmedoids", "hull"]),
                     default="hull", show_default=True),
        click.option("--weights", "weight_type",
                     type=click.Choice(["dirac", "convex", "subunit", "conic"]),
                     default="conic", show_default=True),
        click.option("--n-rp", type=int, default=5, show_default=True),
        click.option("--seeds", default="1,2,3,4,5", show_default=True,
                     help="comma-separated clustering seeds"),
        click.option("--out", "out_dir", type=click.Path(path_type=Path),
                     default=Path("out"), show_default=True),
    ]
    for dec in reversed(decorators):
        func = dec(func)
    return func


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip() != "")
    except ValueError:
        raise click.BadParameter(f"seeds must be integers, got {text!r}")
    if not seeds:
        raise click.BadParameter("at least one seed is required")
    return seeds


def _pipeline_front(data_path: Path, method: str, weight_type: str, n_rp: int, seed: int):
    system = load_system(data_path)
    violations = validate_profiles(system)
    if violations:
        raise DataError(f"{len(violations)} profile violations; first: {violations[0]}")
    cmatrix = build_clustering_matrix(system)
    selection, assignment = cluster_matrix(
        cmatrix.values, method, weight_type, n_rp, seed)
    return system, cmatrix, selection, assignment


@click.group()
def main():
    """Representative-period reduction toolkit for energy-system LPs."""


@main.command()
@_common
@_handle_errors
def validate(data_path, mode, method, weight_type, n_rp, seeds, out_dir):
    """Load the dataset and report profile violations."""
    system = load_system(data_path)
    violations = validate_profiles(system)
    for violation in violations:
        click.echo(str(violation))
    if violations:
        click.echo(f"{len(violations)} violations found", err=True)
        sys.exit(2)
    click.echo(f"ok: {len(system.assets)} assets, {len(system.nodes)} nodes, "
               f"{system.horizon.num_periods} periods x {system.horizon.hours_per_period} hours")


def _write_selection(selection: RepSelection, assignment, cmatrix, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "reps.csv", "w", encoding="utf-8") as handle:
        handle.write("rep,source_period\n")
        for j in range(selection.n_rp):
            source = "" if selection.source_indices is None else selection.source_indices[j] + 1
            handle.write(f"{j + 1},{source}\n")
    with open(out_dir / "rep_matrix.csv", "w", encoding="utf-8") as handle:
        handle.write("row," + ",".join(f"rep{j + 1}" for j in range(selection.n_rp)) + "\n")
        for row, label in enumerate(cmatrix.row_labels):
            values = ",".join(repr(float(v)) for v in selection.rep_matrix[row])
            handle.write(f"{label},{values}\n")
    if assignment is not None:
        with open(out_dir / "assignment.csv", "w", encoding="utf-8") as handle:
            handle.write("period,rep\n")
            for d, r in enumerate(assignment.assignment):
                handle.write(f"{d + 1},{r + 1}\n")


@main.command()
@_common
@_handle_errors
def cluster(data_path, mode, method, weight_type, n_rp, seeds, out_dir):
    """Select representative periods and write them to the output directory."""
    seed = _parse_seeds(seeds)[0]
    _, cmatrix, selection, assignment = _pipeline_front(
        data_path, method, canonical_weight_type(weight_type), n_rp, seed)
    _write_selection(selection, assignment, cmatrix, out_dir)
    click.echo(f"selected {selection.n_rp} representatives with {method}")


@main.command(name="fit-weights")
@_common
@_handle_errors
def fit_weights_cmd(data_path, mode, method, weight_type, n_rp, seeds, out_dir):
    """Cluster, then fit blending weights; writes weights.csv (period, rep, value)."""
    seed = _parse_seeds(seeds)[0]
    weight_type = canonical_weight_type(weight_type)
    _, cmatrix, selection, assignment = _pipeline_front(
        data_path, method, weight_type, n_rp, seed)
    weights = fit_weights(
        selection.rep_matrix, cmatrix.values, weight_type, PgdParams(),
        dirac_assignment=assignment.assignment if assignment is not None else None)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_selection(selection, assignment, cmatrix, out_dir)
    write_weights_csv(weights, out_dir / "weights.csv")
    click.echo(f"fitted {weight_type} weights; mean projection error "
               f"{weights.projection_errors.mean():.6g}")


@main.command(name="build-lp")
@_common
@click.option("--full", "build_full", is_flag=True, help="build the unreduced model")
@_handle_errors
def build_lp(data_path, mode, method, weight_type, n_rp, seeds, out_dir, build_full):
    """Build the (reduced) linear program and write it in LP format."""
    seed = _parse_seeds(seeds)[0]
    weight_type = canonical_weight_type(weight_type)
    if build_full:
        system = load_system(data_path)
        violations = validate_profiles(system)
        if violations:
            raise DataError(f"{len(violations)} profile violations; first: {violations[0]}")
        model = build_full_model(system, mode=mode)
    else:
        system, cmatrix, selection, assignment = _pipeline_front(
            data_path, method, weight_type, n_rp, seed)
        weights = fit_weights(
            selection.rep_matrix, cmatrix.values, weight_type, PgdParams(),
            dirac_assignment=assignment.assignment if assignment is not None else None)
        rep_data = extract_rep_profiles(system, selection, cmatrix)
        model = build_model(system, rep_data, weights, mode=mode)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "model.lp"
    write_lp_file(model, path)
    click.echo(f"wrote {path} ({model.num_vars} variables, {model.num_constraints} constraints)")


@main.command(name="solve-full")
@_common
@_handle_errors
def solve_full(data_path, mode, method, weight_type, n_rp, seeds, out_dir):
    """Solve the full-resolution benchmark model (cached by dataset content)."""
    system = load_system(data_path)
    violations = validate_profiles(system)
    if violations:
        raise DataError(f"{len(violations)} profile violations; first: {violations[0]}")
    handle = SolverHandle()
    model = build_full_model(system, mode=mode)
    solution = solve_full_cached(model, data_path, mode or system.mode, handle, None)
    click.echo(f"status: {solution.status}")
    if solution.status != "optimal":
        sys.exit(3)
    click.echo(f"objective: {solution.objective!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "full_solution.csv", "w", encoding="utf-8") as out:
        out.write("variable,value\n")
        for name, value in solution.values.items():
            out.write(f"{name},{value!r}\n")


@main.command()
@_common
@_handle_errors
def experiment(data_path, mode, method, weight_type, n_rp, seeds, out_dir):
    """Run the full pipeline over all seeds and emit results/pareto CSVs."""
    config = ExperimentConfig(
        data_path=data_path, method=method, weight_type=weight_type,
        n_rp=n_rp, seeds=_parse_seeds(seeds), mode=mode)
    records = run_experiment(config)
    emit_plot_data(records, out_dir)
    ok = [r for r in records if not r.error]
    for record in records:
        if record.error:
            click.echo(f"seed {record.seed}: {record.error}", err=True)
        else:
            click.echo(f"seed {record.seed}: regret {record.regret_pct:.4f}% "
                       f"(total {record.total_time:.2f}s)")
    if not ok:
        first = records[0].error
        sys.exit(2 if first.startswith("DataError") else 3)
    click.echo(f"wrote {out_dir / 'results.csv'}")


@main.command(name="emit-plots")
@_common
@_handle_errors
def emit_plots(data_path, mode, method, weight_type, n_rp, seeds, out_dir):
    """Recompute plot CSVs (including the Pareto front) from results.csv."""
    results = Path(out_dir) / "results.csv"
    if not results.exists():
        raise DataError("results.csv not found", str(results))
    records = load_records(results)
    emit_plot_data(records, out_dir)
    click.echo(f"rewrote {out_dir / 'pareto.csv'}")


if __name__ == "__main__":
    main()
