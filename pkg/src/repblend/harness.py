"""End-to-end experiment pipeline: cluster, fit weights, solve the reduced
model, re-solve the full model with the reduced decisions fixed, and report
the relative regret with per-stage timings.

The full-resolution benchmark solve is independent of method, weights and
seed, so it is cached on disk keyed by a content hash of the dataset.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .clustering import greedy_hull, kmeans, kmedoids
from .data import (
    DataError,
    build_clustering_matrix,
    extract_rep_profiles,
    load_system,
    validate_profiles,
)
from .model import LpModel, Solution, build_full_model, build_model, fix_decisions
from .solve import SolverHandle, solve
from .weights import PgdParams, WeightMatrix, canonical_weight_type, fit_weights

METHODS = ("kmeans", "kmedoids", "hull")

# hull variant matching each weight space (hard assignments use the plain
# convex hull; sub-unit rows need the null point inside the hull)
HULL_FOR_WEIGHT = {
    "dirac": "convex",
    "convex": "convex",
    "subunit_conic": "convex_null",
    "conic": "conic",
}

REGRET_NOISE_FLOOR = -1e-2  # percent; anything lower flags inconsistent solves


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: Path
    method: str
    weight_type: str
    n_rp: int
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    mode: str | None = None  # None: use the dataset's declared mode
    pgd: PgdParams = PgdParams()
    solver: SolverHandle = SolverHandle()
    cache_dir: Path | None = None  # None: <data_path>/.full_cache

    def __post_init__(self):
        object.__setattr__(self, "data_path", Path(self.data_path))
        object.__setattr__(self, "weight_type", canonical_weight_type(self.weight_type))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.n_rp < 1:
            raise ValueError("n_rp must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")


@dataclass
class ExperimentRecord:
    case: str
    mode: str
    method: str
    weight_type: str
    n_rp: int
    seed: int
    t_read: float = 0.0
    t_cluster: float = 0.0
    t_fit: float = 0.0
    t_build: float = 0.0
    t_solve: float = 0.0
    objective_reduced: float | None = None
    objective_fixed: float | None = None
    objective_full: float | None = None
    regret_pct: float | None = None
    proj_err_mean: float | None = None
    proj_err_max: float | None = None
    error: str = ""

    @property
    def total_time(self) -> float:
        return self.t_read + self.t_cluster + self.t_fit + self.t_build + self.t_solve


def compute_regret(cost_fixed: float, cost_full: float) -> float:
    """Extra cost, in percent, of acting on the reduced model's decisions.

    Slightly negative values down to the solver-noise floor are passed
    through; anything lower means the two solves are inconsistent and is an
    error, as is a non-positive benchmark cost.
    """
    if not cost_full > 0:
        raise ValueError(f"benchmark cost must be positive, got {cost_full}")
    regret = 100.0 * (cost_fixed - cost_full) / cost_full
    if regret < REGRET_NOISE_FLOOR:
        raise ValueError(
            f"regret {regret:.4g}% below the noise floor {REGRET_NOISE_FLOOR}%: "
            "fixed model undercut the full benchmark")
    return regret


def cluster_matrix(values: np.ndarray, method: str, weight_type: str, n_rp: int,
                   seed: int, pgd_params: PgdParams | None = None):
    """Dispatch to the configured clustering; returns (selection, assignment)
    where assignment is None for hull methods (which define no partition)."""
    if method == "kmeans":
        return kmeans(values, n_rp, seed)
    if method == "kmedoids":
        return kmedoids(values, n_rp, seed)
    if method == "hull":
        hull_type = HULL_FOR_WEIGHT[canonical_weight_type(weight_type)]
        return greedy_hull(values, n_rp, hull_type, params=pgd_params), None
    raise ValueError(f"method must be one of {METHODS}")


def dataset_fingerprint(data_path: Path, mode: str, handle: SolverHandle) -> str:
    """Content hash of all dataset files plus everything the full solve
    depends on."""
    digest = hashlib.sha256()
    for path in sorted(Path(data_path).iterdir()):
        if path.suffix in (".json", ".csv") and path.is_file():
            digest.update(path.name.encode())
            digest.update(path.read_bytes())
    digest.update(mode.encode())
    digest.update(repr(handle.tolerance).encode())
    return digest.hexdigest()[:20]


def solve_full_cached(full_model: LpModel, data_path: Path, mode: str,
                      handle: SolverHandle, cache_dir: Path | None) -> Solution:
    """Solve the full model, reusing a cached solution for the same dataset
    content if one exists."""
    cache_dir = Path(cache_dir) if cache_dir is not None else Path(data_path) / ".full_cache"
    key = dataset_fingerprint(data_path, mode, handle)
    cache_file = cache_dir / f"full_{key}.json"
    if cache_file.exists():
        payload = json.loads(cache_file.read_text(encoding="utf-8"))
        return Solution(status=payload["status"], objective=payload["objective"],
                        values=payload["values"], solve_time=payload["solve_time"])
    solution = solve(full_model, handle)
    cache_dir.mkdir(parents=True, exist_ok=True)
    cache_file.write_text(json.dumps({
        "status": solution.status,
        "objective": solution.objective,
        "values": solution.values,
        "solve_time": solution.solve_time,
    }), encoding="utf-8")
    return solution


def run_experiment(config: ExperimentConfig) -> list[ExperimentRecord]:
    """Run the pipeline once per seed; failures are recorded per seed
    without aborting the sweep."""
    records: list[ExperimentRecord] = []
    case = Path(config.data_path).name
    full_model: LpModel | None = None
    full_solution: Solution | None = None
    for seed in config.seeds:
        record = ExperimentRecord(case=case, mode=config.mode or "", method=config.method,
                                  weight_type=config.weight_type, n_rp=config.n_rp, seed=seed)
        try:
            start = time.perf_counter()
            system = load_system(config.data_path)
            violations = validate_profiles(system)
            if violations:
                raise DataError(
                    f"{len(violations)} profile violations; first: {violations[0]}")
            cmatrix = build_clustering_matrix(system)
            record.t_read = time.perf_counter() - start
            mode = config.mode or system.mode
            record.mode = mode

            start = time.perf_counter()
            selection, assignment = cluster_matrix(
                cmatrix.values, config.method, config.weight_type, config.n_rp,
                seed, config.pgd)
            record.t_cluster = time.perf_counter() - start

            start = time.perf_counter()
            weights = fit_weights(
                selection.rep_matrix, cmatrix.values, config.weight_type, config.pgd,
                dirac_assignment=assignment.assignment if assignment is not None else None)
            record.t_fit = time.perf_counter() - start
            record.proj_err_mean = float(weights.projection_errors.mean())
            record.proj_err_max = float(weights.projection_errors.max())

            start = time.perf_counter()
            rep_data = extract_rep_profiles(system, selection, cmatrix)
            reduced = build_model(system, rep_data, weights, mode=mode)
            record.t_build = time.perf_counter() - start

            start = time.perf_counter()
            reduced_solution = solve(reduced, config.solver)
            record.t_solve = time.perf_counter() - start
            if reduced_solution.status != "optimal":
                raise RuntimeError(f"reduced solve: {reduced_solution.status}")
            record.objective_reduced = reduced_solution.objective

            if full_model is None:
                full_model = build_full_model(system, mode=mode)
                full_solution = solve_full_cached(
                    full_model, config.data_path, mode, config.solver, config.cache_dir)
            if full_solution.status != "optimal":
                raise RuntimeError(f"full solve: {full_solution.status}")
            record.objective_full = full_solution.objective

            fixed = fix_decisions(full_model, reduced_solution, mode)
            fixed_solution = solve(fixed, config.solver)
            if fixed_solution.status != "optimal":
                raise RuntimeError(f"fixed solve: {fixed_solution.status}")
            record.objective_fixed = fixed_solution.objective
            record.regret_pct = compute_regret(fixed_solution.objective,
                                               full_solution.objective)
        except Exception as exc:  # noqa: BLE001 - failures become record rows
            record.error = f"{type(exc).__name__}: {exc}"
        records.append(record)
    return records


RESULT_COLUMNS = [f.name for f in fields(ExperimentRecord)] + ["total_time"]

_FLOAT_FIELDS = {
    "t_read", "t_cluster", "t_fit", "t_build", "t_solve",
    "objective_reduced", "objective_fixed", "objective_full",
    "regret_pct", "proj_err_mean", "proj_err_max", "total_time",
}
_INT_FIELDS = {"n_rp", "seed"}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(records: list[ExperimentRecord], path: Path | str):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        for record in records:
            row = [_cell(getattr(record, name)) for name in RESULT_COLUMNS[:-1]]
            row.append(_cell(record.total_time))
            writer.writerow(row)


def load_records(path: Path | str) -> list[ExperimentRecord]:
    """Inverse of write_results_csv (the derived total_time column is
    recomputed, not stored)."""
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            kwargs = {}
            for name in RESULT_COLUMNS[:-1]:
                text = row[name]
                if name in _FLOAT_FIELDS:
                    kwargs[name] = float(text) if text else None
                elif name in _INT_FIELDS:
                    kwargs[name] = int(text)
                else:
                    kwargs[name] = text
            for stage in ("t_read", "t_cluster", "t_fit", "t_build", "t_solve"):
                kwargs[stage] = kwargs[stage] if kwargs[stage] is not None else 0.0
            records.append(ExperimentRecord(**kwargs))
    return records


def pareto_front(records: list[ExperimentRecord]) -> list[ExperimentRecord]:
    """Records not dominated in (total_time, regret_pct); failed records are
    excluded."""
    valid = [r for r in records if r.regret_pct is not None and not r.error]
    front = []
    for rec in valid:
        dominated = any(
            other.total_time <= rec.total_time and other.regret_pct <= rec.regret_pct
            and (other.total_time < rec.total_time or other.regret_pct < rec.regret_pct)
            for other in valid)
        if not dominated:
            front.append(rec)
    front.sort(key=lambda r: (r.total_time, r.regret_pct))
    return front


def emit_plot_data(records: list[ExperimentRecord], out_dir: Path | str):
    """Write results.csv (all records) and pareto.csv (non-dominated points
    by total time versus regret) for downstream plotting."""
    if not records:
        raise ValueError("no records to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(records, out_dir / "results.csv")
    with open(out_dir / "pareto.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["case", "method", "weight_type", "n_rp", "seed",
                         "total_time", "regret_pct"])
        for rec in pareto_front(records):
            writer.writerow([rec.case, rec.method, rec.weight_type, rec.n_rp,
                             rec.seed, _cell(rec.total_time), _cell(rec.regret_pct)])


def write_weights_csv(weights: WeightMatrix, path: Path | str):
    """Serialize a weight matrix as (period, rep, value) rows, 1-based."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period", "rep", "value"])
        for d in range(weights.n_periods):
            for r in range(weights.n_rp):
                writer.writerow([d + 1, r + 1, repr(float(weights.values[d, r]))])
