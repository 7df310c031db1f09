"""Energy-system description: loading, validation and the clustering matrix.

A system lives in a directory with ``config.json`` (horizon, mode, nodes,
carriers, peak demands) and CSV files for assets, lines and the time-varying
profiles.  All profile values are unitless fractions in [0, 1]; peak demand,
unit capacity and inflow maxima carry the physical units (MW / MWh).

The clustering matrix stacks, per base period, the hourly demand,
renewable-availability and inflow values into one feature column, in a fixed
deterministic row order (demand, availability, inflow blocks; lexicographic
within a block; hour index innermost).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ASSET_KINDS = ("producer", "storage_short", "storage_seasonal", "conversion")
MODES = ("gep", "p2x")


class DataError(Exception):
    """Schema or reference problem in an input file; carries file and line."""

    def __init__(self, message: str, file: str | None = None, line: int | None = None):
        self.file = file
        self.line = line
        loc = ""
        if file is not None:
            loc = f"{file}: " if line is None else f"{file}:{line}: "
        super().__init__(loc + message)


@dataclass(frozen=True)
class Horizon:
    """Temporal discretization: D periods of H steps of tau hours each."""

    num_periods: int
    hours_per_period: int
    timestep_hours: float = 1.0
    hours_per_year: float | None = None

    def __post_init__(self):
        if self.num_periods < 1 or self.hours_per_period < 1:
            raise ValueError("num_periods and hours_per_period must be >= 1")
        if self.timestep_hours <= 0:
            raise ValueError("timestep_hours must be > 0")
        if self.hours_per_year is None:
            object.__setattr__(
                self, "hours_per_year",
                self.num_periods * self.hours_per_period * self.timestep_hours,
            )

    @property
    def num_timesteps(self) -> int:
        return self.num_periods * self.hours_per_period

    @property
    def operational_weight(self) -> float:
        """Annualization factor for operational cost: year length over model
        length, both counted in timesteps."""
        return self.hours_per_year / self.num_timesteps


@dataclass
class Asset:
    name: str
    node: str
    kind: str
    carrier_in: str | None = None
    carrier_out: str | None = None
    investable: bool = False
    unit_capacity: float = 0.0  # MW per unit
    existing_units: float = 0.0
    inv_cost: float = 0.0  # currency per MW per year
    var_cost: float = 0.0  # currency per MWh
    eff_in: float = 1.0
    eff_out: float = 1.0
    ramp: float | None = None  # fraction of capacity per hour; None = unlimited
    storage_cap: float = 0.0  # MWh
    inflow_max: float = 0.0  # MWh per timestep at profile value 1
    spill_cost: float = 0.0
    borrow_cost: float = 0.0
    initial_storage: float = 0.0  # MWh

    @property
    def is_storage(self) -> bool:
        return self.kind in ("storage_short", "storage_seasonal")

    @property
    def is_seasonal(self) -> bool:
        return self.kind == "storage_seasonal"

    @property
    def has_inflows(self) -> bool:
        return self.is_seasonal and self.inflow_max > 0.0


@dataclass
class Line:
    name: str
    from_node: str
    to_node: str
    carrier: str
    import_limit: float = 0.0  # MW
    export_limit: float = 0.0  # MW


@dataclass
class Violation:
    """One bad or missing profile value found by validation."""

    series: str  # demand | availability | inflow | storage_min | storage_max
    key: str  # "node/carrier" or asset name
    period: int  # 1-based
    hour: int | None  # 1-based; None for per-period series
    kind: str  # "range" | "missing"
    value: float | None = None

    def __str__(self) -> str:
        where = f"period {self.period}" + ("" if self.hour is None else f" hour {self.hour}")
        if self.kind == "missing":
            return f"{self.series} {self.key} {where}: value missing"
        return f"{self.series} {self.key} {where}: value {self.value} outside [0, 1]"


@dataclass
class EnergySystem:
    """Fully cross-referenced static and time-varying model inputs.

    Profile arrays are (num_periods, hours_per_period); storage bound arrays
    are (num_periods,).  Read-only after loading.
    """

    horizon: Horizon
    mode: str
    nodes: list[str]
    carriers: list[str]
    assets: list[Asset]
    lines: list[Line]
    peak_demand: dict[tuple[str, str], float]
    demand: dict[tuple[str, str], np.ndarray]
    availability: dict[str, np.ndarray] = field(default_factory=dict)
    inflow: dict[str, np.ndarray] = field(default_factory=dict)
    storage_min: dict[str, np.ndarray] = field(default_factory=dict)
    storage_max: dict[str, np.ndarray] = field(default_factory=dict)
    name: str = "system"

    def asset(self, name: str) -> Asset:
        for a in self.assets:
            if a.name == name:
                return a
        raise KeyError(name)

    def assets_of_kind(self, *kinds: str) -> list[Asset]:
        return [a for a in self.assets if a.kind in kinds]

    @property
    def producers(self) -> list[Asset]:
        return self.assets_of_kind("producer")

    @property
    def storages(self) -> list[Asset]:
        return self.assets_of_kind("storage_short", "storage_seasonal")

    @property
    def seasonal_storages(self) -> list[Asset]:
        return self.assets_of_kind("storage_seasonal")

    @property
    def conversions(self) -> list[Asset]:
        return self.assets_of_kind("conversion")


@dataclass
class ClusteringMatrix:
    """Feature-by-period matrix: column d stacks all hourly profile values of
    base period d (demand block, then availability, then inflow)."""

    values: np.ndarray  # (n_features, num_periods), entries in [0, 1]
    row_keys: list[tuple]  # ("demand", node, carrier, hour) | ("availability"|"inflow", asset, hour)
    period_ids: np.ndarray  # 1-based

    @property
    def row_labels(self) -> list[str]:
        return [":".join(str(p) for p in key) for key in self.row_keys]

    @property
    def num_periods(self) -> int:
        return self.values.shape[1]


@dataclass
class RepProfiles:
    """Time-varying inputs evaluated at the representative periods.

    Missing availability entries mean "always available" (1.0); missing
    demand or inflow entries mean zero.
    """

    n_rp: int
    hours_per_period: int
    demand: dict[tuple[str, str], np.ndarray]
    availability: dict[str, np.ndarray]
    inflow: dict[str, np.ndarray]


# --------------------------------------------------------------------------- #
# Loading
# --------------------------------------------------------------------------- #

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False, "": False}


def _parse_float(text: str, default: float, file: str, line: int, column: str) -> float:
    if text.strip() == "":
        return default
    try:
        return float(text)
    except ValueError:
        raise DataError(f"column {column!r}: not a number: {text!r}", file, line) from None


def _parse_int(text: str, file: str, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"column {column!r}: not an integer: {text!r}", file, line) from None


def _read_csv(path: Path, required: tuple[str, ...]):
    """Yield (line_number, row_dict) for every data row; checks the header."""
    fname = path.name
    if not path.exists():
        raise DataError("file not found", fname)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataError("missing header row", fname, 1)
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise DataError(f"missing columns: {', '.join(missing)}", fname, 1)
        for row in reader:
            yield reader.line_num, row


def _load_config(root: Path) -> dict:
    path = root / "config.json"
    if not path.exists():
        raise DataError("config.json not found", "config.json")
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc.msg}", "config.json", exc.lineno) from None


def load_system(root: Path | str) -> EnergySystem:
    """Load and cross-reference an energy system from a data directory.

    Raises DataError (naming file and line) on missing files, unresolved
    references and schema problems.  Out-of-range profile *values* are not
    errors; they are reported by validate_profiles.
    """
    root = Path(root)
    cfg = _load_config(root)

    for key in ("horizon", "mode", "nodes", "carriers", "peak_demand"):
        if key not in cfg:
            raise DataError(f"missing key {key!r}", "config.json")
    hz = cfg["horizon"]
    if not isinstance(hz, dict):
        raise DataError("'horizon' must be an object", "config.json")
    for key in ("num_periods", "hours_per_period"):
        if key not in hz:
            raise DataError(f"horizon is missing {key!r}", "config.json")
    try:
        horizon = Horizon(
            num_periods=int(hz["num_periods"]),
            hours_per_period=int(hz["hours_per_period"]),
            timestep_hours=float(hz.get("timestep_hours", 1.0)),
            hours_per_year=(float(hz["hours_per_year"]) if "hours_per_year" in hz else None),
        )
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad horizon: {exc}", "config.json") from None
    mode = cfg["mode"]
    if mode not in MODES:
        raise DataError(f"mode must be one of {MODES}, got {mode!r}", "config.json")
    for key in ("nodes", "carriers"):
        if not isinstance(cfg[key], list):
            raise DataError(f"{key!r} must be a list of names", "config.json")
    nodes = sorted(str(n) for n in cfg["nodes"])
    carriers = sorted(str(x) for x in cfg["carriers"])
    if len(set(nodes)) != len(nodes) or len(set(carriers)) != len(carriers):
        raise DataError("duplicate node or carrier names", "config.json")

    if not isinstance(cfg["peak_demand"], dict):
        raise DataError("'peak_demand' must map node -> carrier -> MW", "config.json")
    peaks: dict[tuple[str, str], float] = {}
    for node, per_carrier in cfg["peak_demand"].items():
        if node not in nodes:
            raise DataError(f"peak_demand references unknown node {node!r}", "config.json")
        if not isinstance(per_carrier, dict):
            raise DataError(f"peak_demand[{node!r}] must map carrier -> MW", "config.json")
        for carrier, value in per_carrier.items():
            if carrier not in carriers:
                raise DataError(f"peak_demand references unknown carrier {carrier!r}", "config.json")
            try:
                peaks[(node, carrier)] = float(value)
            except (ValueError, TypeError):
                raise DataError(f"peak_demand[{node!r}][{carrier!r}] must be a number",
                                "config.json") from None

    assets = _load_assets(root / "assets.csv", nodes, carriers)
    asset_by_name = {a.name: a for a in assets}
    lines = _load_lines(root / "lines.csv", nodes, carriers)

    D, H = horizon.num_periods, horizon.hours_per_period
    demand = {key: np.full((D, H), np.nan) for key in peaks}
    _fill_hourly(root / "demand.csv", ("node", "carrier"), demand, D, H,
                 check=lambda key, f, ln: (key in peaks) or _fail(
                     f"demand for ({key[0]}, {key[1]}) has no peak_demand entry", f, ln))

    availability: dict[str, np.ndarray] = {}
    _fill_hourly(root / "availability.csv", ("asset",), availability, D, H,
                 check=lambda key, f, ln: (key in asset_by_name) or _fail(
                     f"unknown asset {key!r}", f, ln))

    inflow: dict[str, np.ndarray] = {}

    def _check_inflow(key, f, ln):
        if key not in asset_by_name:
            _fail(f"unknown asset {key!r}", f, ln)
        if not asset_by_name[key].is_seasonal:
            _fail(f"inflows given for non-seasonal asset {key!r}", f, ln)
        return True

    _fill_hourly(root / "inflows.csv", ("asset",), inflow, D, H, check=_check_inflow)

    storage_min = {a.name: np.zeros(D) for a in assets if a.is_seasonal}
    storage_max = {a.name: np.ones(D) for a in assets if a.is_seasonal}
    bounds_path = root / "storage_bounds.csv"
    if bounds_path.exists():
        for ln, row in _read_csv(bounds_path, ("asset", "period", "min_frac", "max_frac")):
            name = row["asset"].strip()
            if name not in asset_by_name:
                raise DataError(f"unknown asset {name!r}", bounds_path.name, ln)
            if not asset_by_name[name].is_seasonal:
                raise DataError(f"storage bounds given for non-seasonal asset {name!r}",
                                bounds_path.name, ln)
            period = _parse_int(row["period"], bounds_path.name, ln, "period")
            if not 1 <= period <= D:
                raise DataError(f"period {period} outside 1..{D}", bounds_path.name, ln)
            storage_min[name][period - 1] = _parse_float(
                row["min_frac"], 0.0, bounds_path.name, ln, "min_frac")
            storage_max[name][period - 1] = _parse_float(
                row["max_frac"], 1.0, bounds_path.name, ln, "max_frac")

    return EnergySystem(
        horizon=horizon,
        mode=mode,
        nodes=nodes,
        carriers=carriers,
        assets=assets,
        lines=lines,
        peak_demand=peaks,
        demand=demand,
        availability=availability,
        inflow=inflow,
        storage_min=storage_min,
        storage_max=storage_max,
        name=root.name,
    )


def _fail(message: str, file: str, line: int):
    raise DataError(message, file, line)


def _fill_hourly(path: Path, key_columns: tuple[str, ...], target: dict, D: int, H: int, check):
    """Read an hourly profile CSV into ``target`` keyed by the key columns.

    Series arrays are created lazily (NaN-filled) so that completeness can be
    validated afterwards; setting the same cell twice is an error.
    """
    fname = path.name
    for ln, row in _read_csv(path, key_columns + ("period", "hour", "value")):
        key = tuple(row[c].strip() for c in key_columns)
        if len(key) == 1:
            key = key[0]
        check(key, fname, ln)
        period = _parse_int(row["period"], fname, ln, "period")
        hour = _parse_int(row["hour"], fname, ln, "hour")
        if not 1 <= period <= D:
            raise DataError(f"period {period} outside 1..{D}", fname, ln)
        if not 1 <= hour <= H:
            raise DataError(f"hour {hour} outside 1..{H}", fname, ln)
        if row["value"].strip() == "":
            raise DataError("empty value", fname, ln)
        value = _parse_float(row["value"], math.nan, fname, ln, "value")
        series = target.setdefault(key, np.full((D, H), np.nan))
        if not math.isnan(series[period - 1, hour - 1]):
            raise DataError(f"duplicate cell (period {period}, hour {hour})", fname, ln)
        series[period - 1, hour - 1] = value


_ASSET_COLUMNS = (
    "name", "node", "kind", "carrier_in", "carrier_out", "investable",
    "unit_capacity", "existing_units", "inv_cost", "var_cost", "eff_in",
    "eff_out", "ramp", "storage_cap", "inflow_max", "spill_cost",
    "borrow_cost", "initial_storage",
)


def _load_assets(path: Path, nodes: list[str], carriers: list[str]) -> list[Asset]:
    fname = path.name
    assets: list[Asset] = []
    seen: set[str] = set()
    for ln, row in _read_csv(path, ("name", "node", "kind")):
        get = lambda c: (row.get(c) or "").strip()
        name = get("name")
        if not name:
            raise DataError("empty asset name", fname, ln)
        if name in seen:
            raise DataError(f"duplicate asset {name!r}", fname, ln)
        seen.add(name)
        node = get("node")
        if node not in nodes:
            raise DataError(f"unknown node {node!r}", fname, ln)
        kind = get("kind")
        if kind not in ASSET_KINDS:
            raise DataError(f"unknown kind {kind!r}; expected one of {ASSET_KINDS}", fname, ln)
        carrier_in = get("carrier_in") or None
        carrier_out = get("carrier_out") or None
        for carrier in (carrier_in, carrier_out):
            if carrier is not None and carrier not in carriers:
                raise DataError(f"unknown carrier {carrier!r}", fname, ln)
        if kind == "producer" and carrier_out is None:
            raise DataError("producer needs carrier_out", fname, ln)
        if kind == "conversion" and (carrier_in is None or carrier_out is None):
            raise DataError("conversion needs carrier_in and carrier_out", fname, ln)
        if kind in ("storage_short", "storage_seasonal"):
            if carrier_out is None and carrier_in is None:
                raise DataError("storage needs a carrier", fname, ln)
            carrier_out = carrier_out or carrier_in
            carrier_in = carrier_in or carrier_out
        investable_text = get("investable").lower()
        if investable_text not in _BOOL_WORDS:
            raise DataError(f"column 'investable': not a boolean: {investable_text!r}", fname, ln)

        num = lambda c, dflt=0.0: _parse_float(get(c), dflt, fname, ln, c)
        asset = Asset(
            name=name, node=node, kind=kind,
            carrier_in=carrier_in, carrier_out=carrier_out,
            investable=_BOOL_WORDS[investable_text],
            unit_capacity=num("unit_capacity"),
            existing_units=num("existing_units"),
            inv_cost=num("inv_cost"),
            var_cost=num("var_cost"),
            eff_in=num("eff_in", 1.0),
            eff_out=num("eff_out", 1.0),
            ramp=(None if get("ramp") == "" else num("ramp")),
            storage_cap=num("storage_cap"),
            inflow_max=num("inflow_max"),
            spill_cost=num("spill_cost"),
            borrow_cost=num("borrow_cost"),
            initial_storage=num("initial_storage"),
        )
        if not (0.0 < asset.eff_in <= 1.0 and 0.0 < asset.eff_out <= 1.0):
            raise DataError("efficiencies must be in (0, 1]", fname, ln)
        for column in ("unit_capacity", "existing_units", "inv_cost", "var_cost",
                       "storage_cap", "inflow_max", "spill_cost", "borrow_cost",
                       "initial_storage"):
            if getattr(asset, column) < 0:
                raise DataError(f"column {column!r} must be >= 0", fname, ln)
        if asset.ramp is not None and asset.ramp < 0:
            raise DataError("column 'ramp' must be >= 0", fname, ln)
        if (asset.spill_cost > 0 or asset.borrow_cost > 0) and not asset.has_inflows:
            raise DataError(
                "spill/borrow costs are only meaningful for seasonal storage with inflows",
                fname, ln)
        assets.append(asset)
    assets.sort(key=lambda a: a.name)
    return assets


def _load_lines(path: Path, nodes: list[str], carriers: list[str]) -> list[Line]:
    fname = path.name
    lines: list[Line] = []
    seen: set[str] = set()
    for ln, row in _read_csv(path, ("name", "from_node", "to_node", "carrier",
                                    "import_limit", "export_limit")):
        name = row["name"].strip()
        if not name:
            raise DataError("empty line name", fname, ln)
        if name in seen:
            raise DataError(f"duplicate line {name!r}", fname, ln)
        seen.add(name)
        for endpoint in ("from_node", "to_node"):
            if row[endpoint].strip() not in nodes:
                raise DataError(f"unknown node {row[endpoint].strip()!r}", fname, ln)
        carrier = row["carrier"].strip()
        if carrier not in carriers:
            raise DataError(f"unknown carrier {carrier!r}", fname, ln)
        imp = _parse_float(row["import_limit"], 0.0, fname, ln, "import_limit")
        exp = _parse_float(row["export_limit"], 0.0, fname, ln, "export_limit")
        if imp < 0 or exp < 0:
            raise DataError("line limits must be >= 0", fname, ln)
        lines.append(Line(name, row["from_node"].strip(), row["to_node"].strip(), carrier, imp, exp))
    lines.sort(key=lambda l: l.name)
    return lines


# --------------------------------------------------------------------------- #
# Validation and the clustering matrix
# --------------------------------------------------------------------------- #

def validate_profiles(system: EnergySystem) -> list[Violation]:
    """Check every profile value for range [0, 1] and completeness.

    Returns an empty list exactly when all demand, availability, inflow and
    storage-bound values are present and within range.
    """
    violations: list[Violation] = []

    def scan_hourly(series_name: str, table: dict, key_fmt):
        for key in sorted(table):
            arr = table[key]
            for d in range(arr.shape[0]):
                for h in range(arr.shape[1]):
                    value = arr[d, h]
                    if math.isnan(value):
                        violations.append(Violation(series_name, key_fmt(key), d + 1, h + 1, "missing"))
                    elif not 0.0 <= value <= 1.0:
                        violations.append(
                            Violation(series_name, key_fmt(key), d + 1, h + 1, "range", float(value)))

    scan_hourly("demand", system.demand, lambda k: f"{k[0]}/{k[1]}")
    scan_hourly("availability", system.availability, lambda k: k)
    scan_hourly("inflow", system.inflow, lambda k: k)

    for series_name, table in (("storage_min", system.storage_min),
                               ("storage_max", system.storage_max)):
        for key in sorted(table):
            arr = table[key]
            for d in range(arr.shape[0]):
                if not 0.0 <= arr[d] <= 1.0:
                    violations.append(Violation(series_name, key, d + 1, None, "range", float(arr[d])))
    return violations


def renewable_producers(system: EnergySystem) -> list[Asset]:
    """Producers whose availability profile drops below 1 somewhere; only
    these contribute availability rows to the clustering matrix."""
    out = []
    for a in sorted(system.producers, key=lambda a: a.name):
        profile = system.availability.get(a.name)
        if profile is not None and np.any(profile < 1.0):
            out.append(a)
    return out


def build_clustering_matrix(system: EnergySystem) -> ClusteringMatrix:
    """Stack demand, renewable availability and inflow profiles into the
    feature-by-period matrix used by all clustering methods.

    Requires a system that passed validation.  Row order is deterministic:
    demand series sorted by (node, carrier), availability and inflow series
    sorted by asset name, hours innermost.
    """
    violations = validate_profiles(system)
    if violations:
        raise ValueError(f"system has {len(violations)} profile violations; validate first")
    H = system.horizon.hours_per_period
    D = system.horizon.num_periods

    blocks: list[np.ndarray] = []
    row_keys: list[tuple] = []
    for node, carrier in sorted(system.demand):
        blocks.append(system.demand[(node, carrier)].T)  # (H, D)
        row_keys.extend(("demand", node, carrier, h + 1) for h in range(H))
    for asset in renewable_producers(system):
        blocks.append(system.availability[asset.name].T)
        row_keys.extend(("availability", asset.name, h + 1) for h in range(H))
    for name in sorted(system.inflow):
        blocks.append(system.inflow[name].T)
        row_keys.extend(("inflow", name, h + 1) for h in range(H))

    values = np.vstack(blocks) if blocks else np.zeros((0, D))
    return ClusteringMatrix(values=values, row_keys=row_keys,
                            period_ids=np.arange(1, D + 1))


def rep_profiles_from_periods(system: EnergySystem, period_indices) -> RepProfiles:
    """Evaluate all profiles at the given base periods (0-based indices)."""
    idx = np.asarray(period_indices, dtype=int)
    return RepProfiles(
        n_rp=idx.size,
        hours_per_period=system.horizon.hours_per_period,
        demand={key: arr[idx].copy() for key, arr in system.demand.items()},
        availability={key: arr[idx].copy() for key, arr in system.availability.items()},
        inflow={key: arr[idx].copy() for key, arr in system.inflow.items()},
    )


def rep_profiles_from_matrix(cmatrix: ClusteringMatrix, rep_matrix: np.ndarray,
                             hours_per_period: int) -> RepProfiles:
    """Un-stack synthetic representative columns back into per-series hourly
    profiles (inverse of build_clustering_matrix for the series it covers)."""
    n_rp = rep_matrix.shape[1]
    demand: dict[tuple[str, str], np.ndarray] = {}
    availability: dict[str, np.ndarray] = {}
    inflow: dict[str, np.ndarray] = {}
    for row, key in enumerate(cmatrix.row_keys):
        hour = key[-1] - 1
        if key[0] == "demand":
            series = demand.setdefault((key[1], key[2]), np.zeros((n_rp, hours_per_period)))
        elif key[0] == "availability":
            series = availability.setdefault(key[1], np.zeros((n_rp, hours_per_period)))
        else:
            series = inflow.setdefault(key[1], np.zeros((n_rp, hours_per_period)))
        series[:, hour] = rep_matrix[row]
    return RepProfiles(n_rp=n_rp, hours_per_period=hours_per_period,
                       demand=demand, availability=availability, inflow=inflow)


def extract_rep_profiles(system: EnergySystem, selection, cmatrix: ClusteringMatrix | None = None) -> RepProfiles:
    """Profiles at the representatives of a RepSelection.

    Selections of actual periods are sliced exactly from the system;
    synthetic centroids are un-stacked from the clustering matrix (which must
    then be provided).
    """
    if selection.source_indices is not None:
        return rep_profiles_from_periods(system, selection.source_indices)
    if cmatrix is None:
        raise ValueError("synthetic representatives require the clustering matrix")
    return rep_profiles_from_matrix(cmatrix, selection.rep_matrix,
                                    system.horizon.hours_per_period)
