"""Batch experiments: sweep specs, cell execution and result tables."""

import itertools
import json
import logging
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from . import __version__
from .constants import ENV_WORKERS, EXPERIMENT_SCHEMA_VERSION, ExperimentKind
from .errors import EngineError, InvalidConfig, SchemaError
from .kinds import CellResult, KindConfig, get_kind_config
from .result_store import ResultStore
from .scenario import ClusterConfig, load_scenario

logger = logging.getLogger(__name__)

RESULTS_CSV = "results.csv"
COMPARISON_CSV = "comparison.csv"
COMPARISON_MANIFEST = "comparison_manifest.json"


@dataclass
class ExperimentSpec:
    """A parameter sweep over one experiment kind.

    ``scenario`` and ``output_dir`` are resolved against the directory of
    the spec file when loaded from disk.
    """
    kind: ExperimentKind
    sweep: Dict[str, List[Any]]
    seeds: List[int]
    output_dir: Path
    scenario: Optional[Path] = None
    params: Dict[str, Any] = field(default_factory=dict)
    schema_version: int = EXPERIMENT_SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Union[str, Path] = ".") -> "ExperimentSpec":
        """Build and validate a spec from its JSON structure."""
        if not isinstance(data, dict):
            raise SchemaError("experiment spec must be a JSON object")
        if data.get("schema_version") != EXPERIMENT_SCHEMA_VERSION:
            raise SchemaError(f"unsupported experiment schema_version {data.get('schema_version')!r}")
        unknown = set(data) - {"schema_version", "kind", "scenario", "sweep", "seeds",
                               "output_dir", "params"}
        if unknown:
            raise SchemaError(f"unknown spec fields: {sorted(unknown)}")
        kind_config = get_kind_config(data.get("kind"))
        base_dir = Path(base_dir)

        scenario = data.get("scenario")
        if kind_config.needs_scenario and not scenario:
            raise SchemaError(f"kind {kind_config.kind.value} needs a scenario file")
        if "output_dir" not in data:
            raise SchemaError("missing output_dir")

        params = data.get("params", {})
        if not isinstance(params, dict):
            raise SchemaError("params must be an object")
        missing = [p for p in kind_config.required_params if p not in params]
        if missing:
            raise SchemaError(f"kind {kind_config.kind.value} needs params {missing}")

        return cls(
            kind=kind_config.kind,
            sweep=_parse_sweep(kind_config, data.get("sweep", {})),
            seeds=_parse_seeds(data.get("seeds")),
            output_dir=base_dir / data["output_dir"],
            scenario=base_dir / scenario if scenario else None,
            params=params,
        )

    @property
    def kind_config(self) -> KindConfig:
        return get_kind_config(self.kind)

    @property
    def n_cells(self) -> int:
        n = len(self.seeds)
        for values in self.sweep.values():
            n *= len(values)
        return n

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the spec JSON structure."""
        return {
            "schema_version": self.schema_version,
            "kind": self.kind.value,
            "scenario": None if self.scenario is None else str(self.scenario),
            "sweep": {k: list(v) for k, v in self.sweep.items()},
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
            "params": dict(self.params),
        }


def _parse_sweep(kind_config: KindConfig, sweep: Any) -> Dict[str, List[Any]]:
    if not isinstance(sweep, dict):
        raise SchemaError("sweep must map axis names to value lists")
    parsed = {}
    for axis, values in sweep.items():
        if axis not in kind_config.axes:
            raise SchemaError(f"unknown axis {axis!r} for kind {kind_config.kind.value}; "
                              f"expected one of {sorted(kind_config.axes)}")
        if not isinstance(values, list) or not values:
            raise SchemaError(f"sweep axis {axis!r} needs a non-empty list of values")
        parse = kind_config.axes[axis]
        try:
            parsed[axis] = [parse(v) for v in values]
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad value on axis {axis!r}: {exc}") from exc
    return parsed


def _parse_seeds(seeds: Any) -> List[int]:
    if not isinstance(seeds, list) or not seeds:
        raise SchemaError("seeds must be a non-empty list")
    if any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in seeds):
        raise SchemaError("seeds must be non-negative integers")
    return list(seeds)


def load_experiment_spec(path: Union[str, Path]) -> ExperimentSpec:
    """Load and validate an experiment spec file."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise SchemaError(f"experiment spec not found: {path}") from exc
    except (json.JSONDecodeError, IOError) as exc:
        raise SchemaError(f"cannot read experiment spec {path}: {exc}") from exc
    return ExperimentSpec.from_dict(data, base_dir=path.parent)


def validate_spec(spec: ExperimentSpec) -> Optional[ClusterConfig]:
    """Check that the spec's scenario loads; returns it (None if not needed)."""
    if spec.scenario is None:
        return None
    return load_scenario(spec.scenario)


def cells(spec: ExperimentSpec) -> List[Tuple[Dict[str, Any], int]]:
    """Cross product of sweep axes and seeds; seeds vary fastest."""
    axes = list(spec.sweep)
    grid = itertools.product(*(spec.sweep[a] for a in axes))
    return [(dict(zip(axes, values)), seed) for values in grid for seed in spec.seeds]


def _run_cell(job: Tuple[ExperimentKind, Optional[ClusterConfig], Dict[str, Any], int,
                         Dict[str, Any]]) -> CellResult:
    kind, scenario, values, seed, params = job
    try:
        return get_kind_config(kind).runner(scenario, values, seed, params)
    except Exception as exc:
        raise EngineError(f"{type(exc).__name__}: {exc}", {**values, "seed": seed}) from exc


def worker_count() -> int:
    """Worker-pool size from CRANLAB_WORKERS (default 1)."""
    raw = os.getenv(ENV_WORKERS, "1")
    try:
        workers = int(raw)
    except ValueError as exc:
        raise InvalidConfig(f"{ENV_WORKERS} must be an integer, got {raw!r}") from exc
    if workers < 1:
        raise InvalidConfig(f"{ENV_WORKERS} must be >= 1, got {workers}")
    return workers


def _execute(spec: ExperimentSpec, scenario: Optional[ClusterConfig],
             workers: Optional[int]) -> List[Tuple[Dict[str, Any], int, CellResult]]:
    jobs = [(spec.kind, scenario, values, seed, spec.params) for values, seed in cells(spec)]
    workers = worker_count() if workers is None else workers
    logger.info(f"Running {len(jobs)} {spec.kind.value} cells on {workers} worker(s)")
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_cell(job) for job in jobs]
    else:
        # map preserves job order
        with Pool(min(workers, len(jobs))) as pool:
            results = pool.map(_run_cell, jobs)
    return [(job[2], job[3], result) for job, result in zip(jobs, results)]


@dataclass
class ExperimentResult:
    """What a run left on disk."""
    spec: ExperimentSpec
    columns: List[str]
    rows: List[Dict[str, Any]]
    table_path: Path
    manifest_path: Path
    wall_time_s: float


def _manifest(spec: ExperimentSpec, scenario: Optional[ClusterConfig], wall_time: float,
              files: List[str], **extra: Any) -> Dict[str, Any]:
    return {
        "spec": spec.to_dict(),
        "scenario": None if scenario is None else scenario.to_dict(),
        "code_version": __version__,
        "wall_time_s": wall_time,
        "n_cells": spec.n_cells,
        "files": files,
        **extra,
    }


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> ExperimentResult:
    """Run every cell of the sweep and write results plus manifest.

    Args:
        spec: Validated experiment spec
        workers: Pool size, CRANLAB_WORKERS when omitted

    Returns:
        ExperimentResult

    Raises:
        ScenarioNotFound, SchemaError: the scenario cannot be loaded
        EngineError: a cell failed; carries the cell's axis values and seed
    """
    start = time.perf_counter()
    scenario = validate_spec(spec)
    kind_config = spec.kind_config
    outcomes = _execute(spec, scenario, workers)

    columns = list(spec.sweep) + ["seed"] + list(kind_config.columns)
    rows = [{**values, "seed": seed, **result.row} for values, seed, result in outcomes]
    store = ResultStore(spec.output_dir)
    table_path = store.write_csv(RESULTS_CSV, columns, rows)
    files = [RESULTS_CSV]
    for _, _, result in outcomes:
        for name, (table_columns, table_rows) in result.tables.items():
            store.write_csv(name, table_columns, table_rows)
            files.append(name)

    wall_time = time.perf_counter() - start
    manifest_path = store.write_manifest(_manifest(spec, scenario, wall_time, files))
    logger.info(f"Experiment {spec.kind.value} finished: {len(rows)} rows in {wall_time:.2f} s")
    return ExperimentResult(spec, columns, rows, table_path, manifest_path, wall_time)


def strategy_ratio(cooperative: float, baseline: float) -> float:
    """Cooperative over baseline sum rate; two zero rates count as equal."""
    if baseline <= 0:
        return 1.0 if cooperative <= 0 else float("inf")
    return cooperative / baseline


@dataclass
class ComparisonTable:
    """Per-cell cooperative-vs-independent compression ratios."""
    columns: List[str]
    rows: List[Dict[str, Any]]
    labels: List[str]

    def ratios(self, label: str) -> List[float]:
        return [row[f"ratio_{label}"] for row in self.rows]

    def summary(self) -> Dict[str, Dict[str, float]]:
        out = {}
        for label in self.labels:
            ratios = self.ratios(label)
            out[label] = {
                "mean_ratio": sum(ratios) / len(ratios),
                "min_ratio": min(ratios),
                "share_above_one": sum(r > 1.0 for r in ratios) / len(ratios),
            }
        return out


def compare_strategies(spec: ExperimentSpec, workers: Optional[int] = None) -> ComparisonTable:
    """Ratio of cooperative to independent compression at equal caps.

    Uplink compares Wyner-Ziv with independent compression, downlink
    compares multivariate with independent compression. Each strategy uses
    quantizers fitted to the same caps.
    """
    kind_config = spec.kind_config
    if not kind_config.comparisons:
        raise SchemaError(f"compare needs kind ul_rates or dl_rates, not {spec.kind.value}")
    start = time.perf_counter()
    scenario = validate_spec(spec)
    outcomes = _execute(spec, scenario, workers)

    labels = [label for label, _, _ in kind_config.comparisons]
    columns = list(spec.sweep) + ["seed"]
    for label in labels:
        columns += [f"baseline_{label}", f"cooperative_{label}", f"ratio_{label}"]
    rows = []
    for values, seed, result in outcomes:
        row: Dict[str, Any] = {**values, "seed": seed}
        for label, numerator, denominator in kind_config.comparisons:
            row[f"baseline_{label}"] = result.row[denominator]
            row[f"cooperative_{label}"] = result.row[numerator]
            row[f"ratio_{label}"] = strategy_ratio(result.row[numerator], result.row[denominator])
        rows.append(row)
    table = ComparisonTable(columns, rows, labels)

    store = ResultStore(spec.output_dir)
    store.write_csv(COMPARISON_CSV, columns, rows)
    wall_time = time.perf_counter() - start
    store.write_manifest(_manifest(spec, scenario, wall_time, [COMPARISON_CSV],
                                   comparison=table.summary()),
                         name=COMPARISON_MANIFEST)
    for label, stats in table.summary().items():
        logger.info(f"Comparison {label}: mean ratio {stats['mean_ratio']:.4f}, "
                    f"{stats['share_above_one']:.0%} of cells above 1")
    return table


