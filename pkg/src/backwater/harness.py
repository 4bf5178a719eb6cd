"""Experiment driver: plans, runs, stress tests, and result persistence.

A plan is a list of (architecture, strategy, lambda) cells crossed with seeds
and optionally a sweep axis (training fraction or network width).  Each run
trains one model, scores it on the validation and test splits (plus an
extrapolation set when enabled), and is persisted as a run directory with
``manifest.json``, ``history.csv``, ``metrics.csv``, and ``summary.json``.
``report`` rows aggregate seed means per cell per axis value.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import (
    PARAM_NAMES,
    ParameterRanges,
    ProfileDataset,
    fit_scaler,
    subsample_training,
)
from .hydraulics import ChannelScenario, ConvergenceError, InsufficientEnergyError
from .metrics import (
    ProfileMetrics,
    evaluate_set,
    per_station_mae,
    read_metrics_csv,
    write_metrics_csv,
)
from .models import ModelSpec, train
from .network import TrainConfig
from .solver import GridSpec, solve_profile

DEFAULT_SEEDS = (0, 1, 2)
DEFAULT_FRACTIONS = (1.0, 0.5, 0.25, 0.1, 0.05)
DEFAULT_WIDTH_SWEEP = (4, 8, 16, 30, 64)
PLAN_AXES = ("none", "fraction", "width")
#: seed for the shared extrapolation set, fixed so every cell sees the same one
EXTRAPOLATION_SEED = 7919


# ---------------------------------------------------------------------- #
#  Plans
# ---------------------------------------------------------------------- #


@dataclass(frozen=True)
class PlanCell:
    """One (architecture, strategy, lambda, width) combination to train."""

    arch: str
    strategy: str = "dd"
    lam: float = 1.0
    width: int | None = None

    def __post_init__(self):
        self.spec()  # delegate vocabulary/λ/width validation

    def spec(self, width: int | None = None) -> ModelSpec:
        return ModelSpec(self.arch, self.strategy, self.lam, width or self.width)

    @property
    def label(self) -> str:
        return f"{self.arch}-{self.strategy}"


@dataclass(frozen=True)
class ExperimentPlan:
    """Cells x seeds x optional sweep axis, plus the extrapolation switch."""

    cells: tuple[PlanCell, ...]
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    axis: str = "none"
    axis_values: tuple = ()
    extrapolation: bool = False

    def __post_init__(self):
        if not self.cells:
            raise ValueError("plan needs at least one cell")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        if self.axis not in PLAN_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if self.axis == "none" and self.axis_values:
            raise ValueError("axis 'none' takes no axis values")
        if self.axis != "none" and not self.axis_values:
            raise ValueError(f"axis {self.axis!r} needs axis values")
        for v in self.axis_values:
            if self.axis == "fraction" and not 0.0 < v <= 1.0:
                raise ValueError("training fractions must lie in (0, 1]")
            if self.axis == "width" and (int(v) != v or v < 2):
                raise ValueError("widths must be integers >= 2")

    def runs(self):
        """Yield every (cell, axis_value, seed) the plan calls for."""
        values = self.axis_values if self.axis != "none" else (None,)
        for cell in self.cells:
            for value in values:
                for seed in self.seeds:
                    yield cell, value, seed

    @property
    def n_runs(self) -> int:
        return len(self.cells) * max(1, len(self.axis_values)) * len(self.seeds)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        cells = tuple(PlanCell(**c) for c in d["cells"])
        return cls(
            cells=cells,
            seeds=tuple(int(s) for s in d.get("seeds", DEFAULT_SEEDS)),
            axis=d.get("axis", "none"),
            axis_values=tuple(d.get("axis_values", ())),
            extrapolation=bool(d.get("extrapolation", False)),
        )


def desk_plan() -> tuple[ExperimentPlan, TrainConfig]:
    """The stock sparse-data study at desk scale: ten width-16 cells, 3 seeds.

    Each architecture is trained data-only and with its energy and Froude
    variants (plus the volume control for VTS) at training fraction 0.05,
    scored on test and on the shared extrapolation set.  The lambda defaults
    and the schedule (small batches, patient plateau/stop) are calibrated on
    the desk preset, where only ~17 training profiles remain at that
    fraction; the whole plan runs in a few CPU-minutes.
    """
    cells = (
        PlanCell("sp", "dd", width=16),
        PlanCell("sp", "en", 0.9, 16),
        PlanCell("sp", "fr", 0.9, 16),
        PlanCell("int", "dd", width=16),
        PlanCell("int", "en", 0.3, 16),
        PlanCell("int", "fr", 0.5, 16),
        PlanCell("vts", "dd", width=16),
        PlanCell("vts", "en", 0.3, 16),
        PlanCell("vts", "fr", 0.5, 16),
        PlanCell("vts", "vol", 0.3, 16),
    )
    plan = ExperimentPlan(
        cells=cells,
        seeds=DEFAULT_SEEDS,
        axis="fraction",
        axis_values=(0.05,),
        extrapolation=True,
    )
    config = TrainConfig(
        initial_lr=1e-2,
        max_epochs=2000,
        lr_patience=40,
        early_stop_patience=100,
        batch_size=16,
    )
    return plan, config


# ---------------------------------------------------------------------- #
#  Extrapolation sets
# ---------------------------------------------------------------------- #


def _draw_scenario(rng, ranges: ParameterRanges) -> ChannelScenario:
    """One scenario with >= 1 parameter pushed 10% beyond its range."""
    outside = rng.random(len(PARAM_NAMES)) < 0.5
    if not outside.any():
        outside[rng.integers(len(PARAM_NAMES))] = True
    drawn = {}
    for flag, name in zip(outside, PARAM_NAMES):
        lo, hi, _ = getattr(ranges, name)
        if not flag:
            drawn[name] = rng.uniform(lo, hi)
        elif rng.random() < 0.5:
            drawn[name] = rng.uniform(0.9 * lo, lo)
        else:
            drawn[name] = rng.uniform(hi, 1.1 * hi)
    return ChannelScenario(
        s=drawn["s"], b=drawn["b"], n=drawn["n"], z_d=drawn["zd"], Q=drawn["Q"]
    )


def make_extrapolation_set(ranges: ParameterRanges, grid: GridSpec, count: int, seed: int):
    """Solve `count` scenarios that step 10% outside the training ranges.

    Scenarios the solver rejects are redrawn; sustained rejection above 25%
    means the ranges hug an infeasible corner and is a configuration error.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    max_attempts = max(40, math.ceil(count / 0.75) + 10)
    profiles = []
    attempts = 0
    while len(profiles) < count:
        if attempts >= max_attempts:
            raise ValueError(
                f"extrapolation sampling rejected too often "
                f"({attempts - len(profiles)}/{attempts} draws failed, >25%)"
            )
        scen = _draw_scenario(rng, ranges)
        attempts += 1
        try:
            profiles.append(solve_profile(scen, grid))
        except (InsufficientEnergyError, ConvergenceError):
            continue
    if (attempts - count) > 0.25 * attempts:
        raise ValueError(
            f"extrapolation sampling rejected too often "
            f"({attempts - count}/{attempts} draws failed, >25%)"
        )
    return profiles


def extrapolation_dataset(ds: ProfileDataset, count: int | None = None, seed: int = EXTRAPOLATION_SEED) -> ProfileDataset:
    """Wrap an extrapolation set as an eval-only corpus (all profiles 'test')."""
    ranges = ParameterRanges.from_dict(ds.manifest["ranges"])
    if count is None:
        count = len(ds.indices("test"))
    profiles = make_extrapolation_set(ranges, ds.grid, count, seed)
    manifest = {
        "format_version": ds.manifest["format_version"],
        "kind": "extrapolation",
        "seed": seed,
        "base_ranges": ds.manifest["ranges"],
        "dx": ds.grid.dx,
        "length": ds.grid.length,
        "rejected": [],
        "counts": {"grid": count, "retained": count, "train": 0, "val": 0, "test": count},
    }
    return ProfileDataset(
        profiles, ["test"] * count, fit_scaler(profiles), ds.grid, manifest
    )


# ---------------------------------------------------------------------- #
#  Single runs
# ---------------------------------------------------------------------- #


@dataclass
class RunRecord:
    """Everything needed to report on — or exactly replay — one training run."""

    arch: str
    strategy: str
    lam: float
    width: int
    axis: str
    axis_value: float | None
    seed: int
    dataset_checksum: str
    config: dict
    wall_time: float
    history: list[dict] = field(default_factory=list)
    records: list[ProfileMetrics] = field(default_factory=list)
    summaries: dict = field(default_factory=dict)

    def seed_metrics(self, split: str, metric: str) -> float:
        return self.summaries[split][metric]["mean"]


def run_one(
    ds: ProfileDataset,
    cell: PlanCell,
    seed: int,
    config: TrainConfig | None = None,
    axis: str = "none",
    axis_value=None,
    ext_profiles=None,
    ext_meta: dict | None = None,
    model_sink: list | None = None,
) -> RunRecord:
    """Train one cell at one seed and score it on val/test (+ extrapolation).

    Pass a list as ``model_sink`` to receive the TrainedModel itself (e.g.
    for checkpointing); the record alone is enough to replay the run.
    """
    config = config or TrainConfig()
    config = replace(config, seed=seed)
    fraction = float(axis_value) if axis == "fraction" else 1.0
    width = int(axis_value) if axis == "width" else cell.width
    spec = cell.spec(width)

    started = time.perf_counter()
    ds_run = ds if fraction >= 1.0 else subsample_training(ds, fraction, seed)
    model = train(spec, ds_run, config)
    if model_sink is not None:
        model_sink.append(model)

    all_records: list[ProfileMetrics] = []
    summaries: dict = {}
    for split in ("val", "test"):
        out = evaluate_set(
            model, ds_run.profiles_in(split), ids=ds_run.indices(split), split=split
        )
        all_records.extend(out.records)
        summaries[split] = {
            "nmae": out.nmae_summary.to_dict(),
            "nnse": out.nnse_summary.to_dict(),
            "excluded": out.excluded,
        }
    if ext_profiles is not None:
        out = evaluate_set(model, ext_profiles, split="extrapolation")
        all_records.extend(out.records)
        summaries["extrapolation"] = {
            "nmae": out.nmae_summary.to_dict(),
            "nnse": out.nnse_summary.to_dict(),
            "excluded": out.excluded,
        }
    if spec.arch == "int":
        curve = per_station_mae(model, ds_run.profiles_in("test"))
        summaries["station_mae"] = [float(v) for v in curve]
    summaries["diagnostics"] = model.diagnostics

    run_config = asdict(config)
    run_config["fraction"] = fraction
    if ext_meta:
        run_config.update(ext_meta)

    return RunRecord(
        arch=spec.arch,
        strategy=spec.strategy,
        lam=spec.lam,
        width=spec.neurons,
        axis=axis,
        axis_value=None if axis_value is None else float(axis_value),
        seed=seed,
        dataset_checksum=ds.content_hash(),
        config=run_config,
        wall_time=time.perf_counter() - started,
        history=model.history,
        records=all_records,
        summaries=summaries,
    )


def execute_plan(
    ds: ProfileDataset,
    plan: ExperimentPlan,
    config: TrainConfig | None = None,
    out_dir=None,
    ext_seed: int = EXTRAPOLATION_SEED,
) -> list[RunRecord]:
    """Run every (cell, axis value, seed) of a plan; optionally persist each."""
    ext_profiles = None
    ext_meta = None
    if plan.extrapolation:
        ext_ds = extrapolation_dataset(ds, seed=ext_seed)
        ext_profiles = ext_ds.profiles
        ext_meta = {"ext_seed": ext_seed, "ext_count": len(ext_profiles)}
    results = []
    for cell, axis_value, seed in plan.runs():
        record = run_one(
            ds, cell, seed, config, plan.axis, axis_value, ext_profiles, ext_meta
        )
        if out_dir is not None:
            save_record(record, Path(out_dir) / record_dir_name(record))
        results.append(record)
    return results


def replay(record: RunRecord, ds: ProfileDataset) -> RunRecord:
    """Re-run a record's cell+seed against the same dataset.

    The dataset is identified by checksum; the rebuilt run must reproduce the
    stored metrics bitwise (the determinism contract).
    """
    if ds.content_hash() != record.dataset_checksum:
        raise ValueError("dataset checksum does not match the record")
    config_fields = {f.name for f in TrainConfig.__dataclass_fields__.values()}
    config = TrainConfig(**{k: v for k, v in record.config.items() if k in config_fields})
    cell = PlanCell(record.arch, record.strategy, record.lam, record.width)
    ext_profiles = None
    ext_meta = None
    if "ext_seed" in record.config:
        ext_ds = extrapolation_dataset(
            ds, count=record.config["ext_count"], seed=record.config["ext_seed"]
        )
        ext_profiles = ext_ds.profiles
        ext_meta = {k: record.config[k] for k in ("ext_seed", "ext_count")}
    return run_one(
        ds,
        cell,
        record.seed,
        config,
        record.axis,
        record.axis_value,
        ext_profiles,
        ext_meta,
    )


# ---------------------------------------------------------------------- #
#  Run-directory persistence
# ---------------------------------------------------------------------- #

HISTORY_HEADER = ("epoch", "train_loss", "val_loss", "lr")


def record_dir_name(record: RunRecord) -> str:
    axis = "base" if record.axis == "none" else f"{record.axis}{record.axis_value:g}"
    return (
        f"{record.arch}-{record.strategy}-lam{record.lam:g}"
        f"-w{record.width}-{axis}-seed{record.seed}"
    )


def save_record(record: RunRecord, run_dir) -> None:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "arch": record.arch,
        "strategy": record.strategy,
        "lam": record.lam,
        "width": record.width,
        "axis": record.axis,
        "axis_value": record.axis_value,
        "seed": record.seed,
        "dataset_checksum": record.dataset_checksum,
        "config": record.config,
        "wall_time": record.wall_time,
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    with open(run_dir / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for row in record.history:
            writer.writerow([row["epoch"], repr(row["train_loss"]), repr(row["val_loss"]), repr(row["lr"])])
    write_metrics_csv(record.records, run_dir / "metrics.csv")
    (run_dir / "summary.json").write_text(json.dumps(record.summaries, indent=2))


def load_record(run_dir) -> RunRecord:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    history = []
    with open(run_dir / "history.csv", newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader)) != HISTORY_HEADER:
            raise ValueError("unexpected history header")
        for epoch, train_loss, val_loss, lr in reader:
            history.append(
                {
                    "epoch": int(epoch),
                    "train_loss": float(train_loss),
                    "val_loss": float(val_loss),
                    "lr": float(lr),
                }
            )
    return RunRecord(
        **manifest,
        history=history,
        records=read_metrics_csv(run_dir / "metrics.csv"),
        summaries=json.loads((run_dir / "summary.json").read_text()),
    )


def discover_records(root) -> list[RunRecord]:
    """Load every run directory (any folder holding a manifest.json) under root."""
    root = Path(root)
    return [load_record(p.parent) for p in sorted(root.glob("**/manifest.json"))]


# ---------------------------------------------------------------------- #
#  Lambda search
# ---------------------------------------------------------------------- #


def lambda_search(
    ds: ProfileDataset,
    cell: PlanCell,
    lam_grid,
    seeds=DEFAULT_SEEDS,
    config: TrainConfig | None = None,
    fraction: float = 1.0,
) -> tuple[float, list[dict]]:
    """Pick the lambda with the lowest seed-mean validation NMAE.

    Returns (best lambda, table); each table row carries the candidate, its
    seed-mean validation and test NMAE, and the per-seed validation values.
    """
    lam_grid = list(lam_grid)
    if len(lam_grid) == 0:
        raise ValueError("lambda grid is empty")
    axis = "none" if fraction >= 1.0 else "fraction"
    axis_value = None if fraction >= 1.0 else fraction
    table = []
    for lam in lam_grid:
        candidate = PlanCell(cell.arch, cell.strategy, float(lam), cell.width)
        val_means, test_means = [], []
        for seed in seeds:
            record = run_one(ds, candidate, seed, config, axis, axis_value)
            val_means.append(record.seed_metrics("val", "nmae"))
            test_means.append(record.seed_metrics("test", "nmae"))
        table.append(
            {
                "lam": float(lam),
                "seed_mean_val_nmae": float(np.mean(val_means)),
                "seed_mean_test_nmae": float(np.mean(test_means)),
                "val_nmae_per_seed": val_means,
            }
        )
    best = min(table, key=lambda row: row["seed_mean_val_nmae"])
    return best["lam"], table


# ---------------------------------------------------------------------- #
#  Report aggregation
# ---------------------------------------------------------------------- #

REPORT_HEADER = ("arch", "strategy", "lambda", "axis", "axis_value", "seed_mean_nmae", "seed_mean_nnse")


def aggregate(records: list[RunRecord]) -> list[dict]:
    """Seed-mean NMAE/NNSE per cell per axis value; extrapolation rows get an
    ``ext_``-prefixed axis so the schema stays flat."""
    groups: dict[tuple, dict[str, list]] = {}
    for record in records:
        key = (record.arch, record.strategy, record.lam, record.axis, record.axis_value)
        entry = groups.setdefault(key, {"nmae": [], "nnse": [], "ext_nmae": [], "ext_nnse": []})
        entry["nmae"].append(record.seed_metrics("test", "nmae"))
        entry["nnse"].append(record.seed_metrics("test", "nnse"))
        if "extrapolation" in record.summaries:
            entry["ext_nmae"].append(record.seed_metrics("extrapolation", "nmae"))
            entry["ext_nnse"].append(record.seed_metrics("extrapolation", "nnse"))
    rows = []
    for (arch, strategy, lam, axis, axis_value), entry in sorted(
        groups.items(), key=lambda kv: tuple(map(repr, kv[0]))
    ):
        rows.append(
            {
                "arch": arch,
                "strategy": strategy,
                "lambda": lam,
                "axis": axis,
                "axis_value": axis_value,
                "seed_mean_nmae": float(np.mean(entry["nmae"])),
                "seed_mean_nnse": float(np.mean(entry["nnse"])),
            }
        )
        if entry["ext_nmae"]:
            rows.append(
                {
                    "arch": arch,
                    "strategy": strategy,
                    "lambda": lam,
                    "axis": f"ext_{axis}",
                    "axis_value": axis_value,
                    "seed_mean_nmae": float(np.mean(entry["ext_nmae"])),
                    "seed_mean_nnse": float(np.mean(entry["ext_nnse"])),
                }
            )
    return rows


def write_report(records: list[RunRecord], path) -> list[dict]:
    rows = aggregate(records)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row["arch"],
                    row["strategy"],
                    repr(row["lambda"]),
                    row["axis"],
                    "" if row["axis_value"] is None else repr(row["axis_value"]),
                    repr(row["seed_mean_nmae"]),
                    repr(row["seed_mean_nnse"]),
                ]
            )
    return rows
