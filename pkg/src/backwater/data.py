"""Profile corpus: grid generation, splitting, scaling, views, persistence.

A corpus is built by solving every combination of a uniform 5-parameter grid
(slope, width, roughness, dam height, discharge), split 70/15/15 into
train/val/test by a seeded shuffle, and standardized with statistics from the
training split only.  Three "views" rearrange the same depths into the sample
layouts the surrogate architectures train on.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hydraulics import ChannelScenario, ConvergenceError, InsufficientEnergyError
from .solver import GridSpec, WaterProfile, solve_profile

FORMAT_VERSION = 1
PARAM_NAMES = ("s", "b", "n", "zd", "Q")
SPLIT_NAMES = ("train", "val", "test")

#: Full-scale parameter grid: 7*7*7*6*5 = 10290 scenarios, both flow regimes.
FULL_RANGES = {
    "s": (5e-4, 2e-2, 7),
    "b": (5.0, 50.0, 7),
    "n": (0.01, 0.05, 7),
    "zd": (1.0, 5.0, 6),
    "Q": (10.0, 300.0, 5),
}
FULL_GRID = GridSpec(dx=10.0, length=5000.0)

#: Desk-scale grid: 5*5*5*2*2 = 500 scenarios on a 101-station channel.  The
#: ranges stay on the mild-slope side of the full box so every cell solves
#: (zero rejections, a clean 350/75/75 split) and so the ~17 scenarios a 5%
#: training fraction leaves are dense enough in parameter space for the nets
#: to generalize at all; over the full box that few profiles just memorize.
DESK_RANGES = {
    "s": (1e-3, 3e-3, 5),
    "b": (8.0, 16.0, 5),
    "n": (0.028, 0.04, 5),
    "zd": (2.0, 3.5, 2),
    "Q": (40.0, 80.0, 2),
}
DESK_GRID = GridSpec(dx=10.0, length=1000.0)


@dataclass(frozen=True)
class ParameterRanges:
    """Uniform (min, max, count) grid per scenario parameter."""

    s: tuple[float, float, int]
    b: tuple[float, float, int]
    n: tuple[float, float, int]
    zd: tuple[float, float, int]
    Q: tuple[float, float, int]

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi, count = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo > 0.0):
                raise ValueError(f"range for {name!r} must be positive and finite")
            if count < 1 or lo > hi:
                raise ValueError(f"bad grid for {name!r}: need count >= 1 and min <= max")
            if count >= 2 and not lo < hi:
                raise ValueError(f"range for {name!r} needs min < max")

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterRanges":
        return cls(**{k: (float(v[0]), float(v[1]), int(v[2])) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in PARAM_NAMES}

    def values(self, name: str) -> np.ndarray:
        lo, hi, count = getattr(self, name)
        return np.linspace(lo, hi, count)

    @property
    def n_combinations(self) -> int:
        return int(np.prod([getattr(self, k)[2] for k in PARAM_NAMES]))

    def scenarios(self):
        """All grid combinations in deterministic (s, b, n, zd, Q) order."""
        for s, b, n, zd, q in itertools.product(
            *(self.values(k) for k in PARAM_NAMES)
        ):
            yield ChannelScenario(s=float(s), b=float(b), n=float(n), z_d=float(zd), Q=float(q))


@dataclass(frozen=True)
class Scaler:
    """Per-feature standardization statistics (training split only).

    Features are named physical quantities, not column positions, so each
    view can pick the statistics for the columns it actually uses:
    ``x`` station coordinate, ``h`` depth, and the five scenario parameters.
    """

    mean: dict[str, float]
    std: dict[str, float]

    def scale(self, name: str, values):
        sd = self.std[name]
        if sd == 0.0:
            raise ValueError(f"feature {name!r} is constant in the training split")
        return (np.asarray(values, dtype=float) - self.mean[name]) / sd

    def inverse(self, name: str, values):
        return np.asarray(values, dtype=float) * self.std[name] + self.mean[name]

    def to_dict(self) -> dict:
        return {"mean": dict(self.mean), "std": dict(self.std)}


def fit_scaler(profiles: list[WaterProfile]) -> Scaler:
    """Fit standardization statistics on a set of (training) profiles."""
    if not profiles:
        raise ValueError("cannot fit a scaler on an empty training split")
    series = {
        "x": np.concatenate([p.grid.stations for p in profiles]),
        "h": np.concatenate([p.depths for p in profiles]),
    }
    for name in PARAM_NAMES:
        attr = "z_d" if name == "zd" else name
        series[name] = np.array([getattr(p.scenario, attr) for p in profiles])
    return Scaler(
        mean={k: float(np.mean(v)) for k, v in series.items()},
        std={k: float(np.std(v)) for k, v in series.items()},
    )


@dataclass
class ProfileDataset:
    """Solved profiles plus split tags, scaler, and a generation manifest."""

    profiles: list[WaterProfile]
    split: list[str]
    scaler: Scaler
    grid: GridSpec
    manifest: dict

    def __post_init__(self):
        if len(self.split) != len(self.profiles):
            raise ValueError("one split tag per profile required")

    def indices(self, split: str) -> np.ndarray:
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split!r}")
        return np.array([i for i, tag in enumerate(self.split) if tag == split], dtype=int)

    def profiles_in(self, split: str) -> list[WaterProfile]:
        return [self.profiles[i] for i in self.indices(split)]

    def content_hash(self) -> str:
        """Checksum of scenario parameters, depths, and split tags."""
        digest = hashlib.sha256()
        for profile, tag in zip(self.profiles, self.split):
            sc = profile.scenario
            digest.update(
                np.array([sc.s, sc.b, sc.n, sc.z_d, sc.Q]).tobytes()
            )
            digest.update(profile.depths.tobytes())
            digest.update(tag.encode())
        return digest.hexdigest()


def split_sizes(n: int) -> tuple[int, int, int]:
    """70/15/15 split with the rounding remainder assigned to train."""
    n_val = int(math.floor(0.15 * n))
    n_test = int(math.floor(0.15 * n))
    return n - n_val - n_test, n_val, n_test


def generate(ranges: ParameterRanges, grid: GridSpec, seed: int) -> ProfileDataset:
    """Solve the full scenario grid, split it, and fit the scaler.

    Scenarios whose subcritical march fails are rejected and logged in the
    manifest; more than 10% rejections means the ranges are poorly chosen
    and raises instead of silently shrinking the corpus.
    """
    profiles: list[WaterProfile] = []
    rejected: list[dict] = []
    for scen in ranges.scenarios():
        try:
            profiles.append(solve_profile(scen, grid))
        except (InsufficientEnergyError, ConvergenceError) as err:
            rejected.append(
                {
                    "s": scen.s,
                    "b": scen.b,
                    "n": scen.n,
                    "zd": scen.z_d,
                    "Q": scen.Q,
                    "reason": str(err),
                }
            )
    total = ranges.n_combinations
    if len(rejected) > 0.10 * total:
        raise ValueError(
            f"{len(rejected)}/{total} scenarios rejected (>10%): ranges poorly chosen"
        )

    split = assign_splits(len(profiles), seed)
    train = [p for p, tag in zip(profiles, split) if tag == "train"]
    scaler = fit_scaler(train)
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "split_seed": seed,
        "ranges": ranges.to_dict(),
        "dx": grid.dx,
        "length": grid.length,
        "rejected": rejected,
        "counts": {
            "grid": total,
            "retained": len(profiles),
            "train": len(train),
            "val": split.count("val"),
            "test": split.count("test"),
        },
    }
    return ProfileDataset(profiles, split, scaler, grid, manifest)


def assign_splits(n: int, seed: int) -> list[str]:
    """Tag n profiles train/val/test by a seeded shuffle of their indices."""
    n_train, n_val, _ = split_sizes(n)
    order = np.random.default_rng(seed).permutation(n)
    split = [""] * n
    for rank, idx in enumerate(order):
        if rank < n_train:
            split[idx] = "train"
        elif rank < n_train + n_val:
            split[idx] = "val"
        else:
            split[idx] = "test"
    return split


# ---------------------------------------------------------------------- #
#  Sample views
# ---------------------------------------------------------------------- #


@dataclass
class SampleBatch:
    """Training-ready samples: scaled inputs, metre targets, raw aux values.

    ``aux`` carries the unscaled scenario parameters (and the station spacing
    ``dx``) aligned with the samples so physics losses can be evaluated in
    physical units.  ``profile_index`` maps each sample back to its profile.
    """

    inputs: np.ndarray
    targets: np.ndarray
    aux: dict
    profile_index: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def shuffled(self, seed: int) -> "SampleBatch":
        order = np.random.default_rng(seed).permutation(len(self))
        aux = {
            k: (v[order] if isinstance(v, np.ndarray) else v)
            for k, v in self.aux.items()
        }
        return SampleBatch(
            self.inputs[order], self.targets[order], aux, self.profile_index[order]
        )


def _scenario_columns(ds: ProfileDataset, idx: np.ndarray) -> dict[str, np.ndarray]:
    cols = {}
    for name in PARAM_NAMES:
        attr = "z_d" if name == "zd" else name
        cols[name] = np.array([getattr(ds.profiles[i].scenario, attr) for i in idx])
    return cols


def view_sp(ds: ProfileDataset, split: str = "train") -> SampleBatch:
    """Pointwise samples ([x, s, b, n, zd, Q] -> h), one per station per profile."""
    idx = ds.indices(split)
    n_pts = ds.grid.n_points
    cols = _scenario_columns(ds, idx)
    x = np.tile(ds.grid.stations, len(idx))
    scen = {k: np.repeat(v, n_pts) for k, v in cols.items()}
    inputs = np.column_stack(
        [ds.scaler.scale("x", x)]
        + [ds.scaler.scale(k, scen[k]) for k in PARAM_NAMES]
    )
    targets = np.concatenate([ds.profiles[i].depths for i in idx])
    aux = dict(scen)
    aux["dx"] = ds.grid.dx
    return SampleBatch(inputs, targets, aux, np.repeat(idx, n_pts))


def view_int(ds: ProfileDataset, split: str = "train") -> SampleBatch:
    """Adjacent-pair samples ([h_i, s, b, n, zd, Q] -> h_{i+1}); jump pairs kept."""
    idx = ds.indices(split)
    n_pairs = ds.grid.n_points - 1
    cols = _scenario_columns(ds, idx)
    h_in = np.concatenate([ds.profiles[i].depths[:-1] for i in idx])
    targets = np.concatenate([ds.profiles[i].depths[1:] for i in idx])
    scen = {k: np.repeat(v, n_pairs) for k, v in cols.items()}
    inputs = np.column_stack(
        [ds.scaler.scale("h", h_in)]
        + [ds.scaler.scale(k, scen[k]) for k in PARAM_NAMES]
    )
    aux = dict(scen)
    aux["dx"] = ds.grid.dx
    return SampleBatch(inputs, targets, aux, np.repeat(idx, n_pairs))


def view_vts(ds: ProfileDataset, split: str = "train") -> SampleBatch:
    """Whole-profile samples ([s, b, n, zd, Q] -> depth vector of n_points)."""
    idx = ds.indices(split)
    for i in idx:
        if ds.profiles[i].grid != ds.grid:
            raise ValueError("all profiles in a VTS view must share one grid")
    cols = _scenario_columns(ds, idx)
    inputs = np.column_stack([ds.scaler.scale(k, cols[k]) for k in PARAM_NAMES])
    targets = np.vstack([ds.profiles[i].depths for i in idx]) if len(idx) else np.empty((0, ds.grid.n_points))
    aux = dict(cols)
    aux["dx"] = ds.grid.dx
    return SampleBatch(inputs, targets, aux, idx)


# ---------------------------------------------------------------------- #
#  Subsampling (dataset-size stress tests)
# ---------------------------------------------------------------------- #


def subsample_training(ds: ProfileDataset, fraction: float, seed: int) -> ProfileDataset:
    """Keep ceil(fraction * n_train) whole training profiles; val/test untouched.

    The scaler is refitted on the reduced training split so the view pipeline
    behaves exactly as if the smaller corpus had been generated directly.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    train_idx = ds.indices("train")
    keep = math.ceil(fraction * len(train_idx))
    if keep < 2:
        raise ValueError("subsample would retain fewer than 2 training profiles")
    chosen = np.random.default_rng(seed).permutation(len(train_idx))[:keep]
    kept = set(train_idx[np.sort(chosen)].tolist())

    profiles, split = [], []
    for i, (profile, tag) in enumerate(zip(ds.profiles, ds.split)):
        if tag == "train" and i not in kept:
            continue
        profiles.append(profile)
        split.append(tag)
    scaler = fit_scaler([p for p, tag in zip(profiles, split) if tag == "train"])
    manifest = dict(ds.manifest)
    manifest["subsample"] = {"fraction": fraction, "seed": seed, "kept_train": keep}
    counts = dict(manifest.get("counts", {}))
    counts["train"] = keep
    counts["retained"] = len(profiles)
    manifest["counts"] = counts
    return ProfileDataset(profiles, split, scaler, ds.grid, manifest)


# ---------------------------------------------------------------------- #
#  Persistence
# ---------------------------------------------------------------------- #


def _manifest_path(path) -> Path:
    return Path(path).with_suffix(".manifest.json")


def save(ds: ProfileDataset, path) -> None:
    """Write the corpus as a CSV of profiles plus a JSON manifest.

    CSV header is `s,b,n,zd,Q,h0..h{N-1}`; values are shortest round-trip
    float representations, so loading is bit-exact.  The manifest records
    generation settings, splits, regimes, and the CSV checksum.
    """
    path = Path(path)
    n_pts = ds.grid.n_points
    header = list(PARAM_NAMES) + [f"h{i}" for i in range(n_pts)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for profile in ds.profiles:
            sc = profile.scenario
            row = [repr(v) for v in (sc.s, sc.b, sc.n, sc.z_d, sc.Q)]
            row += [repr(float(h)) for h in profile.depths]
            writer.writerow(row)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()

    manifest = dict(ds.manifest)
    manifest["format_version"] = FORMAT_VERSION
    manifest["csv_sha256"] = digest
    manifest["split"] = list(ds.split)
    manifest["regimes"] = [p.regime for p in ds.profiles]
    manifest["jump_indices"] = [
        (None if p.jump_index is None else int(p.jump_index)) for p in ds.profiles
    ]
    with open(_manifest_path(path), "w") as fh:
        json.dump(manifest, fh, indent=1)


def load(path) -> ProfileDataset:
    """Load a corpus saved by :func:`save`, verifying version and checksum."""
    path = Path(path)
    with open(_manifest_path(path)) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError("unsupported dataset format version")
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    if digest != manifest["csv_sha256"]:
        raise ValueError("dataset CSV checksum mismatch (truncated or edited file)")

    grid = GridSpec(dx=manifest["dx"], length=manifest["length"])
    n_pts = grid.n_points
    profiles = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:5] != list(PARAM_NAMES) or len(header) != 5 + n_pts:
            raise ValueError("dataset CSV header does not match its manifest")
        for row, regime, jump in zip(reader, manifest["regimes"], manifest["jump_indices"]):
            s, b, n, zd, q = (float(v) for v in row[:5])
            depths = np.array([float(v) for v in row[5:]])
            profiles.append(
                WaterProfile(
                    ChannelScenario(s=s, b=b, n=n, z_d=zd, Q=q),
                    grid,
                    depths,
                    regime,
                    jump,
                )
            )
    split = list(manifest["split"])
    # eval-only corpora (e.g. extrapolation sets) carry no train profiles;
    # their scaler is never consulted, so fit it on everything
    train_profiles = [p for p, tag in zip(profiles, split) if tag == "train"]
    scaler = fit_scaler(train_profiles or profiles)
    loaded = {
        k: v
        for k, v in manifest.items()
        if k not in ("split", "regimes", "jump_indices", "csv_sha256")
    }
    return ProfileDataset(profiles, split, scaler, grid, loaded)


def desk_ranges() -> ParameterRanges:
    return ParameterRanges.from_dict(DESK_RANGES)


def full_ranges() -> ParameterRanges:
    return ParameterRanges.from_dict(FULL_RANGES)
