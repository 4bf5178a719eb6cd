"""The three surrogate shapes (SP, INT, VTS): training and reconstruction.

SP maps (station, scenario) to one depth, INT steps from a station's depth to
the next one upstream, and VTS maps a scenario straight to the full depth
vector.  All three train on the combined objective
``lam * data_mse + (1 - lam) * physics_term`` with Adam, plateau-driven
learning-rate decay, and early stopping on the validation data MSE; the
physics term is picked by the strategy tag.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import ProfileDataset, SampleBatch, Scaler, view_int, view_sp, view_vts
from .hydraulics import ChannelScenario, normal_depth, weir_depth
from .losses import (
    MIN_DEPTH,
    STRATEGIES,
    VTS_ONLY_STRATEGIES,
    clamp_depths,
    combine,
    depth_floor,
    loss_bc,
    loss_en,
    loss_fr,
    loss_pde,
    loss_vol,
)
from .network import (
    AdamState,
    EarlyStopping,
    NetworkParams,
    ReduceLROnPlateau,
    TrainConfig,
    adam_step,
    backward,
    dmse_dpred,
    forward,
    init,
    mse,
)
from .solver import GridSpec

ARCHITECTURES = ("sp", "int", "vts")
DEFAULT_WIDTHS = {"sp": 30, "int": 30, "vts": 40}
DEFAULT_BATCH_SIZES = {"sp": 256, "int": 256, "vts": 32}
INPUT_WIDTHS = {"sp": 6, "int": 6, "vts": 5}
N_HIDDEN = 3
CHECKPOINT_VERSION = 1

_VIEW_BUILDERS = {"sp": view_sp, "int": view_int, "vts": view_vts}


# ---------------------------------------------------------------------- #
#  Specs and trained models
# ---------------------------------------------------------------------- #


@dataclass(frozen=True)
class ModelSpec:
    """What to train: architecture, loss strategy, lambda, and layer width.

    ``width`` of ``None`` selects the architecture default (30 for sp/int,
    40 for vts).  The ``dd`` strategy has no physics term, so its lambda is
    pinned to 1.
    """

    arch: str
    strategy: str = "dd"
    lam: float = 1.0
    width: int | None = None

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy in VTS_ONLY_STRATEGIES and self.arch != "vts":
            raise ValueError(
                f"strategy {self.strategy!r} needs whole-profile outputs (vts only)"
            )
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.strategy == "dd":
            object.__setattr__(self, "lam", 1.0)
        if self.width is not None and self.width < 2:
            raise ValueError("width must be at least 2")

    @property
    def neurons(self) -> int:
        return self.width if self.width is not None else DEFAULT_WIDTHS[self.arch]

    def layer_sizes(self, n_points: int) -> list[int]:
        out = n_points if self.arch == "vts" else 1
        return [INPUT_WIDTHS[self.arch]] + [self.neurons] * N_HIDDEN + [out]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainedModel:
    """A fitted network plus everything needed to use it on new scenarios."""

    spec: ModelSpec
    params: NetworkParams
    scaler: Scaler
    grid: GridSpec
    history: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------- #
#  Training
# ---------------------------------------------------------------------- #


def _as_column_targets(view: SampleBatch) -> SampleBatch:
    if view.targets.ndim == 1:
        return SampleBatch(
            view.inputs, view.targets[:, None], view.aux, view.profile_index
        )
    return view


def _slice_aux(aux: dict, sl: slice, n: int) -> dict:
    return {
        k: v[sl] if isinstance(v, np.ndarray) and v.ndim >= 1 and v.shape[0] == n else v
        for k, v in aux.items()
    }


def _physics_term(strategy, pred, true, aux):
    """Dispatch one strategy's loss; returns (value, gradient, clamp count)."""
    if strategy in ("en", "fr", "pde"):
        n_clamped = clamp_depths(pred, depth_floor(aux, pred))[1]
    else:
        n_clamped = 0
    if strategy == "en":
        value, grad = loss_en(pred, true, aux)
    elif strategy == "fr":
        value, grad = loss_fr(pred, true, aux)
    elif strategy == "vol":
        value, grad = loss_vol(pred, true)
    elif strategy == "bc":
        value, grad = loss_bc(pred, true)
    elif strategy == "pde":
        value, grad = loss_pde(pred, aux)
    else:  # pragma: no cover - ModelSpec already vets the vocabulary
        raise ValueError(f"unknown strategy {strategy!r}")
    return value, grad, n_clamped


def train(spec: ModelSpec, ds: ProfileDataset, config: TrainConfig | None = None) -> TrainedModel:
    """Fit a model of the given spec on a dataset's train/val splits.

    Minibatches are reshuffled every epoch from a stream seeded by
    ``config.seed``, so equal (spec, dataset, config) reruns produce
    bit-identical histories.  Validation loss is always the plain data MSE.
    A non-finite loss aborts the run and returns the best checkpoint so far
    with ``diagnostics["diverged"]`` set.
    """
    config = config or TrainConfig()
    train_view = _as_column_targets(_VIEW_BUILDERS[spec.arch](ds, "train"))
    val_view = _as_column_targets(_VIEW_BUILDERS[spec.arch](ds, "val"))
    if len(train_view) == 0:
        raise ValueError("training split is empty")
    if len(val_view) == 0:
        raise ValueError("validation split is empty")

    params = init(spec.layer_sizes(ds.grid.n_points), config.seed)
    batch_size = config.batch_size or DEFAULT_BATCH_SIZES[spec.arch]
    adam = AdamState(params, config.initial_lr)
    plateau = ReduceLROnPlateau(
        factor=config.lr_factor,
        patience=config.lr_patience,
        min_lr=config.min_lr,
    )
    stopper = EarlyStopping(patience=config.early_stop_patience)
    epoch_seeds = np.random.SeedSequence(config.seed).generate_state(config.max_epochs)

    # The physics term vanishes from the objective at lam == 1, so skipping it
    # keeps e.g. en@1.0 bit-identical to dd rather than merely close.
    use_physics = spec.strategy != "dd" and spec.lam < 1.0

    best_params = params.copy()
    best_val = np.inf
    best_epoch = 0
    lr = config.initial_lr
    history: list[dict] = []
    clamp_events = 0
    diverged = False
    stopped_epoch = None

    for epoch in range(config.max_epochs):
        shuffled = train_view.shuffled(int(epoch_seeds[epoch]))
        n = len(shuffled)
        batch_losses = []
        for start in range(0, n, batch_size):
            sl = slice(start, start + batch_size)
            xb = shuffled.inputs[sl]
            yb = shuffled.targets[sl]
            out, cache = forward(params, xb)
            data_term = mse(out, yb)
            d_out = dmse_dpred(out, yb)
            if use_physics:
                aux_b = _slice_aux(shuffled.aux, sl, n)
                phys, d_phys, n_clamped = _physics_term(spec.strategy, out, yb, aux_b)
                clamp_events += n_clamped
                total = combine(data_term, phys, spec.lam, spec.strategy).combined
                d_out = spec.lam * d_out + (1.0 - spec.lam) * d_phys
            else:
                total = data_term
            if not np.isfinite(total):
                diverged = True
                break
            d_w, d_b = backward(params, cache, d_out)
            if not all(np.all(np.isfinite(g)) for g in (*d_w, *d_b)):
                diverged = True
                break
            params, adam = adam_step(adam, params, d_w, d_b)
            batch_losses.append(total)
        if diverged and not batch_losses:
            break

        val_out = forward(params, val_view.inputs)[0]
        val_loss = mse(val_out, val_view.targets)
        history.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(batch_losses)),
                "val_loss": float(val_loss),
                "lr": lr,
            }
        )
        if not np.isfinite(val_loss):
            diverged = True
            break
        if diverged:
            break

        if val_loss < best_val:
            best_val = float(val_loss)
            best_params = params.copy()
            best_epoch = epoch
        lr = plateau.update(val_loss, lr)
        adam.lr = lr
        if stopper.update(epoch, val_loss):
            stopped_epoch = epoch
            break

    diagnostics = {
        "best_epoch": best_epoch,
        "best_val_loss": None if best_val == np.inf else best_val,
        "clamp_events": clamp_events,
        "diverged": diverged,
        "stopped_epoch": stopped_epoch,
        "epochs_run": len(history),
        "config": asdict(config),
    }
    return TrainedModel(spec, best_params, ds.scaler, ds.grid, history, diagnostics)


# ---------------------------------------------------------------------- #
#  Reconstruction
# ---------------------------------------------------------------------- #


def _scaled_param_row(scaler: Scaler, scen: ChannelScenario) -> list[float]:
    pairs = (("s", scen.s), ("b", scen.b), ("n", scen.n), ("zd", scen.z_d), ("Q", scen.Q))
    return [float(scaler.scale(name, value)) for name, value in pairs]


def closed_loop_profile(step_fn, scen: ChannelScenario, grid: GridSpec) -> np.ndarray:
    """March upstream from the weir boundary applying ``step_fn`` per station.

    ``step_fn(h_i) -> h_{i+1}`` supplies each next depth; wrapping the exact
    hydraulic stepper here reproduces the reference solver, wrapping a trained
    step net gives the INT reconstruction.
    """
    depths = np.empty(grid.n_points)
    depths[0] = weir_depth(scen)
    for i in range(1, grid.n_points):
        depths[i] = step_fn(depths[i - 1])
    return depths


def reconstruct_sp(model: TrainedModel, scen: ChannelScenario, grid: GridSpec | None = None) -> np.ndarray:
    """Predict a profile station-by-station; any station grid is legal."""
    if model.spec.arch != "sp":
        raise ValueError("model is not an sp architecture")
    grid = grid or model.grid
    x = model.scaler.scale("x", grid.stations)
    row = _scaled_param_row(model.scaler, scen)
    inputs = np.column_stack([x] + [np.full(grid.n_points, v) for v in row])
    return forward(model.params, inputs)[0][:, 0]


def reconstruct_int(
    model: TrainedModel,
    scen: ChannelScenario,
    grid: GridSpec | None = None,
    counters: dict | None = None,
) -> np.ndarray:
    """Closed-loop profile: analytic weir depth, then the step net recursively.

    Fed-back depths are clamped into a physical band: at least 1e-3 m and at
    most twice the larger of the boundary pool depth and the normal depth.  A
    correct backwater curve stays strictly inside the band, but the recursive
    march would otherwise amplify a single off-manifold prediction through the
    step net's extrapolating linear pieces and overflow within a few stations.
    Floor and ceiling hits are tallied under ``counters["clamped"]`` and
    ``counters["capped"]``.
    """
    if model.spec.arch != "int":
        raise ValueError("model is not an int architecture")
    grid = grid or model.grid
    row = np.array(_scaled_param_row(model.scaler, scen))
    inputs = np.empty((1, 6))
    inputs[0, 1:] = row
    cap = 2.0 * max(weir_depth(scen), normal_depth(scen))

    def step(h_prev: float) -> float:
        inputs[0, 0] = model.scaler.scale("h", h_prev)
        h_next = float(forward(model.params, inputs)[0][0, 0])
        if h_next < MIN_DEPTH:
            if counters is not None:
                counters["clamped"] = counters.get("clamped", 0) + 1
            return MIN_DEPTH
        if h_next > cap:
            if counters is not None:
                counters["capped"] = counters.get("capped", 0) + 1
            return cap
        return h_next

    return closed_loop_profile(step, scen, grid)


def reconstruct_vts(model: TrainedModel, scen: ChannelScenario, grid: GridSpec | None = None) -> np.ndarray:
    """Predict the whole profile in one pass; only the training grid is valid."""
    return reconstruct_vts_batch(model, [scen], grid)[0]


def reconstruct_vts_batch(
    model: TrainedModel, scens: list[ChannelScenario], grid: GridSpec | None = None
) -> np.ndarray:
    if model.spec.arch != "vts":
        raise ValueError("model is not a vts architecture")
    if grid is not None and grid != model.grid:
        raise ValueError("vts output stations are fixed to the training grid")
    rows = np.array([_scaled_param_row(model.scaler, s) for s in scens])
    return forward(model.params, rows.reshape(len(scens), 5))[0]


def reconstruct(
    model: TrainedModel,
    scen: ChannelScenario,
    grid: GridSpec | None = None,
    counters: dict | None = None,
) -> np.ndarray:
    """Architecture-dispatching profile prediction."""
    if model.spec.arch == "sp":
        return reconstruct_sp(model, scen, grid)
    if model.spec.arch == "int":
        return reconstruct_int(model, scen, grid, counters)
    return reconstruct_vts(model, scen, grid)


# ---------------------------------------------------------------------- #
#  Checkpoints
# ---------------------------------------------------------------------- #


def save_model(model: TrainedModel, path) -> None:
    """Write a JSON checkpoint (weights, scaler, grid, history, config echo)."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "spec": model.spec.to_dict(),
        "network": model.params.to_dict(),
        "scaler": model.scaler.to_dict(),
        "grid": {"dx": model.grid.dx, "length": model.grid.length},
        "history": model.history,
        "diagnostics": model.diagnostics,
    }
    Path(path).write_text(json.dumps(payload))


def load_model(path) -> TrainedModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError("unsupported checkpoint version")
    return TrainedModel(
        spec=ModelSpec(**payload["spec"]),
        params=NetworkParams.from_dict(payload["network"]),
        scaler=Scaler(mean=payload["scaler"]["mean"], std=payload["scaler"]["std"]),
        grid=GridSpec(**payload["grid"]),
        history=payload["history"],
        diagnostics=payload["diagnostics"],
    )
