"""Daily-to-hourly flow disaggregation model.

An LSTM summarises the previous days of (daily weather, daily flow). Its final
hidden state is concatenated with a weather row and passed through one shared
feedforward net. Fed the target day's daily weather, the net predicts the daily
flow (loss 1). Fed each of the 24 hourly weather rows, it predicts hourly flow,
and the mean of those 24 predictions is also matched to the daily flow
(loss 2). No hourly flow labels are used anywhere in training.

After prediction, the 24 hourly values are shifted by a common constant so
their mean equals the observed daily average.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ShapeError, TrainingError
from .neuralnet import (ACTIVATIONS, FfnParams, LstmParams, OptimizerState, adam_init, ffn_backward, ffn_forward,
                        init_ffn, init_lstm, lstm_backward, lstm_forward, optimizer_step)
from .timeseries import HOURS_PER_DAY, FeatureWindow, Scaler, fit_scaler_array

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "flowdisagg-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    hidden_size: int = 16
    ffn_hidden: tuple = (32, 32)
    activation: str = "tanh"
    context_days: int = 6
    epochs: int = 300
    lr: float = 1e-3
    seed: int = 42
    loss_weights: tuple = (1.0, 1.0)
    train_fraction: float = 0.8
    std_floor: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "ffn_hidden", tuple(int(n) for n in self.ffn_hidden))
        object.__setattr__(self, "loss_weights", tuple(float(w) for w in self.loss_weights))
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.hidden_size < 1 or any(n < 1 for n in self.ffn_hidden):
            raise ConfigurationError("layer sizes must be positive")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigurationError("train_fraction must lie in (0, 1]")
        if len(self.loss_weights) != 2:
            raise ConfigurationError("loss_weights needs two entries (loss 1, loss 2)")
        if not self.lr > 0.0:
            raise ConfigurationError("lr must be positive")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {ACTIVATIONS}")


@dataclass(frozen=True)
class LossBreakdown:
    """Weighted loss terms; ``total == loss1 + loss2`` by construction."""

    loss1: float
    loss2: float
    total: float

    @classmethod
    def of(cls, loss1, loss2):
        loss1, loss2 = float(loss1), float(loss2)
        return cls(loss1, loss2, loss1 + loss2)


@dataclass(frozen=True)
class DisaggModel:
    lstm: LstmParams
    ffn: FfnParams
    daily_scaler: Scaler   # daily weather features
    hourly_scaler: Scaler  # hourly weather features
    flow_scaler: Scaler    # daily flow, also used to invert hourly predictions
    weather_variables: tuple
    context_days: int = 6
    seed: int = 0
    optimizer: Optional[OptimizerState] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n_w = len(self.weather_variables)
        if self.lstm.input_size != n_w + 1:
            raise ShapeError(f"LSTM input size {self.lstm.input_size} != {n_w} weather features + flow")
        if self.ffn.sizes[0] != self.lstm.hidden_size + n_w:
            raise ShapeError(f"FFN input size {self.ffn.sizes[0]} != hidden {self.lstm.hidden_size} + {n_w} weather")
        for s in (self.daily_scaler, self.hourly_scaler):
            if s.variables != tuple(self.weather_variables):
                raise ShapeError(f"weather scaler features {list(s.variables)} != {list(self.weather_variables)}")

    def parameters(self) -> dict:
        return {**self.lstm.named(), **self.ffn.named()}

    def with_parameters(self, arrays, optimizer=None) -> "DisaggModel":
        return DisaggModel(LstmParams.from_named(arrays), FfnParams.from_named(arrays, activation=self.ffn.activation),
                           self.daily_scaler, self.hourly_scaler, self.flow_scaler, self.weather_variables,
                           self.context_days, self.seed, optimizer if optimizer is not None else self.optimizer,
                           self.metadata)


@dataclass(frozen=True)
class DisaggResult:
    day_id: date
    hourly_flow_raw: np.ndarray
    hourly_flow_corrected: np.ndarray
    daily_avg_observed: float
    hourly_flow_truth: Optional[np.ndarray] = None


@dataclass
class Batch:
    """Scaled model inputs for B windows."""

    context: np.ndarray        # (B, T, F + 1)
    daily_weather: np.ndarray  # (B, F)
    hourly_weather: np.ndarray  # (B, 24, F)
    target: np.ndarray         # (B,)


# --- construction -----------------------------------------------------------------


def fit_scalers(windows: Sequence[FeatureWindow], floor=1e-8):
    """Daily weather, hourly weather and flow scalers from the given windows only.

    Each calendar day contributes one daily row even though it appears in
    several overlapping windows.
    """
    variables = windows[0].weather_variables
    n_w = len(variables)
    days = {}
    for w in windows:
        T = w.context.shape[0]
        for j in range(T):
            days.setdefault(w.day_id.toordinal() - T + j, w.context[j])
        days[w.day_id.toordinal()] = np.append(w.target_daily_weather, w.target_daily_flow)
    daily = np.array([days[k] for k in sorted(days)])
    hourly = np.concatenate([w.target_hourly_weather for w in windows])
    return (fit_scaler_array(daily[:, :n_w], variables, floor),
            fit_scaler_array(hourly, variables, floor),
            fit_scaler_array(daily[:, n_w:], ("flow",), floor))


def init_model(weather_variables, scalers, config: TrainConfig = TrainConfig()) -> DisaggModel:
    """Seeded initialisation: LSTM tensors first, then FFN layers, from one generator."""
    n_w = len(weather_variables)
    rng = np.random.default_rng(config.seed)
    lstm = init_lstm(n_w + 1, config.hidden_size, rng)
    ffn = init_ffn([config.hidden_size + n_w, *config.ffn_hidden, 1], rng, config.activation)
    daily_scaler, hourly_scaler, flow_scaler = scalers
    return DisaggModel(lstm, ffn, daily_scaler, hourly_scaler, flow_scaler, tuple(weather_variables),
                       config.context_days, config.seed)


def prepare_batch(model: DisaggModel, windows: Sequence[FeatureWindow]) -> Batch:
    n_w = len(model.weather_variables)
    for w in windows:
        if w.weather_variables and w.weather_variables != model.weather_variables:
            raise ShapeError(f"{w.day_id}: window features {list(w.weather_variables)} "
                             f"!= model features {list(model.weather_variables)}")
        if w.context.shape != (model.context_days, n_w + 1):
            raise ShapeError(f"{w.day_id}: context shape {w.context.shape} != ({model.context_days}, {n_w + 1})")
        if w.target_hourly_weather.shape != (HOURS_PER_DAY, n_w):
            raise ShapeError(f"{w.day_id}: need {HOURS_PER_DAY} hourly weather rows")
    ctx = np.stack([w.context for w in windows])
    context = np.concatenate([model.daily_scaler.transform(ctx[..., :n_w]),
                              model.flow_scaler.transform(ctx[..., n_w:])], axis=-1)
    return Batch(context,
                 model.daily_scaler.transform(np.stack([w.target_daily_weather for w in windows])),
                 model.hourly_scaler.transform(np.stack([w.target_hourly_weather for w in windows])),
                 model.flow_scaler.transform(np.array([[w.target_daily_flow] for w in windows]))[:, 0])


# --- forward / loss / gradient ---------------------------------------------------


def _forward(model: DisaggModel, batch: Batch):
    hidden, lcache = lstm_forward(model.lstm, batch.context)
    B, H = hidden.shape
    daily, dcache = ffn_forward(model.ffn, np.concatenate([hidden, batch.daily_weather], axis=1))
    rep = np.broadcast_to(hidden[:, None, :], (B, HOURS_PER_DAY, H))
    hourly_in = np.concatenate([rep, batch.hourly_weather], axis=2).reshape(B * HOURS_PER_DAY, -1)
    hourly, hcache = ffn_forward(model.ffn, hourly_in)
    return daily, hourly.reshape(B, HOURS_PER_DAY), (lcache, dcache, hcache)


def daily_forward(model: DisaggModel, window: FeatureWindow) -> float:
    """Scaled daily-flow prediction for the window's target day."""
    daily, _, _ = _forward(model, prepare_batch(model, [window]))
    return float(daily[0])


def hourly_forward(model: DisaggModel, window: FeatureWindow) -> np.ndarray:
    """24 scaled hourly predictions sharing one LSTM summary."""
    _, hourly, _ = _forward(model, prepare_batch(model, [window]))
    return hourly[0]


def batch_loss_and_grads(model: DisaggModel, batch: Batch, loss_weights=(1.0, 1.0), need_grads=True):
    """Mean over windows of the weighted loss pair, and its exact gradient."""
    w1, w2 = loss_weights
    daily, hourly, (lcache, dcache, hcache) = _forward(model, batch)
    B = daily.shape[0]
    hourly_mean = hourly.mean(axis=1)
    r1 = daily - batch.target
    r2 = hourly_mean - batch.target
    losses = LossBreakdown.of(w1 * np.mean(r1 * r1), w2 * np.mean(r2 * r2))
    if not need_grads:
        return losses, None

    H = model.lstm.hidden_size
    g_daily, dx_daily = ffn_backward(model.ffn, dcache, w1 * 2.0 * r1 / B)
    d_hourly = np.repeat(w2 * 2.0 * r2 / B / HOURS_PER_DAY, HOURS_PER_DAY)
    g_hourly, dx_hourly = ffn_backward(model.ffn, hcache, d_hourly)
    d_hidden = dx_daily[:, :H] + dx_hourly.reshape(B, HOURS_PER_DAY, -1)[:, :, :H].sum(axis=1)
    g_lstm, _ = lstm_backward(model.lstm, lcache, d_hidden)

    grads = g_lstm.named()
    hourly_named = g_hourly.named()
    for k, a in g_daily.named().items():
        grads[k] = a + hourly_named[k]
    return losses, grads


def compute_losses(model: DisaggModel, windows, loss_weights=(1.0, 1.0)) -> LossBreakdown:
    """Loss pair in scaled flow space, averaged over ``windows`` (a window or a list)."""
    if isinstance(windows, FeatureWindow):
        windows = [windows]
    losses, _ = batch_loss_and_grads(model, prepare_batch(model, windows), loss_weights, need_grads=False)
    return losses


def loss_and_grad_fn(model: DisaggModel, windows, loss_weights=(1.0, 1.0)):
    """Closure mapping a parameter dict to (total loss, gradient dict); for gradcheck."""
    batch = prepare_batch(model, windows)

    def fn(arrays):
        losses, grads = batch_loss_and_grads(model.with_parameters(arrays), batch, loss_weights)
        return losses.total, grads

    return fn


# --- training ---------------------------------------------------------------------


def split_windows(windows: Sequence[FeatureWindow], train_fraction=0.8):
    """Chronological split: the first ``train_fraction`` of windows train, the rest test."""
    windows = sorted(windows, key=lambda w: w.day_id)
    n_train = int(round(train_fraction * len(windows)))
    return windows[:n_train], windows[n_train:]


def train(windows: Sequence[FeatureWindow], config: TrainConfig = TrainConfig()):
    """Full-batch Adam on the mean weighted loss pair.

    Returns the trained model and one :class:`LossBreakdown` per epoch, each
    measured before that epoch's update.
    """
    if not windows:
        raise ValueError("train needs at least one window")
    variables = windows[0].weather_variables
    model = init_model(variables, fit_scalers(windows, config.std_floor), config)
    batch = prepare_batch(model, windows)
    params = model.parameters()
    state = adam_init(params, config.lr)
    history = []
    for epoch in range(config.epochs):
        losses, grads = batch_loss_and_grads(model, batch, config.loss_weights)
        if not np.isfinite(losses.total):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        history.append(losses)
        try:
            params, state = optimizer_step(state, params, grads)
        except TrainingError as exc:
            raise TrainingError(f"epoch {epoch}: {exc}") from None
        model = model.with_parameters(params)
        if epoch % 50 == 0:
            log.debug("epoch %d loss1 %.5f loss2 %.5f", epoch, losses.loss1, losses.loss2)
    meta = {"n_train_windows": len(windows), "train_first_day": windows[0].day_id.isoformat(),
            "train_last_day": windows[-1].day_id.isoformat(), "epochs": config.epochs,
            "loss_weights": list(config.loss_weights)}
    model = DisaggModel(model.lstm, model.ffn, model.daily_scaler, model.hourly_scaler, model.flow_scaler,
                        model.weather_variables, model.context_days, model.seed,
                        state if config.epochs else adam_init(params, config.lr), meta)
    return model, history


# --- prediction and post-processing ---------------------------------------------


def mean_correct(raw, daily_avg) -> np.ndarray:
    """Shift all values by one constant so their mean equals ``daily_avg``."""
    raw = np.asarray(raw, dtype=np.float64)
    if not (np.isfinite(raw).all() and np.isfinite(daily_avg)):
        raise ValueError("mean_correct needs finite inputs")
    return raw + (float(daily_avg) - raw.mean())


def disaggregate_day(model: DisaggModel, window: FeatureWindow) -> DisaggResult:
    scaled = hourly_forward(model, window)
    raw = model.flow_scaler.inverse(scaled[:, None])[:, 0]
    return DisaggResult(window.day_id, raw, mean_correct(raw, window.target_daily_flow),
                        window.target_daily_flow, window.target_hourly_flow)


def write_results_csv(results: Sequence[DisaggResult], path) -> Path:
    """Columns ``day,hour,raw,corrected,observed_daily_avg`` plus ``truth`` when every day has it."""
    path = Path(path)
    with_truth = bool(results) and all(r.hourly_flow_truth is not None for r in results)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "hour", "raw", "corrected", "observed_daily_avg"] + (["truth"] if with_truth else []))
        for r in results:
            for h in range(HOURS_PER_DAY):
                row = [r.day_id.isoformat(), h, repr(float(r.hourly_flow_raw[h])),
                       repr(float(r.hourly_flow_corrected[h])), repr(float(r.daily_avg_observed))]
                if with_truth:
                    row.append(repr(float(r.hourly_flow_truth[h])))
                w.writerow(row)
    return path


def read_results_csv(path) -> list:
    rows = {}
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault(rec["day"], []).append(rec)
    out = []
    for day, recs in rows.items():
        recs.sort(key=lambda r: int(r["hour"]))
        if len(recs) != HOURS_PER_DAY:
            raise ValueError(f"{path}: day {day} has {len(recs)} rows, expected {HOURS_PER_DAY}")
        col = lambda k: np.array([float(r[k]) for r in recs])  # noqa: E731
        out.append(DisaggResult(date.fromisoformat(day), col("raw"), col("corrected"),
                                float(recs[0]["observed_daily_avg"]), col("truth") if "truth" in recs[0] else None))
    return out


# --- checkpoint -------------------------------------------------------------------


def _pack(a):
    return {"shape": list(np.shape(a)), "data": np.asarray(a, dtype=np.float64).ravel().tolist()}


def _unpack(d):
    return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])


def checkpoint_dict(model: DisaggModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dimensions": {"weather_features": len(model.weather_variables),
                       "lstm_input": model.lstm.input_size, "lstm_hidden": model.lstm.hidden_size,
                       "ffn_sizes": model.ffn.sizes, "context_days": model.context_days},
        "weather_variables": list(model.weather_variables),
        "activation": model.ffn.activation,
        "seed": model.seed,
        "parameters": {k: _pack(a) for k, a in model.parameters().items()},
        "scalers": {"daily_weather": model.daily_scaler.to_dict(), "hourly_weather": model.hourly_scaler.to_dict(),
                    "flow": model.flow_scaler.to_dict()},
        "optimizer": None if model.optimizer is None else model.optimizer.to_dict(),
        "metadata": model.metadata,
    }


def save_checkpoint(model: DisaggModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(checkpoint_dict(model), indent=1, sort_keys=True) + "\n")
    return path


def load_checkpoint(path) -> DisaggModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    arrays = {k: _unpack(v) for k, v in doc["parameters"].items()}
    sc = doc["scalers"]
    return DisaggModel(
        LstmParams.from_named(arrays), FfnParams.from_named(arrays, activation=doc["activation"]),
        Scaler.from_dict(sc["daily_weather"]), Scaler.from_dict(sc["hourly_weather"]), Scaler.from_dict(sc["flow"]),
        tuple(doc["weather_variables"]), doc["dimensions"]["context_days"], doc["seed"],
        None if doc["optimizer"] is None else OptimizerState.from_dict(doc["optimizer"]), doc.get("metadata", {}))


def config_dict(config: TrainConfig) -> dict:
    d = asdict(config)
    d["ffn_hidden"] = list(d["ffn_hidden"])
    d["loss_weights"] = list(d["loss_weights"])
    return d
