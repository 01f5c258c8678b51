"""Daily-to-hourly river flow disaggregation driven by hourly weather."""
from .disagg import (DisaggModel, DisaggResult, LossBreakdown, TrainConfig, compute_losses, daily_forward,
                     disaggregate_day, hourly_forward, load_checkpoint, mean_correct, save_checkpoint,
                     split_windows, train)
from .evaluation import (compare_methods, emit_figure_data, linear_interpolate, mae, mean_preservation_error,
                         rmse, variance_ratio)
from .timeseries import (FeatureWindow, Resolution, Scaler, TimeSeries, aggregate_hourly_to_daily, apply_scaler,
                         build_windows, fit_scaler, invert_scaler, read_csv, write_csv)

__version__ = "0.1.0"

__all__ = [
    "DisaggModel", "DisaggResult", "LossBreakdown", "TrainConfig", "compute_losses", "daily_forward",
    "disaggregate_day", "hourly_forward", "load_checkpoint", "mean_correct", "save_checkpoint", "split_windows",
    "train", "compare_methods", "emit_figure_data", "linear_interpolate", "mae", "mean_preservation_error", "rmse",
    "variance_ratio", "FeatureWindow", "Resolution", "Scaler", "TimeSeries", "aggregate_hourly_to_daily",
    "apply_scaler", "build_windows", "fit_scaler", "invert_scaler", "read_csv", "write_csv",
]
