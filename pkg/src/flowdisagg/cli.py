"""Command-line pipeline: ``fetch``, ``synth``, ``train``, ``disagg``, ``eval``.

Settings resolve as CLI flags > ``--config`` JSON file > built-in defaults, and
the effective settings are written to ``<out>/config_<command>.json``.
Machine-readable summaries go to stdout, diagnostics to stderr.

Exit codes: 0 success, 1 configuration error, 2 network error, 3 parse error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path

from . import disagg as dg
from .errors import ConfigurationError, FetchError, ParseError
from .evaluation import (compare_methods, emit_figure_data, linear_interpolate, results_to_series,
                         write_report_csv, write_summary_csv)
from .ingest import (KIRKEVOLL_BRU, STUDY_PERIOD, FetchRequest, SeriesCache, StationSpec, SynthConfig,
                     fetch_flow, fetch_weather, mass_balance, synth_generate)
from .ingest.synth import DAILY_RULES
from .timeseries import Resolution, aggregate_hourly_to_daily, build_windows, read_csv, write_csv

log = logging.getLogger("flowdisagg")

EXIT_OK, EXIT_CONFIG, EXIT_NETWORK, EXIT_PARSE = 0, 1, 2, 3

DEFAULTS = {
    "seed": 42,
    "offline": False,
    "out": "run",
    # fetch
    "cache_dir": None,
    "station_id": KIRKEVOLL_BRU.station_id,
    "station_name": KIRKEVOLL_BRU.name,
    "latitude": KIRKEVOLL_BRU.latitude,
    "longitude": KIRKEVOLL_BRU.longitude,
    "start": STUDY_PERIOD[0].isoformat(),
    "end": STUDY_PERIOD[1].isoformat(),
    "variables": ["precipitation", "temperature"],
    # synth
    "n_days": SynthConfig.n_days,
    "k": SynthConfig.k,
    "event_probability": SynthConfig.event_probability,
    "event_mean_mm": SynthConfig.event_mean_mm,
    "temp_mean": SynthConfig.temp_mean,
    "temp_amplitude": SynthConfig.temp_amplitude,
    "day_anomaly_std": SynthConfig.day_anomaly_std,
    "melt_coeff": SynthConfig.melt_coeff,
    "initial_storage": SynthConfig.initial_storage,
    # train
    "data": None,
    "epochs": dg.TrainConfig.epochs,
    "hidden_size": dg.TrainConfig.hidden_size,
    "ffn_hidden": list(dg.TrainConfig.ffn_hidden),
    "lr": dg.TrainConfig.lr,
    "train_fraction": dg.TrainConfig.train_fraction,
    "loss_weights": list(dg.TrainConfig.loss_weights),
    "context_days": dg.TrainConfig.context_days,
    # disagg / eval
    "checkpoint": None,
    "span": "test",
    "days": None,
    "results": None,
    "figure_days": 3,
}


def _global_flags(default):
    # globals are accepted before or after the subcommand; SUPPRESS keeps the
    # subparser from overwriting a value given before it
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=default)
    g.add_argument("--offline", action="store_true", default=default, help="forbid network access")
    g.add_argument("--config", type=Path, default=default, help="JSON file of settings")
    g.add_argument("--out", default=default, help="output directory")
    g.add_argument("-v", "--verbose", action="store_true", default=default)
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="flowdisagg", parents=[_global_flags(None)],
                                description="Daily-to-hourly flow disaggregation pipeline.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fetch", parents=[common], help="download flow and weather into the cache")
    f.add_argument("--cache-dir")
    f.add_argument("--station-id")
    f.add_argument("--latitude", type=float)
    f.add_argument("--longitude", type=float)
    f.add_argument("--start")
    f.add_argument("--end")
    f.add_argument("--variables", nargs="+")

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic paired dataset")
    for name, typ in (("n-days", int), ("k", float), ("event-probability", float), ("event-mean-mm", float),
                      ("temp-mean", float), ("temp-amplitude", float), ("day-anomaly-std", float),
                      ("melt-coeff", float), ("initial-storage", float)):
        s.add_argument(f"--{name}", type=typ)

    t = sub.add_parser("train", parents=[common], help="train on a data directory, write a checkpoint")
    t.add_argument("--data")
    t.add_argument("--epochs", type=int)
    t.add_argument("--hidden-size", type=int)
    t.add_argument("--ffn-hidden", type=int, nargs="+")
    t.add_argument("--lr", type=float)
    t.add_argument("--train-fraction", type=float)
    t.add_argument("--loss-weights", type=float, nargs=2)

    d = sub.add_parser("disagg", parents=[common], help="disaggregate days with a trained checkpoint")
    d.add_argument("--data")
    d.add_argument("--checkpoint")
    which = d.add_mutually_exclusive_group()
    which.add_argument("--span", choices=("train", "test", "all"))
    which.add_argument("--days", nargs="+", help="explicit YYYY-MM-DD days")

    e = sub.add_parser("eval", parents=[common], help="compare model output with linear interpolation")
    e.add_argument("--data")
    e.add_argument("--results")
    e.add_argument("--figure-days", type=int)
    return p


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None) is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ConfigurationError(f"unknown config key(s): {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    return cfg


def _echo_config(cfg, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / f"config_{cfg['command']}.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n")


def _emit(summary):
    print(json.dumps(summary, sort_keys=True))


def _need(cfg, key):
    if cfg.get(key) is None:
        raise ConfigurationError(f"--{key.replace('_', '-')} is required")
    return cfg[key]


def _load_data(data_dir: Path):
    def opt(name):
        p = data_dir / name
        return read_csv(p) if p.exists() else None

    try:
        daily_weather = read_csv(data_dir / "daily_weather.csv", Resolution.DAILY)
        daily_flow = read_csv(data_dir / "daily_flow.csv", Resolution.DAILY)
        hourly_weather = read_csv(data_dir / "hourly_weather.csv", Resolution.HOURLY)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"data directory incomplete: {exc.filename}") from None
    return daily_weather, daily_flow, hourly_weather, opt("hourly_flow.csv")


def _windows(cfg, data_dir):
    dw, df, hw, hf = _load_data(Path(data_dir))
    return build_windows(dw, df, hw, hf, context_days=cfg["context_days"])


# --- commands ---------------------------------------------------------------------


def cmd_fetch(cfg, transport=None) -> int:
    out = Path(cfg["out"])
    cache = SeriesCache(cfg["cache_dir"] or out / "cache")
    station = StationSpec(cfg["station_id"], cfg["latitude"], cfg["longitude"], cfg["station_name"])
    start, end = date.fromisoformat(cfg["start"]), date.fromisoformat(cfg["end"])
    flow_req = FetchRequest(station, start, end, Resolution.DAILY, ("flow",))
    weather_req = FetchRequest(station, start, end, Resolution.HOURLY, tuple(cfg["variables"]))

    flow = fetch_flow(flow_req, transport=transport, cache=cache, offline=cfg["offline"])
    hourly = fetch_weather(weather_req, transport=transport, cache=cache, offline=cfg["offline"])
    rules = {v: DAILY_RULES.get(v, "sum" if v in ("rain", "snowfall") else "mean") for v in hourly.variables}
    daily = aggregate_hourly_to_daily(hourly, rules)
    _echo_config(cfg, out)
    write_csv(flow, out / "daily_flow.csv")
    write_csv(hourly, out / "hourly_weather.csv")
    write_csv(daily, out / "daily_weather.csv")
    _emit({"command": "fetch", "daily_flow_rows": len(flow), "daily_flow_missing": int(flow.missing.sum()),
           "hourly_weather_rows": len(hourly), "hourly_weather_missing": int(hourly.missing.sum())})
    return EXIT_OK


def synth_config_from(cfg) -> SynthConfig:
    keys = ("n_days", "k", "event_probability", "event_mean_mm", "temp_mean", "temp_amplitude",
            "day_anomaly_std", "melt_coeff", "initial_storage")
    return SynthConfig(seed=cfg["seed"], **{k: cfg[k] for k in keys})


def cmd_synth(cfg) -> int:
    sc = synth_config_from(cfg)
    data = synth_generate(sc)
    out = Path(cfg["out"])
    _echo_config(cfg, out)
    for name, series in data._asdict().items():
        write_csv(series, out / f"{name}.csv")
    _emit({"command": "synth", "days": sc.n_days, "mass_balance": mass_balance(sc, data)})
    return EXIT_OK


def train_config_from(cfg) -> dg.TrainConfig:
    return dg.TrainConfig(hidden_size=cfg["hidden_size"], ffn_hidden=tuple(cfg["ffn_hidden"]),
                          context_days=cfg["context_days"], epochs=cfg["epochs"], lr=cfg["lr"], seed=cfg["seed"],
                          loss_weights=tuple(cfg["loss_weights"]), train_fraction=cfg["train_fraction"])


def cmd_train(cfg) -> int:
    tc = train_config_from(cfg)
    windows = _windows(cfg, _need(cfg, "data"))
    if not windows:
        raise ConfigurationError("no complete windows in the data directory")
    train_w, test_w = dg.split_windows(windows, tc.train_fraction)
    model, history = dg.train(train_w, tc)
    out = Path(cfg["out"])
    _echo_config(cfg, out)
    dg.save_checkpoint(model, out / "checkpoint.json")
    with (out / "loss_history.csv").open("w") as fh:
        fh.write("epoch,loss1,loss2,total\n")
        for i, h in enumerate(history):
            fh.write(f"{i},{h.loss1!r},{h.loss2!r},{h.total!r}\n")
    _emit({"command": "train", "train_windows": len(train_w), "test_windows": len(test_w), "epochs": tc.epochs,
           "initial_loss": history[0].total if history else None,
           "final_loss": history[-1].total if history else None})
    return EXIT_OK


def select_windows(windows, model: dg.DisaggModel, span="test", days=None):
    if days:
        wanted = {date.fromisoformat(d) for d in days}
        chosen = [w for w in windows if w.day_id in wanted]
        missing = wanted - {w.day_id for w in chosen}
        if missing:
            raise ConfigurationError(f"no complete window for day(s) {sorted(d.isoformat() for d in missing)}")
        return chosen
    if span == "all":
        return list(windows)
    last = model.metadata.get("train_last_day")
    if last is None:
        raise ConfigurationError("checkpoint records no training span; use --span all or --days")
    last = date.fromisoformat(last)
    return [w for w in windows if (w.day_id <= last) == (span == "train")]


def cmd_disagg(cfg) -> int:
    path = Path(_need(cfg, "checkpoint"))
    if not path.exists():
        raise ConfigurationError(f"checkpoint not found: {path}")
    model = dg.load_checkpoint(path)
    cfg = {**cfg, "context_days": model.context_days}
    windows = select_windows(_windows(cfg, _need(cfg, "data")), model, cfg["span"], cfg["days"])
    if not windows:
        raise ConfigurationError("no windows selected")
    results = [dg.disaggregate_day(model, w) for w in windows]
    out = Path(cfg["out"])
    _echo_config(cfg, out)
    dg.write_results_csv(results, out / "results.csv")
    worst = max(abs(r.hourly_flow_corrected.mean() - r.daily_avg_observed) / max(1.0, abs(r.daily_avg_observed))
                for r in results)
    _emit({"command": "disagg", "days": len(results), "max_relative_mean_error": worst,
           "negative_corrected_values": int(sum((r.hourly_flow_corrected < 0).sum() for r in results))})
    return EXIT_OK


def cmd_eval(cfg) -> int:
    data_dir = Path(_need(cfg, "data"))
    results = dg.read_results_csv(_need(cfg, "results"))
    if not results:
        raise ConfigurationError("results file is empty")
    truth_path = data_dir / "hourly_flow.csv"
    if not truth_path.exists():
        raise ConfigurationError(f"evaluation needs hourly truth at {truth_path}")
    truth = read_csv(truth_path, Resolution.HOURLY)
    daily = read_csv(data_dir / "daily_flow.csv", Resolution.DAILY)
    interp = linear_interpolate(daily)
    methods = {"model": results_to_series(results), "model_raw": results_to_series(results, corrected=False),
               "linear_interpolation": interp}
    days = sorted(r.day_id for r in results)
    report = compare_methods(methods, truth, daily, days)
    out = Path(cfg["out"])
    _echo_config(cfg, out)
    write_report_csv(report, out / "report.csv")
    write_summary_csv(report, out / "summary.csv")
    n_fig = cfg["figure_days"]
    if n_fig:
        emit_figure_data(report, results, out / "figures", interp, days[:n_fig])
    _emit({"command": "eval", "days": len(days), "summary": report.summary,
           "negative_predictions": report.diagnostics["negative_predictions"]})
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "disagg": cmd_disagg, "eval": cmd_eval}


def _setup_logging(verbose):
    # configure the package logger only, replacing the handler of any earlier call
    pkg = logging.getLogger("flowdisagg")
    for h in [h for h in pkg.handlers if getattr(h, "_flowdisagg_cli", False)]:
        pkg.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._flowdisagg_cli = True
    pkg.addHandler(handler)
    pkg.setLevel(logging.DEBUG if verbose else logging.INFO)


def main(argv=None, transport=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        cfg = resolve_config(args)
        if args.command == "fetch":
            return cmd_fetch(cfg, transport)
        return COMMANDS[args.command](cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FetchError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
