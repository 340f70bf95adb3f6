"""Command-line entry point: ``stationcast <command> ...``.

Commands: synth, ingest, graph, train, evaluate, forecast, plot, describe,\nbenchmark.
Exit codes: 0 success, 2 validation error, 3 data error, 4 numerical
divergence.  ``STATIONCAST_SEED`` supplies the seed when neither a flag
nor a config file sets one.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import VARIABLES, __version__, checkpoint
from .baselines import Interpolation, Persistence
from .errors import ConfigurationError, DataError, DivergenceError, StationcastError
from .grids import write_gridpack
from .metrics import EvalReport, evaluate
from .models import Model, describe
from .pipeline import make_graph, prepare_run
from .plots import plot_reports
from .samples import NormStats, SampleSet, WindowSource, grid_window_length, make_samples
from .stations import align, clean, read_station_csv, write_station_csv
from .store import GRID_NAMES, add_grid, grid_name, load_grid, read_store, write_store
from .synth import SynthConfig, generate
from .training import TrainConfig, train

DEFAULT_YEARS = {"train_years": [2019, 2020, 2021], "val_years": [2022], "test_years": [2023]}


# ---------------------------------------------------------------- manifests


def git_hash(path) -> str:
    """Content hash in git's blob form: sha1 of ``b"blob <size>\\0" + bytes``."""
    p = Path(path)
    h = hashlib.sha1(f"blob {p.stat().st_size}\0".encode())
    with open(p, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fingerprint(paths) -> dict:
    return {str(Path(p).name): git_hash(p) for p in sorted(paths, key=str) if Path(p).is_file()}


def store_fingerprint(store, grid: str | None = None) -> dict:
    store = Path(store)
    files = [store / "stations.json", store / "stations.bin", store / "filled.bin"]
    if grid and grid != "none":
        files += [store / f"{grid}.json", store / f"{grid}.bin"]
    return fingerprint(files)


def write_manifest(out_dir, command: str, config: dict, seed, inputs: dict, outputs) -> None:
    """RunManifest next to the outputs; the only file carrying a timestamp."""
    out_dir = Path(out_dir)
    doc = {
        "command": command,
        "version": __version__,
        "config_hash": checkpoint.config_hash(config),
        "seed": seed,
        "inputs": inputs,
        "outputs": fingerprint(outputs),
        "created": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _say(msg: str) -> None:
    print(msg, flush=True)


def _read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    return doc


def _env_seed() -> int | None:
    raw = os.environ.get("STATIONCAST_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"STATIONCAST_SEED must be an integer, got {raw!r}") from None


def _source(name: str) -> str:
    """CLI grid name to source tag (``hrrr-a`` -> ``HRRR-A``)."""
    name = name.lower()
    if name == "none":
        return "none"
    if name not in GRID_NAMES:
        raise ConfigurationError(f"unknown grid {name!r}; choose from none, {', '.join(GRID_NAMES)}")
    return GRID_NAMES[name]


def _cli_grid(source: str) -> str:
    return "none" if source == "none" else grid_name(source)


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    values = _read_json(args.config) if args.config else {}
    fields = {f.name for f in dataclasses.fields(SynthConfig)}
    extra = sorted(set(values) - fields)
    if extra:
        raise ConfigurationError(f"unknown synth config keys: {extra}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    seed = args.seed if args.seed is not None else values.get("seed", _env_seed())
    if seed is not None:
        values["seed"] = int(seed)
    cfg = SynthConfig(**values)
    _say(f"resolved synth config: {json.dumps(cfg.to_dict(), sort_keys=True)}")
    data = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = [out / "stations.csv", out / "synth_config.json"]
    write_station_csv(data.stations, out / "stations.csv")
    (out / "synth_config.json").write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n")
    grids = [data.truth, data.biased] + ([] if args.no_forecast else [data.forecast])
    for g in grids:
        name = grid_name(g.source)
        write_gridpack(g, out / f"{name}.json")
        outputs += [out / f"{name}.json", out / f"{name}.bin"]
    write_manifest(out, "synth", cfg.to_dict(), cfg.seed, {}, outputs)
    _say(f"wrote {len(data.stations)} stations and {len(grids)} grids to {out}")
    return 0


# ---------------------------------------------------------------- ingest


def cmd_ingest(args) -> int:
    stations = []
    for p in args.stations:
        stations += read_station_csv(p)
    ids = [s.station_id for s in stations]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise DataError(f"station ids appear in more than one file: {dup[:5]}")
    span = None
    if args.start or args.end:
        if not (args.start and args.end):
            raise ConfigurationError("give both --start and --end")
        span = (np.datetime64(args.start.rstrip("Z"), "h"), np.datetime64(args.end.rstrip("Z"), "h"))
    kept, report = clean(stations, span, args.qc_threshold)
    table = align(kept)
    filled = np.stack([s.filled for s in kept], axis=1)
    out = Path(args.out)
    write_store(table, filled, out)
    outputs = [out / "stations.json", out / "stations.bin", out / "filled.bin"]
    for g in args.grid or []:
        name = add_grid(out, g)
        outputs += [out / f"{name}.json", out / f"{name}.bin"]
    doc = {
        "qc_threshold": args.qc_threshold,
        "span": [str(table.times[0]) + ":00:00Z", str(table.times[-1]) + ":00:00Z"],
        "n_input": len(stations),
        "n_kept": len(kept),
        "stations": report,
    }
    (out / "ingest_report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    outputs.append(out / "ingest_report.json")
    write_manifest(out, "ingest", {"qc_threshold": args.qc_threshold}, None, fingerprint(args.stations), outputs)
    _say(f"kept {len(kept)} of {len(stations)} stations, {int(filled.sum())} station-hours front-filled")
    return 0


# ---------------------------------------------------------------- graph


def cmd_graph(args) -> int:
    table, _ = read_store(args.data)
    grid = load_grid(args.data, args.grid)
    graph = make_graph(table, grid, k=args.k, mode=args.mode)
    Path(args.out).write_text(graph.to_json() + "\n")
    _say(f"{graph.n_stations} stations, {len(graph.station_edges)} station edges, {graph.k} grid links each")
    return 0


# ---------------------------------------------------------------- train


TRAIN_FLAGS = {
    "lead": "lead",
    "epochs": "epochs",
    "learning_rate": "learning_rate",
    "weight_decay": "weight_decay",
    "batch_size": "batch_size",
    "back_hours": "back_hours",
    "train_stride": "train_stride",
    "val_stride": "val_stride",
    "model": "model",
}


def resolve_train_config(args) -> dict:
    """Defaults < config file < flags; the seed falls back to ``STATIONCAST_SEED``."""
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    allowed = fields | set(DEFAULT_YEARS) | {"model_config"}
    doc = _read_json(args.config) if args.config else {}
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ConfigurationError(f"unknown config keys: {extra}")
    resolved = dict(TrainConfig().to_dict(), **DEFAULT_YEARS, model_config={})
    seed_set = "seed" in doc
    resolved.update(doc)
    if "grid" in doc:
        resolved["grid"] = _source(doc["grid"]) if doc["grid"].lower() in GRID_NAMES or doc["grid"] == "none" else doc["grid"]
    for flag, key in TRAIN_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            resolved[key] = v
    if args.grid is not None:
        resolved["grid"] = _source(args.grid)
    if args.no_clip:
        resolved["clip_norm"] = None
    for key in DEFAULT_YEARS:
        v = getattr(args, key, None)
        if v:
            resolved[key] = list(v)
    if args.seed is not None:
        resolved["seed"] = args.seed
    elif not seed_set and _env_seed() is not None:
        resolved["seed"] = _env_seed()
    return resolved


def _split_config(resolved: dict):
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    cfg = TrainConfig(**{k: v for k, v in resolved.items() if k in fields})
    years = [tuple(resolved[k]) for k in ("train_years", "val_years", "test_years")]
    return cfg, resolved.get("model_config") or {}, years


def cmd_train(args) -> int:
    resolved = resolve_train_config(args)
    _say(f"resolved config: {json.dumps(resolved, sort_keys=True)}")
    cfg, model_cfg, (ty, vy, sy) = _split_config(resolved)
    table, _ = read_store(args.data)
    gname = _cli_grid(cfg.grid)
    grid = load_grid(args.data, gname)
    run = prepare_run(table, grid, cfg, model_cfg, ty, vy, sy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _say(
        f"{cfg.model} / grid {gname} / lead {cfg.lead}: {len(run.train_set)} train, {len(run.val_set)} val samples"
    )
    log_rows = []

    def log(row):
        log_rows.append(row)
        e, tr, va = row
        _say(f"epoch {e:4d}  train {'-' if tr is None else f'{tr:.6f}'}  val {va:.6f}")

    manifest = {
        "model": run.model.spec(),
        "train": cfg.to_dict(),
        "years": {"train": list(ty), "val": list(vy), "test": list(sy)},
        "grid": cfg.grid,
        "lead": cfg.lead,
        "back_hours": cfg.back_hours,
        "grid_length": run.model.grid_length,
        "graph": {"k": run.model.graph_k, "mode": run.model.graph_mode},
        "norm": run.norm.to_dict(),
        "config_hash": checkpoint.config_hash(resolved),
        "data": store_fingerprint(args.data, gname),
    }
    status = 0
    try:
        result = train(run.model, run.train_set, run.val_set, cfg, log=log)
    except DivergenceError as exc:
        result = exc.result
        _say(f"error: {exc}; keeping the best checkpoint so far (epoch {result.best_epoch})")
        status = exc.exit_code
    manifest.update(best_epoch=result.best_epoch, best_val=result.best_val)
    checkpoint.save(out / "model.ckpt", result.params, manifest)
    run.norm.save(out / "norm.json")
    (out / "train_log.csv").write_text(result.log_csv())
    (out / "config.json").write_text(json.dumps(resolved, indent=1, sort_keys=True) + "\n")
    outputs = [out / n for n in ("model.ckpt", "norm.json", "train_log.csv", "config.json")]
    write_manifest(out, "train", resolved, cfg.seed, manifest["data"], outputs)
    _say(f"best epoch {result.best_epoch}, validation loss {result.best_val:.6f}; wrote {out / 'model.ckpt'}")
    return status


# ---------------------------------------------------------------- loading checkpoints


def _load_checkpoint(path):
    params, manifest = checkpoint.load(path)
    model = Model.from_spec(manifest["model"])
    norm = NormStats.from_dict(manifest["norm"])
    return params, manifest, model, norm


def check_compatible(manifest: dict, requested: dict) -> None:
    """Refuse when a requested setting differs from the checkpoint's."""
    diffs = [
        f"  {k}: checkpoint {manifest[k]!r}, requested {v!r}"
        for k, v in requested.items()
        if v is not None and manifest.get(k) != v
    ]
    if diffs:
        raise ConfigurationError("checkpoint/config mismatch:\n" + "\n".join(diffs))


def _checkpoint_run(args, manifest, model, norm, table, test_years=None):
    gname = _cli_grid(manifest["grid"])
    grid = load_grid(args.data, gname)
    if grid is not None:
        length = grid_window_length(manifest["back_hours"], manifest["lead"], grid)
        check_compatible({"grid_length": manifest["grid_length"]}, {"grid_length": length})
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    cfg = TrainConfig(**{k: v for k, v in manifest["train"].items() if k in fields})
    years = manifest["years"]
    test = tuple(test_years) if test_years else tuple(years["test"])
    train_y = tuple(y for y in years["train"] if y not in test)
    val_y = tuple(y for y in years["val"] if y not in test)
    run = prepare_run(table, grid, cfg, model.config.to_dict(), train_y, val_y, test, norm=norm)
    return run, grid


# ---------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    table, _ = read_store(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {}
    if args.checkpoint:
        if args.baseline:
            raise ConfigurationError("give either --checkpoint or --baseline, not both")
        params, manifest, model, norm = _load_checkpoint(args.checkpoint)
        requested = {
            "lead": args.lead[0] if args.lead and len(args.lead) == 1 else None,
            "grid": _source(args.grid) if args.grid else None,
            "back_hours": args.back_hours,
        }
        if args.lead and len(args.lead) > 1:
            raise ConfigurationError(
                f"a checkpoint serves one lead (checkpoint lead {manifest['lead']}); requested {args.lead}"
            )
        check_compatible(manifest, requested)
        run, _ = _checkpoint_run(args, manifest, model, norm, table, args.test_years)
        from .training import ModelForecaster

        forecaster = ModelForecaster(model, params, norm, name=args.name or model.kind, source=_cli_grid(manifest["grid"]))
        sets = {manifest["lead"]: run.test_set}
        inputs = fingerprint([args.checkpoint])
        config = {"checkpoint": manifest["config_hash"], "test_years": list(run.test_years)}
    elif args.baseline:
        if not args.lead:
            raise ConfigurationError("--lead is required for baselines")
        gname = (args.grid or "none").lower()
        grid = load_grid(args.data, gname)
        back = args.back_hours if args.back_hours is not None else 48
        years = args.test_years or DEFAULT_YEARS["test_years"]
        graph = make_graph(table, grid, k=1)
        unit = NormStats(
            np.zeros(4), np.ones(4), None if grid is None else np.zeros(4), None if grid is None else np.ones(4), np.zeros(2), 1.0
        )
        if args.baseline == "persistence":
            forecaster = Persistence()
            grid_for_samples = None
        else:
            if grid is None:
                raise ConfigurationError("interpolation needs --grid")
            forecaster = Interpolation(grid, graph.nearest)
            grid_for_samples = None
        if args.name:
            forecaster.name = args.name
        sets = {}
        for lead in args.lead:
            s = make_samples(table, grid_for_samples, back, lead, graph, unit, years=years)
            if grid is not None:
                s = _restrict_to_grid(s, grid, back, lead)
            sets[lead] = s
        config = {"baseline": args.baseline, "grid": gname, "back_hours": back, "leads": list(args.lead), "test_years": list(years)}
    else:
        raise ConfigurationError("give --checkpoint or --baseline")
    report, raw = evaluate(forecaster, sets, keep_predictions=True)
    report.save(out / "report.json")
    report.write_station_csv(out / "station_errors.csv")
    outputs = [out / "report.json", out / "station_errors.csv"]
    for lead, (pred, true) in sorted(raw.items()):
        np.save(out / f"predictions_l{lead}.npy", pred)
        np.save(out / f"targets_l{lead}.npy", true)
        outputs += [out / f"predictions_l{lead}.npy", out / f"targets_l{lead}.npy"]
    write_manifest(out, "evaluate", config, None, dict(inputs, **store_fingerprint(args.data)), outputs)
    for lead in report.leads:
        m = report.metrics[lead]
        if m is None:
            _say(f"lead {lead:3d}: not available")
        else:
            _say(f"lead {lead:3d}: wind {m['wind']:.4f}  T {m['temperature']:.4f}  Td {m['dewpoint']:.4f}")
    mean = report.mean
    if mean["wind"] is not None:
        _say(f"mean     : wind {mean['wind']:.4f}  T {mean['temperature']:.4f}  Td {mean['dewpoint']:.4f}")
    return 0


def _restrict_to_grid(samples: SampleSet, grid, back, lead) -> SampleSet:
    """Drop anchors whose target hour is outside the grid record."""
    from .samples import grid_offset

    off = grid_offset(samples.source.table, grid)
    t = samples.anchors + off + lead
    keep = (t >= 0) & (t < grid.n_steps)
    return SampleSet(samples.source, samples.anchors[keep], samples.skipped)


# ---------------------------------------------------------------- forecast


def cmd_forecast(args) -> int:
    table, _ = read_store(args.data)
    params, manifest, model, norm = _load_checkpoint(args.checkpoint)
    check_compatible(manifest, {"grid": _source(args.grid) if args.grid else None})
    gname = _cli_grid(manifest["grid"])
    grid = load_grid(args.data, gname)
    lead, back = manifest["lead"], manifest["back_hours"]
    if grid is not None:
        length = grid_window_length(back, lead, grid)
        check_compatible({"grid_length": manifest["grid_length"]}, {"grid_length": length})
    graph = make_graph(table, grid, manifest["graph"]["k"], manifest["graph"]["mode"])
    src = WindowSource(table, grid, graph, norm, back, lead)
    anchor = np.datetime64(args.anchor.rstrip("Z"), "h")
    t = int((anchor - table.start).astype(np.int64))
    if t - back < 0 or t >= table.n_steps:
        raise ConfigurationError(f"anchor {args.anchor} lacks {back} hours of station history in the store")
    if grid is not None:
        tg = t + src.offset
        if tg - back < 0 or tg + src.lead_eff >= grid.n_steps:
            raise ConfigurationError(f"anchor {args.anchor} is outside the grid record for this window")
    samples = SampleSet(src, [t])
    batch = samples.batch([0])
    pred = model.predict(params, batch)[0] * norm.station_std + norm.station_mean
    if grid is not None:
        past = back + 1
        _say(f"grid window: {past} past steps + {src.lead_eff} future steps ({grid.source})")
    valid = anchor + np.timedelta64(lead, "h")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "lat", "lon", "anchor", "valid_time", "lead", *VARIABLES])
        for i, sid in enumerate(table.station_ids):
            w.writerow(
                [sid, repr(float(table.lat[i])), repr(float(table.lon[i])), f"{anchor}:00:00Z", f"{valid}:00:00Z", lead]
                + [repr(float(x)) for x in pred[i]]
            )
    _say(f"wrote {len(table.station_ids)} station forecasts valid {valid}:00Z to {args.out}")
    return 0


# ---------------------------------------------------------------- plot / describe


def cmd_plot(args) -> int:
    reports = [EvalReport.load(p) for p in args.reports]
    paths = plot_reports(reports, args.out)
    for p in paths:
        _say(str(p))
    return 0


def cmd_describe(args) -> int:
    if args.checkpoint:
        params, manifest, model, _ = _load_checkpoint(args.checkpoint)
        _say(f"{model.kind}  grid {manifest['grid']}  lead {manifest['lead']}  back hours {manifest['back_hours']}")
    else:
        if not args.model:
            raise ConfigurationError("give --checkpoint or --model")
        values = _read_json(args.config) if args.config else {}
        values = values.get("model_config", values)
        source = _source(args.grid or "none")
        if source == "none":
            length = None
        else:
            class _G:
                is_forecast = source == "HRRR-F"
                max_lead = 18

            length = grid_window_length(args.back_hours, args.lead, _G)
        model = Model(args.model, values, args.back_hours, length)
        params = model.init_params(0)
    _say(describe(params))
    return 0


def cmd_benchmark(args) -> int:
    from .benchmark import default_config, orderings, run_benchmark

    cfg = _read_json(args.config) if args.config else default_config()
    res = run_benchmark(cfg, log=_say)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for key, rep in res.reports.items():
        rep.save(out / f"{key.replace('+', '_')}.json")
    checks = orderings(res)
    for name, ok, detail in checks:
        _say(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    plot_reports(list(res.reports.values()), out)
    _say(f"benchmark took {res.seconds / 60:.1f} min")
    return 0 if all(ok for _, ok, _ in checks) else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stationcast", description="Off-grid station forecasting toolkit.")
    p.add_argument("--version", action="version", version=f"stationcast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--no-forecast", action="store_true", help="skip the (large) forecast gridpack")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="QC, align and front-fill station CSVs into a store")
    s.add_argument("stations", nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--grid", action="append", help="gridpack manifest to copy into the store")
    s.add_argument("--qc-threshold", type=float, default=0.9)
    s.add_argument("--start")
    s.add_argument("--end")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("graph", help="build and dump the station/grid graph")
    s.add_argument("--data", required=True)
    s.add_argument("--grid", default="era5")
    s.add_argument("--k", type=int, default=8)
    s.add_argument("--mode", choices=["delaunay", "fully_connected"], default="delaunay")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("train", help="train one model for one lead time")
    s.add_argument("--data", required=True)
    s.add_argument("--model", choices=["transformer", "mpnn", "mlp"])
    s.add_argument("--grid", choices=["none", *GRID_NAMES])
    s.add_argument("--lead", type=int)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--weight-decay", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--back-hours", type=int)
    s.add_argument("--train-stride", type=int)
    s.add_argument("--val-stride", type=int)
    s.add_argument("--no-clip", action="store_true", help="disable gradient clipping")
    s.add_argument("--train-years", type=int, nargs="+")
    s.add_argument("--val-years", type=int, nargs="+")
    s.add_argument("--test-years", type=int, nargs="+")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a checkpoint or a baseline on the test years")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint")
    s.add_argument("--baseline", choices=["persistence", "interpolation"])
    s.add_argument("--grid", choices=["none", *GRID_NAMES])
    s.add_argument("--lead", type=int, nargs="+")
    s.add_argument("--back-hours", type=int)
    s.add_argument("--test-years", type=int, nargs="+")
    s.add_argument("--name")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("forecast", help="predict every station for one anchor time")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--anchor", required=True, help="ISO time of the latest observation, e.g. 2022-06-01T12")
    s.add_argument("--grid", choices=["none", *GRID_NAMES])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("plot", help="error-versus-lead SVGs from reports")
    s.add_argument("reports", nargs="+")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("describe", help="list parameter names, shapes and counts")
    s.add_argument("--checkpoint")
    s.add_argument("--model", choices=["transformer", "mpnn", "mlp"])
    s.add_argument("--config")
    s.add_argument("--back-hours", type=int, default=48)
    s.add_argument("--grid", choices=["none", *GRID_NAMES])
    s.add_argument("--lead", type=int, default=1)
    s.set_defaults(func=cmd_describe)

    s = sub.add_parser("benchmark", help="run the standard synthetic benchmark")
    s.add_argument("--config", help="benchmark JSON (defaults to the shipped one)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StationcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
