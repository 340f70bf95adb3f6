import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from stationcast import checkpoint
from stationcast.cli import git_hash, main
from stationcast.metrics import EvalReport, lead_metrics
from stationcast.plots import read_points
from stationcast.stations import read_station_csv
from stationcast.store import read_store

SYNTH = {"n_stations": 8, "mesh": [3, 3], "years": [2020, 2021, 2022], "bad_flag_fraction": 0.02}
TRAIN = {
    "model_config": {"d": 16, "n_heads": 2, "n_blocks": 1, "pos_width": 4},
    "train_years": [2020],
    "val_years": [2021],
    "test_years": [2022],
    "back_hours": 12,
    "train_stride": 24,
    "val_stride": 24,
    "epochs": 2,
}


def run(*argv):
    return main([str(a) for a in argv])


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_json(root / "synth.json", SYNTH)
    assert run("synth", "--config", cfg, "--out", root / "syn", "--no-forecast") == 0
    assert run("ingest", root / "syn" / "stations.csv", "--grid", root / "syn" / "era5.json", "--out", root / "store") == 0
    tcfg = write_json(root / "train.json", TRAIN)
    assert run("train", "--data", root / "store", "--model", "transformer", "--grid", "era5", "--lead", 8, "--config", tcfg, "--out", root / "run") == 0
    return root


def outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}


# ---------------------------------------------------------------- end to end


def test_end_to_end_smoke(world, tmp_path):
    ev = tmp_path / "ev"
    assert run("evaluate", "--data", world / "store", "--checkpoint", world / "run" / "model.ckpt", "--out", ev) == 0
    rep = EvalReport.load(ev / "report.json")
    assert rep.leads == [8] and rep.source == "era5"
    pred, true = np.load(ev / "predictions_l8.npy"), np.load(ev / "targets_l8.npy")
    again = lead_metrics(pred, true)
    assert all(abs(again[k] - v) <= 1e-12 for k, v in rep.metrics[8].items())
    per = list(csv.DictReader(open(ev / "station_errors.csv")))
    assert len(per) == 8 * 5
    ep = tmp_path / "evp"
    assert run("evaluate", "--data", world / "store", "--baseline", "persistence", "--lead", 1, 8, "--back-hours", 12, "--test-years", 2022, "--out", ep) == 0
    assert run("plot", ev / "report.json", ep / "report.json", "--out", tmp_path / "plots") == 0
    pts = read_points(tmp_path / "plots" / "error_vs_lead_wind.svg")
    assert pts["transformer (era5)"] == [(8, rep.metrics[8]["wind"])]
    assert len(pts["persistence (none)"]) == 2


def test_checkpoint_manifest(world):
    _, man = checkpoint.load(world / "run" / "model.ckpt")
    assert man["lead"] == 8 and man["grid"] == "ERA5" and man["back_hours"] == 12
    assert man["grid_length"] == 12 + 1 + 8
    assert man["years"] == {"train": [2020], "val": [2021], "test": [2022]}
    assert set(man["norm"]) >= {"station_mean", "station_std"}
    assert man["model"]["kind"] == "transformer"
    log = (world / "run" / "train_log.csv").read_text().splitlines()
    assert log[0] == "epoch,train_loss,val_loss" and len(log) == 4


def test_run_manifest(world):
    man = json.loads((world / "run" / "manifest.json").read_text())
    assert man["command"] == "train" and "created" in man
    assert man["outputs"]["model.ckpt"] == git_hash(world / "run" / "model.ckpt")
    blob = subprocess.run(["git", "hash-object", str(world / "run" / "norm.json")], capture_output=True, text=True)
    if blob.returncode == 0:
        assert man["outputs"]["norm.json"] == blob.stdout.strip()


def test_forecast_csv(world, tmp_path, capsys):
    out = tmp_path / "f.csv"
    assert run("forecast", "--data", world / "store", "--checkpoint", world / "run" / "model.ckpt", "--anchor", "2022-03-04T05", "--out", out) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 8 and rows[0]["valid_time"] == "2022-03-04T13:00:00Z"
    assert "13 past steps + 8 future steps" in capsys.readouterr().out


def test_describe_lists_parameters(world, capsys):
    assert run("describe", "--checkpoint", world / "run" / "model.ckpt") == 0
    text = capsys.readouterr().out
    assert "block0.attn.q.w" in text and text.strip().splitlines()[-1].startswith("total")


def test_graph_dump(world, tmp_path):
    assert run("graph", "--data", world / "store", "--k", 2, "--out", tmp_path / "g.json") == 0
    g = json.loads((tmp_path / "g.json").read_text())
    assert len(g["grid_links"]) == 8 and len(g["grid_links"][0]) == 2


# ---------------------------------------------------------------- ingest


def test_ingest_round_trip(world):
    table, filled = read_store(world / "store")
    raw = {s.station_id: s for s in read_station_csv(world / "syn" / "stations.csv")}
    assert list(table.station_ids) == sorted(raw)
    for i, sid in enumerate(table.station_ids):
        s = raw[sid]
        pos = (s.times - table.start).astype(np.int64)
        good = np.isin(s.flags, ["Screened", "Verified"]) & ~np.isnan(s.values).any(axis=1)
        assert np.max(np.abs(table.values[pos[good], i] - s.values[good])) <= 1e-12
    report = json.loads((world / "store" / "ingest_report.json").read_text())
    assert report["n_kept"] == 8 and filled.sum() > 0


def test_ingest_line_numbered_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "station_id,lat,lon,timestamp,u,v,temperature,dewpoint,qc_flag\n"
        "A,40,-75,2021-01-01T00:00:00Z,1,2,3,4,Screened\n"
        "A,40,-75,2021-01-01T01:00:00Z,1,x,3,4,Screened\n"
    )
    assert run("ingest", bad, "--out", tmp_path / "s") == 3
    assert "bad.csv:3:" in capsys.readouterr().err


# ---------------------------------------------------------------- refusal and exit codes


def test_lead_mismatch_refused(world, tmp_path, capsys):
    ckpt = world / "run" / "model.ckpt"
    assert run("evaluate", "--data", world / "store", "--checkpoint", ckpt, "--lead", 24, "--out", tmp_path / "e") == 2
    err = capsys.readouterr().err
    assert "mismatch" in err and "lead: checkpoint 8, requested 24" in err
    assert run("evaluate", "--data", world / "store", "--checkpoint", ckpt, "--grid", "hrrr-a", "--out", tmp_path / "e") == 2
    assert "grid: checkpoint 'ERA5', requested 'HRRR-A'" in capsys.readouterr().err


def test_exit_codes(world, tmp_path):
    bad = write_json(tmp_path / "bad.json", {"learnig_rate": 1e-3})
    assert run("train", "--data", world / "store", "--config", bad, "--out", tmp_path / "r") == 2
    assert run("train", "--data", tmp_path / "nowhere", "--out", tmp_path / "r") == 3
    assert run("evaluate", "--data", world / "store", "--baseline", "interpolation", "--lead", 1, "--grid", "hrrr-f", "--out", tmp_path / "e") == 3
    with pytest.raises(SystemExit) as info:
        run("train", "--data", world / "store", "--grid", "gfs", "--out", tmp_path / "r")
    assert info.value.code == 2


def test_divergence_exits_4_with_last_good_checkpoint(world, tmp_path):
    cfg = write_json(tmp_path / "t.json", dict(TRAIN, learning_rate=1e300, weight_decay=0.0))
    out = tmp_path / "r"
    code = run("train", "--data", world / "store", "--grid", "none", "--lead", 1, "--config", cfg, "--no-clip", "--out", out)
    assert code == 4
    params, man = checkpoint.load(out / "model.ckpt")
    assert man["best_epoch"] == 0 and all(np.all(np.isfinite(v)) for v in params.values())


def test_console_script_module():
    res = subprocess.run([sys.executable, "-m", "stationcast", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "stationcast" in res.stdout


# ---------------------------------------------------------------- configuration


def test_precedence_and_env_seed(world, tmp_path, monkeypatch, capsys):
    cfg = write_json(tmp_path / "t.json", dict(TRAIN, epochs=1, learning_rate=5e-4))
    monkeypatch.setenv("STATIONCAST_SEED", "11")
    assert run("train", "--data", world / "store", "--grid", "none", "--lead", 1, "--config", cfg, "--learning-rate", 2e-4, "--out", tmp_path / "a") == 0
    resolved = json.loads((tmp_path / "a" / "config.json").read_text())
    assert resolved["seed"] == 11 and resolved["learning_rate"] == 2e-4 and resolved["epochs"] == 1
    assert resolved["batch_size"] == 128
    assert "resolved config:" in capsys.readouterr().out
    assert run("train", "--data", world / "store", "--grid", "none", "--lead", 1, "--config", cfg, "--seed", 3, "--out", tmp_path / "b") == 0
    assert json.loads((tmp_path / "b" / "config.json").read_text())["seed"] == 3


def test_train_idempotent(world, tmp_path):
    cfg = world / "train.json"
    for d in ("a", "b"):
        assert run("train", "--data", world / "store", "--model", "transformer", "--grid", "era5", "--lead", 8, "--config", cfg, "--out", tmp_path / d) == 0
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b") == outputs(world / "run")
    ma, mb = (json.loads((tmp_path / d / "manifest.json").read_text()) for d in ("a", "b"))
    ma.pop("created"), mb.pop("created")
    assert ma == mb


def test_synth_idempotent(tmp_path):
    cfg = write_json(tmp_path / "s.json", {"n_stations": 3, "mesh": [2, 2], "years": [2021]})
    for d in ("a", "b"):
        assert run("synth", "--config", cfg, "--out", tmp_path / d, "--seed", 5) == 0
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b")
    assert json.loads((tmp_path / "a" / "synth_config.json").read_text())["seed"] == 5


# ---------------------------------------------------------------- forecast grid window


@pytest.fixture(scope="module")
def forecast_store(tmp_path_factory):
    root = tmp_path_factory.mktemp("hrrrf")
    cfg = write_json(root / "s.json", {"n_stations": 4, "mesh": [2, 2], "years": [2020, 2021, 2022]})
    assert run("synth", "--config", cfg, "--out", root / "syn") == 0
    assert run("ingest", root / "syn" / "stations.csv", "--grid", root / "syn" / "hrrr-f.json", "--out", root / "store") == 0
    return root


def test_forecast_grid_window_caps_at_18(forecast_store, tmp_path, capsys):
    root = forecast_store
    cfg = write_json(tmp_path / "t.json", dict(TRAIN, epochs=1, model_config={"latent": 8}))
    out = tmp_path / "r"
    assert run("train", "--data", root / "store", "--model", "mlp", "--grid", "hrrr-f", "--lead", 24, "--config", cfg, "--out", out) == 0
    _, man = checkpoint.load(out / "model.ckpt")
    assert man["grid_length"] == 12 + 1 + 18
    capsys.readouterr()
    assert run("forecast", "--data", root / "store", "--checkpoint", out / "model.ckpt", "--anchor", "2022-05-01T00", "--out", tmp_path / "f.csv") == 0
    assert "13 past steps + 18 future steps (HRRR-F)" in capsys.readouterr().out
    assert run("evaluate", "--data", root / "store", "--baseline", "interpolation", "--grid", "hrrr-f", "--lead", 8, 24, "--test-years", 2022, "--out", tmp_path / "e") == 0
    rep = EvalReport.load(tmp_path / "e" / "report.json")
    assert rep.metrics[24] is None and rep.metrics[8] is not None
