"""The standard synthetic benchmark and its qualitative ordering checks.

One synthetic world, a fixed list of (model, grid, leads) runs and the
two baselines, all scored on the same test anchors per lead.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .baselines import Interpolation, Persistence
from .metrics import EvalReport, evaluate
from .pipeline import prepare_run
from .synth import SynthConfig, generate
from .training import ModelForecaster, TrainConfig, train


def default_config() -> dict:
    return json.loads(resources.files("stationcast").joinpath("benchmark.json").read_text())


@dataclass
class BenchmarkResult:
    config: dict
    reports: dict = field(default_factory=dict)  # label -> EvalReport
    seconds: float = 0.0

    def wind(self, label: str, lead: int) -> float:
        return self.reports[label].metrics[lead]["wind"]

    def wind_mean(self, label: str, leads) -> float:
        return float(np.mean([self.wind(label, l) for l in leads]))


def label(model: str, grid: str) -> str:
    return f"{model}+{grid}"


def _restrict(samples, anchors):
    return samples.subset(np.flatnonzero(np.isin(samples.anchors, anchors)))


def run_benchmark(config: dict | None = None, log=print) -> BenchmarkResult:
    """Train every configured run and score it with the baselines."""
    cfg = config or default_config()
    t0 = time.time()
    data = generate(SynthConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg["synth"].items()}))
    table = data.table()
    grids = {"none": None, "HRRR-A": data.truth, "ERA5": data.biased, "HRRR-F": data.forecast}
    sp = cfg["splits"]
    years = (tuple(sp["train"]), tuple(sp["val"]), tuple(sp["test"]))
    res = BenchmarkResult(cfg)

    # reference anchors per lead: the truth-grid setup, the strictest window
    ref, refset = {}, {}
    truth = cfg["truth"]
    for lead in cfg["leads"]:
        tc = TrainConfig(**dict(cfg["train"], lead=lead, model="mlp", grid=truth))
        r = prepare_run(table, grids[truth], tc, cfg["models"]["mlp"], *years)
        refset[lead], ref[lead] = r, r.test_set.anchors

    for spec in cfg["runs"]:
        kind, gname = spec["model"], spec["grid"]
        reports = []
        for lead in spec["leads"]:
            tc = TrainConfig(**dict(cfg["train"], lead=lead, model=kind, grid=gname))
            run = prepare_run(table, grids[gname], tc, cfg["models"][kind], *years)
            t1 = time.time()
            out = train(run.model, run.train_set, run.val_set, tc)
            fc = ModelForecaster(run.model, out.params, run.norm, name=kind, source=gname)
            rep = evaluate(fc, _restrict(run.test_set, ref[lead]))
            reports.append(rep)
            log(
                f"{label(kind, gname):20s} lead {lead:2d}: wind {rep.metrics[lead]['wind']:.4f}"
                f"  (best epoch {out.best_epoch}, {time.time() - t1:.0f} s)"
            )
        res.reports[label(kind, gname)] = _merge(reports)

    sets = {lead: refset[lead].test_set for lead in cfg["leads"]}
    res.reports["persistence"] = evaluate(Persistence(), sets)
    for gname in ("HRRR-A", "ERA5", "HRRR-F"):
        rep = evaluate(Interpolation(grids[gname], refset[cfg["leads"][0]].graph.nearest), sets)
        res.reports[f"interpolation+{gname}"] = rep
    for key in ("persistence", "interpolation+HRRR-A", "interpolation+ERA5"):
        m = res.reports[key].metrics
        log(f"{key:20s} " + "  ".join(f"lead {l}: {m[l]['wind']:.4f}" for l in cfg["leads"]))
    res.seconds = time.time() - t0
    return res


def _merge(reports: list[EvalReport]) -> EvalReport:
    first = reports[0]
    out = EvalReport(first.name, first.source, [], {}, {}, first.station_ids, first.station_lat, first.station_lon)
    for r in reports:
        for lead in r.leads:
            out.leads.append(lead)
            out.metrics[lead] = r.metrics[lead]
            out.n_samples[lead] = r.n_samples[lead]
            out.per_station[lead] = r.per_station[lead]
    return out


def orderings(res: BenchmarkResult) -> list[tuple[str, bool, str]]:
    """The four qualitative checks as ``(name, passed, detail)``."""
    cfg = res.config
    leads, truth, degraded = cfg["leads"], cfg["truth"], cfg["degraded"]
    t_truth, t_none = label("transformer", truth), label("transformer", "none")
    checks = []

    a, b = res.wind_mean(t_truth, leads), res.wind_mean(t_none, leads)
    gain = 1 - a / b
    checks.append(("grid truth beats no grid by >= 20%", gain >= 0.20, f"{a:.4f} vs {b:.4f} ({gain:.1%})"))

    last = max(leads)
    pers = res.wind("persistence", last)
    trained = [k for k, r in res.reports.items() if "+" in k and not k.startswith("interpolation") and last in r.leads]
    worst = max(res.wind(k, last) for k in trained)
    detail = ", ".join(f"{k} {res.wind(k, last):.4f}" for k in trained) + f" vs persistence {pers:.4f}"
    checks.append((f"every trained model beats persistence at lead {last}", worst < pers, detail))

    interp = res.wind_mean(f"interpolation+{truth}", leads)
    gain = 1 - a / interp
    checks.append(("grid truth beats interpolation by >= 30%", gain >= 0.30, f"{a:.4f} vs {interp:.4f} ({gain:.1%})"))

    mid = sorted(leads)[len(leads) // 2]
    wt, wd, wn = res.wind(t_truth, mid), res.wind(label("transformer", degraded), mid), res.wind(t_none, mid)
    checks.append(
        (f"truth < degraded forecast < no grid at lead {mid}", wt < wd < wn, f"{wt:.4f} < {wd:.4f} < {wn:.4f}")
    )
    return checks
