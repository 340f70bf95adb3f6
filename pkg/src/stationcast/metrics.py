"""Error metrics and the evaluation report.

Aggregates use exactly rounded sums (``math.fsum``) so a report does not
depend on sample order and can be recomputed bit for bit from the dumped
predictions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import VARIABLES
from .errors import EvaluationError, UnsupportedLeadError

# report columns: wind vector error plus per-variable RMSE
METRICS = ("wind", "u", "v", "temperature", "dewpoint")


def exact_mean(x, axis=None):
    """Mean with an exactly rounded sum, optionally along one axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise EvaluationError("mean of an empty set")
    if axis is None:
        return math.fsum(x.ravel()) / x.size
    x = np.moveaxis(x, axis, -1)
    flat = x.reshape(-1, x.shape[-1])
    return np.array([math.fsum(r) for r in flat]).reshape(x.shape[:-1]) / x.shape[-1]


def wind_vector_error(pred_u, pred_v, true_u, true_v) -> np.ndarray:
    """Per-sample magnitude of the wind vector difference."""
    du = np.asarray(pred_u, dtype=np.float64) - true_u
    dv = np.asarray(pred_v, dtype=np.float64) - true_v
    return np.hypot(du, dv)


def rmse(pred, true) -> float:
    d = np.asarray(pred, dtype=np.float64) - np.asarray(true, dtype=np.float64)
    return math.sqrt(exact_mean(d * d))


def lead_metrics(pred: np.ndarray, true: np.ndarray) -> dict:
    """Aggregate errors for ``[S, N, 4]`` predictions against truth."""
    pred, true = np.asarray(pred, np.float64), np.asarray(true, np.float64)
    if pred.shape != true.shape or pred.ndim != 3 or pred.shape[-1] != len(VARIABLES):
        raise EvaluationError(f"predictions {pred.shape} and targets {true.shape} must both be [S, N, 4]")
    if pred.shape[0] == 0:
        raise EvaluationError("empty test set")
    out = {"wind": exact_mean(wind_vector_error(pred[..., 0], pred[..., 1], true[..., 0], true[..., 1]))}
    for j, var in enumerate(VARIABLES):
        out[var] = rmse(pred[..., j], true[..., j])
    return out


def station_metrics(pred: np.ndarray, true: np.ndarray) -> np.ndarray:
    """``[N, 5]`` per-station errors in :data:`METRICS` order."""
    wve = wind_vector_error(pred[..., 0], pred[..., 1], true[..., 0], true[..., 1])
    d2 = (pred - true) ** 2
    cols = [exact_mean(wve, axis=0)] + [np.sqrt(exact_mean(d2[..., j], axis=0)) for j in range(len(VARIABLES))]
    return np.stack(cols, axis=1)


@dataclass
class EvalReport:
    name: str
    source: str
    leads: list[int]
    metrics: dict[int, dict | None]  # None where the forecaster has no value at that lead
    n_samples: dict[int, int]
    station_ids: list[str] = field(default_factory=list)
    station_lat: list[float] = field(default_factory=list)
    station_lon: list[float] = field(default_factory=list)
    per_station: dict[int, list[list[float]]] = field(default_factory=dict)  # lead -> [N][5]

    @property
    def mean(self) -> dict:
        """Unweighted mean over the leads that have a value."""
        have = [self.metrics[l] for l in self.leads if self.metrics.get(l) is not None]
        if not have:
            return {m: None for m in METRICS}
        return {m: math.fsum(h[m] for h in have) / len(have) for m in METRICS}

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "source": self.source,
            "leads": list(self.leads),
            "metrics": {str(l): self.metrics[l] for l in self.leads},
            "mean": self.mean,
            "n_samples": {str(l): self.n_samples.get(l, 0) for l in self.leads},
            "stations": [
                {"id": s, "lat": la, "lon": lo} for s, la, lo in zip(self.station_ids, self.station_lat, self.station_lon)
            ],
            "per_station": {str(l): v for l, v in sorted(self.per_station.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalReport:
        leads = [int(l) for l in d["leads"]]
        st = d.get("stations", [])
        return cls(
            d["name"],
            d["source"],
            leads,
            {int(k): v for k, v in d["metrics"].items()},
            {int(k): v for k, v in d["n_samples"].items()},
            [s["id"] for s in st],
            [s["lat"] for s in st],
            [s["lon"] for s in st],
            {int(k): v for k, v in d.get("per_station", {}).items()},
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> EvalReport:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise EvaluationError(f"{path}: cannot read report: {exc}") from None

    def write_station_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["station_id", "lat", "lon", "var", "lead", "error"])
            for lead in sorted(self.per_station):
                rows = self.per_station[lead]
                for sid, la, lo, errs in zip(self.station_ids, self.station_lat, self.station_lon, rows):
                    for m, e in zip(METRICS, errs):
                        w.writerow([sid, repr(float(la)), repr(float(lo)), m, lead, repr(float(e))])


def evaluate(forecaster, sample_sets, keep_predictions: bool = False):
    """Score ``forecaster`` on one sample set per lead.

    ``sample_sets`` maps lead to :class:`~stationcast.samples.SampleSet` (a
    single set is accepted too).  Leads the forecaster cannot serve are
    recorded as ``None``.  With ``keep_predictions`` the raw predictions and
    targets are returned alongside the report.
    """
    if not isinstance(sample_sets, dict):
        sample_sets = {sample_sets.lead: sample_sets}
    if not sample_sets:
        raise EvaluationError("no sample sets to evaluate")
    leads = sorted(sample_sets)
    first = sample_sets[leads[0]].source.table
    report = EvalReport(
        getattr(forecaster, "name", type(forecaster).__name__),
        getattr(forecaster, "source", "none"),
        leads,
        {},
        {},
        list(first.station_ids),
        [float(x) for x in first.lat],
        [float(x) for x in first.lon],
    )
    raw = {}
    for lead in leads:
        samples = sample_sets[lead]
        if len(samples) == 0:
            raise EvaluationError(f"empty test set at lead {lead}")
        report.n_samples[lead] = len(samples)
        try:
            pred = np.asarray(forecaster.predict(samples), dtype=np.float64)
        except UnsupportedLeadError:
            report.metrics[lead] = None
            continue
        true = samples.target_raw()
        report.metrics[lead] = lead_metrics(pred, true)
        report.per_station[lead] = station_metrics(pred, true).tolist()
        if keep_predictions:
            raw[lead] = (pred, true)
    return (report, raw) if keep_predictions else report
