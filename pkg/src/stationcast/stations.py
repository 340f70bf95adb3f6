"""Station observation series: CSV I/O, quality control and gap filling."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import VARIABLES
from .errors import ConfigurationError, DataError, IngestionError, ValidationError

SCREENED = "Screened"
VERIFIED = "Verified"
OTHER = "Other"
MISSING = "Missing"
# written by the ingest store for hours whose value was front-filled
FILLED = "Filled"
FLAGS = (SCREENED, VERIFIED, OTHER, MISSING, FILLED)
GOOD_FLAGS = (SCREENED, VERIFIED)

HEADER = ["station_id", "lat", "lon", "timestamp", "u", "v", "temperature", "dewpoint", "qc_flag"]
HEADER_SPEED = ["station_id", "lat", "lon", "timestamp", "speed", "direction", "temperature", "dewpoint", "qc_flag"]


def wind_components(speed, direction):
    """Convert meteorological speed/direction (direction the wind blows *from*,
    degrees clockwise from north) to eastward ``u`` and northward ``v``."""
    speed = np.asarray(speed, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if np.any(speed < 0):
        raise ValidationError("wind speed must be non-negative")
    if np.any((direction < 0) | (direction > 360)):
        raise ValidationError("wind direction must lie in [0, 360]")
    theta = np.deg2rad(direction)
    return -speed * np.sin(theta), -speed * np.cos(theta)


@dataclass
class StationSeries:
    station_id: str
    lat: float
    lon: float
    times: np.ndarray  # datetime64[h], strictly increasing
    values: np.ndarray  # [T, 4]; NaN where missing
    flags: np.ndarray  # [T] of str
    filled: np.ndarray = field(default=None)  # [T] bool

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype="datetime64[h]")
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1, len(VARIABLES))
        self.flags = np.asarray(self.flags, dtype=object)
        if self.filled is None:
            self.filled = self.flags == FILLED
        if not (len(self.times) == len(self.values) == len(self.flags)):
            raise DataError(f"{self.station_id}: times, values and flags differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times).astype(np.int64) <= 0):
            raise DataError(f"{self.station_id}: timestamps are not strictly increasing")

    def __len__(self):
        return len(self.times)


# ---------------------------------------------------------------- CSV


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


def _fmt_time(t: np.datetime64) -> str:
    return str(np.datetime64(t, "s")) + "Z"


def _parse_time(s: str) -> np.datetime64:
    s = s.strip()
    if s.endswith("Z"):
        s = s[:-1]
    elif s.endswith("+00:00"):
        s = s[:-6]
    t = np.datetime64(s, "s")
    th = t.astype("datetime64[h]")
    if th != t:
        raise ValueError(f"timestamp {s!r} is not on the hour")
    return th


def _num(s: str) -> float:
    return float("nan") if s.strip() == "" else float(s)


def read_station_csv(path) -> list[StationSeries]:
    """Read a station CSV; ``speed,direction`` columns are converted to u/v."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise IngestionError(f"{path}: file is empty")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header == HEADER:
        polar = False
    elif header == HEADER_SPEED:
        polar = True
    else:
        raise IngestionError(f"{path}:1: unexpected header {','.join(header)}")
    rows: dict[str, dict] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(HEADER):
            raise IngestionError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
        try:
            sid = row[0]
            lat, lon = float(row[1]), float(row[2])
            t = _parse_time(row[3])
            a, b, temp, dew = (_num(x) for x in row[4:8])
            flag = row[8].strip()
            if flag not in FLAGS:
                raise ValueError(f"unknown qc_flag {flag!r}")
            if polar and not (np.isnan(a) or np.isnan(b)):
                a, b = (float(x) for x in wind_components(a, b))
            elif polar:
                a = b = float("nan")
        except (ValueError, ValidationError) as exc:
            raise IngestionError(f"{path}:{lineno}: {exc}") from None
        rec = rows.setdefault(sid, {"lat": lat, "lon": lon, "t": [], "x": [], "f": []})
        if (rec["lat"], rec["lon"]) != (lat, lon):
            raise IngestionError(f"{path}:{lineno}: station {sid} changes location")
        rec["t"].append(t)
        rec["x"].append((a, b, temp, dew))
        rec["f"].append(flag)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    out = []
    for sid, rec in rows.items():
        times = np.array(rec["t"], dtype="datetime64[h]")
        order = np.argsort(times, kind="stable")
        times = times[order]
        if np.any(np.diff(times).astype(np.int64) == 0):
            raise IngestionError(f"{path}: station {sid} has duplicate timestamps")
        out.append(
            StationSeries(sid, rec["lat"], rec["lon"], times, np.array(rec["x"])[order], np.array(rec["f"], dtype=object)[order])
        )
    return out


def write_station_csv(stations, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for s in stations:
            lat, lon = repr(float(s.lat)), repr(float(s.lon))
            for t, x, f, filled in zip(s.times, s.values, s.flags, s.filled):
                flag = FILLED if filled else f
                w.writerow([s.station_id, lat, lon, _fmt_time(t), *(_fmt(v) for v in x), flag])


# ---------------------------------------------------------------- QC


def good_fraction(series: StationSeries, span=None) -> float:
    """Fraction of hours in ``span`` flagged Screened or Verified.

    ``span`` is ``(start, end)`` inclusive hours; hours with no row count as
    missing.  Defaults to the series' own extent.
    """
    if span is None:
        if len(series) == 0:
            return 0.0
        start, end = series.times[0], series.times[-1]
    else:
        start, end = (np.datetime64(x, "h") for x in span)
    total = int((end - start).astype(np.int64)) + 1
    if total <= 0:
        raise ConfigurationError("empty QC span")
    inside = (series.times >= start) & (series.times <= end)
    good = np.isin(series.flags[inside], GOOD_FLAGS) & ~series.filled[inside]
    return float(good.sum()) / total


def qc_filter(stations, span=None, threshold: float = 0.9):
    """Keep stations whose good-hour fraction over ``span`` is at least ``threshold``.

    Returns ``(kept, report)`` where the report maps station id to its
    fraction and decision.
    """
    if not 0 < threshold <= 1:
        raise ConfigurationError(f"QC threshold must lie in (0, 1], got {threshold}")
    kept, report = [], {}
    for s in stations:
        frac = good_fraction(s, span)
        keep = frac >= threshold
        report[s.station_id] = {"good_fraction": frac, "kept": bool(keep)}
        if keep:
            kept.append(s)
    if not kept:
        worst = max((r["good_fraction"] for r in report.values()), default=0.0)
        raise ConfigurationError(
            f"QC removed all {len(stations)} stations (best good fraction {worst:.3f} < {threshold})"
        )
    return kept, report


def mask_bad_hours(series: StationSeries) -> StationSeries:
    """Blank values of hours not flagged Screened or Verified."""
    bad = ~np.isin(series.flags, GOOD_FLAGS) & ~series.filled
    values = series.values.copy()
    values[bad] = np.nan
    return replace(series, values=values, filled=series.filled.copy())


def regularize(series: StationSeries, start=None, end=None) -> StationSeries:
    """Reindex onto a gap-free hourly axis; inserted hours are Missing."""
    start = series.times[0] if start is None else np.datetime64(start, "h")
    end = series.times[-1] if end is None else np.datetime64(end, "h")
    n = int((end - start).astype(np.int64)) + 1
    times = start + np.arange(n).astype("timedelta64[h]")
    values = np.full((n, len(VARIABLES)), np.nan)
    flags = np.full(n, MISSING, dtype=object)
    filled = np.zeros(n, dtype=bool)
    pos = (series.times - start).astype(np.int64)
    ok = (pos >= 0) & (pos < n)
    values[pos[ok]] = series.values[ok]
    flags[pos[ok]] = series.flags[ok]
    filled[pos[ok]] = series.filled[ok]
    return StationSeries(series.station_id, series.lat, series.lon, times, values, flags, filled)


def front_fill(series: StationSeries) -> StationSeries:
    """Replace each missing value with the most recent earlier value."""
    values = series.values
    if len(values) == 0:
        return series
    if np.any(np.isnan(values[0])):
        raise IngestionError(f"{series.station_id}: first hour has missing values, cannot front-fill")
    missing = np.isnan(values)
    idx = np.where(missing, 0, np.arange(len(values))[:, None])
    np.maximum.accumulate(idx, axis=0, out=idx)
    filled_vals = values[idx, np.arange(values.shape[1])]
    filled = series.filled | missing.any(axis=1)
    return StationSeries(series.station_id, series.lat, series.lon, series.times.copy(), filled_vals, series.flags.copy(), filled)


# ---------------------------------------------------------------- aligned table


@dataclass
class StationTable:
    """Stations on a shared hourly axis: ``values[t, station, variable]``."""

    station_ids: list[str]
    lat: np.ndarray
    lon: np.ndarray
    start: np.datetime64
    values: np.ndarray  # [T, N, 4]

    def __post_init__(self):
        self.start = np.datetime64(self.start, "h")
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_stations(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(self.n_steps).astype("timedelta64[h]")

    def years(self) -> np.ndarray:
        return self.times.astype("datetime64[Y]").astype(int) + 1970

    def subset(self, idx) -> StationTable:
        idx = np.asarray(idx)
        return StationTable([self.station_ids[i] for i in idx], self.lat[idx], self.lon[idx], self.start, self.values[:, idx])

    def to_series(self) -> list[StationSeries]:
        flags = np.full(self.n_steps, SCREENED, dtype=object)
        return [
            StationSeries(sid, float(self.lat[i]), float(self.lon[i]), self.times, self.values[:, i], flags.copy())
            for i, sid in enumerate(self.station_ids)
        ]


def align(stations) -> StationTable:
    """Stack series onto their common hourly span (union of extents)."""
    if not stations:
        raise DataError("no stations to align")
    start = min(s.times[0] for s in stations)
    end = max(s.times[-1] for s in stations)
    regs = [regularize(s, start, end) for s in stations]
    values = np.stack([r.values for r in regs], axis=1)
    return StationTable([s.station_id for s in stations], [s.lat for s in stations], [s.lon for s in stations], start, values)


def clean(stations, span=None, threshold: float = 0.9):
    """QC, regularise and front-fill; the ingest pipeline in one call.

    Returns ``(series, report)``.  Stations that cannot be front-filled
    (missing first hour) are dropped and reported.
    """
    if span is None:
        span = (min(s.times[0] for s in stations), max(s.times[-1] for s in stations))
    kept, report = qc_filter(stations, span, threshold)
    out = []
    for s in kept:
        r = mask_bad_hours(regularize(s, *span))
        n_missing = int(np.isnan(r.values).any(axis=1).sum())
        try:
            f = front_fill(r)
        except IngestionError as exc:
            report[s.station_id].update(kept=False, reason=str(exc))
            continue
        report[s.station_id]["filled_hours"] = n_missing
        out.append(f)
    if not out:
        raise ConfigurationError("no station survived QC and front-fill")
    return out, report
