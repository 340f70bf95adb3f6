"""Synthetic multi-modal weather with known station/grid relationships.

The large-scale truth lives on a regular mesh: mean state, seasonal and
diurnal cycles, a few travelling waves and spatially smooth AR(1) noise.
Each station reads the truth of its nearest cell and applies a fixed local
operator (wind attenuation and rotation, additive temperature offset and
diurnal cycle), plus observation noise.  Two degraded gridded products are
derived from the truth:

* ``biased``: box-smoothed truth plus a constant offset (reanalysis analogue),
* ``forecast``: runs issued every hour whose error grows linearly with lead
  (operational-forecast analogue).

The truth grid itself plays the role of the high-quality analysis.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from . import VARIABLES
from .geometry import Projection, nearest_cell
from .grids import FORECAST_HORIZON, GridSeries
from .stations import MISSING, OTHER, SCREENED, VERIFIED, StationSeries, StationTable

U, V, T, D = range(4)


@dataclass(frozen=True)
class SynthConfig:
    n_stations: int = 60
    mesh: tuple[int, int] = (12, 12)
    lat_range: tuple[float, float] = (40.0, 44.4)
    lon_range: tuple[float, float] = (-76.0, -70.5)
    years: tuple[int, ...] = (2019, 2020, 2021, 2022)
    seed: int = 0
    # large-scale process; per-variable tuples are (u, v, temperature, dewpoint spread)
    mean: tuple[float, ...] = (1.5, 0.5, 10.0, 4.0)
    wave_amplitude: tuple[float, ...] = (1.5, 1.5, 1.5, 0.8)
    n_waves: int = 3
    wave_period_hours: tuple[float, float] = (20.0, 120.0)
    wavelength_km: tuple[float, float] = (400.0, 1600.0)
    ar_std: tuple[float, ...] = (2.5, 2.5, 2.0, 1.0)
    ar_timescale_hours: float = 18.0
    n_modes: int = 6
    seasonal_amplitude: float = 10.0
    diurnal_amplitude: float = 3.0
    # station local operators
    attenuation: tuple[float, float] = (0.35, 0.85)
    rotation_deg: tuple[float, float] = (-35.0, 35.0)
    temp_offset_std: float = 1.0
    local_diurnal: tuple[float, float] = (0.0, 3.0)
    obs_noise: tuple[float, ...] = (0.3, 0.3, 0.3, 0.3)
    bad_flag_fraction: float = 0.0
    # gridded products
    smooth_passes: int = 2
    bias_offset: tuple[float, ...] = (0.8, 0.4, 1.0, -0.8)
    forecast_error_std: tuple[float, ...] = (2.0, 2.0, 1.5, 1.5)
    forecast_error_timescale_hours: float = 6.0
    forecast_max_lead: int = FORECAST_HORIZON

    @classmethod
    def identity(cls, **overrides) -> SynthConfig:
        """Stations copy their nearest cell exactly and the products carry no bias."""
        base = dict(
            attenuation=(1.0, 1.0),
            rotation_deg=(0.0, 0.0),
            temp_offset_std=0.0,
            local_diurnal=(0.0, 0.0),
            obs_noise=(0.0, 0.0, 0.0, 0.0),
            smooth_passes=0,
            bias_offset=(0.0, 0.0, 0.0, 0.0),
        )
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


class LeadNoiseForecast:
    """Forecast runs computed on demand: truth plus lead-scaled error.

    The run issued at ``s`` predicts ``truth[s + k] + (k / max_lead) * error[s + k]``.
    """

    def __init__(self, truth: np.ndarray, error: np.ndarray, max_lead: int):
        self.truth, self.error, self.max_lead = truth, error, max_lead

    @property
    def n_leads(self) -> int:
        return self.max_lead + 1

    def values(self, issue, leads, cells=None) -> np.ndarray:
        issue = np.asarray(issue)
        leads = np.asarray(leads)
        valid = issue[:, None] + leads[None, :]
        if np.any(valid >= len(self.truth)):
            raise IndexError("forecast valid time beyond the end of the record")
        w = (leads / self.max_lead)[None, :, None, None]
        if cells is None:
            return self.truth[valid] + w * self.error[valid]
        return self.truth[valid][:, :, cells] + w * self.error[valid][:, :, cells]

    def to_array(self) -> np.ndarray:
        """Materialise ``[issue, lead, cell, variable]``; steps past the record are NaN."""
        n = len(self.truth)
        out = np.full((n, self.n_leads) + self.truth.shape[1:], np.nan)
        for k in range(self.n_leads):
            out[: n - k, k] = self.truth[k:] + (k / self.max_lead) * self.error[k:]
        return out


@dataclass
class SynthData:
    config: SynthConfig
    stations: list[StationSeries]
    truth: GridSeries  # analysis analogue ("HRRR-A")
    biased: GridSeries  # reanalysis analogue ("ERA5")
    forecast: GridSeries  # forecast analogue ("HRRR-F")
    station_cell: np.ndarray  # nearest cell per station
    attenuation: np.ndarray
    rotation: np.ndarray  # radians
    temp_offset: np.ndarray
    diurnal_amp: np.ndarray
    diurnal_phase: np.ndarray
    station_truth: np.ndarray = field(repr=False)  # [T, N, 4] before noise

    def table(self) -> StationTable:
        s = self.stations
        return StationTable(
            [x.station_id for x in s], [x.lat for x in s], [x.lon for x in s], s[0].times[0], np.stack([x.values for x in s], axis=1)
        )

    def grid(self, name: str) -> GridSeries:
        return {"hrrr-a": self.truth, "truth": self.truth, "era5": self.biased, "hrrr-f": self.forecast}[name.lower()]


def _ar1(rng_per_year, n_per_year, n_series, tau, std):
    """Stationary AR(1) rows ``[T, n_series]`` with innovations drawn per year."""
    phi = np.exp(-1.0 / tau)
    noise = np.concatenate([r.standard_normal((n, n_series)) for r, n in zip(rng_per_year, n_per_year)])
    noise *= std * np.sqrt(1 - phi**2)
    # start in the stationary distribution
    zi = (noise[0] / np.sqrt(1 - phi**2) * phi)[None, :]
    return lfilter([1.0], [1.0, -phi], noise, axis=0, zi=zi)[0]


def _smooth(values: np.ndarray, ny: int, nx: int, passes: int) -> np.ndarray:
    """3x3 box average with edge replication, ``passes`` times."""
    if passes == 0:
        return values.copy()
    g = values.reshape(values.shape[0], ny, nx, -1)
    for _ in range(passes):
        p = np.pad(g, ((0, 0), (1, 1), (1, 1), (0, 0)), mode="edge")
        g = sum(p[:, dy : dy + ny, dx : dx + nx] for dy in range(3) for dx in range(3)) / 9.0
    return g.reshape(values.shape)


def _hours(years) -> tuple[np.datetime64, list[int]]:
    start = np.datetime64(f"{years[0]}-01-01T00", "h")
    counts = [
        int((np.datetime64(f"{y + 1}-01-01T00", "h") - np.datetime64(f"{y}-01-01T00", "h")).astype(np.int64)) for y in years
    ]
    return start, counts


class _Field:
    """Random structure of the large-scale field, drawn once from the master seed."""

    def __init__(self, cfg: SynthConfig, rng: np.random.Generator, xy: np.ndarray):
        self.cfg = cfg
        nv = len(VARIABLES)
        self.wave_k = np.empty((nv, cfg.n_waves, 2))
        self.wave_w = np.empty((nv, cfg.n_waves))
        self.wave_phase = rng.uniform(0, 2 * np.pi, (nv, cfg.n_waves))
        for v in range(nv):
            lam = rng.uniform(*cfg.wavelength_km, cfg.n_waves)
            ang = rng.uniform(0, 2 * np.pi, cfg.n_waves)
            self.wave_k[v] = (2 * np.pi / lam)[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
            self.wave_w[v] = 2 * np.pi / rng.uniform(*cfg.wave_period_hours, cfg.n_waves)
        self.modes = self._draw_modes(rng, xy)
        self.diurnal_phase = rng.uniform(0, 24)

    def _draw_modes(self, rng, xy):
        cfg = self.cfg
        lam = rng.uniform(*cfg.wavelength_km, (len(VARIABLES), cfg.n_modes))
        ang = rng.uniform(0, 2 * np.pi, (len(VARIABLES), cfg.n_modes))
        ph = rng.uniform(0, 2 * np.pi, (len(VARIABLES), cfg.n_modes))
        k = (2 * np.pi / lam)[..., None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        # [var, mode, cell]
        return np.sqrt(2.0 / cfg.n_modes) * np.cos(np.einsum("vjc,mc->vjm", k, xy) + ph[..., None])

    def point_variance(self) -> np.ndarray:
        """Theoretical variance per (cell, variable) of the non-deterministic-mean part."""
        cfg = self.cfg
        waves = np.array(cfg.wave_amplitude) ** 2 / 2 * cfg.n_waves
        ar = np.array(cfg.ar_std)[:, None] ** 2 * (self.modes**2).sum(axis=1)
        var = waves[:, None] + ar
        var[T] += cfg.seasonal_amplitude**2 / 2 + cfg.diurnal_amplitude**2 / 2
        return var.T


def _grid_truth(cfg, fld: _Field, xy, start, counts, year_rngs):
    n = sum(counts)
    t = np.arange(n, dtype=np.float64)
    out = np.empty((n, len(xy), len(VARIABLES)))
    for v in range(len(VARIABLES)):
        coef = _ar1(year_rngs, counts, cfg.n_modes, cfg.ar_timescale_hours, cfg.ar_std[v])
        f = coef @ fld.modes[v] + cfg.mean[v]
        for j in range(cfg.n_waves):
            phase = xy @ fld.wave_k[v, j] + fld.wave_phase[v, j]
            f += cfg.wave_amplitude[v] * np.sin(phase[None, :] - fld.wave_w[v, j] * t[:, None])
        out[:, :, v] = f
    day_of_year = (t / 24.0) % 365.25
    hour = t % 24
    out[:, :, T] += (
        -cfg.seasonal_amplitude * np.cos(2 * np.pi * day_of_year / 365.25)
        + cfg.diurnal_amplitude * np.sin(2 * np.pi * (hour - fld.diurnal_phase) / 24)
    )[:, None]
    # the fourth component was generated as a spread; dewpoint = temperature - softplus(spread)
    out[:, :, D] = out[:, :, T] - np.logaddexp(0.0, out[:, :, D])
    return out


def generate(cfg: SynthConfig) -> SynthData:
    """Pure function of ``cfg`` (the seed lives in the config)."""
    master = np.random.default_rng([cfg.seed, 0])
    ny, nx = cfg.mesh
    lats = np.linspace(*cfg.lat_range, ny)
    lons = np.linspace(*cfg.lon_range, nx)
    proj = Projection.centered_on(lats, lons)
    glat, glon = np.meshgrid(lats, lons, indexing="ij")
    cell_xy = proj(glat.ravel(), glon.ravel())
    start, counts = _hours(cfg.years)
    n_steps = sum(counts)

    fld = _Field(cfg, master, cell_xy)
    st_lat = master.uniform(lats[0], lats[-1], cfg.n_stations)
    st_lon = master.uniform(lons[0], lons[-1], cfg.n_stations)
    # same projection the pipeline uses (centred on the stations), so the
    # generator and the graph agree on every station's nearest cell
    sproj = Projection.centered_on(st_lat, st_lon)
    cell = nearest_cell(sproj(st_lat, st_lon), sproj(glat.ravel(), glon.ravel()))
    atten = master.uniform(*cfg.attenuation, cfg.n_stations)
    rot = np.deg2rad(master.uniform(*cfg.rotation_deg, cfg.n_stations))
    t_off = master.normal(0, 1, cfg.n_stations) * cfg.temp_offset_std
    d_amp = master.uniform(*cfg.local_diurnal, cfg.n_stations)
    d_phase = master.uniform(0, 24, cfg.n_stations)

    truth_rngs = [np.random.default_rng([cfg.seed, 1, y]) for y in cfg.years]
    truth = _grid_truth(cfg, fld, cell_xy, start, counts, truth_rngs)

    # station truth: nearest-cell truth through the local operator
    g = truth[:, cell]
    c, s = np.cos(rot), np.sin(rot)
    st = np.empty_like(g)
    st[..., U] = atten * (c * g[..., U] - s * g[..., V])
    st[..., V] = atten * (s * g[..., U] + c * g[..., V])
    hour = np.arange(n_steps) % 24
    local = t_off[None, :] + d_amp[None, :] * np.sin(2 * np.pi * (hour[:, None] - d_phase[None, :]) / 24)
    st[..., T] = g[..., T] + local
    st[..., D] = g[..., D] + local

    obs_rngs = [np.random.default_rng([cfg.seed, 2, y]) for y in cfg.years]
    noise = np.concatenate([r.standard_normal((n, cfg.n_stations, len(VARIABLES))) for r, n in zip(obs_rngs, counts)])
    obs = st + noise * np.array(cfg.obs_noise)
    obs[..., D] = np.minimum(obs[..., D], obs[..., T])

    flag_rng = np.random.default_rng([cfg.seed, 3])
    times = start + np.arange(n_steps).astype("timedelta64[h]")
    stations = []
    for i in range(cfg.n_stations):
        flags = np.where(flag_rng.random(n_steps) < 0.5, SCREENED, VERIFIED).astype(object)
        if cfg.bad_flag_fraction > 0:
            bad = flag_rng.random(n_steps) < cfg.bad_flag_fraction
            bad[0] = False
            flags[bad] = np.where(flag_rng.random(bad.sum()) < 0.5, OTHER, MISSING)
        vals = obs[:, i].copy()
        vals[flags == MISSING] = np.nan
        stations.append(StationSeries(f"S{i:03d}", float(st_lat[i]), float(st_lon[i]), times, vals, flags))

    biased = _smooth(truth, ny, nx, cfg.smooth_passes) + np.array(cfg.bias_offset)

    err_rngs = [np.random.default_rng([cfg.seed, 4, y]) for y in cfg.years]
    err = np.empty_like(truth)
    modes_rng = np.random.default_rng([cfg.seed, 5])
    err_modes = fld._draw_modes(modes_rng, cell_xy)
    for v in range(len(VARIABLES)):
        coef = _ar1(err_rngs, counts, cfg.n_modes, cfg.forecast_error_timescale_hours, cfg.forecast_error_std[v])
        err[:, :, v] = coef @ err_modes[v]

    fc = LeadNoiseForecast(truth, err, cfg.forecast_max_lead)
    return SynthData(
        config=cfg,
        stations=stations,
        truth=GridSeries("HRRR-A", lats, lons, start, truth),
        biased=GridSeries("ERA5", lats, lons, start, biased),
        forecast=GridSeries("HRRR-F", lats, lons, start, truth, fc),
        station_cell=cell,
        attenuation=atten,
        rotation=rot,
        temp_offset=t_off,
        diurnal_amp=d_amp,
        diurnal_phase=d_phase,
        station_truth=st,
    )


def expected_correlation(data: SynthData) -> np.ndarray:
    """Theoretical ``[N, 4]`` correlation between nearest-cell truth and station observations.

    Uses the generator's closed-form variances; dewpoint is left as NaN
    because the softplus spread has no simple closed form.
    """
    cfg = data.config
    ny, nx = cfg.mesh
    lats = np.linspace(*cfg.lat_range, ny)
    lons = np.linspace(*cfg.lon_range, nx)
    proj = Projection.centered_on(lats, lons)
    glat, glon = np.meshgrid(lats, lons, indexing="ij")
    fld = _Field(cfg, np.random.default_rng([cfg.seed, 0]), proj(glat.ravel(), glon.ravel()))
    var = fld.point_variance()[data.station_cell]
    a, c, s = data.attenuation, np.cos(data.rotation), np.sin(data.rotation)
    sig = np.array(cfg.obs_noise) ** 2
    out = np.full((len(a), 4), np.nan)
    vu, vv = var[:, U], var[:, V]
    out[:, U] = a * c * vu / np.sqrt(vu * (a**2 * (c**2 * vu + s**2 * vv) + sig[U]))
    out[:, V] = a * c * vv / np.sqrt(vv * (a**2 * (s**2 * vu + c**2 * vv) + sig[V]))
    # temperature: grid diurnal and local diurnal cycles share the 24 h period
    gd, ld = cfg.diurnal_amplitude, data.diurnal_amp
    dphi = 2 * np.pi * (fld.diurnal_phase - data.diurnal_phase) / 24
    cov_dl = gd * ld / 2 * np.cos(dphi)
    vt = var[:, T]
    out[:, T] = (vt + cov_dl) / np.sqrt(vt * (vt + ld**2 / 2 + 2 * cov_dl + sig[T]))
    return out
