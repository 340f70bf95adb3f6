import numpy as np
import pytest

from stationcast.errors import ConfigurationError, IngestionError, ValidationError
from stationcast.stations import (
    FILLED,
    MISSING,
    OTHER,
    SCREENED,
    VERIFIED,
    StationSeries,
    align,
    clean,
    front_fill,
    good_fraction,
    qc_filter,
    read_station_csv,
    regularize,
    wind_components,
    write_station_csv,
)

T0 = np.datetime64("2021-01-01T00", "h")


def series(sid="A", n=100, flags=None, values=None, lat=40.0, lon=-75.0):
    times = T0 + np.arange(n).astype("timedelta64[h]")
    if values is None:
        values = np.arange(n * 4, dtype=float).reshape(n, 4)
    if flags is None:
        flags = [SCREENED] * n
    return StationSeries(sid, lat, lon, times, values, np.array(flags, dtype=object))


# ---------------------------------------------------------------- wind


@pytest.mark.parametrize(
    "speed,direction,expect",
    [(1.0, 180.0, (0.0, 1.0)), (0.0, 37.0, (0.0, 0.0)), (2.0, 90.0, (-2.0, 0.0)), (3.0, 0.0, (0.0, -3.0))],
)
def test_wind_components(speed, direction, expect):
    u, v = wind_components(speed, direction)
    assert np.allclose([u, v], expect, atol=1e-15)


def test_wind_rejects_negative_speed_and_bad_direction():
    with pytest.raises(ValidationError):
        wind_components(-1.0, 10.0)
    with pytest.raises(ValidationError):
        wind_components(1.0, 400.0)


def test_wind_speed_is_preserved():
    rng = np.random.default_rng(0)
    s, d = rng.uniform(0, 20, 50), rng.uniform(0, 360, 50)
    u, v = wind_components(s, d)
    assert np.allclose(np.hypot(u, v), s, rtol=1e-14)


# ---------------------------------------------------------------- QC


def test_qc_keeps_95_percent_screened():
    flags = [SCREENED] * 95 + [OTHER] * 5
    kept, report = qc_filter([series(flags=flags)])
    assert len(kept) == 1 and report["A"]["good_fraction"] == 0.95


def test_qc_boundary_drops_899_permille():
    good = series("good", 1000, [VERIFIED] * 1000)
    edge = series("edge", 1000, [SCREENED] * 899 + [MISSING] * 101)
    kept, report = qc_filter([good, edge], threshold=0.9)
    assert [s.station_id for s in kept] == ["good"]
    assert report["edge"]["good_fraction"] == pytest.approx(0.899) and not report["edge"]["kept"]


def test_qc_all_missing_dropped_and_empty_result_errors():
    dead = series("dead", 50, [MISSING] * 50, values=np.full((50, 4), np.nan))
    kept, report = qc_filter([series("ok", 50), dead])
    assert [s.station_id for s in kept] == ["ok"] and not report["dead"]["kept"]
    with pytest.raises(ConfigurationError, match="QC removed all"):
        qc_filter([dead])


def test_qc_counts_absent_rows_in_span_as_bad():
    s = series(n=90)
    span = (T0, T0 + np.timedelta64(99, "h"))
    assert good_fraction(s, span) == 0.9
    assert qc_filter([s], span)[1]["A"]["kept"]


def test_qc_is_idempotent():
    rng = np.random.default_rng(1)
    st = [series(str(i), 200, rng.choice([SCREENED, OTHER], 200, p=[0.9, 0.1])) for i in range(10)]
    a = qc_filter(st)[1]
    b = qc_filter(st)[1]
    assert a == b


def test_qc_threshold_validated():
    with pytest.raises(ConfigurationError):
        qc_filter([series()], threshold=0.0)


# ---------------------------------------------------------------- front fill


def test_front_fill_example():
    vals = np.array([5.0, np.nan, np.nan, 7.0])[:, None].repeat(4, axis=1)
    out = front_fill(series(n=4, values=vals))
    assert np.array_equal(out.values[:, 0], [5, 5, 5, 7])
    assert out.filled.tolist() == [False, True, True, False]


def test_front_fill_no_gaps_identity():
    s = series()
    out = front_fill(s)
    assert np.array_equal(out.values, s.values) and not out.filled.any()


def test_front_fill_leading_gap():
    vals = np.ones((3, 4))
    vals[0, 2] = np.nan
    with pytest.raises(IngestionError):
        front_fill(series(n=3, values=vals))


def test_front_fill_random_gaps_counted():
    rng = np.random.default_rng(3)
    n = 2000
    vals = rng.normal(size=(n, 4))
    gaps = rng.random(n) < 0.1
    gaps[0] = False
    vals[gaps] = np.nan
    out = front_fill(series(n=n, values=vals))
    assert not np.isnan(out.values).any()
    assert out.filled.sum() == gaps.sum()
    last = np.maximum.accumulate(np.where(gaps, 0, np.arange(n)))
    assert np.array_equal(out.values, vals[last])


def test_front_fill_per_variable():
    vals = np.array([[1.0, 2, 3, 4], [np.nan, 5, np.nan, 6]])
    out = front_fill(series(n=2, values=vals))
    assert out.values[1].tolist() == [1, 5, 3, 6]


# ---------------------------------------------------------------- alignment and clean


def test_regularize_inserts_missing_hours():
    s = series(n=5)
    s2 = StationSeries("A", 40.0, -75.0, s.times[[0, 1, 4]], s.values[[0, 1, 4]], s.flags[[0, 1, 4]])
    r = regularize(s2)
    assert len(r) == 5 and r.flags[2] == MISSING and np.isnan(r.values[2]).all()


def test_clean_masks_fills_and_reports():
    flags = [SCREENED] * 100
    flags[10] = OTHER
    kept, report = clean([series(flags=flags)], threshold=0.9)
    out = kept[0]
    assert np.array_equal(out.values[10], out.values[9])
    assert out.filled[10] and report["A"]["filled_hours"] == 1


def test_clean_drops_leading_gap_station():
    flags = [SCREENED] * 100
    flags[0] = MISSING
    kept, report = clean([series("bad", flags=flags), series("ok")])
    assert [s.station_id for s in kept] == ["ok"] and not report["bad"]["kept"]


def test_align_union_span():
    a = series("a", 10)
    b = StationSeries("b", 41.0, -74.0, a.times[3:] + np.timedelta64(2, "h"), a.values[3:], a.flags[3:])
    t = align([a, b])
    assert t.n_steps == 12 and t.n_stations == 2
    assert np.isnan(t.values[:5, 1]).all() and np.array_equal(t.values[5:, 1], a.values[3:])


# ---------------------------------------------------------------- CSV


def test_csv_roundtrip_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(30, 4)) * 7
    vals[4, 1] = np.nan
    flags = [SCREENED] * 30
    flags[4] = OTHER
    s = [series("K1", 30, flags, vals, 40.123456789, -75.5), series("K2", 30, None, vals[::-1] * 1e-3, 41.0, -74.25)]
    s[1].filled[7] = True
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_station_csv(s, p1)
    back = read_station_csv(p1)
    write_station_csv(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back[0].values, s[0].values, equal_nan=True)
    assert back[1].flags[7] == FILLED and back[1].filled[7]


def test_csv_speed_direction_columns(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(
        "station_id,lat,lon,timestamp,speed,direction,temperature,dewpoint,qc_flag\n"
        "X,40,-75,2021-01-01T00:00:00Z,1.0,180,10,5,Screened\n"
        "X,40,-75,2021-01-01T01:00:00+00:00,2.0,90,11,6,Verified\n"
    )
    (s,) = read_station_csv(p)
    assert np.allclose(s.values[:, :2], [[0, 1], [-2, 0]], atol=1e-15)


@pytest.mark.parametrize(
    "body,match",
    [
        ("X,40,-75,2021-01-01T00:00:00Z,1,2,3,Screened\n", ":2: expected 9 fields"),
        ("X,40,-75,2021-01-01T00:00:00Z,1,2,3,4,Screened\nX,40,-75,not-a-time,1,2,3,4,Screened\n", ":3:"),
        ("X,40,-75,2021-01-01T00:00:00Z,1,2,3,4,Bogus\n", "unknown qc_flag"),
        ("X,40,-75,2021-01-01T00:30:00Z,1,2,3,4,Screened\n", "not on the hour"),
        ("X,40,-75,2021-01-01T00:00:00Z,1,2,3,4,Screened\nX,40,-75,2021-01-01T00:00:00Z,1,2,3,4,Screened\n", "duplicate"),
    ],
)
def test_csv_malformed_rows(tmp_path, body, match):
    p = tmp_path / "bad.csv"
    p.write_text("station_id,lat,lon,timestamp,u,v,temperature,dewpoint,qc_flag\n" + body)
    with pytest.raises(IngestionError, match=match):
        read_station_csv(p)


def test_csv_empty_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(IngestionError, match="empty"):
        read_station_csv(p)
