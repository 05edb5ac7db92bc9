import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deeprbf.data import (
    CSV_HEADER,
    CleanPolicy,
    Dataset,
    NormStats,
    SynthConfig,
    clean,
    dataset_to_csv,
    fit_norm_stats,
    format_timestamp,
    load_csv,
    load_prepared,
    make_supervised,
    median_mad,
    normalize,
    outlier_bounds,
    parse_timestamp,
    preprocess,
    read_csv_text,
    save_csv,
    save_prepared,
    split,
    split_indices,
    synth_generate,
)
from deeprbf.errors import ConfigError, DataError, MissingArtifactError
from deeprbf.traffic import FeatureSpec, TrafficObservation

HEADER = ",".join(CSV_HEADER)


def row(ts="2024-01-01T00:00:00Z", sensor="S1", flow="100", count="9", speed="50", density="2",
        temp="20", hum="50", precip="0", wind="5", event="none"):
    return ",".join([ts, sensor, flow, count, speed, density, temp, hum, precip, wind, event])


def obs(t, flow=100.0, sensor="S1", **kw):
    base = dict(timestamp=float(t), sensor_id=sensor, flow=flow, vehicle_count=9.0, speed=50.0, density=2.0,
                temperature=20.0, humidity=50.0, precipitation=0.0, wind_speed=5.0, event="none")
    base.update(kw)
    return TrafficObservation(**base)


@pytest.fixture(scope="module")
def synth():
    return synth_generate(SynthConfig(days=3), seed=11)


# -- timestamps and CSV --------------------------------------------------------

def test_timestamp_round_trip():
    ts = parse_timestamp("2024-03-05T07:45:00Z")
    assert format_timestamp(ts) == "2024-03-05T07:45:00Z"
    assert parse_timestamp("2024-03-05T07:45:00") == ts
    assert parse_timestamp("2024-03-05T08:45:00+01:00") == ts


def test_csv_round_trip_is_byte_identical(synth, tmp_path):
    text = dataset_to_csv(synth)
    again = read_csv_text(text)
    assert again.observations == synth.observations
    assert dataset_to_csv(again) == text
    save_csv(synth, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text() == text


def test_missing_values_read_as_none():
    ds = read_csv_text(HEADER + "\n" + row(density="", event="") + "\n")
    assert ds.observations[0].density is None and ds.observations[0].event is None


@pytest.mark.parametrize(
    "bad,field",
    [(dict(flow="abc"), "flow_veh_h"), (dict(ts="yesterday"), "timestamp"), (dict(speed="-3"), "speed"),
     (dict(hum="140"), "humidity"), (dict(event="parade"), "event")],
)
def test_strict_csv_errors_name_row_and_field(bad, field):
    text = HEADER + "\n" + row() + "\n" + row(**bad) + "\n"
    with pytest.raises(DataError) as exc:
        read_csv_text(text)
    assert exc.value.row == 3
    assert exc.value.field == field
    assert "row 3" in str(exc.value)


def test_lenient_csv_skips_and_counts():
    text = HEADER + "\n" + row() + "\n" + row(flow="x") + "\n" + "a,b\n"
    ds = read_csv_text(text, strict=False)
    assert len(ds) == 1 and ds.provenance["skipped_rows"] == 2


def test_header_and_empty_file():
    with pytest.raises(DataError):
        read_csv_text("a,b,c\n")
    with pytest.raises(DataError):
        read_csv_text("")


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(MissingArtifactError):
        load_csv(tmp_path / "nope.csv")


# -- cleaning --------------------------------------------------------------------

def test_median_mad_hand_value():
    assert median_mad([1, 2, 3, 4, 100]) == (3.0, 1.0)


def test_drop_rules():
    rows = [obs(i * 300, flow=100.0 + (i % 5)) for i in range(30)]
    rows[10] = obs(3000, flow=5000.0)
    rows[4] = replace(rows[4], temperature=None)
    rows[6] = replace(rows[6], density=None)  # derivable from flow/speed
    cleaned, rep = clean(Dataset(tuple(rows)), CleanPolicy(fields=("flow",)))
    assert rep.missing_dropped == 1
    assert rep.density_derived == 1
    assert rep.outliers_dropped == 1
    assert all(o.flow < 1000 for o in cleaned.observations)
    assert len(cleaned) == 28


def test_clean_sorts_by_time():
    rows = [obs(600), obs(0), obs(300)]
    cleaned, rep = clean(Dataset(tuple(rows)))
    assert [o.timestamp for o in cleaned.observations] == [0, 300, 600]
    assert rep.reordered


def test_winsorize_clips_to_band():
    rows = [obs(i * 300, flow=100.0 + (i % 5)) for i in range(30)]
    rows[10] = obs(3000, flow=5000.0)
    cleaned, rep = clean(Dataset(tuple(rows)), CleanPolicy(action="winsorize", fields=("flow",)))
    med, mad = median_mad([o.flow for o in rows])
    assert len(cleaned) == 30 and rep.winsorized == 1
    assert cleaned.observations[10].flow == med + 5 * mad


def test_rolling_window_keeps_daily_peaks(synth):
    flows = synth.column("flow")
    glob = outlier_bounds(flows, 5.0)
    roll = outlier_bounds(flows, 5.0, window=37)
    n_glob = int(np.sum(glob[2] & ((flows < glob[0]) | (flows > glob[1]))))
    n_roll = int(np.sum(roll[2] & ((flows < roll[0]) | (flows > roll[1]))))
    assert n_roll <= n_glob


def test_rolling_bounds_match_explicit_windows():
    rng = np.random.default_rng(0)
    v = rng.normal(size=25)
    lo, hi, _ = outlier_bounds(v, 3.0, window=5)
    for i in range(25):
        med, mad = median_mad(v[max(0, i - 2) : i + 3])
        assert lo[i] == pytest.approx(med - 3 * mad) and hi[i] == pytest.approx(med + 3 * mad)


def test_policy_validation():
    for bad in (dict(action="zap"), dict(mad_k=0), dict(window=4), dict(fields=("event",))):
        with pytest.raises(ConfigError):
            CleanPolicy(**bad)


@settings(max_examples=30, deadline=None)
@given(
    flows=st.lists(st.floats(0, 2000), min_size=3, max_size=40),
    action=st.sampled_from(["drop", "winsorize"]),
    window=st.sampled_from([None, 3, 7]),
)
def test_clean_is_idempotent(flows, action, window):
    ds = Dataset(tuple(obs(i * 300, flow=f) for i, f in enumerate(flows)))
    policy = CleanPolicy(action=action, window=window, fields=("flow",))
    once, _ = clean(ds, policy)
    twice, rep = clean(once, policy)
    assert twice.observations == once.observations
    assert rep.actions == 0


# -- normalization and splits --------------------------------------------------

def test_min_max_hand_values():
    Xn, stats = normalize([[0.0, 5.0], [10.0, 5.0], [5.0, 5.0]])
    np.testing.assert_array_equal(Xn, [[0, 0], [1, 0], [0.5, 0]])
    assert stats.degenerate.tolist() == [False, True]


@settings(max_examples=40)
@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=1, max_size=20))
def test_normalize_range_and_inverse(rows):
    X = np.array(rows)
    Xn, stats = normalize(X)
    assert np.all(Xn >= 0) and np.all(Xn <= 1)
    live = ~stats.degenerate
    np.testing.assert_allclose(stats.inverse(Xn)[:, live], X[:, live], rtol=1e-9, atol=1e-6)


def test_norm_stats_serialization():
    s = fit_norm_stats([[1.0, 2.0], [3.0, 2.0]], ("a", "b"))
    assert NormStats.from_dict(json.loads(json.dumps(s.to_dict()))) == s


def test_split_chronological_and_shuffled():
    tr, te = split_indices(10)
    assert tr.tolist() == list(range(8)) and te.tolist() == [8, 9]
    a = split_indices(10, mode="seeded_shuffle", seed=3)
    b = split_indices(10, mode="seeded_shuffle", seed=3)
    assert [x.tolist() for x in a] == [x.tolist() for x in b]
    assert sorted(np.concatenate(a).tolist()) == list(range(10))
    with pytest.raises(ConfigError):
        split_indices(10, (0.5, 0.6))
    with pytest.raises(ConfigError):
        split_indices(10, mode="random")


def test_split_dataset(synth):
    tr, te = split(synth)
    assert len(tr) + len(te) == len(synth)
    assert tr.observations[-1].timestamp < te.observations[0].timestamp


# -- synthetic generator -----------------------------------------------------------

def test_synth_is_seeded_and_sized():
    cfg = SynthConfig(days=2)
    a, b = synth_generate(cfg, 4), synth_generate(cfg, 4)
    assert a.observations == b.observations
    assert len(a) == cfg.n_rows == 2 * 288
    assert synth_generate(cfg, 5).observations != a.observations


def test_synth_rows_are_valid_and_consistent(synth):
    for o in synth.observations:
        o.validate()
        assert o.flow == pytest.approx(o.density * o.speed, rel=0.02, abs=1.0)


def test_synth_rush_hour_is_busier(synth):
    hours = (synth.column("timestamp") % 86400) / 3600
    flows = synth.column("flow")
    weekday = synth.column("timestamp") < parse_timestamp("2024-01-06T00:00:00Z")
    assert flows[weekday & (np.abs(hours - 8) < 0.5)].mean() > 2 * flows[weekday & (hours < 4)].mean()


# -- supervised windows and preprocessing ----------------------------------------

def test_make_supervised_targets_and_gaps():
    rows = [obs(i * 300, flow=float(i)) for i in range(10)]
    del rows[6]  # gap
    sup = make_supervised(Dataset(tuple(rows)), FeatureSpec(lags=1, density=False, time_of_day=False,
                                                             weather=False, events=False))
    # windows (x_{t-1}, x_t) -> x_{t+1}, none spanning the gap
    assert sup.X.tolist() == [[0, 1], [1, 2], [2, 3], [3, 4], [7, 8]]
    assert sup.y.ravel().tolist() == [2, 3, 4, 5, 9]


def test_preprocess_fits_on_train_only(synth):
    prep = preprocess(synth, FeatureSpec(lags=3), CleanPolicy(action="winsorize", window=37))
    assert np.all(prep.train.X >= 0) and np.all(prep.train.X <= 1)
    train_raw = prep.feature_stats.inverse(prep.train.X)
    np.testing.assert_allclose(train_raw.min(axis=0), prep.feature_stats.mins, atol=1e-9)
    assert prep.train.X.shape[1] == FeatureSpec(lags=3).dim


def test_prepared_round_trip(synth, tmp_path):
    prep = preprocess(synth, FeatureSpec(lags=2))
    save_prepared(prep, tmp_path)
    back = load_prepared(tmp_path)
    np.testing.assert_array_equal(back.train.X, prep.train.X)
    np.testing.assert_array_equal(back.test.aux["target_flow"], prep.test.aux["target_flow"])
    assert back.feature_stats == prep.feature_stats and back.feature_spec == prep.feature_spec
    with pytest.raises(MissingArtifactError):
        load_prepared(tmp_path / "missing")


def test_single_spike_flagged_against_brute_force():
    rng = np.random.default_rng(8)
    flows = rng.normal(500, 20, size=1001)
    flows[400] *= 100
    srt = sorted(flows.tolist())
    med = srt[500]
    dev = sorted(abs(v - med) for v in flows.tolist())
    mad = dev[500]
    brute = [i for i, v in enumerate(flows) if abs(v - med) > 5 * mad]
    rows = tuple(obs(i * 300, flow=float(f)) for i, f in enumerate(flows))
    cleaned, rep = clean(Dataset(rows), CleanPolicy(fields=("flow",)))
    assert brute == [400]
    assert rep.outliers_flagged["flow"] >= 1 and all(o.flow < 1000 for o in cleaned.observations)


def test_normalize_round_trip_random_matrix():
    X = np.random.default_rng(1).normal(size=(30, 6))
    Xn, stats = normalize(X)
    np.testing.assert_allclose(stats.inverse(Xn), X, rtol=0, atol=1e-12)


def test_constant_column_maps_to_zero():
    Xn, stats = normalize([[7.0], [7.0], [7.0]])
    assert Xn.ravel().tolist() == [0.0, 0.0, 0.0] and stats.degenerate.tolist() == [True]
