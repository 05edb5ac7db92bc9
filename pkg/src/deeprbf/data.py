"""Dataset ingestion, cleaning, normalization, splitting and synthetic data.

CSV interchange schema (header required, UTF-8)::

    timestamp,sensor_id,flow_veh_h,vehicle_count,speed_kmh,density_veh_km,
    temp_c,humidity_pct,precip_mm,wind_kmh,event

``timestamp`` is ISO-8601 (UTC assumed when no offset is given); an empty
field is a missing value; ``density_veh_km`` may be left empty and is then
derived as flow / speed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError, DimensionError, MissingArtifactError
from .traffic import FeatureSpec, TrafficObservation, build_features

CSV_HEADER = (
    "timestamp", "sensor_id", "flow_veh_h", "vehicle_count", "speed_kmh", "density_veh_km",
    "temp_c", "humidity_pct", "precip_mm", "wind_kmh", "event",
)
_NUMERIC = (
    ("flow_veh_h", "flow"), ("vehicle_count", "vehicle_count"), ("speed_kmh", "speed"),
    ("density_veh_km", "density"), ("temp_c", "temperature"), ("humidity_pct", "humidity"),
    ("precip_mm", "precipitation"), ("wind_kmh", "wind_speed"),
)
REQUIRED_FIELDS = (
    "flow", "vehicle_count", "speed", "temperature", "humidity", "precipitation", "wind_speed", "event",
)
OUTLIER_FIELDS = ("flow", "vehicle_count", "speed", "density", "temperature", "humidity", "wind_speed")


@dataclass(frozen=True)
class Dataset:
    observations: tuple[TrafficObservation, ...]
    provenance: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.observations)

    def column(self, name) -> np.ndarray:
        return np.array(
            [np.nan if getattr(o, name) is None else getattr(o, name) for o in self.observations],
            dtype=np.float64,
        )


# -- CSV ---------------------------------------------------------------------

def parse_timestamp(text: str) -> float:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(ts: float) -> str:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    if dt.microsecond:
        return dt.isoformat().replace("+00:00", "Z")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _parse_row(row, lineno):
    if len(row) != len(CSV_HEADER):
        raise DataError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", row=lineno)
    rec = dict(zip(CSV_HEADER, row))
    try:
        ts = parse_timestamp(rec["timestamp"])
    except ValueError as exc:
        raise DataError(f"bad timestamp {rec['timestamp']!r} ({exc})", row=lineno, field="timestamp") from None
    values = {}
    for column, attr in _NUMERIC:
        text = rec[column].strip()
        if text == "":
            values[attr] = None
            continue
        try:
            values[attr] = float(text)
        except ValueError:
            raise DataError(f"not a number: {text!r}", row=lineno, field=column) from None
    event = rec["event"].strip() or None
    obs = TrafficObservation(ts, rec["sensor_id"].strip(), event=event, **values)
    try:
        obs.validate()
    except DataError as exc:
        raise DataError(str(exc).split(": ", 1)[-1], row=lineno, field=exc.field) from None
    return obs


def read_csv_text(text: str, strict=True, source=None) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file: header row required") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise DataError(f"header mismatch: expected {','.join(CSV_HEADER)}", row=1)
    observations, skipped = [], 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            observations.append(_parse_row(row, lineno))
        except DataError:
            if strict:
                raise
            skipped += 1
    prov = {"kind": "csv", "path": source, "skipped_rows": skipped}
    return Dataset(tuple(observations), prov)


def load_csv(path, strict=True) -> Dataset:
    """Read a dataset file.  Strict mode raises on the first bad row; lenient skips and counts."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"dataset file not found: {path}")
    return read_csv_text(path.read_text(encoding="utf-8"), strict=strict, source=str(path))


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for o in ds.observations:
        w.writerow([format_timestamp(o.timestamp), o.sensor_id] + [_fmt(getattr(o, a)) for _, a in _NUMERIC] + [o.event or ""])
    return buf.getvalue()


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_csv(ds: Dataset, path):
    atomic_write(path, dataset_to_csv(ds))


# -- cleaning ----------------------------------------------------------------

@dataclass(frozen=True)
class CleanPolicy:
    """Outlier rule: a value outside ``median +/- mad_k * MAD`` of its field.

    With ``window=None`` the median and MAD are taken over the whole field;
    with an odd ``window`` they are taken over a centered rolling window of
    that many rows of the same sensor (truncated at the series ends), which
    keeps daily peaks from being flagged.  ``action`` is ``drop`` (repeated
    until no outliers remain) or ``winsorize`` (clip to the band).  A zero
    MAD flags nothing.
    """

    mad_k: float = 5.0
    action: str = "drop"
    fields: tuple[str, ...] = OUTLIER_FIELDS
    window: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if self.action not in ("drop", "winsorize"):
            raise ConfigError(f"unknown outlier action {self.action!r}")
        if not self.mad_k > 0:
            raise ConfigError("mad_k must be > 0")
        if self.window is not None and (self.window < 3 or self.window % 2 == 0):
            raise ConfigError("window must be an odd integer >= 3")
        unknown = set(self.fields) - set(OUTLIER_FIELDS)
        if unknown:
            raise ConfigError(f"outlier rule only covers {OUTLIER_FIELDS}, got {sorted(unknown)}")


@dataclass
class CleanReport:
    missing_dropped: int = 0
    density_derived: int = 0
    reordered: bool = False
    outliers_flagged: dict = field(default_factory=dict)
    outliers_dropped: int = 0
    winsorized: int = 0

    @property
    def actions(self):
        return self.missing_dropped + self.outliers_dropped + self.winsorized + self.density_derived + int(self.reordered)

    def to_dict(self):
        return asdict(self)


def median_mad(values):
    """``(median, median absolute deviation)``."""
    values = np.asarray(values, dtype=np.float64)
    med = float(np.median(values))
    return med, float(np.median(np.abs(values - med)))


def outlier_bounds(values, k=5.0, window=None):
    """Per-row ``(lo, hi, active)``; ``active`` is False where the MAD is zero."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if window is None:
        med, mad = median_mad(values)
        lo, hi = np.full(n, med - k * mad), np.full(n, med + k * mad)
        return lo, hi, np.full(n, mad > 0)
    half = window // 2
    med, mad = np.empty(n), np.empty(n)
    if n >= window:
        win = np.lib.stride_tricks.sliding_window_view(values, window)
        m = np.median(win, axis=1)
        med[half : n - half] = m
        mad[half : n - half] = np.median(np.abs(win - m[:, None]), axis=1)
        edges = list(range(half)) + list(range(n - half, n))
    else:
        edges = range(n)
    for i in edges:
        med[i], mad[i] = median_mad(values[max(0, i - half) : i + half + 1])
    return med - k * mad, med + k * mad, mad > 0


def outlier_mask(values, k=5.0, window=None):
    values = np.asarray(values, dtype=np.float64)
    lo, hi, active = outlier_bounds(values, k, window)
    return active & ((values < lo) | (values > hi)), (lo, hi)


_MAX_PASSES = 1000


def _field_outliers(rows, name, policy):
    """Mask and bounds for one field, computed per sensor."""
    vals = np.array([getattr(o, name) for o in rows], dtype=np.float64)
    mask = np.zeros(len(rows), dtype=bool)
    lo, hi = np.empty(len(rows)), np.empty(len(rows))
    groups: dict[str, list[int]] = {}
    for i, o in enumerate(rows):
        groups.setdefault(o.sensor_id, []).append(i)
    for idx in groups.values():
        idx = np.array(idx)
        m, (l, h) = outlier_mask(vals[idx], policy.mad_k, policy.window)
        mask[idx], lo[idx], hi[idx] = m, l, h
    return vals, mask, lo, hi


def clean(ds: Dataset, policy: CleanPolicy = CleanPolicy()):
    """Drop incomplete rows, handle outliers, sort by time; returns ``(Dataset, CleanReport)``."""
    report = CleanReport()
    kept = []
    for o in ds.observations:
        if any(getattr(o, f) is None for f in REQUIRED_FIELDS):
            report.missing_dropped += 1
            continue
        if o.density is None:
            k = o.resolved_density()
            if k is None:
                report.missing_dropped += 1
                continue
            o = replace(o, density=k)
            report.density_derived += 1
        kept.append(o)
    order = sorted(range(len(kept)), key=lambda i: (kept[i].timestamp, kept[i].sensor_id))
    report.reordered = order != list(range(len(kept)))
    rows = [kept[i] for i in order]

    if policy.action == "drop":
        while rows:
            bad = np.zeros(len(rows), dtype=bool)
            for name in policy.fields:
                _, mask, _, _ = _field_outliers(rows, name, policy)
                report.outliers_flagged[name] = report.outliers_flagged.get(name, 0) + int(mask.sum())
                bad |= mask
            if not bad.any():
                break
            report.outliers_dropped += int(bad.sum())
            rows = [o for o, b in zip(rows, bad) if not b]
    elif rows:
        # clipping moves rolling medians, so repeat until a pass changes nothing
        for name in policy.fields:
            for _ in range(_MAX_PASSES):
                vals, mask, lo, hi = _field_outliers(rows, name, policy)
                if not mask.any():
                    break
                report.outliers_flagged[name] = report.outliers_flagged.get(name, 0) + int(mask.sum())
                clipped = np.clip(vals, lo, hi)
                rows = [replace(o, **{name: float(v)}) if m else o for o, v, m in zip(rows, clipped, mask)]
                report.winsorized += int(mask.sum())
    prov = dict(ds.provenance, cleaned=True)
    return Dataset(tuple(rows), prov), report


# -- normalization -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-feature min and max; features with ``max == min`` map to 0."""

    mins: np.ndarray
    maxs: np.ndarray
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        mins = np.array(self.mins, dtype=np.float64).ravel()
        maxs = np.array(self.maxs, dtype=np.float64).ravel()
        if mins.shape != maxs.shape:
            raise DimensionError("mins and maxs differ in length")
        if np.any(maxs < mins):
            raise ConfigError("NormStats need max >= min per feature")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def dim(self):
        return self.mins.shape[0]

    @property
    def degenerate(self) -> np.ndarray:
        return self.maxs == self.mins

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"values have {x.shape[-1]} features, stats cover {self.dim}")
        return x

    def transform(self, x):
        x = self._check(x)
        span = np.where(self.degenerate, 1.0, self.maxs - self.mins)
        return np.where(self.degenerate, 0.0, (x - self.mins) / span)

    def inverse(self, x):
        x = self._check(x)
        return x * (self.maxs - self.mins) + self.mins

    def to_dict(self):
        d = {"scheme": "min-max", "mins": self.mins.tolist(), "maxs": self.maxs.tolist()}
        if self.names is not None:
            d["names"] = list(self.names)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["mins"], d["maxs"], d.get("names"))

    def __eq__(self, other):
        return (
            isinstance(other, NormStats)
            and np.array_equal(self.mins, other.mins)
            and np.array_equal(self.maxs, other.maxs)
            and self.names == other.names
        )


def fit_norm_stats(X, names=None) -> NormStats:
    X = np.array(X, dtype=np.float64, ndmin=2)
    if X.shape[0] == 0:
        raise DimensionError("cannot fit normalization on zero rows")
    return NormStats(X.min(axis=0), X.max(axis=0), names)


def normalize(X, stats: Optional[NormStats] = None):
    """Min-max scale columns of ``X``; fits ``stats`` on ``X`` when not given."""
    if stats is None:
        stats = fit_norm_stats(X)
    return stats.transform(np.array(X, dtype=np.float64, ndmin=2)), stats


def denormalize(values, stats: NormStats):
    return stats.inverse(values)


# -- splitting ---------------------------------------------------------------

def split_indices(n, ratio=(0.8, 0.2), mode="chronological", seed=0):
    train_frac, test_frac = ratio
    if not (train_frac > 0 and test_frac > 0 and math.isclose(train_frac + test_frac, 1.0, abs_tol=1e-9)):
        raise ConfigError(f"split ratio must be two positive parts summing to 1, got {ratio}")
    if n == 0:
        raise DimensionError("cannot split an empty dataset")
    cut = int(math.floor(n * train_frac))
    if mode == "chronological":
        idx = np.arange(n)
    elif mode == "seeded_shuffle":
        idx = np.random.default_rng(seed).permutation(n)
    else:
        raise ConfigError(f"unknown split mode {mode!r}")
    return idx[:cut], idx[cut:]


def split(ds: Dataset, ratio=(0.8, 0.2), mode="chronological", seed=0):
    tr, te = split_indices(len(ds), ratio, mode, seed)
    pick = lambda idx: Dataset(tuple(ds.observations[i] for i in idx), dict(ds.provenance, split=mode))
    return pick(tr), pick(te)


# -- synthetic generator -----------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic single-sensor traffic series.

    Flow is ``base_flow`` plus a Gaussian bump of height ``rush_amplitude``
    around each of ``rush_hours``; weekends scale the bumps by
    ``weekend_factor``.  Speed follows a linear speed-density relation with
    free speed ``free_speed`` and jam density ``jam_density``; incidents cut
    the free speed and scheduled events raise demand.
    """

    days: float = 10.0
    interval_min: float = 5.0
    start: str = "2024-01-01T00:00:00Z"
    sensor_id: str = "S001"
    base_flow: float = 400.0
    rush_amplitude: float = 1000.0
    rush_hours: tuple[float, ...] = (8.0, 17.5)
    rush_width_h: float = 1.5
    weekend_factor: float = 0.5
    noise_std: float = 40.0
    event_rate: float = 0.002
    free_speed: float = 60.0
    jam_density: float = 120.0
    temp_mean: float = 25.0
    humidity_mean: float = 60.0
    wind_mean: float = 15.0
    weather_step: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "rush_hours", tuple(float(h) for h in self.rush_hours))
        if not self.interval_min > 0 or not self.days > 0:
            raise ConfigError("days and interval_min must be > 0")
        for name in ("base_flow", "rush_amplitude", "noise_std", "weekend_factor", "weather_step"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0 <= self.event_rate <= 1:
            raise ConfigError("event_rate must lie in [0, 1]")
        if not (self.free_speed > 0 and self.jam_density > 0 and self.rush_width_h > 0):
            raise ConfigError("free_speed, jam_density and rush_width_h must be > 0")

    @property
    def n_rows(self):
        return int(round(self.days * 24 * 60 / self.interval_min))

    def to_dict(self):
        d = asdict(self)
        d["rush_hours"] = list(self.rush_hours)
        return d


# event kind -> (free-speed factor, demand factor, duration in hours)
_EVENT_EFFECTS = {
    "accident": (0.5, 1.0, 2.0),
    "closure": (0.35, 1.0, 2.0),
    "scheduled_event": (1.0, 1.4, 3.0),
}


def rush_profile(hour, cfg: SynthConfig):
    return sum(math.exp(-0.5 * ((hour - h) / cfg.rush_width_h) ** 2) for h in cfg.rush_hours)


def _bounded_walk(x, mean, step, lo, hi, rng):
    x = x + 0.05 * (mean - x) + step * rng.normal()
    return min(max(x, lo), hi)


def synth_generate(config: SynthConfig = SynthConfig(), seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    t0 = parse_timestamp(config.start)
    dt = config.interval_min * 60.0
    vf, kj = config.free_speed, config.jam_density
    temp, hum, precip, wind = config.temp_mean, config.humidity_mean, 0.0, config.wind_mean
    event, event_left = "none", 0
    rows = []
    for i in range(config.n_rows):
        ts = t0 + i * dt
        hour = (ts % 86400.0) / 3600.0
        weekday = datetime.fromtimestamp(ts, tz=timezone.utc).weekday()
        weekly = config.weekend_factor if weekday >= 5 else 1.0

        step = config.weather_step
        temp = _bounded_walk(temp, config.temp_mean, step, -10.0, 45.0, rng)
        hum = _bounded_walk(hum, config.humidity_mean, 2 * step, 0.0, 100.0, rng)
        precip = _bounded_walk(precip, 0.0, 0.5 * step, 0.0, 20.0, rng)
        wind = _bounded_walk(wind, config.wind_mean, step, 0.0, 80.0, rng)

        if event_left == 0:
            event = "none"
            if rng.random() < config.event_rate:
                event = ("accident", "closure", "scheduled_event")[int(rng.integers(0, 3))]
                event_left = int(round(_EVENT_EFFECTS[event][2] * 60 / config.interval_min))
        speed_factor, demand_factor = _EVENT_EFFECTS.get(event, (1.0, 1.0, 0.0))[:2]
        if event_left > 0:
            event_left -= 1

        demand = config.base_flow + config.rush_amplitude * weekly * rush_profile(hour, config)
        demand = demand * demand_factor + config.noise_std * rng.normal()
        free = vf * speed_factor * (1.0 - 0.01 * min(precip, 10.0))
        capacity = free * kj / 4.0
        flow = min(max(demand, 0.0), 0.97 * capacity)
        # uncongested branch of q = free * k * (1 - k / kj)
        density = 0.5 * kj * (1.0 - math.sqrt(1.0 - 4.0 * flow / (free * kj)))
        speed = free * (1.0 - density / kj) if density > 0 else free
        speed = max(speed + rng.normal(0.0, 1.0), 1.0)
        flow = round(flow, 1)
        speed = round(speed, 2)
        count = float(rng.poisson(flow * config.interval_min / 60.0))
        rows.append(TrafficObservation(
            timestamp=ts, sensor_id=config.sensor_id, flow=flow, vehicle_count=count, speed=speed,
            density=round(flow / speed, 3), temperature=round(temp, 2), humidity=round(hum, 2),
            precipitation=round(precip, 2), wind_speed=round(wind, 2), event=event,
        ))
    return Dataset(tuple(rows), {"kind": "synthetic", "config": config.to_dict(), "seed": int(seed)})


# -- supervised windows ------------------------------------------------------

AUX_COLUMNS = ("target_timestamp", "target_flow", "target_density", "last_speed")


@dataclass(frozen=True, eq=False)
class Supervised:
    """Feature rows ``X``, target rows ``y`` (next-step flow) and raw side columns."""

    X: np.ndarray
    y: np.ndarray
    aux: dict
    feature_names: tuple[str, ...]

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx):
        return Supervised(self.X[idx], self.y[idx], {k: v[idx] for k, v in self.aux.items()}, self.feature_names)


def make_supervised(ds: Dataset, spec: FeatureSpec = FeatureSpec(), horizon=1) -> Supervised:
    """Slide a window over each sensor's series; the target is the flow ``horizon`` steps ahead.

    Windows spanning a gap larger than 1.5x the sensor's median sampling
    interval are skipped.
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    by_sensor: dict[str, list[TrafficObservation]] = {}
    for o in ds.observations:
        by_sensor.setdefault(o.sensor_id, []).append(o)
    X, y, aux = [], [], {k: [] for k in AUX_COLUMNS}
    span = spec.window + horizon
    for sensor in sorted(by_sensor):
        series = by_sensor[sensor]
        if len(series) < span:
            continue
        ts = np.array([o.timestamp for o in series])
        gaps = np.diff(ts)
        max_gap = 1.5 * float(np.median(gaps))
        for start in range(len(series) - span + 1):
            if np.any(gaps[start : start + span - 1] > max_gap):
                continue
            window = series[start : start + spec.window]
            target = series[start + spec.window + horizon - 1]
            X.append(build_features(window, spec))
            y.append([target.flow])
            aux["target_timestamp"].append(target.timestamp)
            aux["target_flow"].append(target.flow)
            aux["target_density"].append(target.resolved_density())
            aux["last_speed"].append(window[-1].speed)
    n = len(X)
    X = np.array(X, dtype=np.float64).reshape(n, spec.dim)
    y = np.array(y, dtype=np.float64).reshape(n, 1)
    return Supervised(X, y, {k: np.array(v, dtype=np.float64) for k, v in aux.items()}, tuple(spec.names()))


@dataclass(frozen=True, eq=False)
class Prepared:
    """Normalized train/test sets and the training-split statistics."""

    train: Supervised
    test: Supervised
    feature_stats: NormStats
    target_stats: NormStats
    feature_spec: FeatureSpec
    clean_report: Optional[CleanReport] = None

    def norm_stats_dict(self):
        return {
            "features": self.feature_stats.to_dict(),
            "target": self.target_stats.to_dict(),
            "feature_spec": asdict(self.feature_spec),
        }


def preprocess(
    ds: Dataset,
    spec: FeatureSpec = FeatureSpec(),
    policy: CleanPolicy = CleanPolicy(),
    ratio=(0.8, 0.2),
    mode="chronological",
    seed=0,
    horizon=1,
) -> Prepared:
    """clean -> window -> split -> min-max fit on the train split -> normalize both splits."""
    cleaned, report = clean(ds, policy)
    sup = make_supervised(cleaned, spec, horizon)
    if len(sup) == 0:
        raise DataError("no complete feature windows in dataset")
    tr, te = split_indices(len(sup), ratio, mode, seed)
    train, test = sup.subset(tr), sup.subset(te)
    fstats = fit_norm_stats(train.X, sup.feature_names)
    tstats = fit_norm_stats(train.y, ("flow",))
    norm = lambda s: Supervised(fstats.transform(s.X), tstats.transform(s.y), s.aux, s.feature_names)
    return Prepared(norm(train), norm(test), fstats, tstats, spec, report)


def _supervised_csv(s: Supervised) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(s.feature_names) + ["target"] + list(AUX_COLUMNS))
    for i in range(len(s)):
        w.writerow([repr(float(v)) for v in s.X[i]] + [repr(float(s.y[i, 0]))] + [repr(float(s.aux[k][i])) for k in AUX_COLUMNS])
    return buf.getvalue()


def _read_supervised(path) -> Supervised:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n_feat = header.index("target")
    data = np.array(body, dtype=np.float64).reshape(len(body), len(header))
    aux = {k: data[:, n_feat + 1 + j] for j, k in enumerate(AUX_COLUMNS)}
    return Supervised(data[:, :n_feat], data[:, n_feat : n_feat + 1], aux, tuple(header[:n_feat]))


def save_prepared(prep: Prepared, out_dir):
    out_dir = Path(out_dir)
    atomic_write(out_dir / "train.csv", _supervised_csv(prep.train))
    atomic_write(out_dir / "test.csv", _supervised_csv(prep.test))
    atomic_write(out_dir / "norm_stats.json", json.dumps(prep.norm_stats_dict(), indent=1) + "\n")
    if prep.clean_report is not None:
        atomic_write(out_dir / "clean_report.json", json.dumps(prep.clean_report.to_dict(), indent=1, sort_keys=True) + "\n")


def load_prepared(out_dir) -> Prepared:
    out_dir = Path(out_dir)
    for name in ("train.csv", "test.csv", "norm_stats.json"):
        if not (out_dir / name).exists():
            raise MissingArtifactError(f"preprocessed artifact missing: {out_dir / name} (run `preprocess` first)")
    stats = json.loads((out_dir / "norm_stats.json").read_text(encoding="utf-8"))
    return Prepared(
        _read_supervised(out_dir / "train.csv"),
        _read_supervised(out_dir / "test.csv"),
        NormStats.from_dict(stats["features"]),
        NormStats.from_dict(stats["target"]),
        FeatureSpec(**stats["feature_spec"]),
    )
