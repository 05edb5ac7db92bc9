"""Traffic quantities, congestion classification and model input features.

Units: flow in vehicles/hour, density in vehicles/km, speed in km/h.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError

EVENTS = ("none", "accident", "closure", "scheduled_event")
WEATHER_FIELDS = ("temperature", "humidity", "precipitation", "wind_speed")
DEFAULT_THRESHOLDS = (0.3, 0.7)


@dataclass(frozen=True)
class TrafficObservation:
    """One timestamped sensor reading; ``None`` marks a missing value."""

    timestamp: float
    sensor_id: str
    flow: Optional[float]
    vehicle_count: Optional[float]
    speed: Optional[float]
    density: Optional[float]
    temperature: Optional[float]
    humidity: Optional[float]
    precipitation: Optional[float]
    wind_speed: Optional[float]
    event: Optional[str] = "none"

    def validate(self):
        """Raise ``DataError`` naming the first field that breaks a range invariant."""
        for name in ("flow", "vehicle_count", "speed", "density", "precipitation", "wind_speed"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v < 0):
                raise DataError(f"must be a finite value >= 0, got {v}", field=name)
        for name in ("temperature",):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise DataError(f"must be finite, got {v}", field=name)
        if self.humidity is not None and not 0.0 <= self.humidity <= 100.0:
            raise DataError(f"must lie in [0, 100], got {self.humidity}", field="humidity")
        if self.event is not None and self.event not in EVENTS:
            raise DataError(f"unknown event {self.event!r}", field="event")
        return self

    def resolved_density(self) -> Optional[float]:
        """Observed density, else Q/V when speed is positive, else None."""
        if self.density is not None:
            return self.density
        if self.flow is not None and self.speed is not None and self.speed > 0:
            return density_from_flow(self.flow, self.speed)
        return None


@dataclass(frozen=True)
class DensityProfile:
    free_flow_density: float = 10.0
    congested_density: float = 40.0

    def __post_init__(self):
        if not 0 <= self.free_flow_density < self.congested_density:
            raise ConfigError(
                "density profile needs 0 <= free_flow_density < congested_density, "
                f"got ({self.free_flow_density}, {self.congested_density})"
            )


class Level(enum.IntEnum):
    FREE = 0
    MODERATE = 1
    CONGESTED = 2


@dataclass(frozen=True)
class CongestionLevel:
    level: Level
    tdr: float


def traffic_flow(density, speed) -> float:
    """Q = K * V."""
    if density < 0 or speed < 0:
        raise ConfigError(f"density and speed must be >= 0, got ({density}, {speed})")
    return density * speed


def density_from_flow(flow, speed) -> float:
    if flow < 0:
        raise ConfigError(f"flow must be >= 0, got {flow}")
    if not speed > 0:
        raise ConfigError("density cannot be derived from a zero speed")
    return flow / speed


def tdr(current_density, profile) -> float:
    """Traffic density ratio (current - free) / (congested - free), unclamped.

    ``profile`` is a ``DensityProfile`` or a ``(free, congested)`` pair.
    """
    if isinstance(profile, DensityProfile):
        free, congested = profile.free_flow_density, profile.congested_density
    else:
        free, congested = profile
    span = congested - free
    if span == 0:
        raise ConfigError("degenerate density profile: free-flow equals congested density")
    return (current_density - free) / span


def _check_thresholds(thresholds):
    low, high = thresholds
    if not 0 <= low < high <= 1:
        raise ConfigError(f"thresholds need 0 <= low < high <= 1, got {thresholds}")
    return low, high


def classify_congestion(tdr_value, thresholds=DEFAULT_THRESHOLDS) -> CongestionLevel:
    low, high = _check_thresholds(thresholds)
    clamped = min(max(tdr_value, 0.0), 1.0)
    if clamped < low:
        level = Level.FREE
    elif clamped <= high:
        level = Level.MODERATE
    else:
        level = Level.CONGESTED
    return CongestionLevel(level, tdr_value)


def classify_densities(densities, profile, thresholds=DEFAULT_THRESHOLDS) -> np.ndarray:
    """Vectorized ``classify_congestion(tdr(k))``; returns integer levels."""
    low, high = _check_thresholds(thresholds)
    ratios = np.array([tdr(k, profile) for k in np.asarray(densities, dtype=np.float64)])
    clamped = np.clip(ratios, 0.0, 1.0)
    return np.where(clamped < low, Level.FREE, np.where(clamped <= high, Level.MODERATE, Level.CONGESTED)).astype(int)


@dataclass(frozen=True)
class FeatureSpec:
    """Which fields enter the model input.

    The window is ``lags + 1`` observations, oldest first.  The vector holds
    the ``lags + 1`` flows, then current density, hour-of-day (sin, cos),
    the four weather scalars and a one-hot event flag for the latest
    observation, each block only when enabled.
    """

    lags: int = 12
    density: bool = True
    time_of_day: bool = True
    weather: bool = True
    events: bool = True

    def __post_init__(self):
        if int(self.lags) < 0:
            raise ConfigError("lags must be >= 0")

    @property
    def window(self):
        return int(self.lags) + 1

    def names(self) -> list[str]:
        names = [f"flow_lag{k}" for k in range(self.lags, -1, -1)]
        if self.density:
            names.append("density")
        if self.time_of_day:
            names += ["hour_sin", "hour_cos"]
        if self.weather:
            names += list(WEATHER_FIELDS)
        if self.events:
            names += [f"event_{e}" for e in EVENTS]
        return names

    @property
    def dim(self):
        return len(self.names())


def hour_of_day(timestamp) -> float:
    return (float(timestamp) % 86400.0) / 3600.0


def encode_hour(hour):
    angle = 2.0 * math.pi * hour / 24.0
    return math.sin(angle), math.cos(angle)


def build_features(window: Sequence[TrafficObservation], spec: FeatureSpec = FeatureSpec(), stats=None) -> np.ndarray:
    """Feature vector for the last observation of ``window``.

    ``stats`` (a ``NormStats``) min-max scales the result when given.
    """
    if len(window) != spec.window:
        raise DataError(f"window has {len(window)} observations, feature spec needs {spec.window}")
    for prev, cur in zip(window, window[1:]):
        if not cur.timestamp > prev.timestamp:
            raise DataError(f"window timestamps not strictly increasing at {cur.timestamp}")
    flows = [o.flow for o in window]
    if any(f is None for f in flows):
        raise DataError("missing flow in window", field="flow")
    values = list(flows)
    last = window[-1]
    if spec.density:
        k = last.resolved_density()
        if k is None:
            raise DataError("density missing and not derivable", field="density")
        values.append(k)
    if spec.time_of_day:
        values += encode_hour(hour_of_day(last.timestamp))
    if spec.weather:
        for name in WEATHER_FIELDS:
            v = getattr(last, name)
            if v is None:
                raise DataError("missing weather value", field=name)
            values.append(v)
    if spec.events:
        event = last.event or "none"
        values += [1.0 if event == e else 0.0 for e in EVENTS]
    vec = np.array(values, dtype=np.float64)
    if stats is not None:
        vec = stats.transform(vec)
    return vec
