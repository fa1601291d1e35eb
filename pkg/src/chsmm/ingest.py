"""Loading, validation, resampling, and covariate alignment for appliance power data.

Everything downstream consumes :class:`PowerSeries`: a gap-free, uniformly
sampled real-power trajectory with per-step exogenous covariates aligned 1:1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import AlignmentError, EmptyInputError, InputError, ParseError

SECONDS_PER_DAY = 86400.0

HOUR_FRAC = "hour_frac"


@dataclass(frozen=True)
class PowerSeries:
    """Uniformly sampled real-power trajectory with aligned covariates.

    Invariants enforced at construction: all sequences share one length
    T >= 1, power is finite and non-negative, and timestamps implied by
    (start, step_s, index) are strictly increasing with no gaps.
    """

    appliance_id: str
    start: datetime
    power: np.ndarray
    exog: dict[str, np.ndarray] = field(default_factory=dict)
    step_s: float = 60.0

    def __post_init__(self):
        power = np.asarray(self.power, dtype=np.float64)
        if power.ndim != 1 or power.size < 1:
            raise InputError("power must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(power)):
            raise InputError("power values must be finite")
        if np.any(power < 0):
            raise InputError("power values must be >= 0")
        if self.step_s <= 0:
            raise InputError("step_s must be positive")
        start = self.start
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        exog = {}
        for name, values in self.exog.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != power.shape:
                raise InputError(
                    f"exog feature {name!r} has length {arr.size}, expected {power.size}"
                )
            exog[name] = arr
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "exog", exog)
        object.__setattr__(self, "start", start)

    def __len__(self) -> int:
        return int(self.power.size)

    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(
            self.start, periods=len(self), freq=pd.Timedelta(seconds=self.step_s)
        )

    def hour_frac(self) -> np.ndarray:
        """Fraction of day in [0, 1) for every step, derived from timestamps."""
        ts = self.timestamps()
        secs = (ts - ts.normalize()).total_seconds()
        return np.asarray(secs, dtype=np.float64) / SECONDS_PER_DAY

    def feature_column(self, name: str) -> np.ndarray:
        """Per-step values for a covariate, deriving hour-of-day on demand."""
        if name in self.exog:
            return self.exog[name]
        if name == HOUR_FRAC:
            return self.hour_frac()
        raise InputError(f"series {self.appliance_id!r} has no covariate {name!r}")

    def with_exog(self, extra: dict[str, np.ndarray]) -> "PowerSeries":
        merged = dict(self.exog)
        merged.update(extra)
        return PowerSeries(self.appliance_id, self.start, self.power, merged, self.step_s)

    def slice(self, lo: int, hi: int) -> "PowerSeries":
        if not (0 <= lo < hi <= len(self)):
            raise InputError(f"bad slice [{lo}, {hi}) for series of length {len(self)}")
        start = self.start + timedelta(seconds=lo * self.step_s)
        exog = {k: v[lo:hi] for k, v in self.exog.items()}
        return PowerSeries(self.appliance_id, start, self.power[lo:hi], exog, self.step_s)


@dataclass(frozen=True)
class ExogFeature:
    """One covariate: where it comes from and how it is encoded for regression."""

    name: str
    source: str = "column"  # "column" | "derived-hour-of-day"
    encoding: str = "raw"  # "raw" | "sin-cos-pair" | "one-hot-24"
    unit: str = "c"  # for temperature columns: "c" | "f"

    def __post_init__(self):
        if self.source not in ("column", "derived-hour-of-day"):
            raise InputError(f"unknown exog source {self.source!r}")
        if self.encoding not in ("raw", "sin-cos-pair", "one-hot-24"):
            raise InputError(f"unknown exog encoding {self.encoding!r}")

    @property
    def dim(self) -> int:
        return {"raw": 1, "sin-cos-pair": 2, "one-hot-24": 24}[self.encoding]

    def column_names(self) -> list[str]:
        if self.encoding == "raw":
            return [self.name]
        if self.encoding == "sin-cos-pair":
            return [f"{self.name}_sin", f"{self.name}_cos"]
        return [f"{self.name}_h{h:02d}" for h in range(24)]

    def encode(self, values: np.ndarray) -> np.ndarray:
        """Encode raw per-row values into an (n, dim) block.

        sin-cos and one-hot treat the value as a fraction of day in [0, 1).
        """
        v = np.asarray(values, dtype=np.float64)
        if self.encoding == "raw":
            return v.reshape(-1, 1)
        if self.encoding == "sin-cos-pair":
            ang = 2.0 * np.pi * v
            return np.column_stack([np.sin(ang), np.cos(ang)])
        hours = np.floor((v % 1.0) * 24).astype(int)
        block = np.zeros((v.size, 24))
        block[np.arange(v.size), hours] = 1.0
        return block


@dataclass(frozen=True)
class ExogSpec:
    """Ordered covariate list; encoded dimension is the sum of per-feature dims."""

    features: tuple[ExogFeature, ...] = ()

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise InputError("exog feature names must be unique")
        object.__setattr__(self, "features", tuple(self.features))

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.features)

    def column_names(self) -> list[str]:
        out: list[str] = []
        for f in self.features:
            out.extend(f.column_names())
        return out

    def encode_rows(self, columns: dict[str, np.ndarray]) -> np.ndarray:
        """Encode aligned raw columns into the (n, dim) design block."""
        if not self.features:
            n = len(next(iter(columns.values()))) if columns else 0
            return np.zeros((n, 0))
        blocks = [f.encode(columns[f.name]) for f in self.features]
        return np.hstack(blocks)

    def encode_point(self, values: dict[str, float]) -> np.ndarray:
        cols = {f.name: np.array([values[f.name]]) for f in self.features}
        return self.encode_rows(cols)[0] if self.features else np.zeros(0)

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": f.name, "source": f.source, "encoding": f.encoding, "unit": f.unit}
                for f in self.features
            ]
        }

    @staticmethod
    def from_dict(d: dict) -> "ExogSpec":
        return ExogSpec(tuple(ExogFeature(**f) for f in d.get("features", ())))


@dataclass(frozen=True)
class ColumnSchema:
    """Column names in an input power CSV."""

    timestamp: str = "timestamp"
    power: str = "power_w"
    appliance_id: str | None = None


@dataclass(frozen=True)
class GapPolicy:
    """How to treat missing steps: hold-last for short gaps, split on long ones."""

    max_gap: int = 5  # longest run of missing steps fillable by hold

    def __post_init__(self):
        if self.max_gap < 0:
            raise InputError("max_gap must be >= 0")


def _parse_timestamps(raw: pd.Series) -> pd.DatetimeIndex:
    """Parse a timestamp column (ISO-8601 or epoch seconds), naming bad rows.

    Row numbers in error messages are 1-based data rows (header excluded).
    """
    as_num = pd.to_numeric(raw, errors="coerce")
    if as_num.notna().all():
        ts = pd.to_datetime(as_num, unit="s", utc=True)
        return pd.DatetimeIndex(ts)
    ts = pd.to_datetime(raw, errors="coerce", utc=True, format="ISO8601")
    bad = np.flatnonzero(ts.isna().to_numpy())
    if bad.size:
        row = int(bad[0]) + 1
        raise ParseError(f"row {row}: malformed timestamp {raw.iloc[bad[0]]!r}")
    return pd.DatetimeIndex(ts)


def _parse_power(raw: pd.Series, column: str) -> np.ndarray:
    vals = pd.to_numeric(raw, errors="coerce")
    bad = np.flatnonzero(~np.isfinite(vals.to_numpy(dtype=np.float64, na_value=np.nan)))
    if bad.size:
        row = int(bad[0]) + 1
        raise ParseError(f"row {row}: power column {column!r} has non-numeric value {raw.iloc[bad[0]]!r}")
    out = vals.to_numpy(dtype=np.float64)
    neg = np.flatnonzero(out < 0)
    if neg.size:
        raise ParseError(f"row {int(neg[0]) + 1}: negative power {out[neg[0]]!r}")
    return out


def _read_table(path) -> pd.DataFrame:
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"{path}: file is empty") from None
    if df.empty:
        raise EmptyInputError(f"{path}: no data rows")
    return df


def load_csv_segments(
    path,
    schema: ColumnSchema = ColumnSchema(),
    step_s: float = 60.0,
    gap: GapPolicy = GapPolicy(),
) -> list[PowerSeries]:
    """Load a power CSV into gap-free segments at the requested step.

    Rows are sorted by time and duplicate timestamps collapsed by mean.
    Rows are binned onto the regular grid anchored at the first timestamp
    (bin mean), which also performs down-sampling. Runs of at most
    ``gap.max_gap`` empty bins are filled by holding the last value; longer
    runs split the trace into separate segments.
    """
    df = _read_table(path)
    for col in (schema.timestamp, schema.power):
        if col not in df.columns:
            raise ParseError(f"{path}: missing required column {col!r}")
    ts = _parse_timestamps(df[schema.timestamp])
    power = _parse_power(df[schema.power], schema.power)

    appliance_id = schema.appliance_id or Path(path).stem

    order = np.argsort(ts.asi8, kind="stable")
    ts = ts[order]
    power = power[order]

    t0 = ts[0]
    offsets = (ts.asi8 - t0.value) / 1e9
    bins = np.floor(offsets / step_s).astype(np.int64)

    # mean within each occupied bin (collapses duplicates and down-samples)
    uniq, inverse = np.unique(bins, return_inverse=True)
    sums = np.bincount(inverse, weights=power)
    counts = np.bincount(inverse)
    means = sums / counts

    segments: list[PowerSeries] = []
    seg_bins = [uniq[0]]
    seg_vals = [means[0]]
    for b, v in zip(uniq[1:], means[1:]):
        missing = int(b - seg_bins[-1] - 1)
        if missing <= gap.max_gap:
            seg_bins.extend(range(seg_bins[-1] + 1, b))
            seg_vals.extend([seg_vals[-1]] * missing)
            seg_bins.append(int(b))
            seg_vals.append(float(v))
        else:
            segments.append(_make_segment(appliance_id, t0, step_s, seg_bins, seg_vals))
            seg_bins = [int(b)]
            seg_vals = [float(v)]
    segments.append(_make_segment(appliance_id, t0, step_s, seg_bins, seg_vals))
    return segments


def _make_segment(appliance_id, t0, step_s, seg_bins, seg_vals) -> PowerSeries:
    start = (t0 + pd.Timedelta(seconds=seg_bins[0] * step_s)).to_pydatetime()
    return PowerSeries(appliance_id, start, np.asarray(seg_vals), {}, step_s)


def load_csv(
    path,
    schema: ColumnSchema = ColumnSchema(),
    step_s: float = 60.0,
    gap: GapPolicy = GapPolicy(),
    on_split: str = "error",
) -> PowerSeries:
    """Load a power CSV as a single gap-free :class:`PowerSeries`.

    ``on_split`` controls what happens when gaps longer than the policy
    split the trace: ``"error"`` raises, ``"longest"`` keeps the longest
    segment.
    """
    segments = load_csv_segments(path, schema, step_s, gap)
    if len(segments) == 1:
        return segments[0]
    if on_split == "longest":
        return max(segments, key=len)
    raise AlignmentError(
        f"{path}: {len(segments)} segments separated by gaps longer than "
        f"{gap.max_gap} steps; use load_csv_segments or on_split='longest'"
    )


def join_exog(
    series: PowerSeries,
    exog_path,
    spec: ExogSpec,
    max_gap_s: float = 7200.0,
) -> PowerSeries:
    """Align covariates from a CSV onto every step of the series.

    Column-sourced features are interpolated linearly to the series
    timestamps (the usual hourly-to-minutely case); derived hour-of-day is
    computed from the timestamps themselves. A hole between consecutive
    covariate samples larger than ``max_gap_s`` that overlaps the series
    range is an alignment error, as is a series extending outside the
    covariate record.
    """
    column_feats = [f for f in spec.features if f.source == "column"]
    extra: dict[str, np.ndarray] = {}
    if column_feats:
        df = _read_table(exog_path)
        if "timestamp" not in df.columns:
            raise ParseError(f"{exog_path}: missing required column 'timestamp'")
        ts = _parse_timestamps(df["timestamp"])
        order = np.argsort(ts.asi8, kind="stable")
        ts = ts[order]
        secs = ts.asi8 / 1e9
        series_ts = series.timestamps().asi8 / 1e9

        if series_ts[0] < secs[0] or series_ts[-1] > secs[-1]:
            raise AlignmentError(
                f"{exog_path}: covariates cover [{ts[0]}, {ts[-1]}] but the series "
                f"needs [{series.timestamps()[0]}, {series.timestamps()[-1]}]"
            )
        deltas = np.diff(secs)
        holes = np.flatnonzero(deltas > max_gap_s)
        for i in holes:
            if secs[i + 1] > series_ts[0] and secs[i] < series_ts[-1]:
                raise AlignmentError(
                    f"{exog_path}: covariate gap from {ts[i]} to {ts[i + 1]} "
                    f"exceeds max-gap {max_gap_s:.0f} s"
                )
        # de-duplicate timestamps by mean before interpolation
        uniq, inverse = np.unique(secs, return_inverse=True)
        for feat in column_feats:
            if feat.name not in df.columns:
                raise ParseError(f"{exog_path}: missing covariate column {feat.name!r}")
            vals = pd.to_numeric(df[feat.name].iloc[order], errors="coerce").to_numpy(
                dtype=np.float64
            )
            bad = np.flatnonzero(~np.isfinite(vals))
            if bad.size:
                raise ParseError(
                    f"row {int(order[bad[0]]) + 1}: covariate {feat.name!r} is not numeric"
                )
            sums = np.bincount(inverse, weights=vals)
            counts = np.bincount(inverse)
            aligned = np.interp(series_ts, uniq, sums / counts)
            if feat.unit.lower() == "f":
                aligned = (aligned - 32.0) * 5.0 / 9.0
            extra[feat.name] = aligned
    for feat in spec.features:
        if feat.source == "derived-hour-of-day":
            extra[feat.name] = series.hour_frac()
    return series.with_exog(extra)


def hour_frac_at(start: datetime, step_s: float, index: int) -> float:
    """Fraction of day at a single step index (wraps across midnight)."""
    if start.tzinfo is None:
        start = start.replace(tzinfo=timezone.utc)
    t = start + pd.Timedelta(seconds=index * step_s)
    seconds = t.hour * 3600 + t.minute * 60 + t.second + t.microsecond / 1e6
    return math.fmod(seconds / SECONDS_PER_DAY, 1.0)
