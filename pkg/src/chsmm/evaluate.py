"""Forecast scoring and prediction-error anomaly screening.

The headline metric normalizes each rolling window's aggregate deviation
by the range of aggregate actual consumption across windows. Note the
numerator squares the *sum* of deviations within a window (deviations of
opposite sign cancel); a conventional per-step variant is reported
alongside as ``nrmse_stepwise``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, UndefinedNormalizerError
from .forecasting import context_at, forecast, forecast_exog_from_history
from .ingest import HOUR_FRAC, PowerSeries
from .model import ChsmModel
from .states import EpochSequence, segment

HIGH_NRMSE = "high-nrmse"
DURATION_OUT_OF_RANGE = "duration-out-of-range"


@dataclass(frozen=True)
class ApplianceScore:
    appliance_id: str
    horizon: int
    nrmse: float
    nrmse_stepwise: float


@dataclass(frozen=True)
class AggregateScore:
    group_id: str
    n: int
    horizon: int
    nrmse: float
    nrmse_stepwise: float


@dataclass(frozen=True)
class AnomalyFlag:
    appliance_id: str
    score: float
    reason: str  # HIGH_NRMSE | DURATION_OUT_OF_RANGE


@dataclass
class EvaluationReport:
    per_appliance: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    anomalies: list = field(default_factory=list)


def _window_stats(actuals: np.ndarray, predictions: np.ndarray):
    a = np.asarray(actuals, dtype=np.float64)
    p = np.asarray(predictions, dtype=np.float64)
    if a.shape != p.shape:
        raise InputError(f"shape mismatch: actuals {a.shape} vs predictions {p.shape}")
    if a.ndim == 2:
        a = a[:, None, :]
        p = p[:, None, :]
    if a.ndim != 3:
        raise InputError("expected (windows, H) or (windows, appliances, H) arrays")
    if a.shape[0] < 2:
        raise InputError("need at least 2 evaluation windows")
    return a, p


def nrmse(actuals: np.ndarray, predictions: np.ndarray) -> float:
    """Range-normalized aggregate forecast error across rolling windows.

    Per window w: D_w = sum over appliances and steps of (actual -
    predicted), S_w = the same sum of actuals. The value is
    mean_w sqrt(D_w^2 / H) divided by (max_w S_w - min_w S_w).
    """
    a, p = _window_stats(actuals, predictions)
    H = a.shape[2]
    D = (a - p).sum(axis=(1, 2))
    S = a.sum(axis=(1, 2))
    rng = float(S.max() - S.min())
    if rng == 0.0:
        raise UndefinedNormalizerError(
            "all evaluation windows have identical aggregate actual sums"
        )
    return float(np.mean(np.abs(D) / np.sqrt(H)) / rng)


def nrmse_stepwise(actuals: np.ndarray, predictions: np.ndarray) -> float:
    """Conventional variant: per-step squared aggregate deviations.

    Same normalizer as :func:`nrmse`; numerator is the per-window RMS of
    the aggregate per-step error instead of the squared window sum.
    """
    a, p = _window_stats(actuals, predictions)
    dev = (a - p).sum(axis=1)  # aggregate over appliances, keep steps
    per_window = np.sqrt(np.mean(dev**2, axis=1))
    S = a.sum(axis=(1, 2))
    rng = float(S.max() - S.min())
    if rng == 0.0:
        raise UndefinedNormalizerError(
            "all evaluation windows have identical aggregate actual sums"
        )
    return float(np.mean(per_window) / rng)


def _forecast_windows(args):
    """(actuals, predictions) matrices of shape (n_origins, H) for one appliance."""
    model, series, origins, H, exog_policy = args
    epochs = segment(series, model.states, int(model.training_meta.get("debounce", 0)))
    z_names = [f.name for f in model.exog_spec.features]
    w_names = list(model.emission.features)
    needed = sorted(set(z_names) | set(w_names))
    acts = np.empty((len(origins), H))
    preds = np.empty((len(origins), H))
    for row, t in enumerate(origins):
        if exog_policy == "actual":
            exg = {n: series.feature_column(n)[t + 1 : t + 1 + H] for n in needed}
            z_hat, w_hat = exg, exg
        else:
            z_hat, w_hat = forecast_exog_from_history(
                series, t, H, policy=exog_policy, features=tuple(needed)
            )
        ctx = context_at(model, epochs, t, z_hat, w_hat)
        preds[row] = forecast(model, ctx, H).power_hat
        acts[row] = series.power[t + 1 : t + 1 + H]
    return acts, preds


def _valid_origins(models: dict, test_series: dict, H_max: int, stride: int) -> list[int]:
    t_lo = 0
    t_hi = min(len(s) for s in test_series.values()) - H_max - 1
    for aid, series in test_series.items():
        model = models[aid]
        epochs = segment(series, model.states, int(model.training_meta.get("debounce", 0)))
        if epochs.n_epochs < 2:
            raise InputError(f"test series {aid!r} yields fewer than 2 epochs")
        t_lo = max(t_lo, int(epochs.starts[1]))
    if t_lo > t_hi:
        raise InputError("test series too short for the requested horizons")
    return list(range(t_lo, t_hi + 1, stride))


def sweep(
    models: dict,
    test_series: dict,
    horizons=(60,),
    group_sizes=(1,),
    origin_stride: int = 30,
    exog_policy: str = "actual",
    jobs: int = 1,
) -> EvaluationReport:
    """Rolling-origin evaluation over a fleet, per horizon and aggregation size.

    Origins advance by ``origin_stride`` steps over the span every
    appliance can serve (past its first observed transition, with full
    horizon coverage). Aggregates sum member trajectories — actual and
    predicted — before scoring. ``exog_policy`` is ``"actual"`` (use the
    test trace's own covariates, isolating model error) or
    ``"persistence"``.
    """
    if set(models.keys()) != set(test_series.keys()):
        missing = set(models) ^ set(test_series)
        raise InputError(f"appliance sets differ between models and series: {sorted(missing)}")
    if not models:
        raise InputError("no appliances to evaluate")
    horizons = sorted(set(int(h) for h in horizons))
    if horizons[0] < 1:
        raise InputError("horizons must be >= 1")
    H_max = horizons[-1]
    ids = sorted(models.keys())
    origins = _valid_origins(models, test_series, H_max, origin_stride)
    if len(origins) < 2:
        raise InputError("need at least 2 rolling origins; lower origin_stride or extend data")

    tasks = [(models[a], test_series[a], origins, H_max, exog_policy) for a in ids]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_forecast_windows, tasks))
    else:
        results = [_forecast_windows(t) for t in tasks]
    acts = {a: r[0] for a, r in zip(ids, results)}
    preds = {a: r[1] for a, r in zip(ids, results)}

    report = EvaluationReport()
    for aid in ids:
        for h in horizons:
            report.per_appliance.append(
                ApplianceScore(
                    aid,
                    h,
                    nrmse(acts[aid][:, :h], preds[aid][:, :h]),
                    nrmse_stepwise(acts[aid][:, :h], preds[aid][:, :h]),
                )
            )
    for n in group_sizes:
        n = int(n)
        if n < 1 or n > len(ids):
            raise InputError(f"group size {n} invalid for a fleet of {len(ids)}")
        for gi in range(len(ids) // n):
            members = ids[gi * n : (gi + 1) * n]
            a_sum = np.sum([acts[m] for m in members], axis=0)
            p_sum = np.sum([preds[m] for m in members], axis=0)
            for h in horizons:
                report.aggregates.append(
                    AggregateScore(
                        f"g{n}_{gi}",
                        n,
                        h,
                        nrmse(a_sum[:, :h], p_sum[:, :h]),
                        nrmse_stepwise(a_sum[:, :h], p_sum[:, :h]),
                    )
                )
    return report


def detect_anomalies(
    report: EvaluationReport,
    models: dict,
    test_epochs: dict,
    k_mad: float = 3.0,
) -> list[AnomalyFlag]:
    """Flag appliances by robust prediction-error outliers and novel durations.

    High-error rule: per horizon, NRMSE above median + k_mad * MAD of the
    fleet (skipped with a warning for fleets smaller than 3). Duration
    rule: any test-time epoch longer than the longest training duration
    seen for that state.
    """
    flags: dict[tuple[str, str], AnomalyFlag] = {}

    horizons = sorted({s.horizon for s in report.per_appliance})
    for h in horizons:
        scores = [(s.appliance_id, s.nrmse) for s in report.per_appliance if s.horizon == h]
        if len(scores) < 3:
            warnings.warn(
                f"population of {len(scores)} too small for the high-nrmse rule; skipping",
                stacklevel=2,
            )
            continue
        values = np.array([v for _, v in scores])
        med = float(np.median(values))
        mad = float(np.median(np.abs(values - med)))
        for (aid, v) in scores:
            if v > med + k_mad * mad:
                key = (aid, HIGH_NRMSE)
                if key not in flags or flags[key].score < v:
                    flags[key] = AnomalyFlag(aid, float(v), HIGH_NRMSE)

    for aid, epochs in test_epochs.items():
        if aid not in models:
            raise InputError(f"no model for appliance {aid!r}")
        model: ChsmModel = models[aid]
        trained_max = model.state_duration_max
        for s in range(model.n_states):
            mask = epochs.states == s
            if not mask.any():
                continue
            test_max = int(epochs.durations[mask].max())
            if test_max > int(trained_max[s]):
                ratio = test_max / max(int(trained_max[s]), 1)
                key = (aid, DURATION_OUT_OF_RANGE)
                if key not in flags or flags[key].score < ratio:
                    flags[key] = AnomalyFlag(aid, float(ratio), DURATION_OUT_OF_RANGE)

    return sorted(flags.values(), key=lambda f: (f.appliance_id, f.reason))


def segment_fleet(models: dict, test_series: dict) -> dict:
    """Per-appliance epoch sequences of the test traces under each model's states."""
    out: dict[str, EpochSequence] = {}
    for aid, series in test_series.items():
        model = models[aid]
        out[aid] = segment(series, model.states, int(model.training_meta.get("debounce", 0)))
    return out
