"""Short-term load forecasting: greedy most-likely state/duration chain.

Starting inside an epoch, the forecaster first predicts how long the
appliance remains in the current state (argmax over durations no shorter
than the time already spent), then alternates most-likely-next-state /
most-likely-duration steps until the horizon is covered, and finally maps
states to expected power with the emission model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import InputError
from .ingest import HOUR_FRAC, ExogFeature, ExogSpec, PowerSeries, hour_frac_at, join_exog
from .model import ChsmModel, duration_proba, emission_mean, transition_proba
from .states import EpochSequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForecastContext:
    """Where the appliance is at forecast time t.

    ``elapsed`` counts the steps already spent in the current state,
    including step t itself (so it is always >= 1). ``z_curr`` holds the
    covariate values observed at the current epoch's first step; ``z_hat``
    and ``w_hat`` hold predicted covariates for steps t+1 .. t+H (index 0
    is step t+1).
    """

    x_prev: int
    d_prev: int
    x_curr: int
    elapsed: int
    t: int
    z_curr: dict = field(default_factory=dict)
    z_hat: dict = field(default_factory=dict)
    w_hat: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.elapsed < 1:
            raise InputError("elapsed must be >= 1")
        if self.d_prev < 1:
            raise InputError("d_prev must be >= 1")


@dataclass(frozen=True)
class ForecastResult:
    """Predicted trajectory over exactly H steps.

    ``chain`` lists the (state, duration) epochs covering steps t+1..t+H:
    the first entry, when present, is the remainder of the current epoch;
    later entries carry their full predicted durations, so durations sum
    to at least H. ``truncated_last`` marks a final epoch extending past
    the horizon.
    """

    power_hat: np.ndarray
    chain: list
    truncated_last: bool


def _z_coverage(model: ChsmModel, ctx: ForecastContext, H: int) -> list[str]:
    names = [f.name for f in model.exog_spec.features] if model.codec.conditional else []
    for name in names:
        if name not in ctx.z_hat or len(ctx.z_hat[name]) < H:
            raise InputError(f"z_hat must cover {H} steps for covariate {name!r}")
    return names


def predict_remaining_duration(model: ChsmModel, ctx: ForecastContext) -> int:
    """Most likely total duration of the current epoch, at least ``elapsed``.

    Ties break toward the smallest duration. When the time already spent
    exceeds the model's duration cap the cap is returned (the epoch is
    treated as ending immediately) and a diagnostic is logged.
    """
    if ctx.elapsed > model.d_max:
        logger.warning(
            "elapsed %d exceeds d_max %d; truncating current epoch", ctx.elapsed, model.d_max
        )
        return model.d_max
    p = duration_proba(model, ctx.x_prev, ctx.d_prev, ctx.x_curr, ctx.z_curr)
    lo = ctx.elapsed - 1
    return int(np.argmax(p[lo:])) + ctx.elapsed


def forecast(model: ChsmModel, ctx: ForecastContext, H: int) -> ForecastResult:
    """Greedy most-likely chain and expected power for steps t+1 .. t+H."""
    if H < 1:
        raise InputError("horizon H must be >= 1")
    z_names = _z_coverage(model, ctx, H)
    w_names = model.emission.features
    for name in w_names:
        if name not in ctx.w_hat or len(ctx.w_hat[name]) < H:
            raise InputError(f"w_hat must cover {H} steps for covariate {name!r}")

    d_hat = predict_remaining_duration(model, ctx)
    remaining = max(0, d_hat - ctx.elapsed)
    chain: list[tuple[int, int]] = []
    if remaining > 0:
        chain.append((ctx.x_curr, remaining))
    covered = remaining
    x_p, d_p = ctx.x_curr, min(d_hat, model.d_max)
    while covered < H:
        z = {name: float(ctx.z_hat[name][covered]) for name in z_names}
        x_n = int(np.argmax(transition_proba(model, x_p, d_p, z)))
        d_n = int(np.argmax(duration_proba(model, x_p, d_p, x_n, z))) + 1
        chain.append((x_n, d_n))
        covered += d_n
        x_p, d_p = x_n, d_n

    step_states = np.repeat(
        [s for s, _ in chain], [d for _, d in chain]
    )[:H]
    power_hat = np.empty(H)
    if w_names:
        for i in range(H):
            w = {name: float(ctx.w_hat[name][i]) for name in w_names}
            power_hat[i] = emission_mean(model, int(step_states[i]), w)
    else:
        means = np.array([emission_mean(model, s) for s in range(model.n_states)])
        power_hat[:] = means[step_states]
    return ForecastResult(power_hat, chain, truncated_last=covered > H)


def context_at(
    model: ChsmModel,
    epochs: EpochSequence,
    t: int,
    z_hat: dict | None = None,
    w_hat: dict | None = None,
) -> ForecastContext:
    """Build the forecast context at step ``t`` from a segmented history.

    ``t`` must fall inside the second epoch or later so the previous
    generalized state is observed.
    """
    if not 0 <= t < epochs.total_steps:
        raise InputError(f"t={t} outside the series")
    k = int(epochs.step_epoch_index()[t])
    if k < 1:
        raise InputError(f"t={t} falls in the first epoch; no previous state observed")
    start = int(epochs.starts[k])
    names = [f.name for f in model.exog_spec.features]
    z_curr = {n: float(epochs.series.feature_column(n)[start]) for n in names}
    return ForecastContext(
        x_prev=int(epochs.states[k - 1]),
        d_prev=int(epochs.durations[k - 1]),
        x_curr=int(epochs.states[k]),
        elapsed=t - start + 1,
        t=t,
        z_curr=z_curr,
        z_hat=z_hat or {},
        w_hat=w_hat or {},
    )


def forecast_exog_from_history(
    series: PowerSeries,
    t: int,
    H: int,
    policy: str = "persistence",
    forecast_path=None,
    features: tuple[str, ...] = (),
) -> tuple[dict, dict]:
    """Predicted covariate trajectories for steps t+1 .. t+H.

    ``persistence`` holds each column covariate at its value observed at
    step t; hour-of-day always rolls forward deterministically from the
    timestamps. ``from-file`` interpolates a supplied forecast CSV instead.
    Returns (z_hat, w_hat) — identical contents, split for the caller's
    bookkeeping.
    """
    if policy not in ("persistence", "from-file"):
        raise InputError(f"unknown exog policy {policy!r}")
    if not 0 <= t < len(series):
        raise InputError(f"t={t} outside the series")
    if H < 1:
        raise InputError("H must be >= 1")
    names = tuple(features) or tuple(series.exog.keys()) + (HOUR_FRAC,)
    out: dict[str, np.ndarray] = {}
    column_names = [n for n in names if n != HOUR_FRAC]
    if HOUR_FRAC in names:
        out[HOUR_FRAC] = np.array(
            [hour_frac_at(series.start, series.step_s, t + 1 + i) for i in range(H)]
        )
    if policy == "persistence":
        for name in column_names:
            out[name] = np.full(H, float(series.feature_column(name)[t]))
    else:
        if forecast_path is None:
            raise InputError("from-file policy requires a forecast file path")
        future_start = series.timestamps()[t].to_pydatetime() + pd.Timedelta(
            seconds=series.step_s
        )
        future = PowerSeries(series.appliance_id, future_start, np.zeros(H), {}, series.step_s)
        spec = ExogSpec(tuple(ExogFeature(n) for n in column_names))
        joined = join_exog(future, forecast_path, spec)
        for name in column_names:
            out[name] = joined.exog[name]
    return dict(out), dict(out)
