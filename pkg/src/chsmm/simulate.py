"""Generative sampling from fitted or hand-specified models.

The sampler draws an initial (state, duration) pair, then alternates
covariate-conditioned state and duration draws, emitting per-step power
from the Gaussian emission. The final epoch is truncated at the horizon
and flagged: its true duration is censored.

``make_fixture`` produces synthetic appliance traces with realistic
qualitative structure (multi-modal refrigerators, temperature-coupled air
conditioners, scheduled pool pumps, nightly EV charging) for tests and
demos. Fixtures are fully reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import InputError
from .ingest import ExogFeature, ExogSpec, PowerSeries, hour_frac_at
from .model import (
    ChsmModel,
    EmissionModel,
    FeatureCodec,
    InitialDistribution,
    Variant,
    duration_proba,
    emission_mean,
    transition_proba,
)
from .mnlr import MnlrModel
from .states import StateSpace

DEFAULT_START = datetime(2023, 6, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SyntheticWeather:
    """Sinusoidal daily outdoor temperature with Gaussian noise."""

    mean_c: float = 28.0
    amplitude_c: float = 6.0
    peak_hour: float = 15.0
    noise_std: float = 0.5


@dataclass(frozen=True)
class SimConfig:
    model: ChsmModel
    T: int
    seed: int = 0
    weather: SyntheticWeather = field(default_factory=SyntheticWeather)
    start: datetime = DEFAULT_START
    appliance_id: str = "sim"

    def __post_init__(self):
        if self.T < 1:
            raise InputError("T must be >= 1")


@dataclass(frozen=True)
class SimTrace:
    """A sampled trace plus the generalized-state chain that produced it."""

    series: PowerSeries
    states: np.ndarray
    durations: np.ndarray
    truncated_last: bool


def _hour_fracs(start: datetime, step_s: float, T: int) -> np.ndarray:
    base = hour_frac_at(start, step_s, 0)
    return (base + np.arange(T) * step_s / 86400.0) % 1.0


def _weather_trace(cfg: SimConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    step_s = float(cfg.model.training_meta.get("step_s", 60.0))
    hour = _hour_fracs(cfg.start, step_s, cfg.T)
    w = cfg.weather
    temp = w.mean_c + w.amplitude_c * np.cos(2 * np.pi * (hour * 24 - w.peak_hour) / 24.0)
    if w.noise_std > 0:
        temp = temp + rng.normal(0.0, w.noise_std, cfg.T)
    return hour, temp


def sample_trace_detailed(config: SimConfig) -> SimTrace:
    """Sample a full trace, returning the underlying epoch chain as well."""
    model = config.model
    step_s = float(model.training_meta.get("step_s", 60.0))
    rng = np.random.default_rng(config.seed)
    hour, temp = _weather_trace(config, rng)

    def col(name: str) -> np.ndarray:
        if name == "temp_c":
            return temp
        if name == "hour_frac":
            return hour
        raise InputError(f"simulator provides temp_c and hour_frac, not {name!r}")

    z_names = [f.name for f in model.exog_spec.features]
    w_names = list(model.emission.features)

    T = config.T
    power = np.empty(T)
    chain_states: list[int] = []
    chain_durs: list[int] = []

    x, d = model.initial.sample(rng)
    t = 0
    truncated = False
    while True:
        steps = min(d, T - t)
        chain_states.append(x)
        chain_durs.append(d)
        w_slice = (
            np.column_stack([col(n)[t : t + steps] for n in w_names]) if w_names else None
        )
        mean = np.array(
            [
                emission_mean(model, x, w_slice[i] if w_slice is not None else None)
                for i in range(steps)
            ]
        )
        noise = rng.normal(0.0, model.emission.sigma[x], steps)
        power[t : t + steps] = np.maximum(mean + noise, 0.0)
        t += steps
        if t >= T:
            truncated = d > steps
            break
        z = {n: float(col(n)[t]) for n in z_names}
        ps = transition_proba(model, x, d, z)
        x_next = int(rng.choice(model.n_states, p=ps / ps.sum()))
        pd_ = duration_proba(model, x, d, x_next, z)
        d_next = int(rng.choice(model.d_max, p=pd_ / pd_.sum())) + 1
        x, d = x_next, d_next

    exog = {"temp_c": temp}
    series = PowerSeries(config.appliance_id, config.start, power, exog, step_s)
    return SimTrace(
        series, np.array(chain_states), np.array(chain_durs), truncated
    )


def sample_trace(config: SimConfig) -> PowerSeries:
    """Sample a synthetic power trace from the model (reproducible per seed)."""
    return sample_trace_detailed(config).series


# ---------------------------------------------------------------------------
# hand-specified ground-truth models


def truncated_geometric_pmf(mean: float, d_max: int) -> np.ndarray:
    """Geometric-shaped pmf over 1..d_max with roughly the requested mean."""
    if mean <= 1:
        p = np.zeros(d_max)
        p[0] = 1.0
        return p
    q = 1.0 - 1.0 / mean
    pmf = (1 - q) * q ** np.arange(d_max)
    return pmf / pmf.sum()


def peaked_pmf(mode: int, spread: float, d_max: int) -> np.ndarray:
    """Discretized bell over 1..d_max centered at ``mode``."""
    d = np.arange(1, d_max + 1)
    pmf = np.exp(-0.5 * ((d - mode) / max(spread, 1e-6)) ** 2)
    return pmf / pmf.sum()


def build_table_model(
    centroids,
    d_max: int,
    trans_table,
    dur_pmfs,
    sigma,
    phi=None,
    emission_intercept=None,
    emission_features: tuple[str, ...] = (),
    temp_in_z: bool = False,
    trans_temp_slopes=None,
    dur_temp_slopes=None,
    trans_dur_slopes=None,
    initial=None,
    step_s: float = 60.0,
) -> ChsmModel:
    """Assemble a ground-truth model from explicit probability tables.

    ``trans_table[i, j]`` is P(next=j | prev=i) (diagonal ignored);
    ``dur_pmfs[i, j]`` is the length-d_max pmf of the next duration for the
    i -> j transition. Optional per-unit slopes add covariate and duration
    dependence on the logit scale:

    * ``trans_temp_slopes[i, j]`` tilts transition i -> j by slope ·
      standardized temperature,
    * ``dur_temp_slopes[j]`` shifts destination-j durations longer (positive)
      or shorter per standardized temperature unit,
    * ``trans_dur_slopes[i, j]`` tilts transition i -> j by slope ·
      standardized previous duration.

    The result is a state-specific-variant model usable everywhere a fitted
    model is: sampling, forecasting, probability queries.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    n = centroids.size
    trans_table = np.asarray(trans_table, dtype=np.float64)
    dur_pmfs = np.asarray(dur_pmfs, dtype=np.float64)
    if trans_table.shape != (n, n) or dur_pmfs.shape != (n, n, d_max):
        raise InputError("trans_table must be (n, n); dur_pmfs must be (n, n, d_max)")

    features = (ExogFeature("temp_c"),) if temp_in_z else ()
    spec = ExogSpec(features)
    enc_dim = spec.dim
    codec = FeatureCodec(
        n_states=n,
        d_max=d_max,
        dur_mean=(1 + d_max) / 2.0,
        dur_std=max(1.0, (d_max - 1) / 2.0),
        z_mean=np.full(enc_dim, 25.0),
        z_std=np.full(enc_dim, 8.0),
        z_mask=np.ones(enc_dim, dtype=bool),
        conditional=temp_in_z,
        scalar_states=False,
    )

    def logp(p):
        return np.log(np.maximum(p, 1e-300))

    # per-origin transition MNLRs over features [dur_feat, z...]
    state_models = []
    for i in range(n):
        coeffs = np.zeros((n, 1 + codec.z_dim + 1))
        coeffs[:, -1] = logp(trans_table[i])
        if trans_dur_slopes is not None:
            coeffs[:, 0] = np.asarray(trans_dur_slopes)[i]
        if temp_in_z and trans_temp_slopes is not None:
            coeffs[:, 1] = np.asarray(trans_temp_slopes)[i]
        state_models.append(MnlrModel(coeffs))

    # per-destination duration MNLRs over features [onehot origin, dur_feat, z...]
    d_scaled = (np.arange(1, d_max + 1) - codec.dur_mean) / codec.dur_std
    dur_models = []
    for j in range(n):
        coeffs = np.zeros((d_max, n + 1 + codec.z_dim + 1))
        for i in range(n):
            coeffs[:, i] = logp(dur_pmfs[i, j])
        if temp_in_z and dur_temp_slopes is not None:
            coeffs[:, n + 1] = float(np.asarray(dur_temp_slopes)[j]) * d_scaled
        dur_models.append(MnlrModel(coeffs))

    n_w = len(emission_features)
    emission = EmissionModel(
        gamma=centroids,
        intercept=np.zeros(n) if emission_intercept is None else np.asarray(emission_intercept, dtype=np.float64),
        phi=np.zeros((n, n_w)) if phi is None else np.asarray(phi, dtype=np.float64).reshape(n, n_w),
        sigma=np.asarray(sigma, dtype=np.float64),
        features=emission_features,
    )
    if initial is None:
        initial = InitialDistribution(np.full((n, d_max), 1.0 / (n * d_max)))

    return ChsmModel(
        states=StateSpace(centroids),
        d_max=d_max,
        variant=Variant(state_specific=True, weight_a=None, baseline=not temp_in_z),
        state_mnlr=tuple(state_models),
        dur_mnlr=tuple(dur_models),
        emission=emission,
        initial=initial,
        exog_spec=spec,
        codec=codec,
        state_duration_max=np.full(n, d_max, dtype=np.int64),
        training_meta={"step_s": step_s, "source": "table"},
    )


def fixture_model(kind: str) -> ChsmModel:
    """Ground-truth models behind the sampled fixtures (fridge4, ac2)."""
    if kind == "fridge4":
        d_max = 90
        centroids = [5.0, 130.0, 300.0, 500.0]
        trans = np.array(
            [
                [0.0, 0.90, 0.06, 0.04],
                [0.93, 0.0, 0.04, 0.03],
                [0.5, 0.5, 0.0, 0.0],
                [0.5, 0.5, 0.0, 0.0],
            ]
        )
        dur = np.zeros((4, 4, d_max))
        for i in range(4):
            dur[i, 0] = truncated_geometric_pmf(30.0, d_max)
            dur[i, 1] = peaked_pmf(20, 6.0, d_max)
            dur[i, 2] = peaked_pmf(45, 8.0, d_max)
            dur[i, 3] = peaked_pmf(22, 5.0, d_max)
        # post-ice and post-defrost compressor runs differ (origin dependence)
        dur[2, 1] = peaked_pmf(8, 2.5, d_max)
        dur[3, 1] = peaked_pmf(40, 6.0, d_max)
        init = np.zeros((4, d_max))
        init[0, :40] = 1.0
        init /= init.sum()
        return build_table_model(
            centroids,
            d_max,
            trans,
            dur,
            sigma=[1.5, 6.0, 10.0, 15.0],
            initial=InitialDistribution(init),
        )
    if kind == "ac2":
        d_max = 60
        centroids = [50.0, 1500.0]
        trans = np.array([[0.0, 1.0], [1.0, 0.0]])
        dur = np.zeros((2, 2, d_max))
        # heavy-tailed ON durations: short cycling mode plus a long-run tail
        on_pmf = 0.8 * peaked_pmf(9, 3.0, d_max) + 0.2 * truncated_geometric_pmf(35.0, d_max)
        off_pmf = 0.85 * peaked_pmf(12, 4.0, d_max) + 0.15 * truncated_geometric_pmf(30.0, d_max)
        dur[:, 1] = on_pmf / on_pmf.sum()
        dur[:, 0] = off_pmf / off_pmf.sum()
        init = np.zeros((2, d_max))
        init[0, :12] = 1.0
        init /= init.sum()
        # hot weather: longer compressor runs, shorter off periods; ON power
        # rises ~30 W per degree C
        return build_table_model(
            centroids,
            d_max,
            trans,
            dur,
            sigma=[5.0, 40.0],
            phi=[[0.0], [30.0]],
            emission_intercept=[0.0, -30.0 * 25.0],
            emission_features=("temp_c",),
            temp_in_z=True,
            dur_temp_slopes=[-2.5, 2.5],
            initial=InitialDistribution(init),
        )
    raise InputError(f"unknown fixture model {kind!r}")


def _procedural_weather(T: int, start: datetime, step_s: float, rng, weather=SyntheticWeather()):
    hour = _hour_fracs(start, step_s, T)
    temp = weather.mean_c + weather.amplitude_c * np.cos(
        2 * np.pi * (hour * 24 - weather.peak_hour) / 24.0
    )
    if weather.noise_std > 0:
        temp = temp + rng.normal(0.0, weather.noise_std, T)
    return temp


def _pump_fixture(seed: int, T: int, start: datetime) -> PowerSeries:
    rng = np.random.default_rng(seed)
    temp = _procedural_weather(T, start, 60.0, rng)
    # schedule offset is a pure function of the seed so seeds congruent
    # mod 120 share a schedule (lets tests pair train/test traces)
    phase = int(seed % 120)
    on_start = 8 * 60 + phase
    on_len = 420
    minute_of_day = np.rint(_hour_fracs(start, 60.0, T) * 1440).astype(int) % 1440
    on = (minute_of_day >= on_start) & (minute_of_day < on_start + on_len)
    power = np.where(on, 1000.0, 3.0) + rng.normal(0.0, 0.8, T) + on * rng.normal(0.0, 8.0, T)
    return PowerSeries(f"pump2_{seed}", start, np.maximum(power, 0.0), {"temp_c": temp}, 60.0)


def _ev_fixture(seed: int, T: int, start: datetime, anomaly: bool) -> PowerSeries:
    rng = np.random.default_rng(seed)
    temp = _procedural_weather(T, start, 60.0, rng)
    power = np.maximum(rng.normal(2.0, 0.5, T), 0.0)
    n_days = T // 1440 + 1
    skip = range(8, 8 + 16) if anomaly else ()
    for day in range(n_days):
        if day in skip:
            continue
        charge_start = day * 1440 + 21 * 60 + int(rng.normal(30.0, 40.0))
        charge_len = int(np.clip(rng.normal(210.0, 40.0), 60, 420))
        lo = max(charge_start, 0)
        hi = min(charge_start + charge_len, T)
        if lo < hi:
            power[lo:hi] = 3300.0 + rng.normal(0.0, 20.0, hi - lo)
    return PowerSeries(f"ev2_{seed}", start, np.maximum(power, 0.0), {"temp_c": temp}, 60.0)


def make_fixture(
    kind: str, seed: int = 0, T: int = 20160, anomaly: bool = False, start: datetime = DEFAULT_START
) -> PowerSeries:
    """Synthetic appliance trace of one of the four reference kinds.

    fridge4: four power modes near 5/130/300/500 W with origin-dependent
    run lengths. ac2: two states, heavy-tailed compressor-ON durations,
    ON power linear in outdoor temperature. pump2: deterministic daily
    schedule with a per-seed phase offset. ev2: nightly ~3.3 kW charging;
    ``anomaly=True`` removes 16 consecutive days of charging.
    """
    if kind in ("fridge4", "ac2"):
        cfg = SimConfig(
            model=fixture_model(kind), T=T, seed=seed, start=start, appliance_id=f"{kind}_{seed}"
        )
        return sample_trace(cfg)
    if kind == "pump2":
        return _pump_fixture(seed, T, start)
    if kind == "ev2":
        return _ev_fixture(seed, T, start, anomaly)
    raise InputError(f"unknown fixture kind {kind!r}")
