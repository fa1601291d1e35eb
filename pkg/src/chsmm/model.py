"""The conditional hidden semi-Markov appliance load model.

A fitted model composes: K-means operating states, a state-transition
MNLR (next state given previous state, its duration, and epoch
covariates), a duration-transition MNLR (next duration given the
transition and covariates), a Gaussian emission with per-state mean
offset and optional linear covariate term, and a smoothed initial
distribution over (state, duration) pairs.

Variants: pooled vs state-specific MNLRs (one transition model per
origin state, one duration model per destination state), duration-
weighted vs unweighted likelihoods, and the unconditioned baseline
(covariate blocks removed everywhere — a plain HSMM).
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import mnlr
from .errors import (
    InputError,
    InsufficientDataError,
    ModelLoadError,
    ModelVersionError,
)
from .ingest import ExogSpec, PowerSeries
from .states import EpochSequence, StateSpace, fit_kmeans, max_duration, segment

FORMAT_MARKER = "chsmm-model"
FORMAT_VERSION = 1

_SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class Variant:
    """Which model refinements are active."""

    state_specific: bool = False
    weight_a: int | None = None
    baseline: bool = False  # True drops epoch covariates: plain HSMM

    @property
    def weighted(self) -> bool:
        return self.weight_a is not None


@dataclass(frozen=True)
class EmissionModel:
    """Gaussian emission: power ~ N(gamma[x] + intercept[x] + phi[x]·w, sigma[x]^2).

    ``gamma`` stays exactly the K-means centroids; the least-squares
    intercept absorbs the covariate mean so per-state residuals center
    at zero.
    """

    gamma: np.ndarray
    intercept: np.ndarray
    phi: np.ndarray  # (n_states, n_features)
    sigma: np.ndarray
    features: tuple[str, ...] = ()

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64)
        intercept = np.asarray(self.intercept, dtype=np.float64)
        phi = np.atleast_2d(np.asarray(self.phi, dtype=np.float64))
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if np.any(sigma <= 0):
            raise InputError("emission sigma must be positive for every state")
        if not (gamma.shape == intercept.shape == sigma.shape):
            raise InputError("gamma, intercept, sigma must have one entry per state")
        if phi.shape != (gamma.size, len(self.features)):
            raise InputError("phi must be (n_states, n_features)")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "features", tuple(self.features))


@dataclass(frozen=True)
class InitialDistribution:
    """Smoothed occupancy frequencies over the (state, duration) grid."""

    probs: np.ndarray  # (n_states, d_max), sums to 1

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or np.any(p < 0):
            raise InputError("initial probs must be a non-negative 2-D matrix")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise InputError("initial probs must sum to 1")
        object.__setattr__(self, "probs", p)

    def sample(self, rng: np.random.Generator) -> tuple[int, int]:
        flat = self.probs.ravel()
        i = int(rng.choice(flat.size, p=flat / flat.sum()))
        x, d_idx = divmod(i, self.probs.shape[1])
        return x, d_idx + 1


@dataclass(frozen=True)
class FeatureCodec:
    """Assembles MNLR design vectors from (state, duration, covariates).

    States are one-hot encoded by default (scalar 1-based labels behind a
    switch); the duration regressor and every encoded covariate column are
    z-scored with training statistics; zero-variance covariate columns are
    masked out.
    """

    n_states: int
    d_max: int
    dur_mean: float
    dur_std: float
    z_mean: np.ndarray
    z_std: np.ndarray
    z_mask: np.ndarray
    conditional: bool = True
    scalar_states: bool = False

    def __post_init__(self):
        object.__setattr__(self, "z_mean", np.asarray(self.z_mean, dtype=np.float64))
        object.__setattr__(self, "z_std", np.asarray(self.z_std, dtype=np.float64))
        object.__setattr__(self, "z_mask", np.asarray(self.z_mask, dtype=bool))

    @property
    def state_dim(self) -> int:
        return 1 if self.scalar_states else self.n_states

    @property
    def z_dim(self) -> int:
        return int(self.z_mask.sum()) if self.conditional else 0

    def state_block_rows(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if self.scalar_states:
            return (x + 1).astype(np.float64).reshape(-1, 1)
        block = np.zeros((x.size, self.n_states))
        block[np.arange(x.size), x] = 1.0
        return block

    def dur_block_rows(self, d: np.ndarray) -> np.ndarray:
        d = np.clip(np.asarray(d, dtype=np.float64), 1, self.d_max)
        return ((d - self.dur_mean) / self.dur_std).reshape(-1, 1)

    def z_block_rows(self, encoded: np.ndarray) -> np.ndarray:
        if not self.conditional:
            return np.zeros((encoded.shape[0], 0))
        standardized = (encoded - self.z_mean) / self.z_std
        return standardized[:, self.z_mask]


@dataclass(frozen=True)
class TrainingConfig:
    """Everything train() needs beyond the series itself."""

    n_states: int
    seed: int = 0
    debounce: int = 0
    d_cap: int = 720
    exog_spec: ExogSpec = field(default_factory=ExogSpec)
    emission_features: tuple[str, ...] = ()
    state_specific: bool = False
    weight_a: int | None = None
    baseline: bool = False
    l2: float = 1e-4
    tol: float = 1e-6
    max_iter: int = 10000
    include_censored: bool = False
    scalar_state_features: bool = False
    shared_sigma: bool = False


@dataclass(frozen=True)
class ChsmModel:
    """Fully fitted conditional hidden semi-Markov load model."""

    states: StateSpace
    d_max: int
    variant: Variant
    state_mnlr: mnlr.MnlrModel | tuple
    dur_mnlr: mnlr.MnlrModel | tuple
    emission: EmissionModel
    initial: InitialDistribution
    exog_spec: ExogSpec
    codec: FeatureCodec
    state_duration_max: np.ndarray  # raw per-state training maxima (anomaly rule)
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self,
            "state_duration_max",
            np.asarray(self.state_duration_max, dtype=np.int64),
        )
        ns = self.states.n_states
        smodels = self.state_mnlr if isinstance(self.state_mnlr, tuple) else (self.state_mnlr,)
        for m in smodels:
            if m.n_classes != ns:
                raise InputError("state MNLR class count must equal n_states")
        dmodels = self.dur_mnlr if isinstance(self.dur_mnlr, tuple) else (self.dur_mnlr,)
        for m in dmodels:
            if m.n_classes != self.d_max:
                raise InputError("duration MNLR class count must equal d_max")

    @property
    def n_states(self) -> int:
        return self.states.n_states


# ---------------------------------------------------------------------------
# feature assembly


def _encode_z_point(model_or_spec, codec: FeatureCodec, z: dict | None) -> np.ndarray:
    if not codec.conditional:
        return np.zeros(0)
    spec: ExogSpec = model_or_spec
    enc = spec.encode_point(z or {}).reshape(1, -1)
    return codec.z_block_rows(enc)[0]


def transition_features(model: "ChsmModel", x_prev: int, d_prev: int, z: dict | None) -> np.ndarray:
    c = model.codec
    parts = []
    if not model.variant.state_specific:
        parts.append(c.state_block_rows(np.array([x_prev]))[0])
    parts.append(c.dur_block_rows(np.array([d_prev]))[0])
    parts.append(_encode_z_point(model.exog_spec, c, z))
    return np.concatenate(parts)


def duration_features(
    model: "ChsmModel", x_prev: int, d_prev: int, x_next: int, z: dict | None
) -> np.ndarray:
    c = model.codec
    parts = [c.state_block_rows(np.array([x_prev]))[0], c.dur_block_rows(np.array([d_prev]))[0]]
    if not model.variant.state_specific:
        parts.append(c.state_block_rows(np.array([x_next]))[0])
    parts.append(_encode_z_point(model.exog_spec, c, z))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# inference


def _check_state(model: ChsmModel, x: int, what: str = "state") -> int:
    x = int(x)
    if not 0 <= x < model.n_states:
        raise InputError(f"{what} index {x} out of range for {model.n_states} states")
    return x


def transition_proba(model: ChsmModel, x_prev: int, d_prev: int, z: dict | None = None) -> np.ndarray:
    """Next-state probabilities; the origin state gets 0 and the rest renormalize."""
    x_prev = _check_state(model, x_prev, "x_prev")
    if model.n_states == 1:
        return np.array([1.0])
    feats = transition_features(model, x_prev, int(d_prev), z)
    m = model.state_mnlr[x_prev] if model.variant.state_specific else model.state_mnlr
    p = mnlr.predict_proba(m, feats)
    p = p.copy()
    p[x_prev] = 0.0
    total = p.sum()
    if total <= 0.0:
        p = np.ones(model.n_states)
        p[x_prev] = 0.0
        total = p.sum()
    return p / total


def duration_proba(
    model: ChsmModel, x_prev: int, d_prev: int, x_next: int, z: dict | None = None
) -> np.ndarray:
    """Probabilities over durations 1..d_max for the next epoch."""
    x_prev = _check_state(model, x_prev, "x_prev")
    x_next = _check_state(model, x_next, "x_next")
    feats = duration_features(model, x_prev, int(d_prev), x_next, z)
    m = model.dur_mnlr[x_next] if model.variant.state_specific else model.dur_mnlr
    return mnlr.predict_proba(m, feats)


def generalized_transition_proba(
    model: ChsmModel, x_prev: int, d_prev: int, x_next: int, d_next: int, z: dict | None = None
) -> float:
    """P[next generalized state] = P[next state] * P[next duration | next state]."""
    d_next = int(d_next)
    if not 1 <= d_next <= model.d_max:
        raise InputError(f"d_next {d_next} out of range 1..{model.d_max}")
    ps = transition_proba(model, x_prev, d_prev, z)[_check_state(model, x_next, "x_next")]
    pd = duration_proba(model, x_prev, d_prev, x_next, z)[d_next - 1]
    return float(ps * pd)


def emission_mean(model: ChsmModel, x: int, w: dict | np.ndarray | None = None) -> float:
    """Expected power in state x given per-step covariates."""
    x = _check_state(model, x)
    em = model.emission
    base = float(em.gamma[x] + em.intercept[x])
    if not em.features:
        return base
    if w is None:
        raise InputError(f"emission covariates {em.features} required")
    if isinstance(w, dict):
        vec = np.array([w[name] for name in em.features], dtype=np.float64)
    else:
        vec = np.asarray(w, dtype=np.float64).ravel()
        if vec.size != len(em.features):
            raise InputError(f"expected {len(em.features)} emission covariates, got {vec.size}")
    return base + float(em.phi[x] @ vec)


# ---------------------------------------------------------------------------
# training


def _epoch_z_design(series: PowerSeries, epochs: EpochSequence, spec: ExogSpec) -> np.ndarray:
    if not spec.features:
        return np.zeros((epochs.n_epochs, 0))
    cols = {}
    for f in spec.features:
        cols[f.name] = series.feature_column(f.name)[epochs.starts]
    return spec.encode_rows(cols)


def _fit_or_uniform(X, y, w, n_classes, cfg: TrainingConfig) -> mnlr.MnlrModel:
    if X.shape[0] == 0:
        return mnlr.MnlrModel(np.zeros((n_classes, X.shape[1] + 1)), cfg.l2)
    return mnlr.fit_arrays(
        X, y, w, n_classes=n_classes, l2=cfg.l2, tol=cfg.tol, max_iter=cfg.max_iter
    )


def train(series: PowerSeries, config: TrainingConfig) -> ChsmModel:
    """Fit the full model: states, transition/duration MNLRs, emission, initial.

    Raises :class:`InsufficientDataError` when the trace yields fewer than
    two epochs. Covariate columns with zero variance over the training
    epochs are dropped with a warning.
    """
    states = fit_kmeans(series, config.n_states, config.seed)
    epochs = segment(series, states, config.debounce)
    if epochs.n_epochs < 2:
        raise InsufficientDataError(
            f"only {epochs.n_epochs} epoch(s); need at least 2 to fit transitions"
        )
    d_max = max_duration(epochs, config.d_cap)

    xs = epochs.states
    ds = epochs.durations
    K = epochs.n_epochs
    # outcome epochs k = 1..K-1; the final epoch's duration is censored by the
    # window edge and excluded from duration samples unless configured in
    keep_dur = np.ones(K - 1, dtype=bool)
    if not config.include_censored and K >= 2:
        keep_dur[-1] = False

    spec = config.exog_spec
    z_enc = _epoch_z_design(series, epochs, spec)  # (K, enc_dim)
    enc_dim = z_enc.shape[1]

    conditional = (not config.baseline) and enc_dim > 0
    if conditional:
        z_rows = z_enc[1:]
        z_mean = z_rows.mean(axis=0)
        z_std = z_rows.std(axis=0)
        z_mask = z_std > 1e-12
        dropped = np.flatnonzero(~z_mask)
        if dropped.size:
            names = spec.column_names()
            for i in dropped:
                warnings.warn(
                    f"dropping zero-variance exogenous column {names[i]!r}", stacklevel=2
                )
        z_std = np.where(z_mask, z_std, 1.0)
    else:
        z_mean = np.zeros(enc_dim)
        z_std = np.ones(enc_dim)
        z_mask = np.zeros(enc_dim, dtype=bool)

    d_prev = np.clip(ds[:-1], 1, d_max).astype(np.float64)
    dur_mean = float(d_prev.mean())
    dur_std = float(d_prev.std())
    if dur_std < 1e-9:
        dur_std = 1.0

    codec = FeatureCodec(
        n_states=states.n_states,
        d_max=d_max,
        dur_mean=dur_mean,
        dur_std=dur_std,
        z_mean=z_mean,
        z_std=z_std,
        z_mask=z_mask,
        conditional=conditional,
        scalar_states=config.scalar_state_features,
    )

    prev_block = codec.state_block_rows(xs[:-1])
    next_block = codec.state_block_rows(xs[1:])
    dur_block = codec.dur_block_rows(ds[:-1])
    z_block = codec.z_block_rows(z_enc[1:])

    y_state = xs[1:]
    y_dur = np.clip(ds[1:], 1, d_max) - 1

    if config.weight_a is not None:
        weights = mnlr.duration_weights(ds[1:], config.weight_a)
    else:
        weights = np.ones(K - 1)

    variant = Variant(config.state_specific, config.weight_a, config.baseline)

    if not config.state_specific:
        X_t = np.hstack([prev_block, dur_block, z_block])
        state_mnlr = _fit_or_uniform(X_t, y_state, weights, states.n_states, config)
        X_d = np.hstack([prev_block, dur_block, next_block, z_block])
        dur_mnlr = _fit_or_uniform(
            X_d[keep_dur], y_dur[keep_dur], weights[keep_dur], d_max, config
        )
    else:
        X_t = np.hstack([dur_block, z_block])
        per_origin = []
        for s in range(states.n_states):
            rows = xs[:-1] == s
            per_origin.append(
                _fit_or_uniform(X_t[rows], y_state[rows], weights[rows], states.n_states, config)
            )
        state_mnlr = tuple(per_origin)
        X_d = np.hstack([prev_block, dur_block, z_block])
        per_dest = []
        for s in range(states.n_states):
            rows = (xs[1:] == s) & keep_dur
            per_dest.append(
                _fit_or_uniform(X_d[rows], y_dur[rows], weights[rows], d_max, config)
            )
        dur_mnlr = tuple(per_dest)

    emission = _fit_emission(series, epochs, states, config)
    initial = _fit_initial(epochs, states.n_states, d_max)

    state_duration_max = np.zeros(states.n_states, dtype=np.int64)
    for s in range(states.n_states):
        mask = xs == s
        if mask.any():
            state_duration_max[s] = int(ds[mask].max())

    ts = series.timestamps()
    meta = {
        "appliance_id": series.appliance_id,
        "period": [str(ts[0]), str(ts[-1])],
        "seed": config.seed,
        "step_s": series.step_s,
        "debounce": config.debounce,
        "d_cap": config.d_cap,
        "n_epochs": int(K),
    }

    return ChsmModel(
        states=states,
        d_max=d_max,
        variant=variant,
        state_mnlr=state_mnlr,
        dur_mnlr=dur_mnlr,
        emission=emission,
        initial=initial,
        exog_spec=spec,
        codec=codec,
        state_duration_max=state_duration_max,
        training_meta=meta,
    )


def _fit_emission(
    series: PowerSeries, epochs: EpochSequence, states: StateSpace, config: TrainingConfig
) -> EmissionModel:
    labels = epochs.expand()
    power = series.power
    n_states = states.n_states
    features = () if config.baseline else tuple(config.emission_features)
    n_w = len(features)
    gamma = states.centroids.copy()
    intercept = np.zeros(n_states)
    phi = np.zeros((n_states, n_w))
    sigma = np.full(n_states, _SIGMA_FLOOR)

    W = (
        np.column_stack([series.feature_column(name) for name in features])
        if n_w
        else np.zeros((len(series), 0))
    )

    residual_all = np.zeros_like(power)
    for s in range(n_states):
        mask = labels == s
        if not mask.any():
            continue
        resid = power[mask] - gamma[s]
        if n_w and mask.sum() > n_w + 1:
            A = np.hstack([W[mask], np.ones((int(mask.sum()), 1))])
            coef, *_ = np.linalg.lstsq(A, resid, rcond=None)
            phi[s] = coef[:-1]
            intercept[s] = coef[-1]
            resid = resid - A @ coef
        sigma[s] = max(float(resid.std()), _SIGMA_FLOOR)
        residual_all[mask] = resid
    if config.shared_sigma:
        sigma = np.full(n_states, max(float(residual_all.std()), _SIGMA_FLOOR))
    return EmissionModel(gamma, intercept, phi, sigma, features)


def _fit_initial(epochs: EpochSequence, n_states: int, d_max: int) -> InitialDistribution:
    counts = np.ones((n_states, d_max))  # add-one smoothing: full support
    d_idx = np.clip(epochs.durations, 1, d_max) - 1
    np.add.at(counts, (epochs.states, d_idx), 1.0)
    return InitialDistribution(counts / counts.sum())


# ---------------------------------------------------------------------------
# persistence


def _mnlr_to_dict(m: mnlr.MnlrModel) -> dict:
    return {"coeffs": m.coeffs.tolist(), "l2": m.l2, "class_labels": list(m.class_labels)}


def _mnlr_from_dict(d: dict) -> mnlr.MnlrModel:
    return mnlr.MnlrModel(np.array(d["coeffs"], dtype=np.float64), d["l2"], tuple(d["class_labels"]))


def _mnlr_field_to_dict(m) -> dict:
    if isinstance(m, tuple):
        return {"per_state": [_mnlr_to_dict(x) for x in m]}
    return {"pooled": _mnlr_to_dict(m)}


def _mnlr_field_from_dict(d: dict):
    if "per_state" in d:
        return tuple(_mnlr_from_dict(x) for x in d["per_state"])
    return _mnlr_from_dict(d["pooled"])


def model_to_dict(model: ChsmModel) -> dict:
    return {
        "format": FORMAT_MARKER,
        "format_version": FORMAT_VERSION,
        "states": {"centroids": model.states.centroids.tolist()},
        "d_max": model.d_max,
        "variant": {
            "state_specific": model.variant.state_specific,
            "weight_a": model.variant.weight_a,
            "baseline": model.variant.baseline,
        },
        "state_mnlr": _mnlr_field_to_dict(model.state_mnlr),
        "dur_mnlr": _mnlr_field_to_dict(model.dur_mnlr),
        "emission": {
            "gamma": model.emission.gamma.tolist(),
            "intercept": model.emission.intercept.tolist(),
            "phi": model.emission.phi.tolist(),
            "sigma": model.emission.sigma.tolist(),
            "features": list(model.emission.features),
        },
        "initial": {"probs": model.initial.probs.tolist()},
        "exog_spec": model.exog_spec.to_dict(),
        "codec": {
            "n_states": model.codec.n_states,
            "d_max": model.codec.d_max,
            "dur_mean": model.codec.dur_mean,
            "dur_std": model.codec.dur_std,
            "z_mean": model.codec.z_mean.tolist(),
            "z_std": model.codec.z_std.tolist(),
            "z_mask": [bool(b) for b in model.codec.z_mask],
            "conditional": model.codec.conditional,
            "scalar_states": model.codec.scalar_states,
        },
        "state_duration_max": model.state_duration_max.tolist(),
        "training_meta": model.training_meta,
    }


def model_from_dict(d: dict) -> ChsmModel:
    try:
        if d.get("format") != FORMAT_MARKER:
            raise ModelLoadError("not a chsmm model file")
        if d.get("format_version") != FORMAT_VERSION:
            raise ModelVersionError(
                f"model format version {d.get('format_version')!r} is not supported "
                f"(this build reads version {FORMAT_VERSION})"
            )
        em = d["emission"]
        codec = d["codec"]
        return ChsmModel(
            states=StateSpace(np.array(d["states"]["centroids"], dtype=np.float64)),
            d_max=int(d["d_max"]),
            variant=Variant(
                d["variant"]["state_specific"],
                d["variant"]["weight_a"],
                d["variant"]["baseline"],
            ),
            state_mnlr=_mnlr_field_from_dict(d["state_mnlr"]),
            dur_mnlr=_mnlr_field_from_dict(d["dur_mnlr"]),
            emission=EmissionModel(
                np.array(em["gamma"], dtype=np.float64),
                np.array(em["intercept"], dtype=np.float64),
                np.array(em["phi"], dtype=np.float64).reshape(len(em["gamma"]), len(em["features"])),
                np.array(em["sigma"], dtype=np.float64),
                tuple(em["features"]),
            ),
            initial=InitialDistribution(np.array(d["initial"]["probs"], dtype=np.float64)),
            exog_spec=ExogSpec.from_dict(d["exog_spec"]),
            codec=FeatureCodec(
                n_states=int(codec["n_states"]),
                d_max=int(codec["d_max"]),
                dur_mean=float(codec["dur_mean"]),
                dur_std=float(codec["dur_std"]),
                z_mean=np.array(codec["z_mean"], dtype=np.float64),
                z_std=np.array(codec["z_std"], dtype=np.float64),
                z_mask=np.array(codec["z_mask"], dtype=bool),
                conditional=bool(codec["conditional"]),
                scalar_states=bool(codec["scalar_states"]),
            ),
            state_duration_max=np.array(d["state_duration_max"], dtype=np.int64),
            training_meta=dict(d.get("training_meta", {})),
        )
    except (ModelLoadError, ModelVersionError):
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelLoadError(f"corrupt model file: {exc}") from exc


def save(model: ChsmModel, path) -> None:
    """Write the model as canonical JSON (atomic temp-and-rename)."""
    payload = json.dumps(model_to_dict(model), sort_keys=True, allow_nan=False)
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path) -> ChsmModel:
    """Load a model saved by :func:`save`; numeric fields round-trip exactly."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError, OSError) as exc:
        raise ModelLoadError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ModelLoadError(f"cannot read model file {path}: not a JSON object")
    return model_from_dict(d)


def strip_conditioning(model: ChsmModel) -> ChsmModel:
    """Zero every covariate coefficient column (diagnostic helper).

    The result makes the same predictions as an unconditioned baseline
    with otherwise identical coefficients, whatever z is supplied.
    """

    def zero_z(m: mnlr.MnlrModel, lead_dims: int) -> mnlr.MnlrModel:
        coeffs = m.coeffs.copy()
        z_dim = model.codec.z_dim
        if z_dim:
            coeffs[:, lead_dims : lead_dims + z_dim] = 0.0
        return mnlr.MnlrModel(coeffs, m.l2, m.class_labels)

    sd = model.codec.state_dim
    t_lead = (0 if model.variant.state_specific else sd) + 1
    d_lead = sd + 1 + (0 if model.variant.state_specific else sd)
    if model.variant.state_specific:
        new_state = tuple(zero_z(m, t_lead) for m in model.state_mnlr)
        new_dur = tuple(zero_z(m, d_lead) for m in model.dur_mnlr)
    else:
        new_state = zero_z(model.state_mnlr, t_lead)
        new_dur = zero_z(model.dur_mnlr, d_lead)
    return replace(model, state_mnlr=new_state, dur_mnlr=new_dur)
