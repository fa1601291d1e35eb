"""Conditional hidden semi-Markov load models for residential appliances.

Train per-appliance models from sub-metered power traces, forecast
short-term load trajectories for single appliances or aggregations, and
flag anomalous consumption from prediction error and out-of-range state
durations.
"""

from .errors import (
    AlignmentError,
    ChsmmError,
    EmptyInputError,
    InfeasibleKError,
    InputError,
    InsufficientDataError,
    ModelLoadError,
    ModelVersionError,
    ParseError,
    UndefinedNormalizerError,
)
from .evaluate import (
    AnomalyFlag,
    EvaluationReport,
    detect_anomalies,
    nrmse,
    nrmse_stepwise,
    sweep,
)
from .forecasting import (
    ForecastContext,
    ForecastResult,
    context_at,
    forecast,
    forecast_exog_from_history,
    predict_remaining_duration,
)
from .ingest import (
    ColumnSchema,
    ExogFeature,
    ExogSpec,
    GapPolicy,
    PowerSeries,
    join_exog,
    load_csv,
    load_csv_segments,
)
from .mnlr import MnlrModel, WeightedSample, duration_weights, log_likelihood, predict_proba
from .model import (
    ChsmModel,
    EmissionModel,
    InitialDistribution,
    TrainingConfig,
    Variant,
    duration_proba,
    emission_mean,
    generalized_transition_proba,
    load,
    save,
    train,
    transition_proba,
)
from .simulate import SimConfig, SyntheticWeather, build_table_model, make_fixture, sample_trace
from .states import (
    EpochSequence,
    StateSpace,
    fit_kmeans,
    max_duration,
    segment,
    suggest_n_states,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "AnomalyFlag",
    "ChsmModel",
    "ChsmmError",
    "ColumnSchema",
    "EmissionModel",
    "EmptyInputError",
    "EpochSequence",
    "EvaluationReport",
    "ExogFeature",
    "ExogSpec",
    "ForecastContext",
    "ForecastResult",
    "GapPolicy",
    "InfeasibleKError",
    "InitialDistribution",
    "InputError",
    "InsufficientDataError",
    "MnlrModel",
    "ModelLoadError",
    "ModelVersionError",
    "ParseError",
    "PowerSeries",
    "SimConfig",
    "StateSpace",
    "SyntheticWeather",
    "TrainingConfig",
    "UndefinedNormalizerError",
    "Variant",
    "WeightedSample",
    "build_table_model",
    "context_at",
    "detect_anomalies",
    "duration_proba",
    "duration_weights",
    "emission_mean",
    "fit_kmeans",
    "forecast",
    "forecast_exog_from_history",
    "generalized_transition_proba",
    "join_exog",
    "load",
    "load_csv",
    "load_csv_segments",
    "log_likelihood",
    "make_fixture",
    "max_duration",
    "nrmse",
    "nrmse_stepwise",
    "predict_proba",
    "predict_remaining_duration",
    "sample_trace",
    "save",
    "segment",
    "suggest_n_states",
    "sweep",
    "train",
    "transition_proba",
]
