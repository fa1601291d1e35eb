"""Command-line entry point: abstract, train, predict, simulate, evaluate, detect-anomalies.

Every run writes a ``<output>.run.json`` next to its outputs recording the
resolved configuration and seed. All file outputs are written atomically
(temp file + rename). Exit codes: 0 success, 2 usage, 3 data error,
4 model-file error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChsmmError, InputError, ModelLoadError
from .evaluate import detect_anomalies, segment_fleet, sweep
from .forecasting import context_at, forecast, forecast_exog_from_history
from .ingest import ColumnSchema, ExogFeature, ExogSpec, GapPolicy, load_csv, join_exog
from .model import TrainingConfig, load as load_model, save as save_model, train
from .simulate import make_fixture
from .states import fit_kmeans, segment, suggest_n_states

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODEL = 4

HOUR_FEATURE = ExogFeature("hour_frac", source="derived-hour-of-day", encoding="sin-cos-pair")
TEMP_FEATURE = ExogFeature("temp_c")

PROFILES = {
    # air conditioners: temperature + time of day, temperature-linear ON
    # power, duration-weighted state-specific regressions
    "ac": dict(
        exog=(TEMP_FEATURE, HOUR_FEATURE),
        emission=("temp_c",),
        state_specific=True,
        weight_a=10,
        d_cap=720,
    ),
    # same conditioning without the refinements
    "ac-basic": dict(
        exog=(TEMP_FEATURE, HOUR_FEATURE),
        emission=("temp_c",),
        state_specific=False,
        weight_a=None,
        d_cap=720,
    ),
    "fridge": dict(exog=(HOUR_FEATURE,), emission=(), state_specific=False, weight_a=None, d_cap=720),
    "pump": dict(exog=(HOUR_FEATURE,), emission=(), state_specific=False, weight_a=None, d_cap=1080),
    "ev": dict(exog=(HOUR_FEATURE,), emission=(), state_specific=False, weight_a=None, d_cap=1500),
    "none": dict(exog=(), emission=(), state_specific=False, weight_a=None, d_cap=720),
}


def _write_text_atomic(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv_atomic(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _write_text_atomic(path, "\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _record_run(args: argparse.Namespace, out_path) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func" and not k.startswith("_")}
    payload = {"tool": "chsmm", "version": __version__, "config": _jsonable(resolved)}
    _write_text_atomic(str(out_path) + ".run.json", json.dumps(payload, indent=2, sort_keys=True))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _schema_from_args(args) -> ColumnSchema:
    return ColumnSchema(timestamp=args.timestamp_column, power=args.power_column)


def _load_series(args):
    series = load_csv(
        args.input,
        _schema_from_args(args),
        step_s=args.step,
        gap=GapPolicy(max_gap=args.max_gap),
        on_split="longest" if args.keep_longest else "error",
    )
    return series


def _exog_spec_from_profile(args) -> tuple[ExogSpec, tuple[str, ...]]:
    p = PROFILES[args.profile]
    return ExogSpec(tuple(p["exog"])), tuple(p["emission"])


def _join_if_needed(series, spec: ExogSpec, emission: tuple[str, ...], args):
    column_names = {f.name for f in spec.features if f.source == "column"}
    column_names |= set(emission)
    missing = [n for n in sorted(column_names) if n not in series.exog]
    if missing:
        exog_path = args.exog or args.input
        feats = tuple(
            f for f in spec.features if f.source == "column" and f.name in missing
        )
        extra = tuple(ExogFeature(n) for n in missing if n not in {f.name for f in feats})
        series = join_exog(series, exog_path, ExogSpec(feats + extra), max_gap_s=args.exog_max_gap)
    return series


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    series = make_fixture(args.kind, seed=args.seed, T=args.steps, anomaly=args.anomaly)
    ts = series.timestamps()
    rows = (
        (ts[i].isoformat(), float(series.power[i]), float(series.exog["temp_c"][i]))
        for i in range(len(series))
    )
    _write_csv_atomic(args.out, ["timestamp", "power_w", "temp_c"], rows)
    _record_run(args, args.out)
    print(f"wrote {len(series)} steps to {args.out}")
    return 0


def _cmd_abstract(args) -> int:
    series = _load_series(args)
    prefix = args.out_prefix
    if args.states is None:
        k, curve = suggest_n_states(series, args.k_max, seed=args.seed)
        _write_csv_atomic(
            f"{prefix}_inertia.csv",
            ["k", "inertia"],
            ((i + 1, float(v)) for i, v in enumerate(curve)),
        )
        print(f"suggested n_states = {k} (inertia curve in {prefix}_inertia.csv)")
        n_states = k
    else:
        n_states = args.states
    states = fit_kmeans(series, n_states, seed=args.seed)
    epochs = segment(series, states, debounce=args.debounce)
    _write_csv_atomic(
        f"{prefix}_states.csv",
        ["state", "centroid_w", "steps", "share"],
        (
            (
                s,
                float(states.centroids[s]),
                int((epochs.expand() == s).sum()),
                float((epochs.expand() == s).mean()),
            )
            for s in range(states.n_states)
        ),
    )
    rows = []
    for s in range(states.n_states):
        durs = epochs.durations[epochs.states == s]
        values, counts = np.unique(durs, return_counts=True)
        rows.extend((s, int(v), int(c)) for v, c in zip(values, counts))
    _write_csv_atomic(f"{prefix}_durations.csv", ["state", "duration", "count"], rows)
    if args.svg:
        _histogram_svg(series, states, epochs, f"{prefix}.svg")
    _record_run(args, prefix)
    print(f"wrote {prefix}_states.csv and {prefix}_durations.csv ({states.n_states} states)")
    return 0


def _histogram_svg(series, states, epochs, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1 + states.n_states, 1, figsize=(7, 2.2 * (1 + states.n_states)))
    axes[0].hist(series.power, bins=100, log=True)
    for c in states.centroids:
        axes[0].axvline(c, color="red", lw=0.8)
    axes[0].set_xlabel("power (W)")
    for s in range(states.n_states):
        durs = epochs.durations[epochs.states == s]
        axes[1 + s].hist(durs, bins=50)
        axes[1 + s].set_xlabel(f"duration in state {s} (steps)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _cmd_train(args) -> int:
    series = _load_series(args)
    spec, emission = _exog_spec_from_profile(args)
    series = _join_if_needed(series, spec, emission, args)
    profile = PROFILES[args.profile]
    state_specific = profile["state_specific"] if args.state_specific is None else args.state_specific
    weight_a = profile["weight_a"] if args.weighted is None else (args.weighted or None)
    config = TrainingConfig(
        n_states=args.states,
        seed=args.seed,
        debounce=args.debounce,
        d_cap=args.d_cap if args.d_cap is not None else profile["d_cap"],
        exog_spec=spec,
        emission_features=emission,
        state_specific=state_specific,
        weight_a=weight_a,
        baseline=args.baseline,
        l2=args.l2,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    model = train(series, config)
    save_model(model, args.out)
    _record_run(args, args.out)
    print(
        f"trained {series.appliance_id}: {model.n_states} states, d_max={model.d_max}, "
        f"{model.training_meta['n_epochs']} epochs -> {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    series = _load_series(args)
    spec = model.exog_spec
    series = _join_if_needed(series, spec, model.emission.features, args)
    t = _resolve_origin(series, args.origin)
    H = args.horizon
    needed = tuple(
        sorted({f.name for f in spec.features} | set(model.emission.features))
    )
    if args.exog_policy == "actual":
        if t + H >= len(series):
            raise InputError(f"series too short for actual covariates at origin {t} horizon {H}")
        exg = {n: series.feature_column(n)[t + 1 : t + 1 + H] for n in needed}
        z_hat, w_hat = exg, dict(exg)
    else:
        z_hat, w_hat = forecast_exog_from_history(
            series, t, H, policy=args.exog_policy, forecast_path=args.exog_forecast, features=needed
        )
    epochs = segment(series, model.states, int(model.training_meta.get("debounce", 0)))
    ctx = context_at(model, epochs, t, z_hat, w_hat)
    result = forecast(model, ctx, H)
    ts = series.timestamps()
    step = series.step_s
    base = ts[t]
    rows = (
        ((base + np.timedelta64(int((i + 1) * step), "s")).isoformat(), float(result.power_hat[i]))
        for i in range(H)
    )
    _write_csv_atomic(args.out, ["timestamp", "power_w_hat"], rows)
    if args.chain_json:
        payload = {
            "origin_index": t,
            "chain": [{"state": s, "duration": d} for s, d in result.chain],
            "truncated_last": result.truncated_last,
        }
        _write_text_atomic(args.chain_json, json.dumps(payload, indent=2))
    _record_run(args, args.out)
    print(f"wrote {H}-step forecast from t={t} to {args.out}")
    return 0


def _resolve_origin(series, origin: str) -> int:
    try:
        t = int(origin)
        if t < 0:
            t += len(series)
        if not 0 <= t < len(series):
            raise InputError(f"origin {origin} outside the series (length {len(series)})")
        return t
    except ValueError:
        pass
    import pandas as pd

    ts = pd.Timestamp(origin)
    if ts.tzinfo is None:
        ts = ts.tz_localize("UTC")
    delta = (ts - series.timestamps()[0]).total_seconds()
    idx = delta / series.step_s
    if idx != int(idx) or not 0 <= idx < len(series):
        raise InputError(f"origin {origin!r} does not land on a series step")
    return int(idx)


def _load_fleet(args):
    model_paths = sorted(Path(args.models).glob("*.model"))
    if not model_paths:
        raise InputError(f"no *.model files under {args.models}")
    models, series = {}, {}
    for mp in model_paths:
        aid = mp.stem
        data_path = Path(args.data) / f"{aid}.csv"
        if not data_path.exists():
            raise InputError(f"no test data for model {aid!r} (expected {data_path})")
        m = load_model(mp)
        s = load_csv(
            data_path,
            ColumnSchema(timestamp=args.timestamp_column, power=args.power_column),
            step_s=args.step,
            gap=GapPolicy(max_gap=args.max_gap),
            on_split="longest" if args.keep_longest else "error",
        )
        spec = m.exog_spec
        column_names = {f.name for f in spec.features if f.source == "column"}
        column_names |= set(m.emission.features)
        missing = [n for n in sorted(column_names) if n not in s.exog]
        if missing:
            s = join_exog(
                s,
                args.exog or data_path,
                ExogSpec(tuple(ExogFeature(n) for n in missing)),
                max_gap_s=args.exog_max_gap,
            )
        models[aid] = m
        series[aid] = s
    return models, series


def _report_rows(report):
    for s in report.per_appliance:
        yield ("appliance", s.appliance_id, 1, s.horizon, s.nrmse, s.nrmse_stepwise)
    for g in report.aggregates:
        yield ("aggregate", g.group_id, g.n, g.horizon, g.nrmse, g.nrmse_stepwise)


def _cmd_evaluate(args) -> int:
    models, series = _load_fleet(args)
    report = sweep(
        models,
        series,
        horizons=args.horizons,
        group_sizes=args.group_sizes,
        origin_stride=args.stride,
        exog_policy=args.exog_policy,
        jobs=args.jobs,
    )
    prefix = args.out_prefix
    _write_csv_atomic(
        f"{prefix}_nrmse.csv",
        ["kind", "id", "n", "horizon", "nrmse", "nrmse_stepwise"],
        _report_rows(report),
    )
    payload = {
        "per_appliance": [vars(s) for s in report.per_appliance],
        "aggregates": [vars(g) for g in report.aggregates],
        "anomalies": [vars(a) for a in report.anomalies],
    }
    _write_text_atomic(f"{prefix}_report.json", json.dumps(payload, indent=2, sort_keys=True))
    if args.svg:
        _nrmse_svg(report, f"{prefix}.svg")
    _record_run(args, prefix)
    print(f"evaluated {len(models)} appliances -> {prefix}_nrmse.csv, {prefix}_report.json")
    return 0


def _nrmse_svg(report, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    sizes = sorted({g.n for g in report.aggregates})
    for n in sizes:
        pts = sorted((g.horizon, g.nrmse) for g in report.aggregates if g.n == n)
        axes[0].plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"N={n}")
    axes[0].set_xlabel("horizon (steps)")
    axes[0].set_ylabel("NRMSE")
    axes[0].legend()
    horizons = sorted({g.horizon for g in report.aggregates})
    for h in horizons:
        pts = sorted((g.n, g.nrmse) for g in report.aggregates if g.horizon == h)
        axes[1].plot([p[0] for p in pts], [p[1] for p in pts], marker="s", label=f"H={h}")
    axes[1].set_xlabel("aggregation size")
    axes[1].set_ylabel("NRMSE")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _cmd_detect_anomalies(args) -> int:
    models, series = _load_fleet(args)
    report = sweep(
        models,
        series,
        horizons=args.horizons,
        group_sizes=(1,),
        origin_stride=args.stride,
        exog_policy=args.exog_policy,
        jobs=args.jobs,
    )
    epochs = segment_fleet(models, series)
    flags = detect_anomalies(report, models, epochs, k_mad=args.k_mad)
    report.anomalies = flags
    _write_csv_atomic(
        args.out,
        ["appliance_id", "score", "reason"],
        ((f.appliance_id, f.score, f.reason) for f in flags),
    )
    _record_run(args, args.out)
    print(f"{len(flags)} anomaly flag(s) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_io_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--timestamp-column", default="timestamp")
    p.add_argument("--power-column", default="power_w")
    p.add_argument("--step", type=float, default=60.0, help="series step in seconds")
    p.add_argument("--max-gap", type=int, default=5, help="longest hold-fillable gap (steps)")
    p.add_argument("--keep-longest", action="store_true", help="on long gaps keep the longest segment")
    p.add_argument("--exog", default=None, help="covariate CSV (defaults to the input file)")
    p.add_argument("--exog-max-gap", type=float, default=7200.0, help="covariate gap limit (seconds)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chsmm", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON (or TOML) file of flag defaults")
    parser.add_argument("--version", action="version", version=f"chsmm {__version__}")
    subparsers: list[argparse.ArgumentParser] = []
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a synthetic appliance trace as ingest CSV")
    p.add_argument("--kind", required=True, choices=["fridge4", "ac2", "pump2", "ev2"])
    p.add_argument("--steps", type=int, default=20160)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--anomaly", action="store_true", help="ev2 only: insert a 16-day charging lapse")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)
    subparsers.append(p)

    p = sub.add_parser("abstract", help="state histogram and per-state duration histograms")
    p.add_argument("--input", required=True)
    p.add_argument("--states", type=int, default=None, help="state count (omit to use the elbow)")
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--debounce", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--svg", action="store_true")
    _add_io_args(p)
    p.set_defaults(func=_cmd_abstract)
    subparsers.append(p)

    p = sub.add_parser("train", help="fit a model from a power CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--profile", default="none", choices=sorted(PROFILES))
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--debounce", type=int, default=0)
    p.add_argument("--d-cap", type=int, default=None, help="duration cap (profile default)")
    p.add_argument("--baseline", action="store_true", help="drop covariates (plain HSMM)")
    p.add_argument("--state-specific", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--weighted", type=int, default=None, metavar="A",
                   help="duration weighting factor a (0 disables)")
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--out", required=True)
    _add_io_args(p)
    p.set_defaults(func=_cmd_train)
    subparsers.append(p)

    p = sub.add_parser("predict", help="short-term forecast from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--origin", default="-61",
                   help="step index or ISO timestamp (negative counts from the end)")
    p.add_argument("--horizon", type=int, default=60)
    p.add_argument("--exog-policy", default="persistence",
                   choices=["persistence", "from-file", "actual"])
    p.add_argument("--exog-forecast", default=None, help="covariate forecast CSV for from-file")
    p.add_argument("--chain-json", default=None)
    p.add_argument("--out", required=True)
    _add_io_args(p)
    p.set_defaults(func=_cmd_predict)
    subparsers.append(p)

    p = sub.add_parser("evaluate", help="rolling-origin NRMSE over a fleet")
    p.add_argument("--models", required=True, help="directory of *.model files")
    p.add_argument("--data", required=True, help="directory of matching <id>.csv test traces")
    p.add_argument("--horizons", type=int, nargs="+", default=[60])
    p.add_argument("--group-sizes", type=int, nargs="+", default=[1])
    p.add_argument("--stride", type=int, default=30)
    p.add_argument("--exog-policy", default="actual", choices=["actual", "persistence"])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--svg", action="store_true")
    _add_io_args(p)
    p.set_defaults(func=_cmd_evaluate)
    subparsers.append(p)

    p = sub.add_parser("detect-anomalies", help="flag outlier prediction error and novel durations")
    p.add_argument("--models", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--horizons", type=int, nargs="+", default=[60])
    p.add_argument("--stride", type=int, default=30)
    p.add_argument("--exog-policy", default="actual", choices=["actual", "persistence"])
    p.add_argument("--k-mad", type=float, default=3.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_io_args(p)
    p.set_defaults(func=_cmd_detect_anomalies)
    subparsers.append(p)

    parser._chsmm_subparsers = subparsers
    return parser


def _load_config_defaults(argv: list[str], parser: argparse.ArgumentParser) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    text = Path(path).read_text()
    if path.endswith(".toml"):
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        cfg = tomllib.loads(text)
    else:
        cfg = json.loads(text)
    if not isinstance(cfg, dict):
        raise InputError(f"config {path} must be a table of flag defaults")
    defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
    parser.set_defaults(**defaults)
    for sp in getattr(parser, "_chsmm_subparsers", []):
        sp.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _load_config_defaults(argv, parser)
        args = parser.parse_args(argv)
        return args.func(args)
    except ModelLoadError as exc:  # includes version errors
        print(f"chsmm: error: model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ChsmmError, FileNotFoundError) as exc:
        print(f"chsmm: error: data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
