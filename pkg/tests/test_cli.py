"""End-to-end command-line pipeline and exit-code contract."""

import json

import pytest

from chsmm.cli import main


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def ac_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ac.csv"
    assert run("simulate", "--kind", "ac2", "--steps", "9000", "--seed", "3",
               "--out", str(path)) == 0
    return path


class TestSimulate:
    def test_same_seed_identical_files(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert run("simulate", "--kind", "fridge4", "--steps", "2000", "--seed", "7",
                   "--out", str(a)) == 0
        assert run("simulate", "--kind", "fridge4", "--steps", "2000", "--seed", "7",
                   "--out", str(b)) == 0
        assert a.read_text() == b.read_text()

    def test_output_is_ingestible_schema(self, ac_csv):
        header = ac_csv.read_text().splitlines()[0]
        assert header == "timestamp,power_w,temp_c"

    def test_run_config_recorded(self, tmp_path):
        out = tmp_path / "sim.csv"
        run("simulate", "--kind", "pump2", "--steps", "1500", "--seed", "1", "--out", str(out))
        meta = json.loads((tmp_path / "sim.csv.run.json").read_text())
        assert meta["config"]["seed"] == 1
        assert meta["config"]["kind"] == "pump2"


class TestTrainPredict:
    def test_pipeline_train_then_sixty_row_forecast(self, ac_csv, tmp_path):
        model = tmp_path / "m.model"
        assert run("train", "--input", str(ac_csv), "--profile", "ac", "--states", "2",
                   "--tol", "1e-2", "--max-iter", "300", "--out", str(model)) == 0
        out = tmp_path / "pred.csv"
        assert run("predict", "--model", str(model), "--input", str(ac_csv),
                   "--horizon", "60", "--out", str(out),
                   "--chain-json", str(tmp_path / "chain.json")) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "timestamp,power_w_hat"
        assert len(lines) == 61
        chain = json.loads((tmp_path / "chain.json").read_text())
        assert sum(e["duration"] for e in chain["chain"]) >= 60

    def test_predict_with_actual_covariates(self, ac_csv, tmp_path):
        model = tmp_path / "m.model"
        run("train", "--input", str(ac_csv), "--profile", "ac-basic", "--states", "2",
            "--tol", "1e-2", "--max-iter", "300", "--out", str(model))
        out = tmp_path / "pred.csv"
        assert run("predict", "--model", str(model), "--input", str(ac_csv),
                   "--origin", "5000", "--exog-policy", "actual",
                   "--out", str(out)) == 0


class TestAbstract:
    def test_emits_state_and_duration_histograms(self, ac_csv, tmp_path):
        prefix = str(tmp_path / "abs")
        assert run("abstract", "--input", str(ac_csv), "--states", "2",
                   "--out-prefix", prefix) == 0
        states = (tmp_path / "abs_states.csv").read_text().splitlines()
        assert states[0] == "state,centroid_w,steps,share"
        assert len(states) == 3
        durs = (tmp_path / "abs_durations.csv").read_text().splitlines()
        assert durs[0] == "state,duration,count"

    def test_elbow_suggestion_mode(self, ac_csv, tmp_path):
        prefix = str(tmp_path / "elbow")
        assert run("abstract", "--input", str(ac_csv), "--out-prefix", prefix) == 0
        assert (tmp_path / "elbow_inertia.csv").exists()


@pytest.fixture(scope="module")
def fleet_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("fleet")
    models = root / "models"
    data = root / "data"
    models.mkdir()
    data.mkdir()
    for i in range(4):
        csv = data / f"ac_{i}.csv"
        run("simulate", "--kind", "ac2", "--steps", "7000", "--seed", str(50 + i),
            "--out", str(csv))
        run("train", "--input", str(csv), "--profile", "ac-basic", "--states", "2",
            "--tol", "1e-2", "--max-iter", "200", "--out", str(models / f"ac_{i}.model"))
    return models, data


class TestFleetCommands:
    def test_evaluate_writes_report(self, fleet_dirs, tmp_path):
        models, data = fleet_dirs
        prefix = str(tmp_path / "eval")
        assert run("evaluate", "--models", str(models), "--data", str(data),
                   "--horizons", "15", "30", "--group-sizes", "1", "2",
                   "--stride", "60", "--out-prefix", prefix) == 0
        rows = (tmp_path / "eval_nrmse.csv").read_text().splitlines()
        assert rows[0] == "kind,id,n,horizon,nrmse,nrmse_stepwise"
        report = json.loads((tmp_path / "eval_report.json").read_text())
        assert len(report["per_appliance"]) == 4 * 2

    def test_detect_anomalies_runs_clean(self, fleet_dirs, tmp_path):
        models, data = fleet_dirs
        out = tmp_path / "anomalies.csv"
        assert run("detect-anomalies", "--models", str(models), "--data", str(data),
                   "--horizons", "15", "--stride", "60", "--out", str(out)) == 0
        assert out.read_text().splitlines()[0] == "appliance_id,score,reason"


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run("simulate", "--bogus-flag", "1", "--out", "x.csv")
        assert exc.value.code == 2

    def test_missing_input_is_data_error(self, tmp_path):
        assert run("abstract", "--input", str(tmp_path / "nope.csv"), "--states", "2",
                   "--out-prefix", str(tmp_path / "x")) == 3

    def test_nan_power_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp,power_w\n2023-06-01T00:00:00Z,NaN\n")
        assert run("abstract", "--input", str(bad), "--states", "1",
                   "--out-prefix", str(tmp_path / "x")) == 3

    def test_corrupt_model_is_model_error(self, ac_csv, tmp_path):
        bad = tmp_path / "bad.model"
        bad.write_text("{\"format\": \"chsmm-model\", \"format_version\": 99}")
        assert run("predict", "--model", str(bad), "--input", str(ac_csv),
                   "--out", str(tmp_path / "p.csv")) == 4

    def test_config_file_supplies_defaults(self, ac_csv, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9, "steps": 1200}))
        out = tmp_path / "sim.csv"
        assert run("--config", str(cfg), "simulate", "--kind", "pump2",
                   "--out", str(out)) == 0
        assert len(out.read_text().splitlines()) == 1201
