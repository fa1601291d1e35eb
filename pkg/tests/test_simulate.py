"""Generative sampler: determinism, convergence to the model law, fixtures."""

import numpy as np
import pytest

from chsmm.errors import InputError
from chsmm.ingest import PowerSeries
from chsmm.model import InitialDistribution, duration_proba, transition_proba
from chsmm.simulate import (
    SimConfig,
    build_table_model,
    fixture_model,
    make_fixture,
    sample_trace,
    sample_trace_detailed,
)
from chsmm.states import StateSpace, segment

from conftest import delta_pmf


def quick_three_state_model(sigma=1e-9):
    """Small unconditioned model with short durations for Monte Carlo runs."""
    d_max = 3
    trans = np.array(
        [
            [0.0, 0.7, 0.3],
            [0.45, 0.0, 0.55],
            [0.25, 0.75, 0.0],
        ]
    )
    dur = np.zeros((3, 3, d_max))
    dur[:, 0] = [0.5, 0.3, 0.2]
    dur[:, 1] = [0.2, 0.5, 0.3]
    dur[:, 2] = [0.6, 0.2, 0.2]
    dur[0, 2] = [0.1, 0.2, 0.7]  # origin-dependent tail for the TV check
    return build_table_model(
        [10.0, 500.0, 1200.0], d_max, trans, dur, sigma=[sigma] * 3
    )


class TestSampleTrace:
    def test_same_seed_is_bitwise_identical(self):
        cfg = SimConfig(model=fixture_model("ac2"), T=4000, seed=123)
        a = sample_trace(cfg)
        b = sample_trace(cfg)
        np.testing.assert_array_equal(a.power, b.power)
        np.testing.assert_array_equal(a.exog["temp_c"], b.exog["temp_c"])

    def test_single_state_model_constant_mean(self):
        d_max = 4
        init = np.zeros((1, d_max))
        init[0, 1] = 1.0
        model = build_table_model(
            [42.0], d_max,
            np.array([[1.0]]),
            np.full((1, 1, d_max), 1.0 / d_max),
            sigma=[1e-9],
            initial=InitialDistribution(init),
        )
        series = sample_trace(SimConfig(model=model, T=500, seed=2))
        np.testing.assert_allclose(series.power, 42.0, atol=1e-6)

    def test_resegmentation_reproduces_chain(self):
        model = quick_three_state_model(sigma=1e-9)
        trace = sample_trace_detailed(SimConfig(model=model, T=5000, seed=31))
        epochs = segment(trace.series, model.states, debounce=0)
        np.testing.assert_array_equal(epochs.states, trace.states)
        np.testing.assert_array_equal(epochs.durations[:-1], trace.durations[:-1])
        assert epochs.durations[-1] <= trace.durations[-1]
        assert trace.truncated_last == (epochs.durations[-1] < trace.durations[-1])

    def test_transition_frequencies_converge(self):
        # ~100k epochs; every conditional transition cell within +/-0.02
        model = quick_three_state_model()
        trace = sample_trace_detailed(SimConfig(model=model, T=230000, seed=7))
        xs = trace.states
        assert xs.size > 90000
        counts = np.zeros((3, 3))
        for a, b in zip(xs[:-1], xs[1:]):
            counts[a, b] += 1
        for origin in range(3):
            emp = counts[origin] / counts[origin].sum()
            ref = transition_proba(model, origin, 1)
            np.testing.assert_allclose(emp, ref, atol=0.02)

    def test_duration_distributions_converge_in_total_variation(self):
        model = quick_three_state_model()
        trace = sample_trace_detailed(SimConfig(model=model, T=120000, seed=11))
        xs, ds = trace.states[:-1], trace.durations[:-1]
        assert xs.size > 50000
        for origin in range(3):
            for dest in range(3):
                if origin == dest:
                    continue
                mask = (xs[:-1] == origin) & (xs[1:] == dest)
                emp = np.bincount(ds[1:][mask], minlength=model.d_max + 1)[1:]
                emp = emp / emp.sum()
                ref = duration_proba(model, origin, 1, dest)
                tv = 0.5 * np.sum(np.abs(emp - ref))
                assert tv < 0.05

    def test_final_epoch_truncated_at_horizon(self):
        model = quick_three_state_model()
        trace = sample_trace_detailed(SimConfig(model=model, T=100, seed=3))
        assert trace.durations.sum() >= 100
        assert len(trace.series) == 100


class TestMakeFixture:
    def test_unknown_kind(self):
        with pytest.raises(InputError):
            make_fixture("toaster9000", seed=0, T=100)

    def test_fridge_histogram_shows_four_modes(self):
        series = make_fixture("fridge4", seed=1, T=60 * 24 * 14)
        for mode in (5.0, 130.0, 300.0, 500.0):
            share = np.mean(np.abs(series.power - mode) < 40.0)
            assert share > 0.005, f"mode {mode} missing"

    def test_ac_on_power_tracks_temperature(self):
        series = make_fixture("ac2", seed=6, T=20000)
        on = series.power > 800
        corr = np.corrcoef(series.power[on], series.exog["temp_c"][on])[0, 1]
        assert corr > 0.9

    def test_ev_anomaly_contains_multiday_gap(self):
        T = 1440 * 32
        clean = make_fixture("ev2", seed=9, T=T)
        anomalous = make_fixture("ev2", seed=9, T=T, anomaly=True)
        states = StateSpace(np.array([2.0, 3300.0]))
        gap_clean = segment(clean, states).durations.max()
        gaps = segment(anomalous, states)
        gap_anom = gaps.durations[gaps.states == 0].max()
        assert gap_clean < 2 * 1440
        assert gap_anom > 15 * 1440

    def test_pump_daily_schedule(self):
        series = make_fixture("pump2", seed=4, T=1440 * 7)
        states = StateSpace(np.array([3.0, 1000.0]))
        epochs = segment(series, states)
        on_durs = epochs.durations[epochs.states == 1]
        assert np.all(on_durs == 420)

    def test_fixture_determinism(self):
        for kind in ("fridge4", "ac2", "pump2", "ev2"):
            a = make_fixture(kind, seed=5, T=3000)
            b = make_fixture(kind, seed=5, T=3000)
            np.testing.assert_array_equal(a.power, b.power)

    def test_fixture_is_valid_power_series(self):
        series = make_fixture("ac2", seed=0, T=2000)
        assert isinstance(series, PowerSeries)
        assert np.all(series.power >= 0)
        assert len(series.exog["temp_c"]) == len(series)
