"""Shared builders for the test suite."""

from datetime import datetime, timezone

import numpy as np
import pytest

from chsmm.ingest import PowerSeries
from chsmm.model import InitialDistribution
from chsmm.simulate import build_table_model, peaked_pmf, truncated_geometric_pmf

START = datetime(2023, 6, 1, tzinfo=timezone.utc)


def series_from_power(power, exog=None, step_s=60.0, appliance_id="test"):
    return PowerSeries(appliance_id, START, np.asarray(power, dtype=float), exog or {}, step_s)


def delta_pmf(d, d_max):
    p = np.zeros(d_max)
    p[d - 1] = 1.0
    return p


def deterministic_two_state_model(d_off=5, d_on=3, d_max=8, centroids=(10.0, 200.0)):
    """OFF (state 0) always lasts d_off steps, ON (state 1) d_on; strict alternation."""
    trans = np.array([[0.0, 1.0], [1.0, 0.0]])
    dur = np.zeros((2, 2, d_max))
    dur[:, 0] = delta_pmf(d_off, d_max)
    dur[:, 1] = delta_pmf(d_on, d_max)
    init = np.zeros((2, d_max))
    init[0, d_off - 1] = 1.0
    return build_table_model(
        centroids, d_max, trans, dur, sigma=[1.0, 4.0], initial=InitialDistribution(init)
    )


def random_table_model(rng, n_states=None, d_max=None, temp_in_z=False):
    """A random but well-formed model for probability-contract fuzzing."""
    n = int(n_states or rng.integers(2, 4))
    d_max_ = int(d_max or rng.integers(2, 5))
    centroids = np.sort(rng.uniform(5, 3000, n))
    while np.any(np.diff(centroids) < 1.0):
        centroids = np.sort(rng.uniform(5, 3000, n))
    trans = rng.uniform(0.05, 1.0, (n, n))
    np.fill_diagonal(trans, 0.0)
    trans /= trans.sum(axis=1, keepdims=True)
    dur = rng.uniform(0.02, 1.0, (n, n, d_max_))
    dur /= dur.sum(axis=2, keepdims=True)
    kwargs = {}
    if temp_in_z:
        kwargs = dict(
            temp_in_z=True,
            trans_temp_slopes=rng.normal(0, 0.5, (n, n)),
            dur_temp_slopes=rng.normal(0, 0.5, n),
        )
    return build_table_model(
        centroids,
        d_max_,
        trans,
        dur,
        sigma=rng.uniform(0.5, 20.0, n),
        trans_dur_slopes=rng.normal(0, 0.3, (n, n)),
        **kwargs,
    )


def recovery_three_state_model():
    """3-state ground truth representable by a pooled conditional fit.

    Transition temperature slopes are shared across origins and the
    duration law factors into origin and destination effects with a
    shared temperature tilt, so a pooled MNLR can match it exactly.
    """
    d_max = 8
    centroids = [40.0, 800.0, 2000.0]
    trans = np.array(
        [
            [0.0, 0.65, 0.35],
            [0.55, 0.0, 0.45],
            [0.70, 0.30, 0.0],
        ]
    )
    dest_base = np.stack(
        [
            truncated_geometric_pmf(5.0, d_max),
            peaked_pmf(4, 1.5, d_max),
            peaked_pmf(6, 2.0, d_max),
        ]
    )
    origin_tilt = np.stack(
        [
            np.ones(d_max),
            np.linspace(1.0, 1.8, d_max),
            np.linspace(1.6, 0.7, d_max),
        ]
    )
    dur = np.zeros((3, 3, d_max))
    for i in range(3):
        for j in range(3):
            pmf = dest_base[j] * origin_tilt[i]
            dur[i, j] = pmf / pmf.sum()
    slope = 0.45
    return build_table_model(
        centroids,
        d_max,
        trans,
        dur,
        sigma=[4.0, 25.0, 50.0],
        phi=[[0.0], [0.0], [8.0]],
        emission_intercept=[0.0, 0.0, -8.0 * 28.0],
        emission_features=("temp_c",),
        temp_in_z=True,
        trans_temp_slopes=np.tile(np.array([-0.5, 0.2, 0.6]), (3, 1)),
        dur_temp_slopes=[slope, slope, slope],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
