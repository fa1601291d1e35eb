"""Discrete operating states from power data.

K-means on the 1-D power trajectory identifies operating levels; the
trajectory is then run-length encoded into epochs (maximal constant-state
runs) carrying their duration and the exogenous values at epoch start.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleKError, InputError
from .ingest import PowerSeries


@dataclass(frozen=True)
class StateSpace:
    """Operating-state power levels, sorted ascending. State i means centroids[i]."""

    centroids: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 1 or c.size < 1:
            raise InputError("centroids must be a non-empty 1-D array")
        if c.size > 1 and not np.all(np.diff(c) > 0):
            raise InputError("centroids must be strictly increasing")
        object.__setattr__(self, "centroids", c)

    @property
    def n_states(self) -> int:
        return int(self.centroids.size)

    def assign(self, power: np.ndarray) -> np.ndarray:
        """Nearest-centroid label per value; ties resolve to the lower index."""
        p = np.asarray(power, dtype=np.float64)
        return np.abs(p[:, None] - self.centroids[None, :]).argmin(axis=1)


@dataclass(frozen=True)
class EpochSequence:
    """Run-length-encoded generalized states over a series.

    Adjacent epochs always have different states; durations sum to the
    series length; the final epoch is right-censored by the window edge.
    ``assignment_rmse`` records how far the power values sit from their
    assigned centroids (diagnostic for out-of-vocabulary test levels).
    """

    states: np.ndarray
    durations: np.ndarray
    series: PowerSeries
    assignment_rmse: float = 0.0
    starts: np.ndarray = field(init=False)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64)
        durations = np.asarray(self.durations, dtype=np.int64)
        if states.shape != durations.shape or states.ndim != 1 or states.size == 0:
            raise InputError("states and durations must be matching non-empty 1-D arrays")
        if np.any(durations < 1):
            raise InputError("every epoch duration must be >= 1")
        if np.any(states[1:] == states[:-1]):
            raise InputError("adjacent epochs must have different states")
        if int(durations.sum()) != len(self.series):
            raise InputError("epoch durations must sum to the series length")
        starts = np.concatenate([[0], np.cumsum(durations)[:-1]])
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "starts", starts)

    @property
    def n_epochs(self) -> int:
        return int(self.states.size)

    @property
    def total_steps(self) -> int:
        return len(self.series)

    def expand(self) -> np.ndarray:
        """Per-step state labels (inverse of run-length encoding)."""
        return np.repeat(self.states, self.durations)

    def step_epoch_index(self) -> np.ndarray:
        """Epoch index k for every time step."""
        return np.repeat(np.arange(self.n_epochs), self.durations)

    def z_columns(self, names: list[str]) -> dict[str, np.ndarray]:
        """Epoch-start covariate values, one array of length n_epochs per name."""
        return {n: self.series.feature_column(n)[self.starts] for n in names}

    def z_at(self, k: int) -> dict[str, float]:
        cols = {}
        for name in self.series.exog:
            cols[name] = float(self.series.exog[name][self.starts[k]])
        return cols

    def epoch_power(self, k: int) -> np.ndarray:
        s = self.starts[k]
        return self.series.power[s : s + self.durations[k]]


def _kmeans_1d(values: np.ndarray, k: int, seed: int, max_iter: int = 300, tol: float = 1e-6):
    """Lloyd's algorithm on 1-D data with seeded farthest-point initialization.

    Returns (sorted centroids, inertia, objective history). Deterministic
    for a fixed seed: only the first centroid is drawn at random; each
    further centroid is the point farthest from the chosen set.
    """
    v = np.asarray(values, dtype=np.float64)
    distinct = np.unique(v)
    if k > distinct.size:
        raise InfeasibleKError(
            f"k={k} exceeds the {distinct.size} distinct power values"
        )
    rng = np.random.default_rng(seed)
    centers = [float(v[rng.integers(v.size)])]
    # farthest-point traversal over distinct values keeps init O(k * n)
    dist = np.abs(distinct - centers[0])
    for _ in range(1, k):
        nxt = float(distinct[int(np.argmax(dist))])
        centers.append(nxt)
        dist = np.minimum(dist, np.abs(distinct - nxt))
    c = np.array(centers)

    history = []
    for _ in range(max_iter):
        labels = np.abs(v[:, None] - c[None, :]).argmin(axis=1)
        obj = float(np.sum((v - c[labels]) ** 2))
        history.append(obj)
        new_c = c.copy()
        counts = np.bincount(labels, minlength=k)
        sums = np.bincount(labels, weights=v, minlength=k)
        nonempty = counts > 0
        new_c[nonempty] = sums[nonempty] / counts[nonempty]
        for j in np.flatnonzero(~nonempty):
            # re-seed an emptied cluster at the worst-fit point
            far = int(np.argmax(np.abs(v - new_c[labels])))
            new_c[j] = v[far]
        move = float(np.max(np.abs(new_c - c)))
        c = new_c
        if move < tol:
            break
    labels = np.abs(v[:, None] - c[None, :]).argmin(axis=1)
    inertia = float(np.sum((v - c[labels]) ** 2))
    history.append(inertia)
    order = np.argsort(c, kind="stable")
    return c[order], inertia, history


def fit_kmeans(series: PowerSeries, n_states: int, seed: int = 0) -> StateSpace:
    """Cluster the power trajectory into ``n_states`` operating levels."""
    if n_states < 1:
        raise InputError("n_states must be >= 1")
    centroids, _, _ = _kmeans_1d(series.power, n_states, seed)
    # identical means can collapse; perturbation-free dedup keeps strict order
    centroids = np.unique(centroids)
    if centroids.size != n_states:
        raise InfeasibleKError(f"k={n_states} collapsed to {centroids.size} distinct centroids")
    return StateSpace(centroids)


def suggest_n_states(series: PowerSeries, k_max: int, seed: int = 0):
    """Within-cluster sum of squares for k = 1..k_max plus an elbow suggestion.

    The elbow is the k with the largest second difference of the inertia
    curve. Advisory only: rare states flatten the curve early, so the
    suggestion tends to undercount and callers may override.
    """
    if k_max < 2:
        raise InputError("k_max must be >= 2")
    distinct = np.unique(series.power).size
    curve = []
    for k in range(1, min(k_max, distinct) + 1):
        _, inertia, _ = _kmeans_1d(series.power, k, seed)
        curve.append(inertia)
    if len(curve) == 1 or curve[0] <= 1e-12 * max(1, len(series)):
        return 1, curve
    if len(curve) == 2:
        return (2 if curve[1] <= 0.5 * curve[0] else 1), curve
    second = [curve[i - 1] - 2.0 * curve[i] + curve[i + 1] for i in range(1, len(curve) - 1)]
    k_elbow = int(np.argmax(second)) + 2
    return k_elbow, curve


def _runs(labels: np.ndarray):
    """(state, length) runs of a label sequence."""
    change = np.flatnonzero(np.diff(labels)) + 1
    bounds = np.concatenate([[0], change, [labels.size]])
    states = labels[bounds[:-1]]
    lengths = np.diff(bounds)
    return list(states), list(lengths)


def segment(series: PowerSeries, states: StateSpace, debounce: int = 0) -> EpochSequence:
    """Run-length encode nearest-centroid labels into an epoch sequence.

    Runs shorter than ``debounce`` steps are merged into the neighboring
    run whose centroid is nearer (ties go left); merging repeats until
    stable, then adjacent equal-state runs are coalesced.
    """
    if debounce < 0:
        raise InputError("debounce must be >= 0")
    labels = states.assign(series.power)
    assignment_rmse = float(
        np.sqrt(np.mean((series.power - states.centroids[labels]) ** 2))
    )
    run_states, run_lengths = _runs(labels)

    if debounce > 1:
        c = states.centroids
        changed = True
        while changed and len(run_states) > 1:
            changed = False
            for i, (s, ln) in enumerate(zip(run_states, run_lengths)):
                if ln >= debounce:
                    continue
                if i == 0:
                    target = 1
                elif i == len(run_states) - 1:
                    target = i - 1
                else:
                    d_left = abs(c[s] - c[run_states[i - 1]])
                    d_right = abs(c[s] - c[run_states[i + 1]])
                    target = i - 1 if d_left <= d_right else i + 1
                run_lengths[target] += ln
                del run_states[i], run_lengths[i]
                # coalesce any equal-state neighbors the deletion exposed
                j = 1
                while j < len(run_states):
                    if run_states[j] == run_states[j - 1]:
                        run_lengths[j - 1] += run_lengths[j]
                        del run_states[j], run_lengths[j]
                    else:
                        j += 1
                changed = True
                break

    return EpochSequence(
        np.asarray(run_states), np.asarray(run_lengths), series, assignment_rmse
    )


def max_duration(epochs: EpochSequence, d_cap: int = 720) -> int:
    """Longest observed epoch duration, capped at ``d_cap``.

    Durations beyond the cap are clamped to the cap class at prediction
    time, so the cap is also the size of the duration outcome space.
    """
    if d_cap < 1:
        raise InputError("d_cap must be >= 1")
    return int(min(int(epochs.durations.max()), d_cap))
