"""Weighted multinomial logistic regression by maximum likelihood.

One estimator serves both the state-transition and duration-transition
distributions: a softmax over per-class linear scores, fitted by
full-batch gradient ascent on the weighted log-likelihood with an L2
penalty and a backtracking (Armijo) line search. Class 0 is the pinned
reference class: its coefficient row stays at zero for identifiability.

The fit is deterministic — zero initialization, no randomness — so
identical inputs give bitwise-identical coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

_ARMIJO_C = 1e-4
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class WeightedSample:
    """One training example: feature vector, class label, positive weight."""

    features: np.ndarray
    label: int
    weight: float = 1.0


@dataclass(frozen=True)
class MnlrModel:
    """Fitted multinomial logistic regression.

    ``coeffs`` is (n_classes, n_features + 1); the last column is the
    intercept. Row 0 is identically zero (reference class).
    """

    coeffs: np.ndarray
    l2: float = 0.0
    class_labels: tuple = field(default=())

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 2 or coeffs.shape[0] < 1 or coeffs.shape[1] < 1:
            raise InputError("coeffs must be a 2-D (n_classes, n_features+1) matrix")
        labels = self.class_labels or tuple(range(coeffs.shape[0]))
        if len(labels) != coeffs.shape[0]:
            raise InputError("class_labels must match the coefficient rows")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "class_labels", tuple(labels))

    @property
    def n_classes(self) -> int:
        return int(self.coeffs.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.coeffs.shape[1] - 1)

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return predict_proba(self, features)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to 1 within 1e-9."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return shifted - lse


def predict_proba(model: MnlrModel, features: np.ndarray) -> np.ndarray:
    """Class probability vector for one feature vector."""
    x = np.asarray(features, dtype=np.float64).ravel()
    if x.size != model.n_features:
        raise InputError(f"expected {model.n_features} features, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InputError("features must be finite")
    scores = model.coeffs[:, :-1] @ x + model.coeffs[:, -1]
    return _softmax_rows(scores[None, :])[0]


def predict_proba_rows(model: MnlrModel, X: np.ndarray) -> np.ndarray:
    """Row-wise probabilities for an (n, n_features) design matrix."""
    X = np.asarray(X, dtype=np.float64)
    scores = X @ model.coeffs[:, :-1].T + model.coeffs[:, -1]
    return _softmax_rows(scores)


def _stack(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.array([np.asarray(s.features, dtype=np.float64).ravel() for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    w = np.array([s.weight for s in samples], dtype=np.float64)
    return X, y, w


def objective_and_grad(W, X, y, w=None, l2: float = 0.0):
    """Penalized weighted log-likelihood and its analytic gradient at W.

    ``X`` excludes the intercept column; ``W`` includes it (last column).
    The reference-class row of the gradient is zeroed, matching the fit's
    pinning. Exposed for gradient verification against finite differences.
    """
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    w = np.ones(X.shape[0]) if w is None else np.asarray(w, dtype=np.float64)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    idx = np.arange(X.shape[0])
    ws = _Workspace(Xa.shape[0], W.shape[0], Xa.shape[1])
    obj, _, grad = _eval(W, Xa, y, w, l2, idx, ws, want_grad=True)
    return obj, grad.copy()


class _Workspace:
    """Preallocated buffers for the optimizer; fresh large temporaries per
    iteration cost more in page faults than the arithmetic itself."""

    def __init__(self, n: int, C: int, p1: int):
        self.S = np.empty((n, C))
        self.rowmax = np.empty((n, 1))
        self.sumE = np.empty(n)
        self.grad = np.empty((C, p1))
        self.cand = np.empty((C, p1))
        self.pen = np.empty((C, p1))


def _eval(W, Xa, y, w, l2, idx, ws: _Workspace, want_grad: bool):
    """Objective (and optionally gradient) at W, using workspace buffers."""
    S = ws.S
    np.matmul(Xa, W.T, out=S)
    np.max(S, axis=1, keepdims=True, out=ws.rowmax)
    np.subtract(S, ws.rowmax, out=S)
    # floor keeps exp() and the downstream scaling out of denormal range
    # (orders of magnitude slower); probability error is < 1e-26
    np.maximum(S, -60.0, out=S)
    lab = S[idx, y]
    np.exp(S, out=S)
    S.sum(axis=1, out=ws.sumE)
    raw = float(np.dot(w, lab - np.log(ws.sumE)))
    obj = raw - 0.5 * l2 * float(np.sum(W * W))
    if not want_grad:
        return obj, raw, None
    np.divide(w, ws.sumE, out=ws.sumE)
    np.negative(ws.sumE, out=ws.sumE)
    S *= ws.sumE[:, None]
    S[idx, y] += w
    np.matmul(S.T, Xa, out=ws.grad)
    if l2:
        np.multiply(W, l2, out=ws.pen)
        ws.grad -= ws.pen
    ws.grad[0, :] = 0.0  # reference class pinned
    return obj, raw, ws.grad


def _optimize(Xa, y, w, n_classes, l2, tol, max_iter, trace=None):
    """Gradient ascent with a backtracking (Armijo) line search.

    The last accepted step length is tried first and doubled after a
    clean acceptance. Stops when the gradient infinity-norm drops below
    ``tol``, after ``max_iter`` accepted steps, or when no step improves
    the objective.
    """
    W = np.zeros((n_classes, Xa.shape[1]))
    if n_classes == 1:
        return W
    idx = np.arange(Xa.shape[0])
    ws = _Workspace(Xa.shape[0], n_classes, Xa.shape[1])
    cand = ws.cand
    step = 1.0
    obj, raw, grad = _eval(W, Xa, y, w, l2, idx, ws, want_grad=True)
    grad = grad.copy()  # line-search evals reuse the workspace
    if trace is not None:
        trace.append(raw)
    for _ in range(max_iter):
        if float(np.max(np.abs(grad))) < tol:
            break
        gsq = float(np.sum(grad * grad))
        backtracks = 0
        accepted = False
        while backtracks < _MAX_BACKTRACKS:
            np.multiply(grad, step, out=cand)
            cand += W
            cand_obj, _, _ = _eval(cand, Xa, y, w, l2, idx, ws, want_grad=False)
            if cand_obj >= obj + _ARMIJO_C * step * gsq:
                accepted = True
                break
            step *= 0.5
            backtracks += 1
        if not accepted:
            break  # no improvement at machine scale
        W, cand = cand, W
        ws.cand = cand
        if backtracks == 0:
            step = min(step * 2.0, 1e6)
        obj, raw, g = _eval(W, Xa, y, w, l2, idx, ws, want_grad=True)
        np.copyto(grad, g)
        if trace is not None:
            trace.append(raw)
    return W


def fit_arrays(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray | None = None,
    n_classes: int | None = None,
    l2: float = 1e-4,
    tol: float = 1e-6,
    max_iter: int = 10000,
    trace: list | None = None,
) -> MnlrModel:
    """Fit from a design matrix, label vector, and optional weight vector."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InputError("X must be a non-empty (n, p) matrix")
    if not np.all(np.isfinite(X)):
        raise InputError("features must be finite")
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if y.shape != (n,):
        raise InputError("labels must be a length-n vector")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if n_classes < 1:
        raise InputError("n_classes must be >= 1")
    if np.any(y < 0) or np.any(y >= n_classes):
        bad = int(y[(y < 0) | (y >= n_classes)][0])
        raise InputError(f"label {bad} out of range for {n_classes} classes")
    if w is None:
        w = np.ones(n)
    else:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (n,):
            raise InputError("weights must be a length-n vector")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be positive and finite")
    if l2 < 0:
        raise InputError("l2 must be >= 0")

    Xa = np.hstack([X, np.ones((n, 1))])
    W = _optimize(Xa, y, w, n_classes, l2, tol, max_iter, trace)
    return MnlrModel(W, l2)


def fit(
    samples,
    n_classes: int | None = None,
    l2: float = 1e-4,
    tol: float = 1e-6,
    max_iter: int = 10000,
    trace: list | None = None,
) -> MnlrModel:
    """Fit a weighted MNLR from :class:`WeightedSample` records.

    ``trace``, when given a list, receives the (unpenalized) weighted
    log-likelihood after every accepted step.
    """
    samples = list(samples)
    if not samples:
        raise InputError("at least one sample is required")
    X, y, w = _stack(samples)
    return fit_arrays(X, y, w, n_classes=n_classes, l2=l2, tol=tol, max_iter=max_iter, trace=trace)


def log_likelihood(model: MnlrModel, samples) -> float:
    """Weighted log-likelihood of samples under the model."""
    samples = list(samples)
    if not samples:
        return 0.0
    X, y, w = _stack(samples)
    if X.shape[1] != model.n_features:
        raise InputError(f"samples have {X.shape[1]} features, model expects {model.n_features}")
    scores = np.hstack([X, np.ones((X.shape[0], 1))]) @ model.coeffs.T
    logp = _log_softmax_rows(scores)
    return float(np.dot(w, logp[np.arange(X.shape[0]), y]))


def duration_weights(durations, a: int) -> np.ndarray:
    """Per-epoch weights 1 + d/a up-weighting long-duration outcomes.

    ``durations`` may be an epoch sequence or any array of step counts;
    ``a`` is the integer tail-emphasis factor (smaller = stronger).
    """
    if a is None or int(a) < 1:
        raise InputError("weighting factor a must be a positive integer")
    d = np.asarray(getattr(durations, "durations", durations), dtype=np.float64)
    return 1.0 + d / float(a)
