"""Diagonal Mahalanobis metric learned from yes/no triplet constraints."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import DatasetView
from .oracle import Answer, Triplet, validate_triplet


@dataclass(frozen=True)
class MetricWeights:
    """Nonnegative per-feature weights of d^2(x, y) = sum_f w_f (x_f - y_f)^2."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("weights must be a non-empty 1-D vector")
        if not np.isfinite(w).all():
            raise ValueError("non-finite weight")
        if (w < 0).any():
            raise ValueError("negative weight")
        if not (w > 0).any():
            raise ValueError("all weights zero")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return len(self.w)

    @classmethod
    def identity(cls, dim: int) -> "MetricWeights":
        return cls(np.ones(dim))

    def to_list(self) -> list[float]:
        return [float(v) for v in self.w]


@dataclass(frozen=True)
class LearnerParams:
    """Hyperparameters of the soft-margin constrained fit.

    slack_tradeoff is the weight C on the hinge penalties, margin the
    required gap d^2(i,k) - d^2(i,j). max_iters caps the dual coordinate
    updates; step_rule "dual_descent" names the two-phase solve (exact
    greedy dual coordinate ascent, then a monotone backtracking projected
    descent polish whose base step diminishes as eta_0 / sqrt(t)).
    """

    slack_tradeoff: float = 1.0
    margin: float = 1.0
    max_iters: int = 2000
    step_rule: str = "dual_descent"
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.slack_tradeoff <= 0 or self.margin <= 0 or self.tolerance <= 0:
            raise ValueError("slack_tradeoff, margin, and tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_rule != "dual_descent":
            raise ValueError(f"unknown step_rule {self.step_rule!r}")


def distance_sq(w: MetricWeights, a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.shape != (w.dim,):
        raise ValueError(f"dimension mismatch: {a.shape}, {b.shape}, weights {w.dim}")
    diff = a - b
    return float(np.dot(w.w, diff * diff))


def pairwise_distance_sq(w: MetricWeights, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All weighted squared distances between the rows of a and rows of b."""
    scale = np.sqrt(w.w)
    sa = np.asarray(a, dtype=np.float64) * scale
    sb = np.asarray(b, dtype=np.float64) * scale
    out = cdist(sa, sb, metric="sqeuclidean")
    return np.maximum(out, 0.0)


def predict_answer(w: MetricWeights, train: DatasetView, t: Triplet) -> Answer:
    """yes iff i is strictly closer to j than to k under w; ties answer no."""
    validate_triplet(t, len(train))
    x = train.features
    d_ij = distance_sq(w, x[t.i], x[t.j])
    d_ik = distance_sq(w, x[t.i], x[t.k])
    return Answer.YES if d_ij < d_ik else Answer.NO


def _constraint_rows(
    train: DatasetView, constraints: Iterable[tuple[Triplet, Answer]]
) -> np.ndarray:
    """One row per effective yes-constraint: g_f = (x_i - x_k)_f^2 - (x_i - x_j)_f^2.

    A "no" answer to (i, j, k) means i is closer to k, i.e. the mirrored
    yes-constraint (i, k, j). The feasible region is w . g >= margin.
    Rows are sorted so the solver is invariant to constraint order.
    """
    n = len(train)
    effective: list[Triplet] = []
    for t, answer in constraints:
        validate_triplet(t, n)
        if answer is Answer.YES:
            effective.append(t)
        elif answer is Answer.NO:
            effective.append(Triplet(t.i, t.k, t.j))
        else:
            raise ValueError(f"dk answer passed to metric learner for {t}")
    effective.sort()
    if not effective:
        return np.empty((0, train.dim))
    x = train.features
    idx = np.array(effective, dtype=np.intp)
    dij = x[idx[:, 0]] - x[idx[:, 1]]
    dik = x[idx[:, 0]] - x[idx[:, 2]]
    return dik * dik - dij * dij


def _objective(w: np.ndarray, g: np.ndarray, c: float, margin: float) -> float:
    prior = 0.5 * float(np.sum((w - 1.0) ** 2))
    if len(g) == 0:
        return prior
    slack = np.maximum(0.0, margin - g @ w)
    return prior + c * float(slack.sum())


def _exact_coordinate_root(u, gr, c, margin):
    """alpha in [0, C] where g_r . max(0, u + alpha g_r) crosses `margin`.

    The inner product is a non-decreasing piecewise-linear function of
    alpha, so the walk over its breakpoints finds the exact dual-optimal
    coordinate value (clipped to the box).
    """
    nz = gr != 0.0
    if not nz.any():
        return 0.0
    bps = -u[nz] / gr[nz]
    bps = np.unique(bps[(bps > 0.0) & (bps < c)])
    edges = np.concatenate([[0.0], bps, [c]])
    for si in range(len(edges) - 1):
        lo, hi = edges[si], edges[si + 1]
        active = (u + 0.5 * (lo + hi) * gr) > 0.0
        slope = float((gr[active] ** 2).sum())
        value_at_zero = float((gr[active] * u[active]).sum())
        if slope > 0.0:
            root = (margin - value_at_zero) / slope
            if root <= lo:
                return lo
            if root < hi:
                return root
        elif margin - value_at_zero <= 0.0:
            return lo
    return c


def _dual_ascent(g, c, margin, max_updates, tol):
    """Greedy (largest-KKT-violation) exact dual coordinate ascent.

    Maintains v = 1 + sum_r alpha_r g_r with the primal read off as
    w = max(0, v), which is stationarity-exact for the current alpha by
    construction. Stops when every box-feasible dual gradient component is
    within tol of zero, or after max_updates coordinate updates.
    """
    num_rows, d = g.shape
    alpha = np.zeros(num_rows)
    v = np.ones(d)
    w = np.maximum(v, 0.0)
    for it in range(1, max_updates + 1):
        grad = margin - g @ w
        grad[(alpha <= 0.0) & (grad < 0.0)] = 0.0
        grad[(alpha >= c) & (grad > 0.0)] = 0.0
        r = int(np.argmax(np.abs(grad)))
        if abs(grad[r]) <= tol:
            break
        gr = g[r]
        u = v - alpha[r] * gr
        a_new = _exact_coordinate_root(u, gr, c, margin)
        v = v + (a_new - alpha[r]) * gr
        alpha[r] = a_new
        if it % (4 * num_rows) == 0:
            v = 1.0 + g.T @ alpha  # periodic refresh against float drift
        w = np.maximum(v, 0.0)
    return np.maximum(1.0 + g.T @ alpha, 0.0)


def _descent_polish(w, g, c, margin, max_iters, tol):
    """Monotone projected subgradient descent from w.

    Backtracking from a diminishing base step guarantees the objective is
    non-increasing at every accepted iteration; the loop stops at a point
    where no descent step exists at float precision (subgradient
    stationarity) or when the reduced gradient falls under tol.
    """
    base = 1.0 / (1.0 + c * len(g))
    scale = 1.0 + c * len(g)
    f_w = _objective(w, g, c, margin)
    for t in range(1, max_iters + 1):
        violated = (margin - g @ w) > 0.0
        grad = (w - 1.0) - c * g[violated].sum(axis=0)
        reduced = grad.copy()
        reduced[(w <= 0.0) & (reduced > 0.0)] = 0.0
        if np.max(np.abs(reduced)) <= tol * scale:
            break
        step = base / np.sqrt(t)
        accepted = False
        for _ in range(60):
            w_new = np.maximum(w - step * grad, 0.0)
            f_new = _objective(w_new, g, c, margin)
            if f_new < f_w:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # no descent direction at float precision
        assert f_new < f_w  # invariant: objective strictly decreases
        w, f_w = w_new, f_new
    return w


def learn_metric(
    train: DatasetView,
    constraints: Iterable[tuple[Triplet, Answer]],
    params: LearnerParams = LearnerParams(),
    warm_start: Optional[MetricWeights] = None,
) -> MetricWeights:
    """Fit w >= 0 minimizing 0.5 ||w - 1||^2 + C sum_r max(0, margin - w.g_r).

    The all-ones vector is the unweighted-Euclidean prior. Solved by exact
    greedy dual coordinate ascent (max_iters update cap) followed by a
    monotone projected-descent polish; both phases are deterministic and
    cost O(|constraints| * d) per update. The optimum is unique, so the
    warm start only matters for the empty-constraint passthrough.
    """
    d = train.dim
    if warm_start is not None and warm_start.dim != d:
        raise ValueError(f"warm start has dim {warm_start.dim}, data has {d}")

    g = _constraint_rows(train, constraints)
    if len(g) == 0:
        return warm_start if warm_start is not None else MetricWeights.identity(d)

    c = params.slack_tradeoff
    margin = params.margin
    w = _dual_ascent(g, c, margin, params.max_iters, params.tolerance)
    w = _descent_polish(w, g, c, margin, params.max_iters, params.tolerance)

    if not (w > 0).any():
        w = np.ones(d)  # degenerate fully-violated system; fall back to the prior
    return MetricWeights(w)
