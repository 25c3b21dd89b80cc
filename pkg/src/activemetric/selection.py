"""Information-gain query selection over a sampled triplet pool."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .clustering import kmeans
from .dataset import Dataset, DatasetView, Split
from .forest import ClassProbs, ForestParams, estimate_class_probs
from .metric import LearnerParams, MetricWeights, learn_metric
from .oracle import (
    Answer,
    AnswerTable,
    LabeledTripletSet,
    NO_CODE,
    Triplet,
    YES_CODE,
    simulated_answer,
    validate_triplet,
)

logger = logging.getLogger(__name__)

# Tags keeping every derived random stream distinct and replayable.
_TAG_POOL = 1
_TAG_BOOTSTRAP = 2
_TAG_CLUSTER = 3
_TAG_FOREST = 4
_TAG_ORACLE = 5


def derived_seed(*keys: int) -> int:
    """Deterministic child seed for a tuple of non-negative integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass(frozen=True)
class AnswerProbs:
    p_yes: float
    p_no: float
    p_dk: float

    def __post_init__(self):
        total = self.p_yes + self.p_no + self.p_dk
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"answer probabilities sum to {total}, not 1")
        for v in (self.p_yes, self.p_no, self.p_dk):
            if not (-1e-12 <= v <= 1.0 + 1e-12):
                raise ValueError(f"probability {v} outside [0, 1]")


@dataclass(frozen=True)
class SelectionParams:
    pool_factor: int = 100
    epsilon_report: float = 0.001
    budget: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.pool_factor < 1:
            raise ValueError("pool_factor must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not (0.0 < self.epsilon_report < 1.0):
            raise ValueError("epsilon_report must be in (0, 1)")


@dataclass(frozen=True)
class Pool:
    candidates: tuple[Triplet, ...]
    origin: str  # "sampled" | "exhaustive"


def answer_probs(cp: ClassProbs, t: Triplet) -> AnswerProbs:
    """Probability of each oracle answer under independent per-instance posteriors.

    p_yes = sum_c p_i(c) p_j(c) (1 - p_k(c)) and symmetrically for no;
    dk absorbs the rest.
    """
    validate_triplet(t, cp.n)
    pi, pj, pk = cp.probs[t.i], cp.probs[t.j], cp.probs[t.k]
    p_yes = float(np.sum(pi * pj * (1.0 - pk)))
    p_no = float(np.sum(pi * pk * (1.0 - pj)))
    p_dk = max(0.0, 1.0 - p_yes - p_no)
    return AnswerProbs(p_yes=p_yes, p_no=p_no, p_dk=p_dk)


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0.0]
    return float(-(p * np.log(p)).sum())


def prior_entropy(cp: ClassProbs, t: Triplet) -> float:
    """Joint label entropy of the three instances; independence makes it a sum."""
    validate_triplet(t, cp.n)
    return _entropy(cp.probs[t.i]) + _entropy(cp.probs[t.j]) + _entropy(cp.probs[t.k])


def posterior_entropy(cp: ClassProbs, t: Triplet, a: Answer, table: AnswerTable) -> float:
    """Entropy of the C^3 label configurations once the answer is observed.

    Bayes with the deterministic answer table: configurations inconsistent
    with the answer drop out, the rest renormalize by p(answer).
    """
    validate_triplet(t, cp.n)
    if a not in (Answer.YES, Answer.NO):
        raise ValueError(f"posterior entropy defined for yes/no, got {a}")
    code = YES_CODE if a is Answer.YES else NO_CODE
    joint = np.einsum("i,j,k->ijk", cp.probs[t.i], cp.probs[t.j], cp.probs[t.k])
    masked = joint[table.codes == code]
    p_a = float(masked.sum())
    if p_a <= 0.0:
        raise ValueError(f"p({a.value}) = 0 for triplet {t}; caller must guard")
    return _entropy(masked / p_a)


def _answer_configs(table: AnswerTable, code: int) -> np.ndarray:
    return np.argwhere(table.codes == code)


def score_triplets(cp: ClassProbs, triplets: np.ndarray, table: AnswerTable) -> np.ndarray:
    """Information-gain scores for an array of candidate triplets, vectorized.

    score = (1 - p_dk) * H(prior) - p_yes * H(post | yes) - p_no * H(post | no),
    natural log, zero-probability answers contributing zero. H(post | a) is
    folded to log p_a - (sum q log q) / p_a over the configurations q
    consistent with a.
    """
    trip = np.asarray(triplets, dtype=np.intp).reshape(-1, 3)
    probs = cp.probs
    row_h = -np.sum(np.where(probs > 0.0, probs * np.log(np.where(probs > 0.0, probs, 1.0)), 0.0), axis=1)
    prior = row_h[trip[:, 0]] + row_h[trip[:, 1]] + row_h[trip[:, 2]]

    pi = probs[trip[:, 0]]
    pj = probs[trip[:, 1]]
    pk = probs[trip[:, 2]]

    def answer_term(code: int) -> tuple[np.ndarray, np.ndarray]:
        cfg = _answer_configs(table, code)
        q = pi[:, cfg[:, 0]] * pj[:, cfg[:, 1]] * pk[:, cfg[:, 2]]
        p_a = q.sum(axis=1)
        qlogq = np.where(q > 0.0, q * np.log(np.where(q > 0.0, q, 1.0)), 0.0).sum(axis=1)
        h = np.zeros(len(trip))
        pos = p_a > 0.0
        h[pos] = np.log(p_a[pos]) - qlogq[pos] / p_a[pos]
        np.maximum(h, 0.0, out=h)
        return p_a, h

    p_yes, h_yes = answer_term(YES_CODE)
    p_no, h_no = answer_term(NO_CODE)
    p_dk = np.maximum(0.0, 1.0 - p_yes - p_no)
    return (1.0 - p_dk) * prior - p_yes * h_yes - p_no * h_no


def info_gain(cp: ClassProbs, t: Triplet, table: AnswerTable) -> float:
    validate_triplet(t, cp.n)
    return float(score_triplets(cp, np.array([t]), table)[0])


def sample_pool(
    n: int,
    params: SelectionParams,
    already_labeled: LabeledTripletSet,
    exhaustive: bool = False,
) -> Pool:
    """Uniformly sampled distinct unlabeled triplets, or the full universe.

    The universe is every ordered (i, j, k) with pairwise-distinct indices;
    (i, j, k) and (i, k, j) are different queries. The sampled pool holds
    min(pool_factor * n, |universe - labeled|) triplets; when the whole
    universe fits, it is returned exhaustively in lexicographic order.
    """
    if n < 3:
        raise ValueError(f"need at least 3 instances, got {n}")
    universe = n * (n - 1) * (n - 2)
    labeled = {t for t in already_labeled.triplets if max(t) < n}
    available = universe - len(labeled)
    target = params.pool_factor * n

    if exhaustive or available <= target:
        candidates = tuple(
            Triplet(*p) for p in itertools.permutations(range(n), 3) if Triplet(*p) not in labeled
        )
        origin = "exhaustive"
    else:
        rng = np.random.default_rng(np.random.SeedSequence([params.seed, _TAG_POOL]))
        chosen: list[Triplet] = []
        seen: set[Triplet] = set(labeled)
        while len(chosen) < target:
            block = rng.integers(0, n, size=(max(1024, target), 3))
            for i, j, k in block:
                if i == j or i == k or j == k:
                    continue
                t = Triplet(int(i), int(j), int(k))
                if t in seen:
                    continue
                seen.add(t)
                chosen.append(t)
                if len(chosen) == target:
                    break
        candidates = tuple(chosen)
        origin = "sampled"

    guarantee = 1.0 - (1.0 - params.epsilon_report) ** len(candidates)
    logger.info(
        "pool of %d triplets (%s); P(argmax in top %.4f of universe) >= %.6f",
        len(candidates), origin, params.epsilon_report, guarantee,
    )
    return Pool(candidates=candidates, origin=origin)


def select_query(
    pool: Pool | Sequence[Triplet], cp: ClassProbs, table: AnswerTable
) -> tuple[Triplet, float]:
    """Highest-scoring candidate; exact score ties resolve lexicographically."""
    candidates = pool.candidates if isinstance(pool, Pool) else tuple(pool)
    if not candidates:
        raise ValueError("empty pool")
    arr = np.array(candidates, dtype=np.intp)
    scores = score_triplets(cp, arr, table)
    best = scores.max()
    tied = np.flatnonzero(scores == best)
    winner = min(candidates[int(x)] for x in tied)
    return winner, float(best)


class SimulatedOracle:
    """Label-backed oracle; per-query noise streams are keyed by the triplet
    itself so replayed and resumed sessions see identical flips."""

    def __init__(self, labels: np.ndarray, noise_rate: float = 0.0, seed: int = 0):
        if labels is None:
            raise ValueError("simulated oracle needs labels")
        self.labels = np.asarray(labels, dtype=np.int64)
        self.noise_rate = float(noise_rate)
        self.seed = int(seed)

    def __call__(self, t: Triplet) -> Answer:
        rng = None
        if self.noise_rate > 0.0:
            rng = np.random.default_rng(
                np.random.SeedSequence([self.seed, _TAG_ORACLE, t.i, t.j, t.k])
            )
        return simulated_answer(self.labels, t, self.noise_rate, rng)


def random_triplet(n: int, rng: np.random.Generator) -> Triplet:
    picks = rng.permutation(n)[:3]
    return Triplet(int(picks[0]), int(picks[1]), int(picks[2]))


def bootstrap_candidate(n: int, seed: int, attempt: int) -> Triplet:
    rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_BOOTSTRAP, attempt]))
    return random_triplet(n, rng)


def bootstrap_triplets(
    n: int,
    oracle: Callable[[Triplet], Answer],
    seed: int,
    needed: int = 2,
    max_attempts: int = 100_000,
) -> LabeledTripletSet:
    """Initial labeled set: rejection-sample until `needed` yes/no answers.

    dk draws are discarded without being recorded (they cost nothing with a
    simulated oracle, matching the usual experimental initialization).
    """
    labeled = LabeledTripletSet()
    got = 0
    for attempt in range(max_attempts):
        t = bootstrap_candidate(n, seed, attempt)
        if t in labeled:
            continue
        a = oracle(t)
        if a is Answer.DK:
            continue
        labeled.add(t, a, source="simulated")
        got += 1
        if got == needed:
            return labeled
    raise RuntimeError(f"no {needed} yes/no triplets found in {max_attempts} attempts")


Selector = Callable[["ActiveLoop"], tuple[Triplet, float]]


class ActiveLoop:
    """One policy's query loop over a fixed training view.

    Per iteration: refresh the metric -> cluster -> forest pipeline (info
    policies), pick a pool candidate, record the oracle's answer, shrink
    the pool. The pool is sampled once at construction and never refilled.
    All randomness is derived from (seed, purpose-tag, iteration), so a
    reconstructed loop fed the same answers reproduces the same queries.
    """

    def __init__(
        self,
        train: DatasetView,
        num_classes: int,
        selection: SelectionParams,
        learner: LearnerParams = LearnerParams(),
        forest: ForestParams = ForestParams(),
        policy: str = "info",
        selector: Optional[Selector] = None,
        initial_labeled: Optional[LabeledTripletSet] = None,
        initial_weights: Optional[MetricWeights] = None,
        pool: Optional[Pool] = None,
        trace_top: int = 0,
    ):
        if num_classes is None or num_classes < 2:
            raise ValueError("active loop needs num_classes >= 2")
        self.train = train
        self.num_classes = num_classes
        self.selection = selection
        self.learner = learner
        self.forest = forest
        self.policy = policy
        self.selector = selector
        self.table = AnswerTable(num_classes)
        self.labeled = initial_labeled.copy() if initial_labeled is not None else LabeledTripletSet()
        if pool is None:
            pool = sample_pool(
                len(train), selection, self.labeled, exhaustive=(policy == "info_exact")
            )
        self.pool = pool
        self.remaining: list[Triplet] = list(pool.candidates)
        # a caller that already learned a metric from initial_labeled can pass
        # it in; the loop then skips the redundant first relearn
        if initial_weights is not None:
            self.weights = initial_weights
            self._constraints_dirty = False
        else:
            self.weights = MetricWeights.identity(train.dim)
            self._constraints_dirty = True
        self.class_probs = ClassProbs.uniform(len(train), num_classes)
        self.queries_made = 0
        self.history: list[dict] = []
        self.trace_top = trace_top
        self._pending: Optional[tuple[Triplet, float]] = None

    @property
    def done(self) -> bool:
        return self.queries_made >= self.selection.budget or not self.remaining

    def ensure_metric(self) -> MetricWeights:
        """Relearn the metric from current constraints, warm-started."""
        if self._constraints_dirty:
            self.weights = learn_metric(
                self.train, self.labeled.yes_no_pairs(), self.learner, warm_start=self.weights
            )
            self._constraints_dirty = False
        return self.weights

    def refresh_class_probs(self) -> ClassProbs:
        """Metric -> k-means -> forest, reseeded per iteration."""
        self.ensure_metric()
        t = self.queries_made
        clu = kmeans(
            self.train,
            self.weights,
            self.num_classes,
            seed=derived_seed(self.selection.seed, _TAG_CLUSTER, t),
        )
        fparams = ForestParams(
            num_trees=self.forest.num_trees,
            max_depth=self.forest.max_depth,
            min_leaf=self.forest.min_leaf,
            features_per_split=self.forest.features_per_split,
            seed=derived_seed(self.selection.seed, _TAG_FOREST, t),
        )
        self.class_probs = estimate_class_probs(
            self.train, clu.assignments, fparams, num_classes=self.num_classes
        )
        return self.class_probs

    def next_query(self) -> tuple[Triplet, float]:
        if self.done:
            raise RuntimeError("loop is done")
        if self._pending is None:
            if self.policy in ("info", "info_exact"):
                self.refresh_class_probs()
                self._pending = select_query(self.remaining, self.class_probs, self.table)
            else:
                if self.selector is None:
                    raise ValueError(f"policy {self.policy!r} needs a selector")
                self._pending = self.selector(self)
        return self._pending

    def record(self, t: Triplet, answer: Answer, source: str = "simulated", ts: float = 0.0):
        if self._pending is not None and self._pending[0] != t:
            raise ValueError(f"recording {t} but pending query is {self._pending[0]}")
        score = self._pending[1] if self._pending is not None else float("nan")
        self.labeled.add(t, answer, source=source, ts=ts)
        self.remaining.remove(t)
        self.queries_made += 1
        if answer is not Answer.DK:
            self._constraints_dirty = True
        entry = {
            "iteration": self.queries_made,
            "query": [t.i, t.j, t.k],
            "answer": answer.value,
            "score": score,
            "weights": self.weights.to_list(),
        }
        if self.trace_top > 0 and self.policy in ("info", "info_exact"):
            entry["top"] = self._top_scores(self.trace_top)
        self.history.append(entry)
        self._pending = None

    def _top_scores(self, k: int) -> list[list[float]]:
        arr = np.array(self.remaining + [self._pending[0]] if self._pending else self.remaining)
        if len(arr) == 0:
            return []
        scores = score_triplets(self.class_probs, arr, self.table)
        order = np.argsort(-scores, kind="stable")[:k]
        return [[int(arr[o][0]), int(arr[o][1]), int(arr[o][2]), float(scores[o])] for o in order]


def run_active_loop(
    data: Dataset,
    spl: Split,
    params: SelectionParams,
    oracle: Callable[[Triplet], Answer],
    learner_params: LearnerParams = LearnerParams(),
    forest_params: ForestParams = ForestParams(),
) -> tuple[LabeledTripletSet, MetricWeights, list[dict]]:
    """Run the full active-learning loop against an oracle until the budget is spent.

    Bootstraps two yes/no triplets, samples the pool once, then repeatedly
    estimates class probabilities, queries the pool argmax, and folds the
    answer back in. Returns the labeled set, the final metric (learned from
    every yes/no answer), and the per-iteration history.
    """
    train = data.view(spl.train_indices)
    if train.num_classes is None:
        raise ValueError("active loop needs a labeled dataset")
    initial = bootstrap_triplets(len(train), oracle, params.seed)
    loop = ActiveLoop(
        train,
        train.num_classes,
        params,
        learner=learner_params,
        forest=forest_params,
        policy="info",
        initial_labeled=initial,
    )
    while not loop.done:
        t, _score = loop.next_query()
        loop.record(t, oracle(t))
    loop.ensure_metric()
    return loop.labeled, loop.weights, loop.history
