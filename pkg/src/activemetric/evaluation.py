"""Measurement protocol: triplet accuracy, 1NN accuracy, baselines, experiments."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset, DatasetView, split, standardize
from .forest import ForestParams
from .metric import LearnerParams, MetricWeights, pairwise_distance_sq
from .oracle import Answer, LabeledTripletSet, Triplet
from .selection import (
    ActiveLoop,
    Pool,
    SelectionParams,
    SimulatedOracle,
    bootstrap_triplets,
    derived_seed,
    sample_pool,
)

_TAG_SPLIT = 11
_TAG_BOOT = 12
_TAG_POOLSEED = 13
_TAG_POLICY = 14
_TAG_EVAL = 15


class PolicyKind(str, Enum):
    INFO = "info"
    RANDOM = "random"
    NONREDUNDANT = "nonredundant"
    INFO_EXACT = "info_exact"


def _yes_no_triplet_arrays(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All ordered triplets with a yes or no answer; returns (triplets, is_yes)."""
    n = len(labels)
    blocks = []
    truth = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        others = np.flatnonzero(labels != c)
        if len(members) < 2 or len(others) == 0:
            continue
        ii, jj = np.meshgrid(members, members, indexing="ij")
        keep = ii != jj
        pi, pj = ii[keep], jj[keep]
        reps = len(others)
        base_i = np.repeat(pi, reps)
        base_j = np.repeat(pj, reps)
        base_k = np.tile(others, len(pi))
        yes = np.stack([base_i, base_j, base_k], axis=1)
        no = np.stack([base_i, base_k, base_j], axis=1)
        blocks.extend([yes, no])
        truth.extend([np.ones(len(yes), bool), np.zeros(len(no), bool)])
    if not blocks:
        raise ValueError("fold has no yes/no-answerable triplet")
    return np.concatenate(blocks), np.concatenate(truth)


def triplet_accuracy(
    w: MetricWeights,
    test: DatasetView,
    sample_cap: int = 200_000,
    seed: int = 0,
) -> float:
    """Fraction of held-out yes/no triplets the metric answers correctly.

    Enumerates every answerable triplet when there are at most sample_cap of
    them, otherwise uniformly samples sample_cap distinct ones. Prediction
    follows the tie rule of predict_answer (ties answer no).
    """
    labels = test.labels
    if labels is None:
        raise ValueError("triplet accuracy needs test labels")
    counts = np.bincount(labels)
    n = len(labels)
    total = 2 * int(np.sum(counts * np.maximum(counts - 1, 0) * (n - counts)))
    if total == 0:
        raise ValueError("fold has no yes/no-answerable triplet")

    if total <= sample_cap:
        trip, is_yes = _yes_no_triplet_arrays(labels)
    else:
        rng = np.random.default_rng(seed)
        seen: set[tuple[int, int, int]] = set()
        rows, flags = [], []
        while len(rows) < sample_cap:
            block = rng.integers(0, n, size=(4 * sample_cap, 3))
            for i, j, k in block:
                if i == j or i == k or j == k:
                    continue
                yi, yj, yk = labels[i], labels[j], labels[k]
                if yi == yj != yk:
                    yes = True
                elif yi != yj == yk:
                    yes = False
                else:
                    continue
                key = (int(i), int(j), int(k))
                if key in seen:
                    continue
                seen.add(key)
                rows.append(key)
                flags.append(yes)
                if len(rows) == sample_cap:
                    break
        trip = np.array(rows, dtype=np.intp)
        is_yes = np.array(flags, dtype=bool)

    d = pairwise_distance_sq(w, test.features, test.features)
    predicted_yes = d[trip[:, 0], trip[:, 1]] < d[trip[:, 0], trip[:, 2]]
    return float(np.mean(predicted_yes == is_yes))


def one_nn_accuracy(w: MetricWeights, train: DatasetView, test: DatasetView) -> float:
    """1-nearest-neighbor accuracy on the test fold under the learned metric."""
    if train.labels is None or test.labels is None:
        raise ValueError("1NN accuracy needs labels on both folds")
    if len(train) == 0 or len(test) == 0:
        raise ValueError("empty fold")
    d = pairwise_distance_sq(w, test.features, train.features)
    nearest = np.argmin(d, axis=1)  # ties to the lower train index
    return float(np.mean(train.labels[nearest] == test.labels))


def baseline_next(
    kind: PolicyKind,
    pool: Pool | Sequence[Triplet],
    history: LabeledTripletSet,
    rng: np.random.Generator,
) -> Triplet:
    """Next query under a non-informative policy.

    random draws uniformly; nonredundant minimizes the instance overlap with
    everything queried so far, breaking ties uniformly at random.
    """
    candidates = pool.candidates if isinstance(pool, Pool) else tuple(pool)
    if not candidates:
        raise ValueError("empty pool")
    kind = PolicyKind(kind)
    if kind is PolicyKind.RANDOM:
        return candidates[int(rng.integers(len(candidates)))]
    if kind is PolicyKind.NONREDUNDANT:
        used = history.instances()
        arr = np.array(candidates, dtype=np.intp)
        overlap = np.isin(arr, np.array(sorted(used), dtype=np.intp)).sum(axis=1)
        low = np.flatnonzero(overlap == overlap.min())
        return candidates[int(low[rng.integers(len(low))])]
    raise ValueError(f"{kind} is not a baseline policy")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Dataset
    policies: tuple[str, ...] = ("info", "random")
    runs: int = 10
    budget: int = 40
    checkpoints: Optional[tuple[int, ...]] = None
    seed: int = 0
    test_fraction: float = 0.5
    standardize: bool = True
    pool_factor: int = 100
    epsilon_report: float = 0.001
    learner: LearnerParams = field(default_factory=LearnerParams)
    forest: ForestParams = field(default_factory=ForestParams)
    triplet_sample_cap: int = 200_000
    noise_rate: float = 0.0
    trace_top: int = 0

    def resolved_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            pts = sorted(set(int(c) for c in self.checkpoints))
            if any(c < 0 or c > self.budget for c in pts):
                raise ValueError("checkpoints must lie in [0, budget]")
            return tuple(pts)
        defaults = [c for c in (0, 10, 20, 40, 60, 80, 100) if c <= self.budget]
        if self.budget not in defaults:
            defaults.append(self.budget)
        return tuple(sorted(set(defaults)))


@dataclass
class ExperimentReport:
    """Aggregated learning curves plus the raw per-run records behind them."""

    policies: tuple[str, ...]
    checkpoints: tuple[int, ...]
    runs: int
    cells: dict  # policy -> checkpoint -> {metric: value}
    yes_no_proportion: dict  # policy -> mean over runs
    raw: list  # per run x policy records

    def to_json_dict(self) -> dict:
        return {
            "policies": list(self.policies),
            "checkpoints": list(self.checkpoints),
            "runs": self.runs,
            "cells": {
                p: {str(c): self.cells[p][c] for c in self.checkpoints}
                for p in self.policies
            },
            "yes_no_proportion": {p: self.yes_no_proportion[p] for p in self.policies},
            "raw": self.raw,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        lines = [
            "policy,checkpoint,triplet_mean,triplet_ci_lo,triplet_ci_hi,"
            "onenn_mean,onenn_ci_lo,onenn_ci_hi,yes_no_proportion"
        ]
        for p in self.policies:
            for c in self.checkpoints:
                cell = self.cells[p][c]
                lines.append(
                    f"{p},{c},{cell['triplet_mean']!r},{cell['triplet_ci'][0]!r},"
                    f"{cell['triplet_ci'][1]!r},{cell['onenn_mean']!r},"
                    f"{cell['onenn_ci'][0]!r},{cell['onenn_ci'][1]!r},"
                    f"{self.yes_no_proportion[p]!r}"
                )
        return "\n".join(lines) + "\n"

    def to_curves_tsv(self, measure: str = "triplet_mean") -> str:
        header = "checkpoint\t" + "\t".join(self.policies)
        lines = [header]
        for c in self.checkpoints:
            vals = "\t".join(repr(self.cells[p][c][measure]) for p in self.policies)
            lines.append(f"{c}\t{vals}")
        return "\n".join(lines) + "\n"

    def final_mean(self, policy: str, measure: str = "triplet_mean") -> float:
        return self.cells[policy][self.checkpoints[-1]][measure]


def _mean_ci(values: np.ndarray) -> tuple[float, tuple[float, float]]:
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, (mean, mean)
    half = 1.96 * float(np.std(values, ddof=1)) / float(np.sqrt(len(values)))
    return mean, (mean - half, mean + half)


def _policy_selector(kind: PolicyKind, seed: int):
    def select(loop: ActiveLoop) -> tuple[Triplet, float]:
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, loop.queries_made])
        )
        t = baseline_next(kind, loop.remaining, loop.labeled, rng)
        return t, float("nan")

    return select


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Multi-seed comparison of selection policies on one dataset.

    Each run draws a fresh stratified split, shares the two bootstrap
    triplets and the sampled pool across policies, then lets every policy
    spend the budget independently. Metrics are recorded at each checkpoint;
    checkpoint 0 is evaluated once per run from the shared initial state.
    The entire report is a pure function of (config, seed).
    """
    dataset = config.dataset
    if dataset.labels is None:
        raise ValueError("experiments need a labeled dataset")
    if config.runs < 2:
        raise ValueError("need at least 2 runs for confidence intervals")
    policies = tuple(PolicyKind(p).value for p in config.policies)
    if len(set(policies)) != len(policies):
        raise ValueError("duplicate policy")
    checkpoints = config.resolved_checkpoints()

    per_run: list[dict] = []
    for run in range(config.runs):
        try:
            per_run.extend(_single_run(config, policies, checkpoints, run))
        except Exception as exc:  # record the failed run, keep the others
            per_run.append({"run": run, "error": f"{type(exc).__name__}: {exc}"})

    ok = [r for r in per_run if "error" not in r]
    if len({r["run"] for r in ok}) < 2:
        raise RuntimeError(f"fewer than 2 usable runs; failures: {per_run}")

    cells: dict = {}
    yn: dict = {}
    for p in policies:
        rows = [r for r in ok if r["policy"] == p]
        cells[p] = {}
        for c in checkpoints:
            tri = np.array([r["checkpoints"][c]["triplet"] for r in rows])
            onenn = np.array([r["checkpoints"][c]["onenn"] for r in rows])
            tri_mean, tri_ci = _mean_ci(tri)
            nn_mean, nn_ci = _mean_ci(onenn)
            cells[p][c] = {
                "triplet_mean": tri_mean,
                "triplet_ci": list(tri_ci),
                "onenn_mean": nn_mean,
                "onenn_ci": list(nn_ci),
            }
        yn[p] = float(np.mean([r["yes_no_proportion"] for r in rows]))

    raw = [_jsonable_record(r, checkpoints) for r in per_run]
    return ExperimentReport(
        policies=policies,
        checkpoints=checkpoints,
        runs=config.runs,
        cells=cells,
        yes_no_proportion=yn,
        raw=raw,
    )


def _jsonable_record(record: dict, checkpoints) -> dict:
    if "error" in record:
        return dict(record)
    out = {k: v for k, v in record.items() if k != "checkpoints"}
    out["checkpoints"] = {str(c): record["checkpoints"][c] for c in checkpoints}
    return out


def _single_run(config, policies, checkpoints, run: int) -> list[dict]:
    master = config.seed
    spl = split(config.dataset, config.test_fraction, derived_seed(master, _TAG_SPLIT, run))
    data = standardize(config.dataset, spl) if config.standardize else config.dataset
    train = data.view(spl.train_indices)
    test = data.view(spl.test_indices)

    oracle = SimulatedOracle(
        train.labels, config.noise_rate, seed=derived_seed(master, _TAG_BOOT, run)
    )
    initial = bootstrap_triplets(len(train), oracle, derived_seed(master, _TAG_BOOT, run))

    pool_params = SelectionParams(
        pool_factor=config.pool_factor,
        epsilon_report=config.epsilon_report,
        budget=config.budget,
        seed=derived_seed(master, _TAG_POOLSEED, run),
    )
    shared_pool = sample_pool(len(train), pool_params, initial)

    # checkpoint 0 is shared: learned from the bootstrap triplets alone
    from .metric import learn_metric

    w0 = learn_metric(train, initial.yes_no_pairs(), config.learner)
    zero_metrics = None
    if 0 in checkpoints:
        zero_metrics = {
            "triplet": triplet_accuracy(
                w0, test, config.triplet_sample_cap, seed=derived_seed(master, _TAG_EVAL, run, 0)
            ),
            "onenn": one_nn_accuracy(w0, train, test),
        }

    records = []
    for pi, policy in enumerate(policies):
        loop_seed = derived_seed(master, _TAG_POLICY, run, pi)
        params = SelectionParams(
            pool_factor=config.pool_factor,
            epsilon_report=config.epsilon_report,
            budget=config.budget,
            seed=loop_seed,
        )
        kind = PolicyKind(policy)
        if kind is PolicyKind.INFO_EXACT:
            pool = sample_pool(len(train), params, initial, exhaustive=True)
        else:
            pool = shared_pool
        selector = None
        if kind in (PolicyKind.RANDOM, PolicyKind.NONREDUNDANT):
            selector = _policy_selector(kind, loop_seed)
        loop = ActiveLoop(
            train,
            train.num_classes,
            params,
            learner=config.learner,
            forest=config.forest,
            policy=policy,
            selector=selector,
            initial_labeled=initial,
            initial_weights=w0,
            pool=pool,
            trace_top=config.trace_top,
        )

        results = {}
        if 0 in checkpoints:
            results[0] = dict(zero_metrics)
        while not loop.done:
            t, _ = loop.next_query()
            loop.record(t, oracle(t))
            q = loop.queries_made
            if q in checkpoints:
                w = loop.ensure_metric()
                results[q] = {
                    "triplet": triplet_accuracy(
                        w,
                        test,
                        config.triplet_sample_cap,
                        seed=derived_seed(master, _TAG_EVAL, run, pi, q),
                    ),
                    "onenn": one_nn_accuracy(w, train, test),
                }
        # a drained pool can end the loop before later checkpoints; score them
        # with the final metric so the report stays rectangular
        w_final = loop.ensure_metric()
        for c in checkpoints:
            if c not in results:
                results[c] = {
                    "triplet": triplet_accuracy(
                        w_final,
                        test,
                        config.triplet_sample_cap,
                        seed=derived_seed(master, _TAG_EVAL, run, pi, c),
                    ),
                    "onenn": one_nn_accuracy(w_final, train, test),
                }
        answered = loop.queries_made
        yes_no = sum(
            1 for rec in loop.labeled if rec.answer is not Answer.DK
        ) - len(initial.yes_no_pairs())
        records.append(
            {
                "run": run,
                "policy": policy,
                "checkpoints": results,
                "yes_no_proportion": yes_no / answered if answered else 0.0,
                "queries": answered,
                "history": loop.history,
            }
        )
    return records
