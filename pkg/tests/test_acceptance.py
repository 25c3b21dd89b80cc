"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each test prints an ACCEPTANCE PASS line once its assertions hold, so a
verbose run reads as a checklist. Several tests are directional
replications on desk-scale data and take minutes; the whole module is part
of the default pytest run.
"""
import math
import time
from collections import Counter

import numpy as np

import activemetric as am
from activemetric.evaluation import ExperimentConfig, run_experiment
from activemetric.forest import ClassProbs
from activemetric.metric import MetricWeights, learn_metric
from activemetric.oracle import Answer, AnswerTable, LabeledTripletSet, Triplet
from activemetric.selection import (
    SelectionParams,
    SimulatedOracle,
    answer_probs,
    info_gain,
    posterior_entropy,
    prior_entropy,
    random_triplet,
    sample_pool,
    score_triplets,
    select_query,
)

import reference

T = Triplet(0, 1, 2)


def _announce(name: str, started: float, budget_s: float):
    elapsed = time.time() - started
    assert elapsed < budget_s, f"{name} took {elapsed:.1f}s, budget {budget_s}s"
    print(f"\nACCEPTANCE PASS: {name} ({elapsed:.1f}s)")


def test_criterion_formula_equivalence():
    """Eq.-5/Eq.-2/Eq.-3/Eq.-1 vs brute-force joint computation, 1e-9."""
    started = time.time()
    rng = np.random.default_rng(2024)
    cases = [2] * 334 + [3] * 333 + [4] * 333
    tables = {c: AnswerTable(c) for c in (2, 3, 4)}
    for c in cases:
        rows = reference.random_row_stochastic(rng, c)
        cp = ClassProbs(rows)
        table = tables[c]

        p = answer_probs(cp, T)
        assert abs(p.p_yes - reference.answer_probability(rows, Answer.YES)) <= 1e-9
        assert abs(p.p_no - reference.answer_probability(rows, Answer.NO)) <= 1e-9
        assert abs(p.p_dk - reference.answer_probability(rows, Answer.DK)) <= 1e-9

        assert abs(prior_entropy(cp, T) - reference.prior_entropy(rows)) <= 1e-9
        for a in (Answer.YES, Answer.NO):
            assert abs(
                posterior_entropy(cp, T, a, table) - reference.posterior_entropy(rows, a)
            ) <= 1e-9
        assert abs(info_gain(cp, T, table) - reference.info_gain(rows)) <= 1e-9
    _announce("formula equivalence (1000 cases, C in {2,3,4}, 1e-9)", started, 10.0)


def test_criterion_exact_mutual_information():
    """info_gain == joint-distribution MI whenever p_dk = 0 (100 cases, 1e-9)."""
    started = time.time()
    rng = np.random.default_rng(77)
    checked = 0
    for c in (2, 3, 4, 5):
        table = AnswerTable(c)
        for _ in range(25):
            mix = rng.random()
            rows = np.zeros((3, c))
            rows[0, 0], rows[0, 1] = mix, 1.0 - mix
            rows[1, 0] = 1.0
            rows[2, 1] = 1.0
            assert reference.answer_probability(rows, Answer.DK) <= 1e-12
            gain = info_gain(ClassProbs(rows), T, table)
            assert abs(gain - reference.mutual_information(rows)) <= 1e-9
            checked += 1
    assert checked == 100
    _announce("exact-MI consistency (100 p_dk=0 cases, 1e-9)", started, 10.0)


def test_criterion_oracle_truth_table():
    """Exhaustive, mutually exclusive answers for C <= 5; C=2 counts (2,2,4)."""
    started = time.time()
    for c in range(1, 6):
        table = am.enumerate_answer_table(c)
        assert len(table) == c**3
        for (yi, yj, yk), answer in table.items():
            yes = yi == yj != yk
            no = yi == yk != yj
            assert not (yes and no)
            assert answer is (Answer.YES if yes else Answer.NO if no else Answer.DK)
    counts = Counter(am.enumerate_answer_table(2).values())
    assert (counts[Answer.YES], counts[Answer.NO], counts[Answer.DK]) == (2, 2, 4)
    _announce("oracle truth table (C <= 5; C=2 counts 2/2/4)", started, 10.0)


def test_criterion_pool_guarantee():
    """Sampled-pool argmax lands in the exact top-eps set at the guaranteed rate."""
    started = time.time()
    n, eps, trials = 12, 0.01, 200
    universe = n * (n - 1) * (n - 2)
    exhaustive = sample_pool(
        n, SelectionParams(pool_factor=1000, budget=1, seed=0), LabeledTripletSet()
    )
    assert exhaustive.origin == "exhaustive" and len(exhaustive.candidates) == universe
    all_triplets = np.array(exhaustive.candidates, dtype=np.intp)
    top_k = math.ceil(eps * universe)

    pool_size = min(100 * n, universe)
    guarantee = 1.0 - (1.0 - eps) ** pool_size
    hits = 0
    for trial in range(trials):
        rng = np.random.default_rng(trial)
        cp = ClassProbs(
            np.vstack([reference.random_row_stochastic(rng, 3, n=1) for _ in range(n)])
        )
        table = AnswerTable(3)
        exact_scores = score_triplets(cp, all_triplets, table)
        threshold = np.sort(exact_scores)[-top_k]
        pool = sample_pool(
            n, SelectionParams(pool_factor=100, budget=1, seed=trial), LabeledTripletSet()
        )
        assert pool.origin == "sampled" and len(pool.candidates) == pool_size
        _, best_score = select_query(pool, cp, table)
        if best_score >= threshold - 1e-12:
            hits += 1
    rate = hits / trials
    slack = 3.0 * math.sqrt(guarantee * (1.0 - guarantee) / trials)
    assert rate >= guarantee - slack, f"rate {rate} < {guarantee} - {slack}"
    _announce(
        f"pool sampling guarantee (rate {rate:.4f} >= {guarantee - slack:.4f})",
        started, 120.0,
    )


def test_criterion_metric_recovery(blobs2_amplified):
    """Learned weight concentrates on the informative dim; accuracy >= 0.9."""
    started = time.time()
    spl = am.split(blobs2_amplified, 0.5, seed=11)
    train = blobs2_amplified.view(spl.train_indices)
    test = blobs2_amplified.view(spl.test_indices)

    oracle = SimulatedOracle(train.labels, 0.0, seed=0)
    rng = np.random.default_rng(99)
    constraints, seen = [], set()
    while len(constraints) < 30:
        t = random_triplet(len(train), rng)
        if t in seen:
            continue
        a = oracle(t)
        if a is Answer.DK:
            continue
        seen.add(t)
        constraints.append((t, a))

    w = learn_metric(train, constraints)
    assert int(np.argmax(w.w)) == 0
    learned_acc = am.triplet_accuracy(w, test, seed=5)
    identity_acc = am.triplet_accuracy(MetricWeights.identity(4), test, seed=5)
    assert learned_acc >= 0.9
    assert identity_acc <= 0.75  # 5x-amplified noise leaves Euclidean near chance
    _announce(
        f"metric recovery (argmax dim 0; acc {learned_acc:.3f} vs identity {identity_acc:.3f})",
        started, 30.0,
    )


def test_criterion_end_to_end_ordering(blobs3):
    """Desk-scale policy comparison: info >= both baselines; y/n gap >= 0.10."""
    started = time.time()
    config = ExperimentConfig(
        dataset=blobs3,
        policies=("info", "random", "nonredundant"),
        runs=10,
        budget=40,
        checkpoints=(0, 40),
        seed=2025,
    )
    report = run_experiment(config)
    final = report.checkpoints[-1]
    info = report.cells["info"][final]["triplet_mean"]
    rand = report.cells["random"][final]["triplet_mean"]
    nonred = report.cells["nonredundant"][final]["triplet_mean"]
    assert info >= rand, f"info {info} < random {rand}"
    assert info >= nonred, f"info {info} < nonredundant {nonred}"
    gap = report.yes_no_proportion["info"] - report.yes_no_proportion["random"]
    assert gap >= 0.10, f"yes/no proportion gap {gap} < 0.10"
    _announce(
        f"end-to-end ordering (info {info:.3f} >= random {rand:.3f}, "
        f">= nonredundant {nonred:.3f}; y/n gap {gap:.2f})",
        started, 600.0,
    )


def test_criterion_sampling_vs_exact():
    """Sampled pool costs at most 0.05 final triplet accuracy vs exhaustive."""
    started = time.time()
    ds = am.make_synthetic_gaussians(2, 20, 4, 2, 3.0, seed=13)  # n = 40
    config = ExperimentConfig(
        dataset=ds,
        policies=("info", "info_exact"),
        runs=10,
        budget=40,
        checkpoints=(0, 40),
        seed=31,
        pool_factor=100,
    )
    report = run_experiment(config)
    final = report.checkpoints[-1]
    info = report.cells["info"][final]["triplet_mean"]
    exact = report.cells["info_exact"][final]["triplet_mean"]
    assert abs(info - exact) <= 0.05, f"|{info} - {exact}| > 0.05"
    _announce(
        f"sampling vs exact (|{info:.3f} - {exact:.3f}| <= 0.05)", started, 600.0
    )


def test_criterion_wine_full_mode(tmp_path):
    """--full smoke: Wine, 5 runs, budget 100; 1NN improves >= +0.05 by 100."""
    started = time.time()
    from sklearn.datasets import load_wine
    from activemetric.dataset import save_csv

    raw = load_wine()
    ds = am.Dataset(
        features=raw.data,
        ids=tuple(str(i) for i in range(len(raw.data))),
        labels=raw.target,
        num_classes=3,
    )
    path = tmp_path / "wine.csv"
    save_csv(ds, path)
    wine = am.load_csv(path, label_column="class")
    assert wine.n == 178 and wine.dim == 13 and wine.num_classes == 3

    config = ExperimentConfig(
        dataset=wine,
        policies=("info",),
        runs=5,
        budget=100,
        checkpoints=(0, 100),
        seed=404,
        standardize=False,  # published-baseline protocol: raw features (0-query 1NN ~= 0.77)
    )
    report = run_experiment(config)
    nn0 = report.cells["info"][0]["onenn_mean"]
    nn100 = report.cells["info"][100]["onenn_mean"]
    assert nn100 - nn0 >= 0.05, f"1NN improved only {nn100 - nn0:+.3f} ({nn0:.3f} -> {nn100:.3f})"
    _announce(
        f"wine full-mode smoke (1NN {nn0:.3f} -> {nn100:.3f}, {nn100 - nn0:+.3f})",
        started, 1800.0,
    )


def test_criterion_determinism(tmp_path, blobs3):
    """Same seed => byte-identical reports and identical query sequences."""
    started = time.time()
    config = ExperimentConfig(
        dataset=blobs3,
        policies=("info", "random"),
        runs=2,
        budget=6,
        checkpoints=(0, 6),
        seed=99,
        pool_factor=10,
    )
    r1, r2 = run_experiment(config), run_experiment(config)
    assert r1.to_json().encode() == r2.to_json().encode()
    assert r1.to_csv().encode() == r2.to_csv().encode()

    from activemetric.session import Session, SessionConfig, load_session

    out = tmp_path / "sess"
    sess = Session.create(
        blobs3, SessionConfig(budget=5, seed=12, oracle="simulated"), out
    )
    sess.run_simulated()
    replayed = load_session(out)
    original = [(r.triplet, r.answer) for r in sess.labeled]
    again = [(r.triplet, r.answer) for r in replayed.labeled]
    assert original == again
    assert sess.weights.to_list() == replayed.weights.to_list()
    _announce("determinism (byte-identical reports; identical query sequences)", started, 300.0)
