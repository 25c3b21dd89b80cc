from collections import Counter
from itertools import product

import numpy as np
import pytest

import activemetric as am
from activemetric.oracle import Answer, LabeledTripletSet, Triplet, TripletRecord

from reference import oracle_rule


def test_truth_table_counts_c2():
    table = am.enumerate_answer_table(2)
    counts = Counter(a for a in table.values())
    assert counts[Answer.YES] == 2
    assert counts[Answer.NO] == 2
    assert counts[Answer.DK] == 4


def test_truth_table_counts_c3():
    counts = Counter(am.enumerate_answer_table(3).values())
    assert counts[Answer.YES] == 6
    assert counts[Answer.NO] == 6
    assert counts[Answer.DK] == 15


def test_truth_table_c1():
    table = am.enumerate_answer_table(1)
    assert table == {(0, 0, 0): Answer.DK}


@pytest.mark.parametrize("c", [2, 3, 4, 5])
def test_rules_exhaustive_and_exclusive(c):
    table = am.enumerate_answer_table(c)
    assert len(table) == c**3
    for (yi, yj, yk), answer in table.items():
        yes = yi == yj != yk
        no = yi == yk != yj
        assert not (yes and no)
        expected = Answer.YES if yes else Answer.NO if no else Answer.DK
        assert answer is expected
        assert answer is oracle_rule(yi, yj, yk)


@pytest.mark.parametrize("c", [2, 3, 4])
def test_symmetry_yes_mirrors_no(c):
    labels = np.array(list(product(range(c), repeat=3)))
    for yi, yj, yk in labels:
        lab = np.array([yi, yj, yk])
        fwd = am.simulated_answer(lab, Triplet(0, 1, 2))
        rev = am.simulated_answer(lab, Triplet(0, 2, 1))
        assert (fwd is Answer.YES) == (rev is Answer.NO)


def test_simulated_answer_examples():
    t = Triplet(0, 1, 2)
    assert am.simulated_answer(np.array([1, 1, 2]), t) is Answer.YES
    assert am.simulated_answer(np.array([1, 2, 1]), t) is Answer.NO
    assert am.simulated_answer(np.array([1, 1, 1]), t) is Answer.DK
    assert am.simulated_answer(np.array([1, 2, 3]), t) is Answer.DK
    # anchor differs from two same-class comparisons: neither rule fires
    assert am.simulated_answer(np.array([1, 2, 2]), t) is Answer.DK


def test_noise_flip_deterministic():
    labels = np.array([0, 0, 1])
    t = Triplet(0, 1, 2)
    flips = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        flips.append(am.simulated_answer(labels, t, noise_rate=0.3, rng=rng))
    rate = sum(1 for a in flips if a is Answer.NO) / len(flips)
    assert 0.2 < rate < 0.4
    rng_a = np.random.default_rng(5)
    rng_b = np.random.default_rng(5)
    assert am.simulated_answer(labels, t, 0.3, rng_a) is am.simulated_answer(labels, t, 0.3, rng_b)


def test_noise_never_touches_dk():
    labels = np.array([0, 1, 2])
    for seed in range(50):
        rng = np.random.default_rng(seed)
        assert am.simulated_answer(labels, Triplet(0, 1, 2), 0.9, rng) is Answer.DK


def test_noise_requires_rng():
    with pytest.raises(ValueError):
        am.simulated_answer(np.array([0, 0, 1]), Triplet(0, 1, 2), noise_rate=0.5)


def test_missing_labels():
    with pytest.raises(ValueError, match="missing labels"):
        am.simulated_answer(None, Triplet(0, 1, 2))


def test_triplet_validation():
    from activemetric.oracle import validate_triplet

    validate_triplet(Triplet(0, 1, 2), 3)
    with pytest.raises(ValueError):
        validate_triplet(Triplet(0, 1, 1), 3)
    with pytest.raises(ValueError):
        validate_triplet(Triplet(0, 1, 3), 3)


def test_labeled_set_append_only():
    rl = LabeledTripletSet()
    rl.add(Triplet(0, 1, 2), Answer.YES)
    rl.add(Triplet(0, 2, 1), Answer.NO)  # mirrored ordering is a distinct triplet
    with pytest.raises(ValueError, match="duplicate"):
        rl.add(Triplet(0, 1, 2), Answer.DK)
    assert len(rl) == 2
    assert Triplet(0, 1, 2) in rl
    assert rl.instances() == {0, 1, 2}


def test_labeled_set_yes_no_pairs():
    rl = LabeledTripletSet()
    rl.add(Triplet(0, 1, 2), Answer.YES)
    rl.add(Triplet(3, 4, 5), Answer.DK)
    rl.add(Triplet(1, 2, 3), Answer.NO)
    pairs = rl.yes_no_pairs()
    assert len(pairs) == 2
    assert all(a is not Answer.DK for _, a in pairs)


def test_record_jsonl_roundtrip():
    rec = TripletRecord(Triplet(3, 1, 4), Answer.NO, "human", 123.5)
    back = TripletRecord.from_json(rec.to_json())
    assert back == rec
    obj = __import__("json").loads(rec.to_json())
    assert set(obj) == {"i", "j", "k", "answer", "source", "ts"}
