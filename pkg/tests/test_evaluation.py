import numpy as np
import pytest

from oracles import exhaustive_swap_pvalue, f1_from_counts
from rescrf.corpus import convert_scheme
from rescrf.evaluation import entity_f1, prf, randomization_test, sentence_counts
from rescrf.synthetic import random_bio

# (pred sentences, gold sentences, P, R, F1), all computed by hand
CRAFTED = [
    ([["B-PER", "I-PER", "O", "B-LOC"]], [["B-PER", "I-PER", "O", "B-LOC"]], 100, 100, 100),
    ([["B-PER", "O", "O"]], [["B-PER", "I-PER", "O"]], 0, 0, 0),  # boundary only
    ([["B-LOC", "O"]], [["B-PER", "O"]], 0, 0, 0),  # type only
    ([["B-PER", "O", "O"]], [["B-PER", "O", "B-LOC"]], 100, 50, 200 / 3),
    ([["B-PER", "O", "B-ORG"]], [["B-PER", "O", "O"]], 50, 100, 200 / 3),
    ([["O"]], [["B-PER"]], 0, 0, 0),
    ([["O", "O"]], [["O", "O"]], 0, 0, 0),
    ([["B-ORG", "B-ORG", "I-ORG"]], [["B-ORG", "I-ORG", "I-ORG"]], 0, 0, 0),  # split
    ([["B-PER", "O"], ["B-LOC", "O"], ["B-MISC", "B-ORG"]],
     [["B-PER", "O"], ["B-LOC", "I-LOC"], ["O", "B-ORG"]], 50, 200 / 3, 400 / 7),
    ([["B-PER", "I-PER"]], [["B-PER", "B-PER"]], 0, 0, 0),  # merged
    ([["B-A", "B-B", "B-C", "O", "B-E", "B-F"]], [["B-A", "B-B", "B-C", "B-D", "O", "O"]],
     60, 75, 200 / 3),
]


@pytest.mark.parametrize("pred, gold, p, r, f", CRAFTED)
def test_crafted_cases(pred, gold, p, r, f):
    rep = entity_f1(pred, gold)
    assert rep.precision == pytest.approx(p, abs=1e-9)
    assert rep.recall == pytest.approx(r, abs=1e-9)
    assert rep.f1 == pytest.approx(f, abs=1e-9)


def test_report_counts_and_text():
    rep = entity_f1([["B-PER", "O", "B-ORG"]], [["B-PER", "O", "B-LOC"]])
    assert (rep.num_gold, rep.num_predicted, rep.num_correct) == (2, 2, 1)
    assert rep.token_accuracy == pytest.approx(200 / 3)
    assert rep.per_type["PER"][:3] == (100.0, 100.0, 100.0)
    assert rep.per_type["LOC"][3:] == (1, 0, 0)
    assert "FB1:  50.00" in rep.text()
    assert rep.summary_line().startswith("precision: 50.0000 recall: 50.0000 f1: 50.0000")


def test_prf_zero_denominators():
    assert prf(0, 0, 0) == (0.0, 0.0, 0.0)
    assert prf(0, 3, 0) == (0.0, 0.0, 0.0)


def test_length_mismatch():
    with pytest.raises(ValueError):
        entity_f1([["O"]], [["O", "O"]])
    with pytest.raises(ValueError):
        entity_f1([["O"]], [])


def _corpus(seed, n=30):
    rng = np.random.default_rng(seed)
    gold = [random_bio(int(rng.integers(3, 10)), ["PER", "LOC"], rng) for _ in range(n)]
    pred = [random_bio(len(g), ["PER", "LOC"], rng) if rng.random() < 0.5 else list(g) for g in gold]
    return pred, gold


@pytest.mark.parametrize("seed", range(5))
def test_sentence_order_does_not_matter(seed):
    pred, gold = _corpus(seed)
    perm = np.random.default_rng(seed).permutation(len(gold))
    a = entity_f1(pred, gold)
    b = entity_f1([pred[k] for k in perm], [gold[k] for k in perm])
    assert a.f1 == pytest.approx(b.f1, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_scheme_invariance(seed):
    pred, gold = _corpus(seed)
    base = entity_f1(pred, gold, "BIO")
    for scheme in ("IOB1", "IOBES"):
        conv = entity_f1([convert_scheme(p, "BIO", scheme) for p in pred],
                         [convert_scheme(g, "BIO", scheme) for g in gold], scheme)
        assert conv.f1 == base.f1


# -- randomization test -------------------------------------------------------

def test_identical_systems_give_p_one():
    pred, gold = _corpus(0)
    assert randomization_test(pred, pred, gold, iterations=500) == 1.0


def test_randomization_is_deterministic_and_bounded():
    pred_a, gold = _corpus(1)
    pred_b, _ = _corpus(2)
    pred_b = [b if len(b) == len(g) else list(g) for b, g in zip(pred_b, gold)]
    p1 = randomization_test(pred_a, pred_b, gold, 2000, seed=3)
    p2 = randomization_test(pred_a, pred_b, gold, 2000, seed=3)
    assert p1 == p2 and 0 < p1 <= 1


@pytest.mark.parametrize("seed", range(6))
def test_matches_exhaustive_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(4, 11))
    gold = [random_bio(int(rng.integers(2, 7)), ["PER", "LOC"], rng, 0.5) for _ in range(n)]
    pa = [random_bio(len(g), ["PER", "LOC"], rng, 0.5) if rng.random() < 0.3 else list(g) for g in gold]
    pb = [random_bio(len(g), ["PER", "LOC"], rng, 0.5) if rng.random() < 0.6 else list(g) for g in gold]
    ca = [sentence_counts(p, g) for p, g in zip(pa, gold)]
    cb = [sentence_counts(p, g) for p, g in zip(pb, gold)]
    exact = exhaustive_swap_pvalue(ca, cb, f1_from_counts)
    approx = randomization_test(pa, pb, gold, iterations=10000, seed=seed)
    assert abs(approx - exact) <= 0.02


def test_p_shrinks_as_systems_diverge():
    rng = np.random.default_rng(7)
    gold = [random_bio(8, ["PER", "LOC"], rng, 0.5) for _ in range(60)]
    ps = []
    for k in (2, 5, 15):
        worse = [["O"] * len(g) if j < k else list(g) for j, g in enumerate(gold)]
        ps.append(randomization_test(gold, worse, gold, iterations=2000))
    assert ps[0] > ps[1] > ps[2]
    assert ps[2] < 0.01


def test_randomization_input_checks():
    with pytest.raises(ValueError):
        randomization_test([["O"]], [], [["O"]])
    with pytest.raises(ValueError):
        randomization_test([["O"]], [["O"]], [["O"]], iterations=0)
