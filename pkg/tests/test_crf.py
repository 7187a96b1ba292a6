import math

import numpy as np
import pytest

from oracles import (
    all_paths,
    brute_log_partition,
    brute_marginals,
    naive_project,
    path_scores,
    random_instance,
)
from rescrf import numerics as nx
from rescrf.crf import (
    NEG_INF,
    bio_constraint_mask,
    crf_nll,
    init_transitions,
    log_partition,
    marginals,
    nll_loss,
    project,
    score_sequence,
)
from rescrf.numerics import ShapeError


def test_project_degenerate():
    W = np.zeros((4, 3))
    b = np.array([1.0, 2.0, 3.0, 4.0])
    lat = project(np.ones((5, 3)), W, b)
    assert np.array_equal(lat.scores, np.tile(b, (5, 1)))


def test_project_basis_probe(rng):
    W = rng.standard_normal((4, 3))
    b = rng.standard_normal(4)
    lat = project(np.eye(3), W, b)
    np.testing.assert_allclose(lat.scores, W.T + b, atol=1e-15)


def test_project_matches_naive_loop(rng):
    h, W, b = rng.standard_normal((3, 4)), rng.standard_normal((5, 4)), rng.standard_normal(5)
    np.testing.assert_allclose(project(h, W, b).scores, naive_project(h, W, b), rtol=0, atol=1e-14)


def test_project_shape_error():
    with pytest.raises(ShapeError):
        project(np.zeros((2, 3)), np.zeros((4, 2)), np.zeros(4))


def test_score_zero_everything():
    lam, delta = np.zeros((3, 4)), np.zeros((4, 4))
    assert score_sequence(lam, delta, [0, 1, 0]) == 0.0


def test_score_single_position(rng):
    lam, delta = random_instance(rng, n=1, num_real=3)
    expected = lam[0, 2] + delta[3, 2] + delta[2, 4]
    assert score_sequence(lam, delta, [2]) == pytest.approx(expected, abs=1e-14)


def test_score_matches_resummation(rng):
    lam, delta = random_instance(rng, n=4, num_real=3)
    Y = [0, 2, 1, 1]
    direct = sum(lam[i, y] for i, y in enumerate(Y)) + sum(
        delta[a, b] for a, b in zip([3] + Y, Y + [4]))
    assert score_sequence(lam, delta, Y) == pytest.approx(direct, abs=1e-12)


def test_score_rejects_bad_labels(rng):
    lam, delta = random_instance(rng, n=2, num_real=2)
    with pytest.raises(ValueError):
        score_sequence(lam, delta, [0, 2])  # 2 is the begin label
    with pytest.raises(ValueError):
        score_sequence(lam, delta, [0])


@pytest.mark.parametrize("n, expected", [(1, math.log(2)), (2, math.log(4))])
def test_log_partition_uniform(n, expected):
    lam, delta = np.zeros((n, 4)), np.zeros((4, 4))
    assert log_partition(lam, delta) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("seed", range(30))
def test_log_partition_matches_enumeration(seed):
    lam, delta = random_instance(np.random.default_rng(seed))
    ref = brute_log_partition(lam, delta)
    assert abs(log_partition(lam, delta) - ref) <= 1e-8 * max(1.0, abs(ref))


@pytest.mark.parametrize("seed", range(30))
def test_marginals_match_enumeration(seed):
    lam, delta = random_instance(np.random.default_rng(seed))
    m = marginals(lam, delta)
    np.testing.assert_allclose(m, brute_marginals(lam, delta), atol=1e-10, rtol=0)
    np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-10)


def test_marginals_uniform():
    m = marginals(np.zeros((3, 5)), np.zeros((5, 5)))
    np.testing.assert_allclose(m[:, :3], 1 / 3, atol=1e-15)
    assert np.all(m[:, 3:] == 0)


def test_marginals_single_position(rng):
    lam, delta = random_instance(rng, n=1, num_real=3)
    z = lam[0, :3] + delta[3, :3] + delta[:3, 4]
    soft = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
    np.testing.assert_allclose(marginals(lam, delta)[0, :3], soft, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_probabilities_sum_to_one(seed):
    lam, delta = random_instance(np.random.default_rng(seed))
    paths = all_paths(lam.shape[0], lam.shape[1] - 2)
    total = np.exp(path_scores(lam, delta, paths) - log_partition(lam, delta)).sum()
    assert total == pytest.approx(1.0, abs=1e-8)


def test_row_shift_moves_log_partition_only(rng):
    lam, delta = random_instance(rng, n=4, num_real=3)
    shifted = lam.copy()
    shifted[2] += 3.7
    assert log_partition(shifted, delta) == pytest.approx(log_partition(lam, delta) + 3.7, abs=1e-12)
    np.testing.assert_allclose(marginals(shifted, delta), marginals(lam, delta), atol=1e-12)


def test_nll_saturated():
    gold = [0, 2, 1]
    lam = np.full((3, 5), -50.0)
    lam[np.arange(3), gold] = 50.0
    loss, _, _ = nll_loss(lam, np.zeros((5, 5)), gold)
    assert 0 <= loss < 1e-10


@pytest.mark.parametrize("y", [0, 1])
def test_nll_uniform_single(y):
    loss, _, _ = nll_loss(np.zeros((1, 4)), np.zeros((4, 4)), [y])
    assert loss == pytest.approx(math.log(2), abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_nll_nonnegative_and_gradient(seed):
    rng = np.random.default_rng(seed)
    lam, delta = random_instance(rng, n=4, num_real=3)
    gold = list(rng.integers(0, 3, size=4))
    loss, d_lam, _ = nll_loss(lam, delta, gold)
    assert loss >= 0
    expected = marginals(lam, delta)
    expected[np.arange(4), gold] -= 1
    np.testing.assert_allclose(d_lam, expected, atol=1e-12)

    def f_lattice(x):
        return crf_nll(x, x.tape.constant(delta), gold)

    def f_delta(x):
        return crf_nll(x.tape.constant(lam), x, gold)

    assert nx.grad_check(f_lattice, lam, 1e-5) < 1e-4
    assert nx.grad_check(f_delta, delta, 1e-5) < 1e-4


def test_bio_mask():
    labels = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC", "<begin>", "<end>"]
    mask = bio_constraint_mask(labels)
    assert mask[0, 2] == NEG_INF  # O -> I-PER
    assert mask[3, 2] == NEG_INF  # B-LOC -> I-PER
    assert mask[5, 4] == NEG_INF  # begin -> I-LOC
    assert mask[1, 2] == 0 and mask[2, 2] == 0 and mask[0, 1] == 0


def test_init_transitions_sentinels():
    d = init_transitions(5)
    assert np.all(d[:, 3] == NEG_INF) and np.all(d[4, :] == NEG_INF)
    assert np.all(d[:3, :3] == 0) and np.all(d[3, :3] == 0) and np.all(d[:3, 4] == 0)
