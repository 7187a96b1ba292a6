"""Brute-force reference computations, independent of the package's DP code."""

import itertools
import math

import numpy as np


def all_paths(n, num_real):
    return np.array(list(itertools.product(range(num_real), repeat=n)), dtype=np.intp)


def path_scores(lam, delta, paths):
    """Score of every path, accumulated left to right (begin, obs/trans..., end)."""
    l = lam.shape[1]
    begin, end = l - 2, l - 1
    n = paths.shape[1]
    total = delta[begin, paths[:, 0]] + lam[0, paths[:, 0]]
    for j in range(1, n):
        total = total + delta[paths[:, j - 1], paths[:, j]] + lam[j, paths[:, j]]
    return total + delta[paths[:, -1], end]


def brute_log_partition(lam, delta):
    paths = all_paths(lam.shape[0], lam.shape[1] - 2)
    s = path_scores(lam, delta, paths)
    m = s.max()
    return m + math.log(np.exp(s - m).sum())


def brute_marginals(lam, delta):
    n, l = lam.shape
    paths = all_paths(n, l - 2)
    s = path_scores(lam, delta, paths)
    w = np.exp(s - s.max())
    w /= w.sum()
    out = np.zeros((n, l))
    for j in range(n):
        np.add.at(out[j], paths[:, j], w)
    return out


def brute_argmax(lam, delta):
    """Best score and the first path (lexicographic order) achieving it."""
    paths = all_paths(lam.shape[0], lam.shape[1] - 2)
    s = path_scores(lam, delta, paths)
    k = int(np.argmax(s))
    return list(paths[k]), float(s[k])


def naive_project(h, W, b):
    n, d = h.shape
    l = W.shape[0]
    out = np.zeros((n, l))
    for i in range(n):
        for y in range(l):
            acc = b[y]
            for k in range(d):
                acc += W[y, k] * h[i, k]
            out[i, y] = acc
    return out


def random_instance(rng, n=None, num_real=None):
    n = n or int(rng.integers(1, 7))
    num_real = num_real or int(rng.integers(1, 6))
    l = num_real + 2
    lam = rng.normal(0, 1.5, (n, l))
    delta = rng.normal(0, 1.0, (l, l))
    delta[:, l - 2] = -1e4
    delta[l - 1, :] = -1e4
    return lam, delta


def exhaustive_swap_pvalue(f1_a_counts, f1_b_counts, f1_fn):
    """Exact randomization p over all 2^n sentence swap patterns (no smoothing)."""
    a = np.asarray(f1_a_counts, dtype=float)
    b = np.asarray(f1_b_counts, dtype=float)
    n = len(a)
    observed = abs(f1_fn(a.sum(0)) - f1_fn(b.sum(0)))
    hits = 0
    for mask in itertools.product([False, True], repeat=n):
        m = np.array(mask)[:, None]
        sa = np.where(m, b, a).sum(0)
        sb = np.where(m, a, b).sum(0)
        if abs(f1_fn(sa) - f1_fn(sb)) >= observed - 1e-9:
            hits += 1
    return hits / 2 ** n


def f1_from_counts(c):
    correct, pred, gold = c
    p = correct / pred if pred else 0.0
    r = correct / gold if gold else 0.0
    return 100 * 2 * p * r / (p + r) if p + r else 0.0
