"""Linear-chain CRF over a lattice of observation scores.

Label layout: with ``l`` labels in total, ids ``0..l-3`` are real labels,
``l-2`` is the sequence-begin label and ``l-1`` the sequence-end label.
Positions only ever take real labels; begin/end enter through the
transition matrix alone (``delta[begin, y0]`` and ``delta[y_last, end]``),
and their lattice columns are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ShapeError, Var, logsumexp_array

NEG_INF = -1e4


@dataclass
class ScoreLattice:
    scores: np.ndarray  # n x l

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2 or self.scores.shape[1] < 3:
            raise ShapeError("lattice", self.scores.shape)

    @property
    def n(self):
        return self.scores.shape[0]

    @property
    def l(self):
        return self.scores.shape[1]


def init_transitions(num_labels: int) -> np.ndarray:
    """Zero transitions with the forbidden begin/end directions sentineled."""
    delta = np.zeros((num_labels, num_labels))
    forbid_begin_end(delta)
    return delta


def forbid_begin_end(delta: np.ndarray) -> np.ndarray:
    begin, end = delta.shape[0] - 2, delta.shape[0] - 1
    delta[:, begin] = NEG_INF
    delta[end, :] = NEG_INF
    return delta


def bio_constraint_mask(label_strings) -> np.ndarray:
    """Additive mask forbidding transitions that break BIO.

    ``label_strings`` lists every label including begin and end (last two).
    Forbidden: begin -> I-X, O -> I-X, and B-Y/I-Y -> I-X for Y != X.
    """
    l = len(label_strings)
    mask = np.zeros((l, l))
    begin = l - 2
    for j, lab in enumerate(label_strings[:-2]):
        if not lab.startswith("I-"):
            continue
        etype = lab[2:]
        for i, prev in enumerate(label_strings[:-2]):
            ok = prev in (f"B-{etype}", f"I-{etype}")
            if not ok:
                mask[i, j] = NEG_INF
        mask[begin, j] = NEG_INF
    return mask


def _check(lattice, delta):
    lam = np.asarray(lattice, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if lam.ndim != 2 or lam.shape[1] < 3 or delta.shape != (lam.shape[1], lam.shape[1]):
        raise ShapeError("crf", lam.shape, delta.shape)
    return lam, delta


def project(h, W_p, b_p) -> ScoreLattice:
    """Observation scores ``lambda_i = W_p h_i + b_p`` for every position."""
    h, W_p, b_p = (np.asarray(a, dtype=np.float64) for a in (h, W_p, b_p))
    if h.ndim != 2 or W_p.ndim != 2 or W_p.shape[1] != h.shape[1] or b_p.shape != (W_p.shape[0],):
        raise ShapeError("project", h.shape, W_p.shape, b_p.shape)
    return ScoreLattice(h @ W_p.T + b_p)


def score_sequence(lattice, delta, labels) -> float:
    """Unnormalized score of one label sequence, begin/end included.

    Summation runs left to right in the same order as :func:`viterbi`, so the
    two agree bit for bit on the decoded path.
    """
    lam, delta = _check(lattice, delta)
    labels = [int(y) for y in labels]
    n, l = lam.shape
    if len(labels) != n or any(y < 0 or y >= l - 2 for y in labels):
        raise ValueError(f"invalid label sequence {labels} for {n} positions, {l - 2} real labels")
    begin, end = l - 2, l - 1
    s = delta[begin, labels[0]] + lam[0, labels[0]]
    for j in range(1, n):
        s = s + delta[labels[j - 1], labels[j]] + lam[j, labels[j]]
    return float(s + delta[labels[-1], end])


def forward_backward(lattice, delta):
    """Log-space alpha/beta tables over real labels, and log Z."""
    lam, delta = _check(lattice, delta)
    n, l = lam.shape
    L = l - 2
    trans = delta[:L, :L]
    alpha = np.empty((n, L))
    beta = np.empty((n, L))
    alpha[0] = delta[L, :L] + lam[0, :L]
    for j in range(1, n):
        alpha[j] = logsumexp_array(alpha[j - 1][:, None] + trans, axis=0) + lam[j, :L]
    beta[n - 1] = delta[:L, L + 1]
    for j in range(n - 2, -1, -1):
        beta[j] = logsumexp_array(trans + (lam[j + 1, :L] + beta[j + 1])[None, :], axis=1)
    log_z = float(logsumexp_array(alpha[n - 1] + beta[n - 1]))
    return alpha, beta, log_z


def log_partition(lattice, delta) -> float:
    return forward_backward(lattice, delta)[2]


def marginals(lattice, delta) -> np.ndarray:
    """Per-position label probabilities (n x l; begin/end columns are 0)."""
    lam, _ = _check(lattice, delta)
    alpha, beta, log_z = forward_backward(lattice, delta)
    out = np.zeros_like(lam)
    out[:, :-2] = np.exp(alpha + beta - log_z)
    return out


def expected_transitions(lattice, delta) -> np.ndarray:
    """Expected count of every transition (l x l) under the model."""
    lam, delta = _check(lattice, delta)
    alpha, beta, log_z = forward_backward(lam, delta)
    n, l = lam.shape
    L = l - 2
    counts = np.zeros((l, l))
    for j in range(n - 1):
        pair = alpha[j][:, None] + delta[:L, :L] + (lam[j + 1, :L] + beta[j + 1])[None, :]
        counts[:L, :L] += np.exp(pair - log_z)
    counts[L, :L] = np.exp(alpha[0] + beta[0] - log_z)
    counts[:L, L + 1] = np.exp(alpha[n - 1] + beta[n - 1] - log_z)
    return counts


def nll_loss(lattice, delta, gold):
    """Negative log-likelihood of ``gold`` with gradients.

    Returns ``(loss, d_lattice, d_delta)``.
    """
    lam, delta = _check(lattice, delta)
    gold = [int(y) for y in gold]
    n, l = lam.shape
    loss = log_partition(lam, delta) - score_sequence(lam, delta, gold)
    d_lam = marginals(lam, delta)
    d_lam[np.arange(n), gold] -= 1.0
    d_delta = expected_transitions(lam, delta)
    path = [l - 2] + gold + [l - 1]
    for a, b in zip(path[:-1], path[1:]):
        d_delta[a, b] -= 1.0
    # rounding dips below zero when one path carries all the mass
    return max(loss, 0.0), d_lam, d_delta


def crf_nll(lattice: Var, delta: Var, gold) -> Var:
    """Tape kernel for :func:`nll_loss`; the backward uses forward-backward."""
    loss, d_lam, d_delta = nll_loss(lattice.value, delta.value, gold)
    return lattice.tape.record(
        np.array(loss), (lattice, delta),
        lambda g: (float(g) * d_lam, float(g) * d_delta),
    )
