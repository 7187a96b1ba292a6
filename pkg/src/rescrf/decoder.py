"""Viterbi decoding, plain and with per-label multiplicative bias."""

from __future__ import annotations

import numpy as np

from .crf import _check


def viterbi(lattice, delta):
    """Best label sequence and its score.

    Ties go to the lowest label id at every argmax.
    """
    lam, delta = _check(lattice, delta)
    n, l = lam.shape
    L = l - 2
    trans = delta[:L, :L]
    back = np.zeros((n, L), dtype=np.intp)
    score = delta[L, :L] + lam[0, :L]
    for j in range(1, n):
        cand = score[:, None] + trans
        back[j] = np.argmax(cand, axis=0)
        score = cand[back[j], np.arange(L)] + lam[j, :L]
    final = score + delta[:L, L + 1]
    best = int(np.argmax(final))
    path = [best]
    for j in range(n - 1, 0, -1):
        best = int(back[j, best])
        path.append(best)
    path.reverse()
    return path, float(final[path[-1]])


def check_bias(bias, num_labels: int) -> np.ndarray:
    bias = np.asarray(bias, dtype=np.float64)
    if bias.shape != (num_labels,):
        raise ValueError(f"bias must have {num_labels} entries, got shape {bias.shape}")
    if not np.all(bias > 0):
        raise ValueError("bias entries must be positive")
    return bias


def biased_viterbi(lattice, delta, bias):
    """Viterbi on the lattice with every column scaled by its label's bias.

    Transitions are never scaled. The all-ones bias is the identity.
    """
    lam, delta = _check(lattice, delta)
    bias = check_bias(bias, lam.shape[1])
    return viterbi(lam * bias[None, :], delta)


def decode_dataset(model, sentences, bias=None, aux=None) -> list[list[int]]:
    """Decode every sentence independently; returns label ids per sentence.

    ``model`` needs ``lattices(sentences, aux)`` and ``decode_transitions()``.
    """
    if not sentences:
        return []
    lattices = model.lattices(sentences, aux)
    return decode_lattices(lattices, model.decode_transitions(), bias)


def viterbi_batch(lattices, delta):
    """Viterbi over a stack of equal-length lattices (B x n x l).

    Same arithmetic, in the same order, as :func:`viterbi`.
    """
    lam = np.asarray(lattices, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    B, n, l = lam.shape
    L = l - 2
    trans = delta[:L, :L]
    back = np.zeros((B, n, L), dtype=np.intp)
    score = delta[L, :L] + lam[:, 0, :L]
    cols = np.arange(L)
    rows = np.arange(B)[:, None]
    for j in range(1, n):
        cand = score[:, :, None] + trans
        back[:, j] = np.argmax(cand, axis=1)
        score = cand[rows, back[:, j], cols] + lam[:, j, :L]
    final = score + delta[:L, L + 1]
    best = np.argmax(final, axis=1)
    paths = np.empty((B, n), dtype=np.intp)
    paths[:, n - 1] = best
    for j in range(n - 1, 0, -1):
        best = back[np.arange(B), j, best]
        paths[:, j - 1] = best
    return paths, final[np.arange(B), paths[:, n - 1]]


def decode_lattices(lattices, delta, bias=None) -> list[list[int]]:
    """Decode many lattices, batching sentences of equal length."""
    delta = np.asarray(delta, dtype=np.float64)
    if bias is not None and len(lattices):
        bias = check_bias(bias, np.shape(lattices[0])[1])
    by_len: dict[int, list[int]] = {}
    for k, lam in enumerate(lattices):
        by_len.setdefault(len(lam), []).append(k)
    out: list = [None] * len(lattices)
    for members in by_len.values():
        stack = np.stack([_check(lattices[k], delta)[0] for k in members])
        if bias is not None:
            stack = stack * bias
        paths, _ = viterbi_batch(stack, delta)
        for k, p in zip(members, paths):
            out[k] = [int(y) for y in p]
    return out
