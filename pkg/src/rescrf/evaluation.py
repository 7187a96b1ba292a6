"""Entity-level precision/recall/F1 (conlleval semantics) and significance."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import extract_entities
from .numerics import seeded_rng


def prf(correct, predicted, gold):
    """Percent precision, recall and F1; zero denominators give 0."""
    p = 100.0 * correct / predicted if predicted else 0.0
    r = 100.0 * correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    num_gold: int
    num_predicted: int
    num_correct: int
    token_accuracy: float
    num_tokens: int
    per_type: dict = field(default_factory=dict)  # type -> (P, R, F1, gold, pred, correct)

    def text(self) -> str:
        """conlleval-style block."""
        lines = [
            f"processed {self.num_tokens} tokens with {self.num_gold} phrases; "
            f"found: {self.num_predicted} phrases; correct: {self.num_correct}.",
            f"accuracy: {self.token_accuracy:6.2f}%; precision: {self.precision:6.2f}%; "
            f"recall: {self.recall:6.2f}%; FB1: {self.f1:6.2f}",
        ]
        for t, (p, r, f, _, npred, _) in sorted(self.per_type.items()):
            lines.append(f"{t:>17}: precision: {p:6.2f}%; recall: {r:6.2f}%; FB1: {f:6.2f}  {npred}")
        return "\n".join(lines)

    def summary_line(self) -> str:
        """Machine-readable ``key: value`` pairs on one line."""
        return (f"precision: {self.precision:.4f} recall: {self.recall:.4f} f1: {self.f1:.4f} "
                f"gold: {self.num_gold} predicted: {self.num_predicted} "
                f"correct: {self.num_correct} accuracy: {self.token_accuracy:.4f}")


def sentence_counts(pred, gold, scheme="BIO"):
    """(correct, predicted, gold) entity counts for one sentence."""
    if len(pred) != len(gold):
        raise ValueError(f"prediction has {len(pred)} labels, gold has {len(gold)}")
    p = set(extract_entities(pred, scheme))
    g = set(extract_entities(gold, scheme))
    return len(p & g), len(p), len(g)


def entity_f1(pred, gold, scheme: str = "BIO") -> EvalReport:
    """Score aligned lists of label sequences (one list per sentence).

    An entity is correct only when start, end and type all match.
    """
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sentences vs {len(gold)} gold sentences")
    by_type = Counter()
    tokens = right = 0
    for i, (ps, gs) in enumerate(zip(pred, gold)):
        if len(ps) != len(gs):
            raise ValueError(f"sentence {i}: prediction has {len(ps)} labels, gold has {len(gs)}")
        p = set(extract_entities(ps, scheme))
        g = set(extract_entities(gs, scheme))
        for e in p:
            by_type[e.type, "pred"] += 1
        for e in g:
            by_type[e.type, "gold"] += 1
        for e in p & g:
            by_type[e.type, "correct"] += 1
        tokens += len(gs)
        right += sum(a == b for a, b in zip(ps, gs))
    types = sorted({t for t, _ in by_type})
    per_type = {}
    for t in types:
        c, np_, ng = by_type[t, "correct"], by_type[t, "pred"], by_type[t, "gold"]
        per_type[t] = (*prf(c, np_, ng), ng, np_, c)
    c = sum(by_type[t, "correct"] for t in types)
    npred = sum(by_type[t, "pred"] for t in types)
    ngold = sum(by_type[t, "gold"] for t in types)
    p, r, f = prf(c, npred, ngold)
    acc = 100.0 * right / tokens if tokens else 0.0
    return EvalReport(p, r, f, ngold, npred, c, acc, tokens, per_type)


def _f1_from_counts(counts):
    # counts: (..., 3) arrays of correct, predicted, gold
    c, p, g = counts[..., 0], counts[..., 1], counts[..., 2]
    prec = np.divide(c, p, out=np.zeros_like(c, dtype=float), where=p > 0)
    rec = np.divide(c, g, out=np.zeros_like(c, dtype=float), where=g > 0)
    s = prec + rec
    return 100.0 * np.divide(2 * prec * rec, s, out=np.zeros_like(s), where=s > 0)


def randomization_test(pred_a, pred_b, gold, iterations: int = 10000, seed: int = 0,
                       scheme: str = "BIO") -> float:
    """Approximate randomization p-value for the F1 difference of two systems.

    Each iteration swaps the systems' outputs on every sentence independently
    with probability 1/2 and recomputes |F1_A - F1_B|. The p-value is
    ``(count(shuffled >= observed) + 1) / (iterations + 1)``.
    """
    if not len(pred_a) == len(pred_b) == len(gold):
        raise ValueError("systems and gold must cover the same sentences")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    ca = np.array([sentence_counts(p, g, scheme) for p, g in zip(pred_a, gold)], dtype=float)
    cb = np.array([sentence_counts(p, g, scheme) for p, g in zip(pred_b, gold)], dtype=float)
    ca = ca.reshape(-1, 3)
    cb = cb.reshape(-1, 3)
    observed = abs(_f1_from_counts(ca.sum(0)) - _f1_from_counts(cb.sum(0)))
    rng = seeded_rng(seed)
    hits = 0
    chunk = 1000
    for start in range(0, iterations, chunk):
        k = min(chunk, iterations - start)
        swap = rng.random((k, len(gold))) < 0.5
        sa = np.where(swap[..., None], cb, ca).sum(axis=1)
        sb = np.where(swap[..., None], ca, cb).sum(axis=1)
        diff = np.abs(_f1_from_counts(sa) - _f1_from_counts(sb))
        # tolerance guards float noise when the swap leaves the diff unchanged
        hits += int(np.sum(diff >= observed - 1e-9))
    return (hits + 1) / (iterations + 1)
