"""Synthetic corpora and lattice models for smoke tests and demos."""

from __future__ import annotations

import numpy as np

from .corpus import Sentence, Vocabulary, build_vocabulary
from .crf import NEG_INF, forbid_begin_end
from .numerics import seeded_rng

FIRST = ["john", "mary", "ahmed", "li", "olga", "pedro", "anna", "kofi", "yuki", "ravi"]
LAST = ["smith", "garcia", "chen", "novak", "okafor", "tanaka", "silva", "kumar"]
CITIES = [["paris"], ["lagos"], ["lima"], ["oslo"], ["new", "york"], ["hong", "kong"],
          ["cape", "town"], ["berlin"]]
ORGS = [["acme"], ["globex"], ["initech"], ["united", "nations"], ["red", "cross"],
        ["umbrella", "corp"]]

TEMPLATES = [
    "PER lives in LOC .",
    "ORG hired PER last week .",
    "the mayor of LOC met PER .",
    "PER works for ORG in LOC .",
    "shares of ORG fell sharply .",
    "PER flew from LOC to LOC .",
    "a spokesman for ORG said nothing .",
]


def _title(words):
    return [w.capitalize() for w in words]


def pattern_corpus(num_sentences: int, seed: int = 0) -> list[Sentence]:
    """Template sentences whose entities come from closed name lists (BIO)."""
    rng = seeded_rng(seed)
    out = []
    for _ in range(num_sentences):
        template = TEMPLATES[rng.integers(len(TEMPLATES))].split()
        words, labels = [], []
        for slot in template:
            if slot == "PER":
                ent = [FIRST[rng.integers(len(FIRST))]]
                if rng.random() < 0.5:
                    ent.append(LAST[rng.integers(len(LAST))])
            elif slot == "LOC":
                ent = CITIES[rng.integers(len(CITIES))]
            elif slot == "ORG":
                ent = ORGS[rng.integers(len(ORGS))]
            else:
                words.append(slot)
                labels.append("O")
                continue
            words.extend(_title(ent))
            labels.extend([f"B-{slot}"] + [f"I-{slot}"] * (len(ent) - 1))
        out.append(Sentence(words, labels))
    return out


def random_bio(length: int, types, rng, entity_rate: float = 0.3) -> list[str]:
    labels = []
    k = 0
    while k < length:
        if rng.random() < entity_rate:
            t = types[rng.integers(len(types))]
            span = min(length - k, 1 + int(rng.integers(3)))
            labels.extend([f"B-{t}"] + [f"I-{t}"] * (span - 1))
            k += span
        else:
            labels.append("O")
            k += 1
    return labels


class FixedLatticeModel:
    """Stand-in model that returns precomputed lattices for known sentences."""

    def __init__(self, vocab: Vocabulary, sentences, lattices, transitions):
        self.vocab = vocab
        self._table = {s: np.asarray(lam, dtype=np.float64) for s, lam in zip(sentences, lattices)}
        self.transitions = np.asarray(transitions, dtype=np.float64)

    def lattices(self, sentences, aux=None):
        return [self._table[s] for s in sentences]

    def decode_transitions(self):
        return self.transitions


def deflated_o_model(num_sentences: int = 300, deflation: float = 0.7, noise: float = 0.6,
                     margin: float = 1.0, seed: int = 0):
    """A lattice model whose O column is scaled down by ``deflation``.

    Gold labels score ``2 + margin`` plus Gaussian noise, other labels ``2``
    plus noise, so all scores are positive and the miscalibration is undone
    by an O bias near ``1 / deflation``. Returns ``(model, sentences)``.
    """
    rng = seeded_rng(seed)
    sentences = []
    for i in range(num_sentences):
        n = 4 + int(rng.integers(8))
        labels = random_bio(n, ["PER", "LOC"], rng)
        words = [f"w{i}_{k}" for k in range(n)]
        sentences.append(Sentence(words, labels))
    vocab = build_vocabulary(sentences)
    l = vocab.num_labels
    o = vocab.labels["O"]
    lattices = []
    for s in sentences:
        gold = vocab.label_ids(s.labels)
        lam = 2.0 + noise * rng.standard_normal((len(s), l))
        lam[np.arange(len(s)), gold] += margin
        lam[:, o] *= deflation
        lam[:, -2:] = 0.0
        lattices.append(lam)
    delta = np.zeros((l, l))
    for j, lab in enumerate(vocab.real_labels):
        if lab.startswith("I-"):
            for i, prev in enumerate(vocab.real_labels):
                if prev not in (f"B-{lab[2:]}", lab):
                    delta[i, j] = -3.0
            delta[l - 2, j] = -3.0
    forbid_begin_end(delta)
    assert delta[l - 1, 0] == NEG_INF
    return FixedLatticeModel(vocab, sentences, lattices, delta), sentences
