"""
Scoring, normalizing and decoding with a linear-chain CRF
==========================================================

A lattice holds one row of label scores per token. Transitions add a score
for every adjacent pair of labels, plus a begin and an end transition.
"""

import itertools

import numpy as np

from rescrf.crf import init_transitions, log_partition, marginals, score_sequence
from rescrf.decoder import viterbi

rng = np.random.default_rng(0)

# three real labels, plus the begin and end markers in the last two columns
labels = ["O", "B-PER", "I-PER"]
l = len(labels) + 2
lam = np.zeros((4, l))
lam[:, :3] = rng.normal(0, 1, (4, 3))
delta = init_transitions(l)          # zeros, with begin/end misuse forbidden
delta[0, 2] = delta[l - 2, 2] = -3.0  # O -> I-PER and begin -> I-PER are unlikely

# log Z sums exp(score) over all 3^4 sequences
print("log Z            :", log_partition(lam, delta))
brute = np.logaddexp.reduce([score_sequence(lam, delta, p)
                             for p in itertools.product(range(3), repeat=4)])
print("by enumeration   :", brute)

# per-token marginals; every row sums to one over the real labels
print("marginals:\n", np.round(marginals(lam, delta)[:, :3], 3))

# Viterbi picks the single best sequence
path, score = viterbi(lam, delta)
print("best path        :", [labels[y] for y in path], "score", round(score, 4))
