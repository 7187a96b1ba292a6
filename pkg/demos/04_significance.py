"""
Is system A really better than system B?
=========================================

The approximate randomization test swaps the two systems' outputs on random
sentences and counts how often the shuffled F1 gap is at least as large as
the observed one.
"""

import numpy as np

from rescrf.evaluation import entity_f1, randomization_test
from rescrf.synthetic import random_bio

rng = np.random.default_rng(3)
gold = [random_bio(10, ["PER", "LOC", "ORG"], rng, 0.4) for _ in range(80)]


def noisy(rate):
    # replace a sentence's labels with random ones at the given rate
    return [random_bio(len(g), ["PER", "LOC", "ORG"], rng, 0.4) if rng.random() < rate else list(g)
            for g in gold]


a, b, c = noisy(0.20), noisy(0.25), noisy(0.50)
for name, pred in (("A", a), ("B", b), ("C", c)):
    print(name, "F1", round(entity_f1(pred, gold).f1, 2))

print("p(A vs B) =", round(randomization_test(a, b, gold, 10000, seed=0), 4))
print("p(A vs C) =", round(randomization_test(a, c, gold, 10000, seed=0), 4))
print("p(A vs A) =", randomization_test(a, a, gold, 1000, seed=0))
