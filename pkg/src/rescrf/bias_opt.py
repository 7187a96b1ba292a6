"""Per-label decode biases tuned against dev-set entity F1.

The base model stays frozen. Its dev lattices are computed once, and every
candidate bias vector is scored by a biased Viterbi pass plus entity F1.
Gradients come from central finite differences, one label at a time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import DataError, extract_entities
from .decoder import decode_lattices
from .evaluation import entity_f1
from .numerics import NonFiniteError, seeded_rng

BIAS_FLOOR = 1e-3
DEFAULT_EPSILONS = tuple(round(0.01 * k, 2) for k in range(1, 11))


@dataclass(frozen=True)
class BiasTrainConfig:
    learning_rate: float = 0.005
    epsilon_grid: tuple = DEFAULT_EPSILONS
    max_updates: int = 300
    patience: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not self.epsilon_grid or min(self.epsilon_grid) <= 0:
            raise ValueError("epsilon values must be positive")
        if self.max_updates < 0 or self.patience < 1:
            raise ValueError("max_updates must be >= 0 and patience >= 1")


@dataclass
class BiasStep:
    update: int
    epsilon: float
    bias: np.ndarray
    dev_f1: float

    def to_line(self, labels) -> str:
        record = {
            "update": self.update,
            "epsilon": self.epsilon,
            "dev_f1": self.dev_f1,
            "bias": {lab: float(v) for lab, v in zip(labels, self.bias)},
        }
        return json.dumps(record)


@dataclass
class BiasResult:
    bias: np.ndarray
    dev_f1: float
    baseline_f1: float
    trace: list = field(default_factory=list)


def f1_loss(f1: float) -> float:
    """``log2(1 - F1/100)``: 0 at F1=0, -1 at 50, -inf at 100."""
    if not 0.0 <= f1 <= 100.0:
        raise ValueError(f"F1 must be a percentage in [0, 100], got {f1}")
    if f1 == 100.0:
        return -math.inf
    return math.log2(1.0 - f1 / 100.0)


def fd_gradient(loss_fn, b, epsilon: float, skip=()) -> np.ndarray:
    """Coordinate-wise central differences with one shared step.

    Coordinates listed in ``skip`` keep gradient 0 and are never perturbed.
    """
    if epsilon == 0:
        raise ValueError("epsilon must be nonzero")
    b = np.asarray(b, dtype=np.float64)
    grad = np.zeros_like(b)
    for y in range(b.size):
        if y in skip:
            continue
        up = b.copy()
        up[y] += epsilon
        down = b.copy()
        down[y] -= epsilon
        f_up, f_down = loss_fn(up), loss_fn(down)
        if not (math.isfinite(f_up) and math.isfinite(f_down)):
            raise NonFiniteError(f"loss is not finite around coordinate {y}")
        # divide by the step actually taken, which b +/- epsilon may round
        grad[y] = (f_up - f_down) / (up[y] - down[y])
    return grad


class _Perfect(Exception):
    def __init__(self, bias):
        self.bias = bias


class DevObjective:
    """Dev-set F1 as a function of the bias vector, over cached lattices."""

    def __init__(self, model, dev_set, aux=None):
        golds = [s.labels for s in dev_set]
        if any(g is None for g in golds):
            raise DataError("every dev sentence needs gold labels")
        self.vocab = model.vocab
        if not any(extract_entities(g, self.vocab.scheme) for g in golds):
            raise DataError("dev set has no gold entities; F1 is undefined")
        self.golds = golds
        self.lattices = model.lattices(dev_set, aux)
        self.delta = model.decode_transitions()
        self.evaluations = 0

    @property
    def skip(self):
        return (self.vocab.begin, self.vocab.end)

    def f1(self, bias) -> float:
        self.evaluations += 1
        bias = np.maximum(np.asarray(bias, dtype=np.float64), BIAS_FLOOR)
        paths = decode_lattices(self.lattices, self.delta, bias)
        pred = [self.vocab.label_strings(p) for p in paths]
        return entity_f1(pred, self.golds, self.vocab.scheme).f1


def train_bias(model, dev_set, config: BiasTrainConfig = BiasTrainConfig(), aux=None,
               objective: DevObjective | None = None) -> BiasResult:
    """SGD on the bias vector with finite-difference gradients of the F1 loss.

    Each update draws its step ``epsilon`` from ``config.epsilon_grid``,
    moves ``b <- b - lr * grad`` and floors every entry at 1e-3. The best dev
    F1 seen (the all-ones start included) decides what is returned.
    """
    obj = objective or DevObjective(model, dev_set, aux)
    l = obj.vocab.num_labels
    b = np.ones(l)
    base = obj.f1(b)
    result = BiasResult(b.copy(), base, base)
    if base == 100.0:
        return result
    rng = seeded_rng(config.seed)
    grid = np.asarray(config.epsilon_grid, dtype=np.float64)

    def loss(v):
        f = obj.f1(v)
        if f == 100.0:
            raise _Perfect(np.maximum(v, BIAS_FLOOR))
        return f1_loss(f)

    stale = 0
    for t in range(config.max_updates):
        eps = float(grid[rng.integers(grid.size)])
        try:
            grad = fd_gradient(loss, b, eps, skip=obj.skip)
        except _Perfect as hit:
            result.bias, result.dev_f1 = hit.bias.copy(), 100.0
            result.trace.append(BiasStep(t, eps, hit.bias.copy(), 100.0))
            break
        b = np.maximum(b - config.learning_rate * grad, BIAS_FLOOR)
        b[list(obj.skip)] = 1.0
        f = obj.f1(b)
        result.trace.append(BiasStep(t, eps, b.copy(), f))
        if f > result.dev_f1:
            result.bias, result.dev_f1 = b.copy(), f
            stale = 0
        else:
            stale += 1
        if f == 100.0 or stale >= config.patience:
            break
    return result


@dataclass
class GridResult:
    best: float
    values: np.ndarray
    f1s: np.ndarray


def grid_values(lo: float, hi: float, step: float) -> np.ndarray:
    if not lo < hi or step <= 0:
        raise ValueError("need lo < hi and step > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 10)


def grid_search_bias(model, dev_set, label: str, lo: float = 0.5, hi: float = 1.5,
                     step: float = 0.1, aux=None, objective: DevObjective | None = None) -> GridResult:
    """Dev F1 for each value of one label's bias, all others held at 1.

    Ties go to the value closest to 1.0.
    """
    obj = objective or DevObjective(model, dev_set, aux)
    if label not in obj.vocab.real_labels:
        raise ValueError(f"unknown label {label!r}")
    idx = obj.vocab.labels[label]
    values = grid_values(lo, hi, step)
    if values.min() <= 0:
        raise ValueError("bias grid must stay positive")
    f1s = np.empty(values.size)
    for k, v in enumerate(values):
        b = np.ones(obj.vocab.num_labels)
        b[idx] = v
        f1s[k] = obj.f1(b)
    top = np.flatnonzero(f1s == f1s.max())
    best = values[min(top, key=lambda k: (abs(values[k] - 1.0), values[k]))]
    return GridResult(float(best), values, f1s)


# -- bias files -----------------------------------------------------------------

def format_bias(labels, bias) -> str:
    return "".join(f"{lab}\t{float(v)!r}\n" for lab, v in zip(labels, bias))


def write_bias(path, vocab, bias) -> None:
    bias = np.asarray(bias, dtype=np.float64)
    Path(path).write_text(format_bias(vocab.real_labels, bias[:-2]), encoding="utf-8")


def parse_bias(text: str, vocab) -> np.ndarray:
    """Full-length bias vector (begin/end = 1) from ``LABEL<TAB>value`` lines."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"bias line {lineno}: expected LABEL<TAB>value")
        lab, raw = parts
        try:
            v = float(raw)
        except ValueError:
            raise DataError(f"bias line {lineno}: bad value {raw!r}") from None
        if not v > 0 or not math.isfinite(v):
            raise DataError(f"bias line {lineno}: bias must be positive and finite")
        if lab in values:
            raise DataError(f"bias line {lineno}: duplicate label {lab}")
        values[lab] = v
    expected = set(vocab.real_labels)
    if set(values) != expected:
        missing = sorted(expected - set(values))
        extra = sorted(set(values) - expected)
        raise DataError(f"bias labels do not match the model: missing {missing}, unknown {extra}")
    b = np.ones(vocab.num_labels)
    for lab, v in values.items():
        b[vocab.labels[lab]] = v
    return b


def read_bias(path, vocab) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: {e}") from None
    return parse_bias(text, vocab)
