"""SGD-with-momentum training of the tagger, and checkpoint files.

Checkpoint byte layout (all integers little-endian)::

    8 bytes   magic b"RESCRF\\x00\\x01"
    u32       format version
    u32 n, n bytes   header JSON (encoder config, sizes, dev F1, array count)
    u32 n, n bytes   vocabulary JSON (scheme, words, chars, labels)
    then per parameter array, in Tagger.param_shapes order:
        u16 n, n bytes   name
        u8  ndim, ndim x u32 extents
        float64 data, row-major
"""

from __future__ import annotations

import copy
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corpus import EmbeddingTable, Sentence, Vocabulary, build_vocabulary
from .encoder import EncoderConfig
from .evaluation import entity_f1
from .model import Tagger
from .numerics import NonFiniteError, seeded_rng

MAGIC = b"RESCRF\x00\x01"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class TrainingError(NonFiniteError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    momentum: float = 0.9
    clip_norm: float = 5.0
    epochs: int = 100
    batch_size: int = 1
    patience: int = 10
    seed: int = 0
    eval_train: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs >= 0, batch_size >= 1 and patience >= 1 required")


@dataclass
class Checkpoint:
    tagger: Tagger
    dev_f1: float
    version: int = FORMAT_VERSION


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    dev_f1: float
    train_f1: float | None = None

    def to_line(self) -> str:
        return json.dumps(asdict(self))


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    trace: list = field(default_factory=list)


class MomentumSGD:
    """``v <- mu * v + g; theta <- theta - lr * v`` with global-norm clipping."""

    def __init__(self, params: dict, lr: float, momentum: float, clip_norm: float):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict) -> None:
        for k, g in clip_by_global_norm(grads, self.clip_norm).items():
            v = self.velocity[k]
            v *= self.momentum
            v += g
            self.params[k] -= self.lr * v


def global_norm(grads: dict) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(grads: dict, clip_norm: float) -> dict:
    norm = global_norm(grads)
    if norm <= clip_norm:
        return grads
    return {k: g * (clip_norm / norm) for k, g in grads.items()}


def dev_score(tagger: Tagger, sentences, aux=None) -> float:
    if not sentences:
        return 0.0
    pred = tagger.tag(sentences, aux=aux)
    return entity_f1(pred, [s.labels for s in sentences], tagger.vocab.scheme).f1


def train(train_set: list[Sentence], dev_set: list[Sentence], config: TrainConfig = TrainConfig(),
          encoder: EncoderConfig = EncoderConfig(), vocab: Vocabulary | None = None,
          embeddings: EmbeddingTable | None = None, constrained: bool = False,
          train_aux=None, dev_aux=None, log=None) -> TrainResult:
    """Train on ``train_set``, keeping the parameters with the best dev F1.

    ``log`` is called with each :class:`EpochRecord` as it is produced.
    """
    if not train_set or not dev_set:
        raise ValueError("train and dev sets must be non-empty")
    vocab = vocab or build_vocabulary(train_set)
    tagger = Tagger.initialize(encoder, vocab, config.seed, embeddings, constrained)
    rng = seeded_rng(config.seed + 1)
    opt = MomentumSGD(tagger.params, config.learning_rate, config.momentum, config.clip_norm)
    best = Checkpoint(copy.deepcopy(tagger), dev_score(tagger, dev_set, dev_aux))
    trace = []
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            acc = None
            for idx in batch:
                aux = train_aux[idx] if train_aux is not None else None
                loss, grads = tagger.loss_and_grads(train_set[idx], aux, train=True, rng=rng)
                if not math.isfinite(loss):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, sentence {idx}")
                total += loss
                if acc is None:
                    acc = grads
                else:
                    for k in acc:
                        acc[k] += grads[k]
            if len(batch) > 1:
                acc = {k: g / len(batch) for k, g in acc.items()}
            opt.step(acc)
        dev_f1 = dev_score(tagger, dev_set, dev_aux)
        train_f1 = dev_score(tagger, train_set, train_aux) if config.eval_train else None
        rec = EpochRecord(epoch, total / len(train_set), dev_f1, train_f1)
        trace.append(rec)
        if log is not None:
            log(rec)
        if dev_f1 > best.dev_f1:
            best = Checkpoint(copy.deepcopy(tagger), dev_f1)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return TrainResult(best, trace)


# -- checkpoint container -----------------------------------------------------

def _block(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    t = ckpt.tagger
    shapes = Tagger.param_shapes(t.config, t.vocab)
    header = {
        "encoder": t.config.to_dict(),
        "constrained": t.constrained,
        "dev_f1": ckpt.dev_f1,
        "num_words": len(t.vocab.words),
        "num_chars": len(t.vocab.chars),
        "num_labels": t.vocab.num_labels,
        "num_arrays": len(shapes),
    }
    out = [MAGIC, struct.pack("<I", FORMAT_VERSION),
           _block(json.dumps(header, sort_keys=True).encode()),
           _block(json.dumps(t.vocab.to_dict(), ensure_ascii=False).encode())]
    for name, shape in shapes.items():
        arr = np.ascontiguousarray(t.params[name], dtype="<f8")
        if arr.shape != tuple(shape):
            raise CheckpointError(f"{name}: shape {arr.shape}, expected {tuple(shape)}")
        raw = name.encode()
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(checkpoint_bytes(ckpt))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(r.take(r.unpack("<I")[0]))
        vocab = Vocabulary.from_dict(json.loads(r.take(r.unpack("<I")[0])))
        config = EncoderConfig(**header["encoder"])
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from None
    if (len(vocab.words), len(vocab.chars), vocab.num_labels) != \
            (header["num_words"], header["num_chars"], header["num_labels"]):
        raise CheckpointError("vocabulary sizes disagree with the header")
    shapes = Tagger.param_shapes(config, vocab)
    if header["num_arrays"] != len(shapes):
        raise CheckpointError(f"expected {len(shapes)} arrays, header says {header['num_arrays']}")
    params = {}
    for name, shape in shapes.items():
        got = r.take(r.unpack("<H")[0]).decode()
        if got != name:
            raise CheckpointError(f"expected array {name!r}, found {got!r}")
        (ndim,) = r.unpack("<B")
        dims = r.unpack(f"<{ndim}I")
        if tuple(dims) != tuple(shape):
            raise CheckpointError(f"{name}: stored shape {dims}, expected {tuple(shape)}")
        count = int(np.prod(dims))
        params[name] = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(dims)
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after the last array")
    tagger = Tagger(config, vocab, params, bool(header["constrained"]))
    return Checkpoint(tagger, float(header["dev_f1"]), version)


def load_checkpoint(path) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())
