"""Character biLSTM word features and the stacked residual biLSTM encoder.

Every recurrent layer is a biLSTM whose per-position output is the forward
and backward hidden states concatenated. Layers above the first read the
previous layer's output with the original word features appended,
``[h; x]``; the last layer's output goes to the CRF as is.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import numerics as nx
from .numerics import ShapeError, Tape, Var


@dataclass(frozen=True)
class EncoderConfig:
    char_emb_dim: int = 25
    char_hidden_dim: int = 25
    word_emb_dim: int = 100
    word_hidden_dim: int = 100
    num_layers: int = 3
    aux_dim: int = 0
    dropout: float = 0.0

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        for name in ("char_emb_dim", "char_hidden_dim", "word_emb_dim", "word_hidden_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.aux_dim < 0:
            raise ValueError("aux_dim must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def feature_dim(self) -> int:
        return 2 * self.char_hidden_dim + self.word_emb_dim + self.aux_dim

    @property
    def output_dim(self) -> int:
        return 2 * self.word_hidden_dim

    def layer_input_dim(self, m: int) -> int:
        if m == 0:
            return self.feature_dim
        return self.output_dim + self.feature_dim

    def to_dict(self):
        return asdict(self)


def lstm_shapes(prefix, input_dim, hidden):
    return {
        f"{prefix}.W_x": (input_dim, 4 * hidden),
        f"{prefix}.W_h": (hidden, 4 * hidden),
        f"{prefix}.b": (4 * hidden,),
    }


def encoder_shapes(config: EncoderConfig, num_words: int, num_chars: int) -> dict:
    """Parameter names and shapes, in serialization order."""
    shapes = {"char_emb": (num_chars, config.char_emb_dim)}
    for d in ("fw", "bw"):
        shapes.update(lstm_shapes(f"char_{d}", config.char_emb_dim, config.char_hidden_dim))
    shapes["word_emb"] = (num_words, config.word_emb_dim)
    for m in range(config.num_layers):
        for d in ("fw", "bw"):
            shapes.update(lstm_shapes(f"layer{m}_{d}", config.layer_input_dim(m),
                                      config.word_hidden_dim))
    return shapes


def init_encoder(config, num_words, num_chars, rng) -> dict:
    params = {}
    for name, shape in encoder_shapes(config, num_words, num_chars).items():
        if name.endswith("_emb"):
            params[name] = nx.embedding_init(rng, shape)
        elif name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = nx.uniform_fan_init(rng, shape)
    return params


# -- recurrent layers ------------------------------------------------------------

def lstm(P: dict, prefix: str, X: Var, batch: int) -> list[Var]:
    """Run one LSTM over ``X`` (time-major, ``steps * batch`` rows).

    Returns the hidden state after every step, each ``batch x hidden``.
    """
    W_x, W_h, b = P[f"{prefix}.W_x"], P[f"{prefix}.W_h"], P[f"{prefix}.b"]
    if X.value.ndim != 2 or X.shape[1] != W_x.shape[0] or X.shape[0] % batch:
        raise ShapeError("lstm", X.shape, W_x.shape)
    hidden = W_h.shape[0]
    steps = X.shape[0] // batch
    tape = X.tape
    proj = nx.add(nx.matmul(X, W_x), b)
    h = tape.constant(np.zeros((batch, hidden)))
    c = tape.constant(np.zeros((batch, hidden)))
    gates = slice(0, 3 * hidden)
    cand = slice(3 * hidden, 4 * hidden)
    outs = []
    for t in range(steps):
        z = nx.add(nx.slice_(proj, slice(t * batch, (t + 1) * batch)), nx.matmul(h, W_h))
        ifo = nx.sigmoid(nx.slice_(z, (slice(None), gates)))
        g = nx.tanh(nx.slice_(z, (slice(None), cand)))
        i = nx.slice_(ifo, (slice(None), slice(0, hidden)))
        f = nx.slice_(ifo, (slice(None), slice(hidden, 2 * hidden)))
        o = nx.slice_(ifo, (slice(None), slice(2 * hidden, 3 * hidden)))
        c = nx.add(nx.mul(f, c), nx.mul(i, g))
        h = nx.mul(o, nx.tanh(c))
        outs.append(h)
    return outs


def birnn(P: dict, prefix: str, X: Var) -> Var:
    """Bidirectional LSTM over the rows of ``X``; output ``n x 2*hidden``."""
    n = X.shape[0]
    fw = nx.concat(lstm(P, f"{prefix}_fw", X, 1), axis=0)
    rev = np.arange(n)[::-1]
    bw = nx.concat(lstm(P, f"{prefix}_bw", nx.slice_(X, rev), 1), axis=0)
    return nx.concat([fw, nx.slice_(bw, rev)], axis=1)


def char_features(P: dict, char_ids: list) -> Var:
    """Final forward and backward char-LSTM states for every word.

    Words of equal length run as one batch; rows come back in word order.
    """
    if any(len(w) == 0 for w in char_ids):
        raise ValueError("every word needs at least one character")
    by_len: dict[int, list[int]] = {}
    for k, w in enumerate(char_ids):
        by_len.setdefault(len(w), []).append(k)
    blocks, order = [], []
    for length in sorted(by_len):
        members = by_len[length]
        ids = np.array([char_ids[k] for k in members], dtype=np.intp).T  # time-major
        fw_in = nx.take_rows(P["char_emb"], ids.reshape(-1))
        bw_in = nx.take_rows(P["char_emb"], ids[::-1].reshape(-1))
        f_last = lstm(P, "char_fw", fw_in, len(members))[-1]
        b_last = lstm(P, "char_bw", bw_in, len(members))[-1]
        blocks.append(nx.concat([f_last, b_last], axis=1))
        order.extend(members)
    stacked = nx.concat(blocks, axis=0) if len(blocks) > 1 else blocks[0]
    inverse = np.empty(len(order), dtype=np.intp)
    inverse[np.array(order)] = np.arange(len(order))
    return nx.slice_(stacked, inverse)


def char_birnn(char_ids, params: dict) -> np.ndarray:
    """Character feature of a single word, as a plain vector."""
    tape = Tape()
    P = {k: tape.constant(v) for k, v in params.items() if k.startswith("char_")}
    return char_features(P, [list(char_ids)]).value[0]


def word_features(P: dict, char_ids: list, word_ids, aux=None, *, config: EncoderConfig,
                  train: bool = False, rng=None) -> Var:
    """Per-word ``[char feature; word embedding; aux]`` rows (n x d_x)."""
    n = len(char_ids)
    parts = [char_features(P, char_ids), nx.take_rows(P["word_emb"], word_ids)]
    if config.aux_dim:
        if aux is None:
            raise ValueError(f"config expects {config.aux_dim}-dim aux vectors for every token")
        aux = np.asarray(aux, dtype=np.float64)
        if aux.shape != (n, config.aux_dim):
            raise ShapeError("word_features aux", aux.shape, (n, config.aux_dim))
        parts.append(parts[0].tape.constant(aux))
    elif aux is not None and np.size(aux):
        raise ValueError("aux vectors given but config.aux_dim is 0")
    x = nx.concat(parts, axis=1)
    if train and config.dropout > 0:
        x = nx.dropout(x, nx.dropout_mask(rng, x.shape, config.dropout))
    return x


def stacked_residual_encode(P: dict, x: Var, num_layers: int) -> Var:
    """``num_layers`` biLSTMs; layers >= 1 read ``[h_prev; x]``."""
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    h = birnn(P, "layer0", x)
    for m in range(1, num_layers):
        h = birnn(P, f"layer{m}", nx.concat([h, x], axis=1))
    return h
