"""CoNLL reading, vocabularies, pretrained embeddings and tag schemes."""

from __future__ import annotations

import collections
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import embedding_init, seeded_rng

SCHEMES = ("IOB1", "BIO", "IOBES")
DOCSTART = "-DOCSTART-"

UNK_WORD = "<unk>"
PAD_CHAR = "<pad>"
UNK_CHAR = "<unk>"
BEGIN_LABEL = "<begin>"
END_LABEL = "<end>"


class DataError(ValueError):
    """Malformed input data (bad line, bad label sequence, bad file)."""


class SchemeError(DataError):
    pass


@dataclass(frozen=True)
class Sentence:
    words: tuple
    labels: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.words):
                raise DataError(
                    f"sentence has {len(self.words)} words but {len(self.labels)} labels")
        if not self.words:
            raise DataError("empty sentence")

    def __len__(self):
        return len(self.words)

    @property
    def chars(self) -> list[list[int]]:
        """Unicode code points of every word, original case."""
        return [[ord(c) for c in w] for w in self.words]


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int  # inclusive
    type: str


# -- CoNLL files ---------------------------------------------------------------

def parse_conll(text: str, word_column: int = 0, label_column: int | None = -1) -> list[Sentence]:
    """Split blank-line separated column text into sentences.

    ``label_column=None`` reads unlabeled input. Negative column indices count
    from the end of each line. Sentences whose first word is ``-DOCSTART-``
    are dropped.
    """
    sentences = []
    words: list[str] = []
    labels: list[str] = []
    need = max(_min_columns(word_column), _min_columns(label_column))

    def flush():
        if words and words[0] != DOCSTART:
            sentences.append(Sentence(words, labels if label_column is not None else None))
        words.clear()
        labels.clear()

    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            flush()
            continue
        if len(fields) < need:
            raise DataError(f"line {lineno}: expected at least {need} columns, got {len(fields)}")
        words.append(fields[word_column])
        if label_column is not None:
            labels.append(fields[label_column])
    flush()
    return sentences


def _min_columns(col):
    if col is None:
        return 0
    return col + 1 if col >= 0 else -col


def read_conll(path, word_column=0, label_column=-1) -> list[Sentence]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: {e}") from None
    try:
        return parse_conll(text, word_column, label_column)
    except DataError as e:
        raise DataError(f"{path}: {e}") from None


def format_conll(sentences, extra_columns=None) -> str:
    """Serialize sentences as ``word [label] [extra...]`` lines.

    ``extra_columns`` is an optional list (one per sentence) of per-token label
    lists appended as trailing columns, e.g. predictions.
    """
    out = []
    for i, s in enumerate(sentences):
        for k, w in enumerate(s.words):
            cols = [w]
            if s.labels is not None:
                cols.append(s.labels[k])
            if extra_columns is not None:
                cols.append(extra_columns[i][k])
            out.append(" ".join(cols))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


# -- tag schemes ---------------------------------------------------------------

def split_label(label: str):
    if label == "O":
        return "O", None
    prefix, sep, etype = label.partition("-")
    if not sep or not etype or prefix not in "BIES" or len(prefix) != 1:
        raise SchemeError(f"malformed label {label!r}")
    return prefix, etype


def extract_entities(labels, scheme: str = "BIO") -> list[EntitySpan]:
    """Maximal entity spans, ordered by start.

    Chunk boundaries follow conlleval, so invalid sequences are read the
    lenient way (an orphan ``I-X`` opens a new chunk) instead of raising.
    """
    _check_scheme(scheme)
    spans = []
    start = None
    cur_type = None
    prev_prefix = "O"
    for k, label in enumerate(labels):
        prefix, etype = split_label(label)
        if start is not None and _chunk_end(prev_prefix, cur_type, prefix, etype):
            spans.append(EntitySpan(start, k - 1, cur_type))
            start = None
        if prefix != "O" and (start is None or _chunk_start(prev_prefix, cur_type, prefix, etype)):
            start, cur_type = k, etype
        prev_prefix = prefix
        if start is None:
            cur_type = None
    if start is not None:
        spans.append(EntitySpan(start, len(labels) - 1, cur_type))
    return spans


def _chunk_end(prev_prefix, prev_type, prefix, etype):
    if prev_prefix == "O":
        return False
    if prefix == "O" or etype != prev_type:
        return True
    return prefix in "BS" or prev_prefix in "ES"


def _chunk_start(prev_prefix, prev_type, prefix, etype):
    if prefix == "O":
        return False
    if prev_prefix == "O" or etype != prev_type:
        return True
    return prefix in "BS" or prev_prefix in "ES"


def validate_labels(labels, scheme: str) -> None:
    """Raise SchemeError at the first position that breaks ``scheme``."""
    _check_scheme(scheme)
    prev_p, prev_t = "O", None
    allowed = {"IOB1": "OIB", "BIO": "OBI", "IOBES": "OBIES"}[scheme]
    for k, label in enumerate(labels):
        p, t = split_label(label)
        if p not in allowed:
            raise SchemeError(f"position {k}: {label!r} not allowed in {scheme}")
        open_chunk = prev_p in "BI" and scheme == "IOBES"
        if scheme == "IOB1" and p == "B" and not (prev_p in "IB" and prev_t == t):
            raise SchemeError(f"position {k}: {label!r} must follow a {t} token in IOB1")
        if scheme == "BIO" and p == "I" and not (prev_p in "BI" and prev_t == t):
            raise SchemeError(f"position {k}: {label!r} does not continue a {t} entity")
        if scheme == "IOBES":
            if p in "IE" and not (open_chunk and prev_t == t):
                raise SchemeError(f"position {k}: {label!r} does not continue a {t} entity")
            if p in "OBS" and open_chunk:
                raise SchemeError(f"position {k}: entity opened at {k - 1} is not closed")
        prev_p, prev_t = p, t
    if scheme == "IOBES" and prev_p in "BI":
        raise SchemeError(f"position {len(labels) - 1}: entity is not closed")


def is_valid(labels, scheme: str) -> bool:
    try:
        validate_labels(labels, scheme)
    except SchemeError:
        return False
    return True


def render_spans(spans, length: int, scheme: str) -> list[str]:
    _check_scheme(scheme)
    out = ["O"] * length
    prev_end, prev_type = -2, None
    for sp in spans:
        n = sp.end - sp.start + 1
        if scheme == "BIO":
            tags = ["B"] + ["I"] * (n - 1)
        elif scheme == "IOBES":
            tags = ["S"] if n == 1 else ["B"] + ["I"] * (n - 2) + ["E"]
        else:
            adjacent = prev_end == sp.start - 1 and prev_type == sp.type
            tags = ["B" if adjacent else "I"] + ["I"] * (n - 1)
        for k, t in enumerate(tags):
            out[sp.start + k] = f"{t}-{sp.type}"
        prev_end, prev_type = sp.end, sp.type
    return out


def convert_scheme(labels, source: str, target: str, repair: bool = False) -> list[str]:
    """Re-encode a label sequence, preserving its entity spans exactly."""
    labels = list(labels)
    if not repair:
        validate_labels(labels, source)
    return render_spans(extract_entities(labels, source), len(labels), target)


def repair_labels(labels, scheme: str) -> list[str]:
    """Conventional fix: re-render the lenient chunk reading (orphan I-X -> B-X)."""
    return convert_scheme(labels, scheme, scheme, repair=True)


def _check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown tag scheme {scheme!r}; expected one of {SCHEMES}")


def convert_sentences(sentences, source, target, repair=False) -> list[Sentence]:
    out = []
    for i, s in enumerate(sentences):
        if s.labels is None:
            out.append(s)
            continue
        try:
            out.append(Sentence(s.words, convert_scheme(s.labels, source, target, repair)))
        except SchemeError as e:
            raise SchemeError(f"sentence {i}: {e}") from None
    return out


# -- vocabulary ----------------------------------------------------------------

class Index:
    """Bijective string <-> id map over ids ``0..len-1``."""

    def __init__(self, items=()):
        self.items: list[str] = []
        self.ids: dict[str, int] = {}
        for it in items:
            self.add(it)

    def add(self, item: str) -> int:
        if item not in self.ids:
            self.ids[item] = len(self.items)
            self.items.append(item)
        return self.ids[item]

    def __len__(self):
        return len(self.items)

    def __contains__(self, item):
        return item in self.ids

    def __getitem__(self, item):
        return self.ids[item]

    def get(self, item, default=None):
        return self.ids.get(item, default)

    def lookup(self, idx: int) -> str:
        return self.items[idx]


@dataclass
class Vocabulary:
    words: Index
    chars: Index
    labels: Index
    scheme: str = "BIO"
    unk_word: int = field(init=False)
    pad_char: int = field(init=False)
    unk_char: int = field(init=False)

    def __post_init__(self):
        self.unk_word = self.words[UNK_WORD]
        self.pad_char = self.chars[PAD_CHAR]
        self.unk_char = self.chars[UNK_CHAR]
        if self.labels.lookup(len(self.labels) - 2) != BEGIN_LABEL or \
                self.labels.lookup(len(self.labels) - 1) != END_LABEL:
            raise DataError("label index must end with the begin and end labels")

    @property
    def num_labels(self) -> int:
        """Size of the label set including begin and end."""
        return len(self.labels)

    @property
    def real_labels(self) -> list[str]:
        return self.labels.items[:-2]

    @property
    def begin(self) -> int:
        return len(self.labels) - 2

    @property
    def end(self) -> int:
        return len(self.labels) - 1

    def word_id(self, word: str) -> int:
        return self.words.get(word.lower(), self.unk_word)

    def char_ids(self, word: str) -> list[int]:
        return [self.chars.get(c, self.unk_char) for c in word]

    def label_ids(self, labels) -> list[int]:
        try:
            return [self.labels[lab] for lab in labels]
        except KeyError as e:
            raise DataError(f"label {e.args[0]!r} not in the vocabulary") from None

    def label_strings(self, ids) -> list[str]:
        return [self.labels.lookup(int(i)) for i in ids]

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "words": list(self.words.items),
            "chars": list(self.chars.items),
            "labels": list(self.labels.items),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(Index(d["words"]), Index(d["chars"]), Index(d["labels"]), d["scheme"])


def build_vocabulary(sentences, min_word_freq: int = 1, scheme: str = "BIO",
                     repair: bool = False) -> Vocabulary:
    """Index words (lowercased), characters (original case) and labels.

    Labels are validated against ``scheme``; set ``repair`` to accept sequences
    the conventional repair would fix.
    """
    if not sentences:
        raise DataError("cannot build a vocabulary from zero sentences")
    _check_scheme(scheme)
    counts = collections.Counter(w.lower() for s in sentences for w in s.words)
    words = Index([UNK_WORD])
    for w in sorted(counts):
        if counts[w] >= min_word_freq:
            words.add(w)
    chars = Index([PAD_CHAR, UNK_CHAR])
    for c in sorted({c for s in sentences for w in s.words for c in w}):
        chars.add(c)
    seen = set()
    for i, s in enumerate(sentences):
        if s.labels is None:
            continue
        labs = s.labels
        if not is_valid(labs, scheme):
            if not repair:
                try:
                    validate_labels(labs, scheme)
                except SchemeError as e:
                    raise SchemeError(f"sentence {i}: {e}") from None
            labs = repair_labels(labs, scheme)
        seen.update(labs)
    labels = Index()
    if "O" in seen:
        labels.add("O")
    for lab in sorted(seen - {"O"}, key=lambda x: (split_label(x)[1], x)):
        labels.add(lab)
    labels.add(BEGIN_LABEL)
    labels.add(END_LABEL)
    return Vocabulary(words, chars, labels, scheme)


# -- embeddings ----------------------------------------------------------------

@dataclass
class EmbeddingTable:
    vectors: np.ndarray
    covered: np.ndarray  # bool per vocab row

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def coverage(self) -> float:
        return float(self.covered.mean()) if self.covered.size else 0.0


def load_embeddings(path, vocab: Vocabulary, seed: int = 0) -> EmbeddingTable:
    """Copy matching rows from a GloVe-style text file.

    File words are lowercased to match the vocabulary; the first occurrence
    wins. Rows with no match keep the uniform +-sqrt(3/dim) init.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: {e}") from None
    found: dict[int, np.ndarray] = {}
    dim = None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip().split()
            if not fields:
                continue
            if dim is None:
                dim = len(fields) - 1
                if dim <= 0:
                    raise DataError(f"{path}: line {lineno}: no vector values")
            elif len(fields) - 1 != dim:
                raise DataError(
                    f"{path}: line {lineno}: expected {dim} values, got {len(fields) - 1}")
            idx = vocab.words.get(fields[0].lower())
            if idx is None or idx in found:
                continue
            try:
                found[idx] = np.array([float(v) for v in fields[1:]])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric value") from None
    if dim is None:
        raise DataError(f"{path}: empty embedding file")
    vectors = embedding_init(seeded_rng(seed), (len(vocab.words), dim))
    covered = np.zeros(len(vocab.words), dtype=bool)
    for idx, vec in found.items():
        vectors[idx] = vec
        covered[idx] = True
    return EmbeddingTable(vectors, covered)
