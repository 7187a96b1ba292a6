"""The full tagger: word features -> residual stack -> projection -> CRF."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .corpus import EmbeddingTable, Sentence, Vocabulary
from .crf import bio_constraint_mask, crf_nll, init_transitions
from .decoder import decode_lattices
from .encoder import EncoderConfig, encoder_shapes, init_encoder, stacked_residual_encode, word_features
from .numerics import ShapeError, Tape


@dataclass
class Tagger:
    config: EncoderConfig
    vocab: Vocabulary
    params: dict
    constrained: bool = False

    @classmethod
    def initialize(cls, config: EncoderConfig, vocab: Vocabulary, seed: int = 0,
                   embeddings: EmbeddingTable | None = None, constrained: bool = False):
        """Fresh parameters; identical seeds give bit-identical arrays."""
        rng = nx.seeded_rng(seed)
        params = init_encoder(config, len(vocab.words), len(vocab.chars), rng)
        if embeddings is not None:
            if embeddings.vectors.shape != params["word_emb"].shape:
                raise ShapeError("word_emb", embeddings.vectors.shape, params["word_emb"].shape)
            params["word_emb"] = embeddings.vectors.copy()
        l = vocab.num_labels
        params["proj.W"] = nx.uniform_fan_init(rng, (l, config.output_dim))
        params["proj.b"] = np.zeros(l)
        params["transitions"] = init_transitions(l)
        return cls(config, vocab, params, constrained)

    @staticmethod
    def param_shapes(config: EncoderConfig, vocab: Vocabulary) -> dict:
        shapes = encoder_shapes(config, len(vocab.words), len(vocab.chars))
        l = vocab.num_labels
        shapes["proj.W"] = (l, config.output_dim)
        shapes["proj.b"] = (l,)
        shapes["transitions"] = (l, l)
        return shapes

    def transition_mask(self) -> np.ndarray:
        l = self.vocab.num_labels
        if not self.constrained:
            return np.zeros((l, l))
        if self.vocab.scheme != "BIO":
            raise ValueError("transition constraints are only defined for BIO")
        return bio_constraint_mask(self.vocab.labels.items)

    def decode_transitions(self) -> np.ndarray:
        return self.params["transitions"] + self.transition_mask()

    def _inputs(self, sentence: Sentence):
        chars = [self.vocab.char_ids(w) for w in sentence.words]
        words = [self.vocab.word_id(w) for w in sentence.words]
        return chars, words

    def forward(self, tape: Tape, sentence: Sentence, aux=None, train=False, rng=None):
        """Leaf Vars for every parameter, and the lattice Var."""
        P = {name: tape.leaf(value) for name, value in self.params.items()}
        chars, words = self._inputs(sentence)
        x = word_features(P, chars, words, aux, config=self.config, train=train, rng=rng)
        h = stacked_residual_encode(P, x, self.config.num_layers)
        lattice = nx.add(nx.matmul(h, nx.transpose(P["proj.W"])), P["proj.b"])
        return P, lattice

    def loss_and_grads(self, sentence: Sentence, aux=None, train=True, rng=None):
        """CRF negative log-likelihood of the gold labels and its gradients."""
        if sentence.labels is None:
            raise ValueError("sentence has no gold labels")
        tape = Tape()
        P, lattice = self.forward(tape, sentence, aux, train, rng)
        delta = P["transitions"]
        if self.constrained:
            delta = nx.add(delta, tape.constant(self.transition_mask()))
        loss = crf_nll(lattice, delta, self.vocab.label_ids(sentence.labels))
        tape.backward(loss)
        grads = {k: (v.grad if v.grad is not None else np.zeros_like(v.value))
                 for k, v in P.items()}
        return float(loss.value), grads

    def lattice(self, sentence: Sentence, aux=None) -> np.ndarray:
        tape = Tape()
        P = {name: tape.constant(value) for name, value in self.params.items()}
        chars, words = self._inputs(sentence)
        x = word_features(P, chars, words, aux, config=self.config)
        h = stacked_residual_encode(P, x, self.config.num_layers).value
        return h @ self.params["proj.W"].T + self.params["proj.b"]

    def lattices(self, sentences, aux=None) -> list[np.ndarray]:
        if aux is None:
            aux = [None] * len(sentences)
        return [self.lattice(s, a) for s, a in zip(sentences, aux)]

    def tag(self, sentences, bias=None, aux=None) -> list[list[str]]:
        paths = decode_lattices(self.lattices(sentences, aux), self.decode_transitions(), bias)
        return [self.vocab.label_strings(p) for p in paths]
