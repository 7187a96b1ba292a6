"""Stacked residual biLSTM-CRF tagging with trainable percentage-bias decoding."""

from .bias_opt import BiasTrainConfig, f1_loss, fd_gradient, grid_search_bias, train_bias
from .corpus import (
    EmbeddingTable,
    EntitySpan,
    Sentence,
    Vocabulary,
    build_vocabulary,
    convert_scheme,
    extract_entities,
    load_embeddings,
    parse_conll,
)
from .crf import log_partition, marginals, nll_loss, project, score_sequence
from .decoder import biased_viterbi, decode_dataset, viterbi
from .encoder import EncoderConfig
from .evaluation import EvalReport, entity_f1, randomization_test
from .model import Tagger
from .training import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
