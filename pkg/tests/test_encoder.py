import numpy as np
import pytest

from rescrf import numerics as nx
from rescrf.corpus import Sentence, build_vocabulary
from rescrf.crf import crf_nll
from rescrf.encoder import (
    EncoderConfig,
    char_birnn,
    encoder_shapes,
    init_encoder,
    stacked_residual_encode,
    word_features,
)
from rescrf.model import Tagger
from rescrf.numerics import Tape


def ref_lstm(xs, W_x, W_h, b):
    """Plain-numpy LSTM, gates ordered i, f, o, g."""
    H = W_h.shape[0]
    h, c = np.zeros(H), np.zeros(H)
    for x in xs:
        z = x @ W_x + h @ W_h + b
        sig = 1 / (1 + np.exp(-z[:3 * H]))
        i, f, o = sig[:H], sig[H:2 * H], sig[2 * H:]
        c = f * c + i * np.tanh(z[3 * H:])
        h = o * np.tanh(c)
    return h


def small_config(**kw):
    base = dict(char_emb_dim=4, char_hidden_dim=3, word_emb_dim=5, word_hidden_dim=4, num_layers=3)
    base.update(kw)
    return EncoderConfig(**base)


@pytest.fixture
def params():
    cfg = small_config()
    return cfg, init_encoder(cfg, num_words=10, num_chars=12, rng=nx.seeded_rng(0))


def test_char_birnn_shape_default_dims():
    cfg = EncoderConfig()
    p = init_encoder(cfg, 3, 10, nx.seeded_rng(0))
    assert char_birnn([2, 3, 4], p).shape == (50,)
    assert char_birnn([5], p).shape == (50,)


def test_char_birnn_matches_reference(params):
    cfg, p = params
    ids = [3, 7, 1, 9]
    emb = p["char_emb"][ids]
    fw = ref_lstm(emb, p["char_fw.W_x"], p["char_fw.W_h"], p["char_fw.b"])
    bw = ref_lstm(emb[::-1], p["char_bw.W_x"], p["char_bw.W_h"], p["char_bw.b"])
    np.testing.assert_allclose(char_birnn(ids, p), np.concatenate([fw, bw]), atol=1e-13)


def test_char_birnn_reversal_with_swapped_directions(params):
    _, p = params
    ids = [3, 7, 1, 9, 2]
    swapped = dict(p)
    for part in ("W_x", "W_h", "b"):
        swapped[f"char_fw.{part}"], swapped[f"char_bw.{part}"] = p[f"char_bw.{part}"], p[f"char_fw.{part}"]
    H = 3
    out = char_birnn(ids, p)
    rev = char_birnn(ids[::-1], swapped)
    assert np.array_equal(rev[:H], out[H:])
    assert np.array_equal(rev[H:], out[:H])


def test_char_birnn_single_char(params):
    _, p = params
    out = char_birnn([4], p)
    emb = p["char_emb"][[4]]
    np.testing.assert_allclose(out[:3], ref_lstm(emb, p["char_fw.W_x"], p["char_fw.W_h"], p["char_fw.b"]),
                               atol=1e-14)


def test_char_birnn_empty_word(params):
    _, p = params
    with pytest.raises(ValueError):
        char_birnn([], p)


def _features(cfg, p, n=3, aux=None, train=False, rng=None):
    tape = Tape()
    P = {k: tape.constant(v) for k, v in p.items()}
    chars = [[1 + (k % 5), 2] for k in range(n)]
    return word_features(P, chars, list(range(n)), aux, config=cfg, train=train, rng=rng)


def test_word_feature_width_default():
    cfg = EncoderConfig(num_layers=1)
    p = init_encoder(cfg, 5, 5, nx.seeded_rng(0))
    assert cfg.feature_dim == 150
    assert _features(cfg, p).shape == (3, 150)


def test_word_feature_width_with_aux():
    cfg = EncoderConfig(num_layers=1, aux_dim=300)
    p = init_encoder(cfg, 5, 5, nx.seeded_rng(0))
    aux = np.arange(900.0).reshape(3, 300)
    x = _features(cfg, p, aux=aux)
    assert x.shape == (3, 450)
    assert np.array_equal(x.value[:, 150:], aux)


def test_word_feature_rows_are_concatenations(params):
    cfg, p = params
    x = _features(cfg, p).value
    np.testing.assert_array_equal(x[1, :6], char_birnn([2, 2], p))
    np.testing.assert_array_equal(x[1, 6:], p["word_emb"][1])


def test_aux_row_mismatch(params):
    cfg = small_config(aux_dim=2)
    p = init_encoder(cfg, 10, 12, nx.seeded_rng(0))
    with pytest.raises(ValueError):
        _features(cfg, p, aux=np.zeros((2, 2)))


def test_eval_mode_is_dropout_free(params):
    cfg = small_config(dropout=0.5)
    p = params[1]
    a = _features(cfg, p).value
    b = _features(cfg, p).value
    assert np.array_equal(a, b)
    c = _features(cfg, p, train=True, rng=nx.seeded_rng(1)).value
    assert not np.array_equal(a, c)


def _encode(cfg, p, x):
    tape = Tape()
    P = {k: tape.constant(v) for k, v in p.items()}
    return stacked_residual_encode(P, tape.constant(x), cfg.num_layers).value


def test_single_layer_is_plain_birnn():
    cfg = small_config(num_layers=1)
    p = init_encoder(cfg, 5, 5, nx.seeded_rng(0))
    assert p["layer0_fw.W_x"].shape[0] == cfg.feature_dim
    assert not any(k.startswith("layer1") for k in p)
    x = np.random.default_rng(0).standard_normal((4, cfg.feature_dim))
    fw = [ref_lstm(x[:k + 1], p["layer0_fw.W_x"], p["layer0_fw.W_h"], p["layer0_fw.b"]) for k in range(4)]
    bw = [ref_lstm(x[k:][::-1], p["layer0_bw.W_x"], p["layer0_bw.W_h"], p["layer0_bw.b"]) for k in range(4)]
    np.testing.assert_allclose(_encode(cfg, p, x), np.hstack([fw, bw]), atol=1e-13)


@pytest.mark.parametrize("layers", [1, 2, 3, 4])
def test_stack_widths(layers):
    cfg = EncoderConfig(num_layers=layers)
    shapes = encoder_shapes(cfg, 3, 3)
    assert shapes["layer0_fw.W_x"][0] == 150
    for m in range(1, layers):
        assert shapes[f"layer{m}_fw.W_x"][0] == 350
        assert shapes[f"layer{m}_bw.W_x"][0] == 350
    assert cfg.output_dim == 200


def test_stack_output_preserves_length(params):
    cfg, p = params
    for n in (1, 2, 7):
        x = np.random.default_rng(n).standard_normal((n, cfg.feature_dim))
        assert _encode(cfg, p, x).shape == (n, cfg.output_dim)


def test_upper_layers_see_raw_input_when_h_block_is_cut(params):
    cfg, p = params
    cut = dict(p)
    for m in range(1, cfg.num_layers):
        for d in ("fw", "bw"):
            W = p[f"layer{m}_{d}.W_x"].copy()
            W[:cfg.output_dim] = 0.0  # rows multiplying the h block of [h; x]
            cut[f"layer{m}_{d}.W_x"] = W
    rng = np.random.default_rng(5)
    x1 = rng.standard_normal((3, cfg.feature_dim))
    x2 = rng.standard_normal((3, cfg.feature_dim))
    assert not np.allclose(_encode(cfg, cut, x1), _encode(cfg, cut, x2))
    # layer 0 is now disconnected from the output
    other = dict(cut)
    other["layer0_fw.W_x"] = p["layer0_fw.W_x"] + 1.0
    assert np.array_equal(_encode(cfg, cut, x1), _encode(cfg, other, x1))


def test_end_to_end_gradient_passes_check():
    s = Sentence(["Ab", "c", "Def"], ["B-PER", "O", "B-LOC"])
    vocab = build_vocabulary([s])
    assert vocab.num_labels - 2 == 3
    cfg = EncoderConfig(char_emb_dim=3, char_hidden_dim=2, word_emb_dim=3, word_hidden_dim=3,
                        num_layers=3)
    tagger = Tagger.initialize(cfg, vocab, seed=2)
    gold = vocab.label_ids(s.labels)
    chars = [vocab.char_ids(w) for w in s.words]
    words = [vocab.word_id(w) for w in s.words]
    for name in ("char_emb", "char_bw.W_h", "layer1_fw.W_x", "layer2_bw.b", "proj.W", "transitions"):
        def f(x, name=name):
            tape = x.tape
            P = {k: (x if k == name else tape.constant(v)) for k, v in tagger.params.items()}
            h = stacked_residual_encode(P, word_features(P, chars, words, config=cfg), 3)
            lat = nx.add(nx.matmul(h, nx.transpose(P["proj.W"])), P["proj.b"])
            return crf_nll(lat, P["transitions"], gold)
        assert nx.grad_check(f, tagger.params[name], 1e-5) < 1e-4, name


def test_eval_outputs_are_deterministic():
    s = Sentence(["Ab", "c"], ["B-PER", "O"])
    vocab = build_vocabulary([s])
    cfg = small_config()
    a = Tagger.initialize(cfg, vocab, seed=4)
    b = Tagger.initialize(cfg, vocab, seed=4)
    assert np.array_equal(a.lattice(s), b.lattice(s))
    assert np.array_equal(a.lattice(s), a.lattice(s))


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(num_layers=0)
    with pytest.raises(ValueError):
        EncoderConfig(word_hidden_dim=0)
    with pytest.raises(ValueError):
        EncoderConfig(dropout=1.0)
