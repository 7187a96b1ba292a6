"""Command-line entry point: ``rescrf <command> ...``.

Commands: train, tag, bias-train, bias-search, eval, significance.
Exit codes: 0 ok, 2 usage/config error, 3 data error, 4 numeric error.
The fully resolved configuration is printed to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bias_opt import BiasTrainConfig, grid_search_bias, read_bias, train_bias, write_bias
from .corpus import DataError, build_vocabulary, convert_sentences, load_embeddings, read_conll
from .encoder import EncoderConfig
from .evaluation import entity_f1, randomization_test
from .numerics import NonFiniteError
from .training import CheckpointError, TrainConfig, load_checkpoint, save_checkpoint, train

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


DATA_DEFAULTS = {
    "word_column": 0,
    "label_column": -1,
    "input_scheme": "BIO",
    "scheme": "BIO",
    "repair": False,
    "min_word_freq": 1,
    "embeddings": None,
    "aux_train": None,
    "aux_dev": None,
}
MODEL_DEFAULTS = {"constrained": False}
EVAL_DEFAULTS = {"iterations": 10000, "seed": 0}


def default_config() -> dict:
    bias = asdict(BiasTrainConfig())
    bias["epsilon_grid"] = list(bias["epsilon_grid"])
    return {
        "data": dict(DATA_DEFAULTS),
        "encoder": asdict(EncoderConfig()),
        "model": dict(MODEL_DEFAULTS),
        "train": asdict(TrainConfig()),
        "bias": bias,
        "eval": dict(EVAL_DEFAULTS),
    }


def _merge(base: dict, update: dict, where: str = "") -> None:
    for key, value in update.items():
        path = f"{where}{key}"
        if key not in base:
            raise UsageError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config key {path!r} must be a section")
            _merge(base[key], value, path + ".")
        else:
            base[key] = value


def resolve_config(path=None, overrides=()) -> dict:
    """Defaults, then the JSON config file, then ``section.key=value`` overrides."""
    config = default_config()
    if path:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from None
        except json.JSONDecodeError as e:
            raise UsageError(f"{path}: invalid JSON: {e}") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        _merge(config, loaded)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or "." not in key:
            raise UsageError(f"override {item!r} must look like section.key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        section, _, name = key.partition(".")
        _merge(config, {section: {name: value}})
    try:
        _typed(config)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid config: {e}") from None
    return config


def _typed(config):
    return (EncoderConfig(**config["encoder"]), TrainConfig(**config["train"]),
            _bias_config(config))


def _bias_config(config) -> BiasTrainConfig:
    d = dict(config["bias"])
    d["epsilon_grid"] = tuple(d["epsilon_grid"])
    return BiasTrainConfig(**d)


def emit_config(config: dict, command: str) -> None:
    print(json.dumps({"command": command, "config": config}, sort_keys=True), file=sys.stderr)


# -- data helpers -----------------------------------------------------------------

def load_sentences(path, data: dict, labeled: bool = True):
    label_column = data["label_column"] if labeled else None
    sents = read_conll(path, data["word_column"], label_column)
    if labeled:
        sents = convert_sentences(sents, data["input_scheme"], data["scheme"], data["repair"])
    return sents


def read_aux(path, sentences):
    """Per-token aux vectors; header line ``aux_dim D``, then one row per token."""
    if path is None:
        return None
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"{path}: {e}") from None
    if not lines or not lines[0].startswith("aux_dim"):
        raise DataError(f"{path}: line 1: expected header 'aux_dim D'")
    try:
        dim = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise DataError(f"{path}: line 1: bad aux_dim header") from None
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        vals = line.split()
        if not vals:
            continue
        if len(vals) != dim:
            raise DataError(f"{path}: line {lineno}: expected {dim} values, got {len(vals)}")
        try:
            rows.append([float(v) for v in vals])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric value") from None
    need = sum(len(s) for s in sentences)
    if len(rows) != need:
        raise DataError(f"{path}: {len(rows)} aux rows for {need} tokens")
    table = np.array(rows).reshape(need, dim)
    out, k = [], 0
    for s in sentences:
        out.append(table[k:k + len(s)])
        k += len(s)
    return out


def write_tagged(path, sentences, predictions) -> None:
    lines = []
    for s, pred in zip(sentences, predictions):
        for k, w in enumerate(s.words):
            cols = [w] + ([s.labels[k]] if s.labels is not None else []) + [pred[k]]
            lines.append(" ".join(cols))
        lines.append("")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- commands -----------------------------------------------------------------------

def cmd_train(args, config):
    data = config["data"]
    encoder, tcfg, _ = _typed(config)
    train_set = load_sentences(args.train, data)
    dev_set = load_sentences(args.dev, data)
    vocab = build_vocabulary(train_set, data["min_word_freq"], data["scheme"])
    for s in dev_set:
        vocab.label_ids(s.labels)
    embeddings = None
    if data["embeddings"]:
        embeddings = load_embeddings(data["embeddings"], vocab, seed=tcfg.seed)
        if embeddings.dim != encoder.word_emb_dim:
            raise DataError(f"embedding file has dim {embeddings.dim}, "
                            f"config word_emb_dim is {encoder.word_emb_dim}")
    trace = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        result = train(train_set, dev_set, tcfg, encoder, vocab, embeddings,
                       config["model"]["constrained"],
                       read_aux(data["aux_train"], train_set), read_aux(data["aux_dev"], dev_set),
                       log=(lambda r: print(r.to_line(), file=trace)) if trace else None)
    finally:
        if trace:
            trace.close()
    save_checkpoint(args.out, result.checkpoint)
    print(f"best dev F1 {result.checkpoint.dev_f1:.2f}")


def cmd_tag(args, config):
    ckpt = load_checkpoint(args.checkpoint)
    tagger = ckpt.tagger
    data = dict(config["data"], scheme=tagger.vocab.scheme)
    labeled = not args.unlabeled
    sents = load_sentences(args.input, data, labeled=labeled)
    bias = read_bias(args.bias, tagger.vocab) if args.bias else None
    pred = tagger.tag(sents, bias, read_aux(args.aux, sents))
    write_tagged(args.output, sents, pred)


def cmd_bias_train(args, config):
    ckpt = load_checkpoint(args.checkpoint)
    data = dict(config["data"], scheme=ckpt.tagger.vocab.scheme)
    dev = load_sentences(args.dev, data)
    result = train_bias(ckpt.tagger, dev, _bias_config(config), read_aux(args.aux, dev))
    write_bias(args.output, ckpt.tagger.vocab, result.bias)
    if args.trace:
        labels = ckpt.tagger.vocab.real_labels
        lines = [step.to_line(labels) for step in result.trace]
        Path(args.trace).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    print(f"dev F1 {result.baseline_f1:.2f} -> {result.dev_f1:.2f}")


def cmd_bias_search(args, config):
    ckpt = load_checkpoint(args.checkpoint)
    data = dict(config["data"], scheme=ckpt.tagger.vocab.scheme)
    dev = load_sentences(args.dev, data)
    res = grid_search_bias(ckpt.tagger, dev, args.label, args.lo, args.hi, args.step,
                           read_aux(args.aux, dev))
    for v, f in zip(res.values, res.f1s):
        print(f"{args.label}\t{v:.4f}\t{f:.4f}")
    print(f"best {args.label} bias: {res.best:.4f}")


def _last_column(path, config):
    return read_conll(path, config["data"]["word_column"], -1)


def cmd_eval(args, config):
    pred = _last_column(args.pred, config)
    gold = _last_column(args.gold, config)
    report = entity_f1([s.labels for s in pred], [s.labels for s in gold])
    print(report.text())
    print(report.summary_line())


def cmd_significance(args, config):
    a = _last_column(args.pred_a, config)
    b = _last_column(args.pred_b, config)
    gold = _last_column(args.gold, config)
    iterations = args.iterations if args.iterations is not None else config["eval"]["iterations"]
    seed = args.seed if args.seed is not None else config["eval"]["seed"]
    fa = entity_f1([s.labels for s in a], [s.labels for s in gold]).f1
    fb = entity_f1([s.labels for s in b], [s.labels for s in gold]).f1
    p = randomization_test([s.labels for s in a], [s.labels for s in b],
                           [s.labels for s in gold], iterations, seed)
    print(f"f1_a: {fa:.4f} f1_b: {fb:.4f} iterations: {iterations} seed: {seed} p_value: {p:.6f}")


COMMANDS = {
    "train": cmd_train,
    "tag": cmd_tag,
    "bias-train": cmd_bias_train,
    "bias-search": cmd_bias_search,
    "eval": cmd_eval,
    "significance": cmd_significance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rescrf", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config value")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a tagger")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--trace", help="per-epoch JSON-lines trace")

    p = sub.add_parser("tag", parents=[common], help="tag a CoNLL file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--bias", help="bias file (LABEL<TAB>value lines)")
    p.add_argument("--aux", help="per-token aux vector sidecar")
    p.add_argument("--unlabeled", action="store_true", help="input has no label column")

    p = sub.add_parser("bias-train", parents=[common], help="train decode biases on dev F1")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--output", required=True, help="bias file to write")
    p.add_argument("--trace", help="per-update JSON-lines trace")
    p.add_argument("--aux")

    p = sub.add_parser("bias-search", parents=[common], help="grid search one label's bias")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--label", default="O")
    p.add_argument("--lo", type=float, default=0.5)
    p.add_argument("--hi", type=float, default=1.5)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--aux")

    p = sub.add_parser("eval", parents=[common], help="entity-level P/R/F1")
    p.add_argument("--pred", required=True, help="CoNLL file, predicted label in last column")
    p.add_argument("--gold", required=True, help="CoNLL file, gold label in last column")

    p = sub.add_parser("significance", parents=[common], help="approximate randomization test")
    p.add_argument("--pred-a", required=True)
    p.add_argument("--pred-b", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    try:
        config = resolve_config(args.config, args.overrides)
        emit_config(copy.deepcopy(config), args.command)
        COMMANDS[args.command](args, config)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteError, FloatingPointError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
