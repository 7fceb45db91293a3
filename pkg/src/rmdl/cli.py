"""Command-line interface: train, eval, predict.

Configuration is a flat INI file ([section] headers, key = value lines).
Exit codes for train: 1 config error, 2 data error, 3 training failure.
For eval/predict: 1 bad checkpoint, 2 incompatible or unreadable input.
"""
import argparse
import configparser
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import data as dt
from . import features as ft
from . import metrics as mt
from .ensemble import (CheckpointError, EnsembleConfig, FeatureSpace,
                       SamplingRanges, TrainingError, load_checkpoint,
                       save_checkpoint, train_ensemble)
from .tensor import ShapeError


class ConfigError(Exception):
    """Raised when the run configuration is missing, malformed, or refers
    to inputs that do not exist; the message names the offending key."""


@dataclass
class RunConfig:
    task: str
    inputs: dict
    valid_fraction: float
    split_seed: int
    ensemble: EnsembleConfig
    features: dict
    outputs: dict
    glove_path: str = None


def _parse_int(raw, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}")


def _parse_float(raw, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}")


def _parse_pair(raw, key, cast=int):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'min,max', got {raw!r}")
    try:
        return (cast(parts[0]), cast(parts[1]))
    except ValueError:
        raise ConfigError(f"{key}: expected 'min,max' numbers, got {raw!r}")


class _Conf:
    """Thin wrapper over configparser with keyed error messages."""

    def __init__(self, parser):
        self.cp = parser

    def get(self, section, key, default=None, required=False):
        if self.cp.has_option(section, key):
            return self.cp.get(section, key).strip()
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default

    def input_path(self, section, key, required=True):
        path = self.get(section, key, required=required)
        if path is None:
            return None
        if not os.path.exists(path):
            raise ConfigError(f"{section}.{key}: path does not exist: {path}")
        return path


def load_run_config(path):
    """Parse and validate an INI run configuration."""
    if not os.path.exists(path):
        raise ConfigError(f"config file does not exist: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    conf = _Conf(parser)

    task = conf.get("task", "kind", required=True)
    if task not in ("image", "text"):
        raise ConfigError(f"task.kind must be 'image' or 'text', got {task!r}")

    inputs = {}
    if task == "image":
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            inputs[key] = conf.input_path("data", key)
    else:
        inputs["train"] = conf.input_path("data", "train")
        inputs["test"] = conf.input_path("data", "test")
    valid_fraction = _parse_float(conf.get("data", "valid_fraction", "0.1"),
                                  "data.valid_fraction")
    if not 0.0 <= valid_fraction < 1.0:
        raise ConfigError(
            f"data.valid_fraction must be in [0, 1), got {valid_fraction}")
    split_seed = _parse_int(conf.get("data", "split_seed", "0"), "data.split_seed")

    ranges = SamplingRanges()
    for name in ("dnn_layers", "dnn_units", "cnn_blocks", "cnn_filters",
                 "rnn_layers", "rnn_units"):
        raw = conf.get("ranges", name)
        if raw is not None:
            setattr(ranges, name, _parse_pair(raw, f"ranges.{name}"))
    raw = conf.get("ranges", "dnn_dropout")
    if raw is not None:
        ranges.dnn_dropout = _parse_pair(raw, "ranges.dnn_dropout", cast=float)
    raw = conf.get("ranges", "cnn_kernels")
    if raw is not None:
        try:
            ranges.cnn_kernels = tuple(int(p) for p in raw.split(","))
        except ValueError:
            raise ConfigError(f"ranges.cnn_kernels: expected integers, got {raw!r}")

    pool_raw = conf.get("ensemble", "optimizers", "adam,rmsprop")
    pool = tuple(p.strip() for p in pool_raw.split(",") if p.strip())
    ens = EnsembleConfig(
        d=_parse_int(conf.get("ensemble", "dnn", "1"), "ensemble.dnn"),
        c=_parse_int(conf.get("ensemble", "cnn", "1"), "ensemble.cnn"),
        r=_parse_int(conf.get("ensemble", "rnn", "1"), "ensemble.rnn"),
        seed=_parse_int(conf.get("ensemble", "seed", "0"), "ensemble.seed"),
        ranges=ranges,
        epochs=_parse_int(conf.get("ensemble", "epochs", "10"), "ensemble.epochs"),
        batch_size=_parse_int(conf.get("ensemble", "batch_size", "64"),
                              "ensemble.batch_size"),
        optimizer_pool=pool)
    try:
        ens.validate()
    except ValueError as e:
        raise ConfigError(f"ensemble/ranges: {e}") from e

    feats = {
        "ngrams": _parse_int(conf.get("features", "ngrams", "1"), "features.ngrams"),
        "max_features": _parse_int(conf.get("features", "max_features", "20000"),
                                   "features.max_features"),
        "min_df": _parse_int(conf.get("features", "min_df", "1"), "features.min_df"),
        "max_len": _parse_int(conf.get("features", "max_len", "100"),
                              "features.max_len"),
        "embed_dim": _parse_int(conf.get("features", "embed_dim", "50"),
                                "features.embed_dim"),
    }
    glove_path = conf.input_path("features", "glove", required=False)

    outputs = {}
    for key in ("checkpoint", "history", "report"):
        outputs[key] = conf.get("output", key, required=True)

    return RunConfig(task=task, inputs=inputs, valid_fraction=valid_fraction,
                     split_seed=split_seed, ensemble=ens, features=feats,
                     outputs=outputs, glove_path=glove_path)


def _load_image_task(inputs):
    train_x, train_y = dt.load_mnist_idx(inputs["train_images"], inputs["train_labels"])
    test_x, test_y = dt.load_mnist_idx(inputs["test_images"], inputs["test_labels"])
    if train_x.shape[1:] != test_x.shape[1:]:
        raise dt.DataError(
            f"train images are {train_x.shape[1:]}, test images are {test_x.shape[1:]}")
    n_classes = int(train_y.max()) + 1
    if test_y.max() >= n_classes:
        raise dt.DataError(
            f"test labels reach {test_y.max()}, training data has {n_classes} classes")
    return train_x, train_y, test_x, test_y, n_classes


def _load_text_task(inputs):
    train_texts, train_y, names = dt.load_text_corpus(inputs["train"])
    test_texts, raw_test_y, test_names = dt.load_text_corpus(inputs["test"])
    unknown = sorted(set(test_names) - set(names))
    if unknown:
        raise dt.DataError(
            f"test labels {unknown} never appear in the training corpus")
    remap = {name: i for i, name in enumerate(names)}
    test_y = np.array([remap[test_names[y]] for y in raw_test_y], dtype=np.int64)
    return train_texts, train_y, test_texts, test_y, names


def _metric_lines(y_true, y_pred, n_classes):
    scores = mt.micro_scores(y_true, y_pred, n_classes)
    return [
        f"accuracy={mt.accuracy(y_true, y_pred):.6f}",
        f"micro_precision={scores.precision:.6f}",
        f"micro_recall={scores.recall:.6f}",
        f"micro_f1={scores.f1:.6f}",
    ]


def _write_text(path, lines):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _progress_printer(total_epochs):
    def emit(event):
        if event["event"] == "epoch":
            print("model {model_id} [{family}] epoch {epoch}/{total} "
                  "loss={loss:.4f} acc={accuracy:.4f}".format(
                      total=total_epochs, **event), file=sys.stderr)
        elif event["event"] == "model_failed":
            print("model {model_id} [{family}] failed: {error}".format(**event),
                  file=sys.stderr)
    return emit


def cmd_train(config_path):
    """Train an ensemble per the config; write checkpoint, history, report."""
    try:
        rc = load_run_config(config_path)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1

    try:
        if rc.task == "image":
            train_x, train_y, test_x, test_y, n_classes = _load_image_task(rc.inputs)
            space = FeatureSpace.for_images(
                (train_x.shape[1], train_x.shape[2], 1), n_classes)
        else:
            train_x, train_y, test_x, test_y, names = _load_text_task(rc.inputs)
            fo = rc.features
            space = FeatureSpace.for_text(
                train_x, names, n_max=fo["ngrams"],
                max_features=fo["max_features"], min_df=fo["min_df"],
                max_len=fo["max_len"], embed_dim=fo["embed_dim"])
        glove_table = None
        if rc.glove_path is not None:
            try:
                glove_table = ft.glove_load(rc.glove_path)
            except ValueError as e:
                raise dt.DataError(f"{rc.glove_path}: {e}") from e
            if glove_table.dim != space.embed_dim:
                raise dt.DataError(
                    f"glove vectors have {glove_table.dim} dimensions, "
                    f"features.embed_dim is {space.embed_dim}")
        if rc.task == "text":
            tr_x, tr_y, va_x, va_y = _split_lists(train_x, train_y,
                                                  rc.valid_fraction, rc.split_seed)
        else:
            tr_x, tr_y, va_x, va_y = dt.train_valid_split(
                train_x, train_y, rc.valid_fraction, rc.split_seed)
    except (dt.DataError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2

    valid = (va_x, va_y) if len(va_y) else None
    try:
        ensemble = train_ensemble(rc.ensemble, space, (tr_x, tr_y), valid=valid,
                                  progress_sink=_progress_printer(rc.ensemble.epochs),
                                  glove_table=glove_table)
    except TrainingError as e:
        print(f"training failed: {e}", file=sys.stderr)
        return 3

    preds = ensemble.predict(test_x)
    lines = _metric_lines(test_y, preds, space.n_classes)

    parent = os.path.dirname(rc.outputs["checkpoint"])
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(rc.outputs["checkpoint"], "wb") as fh:
        save_checkpoint(ensemble, fh)
    history = ["epoch,model_id,family,loss,accuracy"]
    for epoch, model_id, family, loss, acc in ensemble.history_rows():
        history.append(f"{epoch},{model_id},{family},{loss!r},{acc!r}")
    _write_text(rc.outputs["history"], history)
    _write_text(rc.outputs["report"], lines)
    for line in lines:
        print(line)
    return 0


def _split_lists(texts, labels, fraction, seed):
    """train_valid_split for a python list x alongside an array y."""
    idx = np.arange(len(labels))
    tr_i, tr_y, va_i, va_y = dt.train_valid_split(idx, np.asarray(labels),
                                                  fraction, seed)
    return ([texts[i] for i in tr_i], tr_y, [texts[i] for i in va_i], va_y)


def _open_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            return load_checkpoint(fh)
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e


def _eval_inputs(ensemble, args):
    """Load and vet an eval/predict dataset against the checkpoint."""
    space = ensemble.space
    if space.kind == "image":
        if not args.images:
            raise dt.DataError("this checkpoint expects image input (--images)")
        if args.labels:
            x, y = dt.load_mnist_idx(args.images, args.labels)
        else:
            x, y = dt.load_idx_images(args.images), None
        return x, y
    if not args.text:
        raise dt.DataError("this checkpoint expects text input (--text)")
    texts, raw_y, names = dt.load_text_corpus(args.text)
    remap = {}
    for name in names:
        if name not in space.label_names:
            raise dt.DataError(
                f"label {name!r} is not one of the checkpoint's classes "
                f"{space.label_names}")
        remap[names.index(name)] = space.label_names.index(name)
    y = np.array([remap[v] for v in raw_y], dtype=np.int64)
    return texts, y


def cmd_eval(args):
    """Score a checkpoint on a labelled dataset; print metric=value lines."""
    try:
        ensemble = _open_checkpoint(args.checkpoint)
    except CheckpointError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return 1
    try:
        x, y = _eval_inputs(ensemble, args)
        if y is None:
            raise dt.DataError("eval needs labels (--labels for image data)")
        k = ensemble.space.n_classes
        if y.max() >= k or y.min() < 0:
            raise dt.DataError(
                f"labels reach {y.max()}, checkpoint has {k} classes")
        classes_seen = len(np.unique(y))
        if classes_seen != k:
            raise dt.DataError(
                f"dataset covers {classes_seen} classes, checkpoint expects {k}")
        preds = ensemble.predict(x)
    except (dt.DataError, ShapeError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    for line in _metric_lines(y, preds, ensemble.space.n_classes):
        print(line)
    return 0


def cmd_predict(args):
    """Print one predicted label per input image or text line."""
    try:
        ensemble = _open_checkpoint(args.checkpoint)
    except CheckpointError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return 1
    space = ensemble.space
    try:
        if space.kind == "image":
            if not args.images:
                raise dt.DataError("this checkpoint expects image input (--images)")
            x = dt.load_idx_images(args.images)
        else:
            if not args.text:
                raise dt.DataError("this checkpoint expects text input (--text)")
            try:
                with open(args.text, "r", encoding="utf-8") as fh:
                    x = fh.read().splitlines()
            except OSError as e:
                raise dt.DataError(f"cannot read {args.text}: {e}") from e
            if not x:
                raise dt.DataError(f"{args.text}: no input lines")
        preds = ensemble.predict(x)
    except (dt.DataError, ShapeError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    for p in preds:
        print(space.label_names[int(p)])
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rmdl",
        description="Random multimodel deep learning: train ensembles of "
                    "randomly sampled DNN/CNN/RNN classifiers and combine "
                    "them by majority vote.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an ensemble from a config file")
    p_train.add_argument("config", help="INI run configuration")

    for name, helptext in (("eval", "score a checkpoint on labelled data"),
                           ("predict", "print labels for new inputs")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("checkpoint", help="checkpoint written by train")
        p.add_argument("--images", help="IDX image file")
        p.add_argument("--labels", help="IDX label file (eval)")
        p.add_argument("--text", help="text file: eval wants label<TAB>text "
                                      "lines, predict wants one document per line")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args.config)
    if args.command == "eval":
        return cmd_eval(args)
    return cmd_predict(args)


if __name__ == "__main__":
    sys.exit(main())
