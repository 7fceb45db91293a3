"""Random multimodel ensembles.

An ensemble is n = d + c + r independently trained models: d plain
feed-forward nets, c convolutional nets, r recurrent nets.  Every model's
depth, widths, kernel sizes, cell type, dropout rates and optimizer are
drawn from a generator seeded per model, so a (config, master seed) pair
pins the whole ensemble.  Prediction is majority vote over the models'
argmax outputs.
"""
import json
import math
import os
import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import features as ft
from . import nn
from . import optim
from .tensor import ShapeError

FAMILIES = ("dnn", "cnn", "rnn")

_MASK64 = (1 << 64) - 1


class TrainingError(Exception):
    """Raised when ensemble training cannot produce any usable model."""


class CheckpointError(Exception):
    """Raised for unreadable, corrupt, or wrong-version checkpoints."""


def model_seed(master_seed, index):
    """Per-model seed: splitmix64 of master + golden-ratio stride."""
    x = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK64
    return x ^ (x >> 31)


@dataclass
class SamplingRanges:
    """Inclusive bounds the architecture sampler draws from."""

    dnn_layers: tuple = (1, 3)
    dnn_units: tuple = (64, 512)
    dnn_dropout: tuple = (0.0, 0.5)
    cnn_blocks: tuple = (1, 3)
    cnn_filters: tuple = (16, 128)
    cnn_kernels: tuple = (3, 5)
    rnn_layers: tuple = (1, 2)
    rnn_units: tuple = (32, 256)

    def validate(self):
        for name in ("dnn_layers", "dnn_units", "cnn_blocks", "cnn_filters",
                     "rnn_layers", "rnn_units"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name}: need 1 <= min <= max, got ({lo}, {hi})")
        lo, hi = self.dnn_dropout
        if not 0.0 <= lo <= hi < 1.0:
            raise ValueError(f"dnn_dropout: need 0 <= min <= max < 1, got ({lo}, {hi})")
        if not self.cnn_kernels or any(k < 1 for k in self.cnn_kernels):
            raise ValueError("cnn_kernels: need a non-empty set of sizes >= 1")
        return self

    def to_dict(self):
        return {k: list(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) for k, v in d.items()}).validate()


@dataclass
class EnsembleConfig:
    """Counts, seed, sampling ranges and training budget for one run."""

    d: int = 1
    c: int = 1
    r: int = 1
    seed: int = 0
    ranges: SamplingRanges = field(default_factory=SamplingRanges)
    epochs: int = 10
    batch_size: int = 64
    optimizer_pool: tuple = optim.RANDOM_POOL

    @property
    def n(self):
        return self.d + self.c + self.r

    def validate(self):
        if min(self.d, self.c, self.r) < 0 or self.n < 1:
            raise ValueError(f"need d,c,r >= 0 and d+c+r >= 1, got {(self.d, self.c, self.r)}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.optimizer_pool:
            raise ValueError("optimizer pool is empty")
        for name in self.optimizer_pool:
            if name not in optim.OPTIMIZERS:
                raise ValueError(f"unknown optimizer {name!r} in pool")
        self.ranges.validate()
        return self

    def family_of(self, index):
        if index < self.d:
            return "dnn"
        if index < self.d + self.c:
            return "cnn"
        return "rnn"

    def to_dict(self):
        return {"d": self.d, "c": self.c, "r": self.r, "seed": self.seed,
                "ranges": self.ranges.to_dict(), "epochs": self.epochs,
                "batch_size": self.batch_size,
                "optimizer_pool": list(self.optimizer_pool)}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["ranges"] = SamplingRanges.from_dict(d["ranges"])
        d["optimizer_pool"] = tuple(d["optimizer_pool"])
        return cls(**d).validate()


@dataclass
class ArchitectureSpec:
    """A fully realized model blueprint: layer configs, optimizer, seed.

    Together with the class count this pins every parameter shape, so the
    same spec always rebuilds the same model.
    """

    family: str
    pipeline: str
    layers: list
    optimizer: dict
    seed: int
    input_desc: dict
    n_classes: int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def input_shape(self):
        desc = self.input_desc
        if desc["kind"] == "image":
            return tuple(desc["shape"])
        if desc["kind"] == "tfidf":
            return (desc["dim"],)
        if desc["kind"] == "sequence":
            return (desc["length"],)
        raise ValueError(f"unknown input kind {desc['kind']!r}")


def _uniform_int(rng, bounds):
    lo, hi = bounds
    return int(rng.integers(lo, hi + 1))


def _sample_dnn(rng, ranges, input_desc):
    layers = []
    if input_desc["kind"] == "image":
        layers.append({"kind": "flatten"})
    n_hidden = _uniform_int(rng, ranges.dnn_layers)
    for _ in range(n_hidden):
        width = _uniform_int(rng, ranges.dnn_units)
        rate = float(rng.uniform(ranges.dnn_dropout[0], ranges.dnn_dropout[1]))
        layers.append({"kind": "dense", "units": width})
        layers.append({"kind": "relu"})
        layers.append({"kind": "dropout", "p": rate})
    return layers


def _sample_cnn(rng, ranges, input_desc):
    layers = []
    if input_desc["kind"] == "sequence":
        layers.append({"kind": "embedding", "vocab_size": input_desc["vocab"],
                       "dim": input_desc["embed_dim"]})
        conv_kind, extent = "conv1d", input_desc["length"]
    else:
        h, w, _ = input_desc["shape"]
        conv_kind, extent = "conv2d", min(h, w)
    n_blocks = _uniform_int(rng, ranges.cnn_blocks)
    for _ in range(n_blocks):
        usable = [k for k in ranges.cnn_kernels if k <= extent]
        if not usable:
            break
        kernel = usable[int(rng.integers(0, len(usable)))]
        filters = _uniform_int(rng, ranges.cnn_filters)
        layers.append({"kind": conv_kind, "filters": filters,
                       "kernel": kernel, "stride": 1})
        layers.append({"kind": "relu"})
        extent = extent - kernel + 1
        if extent >= 2:
            layers.append({"kind": "maxpool", "window": 2, "stride": 2})
            extent //= 2
    layers.append({"kind": "flatten"})
    return layers


def _sample_rnn(rng, ranges, input_desc):
    layers = []
    if input_desc["kind"] == "sequence":
        layers.append({"kind": "embedding", "vocab_size": input_desc["vocab"],
                       "dim": input_desc["embed_dim"]})
    else:
        h, w, ch = input_desc["shape"]
        layers.append({"kind": "reshape", "target": [h, w * ch]})
    cell = ("lstm", "gru")[int(rng.integers(0, 2))]
    n_layers = _uniform_int(rng, ranges.rnn_layers)
    for i in range(n_layers):
        units = _uniform_int(rng, ranges.rnn_units)
        layers.append({"kind": cell, "units": units,
                       "return_sequences": i < n_layers - 1})
    return layers


_SAMPLERS = {"dnn": _sample_dnn, "cnn": _sample_cnn, "rnn": _sample_rnn}


def sample_architecture(family, ranges, seed, input_desc, n_classes,
                        optimizer_pool=optim.RANDOM_POOL):
    """Draw one model blueprint.

    All randomness comes from default_rng(seed): first the family's
    structure draws in layer order, then the optimizer pick.  CNN kernel
    choices are capped so the spatial extent never drops below 1, which
    can shorten the sampled block count.
    """
    if family not in _SAMPLERS:
        raise ValueError(f"unknown family {family!r}")
    if not optimizer_pool:
        raise ValueError("optimizer pool is empty")
    ranges.validate()
    rng = np.random.default_rng(seed)
    layers = _SAMPLERS[family](rng, ranges, input_desc)
    layers.append({"kind": "dense", "units": n_classes})
    opt_name = optimizer_pool[int(rng.integers(0, len(optimizer_pool)))]
    opt = optim.make_optimizer(opt_name)
    return ArchitectureSpec(
        family=family, pipeline=input_desc["kind"], layers=layers,
        optimizer={"name": opt_name, "hyper": opt.hyper()}, seed=int(seed),
        input_desc=dict(input_desc), n_classes=int(n_classes))


def build_model(spec, pretrained_rows=None):
    """Instantiate and initialize the network a spec describes.

    Parameter draws come from default_rng(spec.seed); the same generator
    then feeds dropout masks during training.  Pretrained embedding rows
    (index -> vector) overwrite the random init when given.
    """
    net = nn.Network([nn.layer_from_config(c) for c in spec.layers])
    net.build(spec.input_shape(), np.random.default_rng(spec.seed))
    if pretrained_rows:
        for layer in net.layers:
            if isinstance(layer, nn.Embedding):
                layer.load_pretrained(pretrained_rows)
    return net


def majority_vote_binary(votes):
    """Binary combiner floor(1/2 + (sum(y) - 1/2) / n).

    Equals the plurality winner for odd n; an even-n exact tie yields 0.
    """
    votes = [int(v) for v in votes]
    if not votes:
        raise ValueError("empty vote list")
    if any(v not in (0, 1) for v in votes):
        raise ValueError("binary votes must be 0 or 1")
    n = len(votes)
    return int(math.floor(0.5 + (sum(votes) - 0.5) / n))


def majority_vote_multiclass(per_model_probs):
    """Plurality over per-model argmax labels.

    Ties go to the label with the highest probability mass summed over
    all models, then to the lowest label index.  Sums use fsum, so the
    outcome is invariant under model reordering.
    """
    probs = np.asarray(per_model_probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0 or probs.shape[1] == 0:
        raise ValueError(f"expected a non-empty (n_models, K) array, got {probs.shape}")
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("probability rows must sum to 1")
    labels = np.argmax(probs, axis=1)
    counts = np.bincount(labels, minlength=probs.shape[1])
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if len(tied) == 1:
        return int(tied[0])
    mass = [math.fsum(probs[:, k]) for k in tied]
    best = max(range(len(tied)), key=lambda i: (mass[i], -tied[i]))
    return int(tied[best])


class FeatureSpace:
    """How raw inputs become model inputs, frozen at training time.

    Image tasks carry the pixel grid shape; text tasks carry the fitted
    vocabulary plus sequence settings.  The same object is serialized
    into checkpoints so evaluation sees the identical mapping.
    """

    def __init__(self, kind, n_classes, label_names, image_shape=None,
                 vocab=None, max_len=None, embed_dim=None):
        self.kind = kind
        self.n_classes = int(n_classes)
        self.label_names = list(label_names)
        self.image_shape = tuple(image_shape) if image_shape else None
        self.vocab = vocab
        self.max_len = max_len
        self.embed_dim = embed_dim

    @classmethod
    def for_images(cls, shape, n_classes, label_names=None):
        if label_names is None:
            label_names = [str(i) for i in range(n_classes)]
        return cls("image", n_classes, label_names, image_shape=shape)

    @classmethod
    def for_text(cls, texts, label_names, n_max=1, max_features=20000,
                 min_df=1, max_len=100, embed_dim=50):
        token_docs = [ft.tokenize(t) for t in texts]
        vocab = ft.tfidf_fit(token_docs, n_max=n_max,
                             max_size=max_features, min_df=min_df)
        if not vocab.terms:
            raise ValueError("fitted vocabulary is empty")
        return cls("text", len(label_names), label_names, vocab=vocab,
                   max_len=int(max_len), embed_dim=int(embed_dim))

    def input_desc(self, pipeline):
        if pipeline == "image":
            return {"kind": "image", "shape": list(self.image_shape)}
        if pipeline == "tfidf":
            return {"kind": "tfidf", "dim": len(self.vocab.terms)}
        if pipeline == "sequence":
            return {"kind": "sequence", "length": self.max_len,
                    "vocab": self.vocab.size, "embed_dim": self.embed_dim}
        raise ValueError(f"unknown pipeline {pipeline!r}")

    def pipeline_for(self, family):
        if self.kind == "image":
            return "image"
        return "tfidf" if family == "dnn" else "sequence"

    def transform(self, raw, pipelines):
        """Raw inputs -> {pipeline: model-ready array} for the asked set."""
        out = {}
        if self.kind == "image":
            images = np.asarray(raw)
            if images.ndim == 3:
                images = images[..., None]
            if images.shape[1:] != self.image_shape:
                raise ShapeError(
                    f"images have per-sample shape {images.shape[1:]}, "
                    f"this ensemble expects {self.image_shape}")
            if "image" in pipelines:
                out["image"] = ft.normalize_image(images)
            return out
        token_docs = [ft.tokenize(t) for t in raw]
        if "tfidf" in pipelines:
            out["tfidf"] = ft.tfidf_transform(token_docs, self.vocab)
        if "sequence" in pipelines:
            out["sequence"] = ft.encode_documents(token_docs, self.vocab, self.max_len)
        return out

    def to_dict(self):
        d = {"kind": self.kind, "n_classes": self.n_classes,
             "label_names": self.label_names}
        if self.kind == "image":
            d["image_shape"] = list(self.image_shape)
        else:
            d["vocab"] = {"terms": self.vocab.terms, "df": list(self.vocab.df),
                          "n_docs": self.vocab.n_docs,
                          "n_max": self.vocab.n_max}
            d["max_len"] = self.max_len
            d["embed_dim"] = self.embed_dim
        return d

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "image":
            return cls.for_images(d["image_shape"], d["n_classes"], d["label_names"])
        vocab = ft.Vocabulary()
        vd = d["vocab"]
        vocab.terms = list(vd["terms"])
        vocab.df = list(vd["df"])
        vocab.n_docs = vd["n_docs"]
        vocab.n_max = vd["n_max"]
        vocab.index = {t: i + 1 for i, t in enumerate(vocab.terms)}
        return cls("text", d["n_classes"], d["label_names"], vocab=vocab,
                   max_len=d["max_len"], embed_dim=d["embed_dim"])


class ModelRecord:
    """One ensemble member: its spec, its trained network, its fate."""

    def __init__(self, model_id, spec):
        self.model_id = model_id
        self.spec = spec
        self.network = None
        self.optimizer = None
        self.pretrained = None
        self.status = "pending"
        self.error = None
        self.history = []

    @property
    def ok(self):
        return self.status == "trained"


class Ensemble:
    """Trained model collection plus the feature space they share."""

    def __init__(self, config, space, records, vote_mode=None):
        self.config = config
        self.space = space
        self.records = list(records)
        if vote_mode is None:
            vote_mode = "binary-eq5" if space.n_classes == 2 else "plurality"
        self.vote_mode = vote_mode

    @property
    def active_records(self):
        return [r for r in self.records if r.ok]

    def history_rows(self):
        """Per-epoch (epoch, model_id, family, loss, accuracy), model order."""
        rows = []
        for rec in self.records:
            rows.extend(rec.history)
        rows.sort(key=lambda t: (t[0], t[1]))
        return rows

    def predict_proba(self, raw):
        """Per-item per-model class probabilities, shape (N, n_active, K)."""
        active = self.active_records
        if not active:
            raise TrainingError("no trained models to predict with")
        pipelines = {r.spec.pipeline for r in active}
        arrays = self.space.transform(raw, pipelines)
        n = len(next(iter(arrays.values())))
        out = np.empty((n, len(active), self.space.n_classes))
        for j, rec in enumerate(active):
            out[:, j, :] = _model_probs(rec.network, arrays[rec.spec.pipeline])
        return out

    def predict(self, raw):
        """Majority-vote labels, one per input item."""
        probs = self.predict_proba(raw)
        labels = np.empty(probs.shape[0], dtype=np.int64)
        for i in range(probs.shape[0]):
            if self.vote_mode == "binary-eq5":
                bits = np.argmax(probs[i], axis=1)
                labels[i] = majority_vote_binary(bits)
            else:
                labels[i] = majority_vote_multiclass(probs[i])
        return labels


_EVAL_BATCH = 256


def _model_probs(network, x):
    chunks = []
    for start in range(0, len(x), _EVAL_BATCH):
        logits = network.forward(x[start:start + _EVAL_BATCH], train=False)
        chunks.append(nn.softmax(logits))
    return np.concatenate(chunks, axis=0)


def predict_ensemble(ensemble, raw):
    return ensemble.predict(raw)


def predict_proba(ensemble, raw):
    return ensemble.predict_proba(raw)


def _train_single(rec, x, y, x_valid, y_valid, config, emit):
    """Fit one member start to finish; returns nothing, mutates rec."""
    net = build_model(rec.spec, pretrained_rows=rec.pretrained)
    opt = optim.make_optimizer(rec.spec.optimizer["name"],
                               **rec.spec.optimizer["hyper"])
    opt.bind(net.param_arrays())
    rng = net.rng
    n = len(y)
    for epoch in range(1, config.epochs + 1):
        losses = []
        for idx in _shuffled_batches(n, config.batch_size, rng):
            logits = net.forward(x[idx], train=True)
            loss, grad = nn.cross_entropy(logits, y[idx])
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            net.zero_grads()
            net.backward(grad)
            opt.step(net.grad_arrays())
            losses.append(loss)
        epoch_loss = math.fsum(losses) / len(losses)
        if x_valid is not None and len(y_valid):
            preds = np.argmax(_model_probs(net, x_valid), axis=1)
            acc = float(np.mean(preds == y_valid))
        else:
            preds = np.argmax(_model_probs(net, x), axis=1)
            acc = float(np.mean(preds == y))
        rec.history.append((epoch, rec.model_id, rec.spec.family, epoch_loss, acc))
        emit({"event": "epoch", "model_id": rec.model_id,
              "family": rec.spec.family, "epoch": epoch,
              "loss": epoch_loss, "accuracy": acc})
    rec.network = net
    rec.optimizer = opt
    rec.status = "trained"


def _shuffled_batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _worker_count(n_models):
    cap = os.environ.get("RMDL_THREADS")
    if cap is not None:
        try:
            cap = int(cap)
        except ValueError:
            raise ValueError(f"RMDL_THREADS must be an integer, got {cap!r}")
        if cap < 1:
            raise ValueError(f"RMDL_THREADS must be >= 1, got {cap}")
        return min(n_models, cap)
    return n_models


def train_ensemble(config, space, train, valid=None, progress_sink=None,
                   glove_table=None):
    """Sample, build and fit all n members; returns the Ensemble.

    Members train concurrently (one thread each, capped by RMDL_THREADS)
    with no shared mutable state; each draws from its own seeded
    generator, so results do not depend on scheduling.  A member whose
    loss or gradients go non-finite is marked failed and excluded from
    voting; if every member fails the run fails.
    """
    config.validate()
    raw_train, y_train = train
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(y_train) == 0:
        raise TrainingError("training set is empty")
    if y_train.min() < 0 or y_train.max() >= space.n_classes:
        raise TrainingError(
            f"training labels must lie in [0, {space.n_classes})")

    records = []
    for i in range(config.n):
        family = config.family_of(i)
        pipeline = space.pipeline_for(family)
        spec = sample_architecture(
            family, config.ranges, model_seed(config.seed, i),
            space.input_desc(pipeline), space.n_classes,
            optimizer_pool=config.optimizer_pool)
        records.append(ModelRecord(i, spec))

    if glove_table is not None and space.kind == "text":
        rows = ft.pretrained_rows(space.vocab, glove_table)
        for rec in records:
            if any(c["kind"] == "embedding" for c in rec.spec.layers):
                rec.pretrained = rows

    pipelines = {rec.spec.pipeline for rec in records}
    x_train = space.transform(raw_train, pipelines)
    if valid is not None:
        raw_valid, y_valid = valid
        y_valid = np.asarray(y_valid, dtype=np.int64)
        x_valid = space.transform(raw_valid, pipelines)
    else:
        y_valid, x_valid = None, {}

    sink_lock = threading.Lock()

    def emit(event):
        if progress_sink is not None:
            with sink_lock:
                progress_sink(event)

    def run(rec):
        try:
            _train_single(
                rec, x_train[rec.spec.pipeline], y_train,
                x_valid.get(rec.spec.pipeline), y_valid, config, emit)
        except (FloatingPointError, ArithmeticError) as e:
            rec.status = "failed"
            rec.error = str(e)
            rec.network = None
            rec.optimizer = None
            emit({"event": "model_failed", "model_id": rec.model_id,
                  "family": rec.spec.family, "error": rec.error})

    with ThreadPoolExecutor(max_workers=_worker_count(config.n)) as pool:
        futures = [pool.submit(run, rec) for rec in records]
        for f in futures:
            f.result()

    if not any(rec.ok for rec in records):
        details = "; ".join(f"model {r.model_id}: {r.error}" for r in records)
        raise TrainingError(f"all {config.n} models failed ({details})")
    return Ensemble(config, space, records)


# ---------------------------------------------------------------------------
# Checkpoint container.
#
#   magic "RMDL" | u16 version | u64 len | header JSON
#   then per stored model:
#     u64 len | model JSON | parameter + optimizer arrays (float64 LE,
#     manifest order) | u32 CRC32 over (model JSON + arrays)
#
# The header carries the ensemble config, feature space, vote mode and
# per-model status; failed members keep their spec but store no arrays.
# ---------------------------------------------------------------------------

_MAGIC = b"RMDL"
_VERSION = 1


def _json_bytes(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(ensemble, stream):
    """Write the ensemble to a binary stream, bit-reproducibly."""
    header = {
        "config": ensemble.config.to_dict(),
        "space": ensemble.space.to_dict(),
        "vote_mode": ensemble.vote_mode,
        "models": [{"model_id": r.model_id, "status": r.status,
                    "error": r.error} for r in ensemble.records],
    }
    hb = _json_bytes(header)
    stream.write(_MAGIC)
    stream.write(_VERSION.to_bytes(2, "little"))
    stream.write(len(hb).to_bytes(8, "little"))
    stream.write(hb)
    for rec in ensemble.records:
        if not rec.ok:
            continue
        params = rec.network.named_params()
        state = rec.optimizer.state_dict()
        doc = {
            "model_id": rec.model_id,
            "spec": rec.spec.to_dict(),
            "params": [[name, list(arr.shape)] for name, arr in params],
            "opt_state": [[key, list(state[key].shape)] for key in sorted(state)],
        }
        db = _json_bytes(doc)
        blob = bytearray(db)
        for _, arr in params:
            blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
        for key in sorted(state):
            blob += np.ascontiguousarray(state[key], dtype="<f8").tobytes()
        stream.write(len(db).to_bytes(8, "little"))
        stream.write(bytes(blob))
        stream.write((zlib.crc32(bytes(blob)) & 0xFFFFFFFF).to_bytes(4, "little"))


def _read_exact(stream, n, what):
    data = stream.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(stream):
    """Read a checkpoint back into a predicting Ensemble.

    Verifies magic, version, lengths, and each model's CRC32 before any
    array is accepted; failures raise CheckpointError.
    """
    if _read_exact(stream, 4, "magic") != _MAGIC:
        raise CheckpointError("bad magic; not an ensemble checkpoint")
    version = int.from_bytes(_read_exact(stream, 2, "version"), "little")
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    hlen = int.from_bytes(_read_exact(stream, 8, "header length"), "little")
    try:
        header = json.loads(_read_exact(stream, hlen, "header"))
    except ValueError as e:
        raise CheckpointError(f"unreadable header: {e}") from e
    config = EnsembleConfig.from_dict(header["config"])
    space = FeatureSpace.from_dict(header["space"])

    records = {}
    for meta in header["models"]:
        spec = None  # filled in below for stored models
        rec = ModelRecord(meta["model_id"], spec)
        rec.status = meta["status"]
        rec.error = meta["error"]
        records[meta["model_id"]] = rec

    while True:
        head = stream.read(8)
        if not head:
            break
        if len(head) != 8:
            raise CheckpointError("truncated checkpoint while reading model length")
        dlen = int.from_bytes(head, "little")
        db = _read_exact(stream, dlen, "model document")
        try:
            doc = json.loads(db)
        except ValueError as e:
            raise CheckpointError(f"unreadable model document: {e}") from e
        spec = ArchitectureSpec.from_dict(doc["spec"])
        rec = records.get(doc["model_id"])
        if rec is None:
            raise CheckpointError(f"model {doc['model_id']} not in header")
        rec.spec = spec
        crc = zlib.crc32(db)
        net = build_model(spec)
        named = dict(net.named_params())
        for name, shape in doc["params"]:
            arr = named.get(name)
            if arr is None or list(arr.shape) != shape:
                raise CheckpointError(f"parameter {name} does not fit spec")
            raw = _read_exact(stream, arr.size * 8, f"parameter {name}")
            crc = zlib.crc32(raw, crc)
            arr[...] = np.frombuffer(raw, dtype="<f8").reshape(arr.shape)
        opt = optim.make_optimizer(spec.optimizer["name"], **spec.optimizer["hyper"])
        opt.bind(net.param_arrays())
        state = {}
        for key, shape in doc["opt_state"]:
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(stream, count * 8, f"optimizer state {key}")
            crc = zlib.crc32(raw, crc)
            state[key] = np.frombuffer(raw, dtype="<f8").reshape(shape)
        stored = int.from_bytes(_read_exact(stream, 4, "checksum"), "little")
        if stored != (crc & 0xFFFFFFFF):
            raise CheckpointError(
                f"checksum mismatch for model {doc['model_id']}")
        if state:
            opt.load_state_dict(state)
        rec.network = net
        rec.optimizer = opt

    for rec in records.values():
        if rec.status == "trained" and rec.network is None:
            raise CheckpointError(
                f"model {rec.model_id} marked trained but has no stored arrays")

    ordered = [records[k] for k in sorted(records)]
    return Ensemble(config, space, ordered, vote_mode=header["vote_mode"])
