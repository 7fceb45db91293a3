"""Dataset loading and iteration.

Two on-disk formats are understood: the IDX image/label pair used by the
MNIST distribution (plain or gzip-compressed, detected by magic bytes),
and a two-column tab-separated text corpus, one ``label<TAB>text`` line
per document.
"""
import gzip
import struct

import numpy as np


class DataError(Exception):
    """Raised for unreadable or internally inconsistent dataset files."""


def _open_auto(path):
    """Open a file for binary reading, transparently gunzipping."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(2)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expect_magic):
    with _open_auto(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic != expect_magic:
        raise DataError(f"{path}: bad magic {magic}, expected {expect_magic}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataError(f"{path}: truncated IDX dimensions")
    dims = struct.unpack(f">{ndim}i", raw[4:header])
    count = int(np.prod(dims))
    body = raw[header:]
    if len(body) != count:
        raise DataError(
            f"{path}: payload is {len(body)} bytes, dimensions say {count}")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx_images(path):
    """Read an IDX image file alone; returns uint8 (N, H, W)."""
    images = _read_idx(path, 2051)
    if images.ndim != 3:
        raise DataError(f"{path}: expected 3 dimensions, got {images.ndim}")
    return images


def load_mnist_idx(images_path, labels_path):
    """Read an IDX image/label pair.

    Returns (images, labels): uint8 (N, H, W) pixel array and int64 (N,)
    labels.  Magic numbers are 2051 for images, 2049 for labels; a count
    mismatch between the two files is an error.
    """
    images = _read_idx(images_path, 2051)
    labels = _read_idx(labels_path, 2049)
    if images.ndim != 3:
        raise DataError(f"{images_path}: expected 3 dimensions, got {images.ndim}")
    if labels.ndim != 1:
        raise DataError(f"{labels_path}: expected 1 dimension, got {labels.ndim}")
    if images.shape[0] != labels.shape[0]:
        raise DataError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels")
    return images, labels.astype(np.int64)


def load_text_corpus(path):
    """Read a label<TAB>text corpus.

    Returns (texts, labels, label_names): the raw document strings, int64
    class indices, and the class names in sorted order (the index of a
    name in label_names is its class id).  Empty lines are skipped; a
    line without a tab or with an empty label is a DataError naming the
    line number.
    """
    texts = []
    raw_labels = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n").rstrip("\r")
                if not line:
                    continue
                if "\t" not in line:
                    raise DataError(f"{path}:{lineno}: expected label<TAB>text")
                label, text = line.split("\t", 1)
                if not label:
                    raise DataError(f"{path}:{lineno}: empty label")
                texts.append(text)
                raw_labels.append(label)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    if not texts:
        raise DataError(f"{path}: corpus is empty")
    label_names = sorted(set(raw_labels))
    name_to_id = {name: i for i, name in enumerate(label_names)}
    labels = np.array([name_to_id[l] for l in raw_labels], dtype=np.int64)
    return texts, labels, label_names


def train_valid_split(x, y, valid_fraction, seed):
    """Deterministic shuffled split.

    The permutation comes from default_rng(seed); the first
    floor(n * valid_fraction) shuffled rows form the validation part.
    Returns (x_train, y_train, x_valid, y_valid).
    """
    if not 0.0 <= valid_fraction < 1.0:
        raise ValueError(f"valid_fraction must be in [0, 1), got {valid_fraction}")
    n = len(y)
    if len(x) != n:
        raise ValueError(f"x has {len(x)} rows, y has {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_valid = int(n * valid_fraction)
    valid_idx, train_idx = perm[:n_valid], perm[n_valid:]
    return x[train_idx], y[train_idx], x[valid_idx], y[valid_idx]


def batch_indices(n, batch_size, rng=None):
    """Yield index arrays covering range(n) in batch_size chunks.

    With an rng the order is a fresh permutation, otherwise sequential.
    The final short batch is kept.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
