"""Feature extraction for text and images.

Text goes through one of two pipelines: a TF-IDF bag of n-grams for flat
classifiers, or token-index sequences feeding an embedding layer
(optionally warm-started from pretrained GloVe vectors) for models that
read word order.  Images just get rescaled to [0, 1].
"""
import re

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text):
    """Lowercase and return maximal alphanumeric runs, in order."""
    return _TOKEN_RE.findall(text.lower())


def ngram_counts(tokens, n_max):
    """Counts of all n-grams for n = 1..n_max; keys are space-joined."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    counts = {}
    for n in range(1, n_max + 1):
        for i in range(len(tokens) - n + 1):
            key = " ".join(tokens[i:i + n])
            counts[key] = counts.get(key, 0) + 1
    return counts


class Vocabulary:
    """Term -> index map in first-occurrence order; index 0 is reserved
    for padding and unseen terms."""

    def __init__(self):
        self.index = {}
        self.terms = []
        self.df = []
        self.n_docs = 0
        self.n_max = 1
        self._idf = None

    @classmethod
    def fit(cls, token_docs, n_max=1, max_size=None, min_df=1):
        """Build from an iterable of token lists.

        Terms are n-grams up to n_max.  A max_size cap keeps the most
        document-frequent terms, earliest occurrence breaking ties.
        """
        vocab = cls()
        df = {}
        order = {}
        for doc in token_docs:
            vocab.n_docs += 1
            for term in ngram_counts(doc, n_max):
                if term not in order:
                    order[term] = len(order)
                df[term] = df.get(term, 0) + 1
        kept = [t for t in order if df[t] >= min_df]
        kept.sort(key=lambda t: order[t])
        if max_size is not None and len(kept) > max_size:
            kept.sort(key=lambda t: (-df[t], order[t]))
            kept = kept[:max_size]
            kept.sort(key=lambda t: order[t])
        for term in kept:
            vocab.index[term] = len(vocab.terms) + 1
            vocab.terms.append(term)
            vocab.df.append(df[term])
        vocab.n_max = n_max
        return vocab

    @property
    def size(self):
        """Number of index slots including the reserved 0."""
        return len(self.terms) + 1

    def idf(self):
        """Smoothed inverse document frequency: ln((1+N)/(1+df)) + 1."""
        if self._idf is None:
            df = np.asarray(self.df, dtype=np.float64)
            self._idf = np.log((1.0 + self.n_docs) / (1.0 + df)) + 1.0
        return self._idf

    def encode(self, tokens, max_len):
        """Token indices padded/truncated to max_len; unknowns map to 0."""
        out = np.zeros(max_len, dtype=np.int64)
        for i, tok in enumerate(tokens[:max_len]):
            out[i] = self.index.get(tok, 0)
        return out


def tfidf_fit(token_docs, n_max=1, max_size=None, min_df=1):
    """Fit a Vocabulary for TF-IDF use (alias of Vocabulary.fit)."""
    return Vocabulary.fit(token_docs, n_max=n_max, max_size=max_size,
                          min_df=min_df)


def tfidf_transform(token_docs, vocab):
    """Dense (n_docs, |terms|) tf-idf matrix with L2-normalized rows.

    weight(t, d) = tf(t, d) * idf(t); column j holds vocab.terms[j].
    Terms outside the vocabulary are ignored; an all-zero row stays zero.
    """
    if not vocab.terms:
        raise ValueError("vocabulary is empty")
    idf = vocab.idf()
    out = np.zeros((len(token_docs), len(vocab.terms)))
    for i, doc in enumerate(token_docs):
        for term, tf in ngram_counts(doc, vocab.n_max).items():
            j = vocab.index.get(term)
            if j is not None:
                out[i, j - 1] = tf * idf[j - 1]
        norm = np.sqrt(np.sum(out[i] * out[i]))
        if norm > 0.0:
            out[i] /= norm
    return out


def encode_documents(token_docs, vocab, max_len):
    """Stack per-document index sequences into an (n, max_len) array."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    out = np.zeros((len(token_docs), max_len), dtype=np.int64)
    for i, doc in enumerate(token_docs):
        out[i] = vocab.encode(doc, max_len)
    return out


class EmbeddingTable:
    """Pretrained word vectors; unknown terms look up as zeros."""

    def __init__(self, dim, vectors=None):
        self.dim = int(dim)
        self.vectors = dict(vectors) if vectors else {}

    def get(self, term):
        """The stored vector, or None when the term is absent."""
        return self.vectors.get(term)

    def lookup(self, term):
        """The stored vector, or the zero vector when absent."""
        vec = self.vectors.get(term)
        return np.zeros(self.dim) if vec is None else vec

    def __len__(self):
        return len(self.vectors)


def glove_load(source):
    """Read GloVe text vectors: one 'word v1 v2 ...' line per term.

    Accepts a path or an open text stream.  The dimension is inferred
    from the first line; a line with a different component count raises
    ValueError naming the line number, as does an empty input.
    """
    if isinstance(source, (str, bytes)):
        with open(source, "r", encoding="utf-8") as fh:
            return glove_load(fh)
    dim = None
    vectors = {}
    for lineno, line in enumerate(source, 1):
        parts = line.rstrip("\n").split(" ")
        if len(parts) < 2:
            continue
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise ValueError(
                f"line {lineno}: expected {dim} components, got {len(values)}")
        vectors[word] = np.array([float(v) for v in values])
    if dim is None:
        raise ValueError("no vectors found in embedding input")
    return EmbeddingTable(dim, vectors)


def embed_document(tokens, table, max_len):
    """(max_len, D) matrix: row i is the vector of token i.

    Documents shorter than max_len are zero-padded; longer ones keep
    only their first max_len tokens.  Unknown tokens give zero rows.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    out = np.zeros((max_len, table.dim))
    for i, tok in enumerate(tokens[:max_len]):
        vec = table.get(tok)
        if vec is not None:
            out[i] = vec
    return out


def pretrained_rows(vocab, table):
    """Map vocabulary indices to pretrained vectors for known terms."""
    rows = {}
    for term, idx in vocab.index.items():
        vec = table.get(term)
        if vec is not None:
            rows[idx] = vec
    return rows


def normalize_image(x):
    """uint8 pixels -> float64 in [0, 1]."""
    return np.asarray(x, dtype=np.float64) / 255.0
