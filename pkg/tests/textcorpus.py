"""Deterministic synthetic 4-class topic corpus.

Each document mixes words from its own topic pool with cross-topic noise
and shared filler, so the task is learnable from unigrams but not
trivially separable.  Everything is pinned by the seed.
"""
import numpy as np

TOPICS = {
    "athletics": [
        "race", "sprint", "marathon", "coach", "stadium", "medal", "relay",
        "hurdle", "javelin", "team", "training", "record", "track", "jump",
        "finals", "referee",
    ],
    "astronomy": [
        "telescope", "galaxy", "nebula", "orbit", "comet", "eclipse",
        "quasar", "supernova", "planet", "lunar", "stellar", "cosmic",
        "asteroid", "observatory", "spectrum", "gravity",
    ],
    "economy": [
        "market", "inflation", "budget", "trade", "currency", "export",
        "tariff", "investment", "recession", "banking", "deficit", "stocks",
        "interest", "fiscal", "growth", "labor",
    ],
    "cuisine": [
        "recipe", "saffron", "roast", "simmer", "pastry", "garlic",
        "vinegar", "noodle", "skillet", "braise", "dessert", "spice",
        "butter", "oven", "grill", "flavor",
    ],
}

FILLER = [
    "the", "a", "of", "and", "to", "in", "for", "with", "on", "that",
    "this", "was", "is", "are", "from", "report", "week", "new", "city",
    "people", "year", "said", "about", "after", "more", "most", "during",
    "local",
]

LABELS = sorted(TOPICS)


def make_documents(n_docs, seed):
    """Return (texts, label_names) with labels cycling through the topics."""
    rng = np.random.default_rng(seed)
    pools = {name: list(words) for name, words in TOPICS.items()}
    texts = []
    labels = []
    for i in range(n_docs):
        label = LABELS[i % len(LABELS)]
        own = pools[label]
        others = [w for name in LABELS if name != label for w in pools[name]]
        length = int(rng.integers(8, 21))
        words = []
        for _ in range(length):
            u = rng.uniform()
            if u < 0.5:
                words.append(own[int(rng.integers(0, len(own)))])
            elif u < 0.65:
                words.append(others[int(rng.integers(0, len(others)))])
            else:
                words.append(FILLER[int(rng.integers(0, len(FILLER)))])
        texts.append(" ".join(words))
        labels.append(label)
    return texts, labels


def write_tsv(path, texts, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for label, text in zip(labels, texts):
            fh.write(f"{label}\t{text}\n")


def make_corpus_files(train_path, test_path, n_train=1600, n_test=400,
                      seed=20180514):
    """Write train/test TSVs; the two splits share no RNG draws."""
    texts, labels = make_documents(n_train, seed)
    write_tsv(train_path, texts, labels)
    texts, labels = make_documents(n_test, seed + 1)
    write_tsv(test_path, texts, labels)
