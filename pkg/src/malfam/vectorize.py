"""Bag-of-n-grams vectorization and chi-squared term selection.

Every token list becomes namespaced terms "<channel>|<joined n-gram>".
N-gram members are joined with the unit separator (0x1F) so that token
boundaries can never collide with characters inside tokens.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import ingest
from .errors import DegenerateLabelsError, EmptyCorpusError, InvalidParamsError

JOINER = "\x1f"

# Per-channel n-gram orders.  TRID is one-hot: single tokens with the count
# clamped to 1.  Call sequences and UDP endpoints carry their information in
# local ordering, so they use trigrams only.
DEFAULT_CHANNEL_ORDERS = {
    ingest.TRID: (1,),
    ingest.PE_RESOURCE_LIST: (1, 2, 3),
    ingest.EMBEDDED_DOMAINS_LIST: (1,),
    ingest.IMPORTS_LIST: (1, 2, 3),
    ingest.CONTACTED_URLS_LIST: (1, 2, 3),
    ingest.SIGNATURES: (1, 2, 3),
    ingest.BEHAVIOR_CALLS: (3,),
    ingest.BEHAVIOR_DLL_LOADED: (1, 2, 3),
    ingest.NETWORK_HTTP: (1, 2, 3),
    ingest.NETWORK_HOSTS: (1, 2, 3),
    ingest.STRINGS: (1, 2, 3),
    ingest.NETWORK_UDP_SRC: (3,),
    ingest.NETWORK_UDP_DST: (3,),
}

ONE_HOT_CHANNELS = frozenset({ingest.TRID})


def ngrams(tokens, orders):
    """All contiguous k-token windows for each order k, joined with 0x1F.

    Output is grouped by ascending order, each group in sequence order, so a
    list of length L yields sum_k max(0, L - k + 1) terms.
    """
    if not set(orders) <= {1, 2, 3}:
        raise InvalidParamsError(f"n-gram orders must be within {{1,2,3}}, got {sorted(orders)}")
    out = []
    for k in sorted(orders):
        if k == 1:
            out.extend(tokens)
        else:
            out.extend(JOINER.join(tokens[i:i + k]) for i in range(len(tokens) - k + 1))
    return out


def bag_terms(bag, channel_orders):
    """Namespaced terms of one feature bag, channel by channel."""
    terms = []
    for channel in channel_orders:
        tokens = bag.tokens(channel)
        if not tokens:
            continue
        prefix = channel + "|"
        terms.extend(prefix + g for g in ngrams(tokens, channel_orders[channel]))
    return terms


@dataclass
class Vocabulary:
    """Bijection between namespaced terms and column indices."""

    terms: list

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.terms == other.terms


def build_vocabulary(bags, channel_orders=None):
    """Collect every term occurring in the corpus, indexed lexicographically."""
    channel_orders = channel_orders or DEFAULT_CHANNEL_ORDERS
    seen = set()
    n_bags = 0
    for bag in bags:
        n_bags += 1
        seen.update(bag_terms(bag, channel_orders))
    if n_bags == 0:
        raise EmptyCorpusError("cannot build a vocabulary from zero bags")
    return Vocabulary(sorted(seen))


def vectorize_bag(bag, vocab, channel_orders=None):
    """Sparse column -> count map for one bag; out-of-vocabulary terms drop out."""
    channel_orders = channel_orders or DEFAULT_CHANNEL_ORDERS
    counts = {}
    one_hot_cols = set()
    for channel in channel_orders:
        tokens = bag.tokens(channel)
        if not tokens:
            continue
        prefix = channel + "|"
        clamp = channel in ONE_HOT_CHANNELS
        for gram in ngrams(tokens, channel_orders[channel]):
            col = vocab.index.get(prefix + gram)
            if col is None:
                continue
            counts[col] = counts.get(col, 0) + 1
            if clamp:
                one_hot_cols.add(col)
    for col in one_hot_cols:
        counts[col] = 1
    return counts


@dataclass(eq=False)
class TermMatrix:
    """Sparse sample x term count matrix with its vocabulary and row labels."""

    X: sp.csr_matrix
    row_ids: list
    labels: list
    vocab: Vocabulary

    @property
    def shape(self):
        return self.X.shape

    def rows(self, indices):
        """Row-subset view keeping vocabulary and label alignment."""
        indices = list(indices)
        return TermMatrix(self.X[indices], [self.row_ids[i] for i in indices],
                          [self.labels[i] for i in indices], self.vocab)

    def save(self, path):
        """Write header JSON to ``path`` and coordinate triples to ``<path>.coo``."""
        header = {
            "rows": self.X.shape[0],
            "cols": self.X.shape[1],
            "row_ids": self.row_ids,
            "labels": self.labels,
            "vocabulary": self.vocab.terms,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(header, fh)
        coo = self.X.tocoo()
        with open(str(path) + ".coo", "w", encoding="utf-8") as fh:
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r},{c},{v}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            header = json.load(fh)
        rows, cols, data = [], [], []
        with open(str(path) + ".coo", encoding="utf-8") as fh:
            for line in fh:
                r, c, v = line.rstrip("\n").split(",")
                rows.append(int(r))
                cols.append(int(c))
                data.append(int(v))
        shape = (header["rows"], header["cols"])
        X = sp.coo_matrix((data, (rows, cols)), shape=shape, dtype=np.int64).tocsr()
        return cls(X, header["row_ids"], header["labels"], Vocabulary(header["vocabulary"]))


def build_matrix(bags, row_ids, labels, vocab, channel_orders=None):
    """Vectorize bags row by row into one sparse count matrix."""
    channel_orders = channel_orders or DEFAULT_CHANNEL_ORDERS
    rows, cols, data = [], [], []
    n = 0
    for i, bag in enumerate(bags):
        n += 1
        for col, count in sorted(vectorize_bag(bag, vocab, channel_orders).items()):
            rows.append(i)
            cols.append(col)
            data.append(count)
    X = sp.coo_matrix((data, (rows, cols)), shape=(n, len(vocab)), dtype=np.int64).tocsr()
    return TermMatrix(X, list(row_ids), list(labels), vocab)


def chi2_rank(matrix):
    """Chi-squared score of every term against the class labels.

    For term t and class c, the observed mass O is the total count of t over
    rows of class c; expected mass E is row_total * class_total / grand_total.
    The score sums (O - E)^2 / E over classes, with zero-expectation cells
    contributing zero.
    """
    classes = sorted(set(matrix.labels))
    if len(classes) < 2:
        raise DegenerateLabelsError(f"need >= 2 classes, got {classes}")
    class_index = {c: j for j, c in enumerate(classes)}
    n, v = matrix.X.shape
    Y = np.zeros((n, len(classes)))
    for i, label in enumerate(matrix.labels):
        Y[i, class_index[label]] = 1.0

    observed = np.asarray((matrix.X.T @ Y))                     # V x C
    row_totals = observed.sum(axis=1, keepdims=True)            # per-term mass
    class_totals = observed.sum(axis=0, keepdims=True)          # per-class mass
    grand = row_totals.sum()
    if grand == 0:
        return np.zeros(v)
    expected = row_totals * class_totals / grand
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(expected > 0, (observed - expected) ** 2 / expected, 0.0)
    return contrib.sum(axis=1)


@dataclass
class SelectionMask:
    """Kept column indices (ascending) plus the score of every column."""

    kept: np.ndarray
    scores: np.ndarray

    def __eq__(self, other):
        return (isinstance(other, SelectionMask)
                and np.array_equal(self.kept, other.kept)
                and np.array_equal(self.scores, other.scores))

    def to_json(self):
        return {"kept": [int(i) for i in self.kept],
                "scores": [float(s) for s in self.scores]}

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["kept"], dtype=np.int64),
                   np.asarray(doc["scores"], dtype=np.float64))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def select_top_fraction(scores, fraction):
    """Keep the ceil(V * fraction) highest-scoring columns.

    Ties break toward the lower column index; the kept set is returned in
    ascending index order.
    """
    if not 0 < fraction <= 1:
        raise InvalidParamsError(f"fraction must be in (0,1], got {fraction}")
    scores = np.asarray(scores, dtype=np.float64)
    k = math.ceil(len(scores) * fraction)
    order = np.argsort(-scores, kind="stable")
    kept = np.sort(order[:k])
    return SelectionMask(kept, scores)
