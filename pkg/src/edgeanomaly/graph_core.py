"""Node interning, edge corpora, train/calibration splitting, and edge-list CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EdgeCsvError",
    "NodeVocab",
    "Edge",
    "EdgeCorpus",
    "corpus_from_pairs",
    "split_train_calib",
    "read_edge_records",
    "parse_edge_csv",
    "write_edge_csv",
    "format_float",
]

_HEADER_PLAIN = ["src", "dst"]
_HEADER_LABELED = ["src", "dst", "label"]


class EdgeCsvError(ValueError):
    """Malformed edge-list file: bad header, missing fields, or bad label."""


def format_float(x: float) -> str:
    """Render a float with 17 significant digits so a reread is bit exact."""
    return format(float(x), ".17g")


class NodeVocab:
    """Dense interner mapping node labels to indices 0..W-1.

    Index W, one past the last interned label, is reserved for labels that
    were never interned. Downstream categorical distributions over nodes
    therefore use W+1 slots, the last one covering everything unseen.
    """

    def __init__(self, labels=()):
        self._labels: list[str] = []
        self._index: dict[str, int] = {}
        self._frozen = False
        for label in labels:
            self.intern(label)

    @property
    def num_nodes(self) -> int:
        """Count of distinct interned labels (the W above)."""
        return len(self._labels)

    @property
    def unseen_slot(self) -> int:
        return len(self._labels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "NodeVocab":
        self._frozen = True
        return self

    def intern(self, label: str) -> int:
        """Return the index for `label`, assigning the next free one if new."""
        if self._frozen:
            raise ValueError("cannot intern into a frozen vocabulary")
        idx = self._index.get(label)
        if idx is None:
            idx = len(self._labels)
            self._index[label] = idx
            self._labels.append(label)
        return idx

    def resolve(self, label: str) -> int:
        """Return the index for `label`, or the reserved unseen slot."""
        return self._index.get(label, self.unseen_slot)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __repr__(self) -> str:
        state = "frozen" if self._frozen else "open"
        return f"NodeVocab({self.num_nodes} labels, {state})"


@dataclass(frozen=True)
class Edge:
    """One directed edge, already interned to (sender, receiver) indices."""

    sender: int
    receiver: int

    def __post_init__(self):
        if self.sender < 0 or self.receiver < 0:
            raise ValueError("edge endpoints must be nonnegative indices")


class EdgeCorpus:
    """Immutable ordered multiset of directed edges over a shared vocabulary.

    Every endpoint index must be at most vocab.num_nodes: real nodes occupy
    0..W-1 and the reserved unseen slot is W.
    """

    def __init__(self, edges, vocab: NodeVocab):
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.vocab = vocab
        limit = vocab.num_nodes
        for pos, edge in enumerate(self.edges):
            if edge.sender > limit or edge.receiver > limit:
                raise ValueError(
                    f"edge {pos} endpoint out of range for vocabulary of size {limit}"
                )
        self.senders = np.array([e.sender for e in self.edges], dtype=np.int64)
        self.receivers = np.array([e.receiver for e in self.edges], dtype=np.int64)
        self.senders.flags.writeable = False
        self.receivers.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.edges)

    def subset(self, indices) -> "EdgeCorpus":
        return EdgeCorpus((self.edges[i] for i in indices), self.vocab)

    def __len__(self) -> int:
        return len(self.edges)

    def __repr__(self) -> str:
        return f"EdgeCorpus({self.n} edges, {self.vocab.num_nodes} nodes)"


def corpus_from_pairs(pairs, vocab: NodeVocab | None = None) -> EdgeCorpus:
    """Build a corpus from (src, dst) label pairs.

    Without a vocabulary, labels are interned in order of first appearance.
    A frozen vocabulary maps unknown labels to its reserved unseen slot.
    """
    if vocab is None:
        vocab = NodeVocab()
    lookup = vocab.resolve if vocab.frozen else vocab.intern
    edges = [Edge(lookup(src), lookup(dst)) for src, dst in pairs]
    return EdgeCorpus(edges, vocab)


def split_train_calib(corpus: EdgeCorpus, calib_fraction: float, seed: int):
    """Randomly split a corpus into (train, calib) without replacement.

    The calibration split holds floor(n * calib_fraction) edges and the
    training split the remaining ceil(n * (1 - calib_fraction)). Original
    edge order is kept inside each split; the same seed reproduces the same
    split exactly.
    """
    n = corpus.n
    if n < 2:
        raise ValueError("corpus too small to split")
    if not 0.0 < calib_fraction < 1.0:
        raise ValueError("calib_fraction must lie strictly between 0 and 1")
    n_calib = int(math.floor(n * calib_fraction))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    calib_idx = np.sort(perm[:n_calib])
    train_idx = np.sort(perm[n_calib:])
    return corpus.subset(train_idx), corpus.subset(calib_idx)


def read_edge_records(path):
    """Read a `src,dst[,label]` CSV into raw string pairs plus optional labels.

    The header row is required. Labels must be 0 or 1. Rows with missing or
    empty fields are rejected with the offending line number.
    """
    pairs: list[tuple[str, str]] = []
    labels: list[bool] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EdgeCsvError(f"{path}: missing header row")
        header = [field.strip() for field in header]
        if header == _HEADER_PLAIN:
            labeled = False
        elif header == _HEADER_LABELED:
            labeled = True
        else:
            raise EdgeCsvError(
                f"{path}: bad header {','.join(header)!r}, expected src,dst or src,dst,label"
            )
        expected = 3 if labeled else 2
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            row = [field.strip() for field in row]
            if len(row) != expected or any(field == "" for field in row):
                raise EdgeCsvError(
                    f"{path}:{lineno}: expected {expected} nonempty fields, got {len(row)}"
                )
            if labeled:
                if row[2] not in ("0", "1"):
                    raise EdgeCsvError(
                        f"{path}:{lineno}: label must be 0 or 1, got {row[2]!r}"
                    )
                labels.append(row[2] == "1")
            pairs.append((row[0], row[1]))
    return pairs, (np.array(labels, dtype=bool) if labeled else None)


def parse_edge_csv(path, vocab: NodeVocab | None = None):
    """Parse an edge CSV into (EdgeCorpus, optional label array)."""
    pairs, labels = read_edge_records(path)
    return corpus_from_pairs(pairs, vocab), labels


def write_edge_csv(path, pairs, labels=None) -> None:
    """Write (src, dst) label pairs as a `src,dst[,label]` CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if labels is None:
            writer.writerow(_HEADER_PLAIN)
            writer.writerows(pairs)
        else:
            if len(labels) != len(pairs):
                raise ValueError("labels and pairs must have equal length")
            writer.writerow(_HEADER_LABELED)
            for (src, dst), flag in zip(pairs, labels):
                writer.writerow([src, dst, int(bool(flag))])
