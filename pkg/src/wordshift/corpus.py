"""Time-sliced corpus loading, common vocabulary construction and POS statistics."""

from __future__ import annotations

import collections
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

PLAIN = "plain"
TAGGED = "tagged"


class CorpusFormatError(ValueError):
    """Raised when a corpus file violates the expected line format."""


class MissingWordError(KeyError):
    """Raised when a word required by an operation is absent from the data."""


class EmptyVocabularyError(ValueError):
    """Raised when the snapshot intersection leaves no vocabulary at all."""


@dataclass(frozen=True)
class SnapshotLabel:
    """Human-readable time identifier plus its position in temporal order."""

    label: str
    index: int


class CorpusSnapshot:
    """One time slice of the corpus.

    Documents are newline-delimited and whitespace-tokenized. The snapshot
    either streams from a file or wraps in-memory documents; both views are
    immutable after construction and re-iterate deterministically.
    """

    def __init__(self, label, path=None, docs=None, lowercase=False):
        if (path is None) == (docs is None):
            raise ValueError("exactly one of path/docs must be given")
        self.label = label
        self.path = Path(path) if path is not None else None
        self._docs = docs
        self.lowercase = lowercase
        self.token_count = sum(len(d) for d in self.documents())

    def _raw_lines(self):
        with open(self.path, encoding="utf-8") as fh:
            yield from fh

    def documents(self) -> Iterator[list[str]]:
        """Yield one token list per document (line)."""
        if self._docs is not None:
            for doc in self._docs:
                yield list(doc)
            return
        for line in self._raw_lines():
            tokens = line.split()
            if self.lowercase:
                tokens = [t.lower() for t in tokens]
            yield tokens

    def tokens(self) -> Iterator[str]:
        for doc in self.documents():
            yield from doc

    def __repr__(self):
        return f"{type(self).__name__}(label={self.label!r}, tokens={self.token_count})"


class TaggedCorpusSnapshot(CorpusSnapshot):
    """Snapshot whose tokens carry a POS tag joined by the final underscore.

    ``documents()`` yields bare word tokens so that every word-level consumer
    treats tagged and plain snapshots identically; ``tagged_documents()``
    exposes the (word, tag) pairs.
    """

    def __init__(self, label, path=None, docs=None, lowercase=False):
        # docs, when given, holds lists of (word, tag) pairs
        super().__init__(label, path=path, docs=docs, lowercase=lowercase)

    def tagged_documents(self) -> Iterator[list[tuple[str, str]]]:
        if self._docs is not None:
            for doc in self._docs:
                yield list(doc)
            return
        for lineno, line in enumerate(self._raw_lines(), start=1):
            doc = []
            for raw in line.split():
                word, sep, tag = raw.rpartition("_")
                if not sep or not word or not tag:
                    raise CorpusFormatError(
                        f"{self.path}:{lineno}: token {raw!r} is not word_TAG"
                    )
                if self.lowercase:
                    word = word.lower()
                doc.append((word, tag))
            yield doc

    def documents(self) -> Iterator[list[str]]:
        for doc in self.tagged_documents():
            yield [word for word, _ in doc]


def load_snapshot(path, format=PLAIN, label=None, index=0, lowercase=False):
    """Load one snapshot file, validating it and counting tokens.

    ``format`` is ``"plain"`` or ``"tagged"``; tagged tokens split on the
    final underscore ("new_york_NNP" is the word "new_york" tagged NNP).
    """
    path = Path(path)
    if label is None:
        label = SnapshotLabel(path.stem, index)
    elif not isinstance(label, SnapshotLabel):
        label = SnapshotLabel(str(label), index)
    if format == PLAIN:
        return CorpusSnapshot(label, path=path, lowercase=lowercase)
    if format == TAGGED:
        snap = TaggedCorpusSnapshot(label, path=path, lowercase=lowercase)
        return snap
    raise ValueError(f"unknown corpus format {format!r}")


class TemporalCorpus:
    """Ordered sequence of snapshots covering consecutive time periods."""

    def __init__(self, snapshots: Iterable[CorpusSnapshot]):
        self.snapshots = list(snapshots)
        if not self.snapshots:
            raise ValueError("a temporal corpus needs at least one snapshot")
        labels = [s.label.label for s in self.snapshots]
        if len(set(labels)) != len(labels):
            raise ValueError("snapshot labels must be unique")
        for i, snap in enumerate(self.snapshots):
            if snap.label.index != i:
                raise ValueError(
                    f"snapshot {snap.label.label!r} has index {snap.label.index}, expected {i}"
                )

    @classmethod
    def from_manifest(cls, manifest_path, format=PLAIN, lowercase=False):
        """Build a corpus from a manifest of "label<TAB>path" lines.

        Relative paths resolve against the manifest's directory.
        """
        manifest_path = Path(manifest_path)
        base = manifest_path.parent
        snapshots = []
        with open(manifest_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise CorpusFormatError(
                        f"{manifest_path}:{lineno}: expected 'label<TAB>path'"
                    )
                label, rel = parts
                snap_path = Path(rel)
                if not snap_path.is_absolute():
                    snap_path = base / snap_path
                snapshots.append(
                    load_snapshot(snap_path, format=format,
                                  label=label, index=len(snapshots),
                                  lowercase=lowercase)
                )
        return cls(snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, i) -> CorpusSnapshot:
        return self.snapshots[i]

    @property
    def labels(self) -> list[str]:
        return [s.label.label for s in self.snapshots]

    @property
    def token_counts(self) -> np.ndarray:
        return np.array([s.token_count for s in self.snapshots], dtype=np.int64)


class Vocabulary:
    """Dense word <-> id bijection with per-snapshot occurrence counts.

    Ids are assigned by descending total count, ties broken by the word
    string, so the mapping is deterministic for a given corpus.
    """

    def __init__(self, words: list[str], counts: np.ndarray, min_count: int):
        self.words = list(words)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.min_count = min_count
        if self.counts.shape[0] != len(self.words):
            raise ValueError("counts rows must match word list")
        self.word_to_id = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.word_to_id

    def id(self, word) -> int:
        try:
            return self.word_to_id[word]
        except KeyError:
            raise MissingWordError(word) from None

    def word(self, word_id) -> str:
        return self.words[word_id]

    def count(self, word, snapshot_index) -> int:
        """Occurrences of ``word`` in the given snapshot."""
        return int(self.counts[self.id(word), snapshot_index])

    @property
    def num_snapshots(self) -> int:
        return self.counts.shape[1]


def count_tokens(snapshot: CorpusSnapshot) -> collections.Counter:
    """Occurrence counts of every surface token in one snapshot."""
    counter = collections.Counter()
    for doc in snapshot.documents():
        counter.update(doc)
    return counter


def vocabulary_from_counters(per_snapshot: list[collections.Counter],
                             min_count: int) -> Vocabulary:
    """Intersect per-snapshot counters into the common vocabulary."""
    if min_count < 1:
        raise ValueError("min_count must be positive")
    if not per_snapshot:
        raise ValueError("need at least one snapshot")
    common = None
    for counter in per_snapshot:
        eligible = {w for w, c in counter.items() if c >= min_count}
        common = eligible if common is None else common & eligible
    if not common:
        raise EmptyVocabularyError(
            f"no word reaches count {min_count} in all {len(per_snapshot)} snapshots"
        )

    totals = {w: sum(c[w] for c in per_snapshot) for w in common}
    words = sorted(common, key=lambda w: (-totals[w], w))
    counts = np.zeros((len(words), len(per_snapshot)), dtype=np.int64)
    for i, w in enumerate(words):
        for t, counter in enumerate(per_snapshot):
            counts[i, t] = counter[w]
    return Vocabulary(words, counts, min_count)


def build_common_vocabulary(corpus: TemporalCorpus, min_count: int = 5) -> Vocabulary:
    """Intersect per-snapshot dictionaries, keeping words with
    count >= min_count in every snapshot."""
    return vocabulary_from_counters([count_tokens(s) for s in corpus], min_count)


class POSDistribution(dict):
    """Probability distribution over POS tags; values must sum to 1."""

    def __init__(self, probs):
        super().__init__(probs)
        if not self:
            raise ValueError("empty POS distribution")
        total = sum(self.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"POS probabilities sum to {total}, not 1")
        if any(p < 0 for p in self.values()):
            raise ValueError("POS probabilities must be non-negative")

    @classmethod
    def from_counts(cls, counts) -> "POSDistribution":
        total = sum(counts.values())
        if total <= 0:
            raise ValueError("POS counts are empty")
        return cls({tag: c / total for tag, c in counts.items()})


def collect_tag_counts(snapshot: TaggedCorpusSnapshot, words=None):
    """One pass over a tagged snapshot, returning {word: Counter(tag)}.

    ``words``, when given, restricts collection to that set.
    """
    counts: dict[str, collections.Counter] = collections.defaultdict(collections.Counter)
    for doc in snapshot.tagged_documents():
        for word, tag in doc:
            if words is None or word in words:
                counts[word][tag] += 1
    return counts


def pos_distribution(snapshot: TaggedCorpusSnapshot, word: str) -> POSDistribution:
    """Maximum-likelihood tag distribution for one word in one snapshot."""
    counter = collections.Counter()
    for doc in snapshot.tagged_documents():
        for w, tag in doc:
            if w == word:
                counter[tag] += 1
    if not counter:
        raise MissingWordError(word)
    return POSDistribution.from_counts(counter)


def modal_tag(tag_counts: collections.Counter) -> str:
    """Most frequent tag, ties broken alphabetically for determinism."""
    return min(tag_counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
