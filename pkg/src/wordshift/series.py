"""Per-word time series: frequency, syntactic (POS divergence), distributional."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alignment import AlignmentCollection
from .corpus import (MissingWordError, TaggedCorpusSnapshot, TemporalCorpus,
                     Vocabulary, collect_tag_counts)
from .embedding import EmbeddingSpace

FREQUENCY = "frequency"
SYNTACTIC = "syntactic"
DISTRIBUTIONAL = "distributional"
METHODS = (FREQUENCY, SYNTACTIC, DISTRIBUTIONAL)


@dataclass
class WordTimeSeries:
    word: str
    method: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite series value for {self.word!r}")


@dataclass
class SeriesEnsemble:
    """Vocabulary-id-ordered matrix of series, one row per word."""

    method: str
    words: list[str]
    values: np.ndarray  # (|V|, n)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != len(self.words):
            raise ValueError("row count must match word list")

    @property
    def num_snapshots(self):
        return self.values.shape[1]

    def series(self, word_id: int) -> WordTimeSeries:
        return WordTimeSeries(self.words[word_id], self.method, self.values[word_id])


def frequency_series(vocab: Vocabulary, corpus: TemporalCorpus, word: str) -> WordTimeSeries:
    """Natural-log relative frequency of the word per snapshot."""
    wid = vocab.id(word)
    values = np.log(vocab.counts[wid] / corpus.token_counts)
    return WordTimeSeries(word, FREQUENCY, values)


def frequency_ensemble(vocab: Vocabulary, corpus: TemporalCorpus) -> SeriesEnsemble:
    values = np.log(vocab.counts / corpus.token_counts[np.newaxis, :])
    return SeriesEnsemble(FREQUENCY, list(vocab.words), values)


def jsd(p, q) -> float:
    """Jensen-Shannon divergence with base-2 logarithms, range [0, 1].

    Accepts any tag -> probability mappings; tags missing on one side count
    as probability 0, with the 0 log 0 := 0 convention.
    """
    tags = sorted(set(p) | set(q))
    acc = 0.0
    for tag in tags:
        pi = p.get(tag, 0.0)
        qi = q.get(tag, 0.0)
        m = 0.5 * (pi + qi)
        left = 0.5 * pi * math.log2(pi / m) if pi > 0.0 else 0.0
        right = 0.5 * qi * math.log2(qi / m) if qi > 0.0 else 0.0
        # one commutative add per tag keeps jsd(p, q) == jsd(q, p) exactly
        acc += left + right
    # clamp float fuzz; the divergence is [0, 1] by construction
    return min(1.0, max(0.0, acc))


def _tag_probs(counter):
    total = sum(counter.values())
    return {tag: c / total for tag, c in counter.items()}


def syntactic_series(corpus: TemporalCorpus, word: str) -> WordTimeSeries:
    """Divergence of the word's POS distribution from its snapshot-0 one."""
    dists = []
    for snap in corpus:
        if not isinstance(snap, TaggedCorpusSnapshot):
            raise TypeError(f"snapshot {snap.label.label!r} carries no POS tags")
        counts = collect_tag_counts(snap, words={word}).get(word)
        if not counts:
            raise MissingWordError(
                f"{word!r} does not occur in snapshot {snap.label.label!r}"
            )
        dists.append(_tag_probs(counts))
    values = np.array([0.0] + [jsd(dists[0], q) for q in dists[1:]])
    return WordTimeSeries(word, SYNTACTIC, values)


def syntactic_ensemble(corpus: TemporalCorpus, vocab: Vocabulary) -> SeriesEnsemble:
    """One pass per snapshot collecting tag counts for the whole vocabulary."""
    words = set(vocab.words)
    per_snapshot = []
    for snap in corpus:
        if not isinstance(snap, TaggedCorpusSnapshot):
            raise TypeError(f"snapshot {snap.label.label!r} carries no POS tags")
        per_snapshot.append(collect_tag_counts(snap, words=words))

    values = np.zeros((len(vocab), len(corpus)))
    for wid, word in enumerate(vocab.words):
        base = per_snapshot[0].get(word)
        if not base:
            raise MissingWordError(f"{word!r} missing from snapshot 0 tag counts")
        p0 = _tag_probs(base)
        for t in range(1, len(corpus)):
            counts = per_snapshot[t].get(word)
            if not counts:
                raise MissingWordError(
                    f"{word!r} missing from snapshot {corpus.labels[t]!r} tag counts"
                )
            values[wid, t] = jsd(p0, _tag_probs(counts))
    return SeriesEnsemble(SYNTACTIC, list(vocab.words), values)


def _cosine_distance(warped: np.ndarray, base: np.ndarray) -> float:
    nw = np.linalg.norm(warped)
    nb = np.linalg.norm(base)
    if nw == 0.0 or nb == 0.0:
        raise ValueError("cannot take cosine distance of a zero vector")
    val = 1.0 - float(warped @ base) / (nw * nb)
    return min(2.0, max(0.0, val))


def distributional_series(spaces: list[EmbeddingSpace], maps: AlignmentCollection,
                          word_id: int, word: str | None = None) -> WordTimeSeries:
    """Cosine-distance displacement of the warped word from its base vector.

    The snapshot-0 entry uses the identity warp, so it is 0 up to float
    fuzz; values always land in [0, 2].
    """
    base = spaces[0].vectors[word_id]
    values = np.empty(len(spaces))
    for t, space in enumerate(spaces):
        warped = space.vectors[word_id] @ maps.matrix(word_id, t)
        values[t] = _cosine_distance(warped, base)
    return WordTimeSeries(word or str(word_id), DISTRIBUTIONAL, values)


def distributional_ensemble(spaces: list[EmbeddingSpace], maps: AlignmentCollection,
                            words: list[str]) -> SeriesEnsemble:
    nwords = len(words)
    nsnap = len(spaces)
    base = spaces[0].vectors
    base_norms = np.linalg.norm(base, axis=1)
    values = np.empty((nwords, nsnap))
    for t, space in enumerate(spaces):
        if t == 0:
            warped = space.vectors
        else:
            warped = np.einsum("wd,wde->we", space.vectors, maps.matrices_for(t))
        norms = np.linalg.norm(warped, axis=1)
        if np.any(norms == 0.0) or np.any(base_norms == 0.0):
            raise ValueError("zero-norm vector in distributional series")
        cos = np.einsum("wd,wd->w", warped, base) / (norms * base_norms)
        values[:, t] = np.clip(1.0 - cos, 0.0, 2.0)
    return SeriesEnsemble(DISTRIBUTIONAL, list(words), values)


def write_series_csv(ensembles: list[SeriesEnsemble], labels: list[str], path) -> None:
    """Long-form dump: one "word,method,snapshot,value" row per (word, t)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "method", "snapshot", "value"])
        for ens in ensembles:
            for wid, word in enumerate(ens.words):
                for t, label in enumerate(labels):
                    writer.writerow([word, ens.method, label, f"{ens.values[wid, t]:.9g}"])
