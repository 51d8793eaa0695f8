"""Controlled-perturbation benchmark for the detection methods.

A base corpus is duplicated into identical snapshots, donor words are
probabilistically replaced by receptor words in the later snapshots, and
each method is scored by the mean reciprocal rank of the receptors in its
p-value ranking. Higher MRR means the method surfaces the injected shifts.
"""

from __future__ import annotations

import collections
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import series as series_mod
from .alignment import align_all_to_base, default_neighborhood
from .changepoint import (ChangePointResult, DetectorConfig, detect_ensemble,
                          normalize_ensemble)
from .corpus import (CorpusSnapshot, SnapshotLabel, TaggedCorpusSnapshot,
                     TemporalCorpus, Vocabulary, collect_tag_counts,
                     count_tokens, modal_tag, vocabulary_from_counters)
from .embedding import EmbeddingSpace, TrainingConfig, train_snapshot


@dataclass(frozen=True)
class PerturbationPlan:
    """One donor -> receptor replacement experiment.

    Within snapshots [start, stop) every donor occurrence independently
    becomes the receptor with probability p_replacement.
    """

    donor: str
    receptor: str
    p_replacement: float
    start: int
    stop: int
    seed: int

    def __post_init__(self):
        if self.donor == self.receptor:
            raise ValueError("donor and receptor must differ")
        if not 0.0 <= self.p_replacement <= 1.0:
            raise ValueError("p_replacement must be in [0, 1]")
        if self.start < 0 or self.stop <= self.start:
            raise ValueError("bad perturbation snapshot range")


class _SnapshotView(CorpusSnapshot):
    """A snapshot sharing another snapshot's content under a new label."""

    def __init__(self, source: CorpusSnapshot, label: SnapshotLabel):
        self._source = source
        self.label = label
        self.path = source.path
        self._docs = None
        self.lowercase = source.lowercase
        self.token_count = source.token_count

    def documents(self):
        yield from self._source.documents()

    def content_key(self):
        return _content_key(self._source)


class _TaggedSnapshotView(_SnapshotView, TaggedCorpusSnapshot):
    def tagged_documents(self):
        yield from self._source.tagged_documents()

    def documents(self):
        for doc in self.tagged_documents():
            yield [w for w, _ in doc]


class _PerturbedSnapshot(CorpusSnapshot):
    """Lazy donor -> receptor replacement over a source snapshot.

    Replacement decisions derive from (plan.seed, snapshot index), so every
    iteration sees the same realization and token counts are untouched.
    Plans over pairwise-disjoint words stack flat in one wrapper; each keeps
    its own random stream, matching the one-wrapper-per-plan semantics.
    """

    def __init__(self, source: CorpusSnapshot, plans: list[PerturbationPlan]):
        self._source = source
        self._plans = list(plans)
        self.label = source.label
        self.path = None
        self._docs = None
        self.lowercase = source.lowercase
        self.token_count = source.token_count

    def touched_words(self):
        out = set()
        for p in self._plans:
            out.add(p.donor)
            out.add(p.receptor)
        return out

    def _streams(self):
        return [np.random.default_rng([p.seed, self.label.index])
                for p in self._plans]

    def documents(self):
        rngs = self._streams()
        by_donor = {p.donor: i for i, p in enumerate(self._plans)}
        plans = self._plans
        for doc in self._source.documents():
            out = []
            for tok in doc:
                i = by_donor.get(tok)
                if i is not None and rngs[i].random() < plans[i].p_replacement:
                    out.append(plans[i].receptor)
                else:
                    out.append(tok)
            yield out

    def content_key(self):
        return id(self)


class _PerturbedTaggedSnapshot(_PerturbedSnapshot, TaggedCorpusSnapshot):
    """Tagged variant; replaced tokens take the receptor's modal tag."""

    def __init__(self, source: TaggedCorpusSnapshot, plans, receptor_tags):
        super().__init__(source, plans)
        self._receptor_tags = list(receptor_tags)

    def tagged_documents(self):
        rngs = self._streams()
        by_donor = {p.donor: i for i, p in enumerate(self._plans)}
        plans = self._plans
        for doc in self._source.tagged_documents():
            out = []
            for word, tag in doc:
                i = by_donor.get(word)
                if i is not None and rngs[i].random() < plans[i].p_replacement:
                    out.append((plans[i].receptor, self._receptor_tags[i]))
                else:
                    out.append((word, tag))
            yield out

    def documents(self):
        for doc in self.tagged_documents():
            yield [w for w, _ in doc]


def _content_key(snapshot):
    if hasattr(snapshot, "content_key"):
        return snapshot.content_key()
    return id(snapshot)


def duplicate_corpus(base: CorpusSnapshot, n: int) -> TemporalCorpus:
    """n identical snapshots labeled "0".."n-1", all sharing the base content."""
    if n < 2:
        raise ValueError("a temporal corpus needs at least 2 snapshots")
    view = _TaggedSnapshotView if isinstance(base, TaggedCorpusSnapshot) else _SnapshotView
    return TemporalCorpus(
        [view(base, SnapshotLabel(str(i), i)) for i in range(n)]
    )


def perturb(corpus: TemporalCorpus, plan: PerturbationPlan,
            known_words=None) -> TemporalCorpus:
    """Apply one plan, returning a corpus with the in-range snapshots wrapped.

    ``known_words``, when given, is any container used to validate donor
    presence without re-scanning the corpus.
    """
    if plan.stop > len(corpus):
        raise ValueError("perturbation range exceeds snapshot count")
    if known_words is not None:
        present = plan.donor in known_words
    else:
        present = any(plan.donor in doc for doc in corpus[plan.start].documents())
    if not present:
        raise ValueError(f"donor {plan.donor!r} does not occur in the corpus")

    tagged = isinstance(corpus[plan.start], TaggedCorpusSnapshot)
    receptor_tag = None
    if tagged:
        counts = collect_tag_counts(corpus[plan.start], words={plan.receptor})
        if plan.receptor not in counts:
            raise ValueError(f"receptor {plan.receptor!r} has no tagged occurrences")
        receptor_tag = modal_tag(counts[plan.receptor])

    def wrap(snap):
        # stack onto an existing wrapper when the word sets cannot interact;
        # otherwise nest, preserving apply-in-order semantics
        if (isinstance(snap, _PerturbedSnapshot)
                and plan.donor not in snap.touched_words()
                and plan.receptor not in {p.donor for p in snap._plans}):
            if tagged:
                return _PerturbedTaggedSnapshot(
                    snap._source, snap._plans + [plan],
                    snap._receptor_tags + [receptor_tag])
            return _PerturbedSnapshot(snap._source, snap._plans + [plan])
        if tagged:
            return _PerturbedTaggedSnapshot(snap, [plan], [receptor_tag])
        return _PerturbedSnapshot(snap, [plan])

    snapshots = []
    for i, snap in enumerate(corpus):
        if plan.start <= i < plan.stop:
            snapshots.append(wrap(snap))
        else:
            snapshots.append(snap)
    return TemporalCorpus(snapshots)


def sample_word_pairs(vocab: Vocabulary, count: int, rng: np.random.Generator,
                      stopwords=frozenset(), same_pos: bool = False,
                      tagged_snapshot: TaggedCorpusSnapshot | None = None):
    """Uniform distinct (donor, receptor) pairs from the vocabulary.

    All sampled words are distinct across pairs. With ``same_pos`` both
    words of a pair must share their most frequent POS tag, which requires
    a tagged snapshot to measure.
    """
    eligible = [w for w in vocab.words if w not in stopwords]
    if not same_pos:
        if len(eligible) < 2 * count:
            raise ValueError(
                f"need {2 * count} eligible words, have {len(eligible)}"
            )
        picks = rng.choice(len(eligible), size=2 * count, replace=False)
        return [(eligible[picks[2 * i]], eligible[picks[2 * i + 1]])
                for i in range(count)]

    if tagged_snapshot is None:
        raise ValueError("same_pos sampling needs a tagged snapshot")
    tag_counts = collect_tag_counts(tagged_snapshot, words=set(eligible))
    by_tag: dict[str, list[str]] = collections.defaultdict(list)
    for word in eligible:
        if word in tag_counts:
            by_tag[modal_tag(tag_counts[word])].append(word)

    pool = [ws for ws in by_tag.values() if len(ws) >= 2]
    if sum(len(ws) // 2 for ws in pool) < count:
        raise ValueError("not enough same-POS words to sample the requested pairs")
    pairs = []
    for _ in range(count):
        flat = [w for ws in pool for w in ws if len(ws) >= 2]
        donor = flat[rng.integers(len(flat))]
        group = next(ws for ws in pool if donor in ws)
        group.remove(donor)
        receptor = group[rng.integers(len(group))]
        group.remove(receptor)
        pairs.append((donor, receptor))
        pool = [ws for ws in pool if len(ws) >= 2]
    return pairs


def mrr(ranks) -> float:
    """Mean reciprocal rank of a non-empty list of 1-based ranks."""
    ranks = list(ranks)
    if not ranks:
        raise ValueError("MRR of an empty query set")
    if any(r < 1 for r in ranks):
        raise ValueError("ranks are 1-based")
    return float(np.mean([1.0 / r for r in ranks]))


def rank_words_by_pvalue(results: list[ChangePointResult]) -> list[str]:
    """Words ordered best-detection-first.

    Ascending p-value, ties by descending max z-score, remaining ties by
    word id (the input order, which detect_ensemble emits).
    """
    order = sorted(range(len(results)),
                   key=lambda i: (results[i].min_pvalue, -results[i].max_zscore))
    return [results[i].word for i in order]


@dataclass
class BenchResult:
    method: str
    p_replacement: float
    pairs: list[tuple[str, str]]
    ranks: list[int]
    mrr: float


def _train_spaces_dedup(corpus, vocab, config) -> list[EmbeddingSpace]:
    """Train one space per distinct snapshot content, sharing the vectors.

    Identical text trained with the same seed yields identical vectors, so
    duplicated snapshots reuse one training run.
    """
    groups: dict = {}
    for i, snap in enumerate(corpus):
        groups.setdefault(_content_key(snap), []).append(i)
    spaces: list[EmbeddingSpace | None] = [None] * len(corpus)
    for indices in groups.values():
        first = corpus[indices[0]]
        trained = train_snapshot(first, vocab, config)
        for i in indices:
            spaces[i] = EmbeddingSpace(corpus.labels[i], trained.vectors,
                                       normalized=True)
    return spaces


def _method_results(method, corpus, vocab, training, detector, k, ridge):
    if method == series_mod.FREQUENCY:
        ensemble = series_mod.frequency_ensemble(vocab, corpus)
    elif method == series_mod.SYNTACTIC:
        ensemble = series_mod.syntactic_ensemble(corpus, vocab)
    elif method == series_mod.DISTRIBUTIONAL:
        spaces = _train_spaces_dedup(corpus, vocab, training)
        if k is None:
            k = default_neighborhood(training.dim, len(vocab))
        maps = align_all_to_base(spaces, k=k, ridge=ridge)
        ensemble = series_mod.distributional_ensemble(spaces, maps, vocab.words)
    else:
        raise ValueError(f"unknown method {method!r}")
    normalized = normalize_ensemble(ensemble)
    return detect_ensemble(normalized, detector, labels=corpus.labels)


def run_bench(base: CorpusSnapshot, *, snapshots: int = 20,
              p_grid=(0.2, 0.4, 0.6, 0.8, 1.0), n_pairs: int = 20,
              pairs=None, methods=(series_mod.FREQUENCY, series_mod.DISTRIBUTIONAL),
              training: TrainingConfig | None = None,
              detector: DetectorConfig | None = None,
              min_count: int = 5, k: int | None = None, ridge: float = 1e-3,
              stopwords=frozenset(), same_pos: bool = False,
              seed: int = 1, perturb_range=None) -> list[BenchResult]:
    """Full perturbation study over a grid of replacement probabilities.

    All sampled pairs perturb one shared corpus per grid value, every method
    then ranks the same data, and each receptor's rank feeds the MRR. By
    default the last half of the snapshots is perturbed.
    """
    training = training or TrainingConfig()
    detector = detector or DetectorConfig()
    if perturb_range is None:
        perturb_range = (snapshots // 2, snapshots)

    corpus = duplicate_corpus(base, snapshots)
    count_cache: dict = {}

    def cached_vocab(c):
        counters = []
        for snap in c:
            key = _content_key(snap)
            if key not in count_cache:
                count_cache[key] = count_tokens(snap)
            counters.append(count_cache[key])
        return vocabulary_from_counters(counters, min_count)

    base_vocab = cached_vocab(corpus)
    if pairs is None:
        rng = np.random.default_rng([seed, 1])
        pairs = sample_word_pairs(
            base_vocab, n_pairs, rng, stopwords=stopwords, same_pos=same_pos,
            tagged_snapshot=base if same_pos else None,
        )

    results = []
    for p in p_grid:
        perturbed = corpus
        for idx, (donor, receptor) in enumerate(pairs):
            plan = PerturbationPlan(donor, receptor, p, perturb_range[0],
                                    perturb_range[1], seed * 1_000_003 + idx)
            perturbed = perturb(perturbed, plan, known_words=base_vocab)
        vocab = cached_vocab(perturbed)
        for method in methods:
            detections = _method_results(method, perturbed, vocab, training,
                                         detector, k, ridge)
            ranking = rank_words_by_pvalue(detections)
            position = {w: i + 1 for i, w in enumerate(ranking)}
            ranks = [position[receptor] for _, receptor in pairs]
            results.append(BenchResult(method, p, list(pairs), ranks, mrr(ranks)))
    return results


def write_bench_csv(results: list[BenchResult], path) -> None:
    """Per-pair rows plus one MRR summary row per (method, p_replacement)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "p_replacement", "pair_id", "donor",
                         "receptor", "rank", "mrr_contrib"])
        for res in results:
            for idx, ((donor, receptor), rank) in enumerate(zip(res.pairs, res.ranks)):
                writer.writerow([res.method, res.p_replacement, idx, donor,
                                 receptor, rank, f"{1.0 / rank:.9g}"])
            writer.writerow([res.method, res.p_replacement, "summary", "", "",
                             "", f"{res.mrr:.9g}"])
