"""Per-snapshot skipgram training with hierarchical softmax.

Each time slice gets its own model: a frequency-weighted Huffman tree over
the shared vocabulary, word vectors updated by plain sequential SGD, and an
L2-normalized embedding space as output. Training is deterministic for a
fixed seed in single-threaded mode.
"""

from __future__ import annotations

import heapq
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .corpus import CorpusSnapshot, TemporalCorpus, Vocabulary


class TrainingDivergedError(RuntimeError):
    """Raised when SGD produces a non-finite loss or gradient."""


@dataclass
class TrainingConfig:
    """Knobs for one snapshot's skipgram run.

    alpha decays linearly from ``alpha`` to ``alpha_min`` over the planned
    ``max_epochs * token_count`` tokens. ``tolerance`` is the convergence
    threshold on 1 - rho, where rho is the mean per-word cosine between
    consecutive epochs.
    """

    dim: int = 200
    window: int = 10
    subsample: float = 1e-5
    alpha: float = 0.025
    alpha_min: float | None = None
    max_epochs: int = 5
    tolerance: float = 1e-4
    seed: int = 1

    def __post_init__(self):
        if self.alpha_min is None:
            self.alpha_min = 1e-4 * self.alpha
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample threshold must be in (0, 1]")
        if not self.alpha > self.alpha_min > 0.0:
            raise ValueError("need alpha > alpha_min > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")


@dataclass
class HuffmanTree:
    """Prefix codes and root-to-leaf paths for hierarchical softmax.

    ``codes[w]`` holds the branch bits for word id w, ``points[w]`` the ids
    of the internal nodes along the same path (root first). There are
    exactly ``num_leaves - 1`` internal nodes; their parameter vectors live
    in ``node_vectors`` once a trainer allocates them.
    """

    codes: list[np.ndarray]
    points: list[np.ndarray]
    num_leaves: int
    node_vectors: np.ndarray | None = None
    _flat: tuple | None = field(default=None, repr=False)

    def ensure_node_vectors(self, dim: int) -> np.ndarray:
        if self.node_vectors is None:
            self.node_vectors = np.zeros((self.num_leaves - 1, dim))
        elif self.node_vectors.shape[1] != dim:
            raise ValueError(
                f"tree has node vectors of dim {self.node_vectors.shape[1]}, not {dim}"
            )
        return self.node_vectors

    def flat_paths(self):
        """Concatenated (offsets, bits, nodes) arrays for the SGD kernel."""
        if self._flat is None:
            offsets = np.zeros(self.num_leaves + 1, dtype=np.int64)
            for w, code in enumerate(self.codes):
                offsets[w + 1] = offsets[w] + len(code)
            bits = np.concatenate(self.codes).astype(np.uint8)
            nodes = np.concatenate(self.points).astype(np.int64)
            self._flat = (offsets, bits, nodes)
        return self._flat

    def code_length(self, word_id: int) -> int:
        return len(self.codes[word_id])


def build_huffman_tree(vocab: Vocabulary, snapshot_index: int) -> HuffmanTree:
    """Huffman-code the vocabulary by its counts in one snapshot.

    Merges are ordered by (count, node id), so the tree is deterministic;
    the first node popped at each merge receives branch bit 0.
    """
    weights = vocab.counts[:, snapshot_index]
    n = len(vocab)
    if n < 2:
        raise ValueError("hierarchical softmax needs at least 2 words")
    if np.any(weights <= 0):
        raise ValueError("all snapshot counts must be positive")

    heap = [(int(weights[i]), i) for i in range(n)]
    heapq.heapify(heap)
    # children[k] = (first, second) popped when internal node n+k was made
    children = []
    next_id = n
    while len(heap) > 1:
        c1, id1 = heapq.heappop(heap)
        c2, id2 = heapq.heappop(heap)
        children.append((id1, id2))
        heapq.heappush(heap, (c1 + c2, next_id))
        next_id += 1

    codes: list[np.ndarray] = [None] * n
    points: list[np.ndarray] = [None] * n
    root = next_id - 1
    stack = [(root, [], [])]
    while stack:
        node, bits, path = stack.pop()
        if node < n:
            codes[node] = np.array(bits, dtype=np.uint8)
            points[node] = np.array(path, dtype=np.int64)
        else:
            first, second = children[node - n]
            path = path + [node - n]
            stack.append((first, bits + [0], path))
            stack.append((second, bits + [1], path))
    return HuffmanTree(codes, points, n)


def subsample_keep_probability(frequency: float, threshold: float) -> float:
    """Keep probability sqrt(threshold / frequency), clamped to 1."""
    if not frequency > 0.0:
        raise ValueError("word frequency must be positive")
    if frequency > 1.0:
        raise ValueError("word frequency cannot exceed 1")
    if not threshold > 0.0:
        raise ValueError("subsample threshold must be positive")
    return min(1.0, math.sqrt(threshold / frequency))


def hs_log_prob(tree: HuffmanTree, input_vector: np.ndarray, target_id: int) -> float:
    """log Pr(target | input) along the target's Huffman path.

    Each internal node contributes log sigma(+-node . input), the sign
    taken from the branch bit; probabilities over the whole vocabulary
    therefore sum to one.
    """
    if tree.node_vectors is None:
        raise ValueError("tree has no node vectors; call ensure_node_vectors")
    input_vector = np.asarray(input_vector, dtype=float)
    if input_vector.shape != (tree.node_vectors.shape[1],):
        raise ValueError(
            f"input vector has shape {input_vector.shape}, tree dim is "
            f"{tree.node_vectors.shape[1]}"
        )
    prods = tree.node_vectors[tree.points[target_id]] @ input_vector
    signs = 1.0 - 2.0 * tree.codes[target_id]
    # log sigma(x) = -log(1 + exp(-x)), computed stably
    return float(-np.logaddexp(0.0, -signs * prods).sum())


@njit(cache=True, nogil=True)
def _hs_pair_update(syn0, syn1, center, bits, nodes, lo, hi, alpha, work):
    """One (center, context) SGD step against the context word's path.

    Returns the pre-update loss -log Pr(context | center). Both gradients
    are evaluated at the original parameters (simultaneous update).
    """
    dim = syn0.shape[1]
    loss = 0.0
    for c in range(dim):
        work[c] = 0.0
    for k in range(lo, hi):
        node = nodes[k]
        bit = bits[k]
        prod = 0.0
        for c in range(dim):
            prod += syn0[center, c] * syn1[node, c]
        x = prod if bit == 0 else -prod
        if x >= 0.0:
            loss += math.log1p(math.exp(-x))
        else:
            loss += -x + math.log1p(math.exp(x))
        f = 1.0 / (1.0 + math.exp(-prod))
        g = (1.0 - bit - f) * alpha
        for c in range(dim):
            work[c] += g * syn1[node, c]
        for c in range(dim):
            syn1[node, c] += g * syn0[center, c]
    for c in range(dim):
        syn0[center, c] += work[c]
    return loss


@njit(cache=True, nogil=True)
def _train_epoch(ids, doc_offsets, raw_pos, syn0, syn1, path_offsets, bits,
                 nodes, window, alpha0, alpha_min, planned, done_before, work):
    """Sequential SGD over all in-window pairs of one epoch.

    ``ids`` is the kept-token stream (OOV positions carry -1), ``raw_pos``
    maps each kept token back to its raw stream position for the linear
    learning-rate schedule. Returns (total pre-update loss, pair count);
    the loss goes non-finite on divergence and the caller must abort.
    """
    total = 0.0
    pairs = 0
    for di in range(doc_offsets.shape[0] - 1):
        lo = doc_offsets[di]
        hi = doc_offsets[di + 1]
        for i in range(lo, hi):
            center = ids[i]
            if center < 0:
                continue
            alpha = alpha0 * (1.0 - (done_before + raw_pos[i]) / planned)
            if alpha < alpha_min:
                alpha = alpha_min
            jlo = i - window
            if jlo < lo:
                jlo = lo
            jhi = i + window
            if jhi >= hi:
                jhi = hi - 1
            for j in range(jlo, jhi + 1):
                if j == i:
                    continue
                context = ids[j]
                if context < 0:
                    continue
                total += _hs_pair_update(
                    syn0, syn1, center, bits, nodes,
                    path_offsets[context], path_offsets[context + 1],
                    alpha, work,
                )
                pairs += 1
        if not np.isfinite(total):
            return total, pairs
    return total, pairs


def sgd_step(vectors, tree, center_id, context_id, alpha):
    """Single skipgram update for one (center, context) pair.

    Mutates the center word's vector and the context word's path nodes in
    place and returns the loss measured before the update.
    """
    if alpha < 0:
        raise ValueError("learning rate must be non-negative")
    syn1 = tree.ensure_node_vectors(vectors.shape[1])
    offsets, bits, nodes = tree.flat_paths()
    work = np.empty(vectors.shape[1])
    loss = _hs_pair_update(vectors, syn1, center_id, bits, nodes,
                           offsets[context_id], offsets[context_id + 1],
                           float(alpha), work)
    if not np.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite loss for pair ({center_id}, {context_id})"
        )
    return loss


def check_convergence(prev, curr, tolerance):
    """Mean per-word cosine between consecutive epoch parameters.

    Returns (rho, converged) with converged meaning 1 - rho <= tolerance.
    Zero vectors contribute cosine 0 and trigger a warning.
    """
    prev = np.asarray(prev, dtype=float)
    curr = np.asarray(curr, dtype=float)
    if prev.shape != curr.shape:
        raise ValueError("parameter shapes differ")
    dots = np.einsum("ij,ij->i", prev, curr)
    norms = np.linalg.norm(prev, axis=1) * np.linalg.norm(curr, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        warnings.warn(f"{int(zero.sum())} zero vector(s) in convergence check")
        norms[zero] = 1.0
        dots[zero] = 0.0
    rho = float(np.mean(dots / norms))
    return rho, (1.0 - rho) <= tolerance


@dataclass
class EmbeddingSpace:
    """Vectors for every vocabulary word in one snapshot, id-ordered rows."""

    label: str
    vectors: np.ndarray
    normalized: bool = False

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def vector(self, word_id: int) -> np.ndarray:
        return self.vectors[word_id]

    def normalized_copy(self) -> "EmbeddingSpace":
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValueError("cannot L2-normalize a zero vector")
        return EmbeddingSpace(self.label, self.vectors / norms, normalized=True)


@dataclass
class EpochStats:
    loss: float
    pairs: int
    rho: float
    alpha_end: float


def _encode_snapshot(snapshot: CorpusSnapshot, vocab: Vocabulary):
    """Token ids (-1 for out-of-vocabulary) plus document offsets."""
    ids = np.empty(snapshot.token_count, dtype=np.int64)
    offsets = [0]
    pos = 0
    lookup = vocab.word_to_id
    for doc in snapshot.documents():
        for tok in doc:
            ids[pos] = lookup.get(tok, -1)
            pos += 1
        offsets.append(pos)
    return ids, np.array(offsets, dtype=np.int64)


def train_snapshot(snapshot, vocab, config, tree=None, history=None):
    """Train one snapshot's embedding space.

    Iterates SGD epochs over all in-window (center, context) pairs of the
    kept token stream, subsampling frequent words per occurrence, until the
    convergence check fires or ``config.max_epochs`` is reached. The result
    is L2-normalized. Deterministic for fixed (config.seed, vocabulary).

    ``history``, when passed a list, receives one EpochStats per epoch.
    """
    if snapshot.token_count == 0:
        raise ValueError(f"snapshot {snapshot.label.label!r} is empty")
    if tree is None:
        tree = build_huffman_tree(vocab, snapshot.label.index)
    rng = np.random.default_rng([config.seed])

    nwords = len(vocab)
    syn0 = rng.uniform(-0.5 / config.dim, 0.5 / config.dim, (nwords, config.dim))
    syn1 = tree.ensure_node_vectors(config.dim)
    offsets, bits, nodes = tree.flat_paths()

    ids, doc_offsets = _encode_snapshot(snapshot, vocab)
    total_tokens = snapshot.token_count
    freqs = vocab.counts[:, snapshot.label.index] / total_tokens
    keep = np.minimum(1.0, np.sqrt(config.subsample / freqs))

    planned = float(config.max_epochs * total_tokens)
    work = np.empty(config.dim)
    raw_positions = np.arange(total_tokens, dtype=np.int64)

    for epoch in range(config.max_epochs):
        u = rng.random(total_tokens)
        kept = (ids < 0) | (u < keep[np.maximum(ids, 0)])
        kept_ids = ids[kept]
        kept_pos = raw_positions[kept]
        kept_offsets = np.searchsorted(kept_pos, doc_offsets, side="left")

        prev = syn0.copy()
        loss, pairs = _train_epoch(
            kept_ids, kept_offsets, kept_pos, syn0, syn1, offsets, bits,
            nodes, config.window, config.alpha, config.alpha_min, planned,
            float(epoch * total_tokens), work,
        )
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss in epoch {epoch + 1} of snapshot "
                f"{snapshot.label.label!r}"
            )
        rho, converged = check_convergence(prev, syn0, config.tolerance)
        if history is not None:
            alpha_end = max(
                config.alpha_min,
                config.alpha * (1.0 - (epoch + 1) * total_tokens / planned),
            )
            history.append(EpochStats(loss, pairs, rho, alpha_end))
        if converged:
            break

    return EmbeddingSpace(snapshot.label.label, syn0).normalized_copy()


def train_corpus(corpus: TemporalCorpus, vocab: Vocabulary, config: TrainingConfig,
                 workers: int = 1) -> list[EmbeddingSpace]:
    """Train every snapshot, optionally in parallel.

    Snapshots share no mutable state, so the result is identical for any
    worker count; each snapshot is internally sequential.
    """
    def one(snapshot):
        return train_snapshot(snapshot, vocab, config)

    if workers <= 1:
        return [one(s) for s in corpus]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, corpus.snapshots))


def save_embeddings(space: EmbeddingSpace, vocab: Vocabulary, path) -> None:
    """Text persistence: header "<vocab> <dim>", then id-ordered
    "<word> <v1> ... <vd>" rows with 6 significant digits."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {space.dim}\n")
        for wid, word in enumerate(vocab.words):
            comps = " ".join(f"{v:.6g}" for v in space.vectors[wid])
            fh.write(f"{word} {comps}\n")
    tmp.replace(path)


def load_embeddings(path, label=None):
    """Inverse of save_embeddings. Returns (EmbeddingSpace, word list)."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad embedding header")
        nwords, dim = int(header[0]), int(header[1])
        words = []
        vectors = np.empty((nwords, dim))
        for i in range(nwords):
            parts = fh.readline().split()
            if len(parts) != dim + 1:
                raise ValueError(f"{path}: row {i} has {len(parts) - 1} values, expected {dim}")
            words.append(parts[0])
            vectors[i] = [float(x) for x in parts[1:]]
    if label is None:
        label = path.stem
    space = EmbeddingSpace(label, vectors)
    norms = np.linalg.norm(vectors, axis=1)
    space.normalized = bool(np.allclose(norms, 1.0, atol=1e-5))
    return space, words
