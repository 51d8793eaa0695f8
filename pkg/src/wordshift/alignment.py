"""Per-word linear warps between snapshot embedding spaces.

Every (word, snapshot) pair gets its own d x d transform, fit by ridge
regression over the word's neighborhood so that local structure in the
source space lands on the base space. Words whose neighborhoods refuse to
align are exactly the interesting ones downstream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import EmbeddingSpace


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when the unregularized normal equations are singular."""


@dataclass
class NeighborSet:
    """Words nearest a query vector, sorted by non-increasing cosine."""

    word_ids: np.ndarray
    similarities: np.ndarray

    def __len__(self):
        return len(self.word_ids)

    def __iter__(self):
        return iter(zip(self.word_ids.tolist(), self.similarities.tolist()))


@dataclass
class AlignmentMap:
    """Least-squares warp for one word from a source snapshot onto a target."""

    word_id: int
    source_label: str
    target_label: str
    matrix: np.ndarray
    residual: float


def k_nearest(space: EmbeddingSpace, word_id: int, k: int) -> NeighborSet:
    """The k highest-cosine words to ``word_id``, the query itself included.

    Requires a normalized space so cosine reduces to a dot product. Ties
    break by ascending word id.
    """
    if not space.normalized:
        raise ValueError("k_nearest needs an L2-normalized space")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(space):
        raise ValueError(f"k={k} exceeds vocabulary size {len(space)}")
    sims = space.vectors @ space.vectors[word_id]
    order = np.lexsort((np.arange(len(sims)), -sims))[:k]
    return NeighborSet(order, sims[order])


def _solve_ridge(A, B, ridge):
    """Minimize ||A W - B||_F^2 + ridge ||W||_F^2 via normal equations."""
    d = A.shape[1]
    gram = A.T @ A
    if ridge == 0.0:
        if np.linalg.matrix_rank(gram) < d:
            raise RankDeficiencyError(
                "neighbor matrix is rank deficient; use ridge > 0"
            )
    else:
        gram = gram + ridge * np.eye(d)
    return np.linalg.solve(gram, A.T @ B)


def learn_alignment(source: EmbeddingSpace, target: EmbeddingSpace,
                    word_id: int, k: int, ridge: float = 1e-3) -> AlignmentMap:
    """Fit the warp for one word from neighborhoods in the source space.

    Neighbor rows are the source vectors of the word's k nearest source
    words; the reported residual is the unpenalized sum of squared errors.
    """
    if source.dim != target.dim:
        raise ValueError("source and target dimensions differ")
    if len(source) != len(target):
        raise ValueError("source and target vocabularies differ")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    nn = k_nearest(source, word_id, k)
    A = source.vectors[nn.word_ids]
    B = target.vectors[nn.word_ids]
    W = _solve_ridge(A, B, ridge)
    residual = float(np.sum((A @ W - B) ** 2))
    return AlignmentMap(word_id, source.label, target.label, W, residual)


def default_neighborhood(dim: int, vocab_size: int) -> int:
    """Default k: enough rows for a full-rank d x d system, capped at |V|."""
    return min(4 * dim, vocab_size)


class AlignmentCollection:
    """All per-word warps from every later snapshot onto the base snapshot."""

    def __init__(self, labels, matrices, residuals):
        # matrices[t]: (|V|, d, d) for t >= 1; index 0 is None (identity)
        self.labels = labels
        self._matrices = matrices
        self._residuals = residuals

    def matrix(self, word_id: int, snapshot_index: int) -> np.ndarray:
        if snapshot_index == 0:
            d = self._matrices[1].shape[2]
            return np.eye(d)
        return self._matrices[snapshot_index][word_id]

    def matrices_for(self, snapshot_index: int) -> np.ndarray:
        """All words' warps onto the base for one snapshot, shape (|V|, d, d)."""
        if snapshot_index == 0:
            d = self._matrices[1].shape[2]
            n = self._matrices[1].shape[0]
            return np.broadcast_to(np.eye(d), (n, d, d))
        return self._matrices[snapshot_index]

    def residual(self, word_id: int, snapshot_index: int) -> float:
        if snapshot_index == 0:
            return 0.0
        return float(self._residuals[snapshot_index][word_id])

    def get(self, word_id: int, snapshot_index: int) -> AlignmentMap:
        return AlignmentMap(
            word_id,
            self.labels[snapshot_index],
            self.labels[0],
            self.matrix(word_id, snapshot_index),
            self.residual(word_id, snapshot_index),
        )

    @property
    def num_snapshots(self):
        return len(self.labels)


def align_all_to_base(spaces: list[EmbeddingSpace], k: int | None = None,
                      ridge: float = 1e-3, chunk: int = 512) -> AlignmentCollection:
    """Warp every word of every snapshot t > 0 onto snapshot 0.

    Equivalent to calling learn_alignment per (word, t) but batched: the
    ridge systems of a chunk of words are assembled and solved together.
    """
    if len(spaces) < 2:
        raise ValueError("alignment needs at least 2 snapshots")
    nwords = len(spaces[0])
    dim = spaces[0].dim
    for sp in spaces:
        if len(sp) != nwords or sp.dim != dim:
            raise ValueError("all spaces must share vocabulary and dimension")
        if not sp.normalized:
            raise ValueError(f"space {sp.label!r} is not normalized")
    if k is None:
        k = default_neighborhood(dim, nwords)
    if not 1 <= k <= nwords:
        raise ValueError(f"k={k} out of range for vocabulary size {nwords}")

    base = spaces[0]
    matrices = [None]
    residuals = [None]
    eye = ridge * np.eye(dim)
    for t in range(1, len(spaces)):
        src = spaces[t]
        W_t = np.empty((nwords, dim, dim))
        r_t = np.empty(nwords)
        for lo in range(0, nwords, chunk):
            hi = min(lo + chunk, nwords)
            sims = src.vectors[lo:hi] @ src.vectors.T
            if k == nwords:
                order = np.broadcast_to(np.arange(nwords), sims.shape)
            elif nwords <= 2048:
                # small vocabularies: exact (similarity desc, id asc) order,
                # bit-for-bit the k_nearest tie rule
                order = np.lexsort(
                    (np.broadcast_to(np.arange(nwords), sims.shape), -sims),
                    axis=1,
                )[:, :k]
            else:
                # the regression only needs the neighbor SET; boundary ties
                # (exactly equal cosines at the k-th place) may resolve
                # differently from k_nearest, which is immaterial for
                # trained float vectors
                order = np.argpartition(-sims, k - 1, axis=1)[:, :k]
            A = src.vectors[order]            # (c, k, d)
            B = base.vectors[order]
            At = A.transpose(0, 2, 1)
            gram = np.matmul(At, A)
            rhs = np.matmul(At, B)
            if ridge == 0.0:
                for ci in range(hi - lo):
                    if np.linalg.matrix_rank(gram[ci]) < dim:
                        raise RankDeficiencyError(
                            f"rank-deficient neighborhood for word {lo + ci} "
                            f"in snapshot {src.label!r}; use ridge > 0"
                        )
                W = np.linalg.solve(gram, rhs)
            else:
                W = np.linalg.solve(gram + eye, rhs)
            W_t[lo:hi] = W
            r_t[lo:hi] = np.sum((np.matmul(A, W) - B) ** 2, axis=(1, 2))
        matrices.append(W_t)
        residuals.append(r_t)
    return AlignmentCollection([sp.label for sp in spaces], matrices, residuals)


def write_residuals_csv(collection: AlignmentCollection, words: list[str], path) -> None:
    """Dump "word,snapshot,residual" rows for every aligned (word, t > 0)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "snapshot", "residual"])
        for t in range(1, collection.num_snapshots):
            label = collection.labels[t]
            for wid, word in enumerate(words):
                writer.writerow([word, label, f"{collection.residual(wid, t):.9g}"])
