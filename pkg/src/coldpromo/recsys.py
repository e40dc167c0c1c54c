"""Item-based and user-based collaborative filtering on binary purchase data.

Similarities are cosine over co-purchase counts, stored as symmetric sparse
matrices with an empty diagonal.  A user's score for an unpurchased item is
the sum of that item's similarities to everything the user purchased.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .network import BipartiteNetwork

log = logging.getLogger(__name__)

# Relative gap below which two scores count as tied.  Scores are sums of
# c / sqrt(k k') terms and equal sums evaluated in different orders can
# differ in the last ulp.
TIE_RTOL = 1e-9


def beats(score, other):
    """True where ``score`` is strictly larger than ``other`` beyond float noise.

    Both arguments are non-negative scores (scalars or arrays).
    """
    score = np.asarray(score, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    return score - other > TIE_RTOL * np.maximum(score, other)


def _cosine_from_counts(counts: sp.csr_matrix, deg_rows: np.ndarray, deg_cols: np.ndarray) -> sp.csr_matrix:
    counts = sp.csr_matrix(counts, copy=True)
    counts.setdiag(0)
    counts.eliminate_zeros()
    counts.sort_indices()
    rows = np.repeat(np.arange(counts.shape[0]), np.diff(counts.indptr))
    norm = np.sqrt(deg_rows[rows].astype(np.float64) * deg_cols[counts.indices].astype(np.float64))
    return sp.csr_matrix((counts.data / norm, counts.indices.copy(), counts.indptr.copy()), shape=counts.shape)


@dataclass
class ItemSimilarity:
    """Symmetric item-item cosine matrix (m x m CSR, zero diagonal)."""

    matrix: sp.csr_matrix
    item_degrees: np.ndarray

    def get(self, a: int, b: int) -> float:
        return float(self.matrix[a, b])

    def neighbors(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.matrix
        lo, hi = m.indptr[a], m.indptr[a + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def pairs(self) -> dict[tuple[int, int], float]:
        """Stored pairs as ``{(a, b): sim}`` with a < b."""
        upper = sp.triu(self.matrix, k=1).tocoo()
        return {(int(a), int(b)): float(v) for a, b, v in zip(upper.row, upper.col, upper.data)}


def item_similarity(network: BipartiteNetwork, basket_warning: int = 10_000) -> ItemSimilarity:
    """Cosine similarity between every pair of co-purchased items.

    The co-purchase counts come from the sparse product A^T A, which visits
    each user's basket pairs once (cost ~ sum of squared user degrees).
    """
    big = np.flatnonzero(network.user_degrees > basket_warning)
    if big.size:
        log.warning(
            "%d users have baskets above %d items; similarity cost grows with k^2", big.size, basket_warning
        )
    a = network.matrix()
    counts = (a.T @ a).tocsr()
    deg = network.item_degrees
    return ItemSimilarity(_cosine_from_counts(counts, deg, deg), deg)


def item_similarity_topk(similarity: ItemSimilarity, k: int) -> ItemSimilarity:
    """Keep each item's ``k`` strongest neighbors, then symmetrize by union.

    Ties at the cut go to the lower neighbor index.  A pair survives when
    either endpoint kept the other.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mat = similarity.matrix.tocsr()
    n_rows = mat.shape[0]
    counts = np.diff(mat.indptr)
    rows = np.repeat(np.arange(n_rows), counts)
    order = np.lexsort((mat.indices, -mat.data, rows))
    # rank of each entry inside its row after sorting
    rank = np.arange(len(order)) - mat.indptr[rows[order]]
    keep_sorted = rank < k
    keep = np.zeros(len(order), dtype=bool)
    keep[order[keep_sorted]] = True
    kept = sp.csr_matrix((keep.astype(np.int8), mat.indices.copy(), mat.indptr.copy()), shape=mat.shape)
    kept.eliminate_zeros()
    union = (kept + kept.T).astype(bool)
    pruned = mat.multiply(union).tocsr()
    pruned.eliminate_zeros()
    pruned.sort_indices()
    return ItemSimilarity(pruned, similarity.item_degrees)


@dataclass
class ScoreVector:
    """Positive scores of one user's unpurchased items, sorted by item index."""

    user: int
    items: np.ndarray
    scores: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.items.tolist(), self.scores.tolist()))

    def __len__(self) -> int:
        return len(self.items)


def _positive_unpurchased(user, row: np.ndarray, purchased: np.ndarray) -> ScoreVector:
    row = row.copy()
    row[purchased] = 0.0
    items = np.flatnonzero(row > 0)
    return ScoreVector(user, items, row[items])


def score_user(network: BipartiteNetwork, similarity: ItemSimilarity, user: int) -> ScoreVector:
    """Accumulated item-CF scores for ``user``; zero scores omitted."""
    purchased = network.items_of(user)
    row = np.asarray(similarity.matrix[purchased].sum(axis=0)).ravel()
    return _positive_unpurchased(user, row, purchased)


@dataclass
class RecommendationList:
    user: int
    items: np.ndarray
    scores: np.ndarray
    L: int

    def __len__(self) -> int:
        return len(self.items)


def top_l(scores: ScoreVector, L: int) -> RecommendationList:
    """Best ``L`` positive candidates, descending score, ascending index on ties."""
    if L < 1:
        raise ValueError("L must be >= 1")
    order = np.lexsort((scores.items, -scores.scores))[:L]
    return RecommendationList(scores.user, scores.items[order], scores.scores[order], L)


def recommend(network: BipartiteNetwork, similarity: ItemSimilarity, user: int, L: int) -> RecommendationList:
    return top_l(score_user(network, similarity, user), L)


def user_similarity(network: BipartiteNetwork) -> sp.csr_matrix:
    """Symmetric user-user cosine matrix (n x n CSR, zero diagonal)."""
    a = network.matrix()
    deg = network.user_degrees
    return _cosine_from_counts((a @ a.T).tocsr(), deg, deg)


def ucf_score_user(network: BipartiteNetwork, user: int, user_sim: sp.csr_matrix | None = None) -> ScoreVector:
    """User-CF scores: sum of similarities of the other users who bought each item."""
    if user_sim is None:
        user_sim = user_similarity(network)
    row = np.asarray((user_sim[user] @ network.matrix()).todense()).ravel()
    return _positive_unpurchased(user, row, network.items_of(user))


def score_matrix(network: BipartiteNetwork, similarity: ItemSimilarity, users=None) -> sp.csr_matrix:
    """Item-CF scores of many users at once, purchased items removed.

    Returns a CSR matrix with one row per requested user (all users by
    default) and only positive entries stored.
    """
    a = network.matrix()
    if users is not None:
        a = a[np.asarray(users)]
    scores = (a.astype(np.float64) @ similarity.matrix).tocsr()
    return drop_purchased(scores, a)


def drop_purchased(scores: sp.csr_matrix, purchases: sp.csr_matrix) -> sp.csr_matrix:
    scores = scores - scores.multiply(purchases.astype(bool))
    scores = sp.csr_matrix(scores)
    scores.eliminate_zeros()
    scores.sort_indices()
    return scores


def row_kth_largest(mat: sp.csr_matrix, k: int) -> np.ndarray:
    """k-th largest stored value per row; 0 where a row has fewer than k entries."""
    mat = sp.csr_matrix(mat)
    n_rows = mat.shape[0]
    counts = np.diff(mat.indptr)
    rows = np.repeat(np.arange(n_rows), counts)
    order = np.lexsort((-mat.data, rows))
    out = np.zeros(n_rows)
    has = counts >= k
    out[has] = mat.data[order[mat.indptr[:-1][has] + k - 1]]
    return out
