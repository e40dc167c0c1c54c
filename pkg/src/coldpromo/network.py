"""Binary user-item purchase networks.

A :class:`BipartiteNetwork` stores both adjacency directions in CSR form
(``indptr``/``indices`` pairs), so degrees are O(1) and neighbor lists are
sorted array slices.  Instances are read-only after construction.
"""

from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

Side = Literal["user", "item"]


class NetworkFormatError(ValueError):
    """Raised when an edge-list stream cannot be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DuplicateEdgeWarning(UserWarning):
    """Emitted once per ingest when repeated (user, item) pairs are collapsed."""


def _frozen(a, dtype=np.int64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _csr_from_pairs(rows: np.ndarray, cols: np.ndarray, n_rows: int):
    order = np.lexsort((cols, rows))
    indices = cols[order]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
    return indptr, indices


class BipartiteNetwork:
    """Immutable user-item bipartite graph.

    The constructor takes both CSR views as given and does not check them;
    use :func:`validate` for that, or build through :meth:`from_edges` /
    :func:`ingest_edge_list`, which are consistent by construction.

    Args:
        user_indptr, user_indices: items of user ``i`` are
            ``user_indices[user_indptr[i]:user_indptr[i + 1]]``.
        item_indptr, item_indices: users of item ``a``, same layout.
        user_ids, item_ids: external identifiers, position = dense index.
    """

    def __init__(
        self,
        user_indptr,
        user_indices,
        item_indptr,
        item_indices,
        user_ids: Sequence[str] | None = None,
        item_ids: Sequence[str] | None = None,
    ):
        self._u_ptr = _frozen(user_indptr)
        self._u_idx = _frozen(user_indices)
        self._i_ptr = _frozen(item_indptr)
        self._i_idx = _frozen(item_indices)
        n = len(self._u_ptr) - 1
        m = len(self._i_ptr) - 1
        self.user_ids = tuple(user_ids) if user_ids is not None else tuple(f"u{i}" for i in range(n))
        self.item_ids = tuple(item_ids) if item_ids is not None else tuple(f"o{a}" for a in range(m))
        if len(self.user_ids) != n or len(self.item_ids) != m:
            raise ValueError("id lists do not match the adjacency dimensions")
        self._user_deg = _frozen(np.diff(self._u_ptr))
        self._item_deg = _frozen(np.diff(self._i_ptr))
        self._matrix = None

    @classmethod
    def from_edges(
        cls,
        users,
        items,
        user_count: int | None = None,
        item_count: int | None = None,
        user_ids: Sequence[str] | None = None,
        item_ids: Sequence[str] | None = None,
    ) -> "BipartiteNetwork":
        """Build from parallel arrays of dense user and item indices.

        Duplicate pairs are not removed here; callers are expected to pass a
        simple edge set (``validate`` will flag duplicates otherwise).
        """
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if users.shape != items.shape:
            raise ValueError("users and items must have the same length")
        n = int(user_count if user_count is not None else (users.max() + 1 if users.size else 0))
        m = int(item_count if item_count is not None else (items.max() + 1 if items.size else 0))
        u_ptr, u_idx = _csr_from_pairs(users, items, n)
        i_ptr, i_idx = _csr_from_pairs(items, users, m)
        return cls(u_ptr, u_idx, i_ptr, i_idx, user_ids, item_ids)

    @property
    def user_count(self) -> int:
        return len(self._u_ptr) - 1

    @property
    def item_count(self) -> int:
        return len(self._i_ptr) - 1

    @property
    def link_count(self) -> int:
        return int(self._u_ptr[-1])

    n = user_count
    m = item_count
    w = link_count

    @property
    def user_degrees(self) -> np.ndarray:
        return self._user_deg

    @property
    def item_degrees(self) -> np.ndarray:
        return self._item_deg

    def items_of(self, user: int) -> np.ndarray:
        return self._u_idx[self._u_ptr[user] : self._u_ptr[user + 1]]

    def users_of(self, item: int) -> np.ndarray:
        return self._i_idx[self._i_ptr[item] : self._i_ptr[item + 1]]

    @property
    def user_adjacency(self) -> list[np.ndarray]:
        return [self.items_of(i) for i in range(self.user_count)]

    @property
    def item_adjacency(self) -> list[np.ndarray]:
        return [self.users_of(a) for a in range(self.item_count)]

    def csr(self, side: Side = "user") -> tuple[np.ndarray, np.ndarray]:
        """Raw ``(indptr, indices)`` arrays for one adjacency direction."""
        if side == "user":
            return self._u_ptr, self._u_idx
        if side == "item":
            return self._i_ptr, self._i_idx
        raise ValueError(f"unknown side {side!r}")

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge endpoints sorted by (user index, item index)."""
        users = np.repeat(np.arange(self.user_count, dtype=np.int64), self._user_deg)
        return users, self._u_idx.copy()

    def matrix(self) -> sp.csr_matrix:
        """The n x m adjacency matrix (int64 CSR, cached)."""
        if self._matrix is None:
            data = np.ones(len(self._u_idx), dtype=np.int64)
            mat = sp.csr_matrix((data, self._u_idx, self._u_ptr), shape=(self.user_count, self.item_count))
            self._matrix = mat
        return self._matrix

    def has_edge(self, user: int, item: int) -> bool:
        nbrs = self.items_of(user)
        pos = np.searchsorted(nbrs, item)
        return bool(pos < len(nbrs) and nbrs[pos] == item)

    def edge_set(self) -> set[tuple[str, str]]:
        """Edges as external-id pairs; handy for comparing relabelled networks."""
        users, items = self.edges()
        return {(self.user_ids[u], self.item_ids[a]) for u, a in zip(users.tolist(), items.tolist())}

    def __repr__(self) -> str:
        return f"BipartiteNetwork(n={self.user_count}, m={self.item_count}, w={self.link_count})"


def degrees(network: BipartiteNetwork, side: Side) -> np.ndarray:
    """Degree sequence of the requested side, indexed by dense node index."""
    if side == "user":
        return network.user_degrees
    if side == "item":
        return network.item_degrees
    raise ValueError(f"unknown side {side!r}")


def ingest_edge_list(
    stream: TextIO | Iterable[str],
    user_ids: Sequence[str] | None = None,
    item_ids: Sequence[str] | None = None,
) -> BipartiteNetwork:
    """Parse ``user<ws>item`` lines into a network.

    Blank lines and ``#`` comments are skipped.  Dense indices follow order of
    first appearance unless ``user_ids``/``item_ids`` (e.g. read back from
    mapping files) pin them; with a pinned mapping, unknown ids are an error.
    Repeated pairs are collapsed and reported through a single
    :class:`DuplicateEdgeWarning`.
    """
    u_index: dict[str, int] = {}
    i_index: dict[str, int] = {}
    pinned_u = user_ids is not None
    pinned_i = item_ids is not None
    if pinned_u:
        u_index = {uid: k for k, uid in enumerate(user_ids)}
    if pinned_i:
        i_index = {iid: k for k, iid in enumerate(item_ids)}

    seen: set[tuple[int, int]] = set()
    users: list[int] = []
    items: list[int] = []
    duplicates = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise NetworkFormatError(f"expected 2 fields, got {len(tokens)}: {line!r}", lineno)
        uid, iid = tokens
        u = u_index.get(uid)
        if u is None:
            if pinned_u:
                raise NetworkFormatError(f"user id {uid!r} not in mapping", lineno)
            u = u_index[uid] = len(u_index)
        a = i_index.get(iid)
        if a is None:
            if pinned_i:
                raise NetworkFormatError(f"item id {iid!r} not in mapping", lineno)
            a = i_index[iid] = len(i_index)
        if (u, a) in seen:
            duplicates += 1
            continue
        seen.add((u, a))
        users.append(u)
        items.append(a)

    if not users:
        raise ValueError("empty network")
    if duplicates:
        warnings.warn(DuplicateEdgeWarning(f"{duplicates} duplicate edge(s) collapsed"), stacklevel=2)
        log.warning("collapsed %d duplicate edges", duplicates)
    return BipartiteNetwork.from_edges(
        users, items, len(u_index), len(i_index), list(u_index), list(i_index)
    )


def read_edge_list(path, user_map=None, item_map=None) -> BipartiteNetwork:
    """Read an edge-list file, optionally pinning indices with mapping files."""
    user_ids = read_mapping(user_map) if user_map is not None else None
    item_ids = read_mapping(item_map) if item_map is not None else None
    with open(path, encoding="utf-8") as fh:
        return ingest_edge_list(fh, user_ids, item_ids)


def write_edge_list(network: BipartiteNetwork, stream: TextIO) -> None:
    """Emit ``user_id<TAB>item_id`` lines sorted by (user index, item index)."""
    users, items = network.edges()
    uids, iids = network.user_ids, network.item_ids
    stream.writelines(f"{uids[u]}\t{iids[a]}\n" for u, a in zip(users.tolist(), items.tolist()))


def edge_list_text(network: BipartiteNetwork) -> str:
    buf = io.StringIO()
    write_edge_list(network, buf)
    return buf.getvalue()


def write_mapping(ids: Sequence[str], stream: TextIO) -> None:
    stream.writelines(f"{k}\t{x}\n" for k, x in enumerate(ids))


def read_mapping(path) -> list[str]:
    """Inverse of :func:`write_mapping`; indices must be 0..N-1 in order."""
    ids = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].isdigit() or int(parts[0]) != len(ids):
                raise NetworkFormatError(f"bad mapping entry {line!r}", lineno)
            ids.append(parts[1])
    return ids


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`: check name -> offending indices (empty = pass)."""

    failures: dict[str, list] = field(default_factory=dict)
    checks: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(self.failures.values())

    def passed(self, check: str) -> bool:
        return not self.failures.get(check)

    def summary(self) -> dict[str, bool]:
        return {c: self.passed(c) for c in self.checks}


def validate(network: BipartiteNetwork) -> ValidationReport:
    """Check the structural invariants without raising.

    Checks: ``degree_sums``, ``sorted``, ``no_duplicates``,
    ``min_user_degree``, ``min_item_degree``, ``transpose``.  For the list
    checks the failure value holds the offending node indices (or edges for
    ``transpose``).
    """
    u_ptr, u_idx = network.csr("user")
    i_ptr, i_idx = network.csr("item")
    n, m = network.user_count, network.item_count
    failures: dict[str, list] = {}

    if u_ptr[-1] != len(u_idx) or i_ptr[-1] != len(i_idx) or len(u_idx) != len(i_idx):
        failures["degree_sums"] = [int(len(u_idx)), int(len(i_idx))]
    else:
        failures["degree_sums"] = []

    def _row_issues(ptr, idx, bound):
        unsorted, dup, out_of_range = [], [], []
        for r in range(len(ptr) - 1):
            row = idx[ptr[r] : ptr[r + 1]]
            if row.size == 0:
                continue
            d = np.diff(row)
            if np.any(d < 0):
                unsorted.append(r)
            if np.any(d == 0) or len(np.unique(row)) != len(row):
                dup.append(r)
            if row.min() < 0 or row.max() >= bound:
                out_of_range.append(r)
        return unsorted, dup, out_of_range

    us, ud, uo = _row_issues(u_ptr, u_idx, m)
    is_, id_, io_ = _row_issues(i_ptr, i_idx, n)
    failures["sorted"] = [("user", r) for r in us] + [("item", r) for r in is_]
    failures["no_duplicates"] = [("user", r) for r in ud] + [("item", r) for r in id_]
    failures["index_range"] = [("user", r) for r in uo] + [("item", r) for r in io_]
    failures["min_user_degree"] = np.flatnonzero(np.diff(u_ptr) < 1).tolist()
    failures["min_item_degree"] = np.flatnonzero(np.diff(i_ptr) < 1).tolist()

    if failures["index_range"]:
        failures["transpose"] = ["unchecked: indices out of range"]
    else:
        fwd = set(zip(np.repeat(np.arange(n), np.diff(u_ptr)).tolist(), u_idx.tolist()))
        bwd = set(zip(i_idx.tolist(), np.repeat(np.arange(m), np.diff(i_ptr)).tolist()))
        failures["transpose"] = sorted(fwd ^ bwd)

    checks = (
        "degree_sums",
        "sorted",
        "no_duplicates",
        "index_range",
        "min_user_degree",
        "min_item_degree",
        "transpose",
    )
    return ValidationReport(failures, checks)
