"""Degree-preserving randomization by link crossing.

Two links (i, a) and (j, b) are drawn uniformly; when i != j, a != b and
neither (i, b) nor (j, a) exists, they are rewired to (i, b) and (j, a).
Every proposal counts as an attempt whether or not it is accepted.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .network import BipartiteNetwork


@dataclass(frozen=True)
class ReshuffleReport:
    attempts: int
    successful_swaps: int
    seed: int | None

    def to_dict(self) -> dict:
        return asdict(self)


def swap_edges(
    users: np.ndarray,
    items: np.ndarray,
    item_count: int,
    attempts: int,
    rng: np.random.Generator,
    accept: Callable[[int, int, int, int], bool] | None = None,
) -> int:
    """Run ``attempts`` link-crossing proposals in place on ``items``.

    ``users`` is never modified (a swap exchanges the item endpoints), so the
    edge slots keep their user.  ``accept(i, a, j, b)`` may veto an otherwise
    valid swap of (i, a), (j, b).  Returns the number of accepted swaps.
    """
    w = len(users)
    if w < 2 or attempts <= 0:
        return 0
    u = users.tolist()
    it = items.tolist()
    present = {ui * item_count + ai for ui, ai in zip(u, it)}
    picks = rng.integers(0, w, size=(attempts, 2)).tolist()
    done = 0
    for s, t in picks:
        if s == t:
            continue
        i, j = u[s], u[t]
        a, b = it[s], it[t]
        if i == j or a == b:
            continue
        ib = i * item_count + b
        ja = j * item_count + a
        if ib in present or ja in present:
            continue
        if accept is not None and not accept(i, a, j, b):
            continue
        present.discard(i * item_count + a)
        present.discard(j * item_count + b)
        present.add(ib)
        present.add(ja)
        it[s], it[t] = b, a
        done += 1
    items[:] = it
    return done


def reshuffle(
    network: BipartiteNetwork, attempts: int | None = None, seed: int | None = 0
) -> tuple[BipartiteNetwork, ReshuffleReport]:
    """Randomize ``network`` keeping both degree sequences; default 3w attempts.

    The input is untouched; the result keeps the same id mappings.
    """
    if attempts is None:
        attempts = 3 * network.link_count
    if attempts < 0:
        raise ValueError("attempts must be >= 0")
    users, items = network.edges()
    rng = np.random.default_rng(seed)
    done = swap_edges(users, items, network.item_count, attempts, rng)
    out = BipartiteNetwork.from_edges(
        users, items, network.user_count, network.item_count, network.user_ids, network.item_ids
    )
    return out, ReshuffleReport(int(attempts), done, seed)
