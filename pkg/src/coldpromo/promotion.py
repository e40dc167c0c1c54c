"""Cold-start promotion experiments.

A new item (index ``m``, one past the last real item) is linked to R users
picked by a degree-based strategy.  H counts the other users whose top-L
list would contain it.

Adding the item changes neither the co-purchase count nor the degree of any
existing item, so under item-based CF every existing similarity and every
baseline score stays as it was.  Each user's L-th best baseline score is
therefore computed once; the new item enters user j's list iff its score
strictly beats that threshold.  The new item loses every tie.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from . import recsys
from .network import BipartiteNetwork
from .recsys import ItemSimilarity, beats

DEFAULT_L = 6
LIMIT_KINDS = {"MaxD": math.inf, "MinD": -math.inf, "PA": 1.0, "RAN": 0.0}


@dataclass(frozen=True)
class PromotionStrategy:
    """Degree-based selection rule: select with probability ~ k^tau.

    ``kind`` is one of MaxD, MinD, PA, RAN or "tau" (finite exponent).
    MaxD and MinD are the tau -> +/-inf limits and are run as sorts.
    """

    kind: str
    R: int
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in LIMIT_KINDS and self.kind != "tau":
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "tau" and (self.tau is None or not math.isfinite(self.tau)):
            raise ValueError("tau strategy needs a finite tau")
        if self.R < 1:
            raise ValueError("R must be >= 1")

    @property
    def exponent(self) -> float:
        return self.tau if self.kind == "tau" else LIMIT_KINDS[self.kind]

    @property
    def label(self) -> str:
        return f"tau={self.tau:g}" if self.kind == "tau" else self.kind

    @classmethod
    def parse(cls, text: str | float, R: int) -> "PromotionStrategy":
        """Accepts MaxD/MinD/PA/RAN (any case), ``tau=<x>`` or a bare number."""
        if isinstance(text, (int, float)):
            return cls("tau", R, float(text))
        s = str(text).strip()
        for name in LIMIT_KINDS:
            if s.lower() == name.lower():
                return cls(name, R)
        if s.lower().startswith("tau="):
            s = s[4:]
        try:
            tau = float(s)
        except ValueError:
            raise ValueError(f"unknown strategy {text!r}") from None
        if tau == math.inf:
            return cls("MaxD", R)
        if tau == -math.inf:
            return cls("MinD", R)
        return cls("tau", R, tau)


def MaxD(R):
    return PromotionStrategy("MaxD", R)


def MinD(R):
    return PromotionStrategy("MinD", R)


def PA(R):
    return PromotionStrategy("PA", R)


def RAN(R):
    return PromotionStrategy("RAN", R)


def Exponent(tau, R):
    return PromotionStrategy("tau", R, float(tau))


def weighted_sample_without_replacement(log_weights: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Successive sampling without replacement, probabilities ~ exp(log_weights).

    Perturbing log-weights with i.i.d. Gumbel noise and taking the ``size``
    largest gives exactly the law of drawing one element at a time and
    renormalizing after each pick; it also stays finite for extreme tau.
    Returned in pick order.
    """
    keys = log_weights + rng.gumbel(size=len(log_weights))
    top = np.argpartition(-keys, size - 1)[:size] if size < len(keys) else np.arange(len(keys))
    return top[np.argsort(-keys[top], kind="stable")]


def select_users(network: BipartiteNetwork, strategy: PromotionStrategy, seed=None) -> np.ndarray:
    """Pick R distinct users (sorted ascending) according to ``strategy``."""
    n = network.user_count
    R = strategy.R
    if R > n:
        raise ValueError(f"R={R} exceeds the number of users ({n})")
    rng = np.random.default_rng(seed)
    deg = network.user_degrees
    if strategy.kind in ("MaxD", "MinD"):
        perm = rng.permutation(n)
        key = -deg[perm] if strategy.kind == "MaxD" else deg[perm]
        chosen = perm[np.argsort(key, kind="stable")[:R]]
    else:
        chosen = weighted_sample_without_replacement(strategy.exponent * np.log(deg), R, rng)
    return np.sort(chosen)


@dataclass(frozen=True)
class InjectionView:
    """The base network plus a new item linked to ``users``; base is not copied."""

    network: BipartiteNetwork
    users: np.ndarray

    @property
    def eta(self) -> int:
        return self.network.item_count

    @property
    def R(self) -> int:
        return len(self.users)

    def degree(self, item: int) -> int:
        return self.R if item == self.eta else int(self.network.item_degrees[item])

    def linked_mask(self) -> np.ndarray:
        mask = np.zeros(self.network.user_count, dtype=bool)
        mask[self.users] = True
        return mask

    def augmented(self) -> BipartiteNetwork:
        """Materialize the network with the new item appended (for checking)."""
        users, items = self.network.edges()
        users = np.concatenate([users, self.users])
        items = np.concatenate([items, np.full(self.R, self.eta)])
        return BipartiteNetwork.from_edges(
            users,
            items,
            self.network.user_count,
            self.network.item_count + 1,
            self.network.user_ids,
            self.network.item_ids + ("eta",),
        )


def inject(network: BipartiteNetwork, users) -> InjectionView:
    users = np.asarray(users, dtype=np.int64).ravel()
    if users.size == 0:
        raise ValueError("need at least one user")
    if len(np.unique(users)) != len(users):
        raise ValueError("duplicate users")
    if users.min() < 0 or users.max() >= network.user_count:
        raise ValueError("user index out of range")
    users = np.sort(users)
    users.setflags(write=False)
    return InjectionView(network, users)


def target_similarity_vector(view: InjectionView) -> np.ndarray:
    """sim(eta, g) for every existing item g as a dense length-m array."""
    net = view.network
    ptr, idx = net.csr("user")
    bought = np.concatenate([idx[ptr[u] : ptr[u + 1]] for u in view.users])
    common = np.bincount(bought, minlength=net.item_count).astype(np.float64)
    return common / np.sqrt(view.R * net.item_degrees.astype(np.float64))


def target_similarities(view: InjectionView) -> dict[int, float]:
    """Non-zero sim(eta, g) as ``{g: value}``."""
    vec = target_similarity_vector(view)
    nz = np.flatnonzero(vec)
    return dict(zip(nz.tolist(), vec[nz].tolist()))


@dataclass
class UserThresholds:
    """Per-user L-th largest positive baseline score (0 with fewer than L)."""

    L: int
    values: np.ndarray


def compute_thresholds(
    network: BipartiteNetwork, similarity: ItemSimilarity, L: int, chunk_size: int = 4096
) -> UserThresholds:
    if L < 1:
        raise ValueError("L must be >= 1")
    out = np.zeros(network.user_count)
    for lo in range(0, network.user_count, chunk_size):
        users = np.arange(lo, min(lo + chunk_size, network.user_count))
        scores = recsys.score_matrix(network, similarity, users)
        out[users] = recsys.row_kth_largest(scores, L)
    out.setflags(write=False)
    return UserThresholds(L, out)


@dataclass
class HEvaluation:
    H: int
    hits: np.ndarray
    scores: np.ndarray

    def hit_users(self) -> np.ndarray:
        return np.flatnonzero(self.hits)


def evaluate_H(view: InjectionView, thresholds: UserThresholds, L: int | None = None) -> HEvaluation:
    """H for one injection under item-based CF, from precomputed thresholds."""
    if L is not None and L != thresholds.L:
        raise ValueError(f"thresholds were built for L={thresholds.L}, not {L}")
    sim_eta = target_similarity_vector(view)
    a = view.network.matrix()
    w = a @ sim_eta
    hits = beats(w, thresholds.values)
    hits[view.users] = False
    return HEvaluation(int(hits.sum()), hits, w)


class ICFEvaluator:
    """Item-CF H evaluation with similarity and thresholds cached."""

    engine = "icf"

    def __init__(self, network: BipartiteNetwork, L: int = DEFAULT_L, similarity: ItemSimilarity | None = None):
        self.network = network
        self.L = L
        self.similarity = similarity if similarity is not None else recsys.item_similarity(network)
        self.thresholds = compute_thresholds(network, self.similarity, L)

    def evaluate(self, users) -> HEvaluation:
        return evaluate_H(inject(self.network, users), self.thresholds)


class UCFEvaluator:
    """User-CF H evaluation.

    Linking the new item raises the degree of each linked user, which changes
    their similarity to everybody else, so baseline scores are recomputed for
    the users that share an item with a linked user.  Users sharing nothing
    with the linked set score the new item at 0 and cannot be hit.
    """

    engine = "ucf"

    def __init__(self, network: BipartiteNetwork, L: int = DEFAULT_L):
        self.network = network
        self.L = L
        a = network.matrix()
        common = (a @ a.T).tocsr()
        common.setdiag(0)
        common.eliminate_zeros()
        common.sort_indices()
        self.common = common
        self.a = a.astype(np.float64).tocsr()

    def evaluate(self, users) -> HEvaluation:
        view = inject(self.network, users)
        net = self.network
        n = net.user_count
        linked = view.linked_mask()
        touched = np.asarray(self.common[:, view.users].sum(axis=1)).ravel() > 0
        affected = np.flatnonzero(touched & ~linked)
        w_full = np.zeros(n)
        hits = np.zeros(n, dtype=bool)
        if affected.size:
            k_new = net.user_degrees.astype(np.float64) + linked
            sub = self.common[affected].tocsr().astype(np.float64)
            rows = np.repeat(np.arange(len(affected)), np.diff(sub.indptr))
            sub.data /= np.sqrt(net.user_degrees[affected][rows] * k_new[sub.indices])
            w_eta = np.asarray(sub[:, view.users].sum(axis=1)).ravel()
            scores = recsys.drop_purchased((sub @ self.a).tocsr(), self.a[affected])
            threshold = recsys.row_kth_largest(scores, self.L)
            w_full[affected] = w_eta
            hits[affected] = beats(w_eta, threshold)
        return HEvaluation(int(hits.sum()), hits, w_full)


class RebuildEvaluator:
    """Recomputes everything on the augmented network for every injection.

    Slow but makes no structural assumption, so it also handles the top-k
    pruned item-CF variant (where the new item can displace neighbors of
    existing items).
    """

    def __init__(self, network: BipartiteNetwork, L: int = DEFAULT_L, topk: int | None = None):
        self.network = network
        self.L = L
        self.topk = topk
        self.engine = "icf" if topk is None else f"icf-top{topk}"

    def evaluate(self, users) -> HEvaluation:
        view = inject(self.network, users)
        aug = view.augmented()
        sim = recsys.item_similarity(aug)
        if self.topk is not None:
            sim = recsys.item_similarity_topk(sim, self.topk)
        eta = view.eta
        scores = recsys.score_matrix(aug, sim)
        w_eta = np.asarray(scores[:, eta].todense()).ravel()
        others = scores[:, :eta]
        threshold = recsys.row_kth_largest(others, self.L)
        hits = beats(w_eta, threshold)
        hits[view.users] = False
        return HEvaluation(int(hits.sum()), hits, w_eta)


def make_evaluator(network: BipartiteNetwork, L: int = DEFAULT_L, engine: str = "icf", topk: int | None = None):
    if engine == "icf":
        return ICFEvaluator(network, L) if topk is None else RebuildEvaluator(network, L, topk)
    if engine == "ucf":
        if topk is not None:
            raise ValueError("top-k pruning applies to item-based CF only")
        return UCFEvaluator(network, L)
    raise ValueError(f"unknown engine {engine!r}")


def child_rng(master_seed: int, realization: int) -> np.random.Generator:
    """Generator for one realization; depends only on (master_seed, realization)."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(realization,)))


@dataclass
class ExperimentResult:
    strategy: PromotionStrategy
    L: int
    master_seed: int
    H: tuple[int, ...]
    engine: str = "icf"

    @property
    def R(self) -> int:
        return self.strategy.R

    @property
    def realizations(self) -> int:
        return len(self.H)

    @property
    def mean(self) -> float:
        return math.fsum(self.H) / len(self.H)

    @property
    def std(self) -> float:
        """Sample standard deviation (0 for a single realization)."""
        if len(self.H) < 2:
            return 0.0
        return float(np.std(np.asarray(self.H, dtype=np.float64), ddof=1))

    @property
    def sem(self) -> float:
        return self.std / math.sqrt(len(self.H))


def run_experiment(
    network: BipartiteNetwork,
    strategy: PromotionStrategy,
    L: int = DEFAULT_L,
    realizations: int = 50,
    master_seed: int = 0,
    engine: str = "icf",
    evaluator=None,
    threads: int = 1,
) -> ExperimentResult:
    """Average H over independent realizations of one strategy.

    Realization r draws its users from ``child_rng(master_seed, r)``, so the
    result does not depend on ``threads`` or on execution order.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    if strategy.R > network.user_count:
        raise ValueError(f"R={strategy.R} exceeds the number of users ({network.user_count})")
    if evaluator is None:
        evaluator = make_evaluator(network, L, engine)
    elif evaluator.L != L:
        raise ValueError("evaluator was built for a different L")

    def one(r):
        users = select_users(network, strategy, child_rng(master_seed, r))
        return evaluator.evaluate(users).H

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hs = list(pool.map(one, range(realizations)))
    else:
        hs = [one(r) for r in range(realizations)]
    return ExperimentResult(strategy, L, master_seed, tuple(hs), getattr(evaluator, "engine", engine))


def default_r_grid(points: int = 13, r_max: int = 1000) -> list[int]:
    return sorted({int(round(x)) for x in np.logspace(0, math.log10(r_max), points)})


def default_tau_grid() -> list[float]:
    return [x / 2 for x in range(-8, 9)]


def sweep(
    network: BipartiteNetwork,
    strategies: Sequence[str | float],
    R_values: Sequence[int],
    L: int = DEFAULT_L,
    realizations: int = 50,
    master_seed: int = 0,
    engine: str = "icf",
    topk: int | None = None,
    threads: int = 1,
    evaluator=None,
) -> list[ExperimentResult]:
    """Cross product of strategies (names or tau values) and R values.

    The evaluator (similarities, thresholds) is built once and shared.
    """
    if not strategies or not R_values:
        raise ValueError("empty grid")
    too_big = [r for r in R_values if r > network.user_count]
    if too_big:
        raise ValueError(f"R values {too_big} exceed the number of users ({network.user_count})")
    cells = [PromotionStrategy.parse(s, int(r)) for s in strategies for r in R_values]
    if evaluator is None:
        evaluator = make_evaluator(network, L, engine, topk)
    return [
        run_experiment(network, c, L, realizations, master_seed, evaluator=evaluator, threads=threads)
        for c in cells
    ]


SWEEP_COLUMNS = ["strategy", "tau", "R", "L", "mean_H", "std_H", "realizations", "seed"]


def _fmt_tau(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def write_sweep_csv(results: Iterable[ExperimentResult], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for res in results:
        writer.writerow(
            [
                res.strategy.label,
                _fmt_tau(res.strategy.exponent),
                res.R,
                res.L,
                repr(res.mean),
                repr(res.std),
                res.realizations,
                res.master_seed,
            ]
        )
