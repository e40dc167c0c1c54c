"""Synthetic heavy-tailed bipartite networks with tunable degree correlations."""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .netstats import degree_correlation
from .network import BipartiteNetwork
from .nullmodel import swap_edges


@dataclass
class GeneratorConfig:
    user_count: int = 10_000
    item_count: int = 5_000
    user_exponent: float = 2.5
    item_exponent: float = 2.2
    user_k_min: int = 1
    user_k_max: int = 1000
    item_k_min: int = 1
    item_k_max: int = 1000
    target_sign: Literal["negative", "positive", "none"] = "negative"
    # multiples of w; 10 -> 10w proposals
    tuning_budget: float = 10.0
    seed: int = 0

    def check(self) -> None:
        if self.user_exponent <= 1 or self.item_exponent <= 1:
            raise ValueError("exponents must be > 1")
        for lo, hi in ((self.user_k_min, self.user_k_max), (self.item_k_min, self.item_k_max)):
            if not 1 <= lo <= hi:
                raise ValueError("need 1 <= k_min <= k_max")
        if self.user_count < 2 or self.item_count < 2:
            raise ValueError("need at least 2 nodes per side")
        if self.target_sign not in ("negative", "positive", "none"):
            raise ValueError(f"bad target_sign {self.target_sign!r}")
        if self.tuning_budget < 0:
            raise ValueError("tuning_budget must be >= 0")

    @classmethod
    def from_mapping(cls, values: dict) -> "GeneratorConfig":
        """Build from string-valued key/value pairs, coercing to field types."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in fields:
                raise ValueError(f"unknown generator key {key!r}")
            default = fields[key].default
            kwargs[key] = type(default)(raw) if not isinstance(default, str) else str(raw)
        cfg = cls(**kwargs)
        cfg.check()
        return cfg


def sample_degree_sequence(
    count: int,
    exponent: float,
    k_min: int = 1,
    k_max: int | None = None,
    seed: int | np.random.Generator | None = None,
) -> np.ndarray:
    """Draw ``count`` integers from P(k) ~ k^-exponent on [k_min, k_max].

    With ``k_max=None`` the support is unbounded, which needs exponent > 1.
    """
    rng = np.random.default_rng(seed)
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    if k_max is None:
        if exponent <= 1:
            raise ValueError("non-normalizable")
        out = np.empty(0, dtype=np.int64)
        while len(out) < count:
            draw = rng.zipf(exponent, size=max(count - len(out), 64))
            out = np.concatenate([out, draw[draw >= k_min]])
        return out[:count].astype(np.int64)
    if k_max < k_min:
        raise ValueError("k_max < k_min")
    support = np.arange(k_min, k_max + 1, dtype=np.int64)
    p = support.astype(np.float64) ** -exponent
    p /= p.sum()
    return rng.choice(support, size=count, p=p)


def truncated_powerlaw_mean(exponent: float, k_min: int, k_max: int) -> float:
    k = np.arange(k_min, k_max + 1, dtype=np.float64)
    p = k**-exponent
    return float(np.sum(k * p) / np.sum(p))


def _decrement_largest(seq: np.ndarray, excess: int) -> np.ndarray:
    """Apply ``excess`` steps of "decrement the largest entry (lowest index
    among ties)" in closed form."""
    seq = seq.copy()
    if excess <= 0:
        return seq
    values = np.sort(seq)[::-1]
    # find the smallest level c with sum(max(k - c, 0)) <= excess
    lo, hi = 0, int(values[0])
    while lo < hi:
        c = (lo + hi) // 2
        if np.maximum(seq - c, 0).sum() <= excess:
            hi = c
        else:
            lo = c + 1
    c = lo
    seq = np.minimum(seq, c)
    rest = excess - int(np.maximum(values - c, 0).sum())
    if rest:
        at_level = np.flatnonzero(seq == c)
        seq[at_level[:rest]] -= 1
    return seq


def balance_degree_sums(user_deg, item_deg) -> tuple[np.ndarray, np.ndarray]:
    """Make both sums equal by decrementing the largest degrees of the heavier side."""
    user_deg = np.asarray(user_deg, dtype=np.int64)
    item_deg = np.asarray(item_deg, dtype=np.int64)
    diff = int(user_deg.sum() - item_deg.sum())
    if diff > 0:
        user_deg = _decrement_largest(user_deg, diff)
    elif diff < 0:
        item_deg = _decrement_largest(item_deg, -diff)
    if user_deg.min() < 1 or item_deg.min() < 1:
        raise ValueError("cannot balance degree sums without zero-degree nodes")
    return user_deg, item_deg


def configuration_model(user_deg, item_deg, seed: int | np.random.Generator | None = None) -> BipartiteNetwork:
    """Random simple bipartite graph with exactly the given degree sequences.

    Stubs are matched uniformly, then surplus copies of repeated pairs are
    swapped against random links until the graph is simple.

    Raises:
        ValueError: sums differ, or the repair exceeds 10w swap attempts
            ("unrealizable sequence").
    """
    rng = np.random.default_rng(seed)
    user_deg = np.asarray(user_deg, dtype=np.int64)
    item_deg = np.asarray(item_deg, dtype=np.int64)
    if user_deg.sum() != item_deg.sum():
        raise ValueError("degree sums differ")
    n, m = len(user_deg), len(item_deg)
    users = np.repeat(np.arange(n, dtype=np.int64), user_deg)
    items = rng.permutation(np.repeat(np.arange(m, dtype=np.int64), item_deg))
    w = len(users)

    keys = (users * m + items).tolist()
    count = Counter(keys)
    seen = set()
    bad = []
    for slot, key in enumerate(keys):
        if key in seen:
            bad.append(slot)
        seen.add(key)

    u = users.tolist()
    it = items.tolist()
    budget = 10 * w
    tries = 0
    while bad:
        s = bad[-1]
        key_s = u[s] * m + it[s]
        if count[key_s] <= 1:
            bad.pop()
            continue
        if tries >= budget:
            raise ValueError("unrealizable sequence")
        tries += 1
        t = int(rng.integers(w))
        i, a, j, b = u[s], it[s], u[t], it[t]
        if i == j or a == b:
            continue
        ib, ja = i * m + b, j * m + a
        if count[ib] or count[ja]:
            continue
        count[key_s] -= 1
        count[j * m + b] -= 1
        count[ib] += 1
        count[ja] += 1
        it[s], it[t] = b, a
        bad.pop()
    return BipartiteNetwork.from_edges(np.asarray(u), np.asarray(it), n, m)


def tune_assortativity(
    network: BipartiteNetwork,
    target_sign: Literal["negative", "positive"],
    swap_budget: int,
    seed: int | np.random.Generator | None = None,
) -> BipartiteNetwork:
    """Greedy degree-preserving rewiring toward the requested correlation sign.

    A valid link crossing (i, a), (j, b) -> (i, b), (j, a) changes the sum of
    endpoint-degree products by (k_i - k_j)(k_b - k_a); the means and
    variances of endpoint degrees over links are invariant, so the sign of
    that change is the sign of the change in the Pearson correlation.  Only
    strictly improving swaps are accepted.
    """
    if target_sign not in ("negative", "positive"):
        raise ValueError(f"bad target_sign {target_sign!r}")
    rng = np.random.default_rng(seed)
    users, items = network.edges()
    if swap_budget <= 0:
        return network
    ku = network.user_degrees.tolist()
    ko = network.item_degrees.tolist()
    sign = -1 if target_sign == "negative" else 1

    def accept(i, a, j, b):
        return sign * (ku[i] - ku[j]) * (ko[b] - ko[a]) > 0

    swap_edges(users, items, network.item_count, int(swap_budget), rng, accept)
    return BipartiteNetwork.from_edges(
        users, items, network.user_count, network.item_count, network.user_ids, network.item_ids
    )


def generate(config: GeneratorConfig) -> tuple[BipartiteNetwork, dict]:
    """Sample, balance, realize and (optionally) tune a network.

    Returns the network and a JSON-ready report.
    """
    config.check()
    ss = np.random.SeedSequence(config.seed)
    r_user, r_item, r_cm, r_tune = (np.random.default_rng(s) for s in ss.spawn(4))
    ud = sample_degree_sequence(config.user_count, config.user_exponent, config.user_k_min, config.user_k_max, r_user)
    idg = sample_degree_sequence(config.item_count, config.item_exponent, config.item_k_min, config.item_k_max, r_item)
    raw_sums = (int(ud.sum()), int(idg.sum()))
    ud, idg = balance_degree_sums(ud, idg)
    net = configuration_model(ud, idg, r_cm)
    corr_before = degree_correlation(net)
    budget = int(round(config.tuning_budget * net.link_count))
    if config.target_sign != "none" and budget > 0:
        net = tune_assortativity(net, config.target_sign, budget, r_tune)
    report = {
        "config": dataclasses.asdict(config),
        "raw_degree_sums": {"user": raw_sums[0], "item": raw_sums[1]},
        "n": net.user_count,
        "m": net.item_count,
        "w": net.link_count,
        "max_user_degree": int(net.user_degrees.max()),
        "max_item_degree": int(net.item_degrees.max()),
        "correlation_untuned": corr_before,
        "correlation": degree_correlation(net),
        "tuning_attempts": budget if config.target_sign != "none" else 0,
    }
    return net, report
