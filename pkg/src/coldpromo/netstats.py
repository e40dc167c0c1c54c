"""Structural statistics: summary scalars, degree distributions, power-law
exponents and nearest-neighbor degree curves."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize, special

from .network import BipartiteNetwork, Side, degrees


@dataclass(frozen=True)
class NetworkSummary:
    n: int
    m: int
    w: int

    @property
    def mean_user_degree(self) -> float:
        return float(Fraction(self.w, self.n))

    @property
    def mean_item_degree(self) -> float:
        return float(Fraction(self.w, self.m))

    @property
    def sparsity(self) -> float:
        return float(Fraction(self.w, self.n * self.m))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "w": self.w,
            "mean_user_degree": self.mean_user_degree,
            "mean_item_degree": self.mean_item_degree,
            "sparsity": self.sparsity,
        }

    def table_row(self) -> dict[str, str]:
        """Values rounded the way summary tables usually print them."""
        return {
            "n": f"{self.n:,}",
            "m": f"{self.m:,}",
            "w": f"{self.w:,}",
            "mean_user_degree": f"{self.mean_user_degree:.2f}",
            "mean_item_degree": f"{self.mean_item_degree:.2f}",
            "sparsity": f"{self.sparsity:.2e}",
        }


def summarize_counts(n: int, m: int, w: int) -> NetworkSummary:
    if min(n, m, w) <= 0:
        raise ValueError("counts must be positive")
    return NetworkSummary(int(n), int(m), int(w))


def summarize(network: BipartiteNetwork) -> NetworkSummary:
    return summarize_counts(network.user_count, network.item_count, network.link_count)


@dataclass
class DegreeDistribution:
    side: str
    k: np.ndarray
    p: np.ndarray
    counts: np.ndarray
    exponent: float | None = None
    k_min: int | None = None

    def rows(self):
        return zip(self.k.tolist(), self.p.tolist(), self.counts.tolist())


def degree_distribution(
    network: BipartiteNetwork, side: Side, k_min: int = 1, fit: bool = True
) -> DegreeDistribution:
    """Empirical P(k) over the degrees present, optionally with a fitted exponent.

    The fit is skipped (exponent ``None``) when the tail is too short or
    degenerate for :func:`powerlaw_exponent_mle`.
    """
    deg = degrees(network, side)
    k, counts = np.unique(deg, return_counts=True)
    p = counts / counts.sum()
    exponent = None
    if fit:
        try:
            exponent = powerlaw_exponent_mle(deg, k_min=k_min)
        except ValueError:
            exponent = None
    return DegreeDistribution(side, k, p, counts, exponent, k_min if exponent is not None else None)


def _tail(sample, k_min):
    x = np.asarray(sample, dtype=np.float64)
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    x = x[x >= k_min]
    if len(x) < 10:
        raise ValueError("insufficient tail")
    if np.all(x == k_min):
        raise ValueError("degenerate sample")
    return x


def powerlaw_exponent_mle(sample, k_min: int = 1, k_max: int | None = None, method: str = "exact") -> float:
    """Maximum-likelihood exponent of a discrete power law P(k) ~ k^-gamma, k >= k_min.

    ``method="exact"`` maximizes the discrete likelihood, whose normalizer is
    the Hurwitz zeta function (or a finite sum when ``k_max`` is given).
    ``method="approx"`` is the closed form
    ``1 + N / sum(ln(k / (k_min - 0.5))))``, which is only accurate for
    k_min of roughly 6 and above; at k_min = 1 it underestimates badly.

    Raises:
        ValueError: fewer than 10 observations >= k_min ("insufficient tail"),
            or every observation equals k_min ("degenerate sample").
    """
    x = _tail(sample, k_min)
    if method == "approx":
        return 1.0 + len(x) / float(np.sum(np.log(x / (k_min - 0.5))))
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")

    mean_log = float(np.mean(np.log(x)))
    if k_max is None:
        def nll(g):
            return g * mean_log + math.log(special.zeta(g, k_min))
    else:
        if x.max() > k_max:
            raise ValueError("observation above k_max")
        support = np.arange(k_min, k_max + 1, dtype=np.float64)
        log_support = np.log(support)

        def nll(g):
            return g * mean_log + float(special.logsumexp(-g * log_support))

    res = optimize.minimize_scalar(nll, bounds=(1.0 + 1e-9, 50.0), method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def nn_degrees(network: BipartiteNetwork, side: Side) -> np.ndarray:
    """d_nn for every node of ``side``: mean degree of its neighbors."""
    ptr, idx = network.csr(side)
    other = degrees(network, "item" if side == "user" else "user")
    own = np.diff(ptr)
    rows = np.repeat(np.arange(len(own)), own)
    sums = np.bincount(rows, weights=other[idx].astype(np.float64), minlength=len(own))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(own > 0, sums / np.maximum(own, 1), np.nan)


def nn_degree(network: BipartiteNetwork, node: int, side: Side) -> float:
    ptr, idx = network.csr(side)
    other = degrees(network, "item" if side == "user" else "user")
    nbrs = idx[ptr[node] : ptr[node + 1]]
    if len(nbrs) == 0:
        raise ValueError(f"{side} {node} has degree 0")
    return float(other[nbrs].sum()) / len(nbrs)


def degree_correlation(network: BipartiteNetwork) -> float | None:
    """Pearson correlation of (user degree, item degree) over edges.

    Returns ``None`` when either endpoint degree has zero variance.
    """
    users, items = network.edges()
    ku = network.user_degrees[users].astype(np.float64)
    ko = network.item_degrees[items].astype(np.float64)
    if len(ku) < 2 or np.all(ku == ku[0]) or np.all(ko == ko[0]):
        return None
    ku -= ku.mean()
    ko -= ko.mean()
    return float(np.dot(ku, ko) / math.sqrt(np.dot(ku, ku) * np.dot(ko, ko)))


@dataclass
class AssortativityProfile:
    side: str
    k: np.ndarray
    mean_dnn: np.ndarray
    counts: np.ndarray
    dnn: np.ndarray
    correlation: float | None

    def rows(self):
        return zip(self.k.tolist(), self.mean_dnn.tolist(), self.counts.tolist())


def knn_by_degree(network: BipartiteNetwork, side: Side) -> AssortativityProfile:
    """The <d_nn(k)> curve for one side plus the edge-wise degree correlation."""
    dnn = nn_degrees(network, side)
    deg = degrees(network, side)
    k, inverse, counts = np.unique(deg, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=dnn, minlength=len(k))
    return AssortativityProfile(side, k, sums / counts, counts, dnn, degree_correlation(network))


def log_binned(k: np.ndarray, values: np.ndarray, weights: np.ndarray, bins_per_decade: int = 4):
    """Weighted means of ``values`` over logarithmic degree bins (for trend checks)."""
    k = np.asarray(k, dtype=np.float64)
    edges = 10 ** np.arange(0, math.log10(k.max()) + 1.0 / bins_per_decade + 1e-12, 1.0 / bins_per_decade)
    which = np.digitize(k, edges)
    centers, means = [], []
    for b in np.unique(which):
        sel = which == b
        wsum = weights[sel].sum()
        centers.append(float(np.sum(k[sel] * weights[sel]) / wsum))
        means.append(float(np.sum(values[sel] * weights[sel]) / wsum))
    return np.array(centers), np.array(means)


def write_curve_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "value", "count"])
        for k, v, c in rows:
            writer.writerow([k, repr(float(v)), c])
