"""Exit criteria, one test each.  Every test records a PASS/FAIL line that is
printed in the terminal summary."""

import json
import math
import time
from collections import Counter

import numpy as np
import pytest

import oracles
from coldpromo import netstats
from coldpromo import promotion as P
from coldpromo.cli import main
from coldpromo.network import validate, write_edge_list
from coldpromo.nullmodel import reshuffle
from coldpromo.synthgen import GeneratorConfig, generate, sample_degree_sequence
from conftest import ACCEPTANCE_LINES

L = 6
REALIZATIONS = 50
MASTER_SEED = 2024


def record(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def original():
    net, report = generate(GeneratorConfig(user_count=10_000, item_count=5_000, user_exponent=2.5,
                                           item_exponent=2.2, target_sign="negative", seed=0))
    assert validate(net).ok and report["correlation"] < 0
    return net


@pytest.fixture(scope="module")
def null(original):
    net, _ = reshuffle(original, seed=1)
    return net


@pytest.fixture(scope="module")
def experiments(original, null):
    """MaxD/MinD and tau = -2/+2 cells on both networks, shared by C3-C5 and C9."""
    t0 = time.perf_counter()
    out = {}
    for name, net in (("original", original), ("null", null)):
        ev = P.ICFEvaluator(net, L)
        for R in (10, 50, 100):
            for strat in (P.MaxD(R), P.MinD(R)):
                out[name, strat.label, R] = P.run_experiment(net, strat, L, REALIZATIONS, MASTER_SEED, evaluator=ev)
        for tau in (-2.0, 2.0):
            strat = P.Exponent(tau, 100)
            out[name, strat.label, 100] = P.run_experiment(net, strat, L, REALIZATIONS, MASTER_SEED, evaluator=ev)
    out["elapsed"] = time.perf_counter() - t0
    return out


def test_c01_oracle_equivalence():
    t0 = time.perf_counter()
    matches = 0
    for case in range(100):
        rng = np.random.default_rng(case)
        a = oracles.random_adjacency(rng)
        net = oracles.to_network(a)
        R = int(rng.integers(1, net.user_count + 1))
        users = np.sort(rng.choice(net.user_count, size=R, replace=False))
        Lc = int(rng.integers(1, 4))
        got = P.ICFEvaluator(net, Lc).evaluate(users)
        ref = oracles.brute_force_hits(a, users.tolist(), Lc)
        matches += int(got.H == ref.sum() and got.hits.tolist() == ref.tolist())
    elapsed = time.perf_counter() - t0
    ok = matches == 100 and elapsed < 10
    record("C1 oracle equivalence", ok, f"{matches}/100 exact, {elapsed:.2f}s (limit 10s)")
    assert ok


def test_c02_fixture_exactness(five_edge):
    ev = P.ICFEvaluator(five_edge, 1)
    sim = ev.similarity
    errs = [abs(sim.get(0, 1) - 0.5), abs(sim.get(0, 2) - 1 / math.sqrt(2)), abs(sim.get(1, 2))]
    h1 = ev.evaluate([0]).H
    h3 = ev.evaluate([2]).H
    a = five_edge.matrix().toarray()
    oracle = (oracles.brute_force_hits(a, [0], 1).sum(), oracles.brute_force_hits(a, [2], 1).sum())
    ok = max(errs) <= 1e-12 and (h1, h3) == (2, 0) == tuple(oracle)
    record("C2 fixture exactness", ok, f"max sim error {max(errs):.1e}, H(u1)={h1}, H(u3)={h3}")
    assert ok


def test_c03_mind_beats_maxd_on_original(experiments):
    ok = True
    parts = []
    for R in (10, 50, 100):
        lo, hi = experiments["original", "MaxD", R], experiments["original", "MinD", R]
        cell = hi.mean - lo.mean > hi.sem + lo.sem
        ok &= cell
        parts.append(f"R={R}: MinD {hi.mean:.1f}±{hi.sem:.1f} vs MaxD {lo.mean:.1f}±{lo.sem:.1f}")
    ok &= experiments["elapsed"] < 300
    record("C3 original regime", ok, "; ".join(parts) + f" ({experiments['elapsed']:.1f}s)")
    assert ok


def test_c04_maxd_beats_mind_on_null(experiments):
    ok = True
    parts = []
    for R in (10, 50, 100):
        hi, lo = experiments["null", "MaxD", R], experiments["null", "MinD", R]
        ok &= hi.mean > lo.mean
        parts.append(f"R={R}: MaxD {hi.mean:.1f}±{hi.sem:.1f} vs MinD {lo.mean:.1f}±{lo.sem:.1f}")
    record("C4 null regime", ok, "; ".join(parts))
    assert ok


def test_c05_tau_direction(experiments):
    o_neg, o_pos = experiments["original", "tau=-2", 100], experiments["original", "tau=2", 100]
    n_neg, n_pos = experiments["null", "tau=-2", 100], experiments["null", "tau=2", 100]
    ok = o_neg.mean > o_pos.mean and n_pos.mean > n_neg.mean
    record(
        "C5 tau sweep direction",
        ok,
        f"original tau=-2 {o_neg.mean:.1f} vs tau=+2 {o_pos.mean:.1f}; "
        f"null tau=-2 {n_neg.mean:.1f} vs tau=+2 {n_pos.mean:.1f}",
    )
    assert ok


def test_c06_null_model_exactness(original):
    r0 = netstats.degree_correlation(original)
    exact = True
    corrs = []
    for seed in range(10):
        out, report = reshuffle(original, seed=100 + seed)
        exact &= Counter(out.user_degrees.tolist()) == Counter(original.user_degrees.tolist())
        exact &= Counter(out.item_degrees.tolist()) == Counter(original.item_degrees.tolist())
        exact &= out.user_degrees.tolist() == original.user_degrees.tolist()
        users, items = out.edges()
        exact &= len(set(zip(users.tolist(), items.tolist()))) == out.link_count == original.link_count
        exact &= report.attempts == 3 * original.link_count
        if seed < 5:
            corrs.append(abs(netstats.degree_correlation(out)))
    ratio = float(np.mean(corrs)) / abs(r0)
    ok = exact and ratio < 0.3
    record("C6 null-model exactness", ok, f"degrees exact on 10 seeds: {exact}; |r| {abs(r0):.3f} -> "
           f"{np.mean(corrs):.4f} (ratio {ratio:.3f}, limit 0.3)")
    assert ok


def test_c07_table_scalars():
    expected = {
        (103867, 83342, 113624): ("1.09", "1.36", "1.31e-05"),
        (77947, 18751, 94457): ("1.21", "5.04", "6.46e-05"),
    }
    got = {}
    for counts, want in expected.items():
        row = netstats.summarize_counts(*counts).table_row()
        got[counts] = (row["mean_user_degree"], row["mean_item_degree"], row["sparsity"])
    ok = got == expected
    record("C7 table scalars", ok, "; ".join(f"{k}: {v}" for k, v in got.items()))
    assert ok


def test_c08_mle_recovery():
    est = [
        netstats.powerlaw_exponent_mle(sample_degree_sequence(100_000, 2.5, 1, 1000, seed), k_min=1)
        for seed in range(5)
    ]
    ok = all(2.4 <= g <= 2.6 for g in est)
    record("C8 MLE recovery", ok, "estimates " + ", ".join(f"{g:.3f}" for g in est) + " (band [2.4, 2.6])")
    assert ok


def test_c09_bounds_and_monotonicity(experiments, original):
    n = original.user_count
    bounds = all(
        0 <= h <= n - res.R for key, res in experiments.items() if key != "elapsed" for h in res.H
    )
    monotone = 0
    for case in range(50):
        rng = np.random.default_rng(40_000 + case)
        a = oracles.random_adjacency(rng)
        net = oracles.to_network(a)
        users = np.sort(rng.choice(net.user_count, size=int(rng.integers(1, net.user_count + 1)), replace=False))
        hs = [P.ICFEvaluator(net, Lc).evaluate(users).H for Lc in range(1, 7)]
        bounds &= all(0 <= h <= net.user_count - len(users) for h in hs)
        monotone += hs == sorted(hs)
    ok = bounds and monotone == 50
    record("C9 bounds and monotonicity", ok, f"bounds hold: {bounds}; H non-decreasing in L: {monotone}/50")
    assert ok


def test_c10_ucf_reversal_tracked(original):
    ev = P.UCFEvaluator(original, L)
    parts = []
    ok = True
    for R in (10, 50, 100):
        hi = P.run_experiment(original, P.MaxD(R), L, REALIZATIONS, MASTER_SEED, evaluator=ev)
        lo = P.run_experiment(original, P.MinD(R), L, REALIZATIONS, MASTER_SEED, evaluator=ev)
        ok &= hi.mean >= lo.mean
        parts.append(f"R={R}: MaxD {hi.mean:.1f} vs MinD {lo.mean:.1f}")
    record("C10 UCF reversal (tracked, not gated)", ok, "; ".join(parts))
    if not ok:
        pytest.xfail("tracked expectation not met on the synthetic network; see README")


def test_c11_determinism(tmp_path, original):
    edges = tmp_path / "edges.tsv"
    with open(edges, "w") as fh:
        write_edge_list(original, fh)
    args = ["sweep", "--input", str(edges), "--strategies", "MaxD,MinD,PA,RAN", "--tau-grid=-2,0.5,2",
            "--R-grid", "1,10,100", "--realizations", "10"]
    assert main(args + ["--output-dir", str(tmp_path / "first")]) == 0
    manifest = json.loads((tmp_path / "first" / "manifest.json").read_text())
    reference = (tmp_path / "first" / "sweep.csv").read_bytes()
    same = []
    for threads in (1, 4):
        out = tmp_path / f"rerun{threads}"
        assert main(args + ["--output-dir", str(out), "--seed", str(manifest["seed"]), "--threads", str(threads)]) == 0
        same.append((out / "sweep.csv").read_bytes() == reference)
    ok = all(same)
    record("C11 determinism", ok, f"rerun with manifest seed {manifest['seed']}: identical at threads 1 and 4: {same}")
    assert ok
