import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coldpromo import netstats
from coldpromo.network import BipartiteNetwork, validate
from coldpromo.synthgen import (
    GeneratorConfig,
    _decrement_largest,
    balance_degree_sums,
    configuration_model,
    generate,
    sample_degree_sequence,
    truncated_powerlaw_mean,
    tune_assortativity,
)


def test_constant_sequence():
    assert set(sample_degree_sequence(100, 2.5, 4, 4, 0).tolist()) == {4}


def test_sampler_support_and_errors():
    x = sample_degree_sequence(5000, 1.5, 2, 30, 1)
    assert x.min() >= 2 and x.max() <= 30
    # bounded support is fine even for exponent <= 1
    assert len(sample_degree_sequence(10, 0.5, 1, 10, 1)) == 10
    with pytest.raises(ValueError, match="non-normalizable"):
        sample_degree_sequence(10, 1.0, 1, None, 1)
    assert sample_degree_sequence(200, 2.0, 3, None, 1).min() >= 3


def test_sampler_recovers_exponent():
    x = sample_degree_sequence(100_000, 2.5, 1, 1000, 123)
    assert netstats.powerlaw_exponent_mle(x, 1) == pytest.approx(2.5, abs=0.1)


def test_sampler_mean_within_three_standard_errors():
    x = sample_degree_sequence(100_000, 2.5, 1, 1000, 7)
    k = np.arange(1, 1001, dtype=float)
    p = k**-2.5 / np.sum(k**-2.5)
    truth = float(np.sum(k * p))
    assert truncated_powerlaw_mean(2.5, 1, 1000) == pytest.approx(truth, rel=1e-12)
    se = x.std(ddof=1) / np.sqrt(len(x))
    assert abs(x.mean() - truth) < 3 * se


def _naive_balance(u, o):
    u, o = list(u), list(o)
    while sum(u) != sum(o):
        heavy = u if sum(u) > sum(o) else o
        heavy[int(np.argmax(heavy))] -= 1
    return u, o


@given(
    st.lists(st.integers(1, 30), min_size=1, max_size=25),
    st.lists(st.integers(1, 30), min_size=1, max_size=25),
)
@settings(max_examples=150, deadline=None)
def test_balance_matches_step_by_step_rule(u, o):
    try:
        expected = _naive_balance(u, o) if min(_naive_balance(u, o)[0] + _naive_balance(u, o)[1]) >= 1 else None
    except ValueError:
        expected = None
    if expected is None:
        with pytest.raises(ValueError):
            balance_degree_sums(u, o)
        return
    got_u, got_o = balance_degree_sums(u, o)
    assert got_u.tolist() == expected[0] and got_o.tolist() == expected[1]


def test_two_by_two_matching():
    for seed in range(10):
        net = configuration_model([1, 1], [1, 1], seed)
        assert net.link_count == 2
        assert net.edge_set() in ({("u0", "o0"), ("u1", "o1")}, {("u0", "o1"), ("u1", "o0")})


def test_unrealizable_sequences():
    with pytest.raises(ValueError, match="unrealizable"):
        configuration_model([2], [2], 0)
    with pytest.raises(ValueError, match="unrealizable"):
        configuration_model([2, 2], [3, 1], 0)
    with pytest.raises(ValueError, match="sums differ"):
        configuration_model([2, 2], [3], 0)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_configuration_model_exact_degrees(seed):
    rng = np.random.default_rng(seed)
    u = sample_degree_sequence(60, 2.0, 1, 8, rng)
    o = sample_degree_sequence(60, 2.0, 1, 8, rng)
    u, o = balance_degree_sums(u, o)
    net = configuration_model(u, o, rng)
    assert net.user_degrees.tolist() == u.tolist()
    assert net.item_degrees.tolist() == o.tolist()
    assert validate(net).ok


def _heterogeneous(n_side=10_000, seed=5):
    rng = np.random.default_rng(seed)
    u = sample_degree_sequence(n_side, 2.5, 1, 1000, rng)
    o = sample_degree_sequence(n_side, 2.2, 1, 1000, rng)
    u, o = balance_degree_sums(u, o)
    return configuration_model(u, o, rng)


def test_heterogeneous_configuration_model_is_valid_and_flat():
    net = _heterogeneous()
    assert validate(net).ok
    assert abs(netstats.degree_correlation(net)) < 0.05


def test_tuning_zero_budget_is_identity(five_edge):
    assert tune_assortativity(five_edge, "negative", 0, 1).edge_set() == five_edge.edge_set()


def test_tuning_negative_on_heterogeneous_network():
    net = _heterogeneous(3000, 9)
    tuned = tune_assortativity(net, "negative", 10 * net.link_count, 3)
    assert tuned.user_degrees.tolist() == net.user_degrees.tolist()
    assert tuned.item_degrees.tolist() == net.item_degrees.tolist()
    assert validate(tuned).ok
    assert netstats.degree_correlation(tuned) < netstats.degree_correlation(net)
    for side in ("user", "item"):
        prof = netstats.knn_by_degree(tuned, side)
        _, means = netstats.log_binned(prof.k, prof.mean_dnn, prof.counts)
        # the curve may bottom out at 1 (all neighbors of degree 1)
        assert np.all(np.diff(means) <= 0.01), side
        assert means[0] > 2 * means[-1], side


@given(
    st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=3, max_size=35, unique=True),
    st.sampled_from(["negative", "positive"]),
    st.integers(0, 2**31 - 1),
)
@settings(max_examples=80, deadline=None)
def test_tuning_moves_monotonically(pairs, sign, seed):
    users, items = zip(*pairs)
    net = BipartiteNetwork.from_edges(users, items, 8, 8)
    before = netstats.degree_correlation(net)
    out = tune_assortativity(net, sign, 100, seed)
    after = netstats.degree_correlation(out)
    assert out.user_degrees.tolist() == net.user_degrees.tolist()
    if before is None:
        return
    if sign == "negative":
        assert after <= before + 1e-12
    else:
        assert after >= before - 1e-12


def test_generate_deterministic_and_valid():
    cfg = GeneratorConfig(user_count=800, item_count=400, seed=4)
    a, rep_a = generate(cfg)
    b, rep_b = generate(cfg)
    assert a.edge_set() == b.edge_set() and rep_a == rep_b
    assert validate(a).ok
    assert rep_a["correlation"] < rep_a["correlation_untuned"]


def test_config_from_mapping():
    cfg = GeneratorConfig.from_mapping({"user-count": "50", "item_exponent": "2.4", "target_sign": "none"})
    assert cfg.user_count == 50 and cfg.item_exponent == 2.4 and cfg.target_sign == "none"
    with pytest.raises(ValueError):
        GeneratorConfig.from_mapping({"bogus": "1"})
    with pytest.raises(ValueError):
        GeneratorConfig.from_mapping({"user_exponent": "1.0"})


@given(st.lists(st.integers(1, 30), min_size=1, max_size=20), st.integers(0, 200))
def test_decrement_largest_matches_literal_loop(seq, excess):
    seq = np.array(seq)
    excess = min(excess, int(seq.sum()))
    ref = seq.copy()
    for _ in range(excess):
        ref[int(np.argmax(ref))] -= 1
    assert _decrement_largest(seq, excess).tolist() == ref.tolist()
