import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sparse_rationales.graph import Factor, FactorGraph, build_highlight_graph, build_matching_graph
from sparse_rationales.map_oracles import (
    global_score,
    map_at_most_one,
    map_budget,
    map_factor,
    map_global_brute_force,
    map_pair,
    map_seq_budget,
    map_xor,
)


def check(result, assignment, score):
    assert result.assignment.tolist() == assignment
    assert result.score == pytest.approx(score, abs=1e-12)


@pytest.mark.parametrize(
    "s,z,score",
    [([0.2, 0.7, 0.1], [0, 1, 0], 0.7), ([1.0, 1.0, 0.0], [1, 0, 0], 1.0), ([-3.0, -1.0], [0, 1], -1.0)],
)
def test_xor(s, z, score):
    check(map_xor(s), z, score)


@pytest.mark.parametrize(
    "s,z,score",
    [([0.3, 0.9], [0, 1], 0.9), ([-0.5, -0.2, -0.9], [0, 0, 0], 0.0), ([0.0, 0.0], [0, 0], 0.0)],
)
def test_at_most_one(s, z, score):
    check(map_at_most_one(s), z, score)


@pytest.mark.parametrize(
    "s,B,z,score",
    [([3, 1, -1, 2], 2, [1, 0, 0, 1], 5.0), ([-1, -2], 2, [0, 0], 0.0), ([0.5], 0, [0], 0.0), ([1, 2, 2], 1, [0, 1, 0], 2.0)],
)
def test_budget(s, B, z, score):
    check(map_budget(s, B), z, score)


@pytest.mark.parametrize(
    "s,r,z,score",
    [([0.5, -0.3], 0.4, [1, 1], 0.6), ([-1, -1], 0.0, [0, 0], 0.0), ([1.0, -0.2], -0.5, [1, 0], 1.0)],
)
def test_pair(s, r, z, score):
    check(map_pair(s, r), z, score)


def test_pair_ties_prefer_fewer_then_lexicographic():
    check(map_pair([1.0, 1.0], -1.0), [0, 1], 1.0)
    check(map_pair([0.0, 0.0], 0.0), [0, 0], 0.0)


def test_seq_budget_examples():
    check(map_seq_budget([1, 1, -5, 1], [0.5, 0.5, 0.5], 2), [1, 1, 0, 0], 2.5)
    check(map_seq_budget([3, -1, 2], [0.1, 0.1], 0), [0, 0, 0], 0.0)
    check(map_seq_budget([1, 1, 1], [0, 0], 3), [1, 1, 1], 3.0)


def test_seq_budget_prefers_zero_on_ties():
    check(map_seq_budget([0.0, 0.0], [0.0], 2), [0, 0], 0.0)


@pytest.mark.parametrize("fn", [map_xor, map_at_most_one])
def test_empty_input_rejected(fn):
    with pytest.raises(ValueError):
        fn([])


def test_invalid_arguments():
    with pytest.raises(ValueError):
        map_budget([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        map_pair([1.0], 0.0)
    with pytest.raises(ValueError):
        map_seq_budget([1.0, 2.0], [0.1, 0.2], 1)
    with pytest.raises(ValueError):
        map_seq_budget([1.0, 2.0], [0.1], 3)
    with pytest.raises(ValueError):
        map_xor([1.0, np.nan])


def test_brute_force_examples():
    g = build_highlight_graph(4, 50, 0.5)
    s = [1, 1, -5, 1]
    assert map_global_brute_force(g, s).assignment.tolist() == map_seq_budget(s, [0.5] * 3, 2).assignment.tolist()
    res = map_global_brute_force(build_matching_graph(2, 2), [5, 0, 0, 5])
    check(res, [1, 0, 0, 1], 10.0)
    res = map_global_brute_force(build_matching_graph(2, 3, "AtMostOne2"), np.zeros(6))
    check(res, [0] * 6, 0.0)


def test_brute_force_limits():
    g = FactorGraph(23, (Factor("Budget", tuple(range(23)), 2),))
    with pytest.raises(ValueError, match="limited"):
        map_global_brute_force(g, np.zeros(23))


def test_global_score_infeasible_is_minus_inf():
    g = build_matching_graph(2, 2)
    assert global_score(g, np.ones(4), [1, 1, 0, 0]) == -np.inf
    assert global_score(g, np.arange(4.0), [1, 0, 0, 1]) == 3.0


@st.composite
def factor_and_scores(draw, values=st.floats(-2, 2)):
    kind = draw(st.sampled_from(["XOR", "AtMostOne", "Budget", "Pair", "SeqBudget"]))
    if kind == "Pair":
        s = draw(st.lists(values, min_size=2, max_size=2))
        return Factor("Pair", (0, 1), None, (draw(values),)), s
    s = draw(st.lists(values, min_size=1, max_size=10))
    L = len(s)
    if kind == "Budget":
        return Factor(kind, tuple(range(L)), draw(st.integers(1, min(5, L)))), s
    if kind == "SeqBudget":
        edges = draw(st.lists(values, min_size=L - 1, max_size=L - 1))
        return Factor(kind, tuple(range(L)), draw(st.integers(0, min(5, L))), tuple(edges)), s
    return Factor(kind, tuple(range(L))), s


@settings(max_examples=300, deadline=None)
@given(factor_and_scores())
def test_oracle_matches_enumeration(fs):
    f, s = fs
    res = map_factor(f, s)
    _, best = oracles.brute_map(f.kind, s, f.budget, f.edge_scores)
    assert abs(res.score - best) <= 1e-9
    assert oracles.feasible(f.kind, res.assignment, f.budget)
    recomputed = float(np.dot(s, res.assignment)) + oracles.extra(f.kind, res.assignment, f.edge_scores)
    assert abs(res.score - recomputed) <= 1e-12


grid = st.integers(-8, 8).map(lambda k: k / 4)


@settings(max_examples=200, deadline=None)
@given(factor_and_scores(grid))
def test_brute_force_tie_break_is_lexicographic(fs):
    # quarter-grid scores add up exactly, so ties are real ties
    f, s = fs
    res = map_global_brute_force(FactorGraph(f.size, (f,)), s)
    z, best = oracles.brute_map(f.kind, s, f.budget, f.edge_scores)
    assert res.score == best
    assert res.assignment.tolist() == z.tolist()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=12), st.data())
def test_seq_budget_respects_budget(s, data):
    L = len(s)
    B = data.draw(st.integers(0, L))
    r = data.draw(st.lists(st.floats(0, 2), min_size=L - 1, max_size=L - 1))
    assert map_seq_budget(s, r, B).assignment.sum() <= B


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=10, unique=True), st.randoms(use_true_random=False), st.data())
def test_permutation_consistency(s, rnd, data):
    s = np.array(s)
    perm = list(range(s.size))
    rnd.shuffle(perm)
    B = data.draw(st.integers(1, s.size))
    for fn in (map_xor, map_at_most_one, lambda v: map_budget(v, B)):
        base, permuted = fn(s).assignment, fn(s[perm]).assignment
        assert permuted.tolist() == base[perm].tolist()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=10), st.floats(-5, 5))
def test_xor_shift_invariance(s, c):
    s = np.array(s)
    # round so that the shift cannot create new floating-point ties
    s = np.round(s, 3)
    assert map_xor(s + np.round(c, 3)).assignment.tolist() == map_xor(s).assignment.tolist()


def test_pair_chain_with_budget_matches_seq_budget():
    # the chain of Pair factors plus one Budget factor encodes the same scores as a single SeqBudget factor
    from sparse_rationales.graph import FactorGraph
    from sparse_rationales.map_oracles import map_factor, map_global_brute_force
    from sparse_rationales.sampling import gibbs_enumerate

    rng = np.random.default_rng(0)
    for _ in range(50):
        L = int(rng.integers(2, 9))
        B = int(rng.integers(1, min(L, 4) + 1))
        r = rng.uniform(0, 1, L - 1)
        s = rng.uniform(-2, 2, L)
        seq = Factor("SeqBudget", tuple(range(L)), B, tuple(r))
        pairs = [Factor("Pair", (i, i + 1), None, (r[i],)) for i in range(L - 1)]
        chain = FactorGraph(L, tuple(pairs) + (Factor("Budget", tuple(range(L)), B),))
        assert map_global_brute_force(chain, s).score == pytest.approx(map_factor(seq, s).score, abs=1e-12)
        a, b = gibbs_enumerate(chain, s), gibbs_enumerate(FactorGraph(L, (seq,)), s)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        np.testing.assert_allclose(a.scores, b.scores, atol=1e-12)
