import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sparse_rationales.graph import Factor, FactorGraph, build_highlight_graph, build_matching_graph
from sparse_rationales.lp_sparsemap import SolverConfig, lp_sparsemap_solve, lp_sparsemap_vjp, project_capped_simplex
from sparse_rationales.sparsemap import sparsemap_solve, sparsemap_vjp

INFER = SolverConfig(temperature=1e-3, max_iters=1000, tol=1e-3)
EXACT = SolverConfig(temperature=0.1, rho=0.3, tol=1e-12, max_iters=20000, unroll=20000)


def test_dominant_diagonal():
    state = lp_sparsemap_solve(build_matching_graph(2, 2), [5, 0, 0, 5], 1e-3, 1000, 1e-3)
    assert state.converged
    np.testing.assert_allclose(state.u, [1, 0, 0, 1], atol=1e-9)


def test_highlight_reduction_is_bitwise():
    rng = np.random.default_rng(0)
    g = build_highlight_graph(12, 25, 0.2)
    for T in (1e-3, 0.1, 1.0):
        s = rng.normal(size=12)
        state = lp_sparsemap_solve(g, s, temperature=T)
        assert np.array_equal(state.u, sparsemap_solve(g.factors[0], s, T).z)


def test_6x8_rows_and_columns():
    rng = np.random.default_rng(1)
    g = build_matching_graph(6, 8)
    for _ in range(10):
        state = lp_sparsemap_solve(g, rng.uniform(-2, 2, 48), config=INFER)
        Z = state.u.reshape(6, 8)
        assert state.converged
        assert np.all(np.abs(Z.sum(axis=1) - 1) <= 1e-3)
        assert np.all(Z.sum(axis=0) <= 1 + 1e-3)
        assert np.all((state.u >= 0) & (state.u <= 1))


def test_budget_mass():
    rng = np.random.default_rng(2)
    g = build_matching_graph(6, 8, ("Budget", 4))
    for _ in range(10):
        state = lp_sparsemap_solve(g, rng.uniform(-1, 3, 48), config=INFER)
        assert state.u.sum() <= 4 + 1e-3


def test_keywords_override_config():
    state = lp_sparsemap_solve(build_matching_graph(2, 3, "AtMostOne2"), np.zeros(6), config=INFER, max_iters=1)
    assert state.config.max_iters == 1 and state.config.temperature == 1e-3
    assert state.iterations == 1


def test_non_convergence_is_flagged():
    state = lp_sparsemap_solve(build_matching_graph(3, 3), np.random.default_rng(0).normal(size=9), max_iters=2)
    assert not state.converged and state.iterations == 2
    assert state.approximate_gradient


def test_combined_residual_is_monotone():
    rng = np.random.default_rng(3)
    for variant in ("XorAtMostOne", "AtMostOne2", ("Budget", 3)):
        state = lp_sparsemap_solve(build_matching_graph(4, 5, variant), rng.uniform(-2, 2, 20), config=INFER)
        h = np.array(state.combined_residual_history)
        assert np.all(np.diff(h) <= 1e-12 * h[:-1] + 1e-15)


def test_input_validation():
    g = build_matching_graph(2, 2)
    with pytest.raises(ValueError):
        lp_sparsemap_solve(g, np.zeros(3))
    with pytest.raises(ValueError):
        lp_sparsemap_solve(g, [0, 0, np.nan, 0])
    with pytest.raises(ValueError):
        lp_sparsemap_solve(g, np.zeros(4), temperature=-1)


def test_config_round_trip_and_validation():
    cfg = SolverConfig.train()
    assert (cfg.temperature, cfg.max_iters) == (0.1, 10)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        SolverConfig.from_dict({"temprature": 1.0})
    for bad in (dict(rho=0), dict(max_iters=0), dict(tol=-1), dict(unroll=0), dict(local_solver="cg")):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_vjp_zero_upstream():
    state = lp_sparsemap_solve(build_matching_graph(3, 3, "AtMostOne2"), np.ones(9) * 0.1, config=EXACT)
    assert not np.any(lp_sparsemap_vjp(state, np.zeros(9)))


def test_vjp_single_factor_reduction():
    rng = np.random.default_rng(4)
    g = build_highlight_graph(8, 50, 0.1)
    s = rng.normal(size=8)
    state = lp_sparsemap_solve(g, s, temperature=0.5)
    u = rng.normal(size=8)
    expected = sparsemap_vjp(sparsemap_solve(g.factors[0], s, 0.5), u)
    np.testing.assert_allclose(lp_sparsemap_vjp(state, u), expected, atol=1e-10, rtol=0)


def test_vjp_3x3_at_most_one2_finite_differences():
    rng = np.random.default_rng(5)
    g = build_matching_graph(3, 3, "AtMostOne2")
    checked = 0
    while checked < 3:
        s, up = rng.normal(scale=0.3, size=9), rng.normal(size=9)
        state = lp_sparsemap_solve(g, s, config=EXACT)
        pattern = state.u > 1e-6
        f = lambda v: lp_sparsemap_solve(g, v, config=EXACT, unroll=1).u
        perturbed = [f(s + sign * 1e-5 * e) for e in np.eye(9) for sign in (1, -1)]
        if not all(np.array_equal(p > 1e-6, pattern) for p in perturbed):
            continue
        fd = oracles.central_jacobian_vjp(f, s, up)
        analytic = lp_sparsemap_vjp(state, up)
        assert np.linalg.norm(analytic - fd) <= 1e-3 * max(np.linalg.norm(fd), 1e-6)
        checked += 1


def test_truncated_unroll_flags_approximation():
    g = build_matching_graph(3, 3, "AtMostOne2")
    state = lp_sparsemap_solve(g, np.random.default_rng(6).normal(scale=0.3, size=9), config=EXACT, unroll=10)
    assert state.converged and state.iterations > 10
    assert state.approximate_gradient


def test_local_solver_paths_agree():
    rng = np.random.default_rng(7)
    for variant in ("XorAtMostOne", "AtMostOne2", ("Budget", 2)):
        g = build_matching_graph(3, 4, variant)
        s = rng.normal(size=12)
        fast = lp_sparsemap_solve(g, s, temperature=0.1, tol=1e-10, max_iters=5000)
        slow = lp_sparsemap_solve(g, s, temperature=0.1, tol=1e-10, max_iters=5000, config={"local_solver": "active_set"})
        np.testing.assert_allclose(fast.u, slow.u, atol=1e-7)


def test_mixed_factor_graph():
    # a chain expressed with Pair factors plus a Budget factor: LP-SparseMAP must stay feasible
    factors = [Factor("Pair", (i, i + 1), None, (0.5,)) for i in range(4)] + [Factor("Budget", tuple(range(5)), 2)]
    g = FactorGraph(5, tuple(factors))
    state = lp_sparsemap_solve(g, np.array([1.0, 0.8, -1.0, 0.5, 0.2]), temperature=0.1, tol=1e-8, max_iters=5000)
    assert state.converged
    assert state.u.sum() <= 2 + 1e-6


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=1, max_size=10),
    st.integers(1, 10),
    st.booleans(),
)
def test_capped_simplex_projection(v, total, equality):
    v = np.array(v)
    total = min(total, v.size)
    z, _ = project_capped_simplex(v, float(total), equality)
    assert np.all(z >= 0) and np.all(z <= 1)
    if equality:
        assert abs(z.sum() - total) <= 1e-9
    else:
        assert z.sum() <= total + 1e-9
    # projection optimality: no feasible move along a pair of coordinates decreases the distance
    grad = z - v
    free = (z > 1e-12) & (z < 1 - 1e-12)
    if free.sum() >= 2:
        assert np.ptp(grad[free]) <= 1e-8
