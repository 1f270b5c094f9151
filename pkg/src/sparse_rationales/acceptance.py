"""Acceptance suites with independent oracles.

Each ``criterion_*`` function runs one suite and returns a
:class:`CriterionResult`; :func:`run_all` runs them in order. The same code
backs ``sparse-rationales selfcheck`` and the acceptance tests. Instance counts
can be scaled down for quick runs; the defaults are the full suites.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .graph import (
    AT_MOST_ONE,
    BUDGET,
    FACTOR_KINDS,
    PAIR,
    SEQ_BUDGET,
    XOR,
    Factor,
    FactorGraph,
    build_highlight_graph,
    build_matching_graph,
)
from .lp_sparsemap import SolverConfig, lp_sparsemap_solve, lp_sparsemap_vjp
from .map_oracles import enumerate_assignments, factor_scores_batch, map_factor, map_global_brute_force
from .sampling import gibbs_enumerate, perturb_and_map_sample
from .sparsemap import sparsemap_solve, sparsemap_vjp

FD_STEP = 1e-5


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    time_limit: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number}. {self.name}: {self.detail} ({self.seconds:.1f}s, limit {self.time_limit:.0f}s)"


def _finish(number, name, ok, detail, start, limit) -> CriterionResult:
    seconds = time.perf_counter() - start
    return CriterionResult(number, name, bool(ok) and seconds < limit, detail, seconds, limit)


# -- instance generators ------------------------------------------------------


def random_factor(rng: np.random.Generator, kind: str, max_len: int = 12, max_budget: int = 5) -> Factor:
    """Factor of ``kind`` over ``0..L-1``; edge scores uniform in [-2, 2]."""
    if kind == PAIR:
        return Factor(PAIR, (0, 1), None, (float(rng.uniform(-2, 2)),))
    L = int(rng.integers(1, max_len + 1))
    members = tuple(range(L))
    if kind == BUDGET:
        return Factor(BUDGET, members, int(rng.integers(1, min(max_budget, L) + 1)))
    if kind == SEQ_BUDGET:
        B = int(rng.integers(0, min(max_budget, L) + 1))
        return Factor(SEQ_BUDGET, members, B, tuple(rng.uniform(-2, 2, L - 1)))
    return Factor(kind, members)


def single_factor_graph(factor: Factor) -> FactorGraph:
    return FactorGraph(factor.size, (factor,))


# -- independent oracles ------------------------------------------------------


def sparsemax(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex by the sorting threshold rule."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    support = u - (css - 1) / k > 0
    rho = k[support][-1]
    tau = (css[rho - 1] - 1) / rho
    return np.maximum(v - tau, 0.0)


def _direct_log_weight(graph: FactorGraph, s: np.ndarray, z: tuple[int, ...]) -> float | None:
    """Score of one assignment from the factor definitions, or None if forbidden."""
    total = sum(si * zi for si, zi in zip(s, z))
    for f in graph.factors:
        zf = [z[m] for m in f.members]
        n_on = sum(zf)
        if f.kind == XOR and n_on != 1:
            return None
        if f.kind == AT_MOST_ONE and n_on > 1:
            return None
        if f.kind in (BUDGET, SEQ_BUDGET) and n_on > f.budget:
            return None
        if f.kind == PAIR:
            total += f.edge_scores[0] * zf[0] * zf[1]
        if f.kind == SEQ_BUDGET:
            total += sum(r * a * b for r, a, b in zip(f.edge_scores, zf[:-1], zf[1:]))
    return total


def direct_gibbs(graph: FactorGraph, s) -> tuple[dict[tuple[int, ...], float], float]:
    """Gibbs probabilities and log-partition by explicit summation over ``itertools.product``."""
    weights = {}
    for z in itertools.product((0, 1), repeat=graph.num_variables):
        w = _direct_log_weight(graph, s, z)
        if w is not None:
            weights[z] = math.exp(w)
    total = math.fsum(weights.values())
    return {z: w / total for z, w in weights.items()}, math.log(total)


def _feasible(graph: FactorGraph, z: np.ndarray) -> bool:
    return _direct_log_weight(graph, np.zeros(graph.num_variables), tuple(int(b) for b in z)) is not None


def _top_two(factor: Factor, s: np.ndarray) -> tuple[np.ndarray, float]:
    """MAP indicator and the gap to the runner-up score, by enumeration."""
    Z = enumerate_assignments(factor.size)
    values = Z @ s + factor_scores_batch(factor, Z)
    order = np.argsort(-values, kind="stable")
    gap = values[order[0]] - values[order[1]] if len(order) > 1 and np.isfinite(values[order[1]]) else np.inf
    return Z[order[0]], float(gap)


def _rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor))


# -- criteria -----------------------------------------------------------------


def criterion_oracles(n: int = 1000, seed: int = 0) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, infeasible = 0.0, 0
    for kind in FACTOR_KINDS:
        for _ in range(n):
            f = random_factor(rng, kind)
            s = rng.uniform(-2, 2, f.size)
            res = map_factor(f, s)
            ref = map_global_brute_force(single_factor_graph(f), s)
            worst = max(worst, abs(res.score - ref.score))
            infeasible += not _feasible(single_factor_graph(f), res.assignment)
    ok = worst <= 1e-9 and infeasible == 0
    detail = f"{n} instances x {len(FACTOR_KINDS)} kinds, max |score - brute force| = {worst:.1e}, infeasible = {infeasible}"
    return _finish(1, "oracle equivalence", ok, detail, start, 30)


def criterion_sparsemax(n: int = 1000, seed: int = 1) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        L = int(rng.integers(1, 13))
        s = rng.normal(scale=1.5, size=L)
        z = sparsemap_solve(Factor(XOR, tuple(range(L))), s, temperature=1.0).z
        worst = max(worst, float(np.max(np.abs(z - sparsemax(s)))))
    return _finish(2, "sparsemax equivalence", worst <= 1e-6, f"{n} vectors, max-abs = {worst:.1e}", start, 5)


def _same_support(a, b) -> bool:
    return {v.tobytes() for v in a.vertices} == {v.tobytes() for v in b.vertices}


def sparsemap_gradient_error(factor: Factor, s: np.ndarray, g: np.ndarray, temperature: float = 1.0):
    """Relative error of the VJP against central differences, or None when the active set moves."""
    sol = sparsemap_solve(factor, s, temperature)
    analytic = sparsemap_vjp(sol, g)
    fd = np.zeros(s.size)
    for i in range(s.size):
        e = np.zeros(s.size)
        e[i] = FD_STEP
        plus, minus = sparsemap_solve(factor, s + e, temperature), sparsemap_solve(factor, s - e, temperature)
        if not (_same_support(sol, plus) and _same_support(sol, minus)):
            return None
        fd[i] = g @ (plus.z - minus.z) / (2 * FD_STEP)
    return _rel_err(analytic, fd), sol.support_size


def lp_gradient_error(graph: FactorGraph, s: np.ndarray, g: np.ndarray, config: SolverConfig):
    """Same check for LP-SparseMAP with a fully unrolled backward pass."""
    state = lp_sparsemap_solve(graph, s, config=config)
    if not state.converged:
        return None
    analytic = lp_sparsemap_vjp(state, g)
    pattern = state.u > 1e-6
    fd = np.zeros(s.size)
    for i in range(s.size):
        e = np.zeros(s.size)
        e[i] = FD_STEP
        # forward-only solves need no backward tape
        plus = lp_sparsemap_solve(graph, s + e, config=config, unroll=1)
        minus = lp_sparsemap_solve(graph, s - e, config=config, unroll=1)
        if not (plus.converged and minus.converged):
            return None
        if not (np.array_equal(plus.u > 1e-6, pattern) and np.array_equal(minus.u > 1e-6, pattern)):
            return None
        fd[i] = g @ (plus.u - minus.u) / (2 * FD_STEP)
    return _rel_err(analytic, fd)


# full unroll and a tight tolerance: the backward pass is exact only at convergence;
# a smaller penalty converges faster at T = 0.1
GRADIENT_CHECK_CONFIG = SolverConfig(temperature=0.1, rho=0.3, tol=1e-12, max_iters=20000, unroll=20000)


def criterion_gradients(n_single: int = 100, n_multi: int = 50, seed: int = 2) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    single, skipped = [], 0
    kinds = itertools.cycle(FACTOR_KINDS)
    while len(single) < n_single:
        f = random_factor(rng, next(kinds), max_len=8)
        s = rng.uniform(-2, 2, f.size)
        out = sparsemap_gradient_error(f, s, rng.normal(size=f.size))
        if out is None or out[1] < 2:
            # moving active set, or a single vertex whose derivative is identically 0
            skipped += 1
            continue
        single.append(out[0])
    multi, skipped_multi = [], 0
    variants = itertools.cycle(["XorAtMostOne", "AtMostOne2", ("Budget", 2)])
    while len(multi) < n_multi:
        variant = next(variants)
        lh = int(rng.integers(2, 5))
        lp = int(rng.integers(2, lh + 1)) if variant == "XorAtMostOne" else int(rng.integers(2, 5))
        graph = build_matching_graph(lp, lh, variant)
        s = rng.normal(scale=0.3, size=lp * lh)
        err = lp_gradient_error(graph, s, rng.normal(size=lp * lh), GRADIENT_CHECK_CONFIG)
        if err is None:
            skipped_multi += 1
            continue
        multi.append(err)
    ok = max(single) <= 1e-4 and max(multi) <= 1e-3
    detail = (
        f"SparseMAP max rel err {max(single):.1e} on {n_single} instances ({skipped} unstable skipped); "
        f"LP-SparseMAP max rel err {max(multi):.1e} on {n_multi} matchings ({skipped_multi} skipped)"
    )
    return _finish(3, "gradient fidelity", ok, detail, start, 120)


def matching_violation(graph: FactorGraph, u: np.ndarray) -> float:
    """Largest violation of the XOR / AtMostOne / Budget constraints by a relaxed solution."""
    worst = 0.0
    for f in graph.factors:
        total = float(u[list(f.members)].sum())
        if f.kind == XOR:
            worst = max(worst, abs(total - 1.0))
        elif f.kind == AT_MOST_ONE:
            worst = max(worst, total - 1.0)
        elif f.kind == BUDGET:
            worst = max(worst, total - f.budget)
    return worst


def criterion_feasibility(n: int = 200, seed: int = 3) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    config = SolverConfig(temperature=1e-3, max_iters=1000, tol=1e-3)
    worst, unconverged = 0.0, 0
    graphs = [build_matching_graph(6, 8, v) for v in ("XorAtMostOne", "AtMostOne2", ("Budget", 4))]
    for k in range(n):
        graph = graphs[k % len(graphs)]
        state = lp_sparsemap_solve(graph, rng.uniform(-2, 2, 48), config=config)
        unconverged += not state.converged
        worst = max(worst, matching_violation(graph, state.u))
    ok = worst <= 1e-3
    detail = f"{n} 6x8 instances over 3 variants, max violation {worst:.1e}, unconverged {unconverged}"
    return _finish(4, "constraint feasibility", ok, detail, start, 120)


def criterion_annealing(n: int = 200, seed: int = 4) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    config = SolverConfig(temperature=1e-3, max_iters=1000, tol=1e-3)
    worst, rejected, done = 0.0, 0, 0
    kinds = itertools.cycle(FACTOR_KINDS)
    while done < n:
        f = random_factor(rng, next(kinds), max_len=10)
        s = rng.uniform(-2, 2, f.size)
        z_map, gap = _top_two(f, s)
        if gap < 0.1:
            rejected += 1
            continue
        u = lp_sparsemap_solve(single_factor_graph(f), s, config=config).u
        worst = max(worst, float(np.max(np.abs(u - z_map))))
        done += 1
    detail = f"{n} instances with MAP gap >= 0.1 ({rejected} rejected), max |z - MAP| = {worst:.1e}"
    return _finish(5, "annealing to MAP", worst <= 1e-2, detail, start, 60)


def criterion_gibbs(n: int = 50, n_samples: int = 50, seed: int = 5) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_p = worst_logz = 0.0
    hand = gibbs_enumerate(single_factor_graph(Factor(BUDGET, (0, 1), 2)), [math.log(2), 0.0])
    # rows come out ordered 00, 01, 10, 11 and the weights are 1, 1, 2, 2
    hand_err = float(np.max(np.abs(hand.probabilities - [1 / 6, 1 / 6, 1 / 3, 1 / 3])))
    graphs = []
    for k in range(n):
        choice = k % 4
        if choice == 0:
            graphs.append(build_highlight_graph(int(rng.integers(1, 11)), float(rng.uniform(10, 100)), 0.5))
        elif choice == 1:
            lh = int(rng.integers(1, 4))
            graphs.append(build_matching_graph(int(rng.integers(1, lh + 1)), lh, "XorAtMostOne"))
        elif choice == 2:
            graphs.append(build_matching_graph(2, int(rng.integers(1, 4)), ("Budget", 2)))
        else:
            graphs.append(single_factor_graph(random_factor(rng, FACTOR_KINDS[k % 5], max_len=10)))
    infeasible = mismatched = 0
    for graph in graphs:
        s = rng.uniform(-2, 2, graph.num_variables)
        table = gibbs_enumerate(graph, s)
        ref, direct_logz = direct_gibbs(graph, s)
        if len(ref) != len(table.probabilities):
            worst_p = np.inf
        for z, p in zip(table.assignments, table.probabilities):
            worst_p = max(worst_p, abs(p - ref.get(tuple(int(b) for b in z), np.inf)))
        worst_logz = max(worst_logz, abs(table.log_partition - direct_logz))
        seed_k = int(rng.integers(2**63))
        first = perturb_and_map_sample(graph, s, seed_k, n_samples)
        again = perturb_and_map_sample(graph, s, seed_k, n_samples)
        mismatched += not all(np.array_equal(a, b) for a, b in zip(first, again))
        infeasible += sum(not _feasible(graph, z) for z in first)
    ok = max(worst_p, hand_err) <= 1e-9 and worst_logz <= 1e-9 and infeasible == 0 and mismatched == 0
    detail = (
        f"{n} graphs (L <= 10): max |p - direct| = {max(worst_p, hand_err):.1e}, |log Z diff| = {worst_logz:.1e}; "
        f"{n * n_samples} perturb-and-MAP samples, infeasible {infeasible}, non-reproducible {mismatched}"
    )
    return _finish(6, "Gibbs correctness", ok, detail, start, 60)


def _highlight_run(seed: int, n_train: int, n_test: int, epochs: int):
    from .metrics import corpus_token_f1
    from .rationalizers.highlights import extract_highlight
    from .rationalizers.model import highlight_embeddings, init_model, make_highlight_data
    from .rationalizers.training import train_toy

    t0 = time.perf_counter()
    train = make_highlight_data(n_train, vocab_size=50, length=20, budget_pct=20.0, seed=seed)
    test = make_highlight_data(n_test, vocab_size=50, length=20, budget_pct=20.0, seed=10_000 + seed)
    model = init_model("highlight", 50, 16, seed, embeddings=highlight_embeddings(50, 16, seed))
    model, losses = train_toy(model, train, epochs)
    f1 = corpus_token_f1([extract_highlight(model, ex.tokens)[0] for ex in test], [ex.rationale for ex in test]).token_f1
    return f1, losses, time.perf_counter() - t0


def faithfulness_trials(n: int = 100, seed: int = 6) -> int:
    """Number of trials where a premise token with a zeroed alignment row still changed the output."""
    from .rationalizers.matchings import extract_matching, predict_matching
    from .rationalizers.model import init_model

    rng = np.random.default_rng(seed)
    failures = 0
    for trial in range(n):
        model = init_model("matching", 50, 16, trial, {"faithful": True})
        lh = int(rng.integers(2, 7))
        lp = int(rng.integers(2, lh + 1))
        premise, hypothesis = rng.integers(50, size=lp), rng.integers(50, size=lh)
        Z, _ = extract_matching(model, premise, hypothesis)
        i = int(rng.integers(lp))
        Z[i] = 0.0
        swapped = premise.copy()
        swapped[i] = (premise[i] + 1 + rng.integers(49)) % 50
        before = predict_matching(model, premise, hypothesis, Z, faithful=True)
        after = predict_matching(model, swapped, hypothesis, Z, faithful=True)
        failures += not np.array_equal(before, after)
    return failures


def criterion_toy(seeds=(0, 1, 2), n_train: int = 2000, n_test: int = 500, epochs: int = 4, trials: int = 100):
    start = time.perf_counter()
    runs = [_highlight_run(s, n_train, n_test, epochs) for s in seeds]
    f1s = [r[0] for r in runs]
    decreasing = all(all(b < a for a, b in zip(l, l[1:])) and l[-1] < l[0] for _, l, _ in runs)
    slowest = max(r[2] for r in runs)
    failures = faithfulness_trials(trials)
    ok = np.mean(f1s) >= 0.8 and decreasing and slowest < 300 and failures == 0
    detail = (
        f"highlight F1 per seed {[round(f, 3) for f in f1s]} (mean {np.mean(f1s):.3f}), "
        f"epoch losses decreasing: {decreasing}, slowest seed {slowest:.0f}s; "
        f"faithful invariance failures {failures}/{trials}"
    )
    return _finish(7, "end-to-end toy rationalization", ok, detail, start, 300 * len(seeds) + 60)


def criterion_reduction(n: int = 100, seed: int = 8) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    mismatches = vjp_worst = 0.0
    kinds = itertools.cycle(FACTOR_KINDS)
    for k in range(n):
        if k % 2 == 0:
            L = int(rng.integers(1, 16))
            graph = build_highlight_graph(L, float(rng.uniform(5, 100)), float(rng.uniform(0, 1)))
        else:
            graph = single_factor_graph(random_factor(rng, next(kinds)))
        T = float(rng.choice([1e-3, 0.05, 0.1, 1.0]))
        s = rng.uniform(-2, 2, graph.num_variables)
        state = lp_sparsemap_solve(graph, s, temperature=T)
        sol = sparsemap_solve(graph.factors[0], s, temperature=T)
        mismatches += not np.array_equal(state.u, sol.z)
        g = rng.normal(size=s.size)
        vjp_worst = max(vjp_worst, float(np.max(np.abs(lp_sparsemap_vjp(state, g) - sparsemap_vjp(sol, g)))))
    ok = mismatches == 0 and vjp_worst <= 1e-10
    detail = f"{n} single-factor graphs, bitwise mismatches {int(mismatches)}, max vjp diff {vjp_worst:.1e}"
    return _finish(8, "single-factor reduction", ok, detail, start, 10)


def run_all(quick: bool = False, training: bool = True) -> list[CriterionResult]:
    """Run every suite; ``quick`` shrinks instance counts about tenfold for smoke runs."""
    if quick:
        results = [
            criterion_oracles(100),
            criterion_sparsemax(100),
            criterion_gradients(10, 5),
            criterion_feasibility(21),
            criterion_annealing(20),
            criterion_gibbs(10, 20),
        ]
        if training:
            results.append(criterion_toy(seeds=(0,), n_train=500, n_test=100, epochs=3, trials=10))
        results.append(criterion_reduction(10))
        return results
    results = [
        criterion_oracles(),
        criterion_sparsemax(),
        criterion_gradients(),
        criterion_feasibility(),
        criterion_annealing(),
        criterion_gibbs(),
    ]
    if training:
        results.append(criterion_toy())
    results.append(criterion_reduction())
    return results
