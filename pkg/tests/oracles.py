"""Reference implementations used only by the tests.

They are deliberately naive (pure enumeration, bisection, subset search) and
share no code with the package's solvers.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def feasible(kind: str, z, budget=None) -> bool:
    n = sum(z)
    if kind == "XOR":
        return n == 1
    if kind == "AtMostOne":
        return n <= 1
    if kind in ("Budget", "SeqBudget"):
        return n <= budget
    return True


def extra(kind: str, z, edges) -> float:
    if kind == "Pair":
        return edges[0] * z[0] * z[1]
    if kind == "SeqBudget":
        return sum(r * a * b for r, a, b in zip(edges, z[:-1], z[1:]))
    return 0.0


def vertices(kind: str, L: int, budget=None, edges=()):
    """Feasible configurations in lexicographic order with their extra scores."""
    out = []
    for z in itertools.product((0, 1), repeat=L):
        if feasible(kind, z, budget):
            out.append((np.array(z, dtype=float), extra(kind, z, edges)))
    return out


def brute_map(kind: str, s, budget=None, edges=()):
    """Best score by enumeration (first maximiser in lexicographic order)."""
    best, best_z = -math.inf, None
    for z, h in vertices(kind, len(s), budget, edges):
        value = float(np.dot(s, z)) + h
        if value > best:
            best, best_z = value, z
    return best_z, best


def sparsemax_bisect(v, iters: int = 200) -> np.ndarray:
    """Simplex projection by bisection on the threshold."""
    v = np.asarray(v, dtype=float)
    lo, hi = v.max() - 1.0, v.max()
    for _ in range(iters):
        tau = 0.5 * (lo + hi)
        if np.maximum(v - tau, 0).sum() > 1:
            lo = tau
        else:
            hi = tau
    return np.maximum(v - 0.5 * (lo + hi), 0)


def qp_over_hull(V: np.ndarray, lin: np.ndarray):
    """max_{alpha in simplex} alpha . lin - 1/2 ||V^T alpha||^2 by searching all supports.

    Returns the optimal ``z = V^T alpha``. Exponential in the number of
    vertices: only for a dozen or so.
    """
    k = V.shape[0]
    best_val, best_z = -math.inf, None
    for size in range(1, min(k, V.shape[1] + 1) + 1):
        for subset in itertools.combinations(range(k), size):
            M = V[list(subset)]
            K = np.zeros((size + 1, size + 1))
            K[:size, :size] = M @ M.T
            K[:size, size] = 1
            K[size, :size] = 1
            rhs = np.append(lin[list(subset)], 1.0)
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            alpha = sol[:size]
            if np.any(alpha < -1e-12):
                continue
            z = alpha @ M
            val = float(alpha @ lin[list(subset)] - 0.5 * z @ z)
            if val > best_val + 1e-12:
                best_val, best_z = val, z
    return best_z, best_val


def central_jacobian_vjp(f, s, g, h: float = 1e-5) -> np.ndarray:
    """``(df/ds)^T g`` by central differences."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.size)
    for i in range(s.size):
        e = np.zeros(s.size)
        e[i] = h
        out[i] = g @ (f(s + e) - f(s - e)) / (2 * h)
    return out


def graph_feasible(graph, z) -> bool:
    z = np.asarray(z)
    return all(feasible(f.kind, z[list(f.members)], f.budget) for f in graph.factors)


def graph_vertices(graph):
    """Feasible assignments of a whole factor graph with their summed extra scores."""
    out = []
    for z in itertools.product((0, 1), repeat=graph.num_variables):
        z = np.array(z, dtype=float)
        if graph_feasible(graph, z):
            h = sum(extra(f.kind, z[list(f.members)], f.edge_scores) for f in graph.factors)
            out.append((z, h))
    return out
