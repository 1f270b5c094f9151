"""Exact MAP oracles for each factor kind and a brute-force global oracle.

Every oracle maximises ``s_f . z_f + h_f(z_f)`` over the binary
configurations allowed by the factor, with fixed tie-breaking so results are
reproducible:

* XOR / AtMostOne / Budget: lowest index wins among equal scores, and only
  strictly positive scores are switched on where switching on is optional.
* Pair: fewer selected variables first, then lexicographic order.
* SeqBudget: the Viterbi backtrace prefers ``z_i = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import AT_MOST_ONE, BUDGET, PAIR, SEQ_BUDGET, XOR, Factor, FactorGraph

BRUTE_FORCE_MAX_VARIABLES = 22


@dataclass(frozen=True)
class MapResult:
    assignment: np.ndarray
    score: float


def _as_scores(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a non-empty vector")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s


def map_xor(s) -> MapResult:
    s = _as_scores(s)
    k = int(np.argmax(s))  # first occurrence on ties
    z = np.zeros(s.size)
    z[k] = 1.0
    return MapResult(z, float(s[k]))


def map_at_most_one(s) -> MapResult:
    s = _as_scores(s)
    z = np.zeros(s.size)
    k = int(np.argmax(s))
    if s[k] > 0:
        z[k] = 1.0
        return MapResult(z, float(s[k]))
    return MapResult(z, 0.0)


def map_budget(s, budget: int) -> MapResult:
    s = _as_scores(s)
    if not 0 <= budget <= s.size:
        raise ValueError(f"budget {budget} outside [0, {s.size}]")
    order = np.argsort(-s, kind="stable")[:budget]
    chosen = order[s[order] > 0]
    z = np.zeros(s.size)
    z[chosen] = 1.0
    return MapResult(z, float(s[chosen].sum()))


_PAIR_CONFIGS = ((0, 0), (0, 1), (1, 0), (1, 1))


def map_pair(s, r: float) -> MapResult:
    s = _as_scores(s)
    if s.size != 2:
        raise ValueError("a pair factor takes exactly two scores")
    best, best_score = None, -np.inf
    for z1, z2 in _PAIR_CONFIGS:
        value = s[0] * z1 + s[1] * z2 + r * z1 * z2
        if value > best_score:
            best, best_score = (z1, z2), value
    return MapResult(np.array(best, dtype=np.float64), float(best_score))


def map_seq_budget(s, r, budget: int) -> MapResult:
    """Budget-constrained Viterbi over a binary chain.

    States are (position, number of selected tokens so far, current bit);
    the recursion is vectorised over the budget axis, giving ``O(L B)`` work.
    """
    s = _as_scores(s)
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    L = s.size
    if r.size != L - 1:
        raise ValueError(f"expected {L - 1} edge scores, got {r.size}")
    if not 0 <= budget <= L:
        raise ValueError(f"budget {budget} outside [0, {L}]")
    B = int(budget)
    neg = -np.inf
    # off[i, b] / on[i, b]: best prefix score ending at i with bit 0 / 1, b bits used
    off = np.full((L, B + 1), neg)
    on = np.full((L, B + 1), neg)
    # back pointers: True when the predecessor bit was 1
    off_from_on = np.zeros((L, B + 1), dtype=bool)
    on_from_on = np.zeros((L, B + 1), dtype=bool)
    off[0, 0] = 0.0
    if B >= 1:
        on[0, 1] = s[0]
    for i in range(1, L):
        off_from_on[i] = on[i - 1] > off[i - 1]
        off[i] = np.where(off_from_on[i], on[i - 1], off[i - 1])
        if B >= 1:
            stay = off[i - 1, :-1]
            extend = on[i - 1, :-1] + r[i - 1]
            on_from_on[i, 1:] = extend > stay
            on[i, 1:] = s[i] + np.where(on_from_on[i, 1:], extend, stay)

    b0, b1 = int(np.argmax(off[-1])), int(np.argmax(on[-1]))
    if on[-1, b1] > off[-1, b0]:
        bit, b, score = 1, b1, on[-1, b1]
    else:
        bit, b, score = 0, b0, off[-1, b0]
    z = np.zeros(L)
    for i in range(L - 1, -1, -1):
        z[i] = bit
        if i == 0:
            break
        if bit:
            prev_bit = int(on_from_on[i, b])
            b -= 1
        else:
            prev_bit = int(off_from_on[i, b])
        bit = prev_bit
    return MapResult(z, float(score))


def factor_extra_score(factor: Factor, z_f: np.ndarray) -> float:
    """Structured part ``h_f`` of a feasible configuration (zero for logic factors)."""
    if factor.kind == PAIR:
        return factor.edge_scores[0] * z_f[0] * z_f[1]
    if factor.kind == SEQ_BUDGET:
        return float(np.dot(factor.edge_scores, z_f[:-1] * z_f[1:]))
    return 0.0


def factor_feasible(factor: Factor, z_f: np.ndarray) -> bool:
    total = z_f.sum()
    if factor.kind == XOR:
        return total == 1
    if factor.kind == AT_MOST_ONE:
        return total <= 1
    if factor.kind in (BUDGET, SEQ_BUDGET):
        return total <= factor.budget
    return True


def factor_score(factor: Factor, z_f: np.ndarray) -> float:
    """``h_f(z_f)`` including ``-inf`` for configurations the factor forbids."""
    if not factor_feasible(factor, z_f):
        return -np.inf
    return factor_extra_score(factor, z_f)


def map_factor(factor: Factor, s_f) -> MapResult:
    """Dispatch to the oracle for ``factor.kind``; ``s_f`` is indexed like ``factor.members``."""
    s_f = _as_scores(s_f)
    if s_f.size != factor.size:
        raise ValueError(f"factor has {factor.size} members but got {s_f.size} scores")
    if factor.kind == XOR:
        return map_xor(s_f)
    if factor.kind == AT_MOST_ONE:
        return map_at_most_one(s_f)
    if factor.kind == BUDGET:
        return map_budget(s_f, factor.budget)
    if factor.kind == PAIR:
        return map_pair(s_f, factor.edge_scores[0])
    return map_seq_budget(s_f, factor.edge_scores, factor.budget)


def global_score(graph: FactorGraph, s, z) -> float:
    """``s . z + sum_f h_f(z_f)``; ``-inf`` if any factor forbids ``z``."""
    z = np.asarray(z, dtype=np.float64)
    total = float(np.dot(s, z))
    for f in graph.factors:
        h = factor_score(f, z[list(f.members)])
        if h == -np.inf:
            return -np.inf
        total += h
    return total


def assignment_block(num_variables: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the lexicographic table of binary vectors (``z[0]`` most significant)."""
    n = np.arange(start, stop, dtype=np.int64)[:, None]
    shifts = np.arange(num_variables - 1, -1, -1, dtype=np.int64)
    return ((n >> shifts) & 1).astype(np.float64)


def enumerate_assignments(num_variables: int) -> np.ndarray:
    """All ``2**L`` binary vectors in lexicographic order (``0...0`` first)."""
    return assignment_block(num_variables, 0, 2**num_variables)


def factor_scores_batch(factor: Factor, Z: np.ndarray) -> np.ndarray:
    """Vectorised ``h_f`` over the rows of ``Z`` (full-length assignments)."""
    Zf = Z[:, list(factor.members)]
    total = Zf.sum(axis=1)
    out = np.zeros(Z.shape[0])
    if factor.kind == XOR:
        out[total != 1] = -np.inf
    elif factor.kind == AT_MOST_ONE:
        out[total > 1] = -np.inf
    elif factor.kind in (BUDGET, SEQ_BUDGET):
        out[total > factor.budget] = -np.inf
    if factor.kind == PAIR:
        out += factor.edge_scores[0] * Zf[:, 0] * Zf[:, 1]
    elif factor.kind == SEQ_BUDGET and factor.size > 1:
        out += (Zf[:, :-1] * Zf[:, 1:]) @ np.asarray(factor.edge_scores)
    return out


def global_scores_batch(graph: FactorGraph, s: np.ndarray, Z: np.ndarray) -> np.ndarray:
    total = Z @ s
    for f in graph.factors:
        total = total + factor_scores_batch(f, Z)
    return total


_CHUNK = 1 << 16


def map_global_brute_force(graph: FactorGraph, s) -> MapResult:
    """Exhaustive MAP over all ``2**L`` assignments; first maximiser in lexicographic order wins."""
    L = graph.num_variables
    if L > BRUTE_FORCE_MAX_VARIABLES:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_VARIABLES} variables, graph has {L}")
    s = _as_scores(s)
    if s.size != L:
        raise ValueError(f"graph has {L} variables but got {s.size} scores")
    best, best_score = None, -np.inf
    for start in range(0, 2**L, _CHUNK):
        Z = assignment_block(L, start, min(start + _CHUNK, 2**L))
        values = global_scores_batch(graph, s, Z)
        k = int(np.argmax(values))
        if values[k] > best_score:
            best, best_score = Z[k].copy(), float(values[k])
    if best is None:
        raise ValueError("graph has no feasible assignment")
    return MapResult(best, best_score)
