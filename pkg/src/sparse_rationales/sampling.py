"""Gibbs distributions over feasible structures and stochastic extraction.

``gibbs_enumerate`` builds the exact distribution ``p(z) ~ exp(score(z; s))``
on small graphs. ``perturb_and_map_sample`` draws approximate samples by
adding Gumbel noise per variable and taking the MAP. ``gumbel_matching`` is
the perturbed-score alignment baseline for matchings.

All randomness comes from :func:`numpy.random.default_rng` (PCG64) seeded
with an explicit integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .graph import FactorGraph
from .map_oracles import enumerate_assignments, global_scores_batch, map_factor, map_global_brute_force

GIBBS_MAX_VARIABLES = 20


@dataclass(frozen=True)
class GibbsTable:
    assignments: np.ndarray
    scores: np.ndarray
    probabilities: np.ndarray
    log_partition: float


def gibbs_enumerate(graph: FactorGraph, s) -> GibbsTable:
    """Exact Gibbs table over the feasible assignments of ``graph``."""
    L = graph.num_variables
    if L > GIBBS_MAX_VARIABLES:
        raise ValueError(f"enumeration limited to {GIBBS_MAX_VARIABLES} variables, graph has {L}")
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if s.size != L:
        raise ValueError(f"graph has {L} variables but got {s.size} scores")
    Z = enumerate_assignments(L)
    scores = global_scores_batch(graph, s, Z)
    feasible = np.isfinite(scores)
    Z, scores = Z[feasible], scores[feasible]
    log_z = float(logsumexp(scores))
    return GibbsTable(Z, scores, np.exp(scores - log_z), log_z)


def gumbel_noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard Gumbel draws ``-log(-log U)`` with ``U`` uniform on (0, 1)."""
    u = rng.uniform(np.finfo(np.float64).tiny, 1.0, size=shape)
    return -np.log(-np.log(u))


def exact_map(graph: FactorGraph, s) -> np.ndarray:
    """Exact MAP: the factor's own oracle for single-factor graphs, brute force otherwise."""
    s = np.asarray(s, dtype=np.float64)
    if len(graph.factors) == 1:
        f = graph.factors[0]
        m = list(f.members)
        z = np.zeros(graph.num_variables)
        z[m] = map_factor(f, s[m]).assignment
        return z
    return map_global_brute_force(graph, s).assignment


def perturb_and_map_sample(graph: FactorGraph, s, seed: int, n: int = 1) -> list[np.ndarray]:
    """``n`` samples ``MAP(s + g)`` with fresh i.i.d. Gumbel noise ``g`` per variable."""
    if n < 0:
        raise ValueError("n must be non-negative")
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if s.size != graph.num_variables:
        raise ValueError(f"graph has {graph.num_variables} variables but got {s.size} scores")
    rng = np.random.default_rng(seed)
    return [exact_map(graph, s + gumbel_noise(rng, s.size)) for _ in range(n)]


def empirical_kl(table: GibbsTable, samples) -> float:
    """``KL(empirical || Gibbs)`` of a sample set; a bias diagnostic for perturb-and-MAP.

    Perturb-and-MAP with per-variable noise is not an exact Gibbs sampler, so
    this is expected to stay above zero even with many samples.
    """
    samples = [np.asarray(z).reshape(-1) for z in samples]
    if not samples:
        raise ValueError("need at least one sample")
    index = {row.astype(np.int8).tobytes(): k for k, row in enumerate(table.assignments)}
    counts = np.zeros(len(index))
    for z in samples:
        key = z.astype(np.int8).tobytes()
        if key not in index:
            raise ValueError("sample is not a feasible assignment of the table")
        counts[index[key]] += 1
    q = counts / counts.sum()
    seen = q > 0
    return float(np.sum(q[seen] * (np.log(q[seen]) - np.log(table.probabilities[seen]))))


@dataclass(frozen=True)
class GumbelMatching:
    """Premise-to-hypothesis (rows) and hypothesis-to-premise (columns) alignments."""

    premise_to_hypothesis: np.ndarray
    hypothesis_to_premise: np.ndarray
    perturbation: np.ndarray | None
    seed: int
    mode: str


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


def _one_hot_argmax(x: np.ndarray, axis: int) -> np.ndarray:
    out = np.zeros_like(x)
    idx = np.expand_dims(np.argmax(x, axis=axis), axis)
    np.put_along_axis(out, idx, 1.0, axis=axis)
    return out


def gumbel_matching(S, seed: int, mode: str = "train", temperature: float = 0.1) -> GumbelMatching:
    """Stochastic matchings from Gumbel-perturbed alignment scores.

    ``train``: directional softmax alignments of ``(S + P) / temperature``;
    rows of ``premise_to_hypothesis`` and columns of ``hypothesis_to_premise``
    sum to one. ``test``: the most probable matchings, i.e. one-hot row and
    column argmaxes of the unperturbed ``S``.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or 0 in S.shape:
        raise ValueError("S must be a non-empty matrix")
    if not np.all(np.isfinite(S)):
        raise ValueError("S must be finite")
    if mode == "test":
        return GumbelMatching(_one_hot_argmax(S, 1), _one_hot_argmax(S, 0), None, seed, mode)
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'test', got {mode!r}")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    P = gumbel_noise(np.random.default_rng(seed), S.shape)
    scaled = (S + P) / temperature
    return GumbelMatching(_softmax(scaled, 1), _softmax(scaled, 0), P, seed, mode)
