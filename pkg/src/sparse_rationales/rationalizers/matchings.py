"""Matching rationalizer: LP-SparseMAP alignments between premise and
hypothesis, fed to a pooled feature classifier.

Tokens are encoded as ``embeddings[v] * generator_weights``; alignment scores
are dot products of the encodings plus ``generator_bias``. Each premise token
is augmented with its aligned hypothesis average (and vice versa); in faithful
mode the premise's own encoding is replaced by zeros so that the premise only
reaches the classifier through the alignment.
"""

from __future__ import annotations

import numpy as np

from ..graph import build_matching_graph
from ..lp_sparsemap import ConsensusState, SolverConfig, lp_sparsemap_solve, lp_sparsemap_vjp
from .highlights import test_config
from .model import ToyModel

def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def encode(model: ToyModel, tokens) -> np.ndarray:
    return model.embeddings[np.asarray(tokens, dtype=np.int64)] * model.generator_weights


def alignment_scores(model: ToyModel, premise, hypothesis) -> np.ndarray:
    return encode(model, premise) @ encode(model, hypothesis).T + model.generator_bias


def _variant(model: ToyModel):
    hp = model.hyperparams
    name = hp.get("variant", "XorAtMostOne")
    return (name, hp.get("budget")) if name == "Budget" else name


def extract_matching(
    model: ToyModel, premise, hypothesis, variant=None, config: SolverConfig | None = None
) -> tuple[np.ndarray, ConsensusState]:
    """Relaxed ``L_P x L_H`` alignment and the solver state behind it."""
    premise = np.asarray(premise, dtype=np.int64)
    hypothesis = np.asarray(hypothesis, dtype=np.int64)
    if premise.size < 1 or hypothesis.size < 1:
        raise ValueError("premise and hypothesis must be non-empty")
    graph = build_matching_graph(premise.size, hypothesis.size, variant or _variant(model))
    S = alignment_scores(model, premise, hypothesis)
    state = lp_sparsemap_solve(graph, S.ravel(), config=config or test_config(model))
    return state.u.reshape(S.shape), state


def matching_features(model: ToyModel, premise, hypothesis, Z, faithful: bool = False):
    """Feature vector ``[rP, rH, rP - rH, rP * rH]`` and the pieces needed to backpropagate."""
    Hp, Hh = encode(model, premise), encode(model, hypothesis)
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape != (Hp.shape[0], Hh.shape[0]):
        raise ValueError(f"alignment has shape {Z.shape}, expected {(Hp.shape[0], Hh.shape[0])}")
    aligned_p = Z @ Hh
    aligned_h = Z.T @ Hp
    own_p = np.zeros_like(Hp) if faithful else Hp
    rP = np.concatenate([own_p.mean(axis=0), aligned_p.mean(axis=0)])
    rH = np.concatenate([Hh.mean(axis=0), aligned_h.mean(axis=0)])
    feat = np.concatenate([rP, rH, rP - rH, rP * rH])
    return feat, (Hp, Hh, rP, rH)


def predict_matching(model: ToyModel, premise, hypothesis, Z, faithful: bool = False) -> np.ndarray:
    """3-way class probabilities given an alignment ``Z``."""
    feat, _ = matching_features(model, premise, hypothesis, Z, faithful)
    return _softmax(model.predictor_weights @ feat + model.predictor_bias)


def example_loss_and_grad(
    model: ToyModel, premise, hypothesis, label: int, config: SolverConfig
) -> tuple[float, dict[str, np.ndarray]]:
    premise = np.asarray(premise, dtype=np.int64)
    hypothesis = np.asarray(hypothesis, dtype=np.int64)
    faithful = bool(model.hyperparams.get("faithful", False))
    Z, state = extract_matching(model, premise, hypothesis, config=config)
    feat, (Hp, Hh, rP, rH) = matching_features(model, premise, hypothesis, Z, faithful)
    W = model.predictor_weights
    p = _softmax(W @ feat + model.predictor_bias)
    loss = -np.log(p[label] + 1e-12)

    delta = p.copy()
    delta[label] -= 1.0
    dfeat = W.T @ delta
    D2 = rP.size
    f1, f2, f3, f4 = (dfeat[k * D2 : (k + 1) * D2] for k in range(4))
    d_rP = f1 + f3 + f4 * rH
    d_rH = f2 - f3 + f4 * rP
    D = Hp.shape[1]
    Lp, Lh = Hp.shape[0], Hh.shape[0]
    d_aligned_p = np.tile(d_rP[D:] / Lp, (Lp, 1))
    d_aligned_h = np.tile(d_rH[D:] / Lh, (Lh, 1))
    dHp = np.zeros_like(Hp) if faithful else np.tile(d_rP[:D] / Lp, (Lp, 1))
    dHh = np.tile(d_rH[:D] / Lh, (Lh, 1))

    dZ = d_aligned_p @ Hh.T + Hp @ d_aligned_h.T
    dHh += Z.T @ d_aligned_p
    dHp += Z @ d_aligned_h
    dS = lp_sparsemap_vjp(state, dZ.ravel()).reshape(Z.shape)
    dHp += dS @ Hh
    dHh += dS.T @ Hp

    w = model.generator_weights
    Ep, Eh = model.embeddings[premise], model.embeddings[hypothesis]
    dE = np.zeros_like(model.embeddings)
    np.add.at(dE, premise, dHp * w)
    np.add.at(dE, hypothesis, dHh * w)
    grads = {
        "embeddings": dE,
        "generator_weights": (dHp * Ep).sum(axis=0) + (dHh * Eh).sum(axis=0),
        "generator_bias": np.float64(dS.sum()),
        "predictor_weights": np.outer(delta, feat),
        "predictor_bias": delta,
    }
    return float(loss), grads


def batch_loss_and_grad(model: ToyModel, batch, config: SolverConfig):
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in model.params().items()}
    for ex in batch:
        premise, hypothesis = ex.tokens
        loss, g = example_loss_and_grad(model, premise, hypothesis, ex.label, config)
        total += loss
        for k in grads:
            grads[k] += g[k]
    n = len(batch)
    return total / n, {k: v / n for k, v in grads.items()}
