"""Highlight rationalizer: SeqBudget extraction layer between a linear
generator and a bag-of-embeddings logistic predictor, with hand-written
gradients."""

from __future__ import annotations

import numpy as np

from ..graph import build_highlight_graph
from ..lp_sparsemap import ConsensusState, SolverConfig, lp_sparsemap_solve, lp_sparsemap_vjp
from .model import ToyModel


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def generator_scores(model: ToyModel, tokens) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    return model.embeddings[tokens] @ model.generator_weights + model.generator_bias


def test_config(model: ToyModel) -> SolverConfig:
    hp = model.hyperparams
    return SolverConfig(temperature=hp.get("test_temperature", 1e-3), max_iters=hp.get("test_iters", 1000))


def train_config(model: ToyModel) -> SolverConfig:
    hp = model.hyperparams
    return SolverConfig.train(temperature=hp.get("temperature", 0.1), max_iters=hp.get("train_iters", 10))


def extract_highlight(
    model: ToyModel, tokens, config: SolverConfig | None = None
) -> tuple[np.ndarray, np.ndarray, ConsensusState]:
    """Relaxed highlight ``z``, generator scores and solver state for one document."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size < 1:
        raise ValueError("empty document")
    hp = model.hyperparams
    graph = build_highlight_graph(tokens.size, hp.get("budget_pct", 20.0), hp.get("transition", 0.005))
    s = generator_scores(model, tokens)
    state = lp_sparsemap_solve(graph, s, config=config or test_config(model))
    return state.u, s, state


def predict_highlight(model: ToyModel, tokens, z) -> float:
    """Probability of the positive class from the ``z``-masked bag of embeddings."""
    tokens = np.asarray(tokens, dtype=np.int64)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != tokens.shape:
        raise ValueError(f"mask has shape {z.shape}, document has {tokens.size} tokens")
    x = z @ model.embeddings[tokens]
    return _sigmoid(float(x @ model.predictor_weights + model.predictor_bias))


def example_loss_and_grad(
    model: ToyModel, tokens, label: int, config: SolverConfig
) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy and its gradient, backpropagated through the extraction layer."""
    tokens = np.asarray(tokens, dtype=np.int64)
    E = model.embeddings[tokens]
    z, _, state = extract_highlight(model, tokens, config)
    x = z @ E
    p = _sigmoid(float(x @ model.predictor_weights + model.predictor_bias))
    eps = 1e-12
    loss = -(label * np.log(p + eps) + (1 - label) * np.log(1 - p + eps))

    delta = p - label
    dx = delta * model.predictor_weights
    dz = E @ dx
    ds = lp_sparsemap_vjp(state, dz)

    dE = np.zeros_like(model.embeddings)
    np.add.at(dE, tokens, np.outer(z, dx) + np.outer(ds, model.generator_weights))
    grads = {
        "embeddings": dE,
        "generator_weights": E.T @ ds,
        "generator_bias": np.float64(ds.sum()),
        "predictor_weights": delta * x,
        "predictor_bias": np.float64(delta),
    }
    return float(loss), grads


def batch_loss_and_grad(model: ToyModel, batch, config: SolverConfig) -> tuple[float, dict[str, np.ndarray]]:
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in model.params().items()}
    for ex in batch:
        loss, g = example_loss_and_grad(model, ex.tokens, ex.label, config)
        total += loss
        for k in grads:
            grads[k] += g[k]
    n = len(batch)
    return total / n, {k: v / n for k, v in grads.items()}
