"""Mini-batch gradient descent shared by both toy rationalizers."""

from __future__ import annotations

import logging

import numpy as np

from . import highlights, matchings
from .highlights import train_config
from .model import HIGHLIGHT, SyntheticExample, ToyModel

logger = logging.getLogger(__name__)

GENERATOR_PARAMS = ("generator_weights", "generator_bias")


class TrainingDiverged(RuntimeError):
    pass


def batch_loss_and_grad(model: ToyModel, batch, config=None):
    config = config or train_config(model)
    if model.kind == HIGHLIGHT:
        return highlights.batch_loss_and_grad(model, batch, config)
    return matchings.batch_loss_and_grad(model, batch, config)


def train_toy(
    model: ToyModel,
    data: list[SyntheticExample],
    epochs: int,
    learning_rate: float | None = None,
    batch_size: int | None = None,
    seed: int | None = None,
) -> tuple[ToyModel, list[float]]:
    """Train a copy of ``model``; returns it with the mean loss of every epoch.

    The epoch loss is accumulated over batches as they are visited. During the
    first ``warmup_epochs`` epochs the generator is held fixed so the predictor
    settles before the extraction starts to move; ``freeze_embeddings`` keeps
    the embedding table fixed throughout.
    """
    if not data:
        raise ValueError("no training data")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    hp = model.hyperparams
    lr = hp.get("learning_rate", 0.05) if learning_rate is None else learning_rate
    bs = int(hp.get("batch_size", 16) if batch_size is None else batch_size)
    if bs < 1:
        raise ValueError("batch_size must be >= 1")
    warmup = int(hp.get("warmup_epochs", 0))
    frozen = {"embeddings"} if hp.get("freeze_embeddings", False) else set()
    rng = np.random.default_rng(hp.get("seed", 0) if seed is None else seed)
    config = train_config(model)
    model = model.copy()
    losses = []
    for epoch in range(epochs):
        skip = frozen | (set(GENERATOR_PARAMS) if epoch < warmup else set())
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        for start in range(0, len(data), bs):
            batch = [data[i] for i in order[start : start + bs]]
            loss, grads = batch_loss_and_grad(model, batch, config)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} in epoch {epoch + 1}, batch starting at {start}")
            for name in skip:
                grads[name] = np.zeros_like(grads[name])
            epoch_loss += loss * len(batch)
            model.apply_update(grads, lr)
        losses.append(epoch_loss / len(data))
        logger.info("epoch %d: loss %.4f", epoch + 1, losses[-1])
    return model, losses
