from .estimators import HighlightRationalizer, MatchingRationalizer
from .model import (
    SyntheticExample,
    ToyModel,
    default_hyperparams,
    highlight_embeddings,
    init_model,
    make_highlight_data,
    make_matching_data,
)
from .training import TrainingDiverged, train_toy

__all__ = [
    "HighlightRationalizer",
    "MatchingRationalizer",
    "SyntheticExample",
    "ToyModel",
    "TrainingDiverged",
    "default_hyperparams",
    "highlight_embeddings",
    "init_model",
    "make_highlight_data",
    "make_matching_data",
    "train_toy",
]
