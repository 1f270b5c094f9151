"""Constrained, differentiable rationale extraction with structured inference
on factor graphs."""

from .graph import (
    Factor,
    FactorGraph,
    build_highlight_graph,
    build_matching_graph,
)
from .map_oracles import MapResult, map_factor, map_global_brute_force
from .sparsemap import SparseSolution, sparsemap_solve, sparsemap_vjp
from .lp_sparsemap import ConsensusState, SolverConfig, lp_sparsemap_solve, lp_sparsemap_vjp
from .metrics import RationaleEval, corpus_token_f1, rationale_size, token_f1
from .sampling import GibbsTable, empirical_kl, gibbs_enumerate, gumbel_matching, perturb_and_map_sample
from .rationalizers import HighlightRationalizer, MatchingRationalizer

__version__ = "0.1.0"

__all__ = [
    "Factor",
    "FactorGraph",
    "build_highlight_graph",
    "build_matching_graph",
    "MapResult",
    "map_factor",
    "map_global_brute_force",
    "SparseSolution",
    "sparsemap_solve",
    "sparsemap_vjp",
    "ConsensusState",
    "SolverConfig",
    "lp_sparsemap_solve",
    "lp_sparsemap_vjp",
    "RationaleEval",
    "corpus_token_f1",
    "rationale_size",
    "token_f1",
    "GibbsTable",
    "empirical_kl",
    "gibbs_enumerate",
    "gumbel_matching",
    "perturb_and_map_sample",
    "HighlightRationalizer",
    "MatchingRationalizer",
]
