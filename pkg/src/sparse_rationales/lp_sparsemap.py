"""LP-SparseMAP over multi-factor graphs by consensus ADMM.

The solver works on the temperature-scaled problem

    max_{z in [0,1]^L}  s . z + sum_f h_f(z_f) - T/2 ||z||^2

(equivalent to LP-SparseMAP of ``s / T``). Each variable's score and
quadratic term are split evenly over the factors covering it; every factor
keeps a local copy ``z_f`` that must agree with the global ``u``. One
iteration solves all local SparseMAP problems with dual-adjusted scores,
averages the local copies into ``u`` and takes a dual step. The solver stops
once, for every factor, the summed disagreement ``|z_f - u_f|_1`` is at most
``tol`` and ``u`` moved by at most ``tol / rho``; ``max_residual`` reports the
largest single-entry disagreement.

Logic factors (XOR, AtMostOne, Budget) have integral polytopes, so their
local problem is an exact Euclidean projection onto a capped simplex; the
other factors go through the active-set SparseMAP solver. The backward pass
unrolls the last ``unroll`` recorded iterations.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .graph import AT_MOST_ONE, BUDGET, LOGIC_KINDS, XOR, Factor, FactorGraph
from .sparsemap import (
    DEFAULT_MAX_ACTIVE_SET_ITERS,
    SparseSolution,
    active_set_jacobian,
    solve_active_set,
    sparsemap_solve,
    sparsemap_vjp,
)

logger = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Knobs of the consensus solver.

    The defaults are the inference setting (``T = 1e-3``, 1000 iterations);
    :meth:`train` gives the training setting (``T = 0.1``, 10 iterations).
    """

    temperature: float = 1e-3
    rho: float = 1.0
    max_iters: int = 1000
    tol: float = 1e-3
    unroll: int = 10
    local_solver: str = "auto"
    max_active_set_iters: int = DEFAULT_MAX_ACTIVE_SET_ITERS

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.tol >= 0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")
        if int(self.unroll) != self.unroll or self.unroll < 1:
            raise ValueError(f"unroll must be a positive integer, got {self.unroll}")
        if self.local_solver not in ("auto", "active_set"):
            raise ValueError(f"local_solver must be 'auto' or 'active_set', got {self.local_solver!r}")
        self.max_iters = int(self.max_iters)
        self.unroll = int(self.unroll)

    @classmethod
    def train(cls, temperature: float = 0.1, **kwargs) -> "SolverConfig":
        kwargs.setdefault("max_iters", 10)
        return cls(temperature=temperature, **kwargs)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SolverConfig":
        if not isinstance(d, dict):
            raise ValueError("solver config: expected an object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"solver config: unknown field(s) {unknown}")
        return cls(**d)


# -- exact projections for logic factors ------------------------------------


def _clip01(x: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, 0.0), 1.0)


def project_capped_simplex(v: np.ndarray, total: float, equality: bool) -> tuple[np.ndarray, bool]:
    """Euclidean projection of ``v`` onto ``{0 <= z <= 1, sum z (=|<=) total}``.

    Returns the projection and whether the sum constraint is binding.
    """
    if not equality:
        z = _clip01(v)
        if z.sum() <= total:
            return z, False
    # sum_i clip(v_i - tau, 0, 1) is piecewise linear and non-increasing in tau
    bp = np.sort(np.concatenate([v - 1.0, v]))
    phi = _clip01(v[None, :] - bp[:, None]).sum(axis=1)
    j = int(np.searchsorted(-phi, -total, side="right")) - 1
    j = min(max(j, 0), bp.size - 2)
    lo, hi = bp[j], bp[j + 1]
    flo, fhi = phi[j], phi[j + 1]
    tau = lo if flo == fhi else lo + (flo - total) * (hi - lo) / (flo - fhi)
    return _clip01(v - tau), True


@dataclass
class _ProjectionLinearization:
    free: np.ndarray
    sum_active: bool
    inv_c: float

    def vjp(self, g: np.ndarray) -> np.ndarray:
        out = np.zeros_like(g)
        gf = g[self.free]
        if gf.size:
            out[self.free] = gf - gf.mean() if self.sum_active else gf
        return out * self.inv_c


@dataclass
class _ActiveSetLinearization:
    jacobian: np.ndarray

    def vjp(self, g: np.ndarray) -> np.ndarray:
        return self.jacobian @ g


def _uses_projection(factor: Factor, c: np.ndarray, local_solver: str) -> bool:
    return local_solver == "auto" and factor.kind in LOGIC_KINDS and bool(np.all(c == c[0]))


def _local_solver(factor: Factor, c: np.ndarray, config: SolverConfig):
    """Closure solving the local problem of ``factor`` with quadratic weights ``c``."""
    if _uses_projection(factor, c, config.local_solver):
        total = 1.0 if factor.kind in (XOR, AT_MOST_ONE) else float(factor.budget)
        equality = factor.kind == XOR
        inv_c = 1.0 / float(c[0])

        def solve(a):
            z, sum_active = project_capped_simplex(a * inv_c, total, equality)
            return z, _ProjectionLinearization((z > 0.0) & (z < 1.0), sum_active, inv_c)

        return solve

    def solve(a):
        sol = solve_active_set(factor, a, extra_scale=1.0, quad_weights=c, max_iter=config.max_active_set_iters)
        return sol.z, _ActiveSetLinearization(active_set_jacobian(sol)[0])

    return solve


def _solve_local(factor: Factor, a: np.ndarray, c: np.ndarray, config: SolverConfig):
    return _local_solver(factor, c, config)(a)


# -- consensus solver ---------------------------------------------------------


@dataclass
class ConsensusState:
    """Result and diagnostics of :func:`lp_sparsemap_solve`.

    ``u`` is the global relaxed solution. ``local`` and ``duals`` hold the
    per-factor copies and scaled dual vectors after the last iteration;
    ``max_residual`` is the largest disagreement between a local copy and ``u``.
    ``residual_history`` tracks it per iteration; it can oscillate.
    ``combined_residual_history`` tracks
    ``sqrt(rho * (sum_i d_i (u_i - u_i_prev)^2 + sum_f |z_f - u_f|^2))``, which
    is non-increasing for exact local solves (a standard ADMM contraction
    property).
    """

    graph: FactorGraph
    scores: np.ndarray
    config: SolverConfig
    u: np.ndarray
    local: list[np.ndarray]
    duals: list[np.ndarray]
    iterations: int
    max_residual: float
    dual_residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list, repr=False)
    combined_residual_history: list[float] = field(default_factory=list, repr=False)
    single_factor: SparseSolution | None = field(default=None, repr=False)
    _tape: deque = field(default_factory=deque, repr=False)

    @property
    def z(self) -> np.ndarray:
        return self.u

    @property
    def approximate_gradient(self) -> bool:
        if self.single_factor is not None:
            return not self.single_factor.converged
        return not self.converged or len(self._tape) < self.iterations


def _as_config(config: SolverConfig | dict | None, overrides: dict[str, Any]) -> SolverConfig:
    if config is None:
        config = SolverConfig()
    elif isinstance(config, dict):
        config = SolverConfig.from_dict(config)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        config = SolverConfig(**{**config.to_dict(), **overrides})
    return config


def lp_sparsemap_solve(
    graph: FactorGraph,
    s,
    temperature: float | None = None,
    max_iters: int | None = None,
    tol: float | None = None,
    *,
    rho: float | None = None,
    unroll: int | None = None,
    config: SolverConfig | dict | None = None,
) -> ConsensusState:
    """Solve LP-SparseMAP of ``s / temperature`` on ``graph``.

    Keyword arguments override the corresponding fields of ``config``. A graph
    made of one factor over all variables is solved directly by
    :func:`~sparse_rationales.sparsemap.sparsemap_solve`.
    """
    config = _as_config(
        config, dict(temperature=temperature, max_iters=max_iters, tol=tol, rho=rho, unroll=unroll)
    )
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    L = graph.num_variables
    if s.size != L:
        raise ValueError(f"graph has {L} variables but got {s.size} scores")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    T = config.temperature

    if len(graph.factors) == 1:
        (factor,) = graph.factors
        m = np.asarray(factor.members)
        sol = sparsemap_solve(factor, s[m], temperature=T, max_iter=config.max_active_set_iters)
        u = np.zeros(L)
        u[m] = sol.z
        return ConsensusState(
            graph=graph,
            scores=s,
            config=config,
            u=u,
            local=[sol.z.copy()],
            duals=[np.zeros(factor.size)],
            iterations=1,
            max_residual=0.0,
            dual_residual=0.0,
            converged=sol.converged,
            residual_history=[0.0],
            combined_residual_history=[0.0],
            single_factor=sol,
        )

    # rho acts on the T-scaled problem, i.e. in the units of the scores s
    rho = config.rho
    d = graph.degree.astype(np.float64)
    members = [np.asarray(f.members) for f in graph.factors]
    shares = [s[m] / d[m] for m in members]
    quad = [T / d[m] + rho for m in members]
    u = np.zeros(L)
    duals = [np.zeros(m.size) for m in members]
    local = [np.zeros(m.size) for m in members]
    solvers = [_local_solver(f, quad[k], config) for k, f in enumerate(graph.factors)]
    flat_members = np.concatenate(members)
    tape: deque = deque(maxlen=config.unroll)
    history: list[float] = []
    combined: list[float] = []
    primal = dual = np.inf
    converged = False
    it = 0

    for it in range(1, config.max_iters + 1):
        lins = []
        for k, m in enumerate(members):
            local[k], lin = solvers[k](shares[k] + rho * (u[m] - duals[k]))
            lins.append(lin)
        acc = np.bincount(flat_members, weights=np.concatenate([z + y for z, y in zip(local, duals)]), minlength=L)
        u_new = acc / d
        primal = factor_gap = sq_primal = 0.0
        for k, m in enumerate(members):
            diff = local[k] - u_new[m]
            duals[k] = duals[k] + diff
            absdiff = np.abs(diff)
            primal = max(primal, absdiff.max())
            factor_gap = max(factor_gap, absdiff.sum())
            sq_primal += float(diff @ diff)
        primal, factor_gap = float(primal), float(factor_gap)
        step = u_new - u
        dual = rho * float(np.abs(step).max())
        combined.append(float(np.sqrt(rho * (d @ (step * step) + sq_primal))))
        u = u_new
        tape.append((rho, lins))
        history.append(primal)
        # the l1 gap per factor bounds how far u can violate any factor's sum constraint
        if factor_gap <= config.tol and dual <= config.tol:
            converged = True
            break

    if not converged:
        logger.info("LP-SparseMAP stopped after %d iterations, residual %.3g", it, primal)

    return ConsensusState(
        graph=graph,
        scores=s,
        config=config,
        u=np.clip(u, 0.0, 1.0),  # averaging can overshoot the box by an ulp
        local=[z.copy() for z in local],
        duals=[y.copy() for y in duals],
        iterations=it,
        max_residual=primal,
        dual_residual=dual,
        converged=converged,
        residual_history=history,
        combined_residual_history=combined,
        _tape=tape,
    )


def lp_sparsemap_vjp(state: ConsensusState, upstream) -> np.ndarray:
    """``(du/ds)^T upstream`` by reverse-mode unrolling of the recorded iterations.

    The iterate entering the oldest recorded iteration is treated as constant,
    so the result is exact only in the limit of many recorded iterations at a
    converged point. ``state.approximate_gradient`` flags results that are
    not (unconverged state or truncated tape); train-time solves with a
    10-iteration budget are expected to be flagged.
    """
    g = np.asarray(upstream, dtype=np.float64).reshape(-1)
    graph = state.graph
    if g.size != graph.num_variables:
        raise ValueError(f"upstream has {g.size} entries, graph has {graph.num_variables} variables")
    if state.single_factor is not None:
        m = np.asarray(graph.factors[0].members)
        out = np.zeros_like(g)
        out[m] = sparsemap_vjp(state.single_factor, g[m])
        return out
    if not state.converged:
        logger.debug("LP-SparseMAP state not converged; gradient is approximate")

    d = graph.degree.astype(np.float64)
    members = [np.asarray(f.members) for f in graph.factors]
    u_bar = g.copy()
    y_bar = [np.zeros(m.size) for m in members]
    s_bar = np.zeros_like(g)
    for rho, lins in reversed(state._tape):
        # y_f <- y_f + z_f - u_f; u <- mean_f (z_f + y_f_prev)
        u_tot = u_bar.copy()
        for k, m in enumerate(members):
            np.add.at(u_tot, m, -y_bar[k])
        per_var = u_tot / d
        u_bar = np.zeros_like(g)
        for k, m in enumerate(members):
            z_bar = y_bar[k] + per_var[m]
            a_bar = lins[k].vjp(z_bar)
            np.add.at(s_bar, m, a_bar / d[m])
            np.add.at(u_bar, m, rho * a_bar)
            y_bar[k] = y_bar[k] + per_var[m] - rho * a_bar
    return s_bar
