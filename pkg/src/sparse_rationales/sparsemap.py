"""SparseMAP for a single factor, solved with an active-set method.

For a factor ``f`` with MAP oracle, scores ``s`` and temperature ``T`` the
solver computes

    argmax_{z in conv(Z_f)}  (s / T) . z + h_f(z) / T - 1/2 ||z||^2

where ``h_f`` is extended linearly over convex combinations of structures. The
solution is certified by a small set of structures (vertices) and convex
weights over them. Vertices are generated by calling the MAP oracle on the
gradient of the objective at the current iterate; the restricted quadratic
program over the active vertices is solved exactly from its KKT system,
dropping vertices whose weight would turn negative.

Internally the quadratic term may carry per-variable weights ``c`` (the
consensus solver needs ``-1/2 sum_i c_i z_i^2``); the public entry point uses
``c = 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import Factor
from .map_oracles import factor_extra_score, map_factor

logger = logging.getLogger(__name__)

DEFAULT_MAX_ACTIVE_SET_ITERS = 100
DEFAULT_GAP_TOL = 1e-9
_SINGULAR_RCOND = 1e-12
_AFFINE_RTOL = 1e-10


@dataclass
class SparseSolution:
    """Relaxed solution of a single-factor SparseMAP problem.

    ``vertices`` holds one active structure per row and ``weights`` the convex
    weights over them, so that ``z == weights @ vertices``.
    """

    factor: Factor
    z: np.ndarray
    vertices: np.ndarray
    weights: np.ndarray
    objective: float
    temperature: float
    converged: bool
    n_iter: int
    quad_weights: np.ndarray
    objective_history: list[float] = field(default_factory=list, repr=False)

    @property
    def active_set(self) -> list[tuple[np.ndarray, float]]:
        return [(v.copy(), float(w)) for v, w in zip(self.vertices, self.weights)]

    @property
    def support_size(self) -> int:
        return len(self.weights)


def _kkt_matrix(M: np.ndarray, c: np.ndarray) -> np.ndarray:
    k = M.shape[0]
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = (M * c) @ M.T
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    return K


def _solve_kkt(K: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve the restricted KKT system; minimum-norm least squares when singular."""
    try:
        if np.linalg.cond(K) < 1.0 / _SINGULAR_RCOND:
            return np.linalg.solve(K, rhs), False
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(K, rhs, rcond=None)[0], True


def _affine_dependence(M: np.ndarray) -> np.ndarray | None:
    """A unit vector ``d`` with ``sum(d) = 0`` and ``d @ M = 0`` if the rows of ``M`` are affinely dependent."""
    k = M.shape[0]
    if k == 1:
        return None
    A = np.vstack([M.T, np.ones(k)])
    _, sv, vt = np.linalg.svd(A)
    if sv.size < k or sv[-1] < _AFFINE_RTOL * sv[0]:
        return vt[-1]
    return None


def _drop(M: np.ndarray, t: np.ndarray, alpha: np.ndarray, j: int):
    keep = np.ones(M.shape[0], dtype=bool)
    keep[j] = False
    alpha = alpha[keep]
    return M[keep], t[keep], alpha / alpha.sum()


def _vertex_key(v: np.ndarray) -> bytes:
    return np.asarray(v, dtype=np.int8).tobytes()


def solve_active_set(
    factor: Factor,
    a: np.ndarray,
    extra_scale: float = 1.0,
    quad_weights: np.ndarray | None = None,
    max_iter: int = DEFAULT_MAX_ACTIVE_SET_ITERS,
    tol: float = DEFAULT_GAP_TOL,
    temperature: float = 1.0,
) -> SparseSolution:
    """Maximise ``a . z + h_f(z) / extra_scale - 1/2 sum_i c_i z_i^2`` over ``conv(Z_f)``.

    ``tol`` bounds the Frank-Wolfe gap of the final iterate relative to
    ``1 + |objective|``.
    """
    a = np.asarray(a, dtype=np.float64)
    n = factor.size
    c = np.ones(n) if quad_weights is None else np.asarray(quad_weights, dtype=np.float64)

    def oracle(direction):
        v = map_factor(factor, extra_scale * direction).assignment
        return v, factor_extra_score(factor, v) / extra_scale

    v0, t0 = oracle(a)
    M = v0[None, :]
    t = np.array([t0])
    alpha = np.ones(1)
    keys = {_vertex_key(v0)}
    history: list[float] = []
    converged = False
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        # restricted QP over the active vertices, dropping vertices as needed
        stalled = set()
        while True:
            k = M.shape[0]
            theta = M @ a + t
            d = _affine_dependence(M)
            if d is not None:
                # objective is linear along d and z does not move: slide uphill
                # until a weight hits zero, restoring affine independence
                if theta @ d < 0:
                    d = -d
                shrinking = d < 0
                ratios = np.where(shrinking, alpha / np.where(shrinking, -d, 1.0), np.inf)
                j = int(np.argmin(ratios))
                if ratios[j] == 0:
                    stalled.add(_vertex_key(M[j]))
                alpha = np.maximum(alpha + ratios[j] * d, 0.0)
                alpha[j] = 0.0
                M, t, alpha = _drop(M, t, alpha, j)
                continue
            beta = _solve_kkt(_kkt_matrix(M, c), np.append(theta, 1.0))[0][:k]
            if np.all(beta >= 0):
                alpha = beta
                break
            blocking = beta < 0
            ratios = np.where(blocking, alpha / np.where(blocking, alpha - beta, 1.0), np.inf)
            j = int(np.argmin(ratios))
            if ratios[j] == 0:
                stalled.add(_vertex_key(M[j]))
            alpha = np.maximum(alpha + ratios[j] * (beta - alpha), 0.0)
            alpha[j] = 0.0
            M, t, alpha = _drop(M, t, alpha, j)
        keys = {_vertex_key(v) for v in M}

        z = alpha @ M
        objective = float(alpha @ (M @ a + t) - 0.5 * np.dot(c * z, z))
        history.append(objective)

        grad = a - c * z
        v, tv = oracle(grad)
        eta_new = float(grad @ v + tv)
        eta_active = float(alpha @ (M @ grad + t))
        gap = eta_new - eta_active
        if gap <= tol * (1.0 + abs(objective)):
            converged = True
            break
        key = _vertex_key(v)
        if key in keys or key in stalled:
            # the best vertex is already active or was just rejected: no further progress is possible
            converged = True
            break
        M = np.vstack([M, v])
        t = np.append(t, tv)
        alpha = np.append(alpha, 0.0)
        keys.add(key)

    if not converged:
        logger.warning("SparseMAP active set did not converge in %d iterations", max_iter)

    keep = alpha > 0
    M, alpha = M[keep], alpha[keep]
    z = np.clip(alpha @ M, 0.0, 1.0)  # rounding in the convex combination
    return SparseSolution(
        factor=factor,
        z=z,
        vertices=M,
        weights=alpha,
        objective=history[-1],
        temperature=temperature,
        converged=converged,
        n_iter=n_iter,
        quad_weights=c,
        objective_history=history,
    )


def sparsemap_solve(
    factor: Factor,
    s_f,
    temperature: float = 1.0,
    max_iter: int = DEFAULT_MAX_ACTIVE_SET_ITERS,
    tol: float = DEFAULT_GAP_TOL,
) -> SparseSolution:
    """SparseMAP of ``s_f / temperature`` over the structures of ``factor``."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    s_f = np.asarray(s_f, dtype=np.float64)
    if s_f.shape != (factor.size,):
        raise ValueError(f"expected {factor.size} scores, got shape {s_f.shape}")
    if not np.all(np.isfinite(s_f)):
        raise ValueError("scores must be finite")
    return solve_active_set(
        factor, s_f / temperature, extra_scale=temperature, max_iter=max_iter, tol=tol, temperature=temperature
    )


def active_set_jacobian(solution: SparseSolution) -> tuple[np.ndarray, bool]:
    """``dz/da`` for the linear scores ``a`` of the restricted problem.

    Returns the symmetric ``n x n`` matrix ``M^T A M`` where ``A`` is the
    weight block of the inverse KKT matrix, and whether a pseudo-inverse was
    needed.
    """
    M, c = solution.vertices, solution.quad_weights
    k = M.shape[0]
    if k == 1:
        return np.zeros((M.shape[1], M.shape[1])), False
    K = _kkt_matrix(M, c)
    singular = np.linalg.cond(K) >= 1.0 / _SINGULAR_RCOND
    Kinv = np.linalg.pinv(K) if singular else np.linalg.inv(K)
    A = Kinv[:k, :k]
    return M.T @ A @ M, singular


def sparsemap_vjp(solution: SparseSolution, upstream) -> np.ndarray:
    """``(dz/ds)^T upstream`` at a converged SparseMAP solution."""
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != solution.z.shape:
        raise ValueError(f"upstream shape {g.shape} does not match solution {solution.z.shape}")
    J, singular = active_set_jacobian(solution)
    if singular:
        logger.warning("singular active-set system; used pseudo-inverse")
    return (J @ g) / solution.temperature
