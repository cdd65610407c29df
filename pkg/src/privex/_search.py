"""Search machinery for the finite-alphabet rate-privacy problems.

A filter ``P_{Z|Y}`` is the same thing as a decomposition of ``P_Y`` into
posteriors ``q_z = P_{Y|Z=z}`` with weights ``P_Z(z)``:

    I(Y;Z) = H(Y) - sum_z w_z H(q_z)
    I(X;Z) = H(X) - sum_z w_z H(A q_z),          A = P_{X|Y}
    rho_m^2(X;Z) = lambda_2( sum_z w_z u_z u_z^T ), u_z = P_X^{-1/2} A q_z

For a fixed pool of posteriors all three are linear in ``w`` (the last one
through the cuts ``v^T (sum w u u^T) v <= eps`` for unit ``v`` orthogonal to
``sqrt(P_X)``), so the best filter over the pool is a linear program. The pool
is grown by column generation on the LP duals and seeded from a multi-start
penalty ascent over filter matrices.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .prob_core import LN2, entropy_bits

HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
LOG_FLOOR = 1e-12


@dataclass
class Problem:
    pxy: np.ndarray

    def __post_init__(self):
        self.pxy = np.asarray(self.pxy, dtype=float)
        self.px = self.pxy.sum(axis=1)
        self.py = self.pxy.sum(axis=0)
        self.A = self.pxy / self.py[None, :]
        self.hx = float(entropy_bits(self.px))
        self.hy = float(entropy_bits(self.py))
        self.sqrt_px = np.sqrt(self.px)
        self.nx, self.ny = self.pxy.shape


def col_entropy(Q) -> np.ndarray:
    return entropy_bits(Q, axis=0)


# ---------------------------------------------------------------- pools

def simplex_grid(n: int, max_points: int) -> np.ndarray:
    """All points of the simplex with coordinates in ``{0, 1/r, ..., 1}`` for
    the largest ``r`` keeping the count below ``max_points``; columns."""
    r = 1
    while math.comb(r + 1 + n - 1, n - 1) <= max_points:
        r += 1
    pts = []
    for bars in itertools.combinations(range(r + n - 1), n - 1):
        prev, parts = -1, []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(r + n - 1 - prev - 1)
        pts.append(parts)
    return np.array(pts, dtype=float).T / r


def initial_pool(prob: Problem, rng: np.random.Generator, max_points: int = 3000,
                 extra=None, vertices=None) -> np.ndarray:
    ny = prob.ny
    cols = [np.eye(ny), prob.py[:, None]]
    if ny <= 7:
        cols.append(simplex_grid(ny, max_points))
    n_rand = max(max_points // 4, 200) if ny <= 7 else max_points
    cols.append(rng.dirichlet(np.ones(ny), size=n_rand).T)
    cols.append(rng.dirichlet(np.full(ny, 0.3), size=n_rand // 2).T)
    if vertices is not None and vertices.size:
        cols.append(vertices)
    if extra is not None and np.size(extra):
        cols.append(np.asarray(extra))
    return np.hstack(cols)


def perfect_privacy_vertices(prob: Problem, rng: np.random.Generator | None = None,
                             max_subsets: int = 5000, tol: float = 1e-11) -> np.ndarray:
    """Vertices of ``{q >= 0 : A q = P_X}``, the posteriors that reveal nothing
    about ``X``. Exhaustive over column bases when affordable, otherwise a
    sample obtained from LPs with random objectives."""
    A, px = prob.A, prob.px
    rank = np.linalg.matrix_rank(A, tol=1e-9)
    ny = prob.ny
    if rank == ny:
        return prob.py[:, None].copy()
    found = []
    if math.comb(ny, rank) <= max_subsets:
        for cols in itertools.combinations(range(ny), rank):
            sub = A[:, cols]
            if np.linalg.matrix_rank(sub, tol=1e-9) < rank:
                continue
            sol, *_ = np.linalg.lstsq(sub, px, rcond=None)
            if np.abs(sub @ sol - px).max() > tol or sol.min() < -tol:
                continue
            q = np.zeros(ny)
            q[list(cols)] = np.clip(sol, 0.0, None)
            found.append(q / q.sum())
    else:
        rng = rng or np.random.default_rng(0)
        for _ in range(400):
            res = linprog(rng.standard_normal(ny), A_eq=A, b_eq=px, bounds=(0, None),
                          method="highs-ds")
            if res.status == 0:
                q = np.clip(res.x, 0.0, None)
                found.append(q / q.sum())
    if not found:
        return prob.py[:, None].copy()
    V = np.unique(np.round(np.array(found), 14), axis=0).T
    return V


def perfect_privacy_lp(prob: Problem, V: np.ndarray):
    """Best decomposition of ``P_Y`` into perfect-privacy posteriors.

    Returns ``(value, weights)`` where ``value = H(Y) - min sum w H(v)``.
    """
    res = linprog(col_entropy(V), A_eq=V, b_eq=prob.py, bounds=(0, None), method="highs-ds",
                  options=HIGHS_OPTIONS)
    if res.status != 0:
        return 0.0, None
    return max(prob.hy - float(res.fun), 0.0), res.x


# ---------------------------------------------------------------- LP over a pool

@dataclass
class PoolSolution:
    value: float
    weights: np.ndarray
    pool: np.ndarray
    eq_duals: np.ndarray
    ub_duals: np.ndarray
    cuts: np.ndarray | None


def _ub_rows(prob: Problem, Q, measure: str, cuts):
    if measure == "mi":
        return -col_entropy(prob.A @ Q)[None, :]
    U = (prob.A @ Q) / prob.sqrt_px[:, None]
    return (cuts @ U) ** 2


def solve_pool(prob: Problem, Q: np.ndarray, measure: str, eps: float, cuts=None):
    """LP ``max I(Y;Z)`` over filters whose posteriors lie in the pool ``Q``."""
    A_ub = _ub_rows(prob, Q, measure, cuts)
    if measure == "mi":
        b_ub = [eps - prob.hx]
    else:
        b_ub = np.full(A_ub.shape[0], eps)
    res = linprog(col_entropy(Q), A_ub=A_ub, b_ub=b_ub, A_eq=Q, b_eq=prob.py, bounds=(0, None),
                  method="highs-ds", options=HIGHS_OPTIONS)
    if res.status != 0:
        return None
    return PoolSolution(prob.hy - float(res.fun), res.x, Q, res.eqlin.marginals,
                        res.ineqlin.marginals, cuts)


def reduce_support(prob: Problem, Q, w, measure: str, tol: float = 1e-13):
    """Drop pool columns from a solution without changing ``sum w q``, the
    leakage (``sum w H(Aq)``, or the whole matrix ``sum w u u^T``), and without
    lowering the utility, until the used posteriors are affinely independent
    with respect to those constraints."""
    w = np.where(w > tol, w, 0.0)
    idx = np.flatnonzero(w)
    Qa = Q[:, idx]
    if measure == "mi":
        rows = np.vstack([Qa, col_entropy(prob.A @ Qa)[None, :]])
    else:
        U = (prob.A @ Qa) / prob.sqrt_px[:, None]
        iu = np.triu_indices(prob.nx)
        rows = np.vstack([Qa, (U[:, None, :] * U[None, :, :])[iu]])
    cost = col_entropy(Qa)
    wa = w[idx].copy()
    keep = np.ones(idx.size, dtype=bool)
    while True:
        cols = np.flatnonzero(keep)
        M = rows[:, cols]
        _, s, vt = np.linalg.svd(M)
        rank = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
        if cols.size <= rank:
            break
        d = vt[-1]
        if cost[cols] @ d > 0:
            d = -d
        neg = d < -1e-15
        if not np.any(neg):
            break
        ratio = np.where(neg, wa[cols] / np.where(neg, -d, 1.0), np.inf)
        hit = int(np.argmin(ratio))
        wa[cols] = np.clip(wa[cols] + ratio[hit] * d, 0.0, None)
        wa[cols[hit]] = 0.0
        keep[cols[hit]] = False
    out = np.zeros_like(w)
    out[idx] = np.where(keep, np.clip(wa, 0.0, None), 0.0)
    return out


def filter_from_weights(prob: Problem, Q, w, tol: float = 1e-13) -> np.ndarray:
    act = w > tol
    W = Q[:, act] * w[act][None, :] / prob.py[:, None]
    return W / W.sum(axis=1, keepdims=True)


def rho2_operator(prob: Problem, Q, w) -> np.ndarray:
    """``Pi (sum w u u^T) Pi`` with ``Pi`` projecting out ``sqrt(P_X)``."""
    U = (prob.A @ Q) / prob.sqrt_px[:, None]
    K = (U * w[None, :]) @ U.T
    Pi = np.eye(prob.nx) - np.outer(prob.sqrt_px, prob.sqrt_px)
    return Pi @ K @ Pi


def _initial_cuts(prob: Problem) -> np.ndarray:
    B = prob.pxy / np.sqrt(np.outer(prob.px, prob.py))
    u, _, _ = np.linalg.svd(B)
    return u[:, 1:].T.copy()


def solve_pool_mc(prob: Problem, Q, eps: float, cuts=None, max_cuts: int = 60):
    """Cutting-plane LP for ``rho_m^2(X;Z) <= eps`` over a pool."""
    cuts = _initial_cuts(prob) if cuts is None else cuts
    sol = None
    for _ in range(max_cuts):
        sol = solve_pool(prob, Q, "mc", eps, cuts)
        if sol is None:
            return None
        evals, evecs = np.linalg.eigh(rho2_operator(prob, Q, sol.weights))
        if evals[-1] <= eps + 1e-10:
            break
        v = evecs[:, -1]
        if np.max(np.abs(cuts @ v)) > 1.0 - 1e-12:
            break
        cuts = np.vstack([cuts, v])
    return sol


# ---------------------------------------------------------------- pricing

def _reduced_cost_and_grad(prob: Problem, Q, sol: PoolSolution, measure: str):
    """Reduced cost of candidate columns ``Q`` and its gradient."""
    lq = np.log2(np.maximum(Q, 1e-300))
    d = col_entropy(Q) - sol.eq_duals @ Q
    g = -lq - 1.0 / LN2 - sol.eq_duals[:, None]
    AQ = prob.A @ Q
    if measure == "mi":
        mu = sol.ub_duals[0]
        d = d + mu * col_entropy(AQ)
        g = g + mu * (prob.A.T @ (-np.log2(np.maximum(AQ, 1e-300)) - 1.0 / LN2))
    else:
        C = (sol.cuts / prob.sqrt_px[None, :]) @ prob.A   # (k, ny)
        proj = C @ Q                                      # (k, n)
        d = d - sol.ub_duals @ proj ** 2
        g = g - 2.0 * C.T @ (sol.ub_duals[:, None] * proj)
    return d, g


def price(prob: Problem, sol: PoolSolution, measure: str, rng: np.random.Generator,
          n_starts: int = 48, iters: int = 200, step: float = 0.25):
    """Search for posteriors with negative reduced cost by exponentiated
    gradient descent from the pool's most promising columns and random
    points. Returns the candidate columns found (possibly empty)."""
    d_pool, _ = _reduced_cost_and_grad(prob, sol.pool, sol, measure)
    top = np.argsort(d_pool)[: n_starts // 2]
    starts = np.hstack([sol.pool[:, top],
                        rng.dirichlet(np.ones(prob.ny), size=n_starts - top.size).T])
    Q = 0.9 * starts + 0.1 / prob.ny
    best_q = Q.copy()
    best_d = np.full(Q.shape[1], np.inf)
    for _ in range(iters):
        d, g = _reduced_cost_and_grad(prob, Q, sol, measure)
        better = d < best_d
        best_d[better] = d[better]
        best_q[:, better] = Q[:, better]
        g = g - (Q * g).sum(axis=0, keepdims=True)
        Q = Q * np.exp(-step * np.clip(g, -50, 50))
        Q = np.maximum(Q, 1e-300)
        Q /= Q.sum(axis=0, keepdims=True)
    snapped = np.where(best_q < 1e-9, 0.0, best_q)
    snapped /= snapped.sum(axis=0, keepdims=True)
    cand = np.hstack([best_q, snapped])
    d, _ = _reduced_cost_and_grad(prob, cand, sol, measure)
    return cand[:, d < -1e-11]


def column_generation(prob: Problem, Q: np.ndarray, measure: str, eps: float,
                      rng: np.random.Generator, rounds: int = 12):
    """Solve the pool LP and enlarge the pool until no improving column is found."""
    solve = (lambda pool, cuts: solve_pool(prob, pool, "mi", eps)) if measure == "mi" else \
        (lambda pool, cuts: solve_pool_mc(prob, pool, eps, cuts))
    sol = solve(Q, None)
    if sol is None:
        return None
    for _ in range(rounds):
        new = price(prob, sol, measure, rng)
        if new.shape[1] == 0:
            break
        nxt = solve(np.hstack([sol.pool, new]), sol.cuts)
        if nxt is None:
            break
        improved = nxt.value - sol.value
        sol = nxt
        if improved < 1e-12:
            break
    return sol


def active_posteriors(sol: PoolSolution, tol: float = 1e-13) -> np.ndarray:
    return sol.pool[:, sol.weights > tol]


def posteriors_of(prob: Problem, W: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Columns ``P_{Y|Z=z}`` of a filter matrix (outputs with mass > tol)."""
    joint = prob.py[:, None] * W
    mass = joint.sum(axis=0)
    keep = mass > tol
    return joint[:, keep] / mass[keep]


# ---------------------------------------------------------------- penalty ascent

def project_simplex(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of each vector along the last axis onto the simplex."""
    n = V.shape[-1]
    U = -np.sort(-V, axis=-1)
    css = np.cumsum(U, axis=-1) - 1.0
    ind = np.arange(1, n + 1)
    cond = U - css / ind > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(V - theta, 0.0)


def _lg(a):
    return np.log2(np.maximum(a, LOG_FLOOR))


def utility_and_grad(prob: Problem, W):
    """Batched ``I(Y;Z)`` and its gradient for filters ``W`` of shape (R, ny, nz)."""
    pyz = prob.py[None, :, None] * W
    q = pyz.sum(axis=1)
    ratio = _lg(W) - _lg(q)[:, None, :]
    val = np.sum(np.where(pyz > 0, pyz * ratio, 0.0), axis=(1, 2))
    return val, prob.py[None, :, None] * ratio


def mi_leak_and_grad(prob: Problem, W):
    pxz = np.einsum("xy,ryz->rxz", prob.pxy, W)
    q = pxz.sum(axis=1)
    ratio = _lg(pxz) - np.log2(prob.px)[None, :, None] - _lg(q)[:, None, :]
    val = np.sum(np.where(pxz > 0, pxz * ratio, 0.0), axis=(1, 2))
    return np.maximum(val, 0.0), np.einsum("xy,rxz->ryz", prob.pxy, ratio)


def rho2_leak_and_grad(prob: Problem, W):
    """Batched ``rho_m^2(X;Z)`` and its exact gradient (simple second singular
    value assumed)."""
    pxz = np.einsum("xy,ryz->rxz", prob.pxy, W)
    q = np.maximum(pxz.sum(axis=1), 1e-300)
    B = pxz / np.sqrt(prob.px[None, :, None] * q[:, None, :])
    U, S, Vt = np.linalg.svd(B)
    if S.shape[1] < 2:
        return np.zeros(W.shape[0]), np.zeros_like(W)
    sig = S[:, 1]
    u = U[:, :, 1]
    v = Vt[:, 1, :]
    a = np.einsum("xy,rx->ry", prob.pxy, u / prob.sqrt_px[None, :])
    dsig = (a[:, :, None] * (v / np.sqrt(q))[:, None, :]
            - 0.5 * sig[:, None, None] * prob.py[None, :, None] * (v ** 2 / q)[:, None, :])
    return sig ** 2, 2.0 * sig[:, None, None] * dsig


def penalty_ascent(prob: Problem, W0: np.ndarray, measure: str, eps: float, max_iters: int,
                   step: float = 0.05, mu0: float = 10.0, growth: float = 10.0,
                   stages: int = 4) -> np.ndarray:
    """Multi-start projected gradient ascent of
    ``I(Y;Z) - mu * max(0, L(W) - eps)^2`` with ``mu`` raised stage by stage.

    ``L`` is ``I(X;Z)`` (``measure="mi"``) or ``rho_m^2(X;Z)`` (``"mc"``).
    Row ``y`` is stepped with a ``1/P_Y(y)`` preconditioner.
    """
    leak = mi_leak_and_grad if measure == "mi" else rho2_leak_and_grad
    W = np.array(W0, dtype=float)
    per_stage = max(max_iters // stages, 1)
    scale = step / prob.py[None, :, None]
    mu = mu0
    for stage in range(stages):
        eta = scale / (1.0 + stage)
        for _ in range(per_stage):
            _, gu = utility_and_grad(prob, W)
            L, gl = leak(prob, W)
            viol = np.maximum(L - eps, 0.0)
            G = gu - 2.0 * mu * viol[:, None, None] * gl
            W = project_simplex(W + np.clip(eta * G, -0.1, 0.1))
        mu *= growth
    return W


def batch_metrics(prob: Problem, W, measure: str):
    u, _ = utility_and_grad(prob, W)
    L, _ = (mi_leak_and_grad if measure == "mi" else rho2_leak_and_grad)(prob, W)
    return u, L
