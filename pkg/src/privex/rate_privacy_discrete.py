"""Rate-privacy functions of finite joint distributions.

``g_eps`` maximizes ``I(Y;Z)`` over filters ``P_{Z|Y}`` with ``I(X;Z) <= eps``;
``g_hat_eps`` uses ``rho_m^2(X;Z) <= eps`` instead. Solver outputs are
certified lower bounds: each carries a feasible filter whose audited utility is
the reported value, alongside analytic lower and upper bounds.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _search as S
from .dependence import maximal_correlation, weak_independence
from .errors import (
    EpsilonOutOfRange,
    IndependentSources,
    InputError,
    OutOfRange,
    RateUnachievable,
    WeaklyIndependent,
)
from .filters import leakage, merge_equivalent_outputs, uniform_mixing_filter
from .prob_core import (
    Channel,
    JointDistribution,
    conditional_entropy,
    entropy,
    kl_divergence,
    mutual_information,
    mutual_information_matrix,
)
from .serialization import csv_table, serialize_channel
from .structure import detect_biso, detect_erasure

__all__ = [
    "SolverConfig", "RatePrivacyPoint", "Bounds", "ClosedForm", "LinearityVerdict",
    "bounds_g", "bounds_g_hat", "g0", "solve_g", "solve_g_hat", "closed_form",
    "detect_biso", "detect_erasure", "slope_bound_at_zero", "linearity_test", "curve_g",
    "funnel_dual", "dilution_outer", "biso_divergence_ratio", "curve_to_csv",
]

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    Attributes
    ----------
    restarts : int
        Number of starting filters for the penalty ascent.
    z_cardinality : int or None
        Output alphabet size used by the ascent; ``None`` means ``|Y| + 1``.
    max_iters : int
        Total ascent iterations, split evenly over the penalty stages.
    step, penalty_start, penalty_growth, penalty_stages
        Step size and penalty schedule ``mu = start * growth**stage``.
    master_seed : int
        Seed for every random choice; results are a function of it.
    tolerance : float
        Feasibility slack accepted on audited leakage.
    pool_size : int
        Approximate number of initial candidate posteriors for the LP.
    cg_rounds : int
        Column-generation rounds.
    threads : int
        Workers used by :func:`curve_g` (results do not depend on it).
    """

    restarts: int = 50
    z_cardinality: Optional[int] = None
    max_iters: int = 400
    step: float = 0.05
    penalty_start: float = 10.0
    penalty_growth: float = 10.0
    penalty_stages: int = 4
    master_seed: int = 0
    tolerance: float = FEAS_TOL
    pool_size: int = 3000
    cg_rounds: int = 12
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise InputError("restarts must be >= 1")
        if self.z_cardinality is not None and self.z_cardinality < 2:
            raise InputError("z_cardinality must be >= 2")
        if self.max_iters < 0 or self.threads < 1:
            raise InputError("max_iters must be >= 0 and threads >= 1")


@dataclass(frozen=True)
class RatePrivacyPoint:
    epsilon: float
    lower: float
    value: float
    upper: float
    filter: Channel
    achieved_leakage: float
    measure: str = "mi"

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "lower": self.lower, "value": self.value,
                "upper": self.upper, "achieved_leakage": self.achieved_leakage,
                "measure": self.measure, "filter": self.filter.to_dict()}


class Bounds(NamedTuple):
    lower: float
    upper: float


class ClosedForm(NamedTuple):
    value: float
    provenance: str


@dataclass(frozen=True)
class LinearityVerdict:
    verdict: str            # "Linear", "LinearPossible" or "NotLinear"
    ratios: dict


# ---------------------------------------------------------------- helpers

def _check_eps(eps):
    if not (isinstance(eps, (int, float, np.floating)) and math.isfinite(eps)) or eps < 0:
        raise EpsilonOutOfRange(f"eps={eps!r} must be a finite number >= 0")
    return float(eps)


def _reverse_channel(joint: JointDistribution) -> Channel:
    return Channel((joint.pxy / joint.py[None, :]).T, joint.y_labels, joint.x_labels)


def _forward_channel(joint: JointDistribution) -> Channel:
    return Channel(joint.pxy / joint.px[:, None], joint.x_labels, joint.y_labels)


def _canonical(W: np.ndarray, joint: JointDistribution) -> Channel:
    """Merge equivalent outputs, order them by posterior and relabel ``z0..``."""
    ch = merge_equivalent_outputs(Channel(np.clip(W, 0.0, None), joint.y_labels), joint.py)
    W = np.asarray(ch.rows)
    post = joint.py[:, None] * W
    post = post / post.sum(axis=0, keepdims=True)
    order = sorted(range(W.shape[1]), key=lambda j: tuple(-np.round(post[:, j], 12)))
    return Channel(W[:, order], joint.y_labels, tuple(f"z{i}" for i in range(len(order))))


@dataclass
class _G0Cert:
    value: float
    W: np.ndarray
    V: np.ndarray


def _g0_certificate(prob: S.Problem, rng) -> _G0Cert:
    V = S.perfect_privacy_vertices(prob, rng)
    if V.shape[1] == 1:
        return _G0Cert(0.0, np.ones((prob.ny, 1)), V)
    _, w = S.perfect_privacy_lp(prob, V)
    if w is None:
        return _G0Cert(0.0, np.ones((prob.ny, 1)), V)
    W = S.filter_from_weights(prob, V, w)
    _, u, _ = leakage(prob.pxy, W)
    return _G0Cert(u, W, V)


def _leak(prob: S.Problem, W, measure: str):
    i_xz, i_yz, r2 = leakage(prob.pxy, W)
    return i_yz, (i_xz if measure == "mi" else r2)


def _repair(prob: S.Problem, W, L, eps, g0c: _G0Cert, measure: str):
    """Time-share ``W`` (leakage ``L > eps``) with the perfect-privacy filter
    so that the leakage becomes ``eps``; with a constant perfect-privacy filter
    this is the erasure wrapper with ``delta = 1 - eps / L``."""
    _, L0 = _leak(prob, g0c.W, measure)
    if L0 >= eps:
        return g0c.W
    lam = (eps - L0) / (L - L0)
    return np.hstack([lam * W, (1.0 - lam) * g0c.W])


def _reduce(prob: S.Problem, W, measure: str):
    """Shrink the output alphabet of ``W`` (see :func:`_search.reduce_support`)."""
    joint = prob.py[:, None] * W
    mass = joint.sum(axis=0)
    keep = mass > 0
    Q = joint[:, keep] / mass[keep]
    return S.filter_from_weights(prob, Q, S.reduce_support(prob, Q, mass[keep], measure))


def _pad(W, nz):
    if W.shape[1] >= nz:
        return W[:, :nz] / W[:, :nz].sum(axis=1, keepdims=True)
    return np.hstack([W, np.zeros((W.shape[0], nz - W.shape[1]))])


def _seeds(prob: S.Problem, eps, full, cfg: SolverConfig, rng):
    ny = prob.ny
    nz = cfg.z_cardinality or ny + 1
    seeds = []
    if nz >= ny + 1:
        delta = 1.0 - min(eps / full, 1.0)
        seeds.append(np.hstack([(1 - delta) * np.eye(ny), np.full((ny, 1), delta)]))
    if nz >= ny:
        seeds.append(np.eye(ny))
    for k in range(ny):
        probe = np.zeros((ny, 2))
        probe[:, 1] = 1.0
        probe[k] = [1.0, 0.0]
        seeds.append(probe)
    seeds = [_pad(s, nz) for s in seeds][: cfg.restarts]
    n_rand = cfg.restarts - len(seeds)
    if n_rand > 0:
        seeds += list(rng.dirichlet(np.ones(nz), size=(n_rand, ny)))
    return np.stack(seeds)


def _solve(joint: JointDistribution, eps: float, cfg: SolverConfig, measure: str, rng,
           g0c: _G0Cert, extra=None):
    """Best certified filter for one ``eps``. Returns ``(value, leak, W, posteriors)``."""
    prob = S.Problem(joint.pxy)
    full = mutual_information(joint) if measure == "mi" else maximal_correlation(joint) ** 2
    cands = []
    lam = eps / full
    cands.append(np.hstack([lam * np.eye(prob.ny), (1.0 - lam) * g0c.W]))

    posts = [g0c.V]
    if cfg.max_iters > 0:
        Wa = S.penalty_ascent(prob, _seeds(prob, eps, full, cfg, rng), measure, eps,
                              cfg.max_iters, cfg.step, cfg.penalty_start, cfg.penalty_growth,
                              cfg.penalty_stages)
        u, L = S.batch_metrics(prob, Wa, measure)
        rep = np.where(L > eps, eps / np.maximum(L, 1e-300) * u, u)
        for r in np.argsort(-rep)[:5]:
            cands.append(Wa[r])
        posts += [S.posteriors_of(prob, W) for W in Wa]
    if extra is not None and np.size(extra):
        posts.append(extra)

    pool = S.initial_pool(prob, rng, cfg.pool_size, extra=np.hstack(posts))
    sol = S.column_generation(prob, pool, measure, eps, rng, cfg.cg_rounds)
    active = np.zeros((prob.ny, 0))
    if sol is not None:
        w = S.reduce_support(prob, sol.pool, sol.weights, measure)
        cands.append(S.filter_from_weights(prob, sol.pool, w))
        active = S.active_posteriors(sol)

    best = None
    for W in cands:
        value, L = _leak(prob, W, measure)
        if L > eps:
            W = _repair(prob, W, L, eps, g0c, measure)
        W = _reduce(prob, W, measure)
        value, L = _leak(prob, W, measure)
        if L > eps + cfg.tolerance:
            continue
        if best is None or value > best[0] + 1e-12:
            best = (value, L, W)
        elif value > best[0] - 1e-12:
            a = serialize_channel(_canonical(W, joint))
            b = serialize_channel(_canonical(best[2], joint))
            if a < b:
                best = (max(value, best[0]), L, W)
    return best[0], best[1], best[2], active


def _finish(joint, eps, value, leak_, W, bounds, measure) -> RatePrivacyPoint:
    ch = _canonical(W, joint)
    i_xz, i_yz, r2 = leakage(joint.pxy, ch.rows)
    return RatePrivacyPoint(eps, bounds.lower, i_yz, bounds.upper, ch,
                            i_xz if measure == "mi" else r2, measure)


# ---------------------------------------------------------------- bounds and g0

def g0(joint: JointDistribution, config: SolverConfig | None = None):
    """Perfect-privacy utility ``g_0(X;Y)`` with a certifying filter.

    Positive exactly when ``X`` is weakly independent of ``Y``. The value is
    obtained from a linear program over the vertices of the set of posteriors
    that leave ``P_{X}`` unchanged (exhaustive for small ``|Y|``), so it is
    exact up to LP round-off.

    Returns
    -------
    (float, Channel)
    """
    config = config or SolverConfig()
    if not weak_independence(joint):
        return 0.0, Channel.constant(joint.y_labels, "z0")
    delta = detect_erasure(_forward_channel(joint))
    if delta is not None and 0.0 < delta < 1.0:
        filt = uniform_mixing_filter(joint)
        return leakage(joint.pxy, filt.rows)[1], filt
    prob = S.Problem(joint.pxy)
    cert = _g0_certificate(prob, np.random.default_rng([config.master_seed, 0xA0]))
    ch = _canonical(cert.W, joint)
    return leakage(joint.pxy, ch.rows)[1], ch


def bounds_g(joint: JointDistribution, eps: float, g0_value: float | None = None) -> Bounds:
    """Analytic bounds on ``g_eps``.

    ``lower = (eps/I) H(Y) + g0 (1 - eps/I)`` and
    ``upper = min(H(Y|X) + eps, H(Y))``, further tightened for BISO reverse
    channels to ``H(Y) - (I - eps)/C`` with ``C`` the mutual information under
    uniform ``Y``.
    """
    eps = _check_eps(eps)
    info = mutual_information(joint)
    hy = entropy(joint.py)
    if info <= 0:
        raise IndependentSources("I(X;Y) = 0; the privacy constraint is vacuous")
    if eps >= info:
        return Bounds(hy, hy)
    if g0_value is None:
        g0_value = g0(joint)[0]
    r = eps / info
    lower = max(r * hy, r * hy + g0_value * (1.0 - r))
    upper = min(conditional_entropy(joint) + eps, hy)
    if joint.shape[1] == 2:
        rev = _reverse_channel(joint)
        if detect_biso(rev):
            cap = mutual_information_matrix(0.5 * rev.rows.T)
            if cap > 0:
                upper = min(upper, hy - (info - eps) / cap)
    return Bounds(lower, max(upper, lower))


def bounds_g_hat(joint: JointDistribution, eps: float) -> Bounds:
    """``min(eps, rho^2)/rho^2 * H(Y) <= g_hat <= log2((|X|-1) eps + 1) + H(Y|X)``."""
    if not 0.0 <= eps <= 1.0:
        raise EpsilonOutOfRange(f"eps={eps} not in [0,1]")
    hy = entropy(joint.py)
    r2 = maximal_correlation(joint) ** 2
    if eps >= r2 - 1e-12:
        return Bounds(hy, hy)
    lower = eps / r2 * hy
    upper = min(math.log2((joint.shape[0] - 1) * eps + 1.0) + conditional_entropy(joint), hy)
    return Bounds(lower, max(upper, lower))


# ---------------------------------------------------------------- solvers

def _rng(config: SolverConfig, *extra):
    return np.random.default_rng([config.master_seed, *extra])


def solve_g(joint: JointDistribution, eps: float, config: SolverConfig | None = None,
            *, extra_posteriors=None, _index: int = 0) -> RatePrivacyPoint:
    """Certified lower bound on ``g_eps(X;Y)``.

    Candidates come from the time-sharing of the perfect-privacy filter with
    the identity, a multi-start penalty ascent, and a linear program over a
    pool of posteriors grown by column generation. Infeasible candidates are
    repaired by time-sharing with the perfect-privacy filter.
    """
    config = config or SolverConfig()
    eps = _check_eps(eps)
    info = mutual_information(joint)
    hy = entropy(joint.py)
    if eps >= info:
        ident = Channel.identity(joint.y_labels)
        return RatePrivacyPoint(eps, hy, hy, hy, ident, info)
    prob = S.Problem(joint.pxy)
    g0c = _g0_certificate(prob, _rng(config, 0xA0))
    bounds = bounds_g(joint, eps, g0c.value)
    value, leak_, W, _ = _solve(joint, eps, config, "mi", _rng(config, _index), g0c,
                                extra_posteriors)
    return _finish(joint, eps, value, leak_, W, bounds, "mi")


def solve_g_hat(joint: JointDistribution, eps: float, config: SolverConfig | None = None
                ) -> RatePrivacyPoint:
    """Certified lower bound on ``g_hat_eps(X;Y)`` (constraint ``rho_m^2(X;Z) <= eps``)."""
    config = config or SolverConfig()
    eps = _check_eps(eps)
    if eps > 1.0:
        raise EpsilonOutOfRange(f"eps={eps} not in [0,1]")
    hy = entropy(joint.py)
    r2 = maximal_correlation(joint) ** 2
    if eps >= r2 - 1e-12:
        return RatePrivacyPoint(eps, hy, hy, hy, Channel.identity(joint.y_labels), r2, "mc")
    prob = S.Problem(joint.pxy)
    g0c = _g0_certificate(prob, _rng(config, 0xA0))
    bounds = bounds_g_hat(joint, eps)
    if eps == 0.0:
        W = g0c.W
        value, leak_ = _leak(prob, W, "mc")
    else:
        value, leak_, W, _ = _solve(joint, eps, config, "mc", _rng(config, 0), g0c)
    return _finish(joint, eps, value, leak_, W, bounds, "mc")


def curve_g(joint: JointDistribution, grid, config: SolverConfig | None = None):
    """Solve ``g_eps`` on a sorted grid in ``[0, I(X;Y)]``.

    Points are solved independently (optionally in parallel), then every
    point is re-optimized over the posteriors used anywhere on the curve, and
    finally values are made non-decreasing by carrying a certificate forward
    to larger ``eps`` when it beats the local one.
    """
    config = config or SolverConfig()
    grid = [_check_eps(e) for e in grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InputError("epsilon grid must be sorted")
    info = mutual_information(joint)
    if grid and grid[-1] > info * (1 + 1e-12) + 1e-15:
        raise EpsilonOutOfRange(f"grid exceeds I(X;Y)={info:.12g}")
    if not grid:
        return []
    hy = entropy(joint.py)
    prob = S.Problem(joint.pxy)
    g0c = _g0_certificate(prob, _rng(config, 0xA0))
    ident = np.eye(prob.ny)

    def work(i):
        eps = grid[i]
        if eps >= info:
            return hy, info, ident, np.eye(prob.ny)
        return _solve(joint, eps, config, "mi", _rng(config, i), g0c)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as ex:
            results = list(ex.map(work, range(len(grid))))
    else:
        results = [work(i) for i in range(len(grid))]

    shared = np.hstack([np.eye(prob.ny), prob.py[:, None], g0c.V] + [r[3] for r in results])

    def share(i):
        value, leak_, W, act = results[i]
        eps = grid[i]
        if eps >= info:
            return results[i]
        sol = S.solve_pool(prob, shared, "mi", eps)
        if sol is not None:
            Wn = S.filter_from_weights(prob, sol.pool,
                                       S.reduce_support(prob, sol.pool, sol.weights, "mi"))
            v, L = _leak(prob, Wn, "mi")
            if L > eps:
                Wn = _repair(prob, Wn, L, eps, g0c, "mi")
                v, L = _leak(prob, Wn, "mi")
            if L <= eps + config.tolerance and v > value + 1e-12:
                return v, L, Wn, act
        return results[i]

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as ex:
            results = list(ex.map(share, range(len(grid))))
    else:
        results = [share(i) for i in range(len(grid))]

    points = []
    best = None
    for i, eps in enumerate(grid):
        value, leak_, W, _ = results[i]
        if best is not None and best[0] > value:
            value, leak_, W = best
        best = (value, leak_, W)
        b = Bounds(hy, hy) if eps >= info else bounds_g(joint, eps, g0c.value)
        if eps >= info:
            points.append(RatePrivacyPoint(eps, hy, hy, hy, Channel.identity(joint.y_labels),
                                           info))
        else:
            points.append(_finish(joint, eps, value, leak_, W, b, "mi"))
    return points


def curve_to_csv(points) -> str:
    return csv_table(["epsilon", "lower", "value", "upper", "leakage"],
                     [(p.epsilon, p.lower, p.value, p.upper, p.achieved_leakage)
                      for p in points])


def funnel_dual(joint: JointDistribution, rate: float, config: SolverConfig | None = None,
                tol: float = 1e-4) -> float:
    """Smallest ``eps`` at which the solver certifies ``g_eps >= rate``.

    Since solver values are lower bounds on ``g_eps``, the result is an upper
    bound on the privacy funnel ``t_R`` (found by bisection to ``tol``).
    """
    config = config or SolverConfig()
    hy = entropy(joint.py)
    if rate > hy + 1e-12:
        raise RateUnachievable(f"R={rate} exceeds H(Y)={hy:.12g}")
    if rate < 0:
        raise OutOfRange(f"R={rate} must be >= 0")
    if rate <= 0:
        return 0.0
    g0_value = g0(joint, config)[0]
    if g0_value >= rate:
        return 0.0
    info = mutual_information(joint)
    lo, hi = 0.0, info
    pool = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        pt = solve_g(joint, mid, config, extra_posteriors=pool)
        posts = S.posteriors_of(S.Problem(joint.pxy), np.asarray(pt.filter.rows))
        pool = posts if pool is None else np.hstack([pool, posts])
        if pt.value >= rate:
            hi = mid
        else:
            lo = mid
    return hi


def dilution_outer(joint: JointDistribution, delta_a: float,
                   config: SolverConfig | None = None) -> float:
    """Smallest masking ``Delta_M`` compatible with amplification ``Delta_A``
    for Markov auxiliaries ``X - Y - U``; equal to the privacy funnel at rate
    ``Delta_A``."""
    return funnel_dual(joint, delta_a, config)


# ---------------------------------------------------------------- structure

def closed_form(joint: JointDistribution, eps: float) -> ClosedForm | None:
    """Exact ``g_eps`` for erasure observation channels and for BISO reverse
    channels with uniform binary ``Y``; ``None`` otherwise."""
    eps = _check_eps(eps)
    info = mutual_information(joint)
    delta = detect_erasure(_forward_channel(joint))
    if delta is not None:
        return ClosedForm(conditional_entropy(joint) + min(eps, info), "erasure")
    if joint.shape[1] == 2 and abs(joint.py[0] - 0.5) <= 1e-9:
        if detect_biso(_reverse_channel(joint)):
            if info <= 0:
                return ClosedForm(1.0, "biso-uniform")
            return ClosedForm(min(eps, info) / info, "biso-uniform")
    return None


def _ratios(joint: JointDistribution):
    if mutual_information(joint) <= 0:
        raise IndependentSources("I(X;Y) = 0")
    if weak_independence(joint):
        raise WeaklyIndependent("X is weakly independent of Y; g_0 > 0")
    rev = _reverse_channel(joint)
    out = []
    for j, label in enumerate(joint.y_labels):
        d = kl_divergence(rev.rows[j], joint.px)
        num = -math.log2(joint.py[j])
        out.append(math.inf if d <= 0 else num / d)
    return out


def slope_bound_at_zero(joint: JointDistribution):
    """``max_y -log2 P_Y(y) / D(P_{X|Y}(.|y) || P_X)`` and the maximizing ``y``
    (smallest index among ties)."""
    r = _ratios(joint)
    top = max(r)
    idx = next(i for i, v in enumerate(r) if v >= top - 1e-12 * max(1.0, abs(top)))
    return top, joint.y_labels[idx]


def linearity_test(joint: JointDistribution, tol: float = 1e-9) -> LinearityVerdict:
    """Decide whether ``g_eps`` can be the straight line ``eps H(Y)/I(X;Y)``.

    ``NotLinear`` when the per-symbol ratios of :func:`slope_bound_at_zero`
    differ; for BISO reverse channels the verdict is ``Linear`` exactly when
    ``Y`` is uniform.
    """
    r = _ratios(joint)
    ratios = dict(zip(joint.y_labels, r))
    finite = [v for v in r if math.isfinite(v)]
    if len(finite) < len(r) or max(r) - min(r) > tol:
        verdict = "NotLinear"
    else:
        verdict = "LinearPossible"
    if joint.shape[1] == 2 and detect_biso(_reverse_channel(joint)):
        verdict = "Linear" if abs(joint.py[0] - 0.5) <= tol else "NotLinear"
    return LinearityVerdict(verdict, ratios)


def biso_divergence_ratio(p, pairing, lam: float):
    """For ``Q = P o pairing`` and ``R_l = l P + (1 - l) Q`` return
    ``(D(P||R_{1-l}) / D(P||R_l), log(1-l)/log(l))``."""
    p = np.asarray(p, dtype=float)
    q = p[np.asarray(pairing)]
    if not 0.0 < lam < 1.0:
        raise OutOfRange("lambda must lie in (0,1)")
    num = kl_divergence(p, (1 - lam) * p + lam * q)
    den = kl_divergence(p, lam * p + (1 - lam) * q)
    return num / den, math.log(1 - lam) / math.log(lam)
