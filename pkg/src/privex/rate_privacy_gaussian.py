"""Rate-privacy for jointly Gaussian ``(X, Y)`` and quantized Gaussian-noise filters.

The filter family is ``Z^M_gamma = Q_M(Y + gamma N)`` with ``N ~ N(0,1)``
independent and ``Q_M(t) = 2^-M floor(2^M t)``; cell ``k`` is
``[k 2^-M, (k+1) 2^-M)``. ``X`` is taken standardized, so
``Y | X=x ~ N(rho sqrt(var_y) x, (1 - rho^2) var_y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import erfc, ndtr

from .errors import (
    EpsilonAtOrAboveMI,
    EpsilonAtOrAboveRho2,
    EpsilonOutOfRange,
    InputError,
    NoFeasibleGamma,
    OutOfRange,
    QuadratureNotConverged,
    TruncationInsufficient,
)
from .serialization import csv_table


@dataclass(frozen=True)
class GaussianPair:
    """Jointly Gaussian ``(X, Y)`` described by ``rho^2`` and ``var(Y)``."""

    rho2: float
    var_y: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.rho2 < 1.0:
            raise OutOfRange(f"rho2={self.rho2} must lie strictly between 0 and 1")
        if not self.var_y > 0.0 or not math.isfinite(self.var_y):
            raise OutOfRange(f"var_y={self.var_y} must be positive")

    @property
    def mutual_information(self) -> float:
        return -0.5 * math.log2(1.0 - self.rho2)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.var_y)


@dataclass(frozen=True)
class QuantizerConfig:
    """Settings for the quantized filter family.

    Attributes
    ----------
    M : int
        Quantizer accuracy in bits.
    k_trunc : int or None
        Fixed truncation radius in cells around the mean; ``None`` picks it
        per distribution so that the tail mass is below ``tail_mass``.
    tail_mass : float
        Certified bound on the discarded probability (at most 1e-10).
    nodes : int
        Gauss-Hermite nodes; the result is checked against twice as many.
    quad_tol : float
        Agreement required between the two quadratures.
    gamma_min, gamma_max, gamma_points, refine_points
        Log-spaced noise grid ``[gamma_min, gamma_max] * sqrt(var_y)`` and the
        number of points in the refinement around the best grid point.
    """

    M: int = 8
    k_trunc: Optional[int] = None
    tail_mass: float = 1e-15
    nodes: int = 64
    quad_tol: float = 1e-6
    gamma_min: float = 1e-3
    gamma_max: float = 1e3
    gamma_points: int = 200
    refine_points: int = 20

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise InputError(f"M={self.M} must be a positive integer")
        if not 0.0 < self.tail_mass <= 1e-10:
            raise InputError("tail_mass must lie in (0, 1e-10]")
        if self.nodes < 2:
            raise InputError("nodes must be >= 2")

    def gamma_grid(self, pair: GaussianPair) -> np.ndarray:
        return pair.sigma * np.logspace(math.log10(self.gamma_min), math.log10(self.gamma_max),
                                        self.gamma_points)


# ---------------------------------------------------------------- closed forms

def _check_eps(pair: GaussianPair, eps: float):
    if not math.isfinite(eps) or eps < 0:
        raise EpsilonOutOfRange(f"eps={eps} must be >= 0")


def g_gaussian(pair: GaussianPair, eps: float) -> float:
    """``g_eps = 1/2 log2(rho^2 / (2^{-2 eps} + rho^2 - 1))`` for ``eps < I(X;Y)``."""
    _check_eps(pair, eps)
    den = 2.0 ** (-2.0 * eps) + pair.rho2 - 1.0
    if den <= 0:
        raise EpsilonAtOrAboveMI(f"eps={eps} >= I(X;Y)={pair.mutual_information:.12g}")
    return max(0.5 * math.log2(pair.rho2 / den), 0.0)


def g_hat_gaussian(pair: GaussianPair, eps: float) -> float:
    """``g_hat_eps = 1/2 log2(rho^2 / (rho^2 - eps))`` for ``eps < rho^2``."""
    _check_eps(pair, eps)
    if eps >= pair.rho2:
        raise EpsilonAtOrAboveRho2(f"eps={eps} >= rho^2={pair.rho2}")
    return 0.5 * math.log2(pair.rho2 / (pair.rho2 - eps))


def gamma_star(pair: GaussianPair, eps: float) -> float:
    """Smallest noise level ``gamma`` with ``I(X; Y + gamma N) <= eps``."""
    if not 0.0 < eps < pair.mutual_information:
        raise EpsilonOutOfRange(f"eps={eps} outside (0, I(X;Y))")
    t = 2.0 ** (-2.0 * eps)
    return math.sqrt((t + pair.rho2 - 1.0) / (1.0 - t) * pair.var_y)


def gamma_hat(pair: GaussianPair, eps: float) -> float:
    """Smallest ``gamma`` with ``rho^2(X; Y + gamma N) <= eps``."""
    if not 0.0 < eps < pair.rho2:
        raise EpsilonOutOfRange(f"eps={eps} outside (0, rho^2)")
    return math.sqrt((pair.rho2 - eps) * pair.var_y / eps)


def mmse_lower_bound(pair: GaussianPair, eps: float) -> float:
    """``var(Y) 2^{-2 g_eps}``: no filter within the leakage budget estimates
    ``Y`` better in mean square."""
    return pair.var_y * 2.0 ** (-2.0 * g_gaussian(pair, eps))


def additive_mi(pair: GaussianPair, gamma: float):
    """``(I(X;Z_gamma), I(Y;Z_gamma))`` for the unquantized ``Z = Y + gamma N``."""
    g2 = gamma * gamma
    if g2 == 0:
        return pair.mutual_information, math.inf
    i_yz = 0.5 * math.log2(1.0 + pair.var_y / g2)
    i_xz = 0.5 * math.log2((pair.var_y + g2) / ((1.0 - pair.rho2) * pair.var_y + g2))
    return i_xz, i_yz


def additive_rho2(pair: GaussianPair, gamma: float) -> float:
    """``rho^2(X; Y + gamma N) = rho^2 var_y / (var_y + gamma^2)``."""
    return pair.rho2 * pair.var_y / (pair.var_y + gamma * gamma)


def additive_mmse(pair: GaussianPair, gamma: float) -> float:
    """``mmse(Y | Y + gamma N) = var_y gamma^2 / (var_y + gamma^2)``."""
    return pair.var_y * gamma * gamma / (pair.var_y + gamma * gamma)


# ---------------------------------------------------------------- cell probabilities

@dataclass(frozen=True)
class CellProbs:
    """Probabilities ``p[i]`` of cells ``k[i]`` and the exact discarded mass."""

    k: np.ndarray
    p: np.ndarray
    tail: float
    tail_bound: float = math.nan

    def as_dict(self) -> dict:
        return {int(k): float(p) for k, p in zip(self.k, self.p)}


def _interval_mass(a, b):
    """``Phi(b) - Phi(a)`` without cancellation in the upper tail."""
    upper = a > 0
    return np.where(upper, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


def _radius(tail: float) -> float:
    r = 1.0
    while 2.0 * ndtr(-r) >= tail:
        r += 0.25
    return r


def _cells(mu: float, s: float, M: int, tail: float, k_trunc=None):
    delta = 2.0 ** -M
    if s == 0.0:
        return np.array([math.floor(mu / delta)]), np.array([1.0]), 0.0
    if k_trunc is None:
        r = _radius(tail)
        lo = math.floor((mu - r * s) / delta)
        hi = math.floor((mu + r * s) / delta)
    else:
        c = math.floor(mu / delta)
        lo, hi = c - k_trunc, c + k_trunc
    k = np.arange(lo, hi + 1)
    edges = np.arange(lo, hi + 2) * delta
    z = (edges - mu) / s
    p = _interval_mass(z[:-1], z[1:])
    rest = float(ndtr(z[0]) + ndtr(-z[-1]))
    return k, p, rest


def analytic_tail_bound(pair: GaussianPair, gamma: float, M: int, K: int) -> float:
    """Upper bound on ``sum_{|k| > K} p_k`` for the unconditional cell
    probabilities, from ``p_k <= C 2^{M+2} / m^2 + gamma 2^{M+1} / (m sqrt(2 pi))
    exp(-m^2 / (2^{2M+3} gamma^2))`` with ``C = 2 sigma / (e sqrt(2 pi))``
    (the Gaussian density is at most ``C / y^2``) and ``m`` the distance in
    cells from the origin (``m = |k| - 1`` for negative ``k``).
    """
    K = int(K)
    if K < 2:
        return math.inf
    c = 2.0 * pair.sigma / (math.e * math.sqrt(2.0 * math.pi))
    power = c * 2.0 ** (M + 2) / (K - 1)          # sum_{m >= K} 1/m^2 <= 1/(K-1)
    if gamma > 0:
        width = 2.0 ** (2 * M + 3) * gamma * gamma
        noise = (gamma * 2.0 ** (M + 1) / math.sqrt(2.0 * math.pi) / K
                 * math.sqrt(math.pi * width) / 2.0 * erfc((K - 1) / math.sqrt(width)))
    else:
        noise = 0.0
    return 2.0 * (power + noise)


def quantized_cell_probs(pair: GaussianPair, gamma: float, conditioning=None,
                         config: QuantizerConfig | None = None) -> CellProbs:
    """Cell probabilities of ``Q_M(Y + gamma N)``.

    Parameters
    ----------
    conditioning : None, ("y", value) or ("x", value)
        ``None`` for the unconditional law ``N(0, var_y + gamma^2)``;
        ``("y", y)`` for ``N(y, gamma^2)``; ``("x", x)`` with standardized ``x``
        for ``N(rho sqrt(var_y) x, (1 - rho^2) var_y + gamma^2)``.

    Raises
    ------
    TruncationInsufficient
        If a fixed ``k_trunc`` leaves more than 1e-10 of the mass outside.
    """
    config = config or QuantizerConfig()
    if not gamma >= 0 or not math.isfinite(gamma):
        raise OutOfRange(f"gamma={gamma} must be >= 0")
    g2 = gamma * gamma
    if conditioning is None:
        mu, s2 = 0.0, pair.var_y + g2
    else:
        kind, value = conditioning
        if not math.isfinite(value):
            raise OutOfRange("conditioning value must be finite")
        if kind == "y":
            mu, s2 = float(value), g2
        elif kind == "x":
            mu = math.sqrt(pair.rho2 * pair.var_y) * float(value)
            s2 = (1.0 - pair.rho2) * pair.var_y + g2
        else:
            raise InputError("conditioning must be None, ('x', value) or ('y', value)")
    k, p, rest = _cells(mu, math.sqrt(s2), config.M, config.tail_mass, config.k_trunc)
    if rest >= 1e-10:
        raise TruncationInsufficient(f"discarded mass {rest:.3g} exceeds 1e-10")
    bound = math.nan
    if conditioning is None:
        bound = analytic_tail_bound(pair, gamma, config.M, int(max(abs(k[0]), abs(k[-1]))))
    return CellProbs(k, p, rest, bound)


# ---------------------------------------------------------------- entropies

def _cell_entropy(mu: np.ndarray, s: float, M: int, tail: float) -> np.ndarray:
    """``H(Q_M(N(mu, s^2)))`` in bits for each mean in ``mu``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if s == 0.0:
        return np.zeros_like(mu)
    delta = 2.0 ** -M
    r = _radius(tail)
    n_cells = int(math.ceil(2 * r * s / delta)) + 2
    out = np.empty_like(mu)
    chunk = max(1, int(4_000_000 // n_cells))
    offs = np.arange(n_cells + 1)
    for i in range(0, mu.size, chunk):
        m = mu[i:i + chunk]
        lo = np.floor((m - r * s) / delta)
        z = ((lo[:, None] + offs[None, :]) * delta - m[:, None]) / s
        p = _interval_mass(z[:, :-1], z[:, 1:])
        safe = np.where(p > 1e-300, p, 1.0)
        out[i:i + chunk] = -np.sum(np.where(p > 1e-300, p * np.log2(safe), 0.0), axis=1)
    return out


@lru_cache(maxsize=16)
def _hermite(n: int):
    t, w = hermegauss(n)
    return t, w / math.sqrt(2.0 * math.pi)


def _periodic_average(tau: float, s: float, M: int, tail: float, panels: int):
    """``E[h(mu)]`` for ``mu ~ N(0, tau^2)`` using that ``h`` has period
    ``2^-M``: integrate ``h`` over one period against the folded density."""
    delta = 2.0 ** -M
    x, w = leggauss(8)
    a = np.arange(panels) * delta / panels
    u = (a[:, None] + (x[None, :] + 1.0) * delta / (2 * panels)).ravel()
    wu = np.tile(w, panels) * delta / (2 * panels)
    jmax = int(math.ceil(12.0 * tau / delta)) + 2
    j = np.arange(-jmax, jmax + 1)
    folded = np.zeros_like(u)
    for jj in np.array_split(j, max(1, j.size // 512)):
        t = (u[:, None] + jj[None, :] * delta) / tau
        folded += np.exp(-0.5 * t * t).sum(axis=1)
    folded /= tau * math.sqrt(2.0 * math.pi)
    return float(np.sum(wu * folded * _cell_entropy(u, s, M, tail)))


def expected_cell_entropy(tau: float, s: float, M: int, config: QuantizerConfig) -> float:
    """``E[H(Q_M(N(mu, s^2)))]`` over ``mu ~ N(0, tau^2)``.

    When ``s >= 3 * 2^-M`` the inner entropy does not depend on the position
    of ``mu`` within a cell to double precision, so one evaluation suffices.
    Otherwise Gauss-Hermite quadrature is checked against twice the nodes, with
    a fallback to integration over one quantizer period.
    """
    delta = 2.0 ** -M
    tail = config.tail_mass
    if s >= 3.0 * delta or tau == 0.0:
        return float(_cell_entropy(np.array([0.0]), s, M, tail)[0])
    vals = []
    for n in (config.nodes, 2 * config.nodes):
        t, w = _hermite(n)
        vals.append(float(w @ _cell_entropy(tau * t, s, M, tail)))
    if abs(vals[1] - vals[0]) <= config.quad_tol:
        return vals[1]
    panels = int(min(max(8, math.ceil(4 * delta / max(s, 1e-300))), 4096))
    a = _periodic_average(tau, s, M, tail, panels)
    b = _periodic_average(tau, s, M, tail, 2 * panels)
    if abs(a - b) > config.quad_tol:
        raise QuadratureNotConverged(
            f"M={M}, s={s:.3g}: quadratures disagree by {abs(a - b):.3g}")
    return b


def quantized_entropy(pair: GaussianPair, gamma: float, M: int, config=None) -> float:
    """``H(Q_M(Y + gamma N))``."""
    config = config or QuantizerConfig()
    return float(_cell_entropy(np.array([0.0]), math.sqrt(pair.var_y + gamma * gamma), M,
                               config.tail_mass)[0])


def _i_xz(pair, gamma, M, config, hz=None):
    hz = quantized_entropy(pair, gamma, M, config) if hz is None else hz
    s = math.sqrt((1.0 - pair.rho2) * pair.var_y + gamma * gamma)
    tau = math.sqrt(pair.rho2 * pair.var_y)
    return max(hz - expected_cell_entropy(tau, s, M, config), 0.0)


def _i_yz(pair, gamma, M, config, hz=None):
    hz = quantized_entropy(pair, gamma, M, config) if hz is None else hz
    return max(hz - expected_cell_entropy(pair.sigma, gamma, M, config), 0.0)


def mutual_info_quantized(pair: GaussianPair, gamma: float, M: int,
                          config: QuantizerConfig | None = None):
    """``(I(X; Z^M_gamma), I(Y; Z^M_gamma))`` in bits."""
    config = replace(config or QuantizerConfig(), M=M)
    if not gamma > 0:
        raise OutOfRange("gamma must be > 0")
    hz = quantized_entropy(pair, gamma, M, config)
    return _i_xz(pair, gamma, M, config, hz), _i_yz(pair, gamma, M, config, hz)


# ---------------------------------------------------------------- optimization over gamma

@dataclass
class SweepRow:
    M: int
    gamma: float
    i_xz: float
    i_yz: float       # nan when not evaluated (infeasible or pruned)


def _sweep(pair: GaussianPair, eps: float, M: int, config: QuantizerConfig, rows=None):
    """Maximize ``I(Y;Z^M_gamma)`` over feasible ``gamma``. Returns ``(value, gamma)``."""
    config = replace(config, M=M)
    rows = [] if rows is None else rows
    seen = {}

    def evaluate(gamma):
        if gamma in seen:
            return seen[gamma]
        hz = quantized_entropy(pair, gamma, M, config)
        ixz = _i_xz(pair, gamma, M, config, hz)
        iyz = _i_yz(pair, gamma, M, config, hz) if ixz <= eps else math.nan
        seen[gamma] = (ixz, iyz)
        rows.append(SweepRow(M, gamma, ixz, iyz))
        return ixz, iyz

    def scan(gammas, best):
        for g in gammas:
            # I(Y; Z^M) <= I(Y; Y + gamma N): skip points that cannot win
            if best is not None and additive_mi(pair, g)[1] <= best[0]:
                continue
            ixz, iyz = evaluate(g)
            if ixz <= eps and (best is None or iyz > best[0]):
                best = (iyz, g)
        return best

    grid = config.gamma_grid(pair)
    best = scan(grid, None)
    if best is None:
        raise NoFeasibleGamma(f"no gamma in [{grid[0]:.3g}, {grid[-1]:.3g}] has "
                              f"I(X;Z) <= {eps} at M={M}")
    i = int(np.searchsorted(grid, best[1]))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    best = scan(np.geomspace(lo, hi, config.refine_points), best)
    # pin the leakage constraint: bisect between the best point and the nearest
    # smaller infeasible gamma
    below = [g for g, (ixz, _) in seen.items() if g < best[1] and ixz > eps]
    if below:
        a, b = max(below), best[1]
        for _ in range(80):
            mid = math.sqrt(a * b)
            hz = quantized_entropy(pair, mid, M, config)
            if _i_xz(pair, mid, M, config, hz) <= eps:
                b = mid
            else:
                a = mid
            if b / a - 1.0 < 1e-13:
                break
        ixz, iyz = evaluate(b)
        if ixz <= eps and iyz > best[0]:
            best = (iyz, b)
    return best


def g_eps_M(pair: GaussianPair, eps: float, M: int, config: QuantizerConfig | None = None):
    """``sup I(Y; Z^M_gamma)`` over ``gamma`` with ``I(X; Z^M_gamma) <= eps``.

    Returns
    -------
    (float, float)
        The value and the maximizing ``gamma``.
    """
    if not 0.0 < eps < pair.mutual_information:
        raise EpsilonOutOfRange(f"eps={eps} outside (0, I(X;Y)={pair.mutual_information:.12g})")
    return _sweep(pair, eps, M, config or QuantizerConfig())


def sweep_table(pair: GaussianPair, eps: float, M_list, config: QuantizerConfig | None = None):
    """All evaluated ``(M, gamma, I(X;Z), I(Y;Z))`` rows of the sweeps, sorted."""
    config = config or QuantizerConfig()
    rows = []
    for M in M_list:
        _sweep(pair, eps, M, config, rows)
    return sorted(rows, key=lambda r: (r.M, r.gamma))


@dataclass(frozen=True)
class ConvergenceRow:
    M: int
    gamma: float
    value: float
    gap: float
    signed_gap: float
    entropy_minus_M: float


@dataclass(frozen=True)
class ConvergenceReport:
    g_eps: float
    gamma_ref: float
    rows: tuple
    entropy_nonincreasing: bool
    gaps_nonincreasing: bool = True

    @property
    def gaps(self):
        return [r.gap for r in self.rows]


def convergence_report(pair: GaussianPair, eps: float, M_list,
                       config: QuantizerConfig | None = None, tol: float = 1e-8
                       ) -> ConvergenceReport:
    """Compare ``g_{eps,M}`` with ``g_eps`` for each ``M``.

    Also reports ``H(Q_M(Z_gamma)) - M`` at the ``gamma`` chosen for the
    largest ``M``; refining the quantizer can add at most one bit per extra bit
    of accuracy, so this column must be non-increasing.

    ``gaps_nonincreasing`` is a trend diagnostic only: convergence in ``M`` is
    guaranteed, monotonicity is not, and gaps at round-off level can wobble.
    """
    config = config or QuantizerConfig()
    M_list = list(M_list)
    if any(b <= a for a, b in zip(M_list, M_list[1:])):
        raise InputError("M_list must be strictly ascending")
    exact = g_gaussian(pair, eps)
    results = [g_eps_M(pair, eps, M, config) for M in M_list]
    gamma_ref = results[-1][1]
    rows = []
    for M, (value, gamma) in zip(M_list, results):
        h = quantized_entropy(pair, gamma_ref, M, config) - M
        rows.append(ConvergenceRow(M, gamma, value, abs(value - exact), value - exact, h))
    ok = all(b.entropy_minus_M <= a.entropy_minus_M + tol for a, b in zip(rows, rows[1:]))
    trend = all(b.gap <= a.gap + tol for a, b in zip(rows, rows[1:]))
    return ConvergenceReport(exact, gamma_ref, tuple(rows), ok, trend)


# ---------------------------------------------------------------- CSV

def sweep_to_csv(rows) -> str:
    return csv_table(["M", "gamma", "i_xz", "i_yz"],
                     [(str(r.M), r.gamma, r.i_xz, "" if math.isnan(r.i_yz) else r.i_yz)
                      for r in rows])


def comparison_rows(pair: GaussianPair, eps_grid, M: int | None = None,
                    config: QuantizerConfig | None = None):
    """Rows ``(eps, g, g_hat, g_eps_M)``; ``inf`` past the divergence points and
    ``None`` for ``g_eps_M`` when ``M`` is not given or ``eps`` is outside
    ``(0, I(X;Y))``."""
    rows = []
    for eps in eps_grid:
        g = g_gaussian(pair, eps) if eps < pair.mutual_information else math.inf
        gh = g_hat_gaussian(pair, eps) if eps < pair.rho2 else math.inf
        gm = None
        if M is not None and 0.0 < eps < pair.mutual_information:
            gm = g_eps_M(pair, eps, M, config)[0]
        elif M is not None and eps == 0.0:
            gm = 0.0
        rows.append((float(eps), g, gh, gm))
    return rows


def comparison_to_csv(pair: GaussianPair, eps_grid, M: int | None = None,
                      config: QuantizerConfig | None = None) -> str:
    rows = comparison_rows(pair, eps_grid, M, config)
    return csv_table(["epsilon", "g_closed", "g_hat_closed", "g_eps_M"],
                     [(e, g, gh, "" if gm is None else gm) for e, g, gh, gm in rows])
