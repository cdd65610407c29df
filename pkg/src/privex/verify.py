"""Randomized invariant checks behind ``privex verify``.

Each suite returns a list of :class:`Check` results; a check fails when any
sampled instance violates the property beyond its tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import dependence as dep
from . import filters as flt
from . import rate_privacy_discrete as rpd
from . import rate_privacy_gaussian as rpg
from .prob_core import (
    Channel,
    binary_conv,
    binary_entropy,
    compose,
    conditional_entropy,
    entropy,
    joint_entropy,
    joint_from_channel,
    kl_divergence,
    mutual_information,
    mutual_information_matrix,
    validate_joint,
)
from .structure import biso_pairing


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: str = ""


def random_joint(rng, nx, ny, alpha=1.0):
    return validate_joint(rng.dirichlet(np.full(nx * ny, alpha)).reshape(nx, ny))


def random_channel(rng, n_in, n_out, alpha=1.0, in_labels=None):
    return Channel(rng.dirichlet(np.full(n_out, alpha), size=n_in), in_labels)


def _check(suite, name, worst, tol, what="worst violation"):
    return Check(suite, name, bool(worst <= tol), f"{what} {worst:.3g} (tol {tol:g})")


# ---------------------------------------------------------------- prob_core

def suite_prob_core(rng, n=50):
    chain = dec = dpi = assoc = 0.0
    for _ in range(n):
        nx, ny = rng.integers(2, 6, size=2)
        j = random_joint(rng, nx, ny)
        chain = max(chain, abs(joint_entropy(j) - entropy(j.px) - conditional_entropy(j)))
        rev = j.pxy / j.py[None, :]
        s = sum(j.py[y] * kl_divergence(rev[:, y], j.px) for y in range(j.shape[1]))
        dec = max(dec, abs(mutual_information(j) - s))
        f = random_channel(rng, j.shape[1], int(rng.integers(1, 6)), 0.5, j.y_labels)
        dpi = max(dpi, mutual_information_matrix(j.pxy @ f.rows) - mutual_information(j))
        a = random_channel(rng, 3, 4)
        b = random_channel(rng, 4, 2, in_labels=a.out_labels)
        c = random_channel(rng, 2, 3, in_labels=b.out_labels)
        assoc = max(assoc, np.abs(compose(compose(a, b), c).rows
                                  - compose(a, compose(b, c)).rows).max())
    return [_check("prob_core", "chain rule H(X,Y)=H(X)+H(Y|X)", chain, 1e-10),
            _check("prob_core", "I(X;Y) = sum_y P(y) D(P_X|y || P_X)", dec, 1e-10),
            _check("prob_core", "data processing I(X;Z) <= I(X;Y)", dpi, 1e-12),
            _check("prob_core", "compose is associative", assoc, 1e-12)]


# ---------------------------------------------------------------- dependence

def ace_correlation(pxy, rng, starts=20, iters=500):
    """Alternating conditional expectations: sup E[f(X) g(Y)] over zero-mean
    unit-variance f, g."""
    pxy = np.asarray(pxy)
    px, py = pxy.sum(1), pxy.sum(0)
    best = 0.0
    for _ in range(starts):
        g = rng.standard_normal(pxy.shape[1])
        for _ in range(iters):
            g = g - py @ g
            g = g / math.sqrt(py @ g ** 2)
            f = (pxy @ g) / px
            f = f - px @ f
            nf = math.sqrt(px @ f ** 2)
            if nf < 1e-300:
                break
            f = f / nf
            g = (pxy.T @ f) / py
        g = g - py @ g
        ng = math.sqrt(py @ g ** 2)
        if ng > 0:
            best = max(best, float(f @ pxy @ (g / ng)))
    return best


def poincare_by_minimization(joint, rng, starts=10):
    """``min_f mmse(f(X)|Y) / var(f(X))`` by BFGS over f."""
    def ratio(f):
        try:
            return dep.mmse_discrete(f, joint) / float(joint.px @ (f - joint.px @ f) ** 2)
        except Exception:
            return 1.0
    best = 1.0
    for _ in range(starts):
        res = minimize(ratio, rng.standard_normal(joint.shape[0]), method="BFGS",
                       options={"gtol": 1e-12})
        best = min(best, float(res.fun))
    return best


def suite_dependence(rng, n=30):
    spec = sdpi = tight = poin = pear = 0.0
    for _ in range(n):
        j = random_joint(rng, 3, 3)
        spec = max(spec, abs(dep.maximal_correlation(j) - ace_correlation(j.pxy, rng)))
        # X - Y - Z chain
        f = random_channel(rng, 3, 3, 1.0, j.y_labels)
        pxz = validate_joint(j.pxy @ f.rows)
        pyz = validate_joint(j.py[:, None] * f.rows)
        sdpi = max(sdpi, dep.maximal_correlation(pxz)
                   - dep.maximal_correlation(j) * dep.maximal_correlation(pyz))
        # backward channel X - Y - X'
        back = (j.pxy / j.py[None, :]).T
        pxx = validate_joint(j.pxy @ back)
        tight = max(tight, abs(dep.maximal_correlation(j) ** 2 - dep.maximal_correlation(pxx)))
        vals = rng.standard_normal(3), rng.standard_normal(3)
        pear = max(pear, abs(dep.pearson_correlation(j, *vals)) - dep.maximal_correlation(j))
    for _ in range(max(n // 3, 3)):
        j = random_joint(rng, 3, 3)
        poin = max(poin, abs(dep.poincare_constant(j) - poincare_by_minimization(j, rng)))
    return [_check("dependence", "spectral rho_m equals ACE brute force", spec, 1e-6),
            _check("dependence", "strong DPI rho(X;Z) <= rho(X;Y) rho(Y;Z)", sdpi, 1e-9),
            _check("dependence", "rho_m(X;X') = rho_m(X;Y)^2 for the backward chain", tight, 1e-8),
            _check("dependence", "Poincare constant equals min mmse/var", poin, 1e-6),
            _check("dependence", "rho_m >= |Pearson|", pear, 1e-12)]


# ---------------------------------------------------------------- filters

def suite_filters(rng, n=30):
    order = wrap = 0.0
    for _ in range(n):
        j = random_joint(rng, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        info = mutual_information(j)
        eps = rng.uniform(0, info)
        k = j.y_labels[int(rng.integers(j.shape[1]))]
        built = [flt.erasure_filter(j, eps), flt.singleton_probe_filter(j, k, rng.uniform(0.01, 1)),
                 random_channel(rng, j.shape[1], 3, 0.5, j.y_labels)]
        for fch in built:
            r = flt.audit_filter(j, fch)
            order = max(order, -r.i_xz, r.i_xz - r.i_yz, r.i_yz - entropy(j.py))
        fch = built[2]
        delta = rng.uniform()
        a, b = flt.audit_filter(j, fch), flt.audit_filter(j, flt.erasure_wrapper(fch, delta))
        wrap = max(wrap, abs(b.i_xz - (1 - delta) * a.i_xz), abs(b.i_yz - (1 - delta) * a.i_yz),
                   abs(b.rho2_xz - (1 - delta) * a.rho2_xz))
    resid, mono = 0.0, True
    for delta, p in [(0.3, 0.4), (0.5, 0.5), (0.1, 0.2)]:
        top = (1 - delta) * binary_entropy(p)
        prev = 0.5 + 1e-12
        for eps in np.linspace(0, top, 15):
            a = flt.bec_bsc_filter_alpha(eps, delta, p)
            resid = max(resid, abs((1 - delta) * (binary_entropy(binary_conv(a, p))
                                                  - binary_entropy(a)) - eps))
            mono = mono and a <= prev
            prev = a
    # probe on a symbol whose posterior equals P_X leaks nothing
    px = np.array([0.3, 0.7])
    pxy = np.column_stack([px * 0.4, [0.15, 0.1], [0.03, 0.32]])
    j = validate_joint(pxy)
    leak = flt.audit_filter(j, flt.singleton_probe_filter(j, "0", 0.7)).i_xz
    return [_check("filters", "0 <= I(X;Z) <= I(Y;Z) <= H(Y)", order, 1e-9),
            _check("filters", "erasure wrapper scales all leakages by 1-delta", wrap, 1e-9),
            _check("filters", "BEC filter crossover residual", resid, 1e-9),
            Check("filters", "BEC filter crossover decreasing in eps", mono),
            _check("filters", "probe on an uninformative symbol gives Z indep. X", leak, 1e-12)]


# ---------------------------------------------------------------- discrete

def suite_discrete(rng, n=12, config=None):
    config = config or rpd.SolverConfig(restarts=12, max_iters=120)
    sand = feas = 0.0
    for i in range(n):
        j = random_joint(rng, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        info = mutual_information(j)
        for eps in rng.uniform(0, info, size=2):
            pt = rpd.solve_g(j, eps, config)
            sand = max(sand, pt.lower - pt.value, pt.value - pt.upper)
            feas = max(feas, flt.audit_filter(j, pt.filter).i_xz - eps)
    checks = [_check("discrete", "bounds sandwich", sand, 1e-6),
              _check("discrete", "certificates are feasible", feas, 1e-9)]

    conc = ratio = 0.0
    j = joint_from_channel([0.3, 0.7], random_channel(rng, 2, 3))
    info = mutual_information(j)
    grid = np.linspace(0, info, 9)
    pts = rpd.curve_g(j, grid, config)
    vals = [p.value for p in pts]
    for a, b, c in zip(vals, vals[1:], vals[2:]):
        conc = max(conc, 0.5 * (a + c) - b)
    r = [v / e for v, e in zip(vals[1:], grid[1:])]
    ratio = max([b - a for a, b in zip(r, r[1:])] + [0.0])
    checks += [_check("discrete", "curve concavity (midpoint)", conc, 5e-3),
               _check("discrete", "value/eps non-increasing", ratio, 5e-3)]

    bad = 0
    for _ in range(n):
        nx = int(rng.integers(2, 4))
        j = random_joint(rng, nx, nx + 1)
        if not (rpd.g0(j, config)[0] > 1e-3 and dep.weak_independence(j)):
            bad += 1
        jb = random_joint(rng, int(rng.integers(2, 5)), 2)
        if rpd.g0(jb, config)[0] > 1e-4 or dep.weak_independence(jb):
            bad += 1
    checks.append(Check("discrete", "g0 > 0 iff weakly independent", bad == 0,
                        f"{bad} mismatches"))

    worst = -math.inf
    for _ in range(100):
        p = random_biso_row(rng)
        pairing = p[1]
        for lam in (0.1, 0.3):
            lhs, rhs = rpd.biso_divergence_ratio(p[0], pairing, lam)
            worst = max(worst, lhs - rhs)
    checks.append(Check("discrete", "BISO divergence-ratio inequality", worst < 0,
                        f"max lhs - rhs {worst:.3g}"))

    slope = 0.0
    for a in (0.1, 0.25):
        from .prob_core import bsc
        jj = joint_from_channel([0.5, 0.5], bsc(a))
        if rpd.linearity_test(jj).verdict == "Linear":
            slope = max(slope, abs(rpd.slope_bound_at_zero(jj)[0]
                                   - entropy(jj.py) / mutual_information(jj)))
    checks.append(_check("discrete", "Linear verdict implies slope H(Y)/I", slope, 1e-9))

    ext = 0.0
    for _ in range(4):
        jj = joint_from_channel([0.5, 0.5], random_channel(rng, 2, 3))
        info = mutual_information(jj)
        eps = rng.uniform(0, info)
        ext = max(ext, eps / info - rpd.solve_g(jj, eps, config).value)
    checks.append(_check("discrete", "uniform binary X: g_eps >= eps/I", ext, 1e-6))
    return checks


def random_biso_row(rng, k=None):
    """Random row ``P`` over ``{-k..-1, 0, 1..k}`` and the pairing ``x -> -x``."""
    k = k or int(rng.integers(1, 4))
    p = rng.dirichlet(np.ones(2 * k + 1))
    pairing = list(range(2 * k, -1, -1))
    if rng.uniform() < 0.5:  # no zero symbol
        p = rng.dirichlet(np.ones(2 * k))
        pairing = list(range(2 * k - 1, -1, -1))
    assert biso_pairing(p, p[pairing]) is not None
    return p, pairing


# ---------------------------------------------------------------- gaussian

def suite_gaussian(rng, quick=False):
    checks = []
    conv = True
    for rho2 in (0.3, 0.75):
        pair = rpg.GaussianPair(rho2)
        grid = np.linspace(0, 0.95 * pair.mutual_information, 20)
        g = [rpg.g_gaussian(pair, e) for e in grid]
        conv &= all(0.5 * (a + c) > b for a, b, c in zip(g, g[1:], g[2:]))
        grid = np.linspace(0, 0.95 * rho2, 20)
        g = [rpg.g_hat_gaussian(pair, e) for e in grid]
        conv &= all(0.5 * (a + c) > b for a, b, c in zip(g, g[1:], g[2:]))
    checks.append(Check("gaussian", "closed forms strictly convex", conv))

    pair = rpg.GaussianPair(0.5)
    gammas = np.geomspace(0.05, 20, 8 if quick else 25)
    worst = 0.0
    for M in (2, 4):
        vals = [rpg.mutual_info_quantized(pair, g, M) for g in gammas]
        for (a, b), (c, d) in zip(vals, vals[1:]):
            worst = max(worst, c - a, d - b)
    checks.append(_check("gaussian", "quantized I non-increasing in gamma (diagnostic)",
                         worst, 1e-6))

    eps = 0.2
    exact = rpg.g_gaussian(pair, eps)
    over = max(rpg.g_eps_M(pair, eps, M)[0] - exact for M in ((2, 4) if quick else (1, 2, 4, 8)))
    checks.append(_check("gaussian", "g_eps_M <= g_eps + quadrature tolerance", over, 1e-6))

    mm = r2 = 0.0
    for rho2, var in ((0.5, 1.0), (0.75, 2.5), (0.2, 0.3)):
        p = rpg.GaussianPair(rho2, var)
        for e in np.linspace(0.05, 0.9, 5) * p.mutual_information:
            gs = rpg.gamma_star(p, e)
            mm = max(mm, abs(rpg.additive_mmse(p, gs) - rpg.mmse_lower_bound(p, e)))
        for e in np.linspace(0.05, 0.9, 5) * rho2:
            r2 = max(r2, abs(rpg.additive_rho2(p, rpg.gamma_hat(p, e)) - e))
    checks.append(_check("gaussian", "mmse at gamma* meets the lower bound", mm, 1e-10))
    checks.append(_check("gaussian", "rho^2(X;Z) at gamma_hat equals eps", r2, 1e-10))
    return checks


SUITES = {
    "prob_core": lambda rng, quick: suite_prob_core(rng, 15 if quick else 50),
    "dependence": lambda rng, quick: suite_dependence(rng, 10 if quick else 30),
    "filters": lambda rng, quick: suite_filters(rng, 10 if quick else 30),
    "discrete": lambda rng, quick: suite_discrete(rng, 4 if quick else 12),
    "gaussian": lambda rng, quick: suite_gaussian(rng, quick),
}


def run(suites=None, seed: int = 0, quick: bool = False):
    out = []
    for name in suites or SUITES:
        out += SUITES[name](np.random.default_rng([seed, len(name)]), quick)
    return out
