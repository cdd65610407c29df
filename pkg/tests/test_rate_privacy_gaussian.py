import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from privex.errors import (
    EpsilonAtOrAboveMI,
    EpsilonAtOrAboveRho2,
    EpsilonOutOfRange,
    InputError,
    OutOfRange,
    TruncationInsufficient,
)
from privex.rate_privacy_gaussian import (
    GaussianPair,
    QuantizerConfig,
    additive_mi,
    additive_mmse,
    additive_rho2,
    analytic_tail_bound,
    comparison_rows,
    comparison_to_csv,
    convergence_report,
    g_eps_M,
    g_gaussian,
    g_hat_gaussian,
    gamma_hat,
    gamma_star,
    mmse_lower_bound,
    mutual_info_quantized,
    quantized_cell_probs,
    quantized_entropy,
    sweep_table,
    sweep_to_csv,
)

pairs = st.builds(GaussianPair, st.floats(0.05, 0.95), st.floats(0.2, 5.0))


def test_pair_validation():
    with pytest.raises(OutOfRange):
        GaussianPair(1.0)
    with pytest.raises(OutOfRange):
        GaussianPair(0.5, -1.0)
    with pytest.raises(InputError):
        QuantizerConfig(M=0)


def test_g_gaussian_examples():
    p = GaussianPair(0.75)
    assert g_gaussian(p, 0.0) == 0.0
    assert g_gaussian(p, 0.5) == pytest.approx(0.5 * math.log2(3), abs=1e-12)
    vals = [g_gaussian(p, p.mutual_information - d) for d in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 5
    with pytest.raises(EpsilonAtOrAboveMI):
        g_gaussian(p, p.mutual_information)


def test_g_hat_examples():
    p = GaussianPair(0.5)
    assert g_hat_gaussian(p, 0.0) == 0.0
    assert g_hat_gaussian(p, 0.25) == pytest.approx(0.5, abs=1e-12)
    assert g_hat_gaussian(p, 0.4) == pytest.approx(0.5 * math.log2(5), abs=1e-12)
    with pytest.raises(EpsilonAtOrAboveRho2):
        g_hat_gaussian(p, 0.5)


def test_gamma_star_examples():
    p = GaussianPair(0.75)
    assert gamma_star(p, 0.5) ** 2 == pytest.approx(0.5, abs=1e-12)
    assert gamma_star(p, p.mutual_information * (1 - 1e-9)) < 1e-3
    assert gamma_star(p, 1e-9) > 1e3
    with pytest.raises(EpsilonOutOfRange):
        gamma_star(p, 0.0)


def test_mmse_lower_bound_examples():
    p = GaussianPair(0.75, 2.0)
    assert mmse_lower_bound(p, 0.0) == pytest.approx(2.0)
    assert mmse_lower_bound(p, 0.5) == pytest.approx(2.0 / 3, abs=1e-12)
    assert mmse_lower_bound(p, p.mutual_information * (1 - 1e-12)) < 1e-6


@given(pairs, st.floats(0.01, 0.99))
def test_gamma_star_meets_constraint(p, frac):
    eps = frac * p.mutual_information
    g = gamma_star(p, eps)
    ixz, iyz = additive_mi(p, g)
    assert ixz == pytest.approx(eps, abs=1e-10)
    assert iyz == pytest.approx(g_gaussian(p, eps), abs=1e-9)
    assert additive_mmse(p, g) == pytest.approx(mmse_lower_bound(p, eps), rel=1e-9)


@given(pairs, st.floats(0.01, 0.99))
def test_gamma_hat_meets_constraint(p, frac):
    eps = frac * p.rho2
    g = gamma_hat(p, eps)
    assert additive_rho2(p, g) == pytest.approx(eps, abs=1e-12)
    assert additive_mi(p, g)[1] == pytest.approx(g_hat_gaussian(p, eps), abs=1e-9)


def test_closed_forms_are_convex():
    p = GaussianPair(0.6)
    for f, top in ((g_gaussian, p.mutual_information), (g_hat_gaussian, p.rho2)):
        v = [f(p, e) for e in np.linspace(0, 0.95 * top, 20)]
        assert all(0.5 * (a + c) > b for a, b, c in zip(v, v[1:], v[2:]))


def test_cell_probs_examples():
    p = GaussianPair(0.5)
    cp = quantized_cell_probs(p, 0.0, ("y", 0.3), QuantizerConfig(M=3))
    assert cp.as_dict() == {math.floor(0.3 * 8): 1.0}
    cp = quantized_cell_probs(p, 50.0, None, QuantizerConfig(M=1))
    peak = 2.0 ** -1 / math.sqrt(2 * math.pi * (1 + 2500))
    assert len(cp.k) > 100 and cp.p.max() <= peak * (1 + 1e-6)
    for cond in (None, ("x", 0.7), ("y", -1.2)):
        cp = quantized_cell_probs(p, 0.8, cond)
        assert cp.p.sum() == pytest.approx(1.0, abs=1e-10)
        assert cp.tail < 1e-10


def test_cell_probs_match_scipy():
    p = GaussianPair(0.5, 2.0)
    cp = quantized_cell_probs(p, 0.5, ("x", 1.0), QuantizerConfig(M=2))
    mu, s = math.sqrt(0.5 * 2.0), math.sqrt(0.5 * 2.0 + 0.25)
    ref = stats.norm.cdf((cp.k + 1) / 4, mu, s) - stats.norm.cdf(cp.k / 4, mu, s)
    np.testing.assert_allclose(cp.p, ref, atol=1e-15)


def test_fixed_truncation_too_small():
    with pytest.raises(TruncationInsufficient):
        quantized_cell_probs(GaussianPair(0.5), 1.0, None, QuantizerConfig(M=1, k_trunc=2))


def test_analytic_tail_bound_is_a_valid_but_loose_bound():
    p = GaussianPair(0.5)
    cp = quantized_cell_probs(p, 1.0, None, QuantizerConfig(M=2))
    K = 4
    exact = sum(pk for k, pk in zip(cp.k, cp.p) if abs(k) > K) + cp.tail
    assert analytic_tail_bound(p, 1.0, 2, K) >= exact


def quad_mutual_info_yz(p, gamma, M):
    """I(Y; Q_M(Y + gamma N)) by adaptive quadrature over y."""
    d = 2.0 ** -M
    k = np.arange(-400, 400)
    s_z = math.sqrt(p.var_y + gamma ** 2)
    pz = stats.norm.cdf((k + 1) * d, 0, s_z) - stats.norm.cdf(k * d, 0, s_z)
    hz = -np.sum(pz[pz > 0] * np.log2(pz[pz > 0]))

    def cond_h(y):
        q = stats.norm.cdf((k + 1) * d, y, gamma) - stats.norm.cdf(k * d, y, gamma)
        q = q[q > 0]
        return -np.sum(q * np.log2(q)) * stats.norm.pdf(y, 0, p.sigma)

    hzy = integrate.quad(cond_h, -12 * p.sigma, 12 * p.sigma, limit=400, epsabs=1e-11)[0]
    return hz - hzy


@pytest.mark.parametrize("M,gamma", [(1, 0.7), (2, 0.2), (3, 1.5)])
def test_quantized_information_matches_quadrature(M, gamma):
    p = GaussianPair(0.5, 1.3)
    _, iyz = mutual_info_quantized(p, gamma, M)
    assert iyz == pytest.approx(quad_mutual_info_yz(p, gamma, M), abs=1e-7)


def test_quantized_information_examples():
    p = GaussianPair(0.5)
    _, iyz = mutual_info_quantized(p, 1.0, 8)
    assert iyz == pytest.approx(0.5, abs=0.01)
    ixz, iyz = mutual_info_quantized(p, 1e3, 4)
    assert ixz < 1e-5 and iyz < 1e-5


@given(st.floats(0.05, 20.0), st.integers(1, 4))
def test_quantized_data_processing(gamma, M):
    p = GaussianPair(0.5)
    ixz, iyz = mutual_info_quantized(p, gamma, M)
    u_xz, u_yz = additive_mi(p, gamma)
    assert ixz <= iyz + 1e-9
    assert iyz <= u_yz + 1e-9 and ixz <= u_xz + 1e-9


def test_quantized_entropy_refinement():
    # refining by one bit adds at most one bit of entropy
    p = GaussianPair(0.5)
    h = [quantized_entropy(p, 0.6, M) - M for M in (1, 2, 3, 4, 5)]
    assert all(b <= a + 1e-10 for a, b in zip(h, h[1:]))


def test_g_eps_M_examples():
    p = GaussianPair(0.5)
    value, gamma = g_eps_M(p, 0.2, 4)
    assert value <= g_gaussian(p, 0.2) + 1e-6
    assert mutual_info_quantized(p, gamma, 4)[0] <= 0.2 + 1e-12
    near = 0.999 * p.mutual_information
    assert g_eps_M(p, near, 6)[0] > 0.5 * g_gaussian(p, near)
    with pytest.raises(EpsilonOutOfRange):
        g_eps_M(p, p.mutual_information, 4)


def test_convergence_report():
    p = GaussianPair(0.5)
    rep = convergence_report(p, 0.2, [1, 2, 4])
    assert rep.g_eps == pytest.approx(g_gaussian(p, 0.2))
    assert rep.entropy_nonincreasing
    assert rep.gaps[-1] < rep.gaps[0]
    single = convergence_report(p, 0.2, [3])
    assert len(single.rows) == 1 and single.entropy_nonincreasing
    with pytest.raises(InputError):
        convergence_report(p, 0.2, [4, 2])


def test_sweep_and_comparison_csv():
    p = GaussianPair(0.5)
    rows = sweep_table(p, 0.2, [1, 2])
    text = sweep_to_csv(rows)
    assert text.splitlines()[0] == "M,gamma,i_xz,i_yz"
    assert len(text.splitlines()) == len(rows) + 1
    grid = [0.0, 0.2, p.mutual_information]
    out = comparison_rows(p, grid, 2)
    assert out[0][3] == 0.0 and out[-1][1] == math.inf and out[-1][3] is None
    assert comparison_to_csv(p, [0.5]).splitlines()[1].startswith("0.5,")
