import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from privex.dependence import maximal_correlation, weak_independence
from privex.errors import (
    EpsilonOutOfRange,
    IndependentSources,
    InputError,
    RateUnachievable,
    WeaklyIndependent,
)
from privex.filters import audit_filter
from privex.prob_core import (
    Channel,
    bsc,
    conditional_entropy,
    entropy,
    joint_from_channel,
    mutual_information,
    mutual_information_matrix,
    validate_joint,
)
from privex.rate_privacy_discrete import (
    SolverConfig,
    biso_divergence_ratio,
    bounds_g,
    bounds_g_hat,
    closed_form,
    curve_g,
    curve_to_csv,
    dilution_outer,
    funnel_dual,
    g0,
    linearity_test,
    slope_bound_at_zero,
    solve_g,
    solve_g_hat,
)

from conftest import h2, joints

FAST = SolverConfig(restarts=12, max_iters=120)


def blahut_arimoto(W, iters=5000):
    """Capacity (bits) of the channel with rows W[x] = P(y|x)."""
    p = np.full(W.shape[0], 1.0 / W.shape[0])
    for _ in range(iters):
        q = p @ W
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(W > 0, W * np.log2(W / q), 0.0).sum(1)
        p = p * 2.0 ** d
        p /= p.sum()
    return mutual_information_matrix(p[:, None] * W)


def test_solver_config_validation():
    with pytest.raises(InputError):
        SolverConfig(restarts=0)
    with pytest.raises(InputError):
        SolverConfig(z_cardinality=1)


# ---------------------------------------------------------------- bounds

def test_bounds_pinch_for_uniform_bsc(bsc_uniform):
    j = bsc_uniform(0.25)
    info = mutual_information(j)
    b = bounds_g(j, info / 2)
    assert b.lower == pytest.approx(0.5, abs=1e-12)
    assert b.upper == pytest.approx(0.5, abs=1e-12)


def test_biso_capacity_is_uniform_input_information():
    # the BISO upper bound uses I under uniform Y; for BISO channels that is
    # the capacity of the reverse channel
    for rev in (bsc(0.1).rows, np.array([[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]])):
        uniform = mutual_information_matrix(0.5 * rev)
        assert uniform == pytest.approx(blahut_arimoto(rev), abs=1e-9)


def test_bounds_erasure_at_zero(bec_joint):
    j = bec_joint(0.3)
    b = bounds_g(j, 0.0)
    assert b.lower == pytest.approx(h2(0.3), abs=1e-9)
    assert b.upper == pytest.approx(h2(0.3), abs=1e-12)


def test_bounds_trivial_region(bsc_uniform):
    j = bsc_uniform(0.2)
    assert bounds_g(j, 5.0) == (1.0, 1.0)
    with pytest.raises(EpsilonOutOfRange):
        bounds_g(j, -0.1)
    with pytest.raises(IndependentSources):
        bounds_g(validate_joint([[0.25, 0.25], [0.25, 0.25]]), 0.1)


def test_bounds_g_hat(bsc_uniform):
    j = bsc_uniform(0.1)
    b = bounds_g_hat(j, 0.32)
    assert b.lower == pytest.approx(0.5)
    assert b.upper >= b.lower
    assert bounds_g_hat(j, 0.64) == (1.0, 1.0)


# ---------------------------------------------------------------- g0

def test_g0_examples(bsc_uniform, bec_joint):
    assert g0(bsc_uniform(0.2))[0] == 0.0
    val, filt = g0(bec_joint(0.3))
    assert val == pytest.approx(h2(0.3), abs=1e-12)
    j = bec_joint(0.3)
    assert audit_filter(j, filt).i_xz == pytest.approx(0.0, abs=1e-12)
    prod = validate_joint([[0.06, 0.14], [0.24, 0.56]])
    assert g0(prod)[0] == pytest.approx(entropy(prod.py), abs=1e-9)


@settings(max_examples=15)
@given(joints(3, 4, min_y=3), st.integers(0, 2**31))
def test_g0_certificate_is_private(j, seed):
    val, filt = g0(j, SolverConfig(master_seed=seed % 1000))
    rep = audit_filter(j, filt)
    assert rep.i_xz <= 1e-9
    assert rep.i_yz == pytest.approx(val, abs=1e-12)
    assert (val > 1e-9) == bool(weak_independence(j))


# ---------------------------------------------------------------- solve_g

@pytest.mark.parametrize("alpha", [0.1, 0.25])
def test_solve_g_bsc_line(bsc_uniform, alpha):
    j = bsc_uniform(alpha)
    info = mutual_information(j)
    for frac in (0.2, 0.5, 0.8):
        pt = solve_g(j, frac * info)
        assert pt.value == pytest.approx(frac, abs=5e-3)
        assert audit_filter(j, pt.filter).i_xz <= frac * info + 1e-9


def test_solve_g_erasure_affine(bec_joint):
    j = bec_joint(0.3, (0.4, 0.6))
    info = mutual_information(j)
    for eps in (0.1 * info, 0.6 * info):
        assert solve_g(j, eps).value == pytest.approx(conditional_entropy(j) + eps, abs=5e-3)


def test_solve_g_at_information_is_identity(bsc_uniform):
    j = bsc_uniform(0.3)
    pt = solve_g(j, mutual_information(j))
    assert pt.value == 1.0
    np.testing.assert_allclose(pt.filter.rows, np.eye(2))


@settings(max_examples=10)
@given(joints(3, 3), st.floats(0.05, 0.95))
def test_solve_g_certificate(j, frac):
    info = mutual_information(j)
    assume(info > 1e-3)
    eps = frac * info
    pt = solve_g(j, eps, FAST)
    rep = audit_filter(j, pt.filter)
    assert rep.i_xz <= eps + 1e-9
    assert rep.i_yz == pytest.approx(pt.value, abs=1e-12)
    assert pt.lower - 1e-6 <= pt.value <= pt.upper + 1e-6
    assert pt.filter.shape[1] <= j.shape[1] + 1


def test_solve_g_is_deterministic(rng):
    j = validate_joint(rng.dirichlet(np.ones(9)).reshape(3, 3))
    eps = 0.4 * mutual_information(j)
    a, b = solve_g(j, eps, FAST), solve_g(j, eps, FAST)
    assert a.value == b.value
    np.testing.assert_array_equal(a.filter.rows, b.filter.rows)


def test_solve_g_rejects_bad_eps(bsc_uniform):
    with pytest.raises(EpsilonOutOfRange):
        solve_g(bsc_uniform(0.1), -1.0)
    with pytest.raises(EpsilonOutOfRange):
        solve_g(bsc_uniform(0.1), math.nan)


# ---------------------------------------------------------------- solve_g_hat

def test_solve_g_hat_examples(bsc_uniform):
    j = bsc_uniform(0.1)
    assert solve_g_hat(j, 0.7).value == 1.0
    assert solve_g_hat(j, 0.0).value == pytest.approx(0.0, abs=1e-12)
    pt = solve_g_hat(j, 0.32)
    assert pt.value >= 0.5 - 1e-9
    assert audit_filter(j, pt.filter).rho2_xz <= 0.32 + 1e-9


@settings(max_examples=6)
@given(joints(3, 3), st.floats(0.1, 0.9))
def test_solve_g_hat_certificate(j, frac):
    r2 = maximal_correlation(j) ** 2
    assume(r2 > 1e-3)
    eps = frac * r2
    pt = solve_g_hat(j, eps, FAST)
    rep = audit_filter(j, pt.filter)
    assert rep.rho2_xz <= eps + 1e-9
    assert pt.lower - 1e-6 <= pt.value <= pt.upper + 1e-6


# ---------------------------------------------------------------- curve

def test_curve_endpoints_and_line(bsc_uniform):
    j = bsc_uniform(0.25)
    info = mutual_information(j)
    pts = curve_g(j, np.linspace(0, info, 5), FAST)
    for p in pts:
        assert p.value == pytest.approx(p.epsilon / info, abs=5e-3)
    assert pts[0].value == pytest.approx(0.0, abs=1e-12) and pts[-1].value == 1.0
    assert curve_to_csv(pts).splitlines()[0] == "epsilon,lower,value,upper,leakage"


def test_curve_endpoints_weakly_independent(bec_joint):
    j = bec_joint(0.5)
    pts = curve_g(j, [0.0, mutual_information(j)], FAST)
    assert pts[0].value == pytest.approx(g0(j)[0], abs=1e-9)
    assert pts[1].value == pytest.approx(entropy(j.py))


def test_curve_independent_of_threads(rng):
    j = validate_joint(rng.dirichlet(np.ones(6)).reshape(2, 3))
    grid = np.linspace(0, mutual_information(j), 5)
    a = curve_g(j, grid, SolverConfig(restarts=8, max_iters=80, threads=1))
    b = curve_g(j, grid, SolverConfig(restarts=8, max_iters=80, threads=3))
    assert curve_to_csv(a) == curve_to_csv(b)


def test_curve_values_nondecreasing(rng):
    j = validate_joint(rng.dirichlet(np.ones(9)).reshape(3, 3))
    pts = curve_g(j, np.linspace(0, mutual_information(j), 7), FAST)
    vals = [p.value for p in pts]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_curve_grid_validation(bsc_uniform):
    j = bsc_uniform(0.2)
    with pytest.raises(InputError):
        curve_g(j, [0.1, 0.05])
    with pytest.raises(EpsilonOutOfRange):
        curve_g(j, [0.0, 5.0])


# ---------------------------------------------------------------- funnel and dilution

def test_funnel_examples(bsc_uniform, bec_joint):
    j = bsc_uniform(0.2)
    info = mutual_information(j)
    assert funnel_dual(j, 0.0) == 0.0
    assert funnel_dual(j, 0.4, FAST) == pytest.approx(0.4 * info, abs=1e-3)
    e = bec_joint(0.3)
    assert funnel_dual(e, 0.5 * conditional_entropy(e)) == 0.0
    with pytest.raises(RateUnachievable):
        funnel_dual(j, 1.5)


def test_dilution_examples(bsc_uniform):
    j = bsc_uniform(0.2)
    assert dilution_outer(j, 0.0) == 0.0
    assert dilution_outer(j, 0.6, FAST) == funnel_dual(j, 0.6, FAST)
    prod = validate_joint([[0.06, 0.14], [0.24, 0.56]])
    assert dilution_outer(prod, entropy(prod.py)) == 0.0


# ---------------------------------------------------------------- structure

def test_closed_form_examples(bsc_uniform, rng):
    j = bsc_uniform(0.25)
    cf = closed_form(j, 0.1)
    assert cf.value == pytest.approx(0.1 / (1 - h2(0.25)), abs=1e-12)
    assert cf.value == pytest.approx(0.529878, abs=5e-6)  # quoted value is rounded
    assert cf.provenance == "biso-uniform"
    e = joint_from_channel([0.6, 0.4], Channel([[0.7, 0.3, 0], [0, 0.3, 0.7]]))
    assert closed_form(e, 0.2).value == pytest.approx(h2(0.3) + 0.2, abs=1e-12)
    assert closed_form(validate_joint([[0.3, 0.1, 0.1], [0.05, 0.25, 0.2]]), 0.1) is None


def test_slope_examples(bsc_uniform):
    for a in (0.1, 0.3):
        bound, _ = slope_bound_at_zero(bsc_uniform(a))
        assert bound == pytest.approx(1 / (1 - h2(a)), abs=1e-9)
    j = joint_from_channel([0.7, 0.3], bsc(0.2))
    v = linearity_test(j)
    r = list(v.ratios.values())
    assert abs(r[0] - r[1]) > 1e-3
    assert slope_bound_at_zero(j)[0] == pytest.approx(max(r))
    with pytest.raises(WeaklyIndependent):
        slope_bound_at_zero(joint_from_channel([0.5, 0.5], Channel([[0.5, 0.3, 0.2], [0.1, 0.3, 0.6]])))
    with pytest.raises(IndependentSources):
        slope_bound_at_zero(validate_joint([[0.25, 0.25], [0.25, 0.25]]))


def test_linearity_examples(bsc_uniform):
    assert linearity_test(bsc_uniform(0.2)).verdict == "Linear"
    assert linearity_test(joint_from_channel([0.7, 0.3], bsc(0.2))).verdict == "NotLinear"
    # reverse channel rows Ber(a0), Ber(a1) with a0 + a1 = 1 and P_Y = Ber(0.3)
    a0 = 0.2
    py = np.array([0.7, 0.3])
    rev = np.array([[1 - a0, a0], [a0, 1 - a0]])
    j = validate_joint((py[:, None] * rev).T)
    assert linearity_test(j).verdict == "NotLinear"


def test_linear_verdict_matches_solver(bsc_uniform):
    j = bsc_uniform(0.15)
    info = mutual_information(j)
    eps = 0.3 * info
    assert solve_g(j, eps).value == pytest.approx(eps * entropy(j.py) / info, abs=5e-3)


@given(st.integers(0, 2**31), st.sampled_from([0.1, 0.3]))
def test_biso_divergence_ratio_inequality(seed, lam):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    p = rng.dirichlet(np.ones(2 * k + 1))
    pairing = list(range(2 * k, -1, -1))
    lhs, rhs = biso_divergence_ratio(p, pairing, lam)
    assert lhs < rhs
