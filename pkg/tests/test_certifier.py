import math

import numpy as np
import pytest
from scipy import optimize, stats

from ulacert import certifier as C, oracle as O, potentials as P, schedule as S
from ulacert.errors import ConfigurationError, DomainError, InfeasibleError


def strong_drift(model, gamma_bar):
    return C.euler_drift(model, model.certificate("StronglyConvexOutsideBall"), gamma_bar)


# --- F, G and omega --------------------------------------------------------

def test_F_examples():
    assert C.eval_F(0.5, 0, 0, 0.3, 2.5) == pytest.approx(2.5, rel=1e-14)
    assert C.eval_F(0.5, 2, 1, 1, 1) == pytest.approx(0.25 + 1 / (0.5 * math.log(2)), rel=1e-13)
    assert C.eval_F(0.5, 2, 1, 1, 1) == pytest.approx(3.13539, abs=5e-6)


@pytest.mark.parametrize("lam,a,c,g,w", [(0.5, 2.0, 1.0, 0.1, 3.0), (0.99, 10.0, 5.0, 0.01, 0.0),
                                         (0.1, 0.0, 2.0, 1.0, 1.0)])
def test_G_dominates_F(lam, a, c, g, w):
    assert C.eval_G(lam, c, g, w) >= C.eval_F(lam, a, c, g, w)


def test_omega_examples():
    assert C.eval_omega(0.3, 0.0) == 0.0
    assert C.eval_omega(2 * (1 - stats.norm.cdf(1.0)), 2.0) == pytest.approx(1.0, rel=1e-12)
    assert C.eval_omega(0.5, 1.0) == pytest.approx(1 / (2 * 0.6744897501960817) ** 2, rel=1e-14)
    assert C.eval_omega(0.5, 1.0) == pytest.approx(0.549538, abs=1e-4)
    with pytest.raises(DomainError):
        C.eval_omega(1.0, 1.0)


def test_omega_matches_bisection():
    for eps in (1e-6, 0.01, 0.5, 0.99):
        q = optimize.brentq(lambda u: stats.norm.cdf(u) - (1 - eps / 2), 0.0, 10.0, xtol=1e-15)
        assert C.eval_omega(eps, 3.0) == pytest.approx(9.0 / (2 * q) ** 2, rel=1e-9)


# --- drift constants -------------------------------------------------------

def test_strong_drift_example():
    dr = strong_drift(P.isotropic_quadratic(2), 0.5)
    assert dr.lam == pytest.approx(0.223130, abs=1e-6)
    assert dr.c == pytest.approx(4.0)


def test_superexponential_open_interval():
    m = P.isotropic_quadratic(1)
    with pytest.raises(DomainError):
        C.euler_drift(m, m.certificate("Superexponential"), 1.0)
    assert C.euler_drift(m, m.certificate("Superexponential"), 0.5).lam < 1


def test_logconcave_lambda_dimension_free():
    lams = {C.euler_drift(P.isotropic_quadratic(d), P.LogConcave(1.0, 2.0), 1.0).lam for d in (1, 5, 50)}
    assert len(lams) == 1
    assert lams.pop() == pytest.approx(math.exp(-(math.sqrt(2) - 1) / 16), rel=1e-15)


# --- A and C ---------------------------------------------------------------

def test_A_strong_example():
    m = P.isotropic_quadratic(1)
    dr = C.DriftConstants(-1.5, math.log(2.0), 0.1, "SqDist", "StronglyConvexOutsideBall")
    A = C.A_bound("StrongConvex", dr, m, None, S.Constant(0.1), [0.0])
    assert A == pytest.approx(2 / (1.5 * math.exp(-0.15)), rel=1e-13)
    assert A == pytest.approx(1.54911, abs=1e-5)


def test_A_logsobolev_reduces_without_perturbation():
    for d in (1, 3):
        m = P.isotropic_quadratic(d)
        A = C.A_bound("LogSobolev", None, m, None, S.Constant(0.5), np.zeros(d))
        assert A == pytest.approx(8.0 * d, rel=1e-14)        # 8 L1^2 d / varpi with varpi = 1


def test_A_monotone_in_start():
    m = P.huber(2)
    dr = C.euler_drift(m, m.certificate("LogConcave"), 1.0)
    vals = [C.A_bound("ReflectionConvex", dr, m, None, S.Constant(0.1), [r, 0.0]) for r in (0, 1, 5)]
    assert vals == sorted(vals)


def test_C_strong_example():
    m = P.isotropic_quadratic(1)
    dr = C.DriftConstants(-1.5, math.log(2.0), 0.1, "SqDist", "StronglyConvexOutsideBall")
    rate = C.ergodicity_rate("StrongConvex", m)
    val = C.C_bound("StrongConvex", [0.0], 0, S.Constant(0.1), dr, rate, m, None)
    assert val == pytest.approx(8 + 2 * math.sqrt(2 / (1.5 * math.exp(-0.15))), rel=1e-13)
    assert val == pytest.approx(10.4893, abs=1e-4)


def test_poincare_D1():
    sums = C._Sums(S.Constant(0.1), 1, 1.0, want_dn=True)
    D1 = math.exp(float(C._log_D_n(1, sums.head(np.array([1])))[0]))
    assert D1 == pytest.approx((4 * math.pi * 0.81 * (0.1 / 0.9)) ** -0.5, rel=1e-13)
    assert D1 == pytest.approx(0.94032, abs=1e-5)


# --- rates -----------------------------------------------------------------

def test_rate_examples():
    m = P.isotropic_quadratic(1)
    assert C.ergodicity_rate("Bobkov", m).kappa == pytest.approx(math.exp(-1 / 432), rel=1e-15)
    assert C.ergodicity_rate("LogSobolev", m).kappa == pytest.approx(math.exp(-1), rel=1e-15)
    g = C.generic_sde_rate(1.0, 1.0, 2.0, 0.0, 0.5)
    assert g.aux["theta_tilde"] == 0.5 and g.aux["omega"] == 0.0 and g.aux["K_eps"] == 5.0
    assert g.log_kappa == pytest.approx(0.25 * math.log(0.5) / (math.log(5) - math.log(0.5)), rel=1e-14)
    assert g.log_kappa == pytest.approx(-0.075257, abs=1e-6)


def test_poincare_bobkov_need_valid_inputs():
    m = P.quadratic_cosine(1)
    assert C.ergodicity_rate("Poincare", m).log_kappa < 0
    with pytest.raises(ConfigurationError):
        C.ergodicity_rate("UserSupplied", m)


# --- curves, bias and planners --------------------------------------------

def test_curve_clamped_and_above_oracle():
    m = P.isotropic_quadratic(1)
    cur = C.tv_bound_curve("StrongConvex", m, None, S.Constant(0.05), [3.0], p_values=[10, 100, 2000])
    assert np.all(cur.total <= 2.0)
    oracle = O.gaussian_tv(O.gaussian_ula_marginal([3.0], 0.05, 2000), O.GaussianDist([0.0], 1.0))
    assert cur.total[-1] >= 2 * oracle


def test_discretization_term_scales_like_sqrt_gamma():
    m = P.isotropic_quadratic(1)
    T = 5.0
    terms = []
    for g in (0.02, 0.01, 0.005, 0.0025):
        p = int(round(T / g))
        cur = C.tv_bound_curve("StrongConvex", m, None, S.Constant(g), [0.0], p_values=[p],
                               split_variant="LogGamma")
        terms.append(cur.disc[0])
    ratios = np.array(terms[:-1]) / np.array(terms[1:])
    assert np.all(np.abs(ratios - math.sqrt(2)) < 0.05)


def test_bias_example():
    m = P.isotropic_quadratic(1)
    dr = C.DriftConstants(-1.0, -math.inf, 0.5, "ExpHalfU", "Superexponential")
    rate = C.ErgodicityRate("Poincare", math.log(0.5))
    b = C.bias_bound_B(m, None, dr, rate, 0.1, 1.0, C_quarter=1.0, beta_over_theta=1.0, grad_norm_sq=1.0)
    assert b.value ** 2 == pytest.approx(1.1 * 4 * 3 * (0.1 + 0.01 / 3), rel=1e-13)


def test_bias_order_sqrt_gamma():
    m = P.quadratic_cosine(1)
    cert = m.certificate("Superexponential")
    dr = C.euler_drift(m, cert, 0.3)
    rate = C.ErgodicityRate("Poincare", -0.1)
    r = [C.bias_bound_B(m, cert, dr, rate, g, C_quarter=2.0).value / math.sqrt(g)
         for g in (1e-2, 1e-4, 1e-6)]
    assert abs(r[2] - r[1]) < abs(r[1] - r[0]) and np.isfinite(r[2])


def test_plan_strong_closure():
    m = P.isotropic_quadratic(1)
    plan = C.plan_precision("StrongConvex", m, None, [0.0], 0.25, 0.5)
    assert plan.certified and plan.certified_bound <= 0.25
    cur = C.tv_bound_curve("StrongConvex", m, None, S.Constant(plan.gamma), [0.0], p_values=[plan.p],
                           gamma_bar=plan.gamma)
    assert cur.total[0] <= 0.25


def test_planner_infeasible_routes():
    m = P.quadratic_cosine(2)
    with pytest.raises(InfeasibleError):
        C.plan_precision("Bobkov", m, None, np.zeros(2), 0.25)


def test_fixed_budget_gamma_and_monotonicity():
    m = P.isotropic_quadratic(1)
    inp = C.RouteInputs(C_half=1.0, upsilon_half=1.0)
    fb = C.plan_fixed_budget("UserSupplied", m, None, [0.0], 100, 0, gamma_bar=0.5, inputs=inp)
    assert fb.gamma == pytest.approx(math.log(100) / 100, rel=1e-14)
    g = [C.plan_fixed_budget("StrongConvex", m, None, [0.0], p, 0).gamma for p in range(18, 80)]
    assert all(a >= b for a, b in zip(g, g[1:]))


def test_fixed_budget_rate():
    # the bound decays like log(p)/sqrt(p); after dividing by log(p) the slope is -1/2
    m = P.isotropic_quadratic(1)
    ps = np.unique(np.round(np.logspace(2, 5, 16)).astype(int))
    b = np.array([C.plan_fixed_budget("StrongConvex", m, None, [0.0], int(p), 0).bound for p in ps])
    assert np.all(np.diff(b) <= 0)
    slope = np.polyfit(np.log(ps), np.log(b / np.log(ps)), 1)[0]
    assert -0.65 <= slope <= -0.45


def test_scaling_needs_three_dimensions():
    with pytest.raises(ConfigurationError):
        C.scaling_study("StrongConvex", "isotropic_quadratic", [4], 0.25)


def test_strong_curve_log_slope():
    rate = C.generic_sde_strong_rate(0.5, 1.0)
    t = np.linspace(10, 100, 10)
    y = np.log(C.generic_sde_strong_curve(rate, t, 2.0))
    assert np.polyfit(t, y, 1)[0] == pytest.approx(rate.log_kappa, abs=1e-9)
