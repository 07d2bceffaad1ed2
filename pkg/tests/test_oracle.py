import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ulacert import oracle as O, potentials as P, schedule as S
from ulacert.errors import ConfigurationError, DomainError, GridTooSmallError
from ulacert.sampler import ChainEnsemble, run_chains

PI1 = O.GaussianDist([0.0], 1.0)
GAUSS = P.isotropic_quadratic(1)


# --- closed form -----------------------------------------------------------

def test_one_step_law():
    x = np.array([2.0, -1.0])
    one = O.gaussian_ula_marginal(x, 0.1, 1)
    assert one.variance == pytest.approx(0.2, rel=1e-14)
    assert np.allclose(one.mean, 0.9 * x, rtol=1e-15)
    # the shifted-exponent form at p = 0 keeps the start as mean with the one-step variance
    alt = O.gaussian_ula_marginal_shifted(x, 0.1, 0)
    assert alt.variance == pytest.approx(0.2, rel=1e-14) and np.array_equal(alt.mean, x)
    with pytest.raises(DomainError):
        O.gaussian_ula_marginal(x, 0.1, 0)
    with pytest.raises(DomainError):
        O.gaussian_ula_marginal(x, 1.0, 3)


def test_stationary_limit():
    law = O.gaussian_ula_marginal([3.0], 0.1, 100_000)
    assert law.variance == pytest.approx(1 / 0.95, rel=1e-14)
    assert abs(law.mean[0]) < 1e-300


@pytest.mark.parametrize("g", [1e-2, 1e-3])
def test_small_step_matches_ou(g):
    law = O.gaussian_ula_marginal([0.0], g, int(1 / g))
    assert abs(law.variance - (1 - math.exp(-2))) < 2 * g


def test_tv_examples():
    assert O.gaussian_tv(PI1, PI1) == 0.0 and O.gaussian_kl(PI1, PI1) == 0.0
    tv = O.gaussian_tv(O.GaussianDist([2.0], 1.0), PI1)
    assert tv == pytest.approx(2 * stats.norm.cdf(1) - 1, abs=1e-12)
    with pytest.raises(ConfigurationError):
        O.gaussian_tv(PI1, O.GaussianDist([0.0, 0.0], 1.0))


def test_tv_unequal_variance_matches_quadrature():
    a, b = O.GaussianDist([1.0], 0.5), O.GaussianDist([-0.3], 2.0)
    x = np.linspace(-30, 30, 600_001)
    num = 0.5 * np.trapezoid(np.abs(a.pdf(x) - b.pdf(x)), x)
    assert O.gaussian_tv(a, b) == pytest.approx(num, abs=1e-9)


def test_tv_multivariate_against_monte_carlo():
    a, b = O.GaussianDist([1.0, 0.0], 1.5), O.GaussianDist([0.0, 0.5], 0.7)
    rng = np.random.default_rng(0)
    z = a.mean + math.sqrt(a.variance) * rng.standard_normal((400_000, 2))
    ratio = np.minimum(b.pdf(z) / a.pdf(z), 1.0)
    est = 1 - ratio.mean()                 # TV = E_a[(1 - b/a)^+]
    se = ratio.std() / math.sqrt(z.shape[0])
    assert abs(O.gaussian_tv(a, b) - est) < 5 * se


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 5), st.floats(0.05, 5))
def test_pinsker_property(d, ma, mb, va, vb):
    a = O.GaussianDist(np.full(d, ma), va)
    b = O.GaussianDist(np.r_[mb, np.zeros(d - 1)], vb)
    tv = O.gaussian_tv(a, b)
    assert 0.0 <= tv <= 1.0
    assert tv <= math.sqrt(2 * O.gaussian_kl(a, b)) + 1e-12


# --- Pinsker display -------------------------------------------------------

def test_pinsker_stationary_limit():
    assert O.pinsker_rhs(0.0, 1e-9, 10 ** 12, 3).rhs < 1e-8


def test_pinsker_chain_example():
    c = O.pinsker_rhs(3.0, 0.1, 100, 1)
    assert c.rhs == pytest.approx(2 * c.kl_reverse, rel=1e-12)
    assert c.rhs >= 2 * c.kl_reverse - 1e-12 and 2 * c.kl_reverse >= (2 * c.tv) ** 2 - 1e-12
    assert c.holds()


@pytest.mark.parametrize("g", [0.01, 0.1, 0.5, 0.9])
def test_pinsker_monotone_above_threshold(g):
    # nonincreasing in p exactly when |x|^2 / d >= gamma / (2 - gamma)
    thr = g / (2 - g)
    for a, expect in ((1.01 * thr, True), (0.5 * thr, False)):
        for d in (1, 4):
            x = math.sqrt(a * d)
            r = np.array([O.pinsker_rhs(x, g, p, d).rhs for p in range(1, 501)])
            mono = bool(np.all(np.diff(r) <= 1e-14 * r.max()))
            assert mono is expect


# --- grid oracle -----------------------------------------------------------

def test_grid_one_step_exact():
    x, g = 1.5, 0.1
    dens = O.grid_propagate(GAUSS, S.Constant(g), x, 1, lo=-10, hi=10, n_points=4096)
    ref = O.GaussianDist([(1 - g) * x], 2 * g).pdf(dens.grid)
    assert np.max(np.abs(dens.values - ref)) < 1e-6


def test_grid_fifty_steps_matches_closed_form():
    x, g, p = 3.0, 0.05, 50
    dens = O.grid_propagate(GAUSS, S.Constant(g), x, p)
    tv = O.grid_tv(dens, PI1).value
    assert tv == pytest.approx(O.gaussian_tv(O.gaussian_ula_marginal([x], g, p), PI1), abs=1e-5)


def test_grid_point_mass_error():
    with pytest.raises(DomainError):
        O.grid_propagate(GAUSS, S.Constant(0.1), 0.0, 0)


def test_grid_too_small():
    with pytest.raises(GridTooSmallError) as info:
        O.grid_propagate(GAUSS, S.Constant(0.1), 8.0, 3, lo=-2, hi=2, n_points=401)
    assert info.value.suggested[0] < -2


def test_chapman_kolmogorov():
    s = S.PolynomialDecay(0.3, 0.5)
    lo, hi, n = O.grid_for(GAUSS, s, 2.0, 30)
    full = O.grid_propagate(GAUSS, s, 2.0, 30, lo=lo, hi=hi, n_points=n)
    head = O.grid_propagate(GAUSS, s, 2.0, 12, lo=lo, hi=hi, n_points=n)
    tail = O.grid_propagate(GAUSS, s, 2.0, 18, start=head, step_offset=12)
    assert O.grid_tv(full, tail).raw < 1e-6


def test_grid_tv_examples():
    z = np.linspace(-12, 12, 4801)
    n01 = O.GridDensity(-12, 12, PI1.pdf(z))
    assert O.grid_tv(n01, n01).value == 0.0
    res = O.grid_tv(n01, O.GaussianDist([2.0], 1.0))
    assert res.value == pytest.approx(2 * stats.norm.cdf(1) - 1, abs=1e-6)
    coarse = O.GridDensity(-12, 12, PI1.pdf(z[::2]))
    d1 = O.grid_tv(coarse, O.GaussianDist([2.0], 1.0)).value
    assert abs(d1 - res.value) < 1e-7
    with pytest.raises(ConfigurationError):
        O.grid_tv(n01, coarse)


def test_target_density_normalized():
    dens = O.grid_propagate(P.huber(1), S.Constant(0.1), 1.0, 5)
    pi = O.target_density(P.huber(1), dens)
    assert pi.mass == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("model", [P.isotropic_quadratic(1), P.huber(1)], ids=["gauss", "huber"])
def test_sampler_agrees_with_grid(model):
    g, p, x, n = 0.1, 20, 2.0, 1_000_000
    res = run_chains(ChainEnsemble(model, S.Constant(g), n, [x], seed=2), p, keep_states=True,
                     record_at=[p])
    samples = res.snapshots[p][:, 0]
    dens = O.grid_propagate(model, S.Constant(g), x, p)
    edges = np.linspace(-6, 8, 141)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * dens.h * (dens.values[1:] + dens.values[:-1]))])
    probs = np.diff(np.interp(edges, dens.grid, cdf))
    probs = np.append(probs, 1 - probs.sum())
    counts = np.histogram(samples, edges)[0]
    freq = np.append(counts, n - counts.sum()) / n
    tv = 0.5 * np.abs(freq - probs).sum()
    mc = 0.5 * np.sum(np.sqrt(2 * probs * (1 - probs) / (math.pi * n)))
    binning = 1e-4
    assert tv <= 3 * (mc + binning)


def test_densities_csv(tmp_path):
    dens = O.grid_propagate(GAUSS, S.Constant(0.1), 0.0, 2, lo=-5, hi=5, n_points=11)
    path = tmp_path / "d.csv"
    O.write_densities_csv(path, {"chain": dens})
    lines = path.read_text().splitlines()
    assert lines[0] == "label,step,x,density" and len(lines) == 12
