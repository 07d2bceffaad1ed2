import numpy as np
import pytest

from ulacert import potentials as P
from ulacert.errors import DomainError, EvaluationError, ConfigurationError


@pytest.mark.parametrize("name,params", [
    ("isotropic_quadratic", {"dim": 3}),
    ("anisotropic_quadratic", {"spectrum": [0.5, 1.0, 4.0]}),
    ("huber", {"dim": 2}),
    ("quadratic_cosine", {"dim": 2}),
    ("quadratic_cosine", {"dim": 2, "amplitude": 2.0}),
])
def test_family_invariants(name, params):
    m = P.build_family(name, **params)
    g = m.gradient(m.minimizer[None, :])[0]
    assert np.linalg.norm(g) <= 1e-8 * max(1.0, m.lipschitz_L)
    assert abs(float(m.value(m.minimizer))) <= 1e-12
    assert P.verify_lipschitz(m, n_pairs=500) <= m.lipschitz_L * (1 + 1e-9)
    for cert in m.certificates.values():
        assert P.verify_certificate(m, cert, n_samples=500).passed


def test_gradient_check_quadratic():
    m = P.isotropic_quadratic(3)
    pts = np.random.default_rng(0).uniform(-3, 3, (10, 3))
    assert P.eval_gradient_check(m, pts, 1e-5) < 1e-8


def test_gradient_check_huber():
    m = P.huber(2)
    pts = np.random.default_rng(1).uniform(-3, 3, (10, 2))
    assert P.eval_gradient_check(m, pts, 1e-5) < 1e-6


def test_gradient_check_nan():
    m = P.make_model(1, lambda x: np.sum(x ** 2, -1), lambda x: np.full_like(x, np.nan),
                     np.zeros(1), 1.0)
    with pytest.raises(EvaluationError):
        P.eval_gradient_check(m, [[0.0]])


def test_certificate_strong_exact_and_too_strong():
    m = P.isotropic_quadratic(2)
    assert not P.verify_certificate(m, P.StronglyConvexOutsideBall(1.0, 0.0), n_samples=1000)
    assert P.verify_certificate(m, P.StronglyConvexOutsideBall(1.5, 0.0), n_samples=1000)


def test_huber_certificate_constants():
    # sqrt(1 + r^2) - 1 >= eta r holds from r = 2 eta / (1 - eta^2); eta = 0.8 would need r >= 4.44
    m = P.huber(2)
    c = m.certificate("LogConcave")
    assert c.eta == 0.5 and c.M_eta == pytest.approx(4.0 / 3.0)
    assert P.verify_certificate(m, c, n_samples=1000, radius=10.0).passed
    assert P.verify_certificate(m, P.LogConcave(0.8, 2.0), n_samples=1000, radius=10.0)


def test_a_alpha():
    assert P.a_alpha(P.Superexponential(1, 2, 0), 1) == 0.0
    assert P.a_alpha(P.Superexponential(2, 2, 1), 1) == pytest.approx(7.0 / 6.0, rel=1e-14)
    assert P.a_alpha(P.Superexponential(1, 1.5, 2), 3) == pytest.approx(2 ** 1.5 / 2.5 + 6, rel=1e-14)


@pytest.mark.parametrize("bad", [
    lambda: P.Superexponential(1.0, 2.5),
    lambda: P.Superexponential(-1.0, 2.0),
    lambda: P.LogConcave(0.0),
    lambda: P.PerturbedStronglyConvex(2.0, 1.0, [0.0], 0.0, 0.0, 0.0),
    lambda: P.PerturbedStronglyConvex(1.0, 1.0, [0.0], 1.0, 0.0, 3.0),
])
def test_certificate_validation(bad):
    with pytest.raises(DomainError):
        bad()


def test_unknown_family():
    with pytest.raises(ConfigurationError):
        P.build_family("nope", dim=1)


def test_models_are_immutable():
    m = P.isotropic_quadratic(2)
    with pytest.raises(ValueError):
        m.minimizer[0] = 1.0
