"""
Target potentials and the class certificates that describe them.

A target density is written pi(x) ~ exp(-U(x)).  Every model exposes U and
its gradient as vectorized callables acting on arrays of shape (..., d),
the gradient Lipschitz constant L and a minimizer x_star.  Values are
shifted at construction so that U(x_star) = 0.

Certificates carry the constants of the four potential classes handled by
the certifier:

* ``Superexponential``   <grad U(x), x - x*> >= rho |x - x*|^alpha outside B(x*, M_rho)
* ``LogConcave``         U convex and U(x) >= eta |x - x*| outside B(x*, M_eta)
* ``StronglyConvexOutsideBall``  <grad U(x) - grad U(y), x - y> >= m |x - y|^2 when |x - y| >= M_s
* ``PerturbedStronglyConvex``    U = U1 + U2 with U1 strongly convex and U2 bounded
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigurationError, DomainError, EvaluationError

__all__ = [
    "PotentialModel",
    "Superexponential",
    "LogConcave",
    "StronglyConvexOutsideBall",
    "PerturbedStronglyConvex",
    "CLASS_NAMES",
    "make_model",
    "isotropic_quadratic",
    "anisotropic_quadratic",
    "huber",
    "quadratic_cosine",
    "FAMILIES",
    "build_family",
    "eval_gradient_check",
    "verify_certificate",
    "verify_lipschitz",
    "ViolationReport",
    "a_alpha",
]


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def _positive(name, v):
    if not np.isfinite(v) or v <= 0:
        raise DomainError(f"certificate field {name} must be finite and > 0, got {v}")


def _nonneg(name, v):
    if not np.isfinite(v) or v < 0:
        raise DomainError(f"certificate field {name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class Superexponential:
    rho: float
    alpha: float
    M_rho: float = 0.0

    def __post_init__(self):
        _positive("rho", self.rho)
        _nonneg("M_rho", self.M_rho)
        if not 1.0 < self.alpha <= 2.0:
            raise DomainError(f"alpha must lie in (1, 2], got {self.alpha}")


@dataclass(frozen=True)
class LogConcave:
    eta: float
    M_eta: float = 0.0

    def __post_init__(self):
        _positive("eta", self.eta)
        _nonneg("M_eta", self.M_eta)


@dataclass(frozen=True)
class StronglyConvexOutsideBall:
    m: float
    M_s: float = 0.0

    def __post_init__(self):
        _positive("m", self.m)
        _nonneg("M_s", self.M_s)


@dataclass(frozen=True)
class PerturbedStronglyConvex:
    """U = U1 + U2 with U1 m-strongly convex and L1-smooth, U2 bounded.

    ``u2`` and ``grad_u2`` are optional callables used only by
    :func:`verify_certificate`; the constants themselves never need them.
    """

    m: float
    L1: float
    xstar1: np.ndarray
    sup_U2: float
    sup_gradU2: float
    osc_U2: float
    u2: Optional[Callable] = field(default=None, compare=False, repr=False)
    grad_u2: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        _positive("m", self.m)
        _positive("L1", self.L1)
        _nonneg("sup_U2", self.sup_U2)
        _nonneg("sup_gradU2", self.sup_gradU2)
        _nonneg("osc_U2", self.osc_U2)
        if self.osc_U2 > 2.0 * self.sup_U2 * (1 + 1e-12):
            raise DomainError("osc_U2 cannot exceed 2 * sup_U2")
        if self.m > self.L1:
            raise DomainError(f"m={self.m} exceeds L1={self.L1}")
        x1 = np.array(self.xstar1, dtype=float).reshape(-1)
        x1.setflags(write=False)
        object.__setattr__(self, "xstar1", x1)


CLASS_NAMES = {
    "Superexponential": Superexponential,
    "LogConcave": LogConcave,
    "StronglyConvexOutsideBall": StronglyConvexOutsideBall,
    "PerturbedStronglyConvex": PerturbedStronglyConvex,
}


def a_alpha(cert: Superexponential, L: float) -> float:
    """Constant a_alpha with U(x) >= rho |x - x*|^alpha / (alpha + 1) - a_alpha."""
    if not isinstance(cert, Superexponential):
        raise ConfigurationError("a_alpha needs a Superexponential certificate")
    return cert.rho * cert.M_rho ** cert.alpha / (cert.alpha + 1) + cert.M_rho ** 2 * L / 2


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialModel:
    """Immutable analytic interface of a target exp(-U).

    ``value`` and ``gradient`` map arrays of shape (..., dim) to (...) and
    (..., dim).  ``variance_integral`` is E_pi |X - E_pi X|^2 when known in
    closed form (or by deterministic quadrature), else None.
    """

    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    minimizer: np.ndarray
    lipschitz_L: float
    family: str = "custom"
    params: Mapping = field(default_factory=dict)
    certificates: Mapping = field(default_factory=dict)
    variance_integral: Optional[float] = None

    def __post_init__(self):
        xs = np.array(self.minimizer, dtype=float).reshape(self.dim)
        xs.setflags(write=False)
        object.__setattr__(self, "minimizer", xs)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        object.__setattr__(self, "certificates", MappingProxyType(dict(self.certificates)))
        if self.lipschitz_L <= 0 or not np.isfinite(self.lipschitz_L):
            raise DomainError(f"lipschitz_L must be finite and > 0, got {self.lipschitz_L}")

    def certificate(self, name: str):
        try:
            return self.certificates[name]
        except KeyError:
            raise ConfigurationError(
                f"potential family {self.family!r} ships no {name} certificate "
                f"(available: {sorted(self.certificates)})") from None


def make_model(dim, raw_value, gradient, minimizer, L, **kw) -> PotentialModel:
    """Wrap raw callables and normalize so that U(minimizer) = 0."""
    xs = np.asarray(minimizer, dtype=float).reshape(dim)
    offset = float(raw_value(xs))

    def value(x):
        return raw_value(x) - offset

    return PotentialModel(dim=dim, value=value, gradient=gradient, minimizer=xs,
                          lipschitz_L=float(L), **kw)


def _sqnorm(x):
    return np.einsum("...i,...i->...", x, x)


def isotropic_quadratic(dim: int, curvature: float = 1.0) -> PotentialModel:
    """U(x) = k |x|^2 / 2, the N(0, I/k) target."""
    k = float(curvature)
    _positive("curvature", k)
    certs = {
        "Superexponential": Superexponential(rho=k, alpha=2.0, M_rho=0.0),
        "LogConcave": LogConcave(eta=1.0, M_eta=2.0 / k),
        "StronglyConvexOutsideBall": StronglyConvexOutsideBall(m=k, M_s=0.0),
        "PerturbedStronglyConvex": PerturbedStronglyConvex(
            m=k, L1=k, xstar1=np.zeros(dim), sup_U2=0.0, sup_gradU2=0.0, osc_U2=0.0,
            u2=lambda x: np.zeros(np.shape(x)[:-1]), grad_u2=np.zeros_like),
    }
    return make_model(
        dim, lambda x: 0.5 * k * _sqnorm(np.asarray(x, float)),
        lambda x: k * np.asarray(x, float), np.zeros(dim), k,
        family="isotropic_quadratic", params={"dim": dim, "curvature": k},
        certificates=certs, variance_integral=dim / k)


def anisotropic_quadratic(dim: Optional[int] = None, spectrum=None, matrix=None) -> PotentialModel:
    """U(x) = x^T A x / 2 for a symmetric positive definite A.

    Give either ``spectrum`` (diagonal A) or a full ``matrix``.
    """
    if (spectrum is None) == (matrix is None):
        raise ConfigurationError("anisotropic_quadratic needs exactly one of spectrum or matrix")
    if matrix is None:
        A = np.diag(np.asarray(spectrum, dtype=float))
    else:
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
            raise ConfigurationError("matrix must be square and symmetric")
    if dim is not None and dim != A.shape[0]:
        raise ConfigurationError(f"dim={dim} does not match a {A.shape[0]}x{A.shape[0]} form")
    dim = A.shape[0]
    ev = np.linalg.eigvalsh(A)
    m, L = float(ev[0]), float(ev[-1])
    if m <= 0:
        raise DomainError("the quadratic form must be positive definite")
    A.setflags(write=False)
    certs = {
        "Superexponential": Superexponential(rho=m, alpha=2.0, M_rho=0.0),
        "LogConcave": LogConcave(eta=1.0, M_eta=2.0 / m),
        "StronglyConvexOutsideBall": StronglyConvexOutsideBall(m=m, M_s=0.0),
        "PerturbedStronglyConvex": PerturbedStronglyConvex(
            m=m, L1=L, xstar1=np.zeros(dim), sup_U2=0.0, sup_gradU2=0.0, osc_U2=0.0,
            u2=lambda x: np.zeros(np.shape(x)[:-1]), grad_u2=np.zeros_like),
    }
    return make_model(
        dim, lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x),
        lambda x: np.asarray(x, float) @ A, np.zeros(dim), L,
        family="anisotropic_quadratic", params={"dim": dim, "matrix": A.tolist()},
        certificates=certs, variance_integral=float(np.sum(1.0 / ev)))


def _radial_second_moment(dim, log_density):
    """E|X|^2 for a radial density exp(log_density(r)) on R^dim, by quadrature."""
    def logf(r, k):
        return (dim - 1 + k) * np.log(r) + log_density(r)

    # locate the mode of r^(d+1) exp(-U) to shift logs and split the range
    res = optimize.minimize_scalar(lambda r: -logf(r, 2), bounds=(1e-12, 10.0 * dim + 50.0),
                                   method="bounded")
    mode, shift = res.x, logf(res.x, 2)
    parts = [0.0, mode, np.inf]

    def quad(k):
        tot = 0.0
        for lo, hi in zip(parts[:-1], parts[1:]):
            tot += integrate.quad(lambda r: np.exp(logf(r, k) - shift) if r > 0 else 0.0,
                                  lo, hi, limit=400, epsabs=0.0, epsrel=1e-13)[0]
        return tot

    return quad(2) / quad(0)


def huber(dim: int, scale: float = 1.0, eta: float = 0.5) -> PotentialModel:
    """Pseudo-Huber potential U(x) = sqrt(scale^2 + |x|^2) - scale.

    Convex, L = 1/scale, and U(x) >= eta |x| as soon as
    |x| >= 2 scale eta / (1 - eta^2) (eta < 1).
    """
    s = float(scale)
    _positive("scale", s)
    if not 0 < eta < 1:
        raise DomainError(f"huber certificate needs eta in (0, 1), got {eta}")
    M_eta = 2.0 * s * eta / (1.0 - eta ** 2)

    def value(x):
        return np.sqrt(s * s + _sqnorm(np.asarray(x, float))) - s

    def gradient(x):
        x = np.asarray(x, float)
        return x / np.sqrt(s * s + _sqnorm(x))[..., None]

    var = _radial_second_moment(dim, lambda r: -(np.sqrt(s * s + r * r) - s))
    certs = {"LogConcave": LogConcave(eta=float(eta), M_eta=M_eta)}
    return make_model(dim, value, gradient, np.zeros(dim), 1.0 / s, family="huber",
                      params={"dim": dim, "scale": s, "eta": float(eta)},
                      certificates=certs, variance_integral=var)


def quadratic_cosine(dim: int, amplitude: float = 0.5) -> PotentialModel:
    """U(x) = |x|^2 / 2 + a cos(x_1), a bounded perturbation of the Gaussian.

    Strongly convex when a < 1; for a > 1 the origin is a saddle and the two
    minimizers (+-s, 0, ..., 0) solve s = a sin(s).
    """
    a = float(amplitude)
    _nonneg("amplitude", a)
    s = 0.0
    if a > 1.0:
        s = optimize.brentq(lambda t: t - a * np.sin(t), 1e-9, np.pi, xtol=1e-15)
    xs = np.zeros(dim)
    xs[0] = s

    def raw(x):
        x = np.asarray(x, float)
        return 0.5 * _sqnorm(x) + a * np.cos(x[..., 0])

    def gradient(x):
        g = np.array(x, dtype=float, copy=True)
        g[..., 0] -= a * np.sin(g[..., 0])
        return g

    def u2(x):
        return a * np.cos(np.asarray(x, float)[..., 0])

    def grad_u2(x):
        x = np.asarray(x, float)
        g = np.zeros_like(x)
        g[..., 0] = -a * np.sin(x[..., 0])
        return g

    certs = {
        # <grad U(x), x - x*> >= |y|^2 - (s + a)|y| >= |y|^2 / 2 for |y| >= 2(s + a)
        "Superexponential": Superexponential(rho=0.5, alpha=2.0, M_rho=2.0 * (s + a)),
        "PerturbedStronglyConvex": PerturbedStronglyConvex(
            m=1.0, L1=1.0, xstar1=np.zeros(dim), sup_U2=a, sup_gradU2=a, osc_U2=2.0 * a,
            u2=u2, grad_u2=grad_u2),
    }
    if a < 1.0:
        certs["StronglyConvexOutsideBall"] = StronglyConvexOutsideBall(m=1.0 - a, M_s=0.0)
        # U >= r^2/2 - 2a >= r as soon as r >= 1 + sqrt(1 + 4a)
        certs["LogConcave"] = LogConcave(eta=1.0, M_eta=1.0 + np.sqrt(1.0 + 4.0 * a))
    # coordinates 2..d are standard normal; x_1 is symmetric with a 1-D density
    w = lambda t, k: t ** k * np.exp(-0.5 * t * t - a * np.cos(t) + a)  # noqa: E731
    m2 = integrate.quad(w, -np.inf, np.inf, args=(2,), epsrel=1e-13)[0]
    m0 = integrate.quad(w, -np.inf, np.inf, args=(0,), epsrel=1e-13)[0]
    return make_model(dim, raw, gradient, xs, 1.0 + a, family="quadratic_cosine",
                      params={"dim": dim, "amplitude": a}, certificates=certs,
                      variance_integral=(dim - 1) + m2 / m0)


FAMILIES = {
    "isotropic_quadratic": isotropic_quadratic,
    "anisotropic_quadratic": anisotropic_quadratic,
    "huber": huber,
    "quadratic_cosine": quadratic_cosine,
}


def build_family(name: str, **params) -> PotentialModel:
    """Instantiate a registered closed-form family by name."""
    try:
        factory = FAMILIES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown potential family {name!r}; choose from {sorted(FAMILIES)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for family {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def _finite_eval(model, pts):
    u = np.asarray(model.value(pts), float)
    g = np.asarray(model.gradient(pts), float)
    bad = ~(np.isfinite(u) & np.all(np.isfinite(g), axis=-1))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"potential evaluation is not finite at point {pts[i].tolist()}")
    return u, g


def eval_gradient_check(model: PotentialModel, points, h: float = 1e-5) -> float:
    """Max over points and coordinates of |central difference - gradient| / max(1, |gradient|)."""
    if h <= 0:
        raise DomainError("h must be > 0")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise DomainError("points must be nonempty")
    _, g = _finite_eval(model, pts)
    eye = np.eye(model.dim) * h
    fd = (model.value(pts[:, None, :] + eye) - model.value(pts[:, None, :] - eye)) / (2 * h)
    if not np.all(np.isfinite(fd)):
        i = int(np.flatnonzero(~np.all(np.isfinite(fd), axis=1))[0])
        raise EvaluationError(f"finite difference is not finite near point {pts[i].tolist()}")
    scale = np.maximum(1.0, np.linalg.norm(g, axis=1))[:, None]
    return float(np.max(np.abs(fd - g) / scale))


@dataclass
class ViolationReport:
    """Points (or pairs) where a sampled certificate inequality failed."""

    certificate: str
    n_checked: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __bool__(self):
        # truthy when there is something to report, like a list
        return bool(self.violations)


def _ball(rng, n, dim, radius, center):
    z = rng.standard_normal((n, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    return center + z * r[:, None]


_RTOL = 1e-10


def _record(report, mask, what, *cols):
    for i in np.flatnonzero(mask):
        report.violations.append((what,) + tuple(np.asarray(c[i]).tolist() for c in cols))


def verify_certificate(model: PotentialModel, cert, n_samples: int = 1000,
                       radius: float = 10.0, seed=0) -> ViolationReport:
    """Probe the class inequality of ``cert`` at points drawn uniformly in B(x*, radius).

    A pass is evidence, not proof.  Violations are (kind, point(s), lhs, rhs).
    """
    if n_samples < 1 or radius <= 0:
        raise DomainError("need n_samples >= 1 and radius > 0")
    rng = np.random.default_rng(seed)
    xs = model.minimizer
    x = _ball(rng, n_samples, model.dim, radius, xs)
    y = _ball(rng, n_samples, model.dim, radius, xs)
    ux, gx = _finite_eval(model, x)
    uy, gy = _finite_eval(model, y)
    report = ViolationReport(type(cert).__name__, n_samples)
    tol = lambda v: _RTOL * np.maximum(1.0, np.abs(v))  # noqa: E731

    if isinstance(cert, Superexponential):
        r = np.linalg.norm(x - xs, axis=1)
        lhs = np.einsum("ij,ij->i", gx, x - xs)
        rhs = cert.rho * r ** cert.alpha
        _record(report, (r >= cert.M_rho) & (lhs < rhs - tol(rhs)), "superexp", x, lhs, rhs)
    elif isinstance(cert, LogConcave):
        r = np.linalg.norm(x - xs, axis=1)
        rhs = cert.eta * r
        _record(report, (r >= cert.M_eta) & (ux < rhs - tol(rhs)), "growth", x, ux, rhs)
        _check_midpoint(model, report, x, y, ux, uy)
    elif isinstance(cert, StronglyConvexOutsideBall):
        dxy = x - y
        n2 = _sqnorm(dxy)
        lhs = np.einsum("ij,ij->i", gx - gy, dxy)
        rhs = cert.m * n2
        far = np.sqrt(n2) >= cert.M_s
        _record(report, far & (lhs < rhs - tol(rhs)), "strong", np.stack([x, y], 1), lhs, rhs)
        _check_midpoint(model, report, x, y, ux, uy)
    elif isinstance(cert, PerturbedStronglyConvex):
        if cert.u2 is None or cert.grad_u2 is None:
            raise ConfigurationError("checking a PerturbedStronglyConvex certificate needs u2 and grad_u2")
        v2x, v2y = cert.u2(x), cert.u2(y)
        g2x, g2y = cert.grad_u2(x), cert.grad_u2(y)
        dxy = x - y
        n2 = _sqnorm(dxy)
        g1 = (gx - g2x) - (gy - g2y)
        lhs = np.einsum("ij,ij->i", g1, dxy)
        rhs = cert.m * n2
        _record(report, lhs < rhs - tol(rhs), "U1 strong convexity", np.stack([x, y], 1), lhs, rhs)
        lip = np.linalg.norm(g1, axis=1)
        rhs = cert.L1 * np.sqrt(n2)
        _record(report, lip > rhs + tol(rhs), "U1 smoothness", np.stack([x, y], 1), lip, rhs)
        a2 = np.abs(v2x)
        _record(report, a2 > cert.sup_U2 + tol(cert.sup_U2), "sup U2", x, a2, np.full_like(a2, cert.sup_U2))
        n2g = np.linalg.norm(g2x, axis=1)
        _record(report, n2g > cert.sup_gradU2 + tol(cert.sup_gradU2), "sup grad U2", x, n2g,
                np.full_like(n2g, cert.sup_gradU2))
        osc = max(v2x.max(), v2y.max()) - min(v2x.min(), v2y.min())
        if osc > cert.osc_U2 + _RTOL * max(1.0, cert.osc_U2):
            report.violations.append(("osc U2", float(osc), cert.osc_U2))
        g1star = np.linalg.norm(model.gradient(cert.xstar1) - cert.grad_u2(cert.xstar1))
        if g1star > 1e-8 * max(1.0, cert.L1):
            report.violations.append(("xstar1 not stationary for U1", cert.xstar1.tolist(), float(g1star)))
    else:
        raise ConfigurationError(f"unknown certificate type {type(cert).__name__}")
    return report


def _check_midpoint(model, report, x, y, ux, uy):
    um = model.value(0.5 * (x + y))
    rhs = 0.5 * (ux + uy)
    _record(report, um > rhs + _RTOL * np.maximum(1.0, np.abs(rhs)), "midpoint convexity",
            np.stack([x, y], 1), um, rhs)


def verify_lipschitz(model: PotentialModel, n_pairs: int = 1000, radius: float = 10.0, seed=0) -> float:
    """Largest sampled ratio |grad U(x) - grad U(y)| / (L |x - y|); <= 1 when L is valid."""
    rng = np.random.default_rng(seed)
    x = _ball(rng, n_pairs, model.dim, radius, model.minimizer)
    y = _ball(rng, n_pairs, model.dim, radius, model.minimizer)
    _, gx = _finite_eval(model, x)
    _, gy = _finite_eval(model, y)
    num = np.linalg.norm(gx - gy, axis=1)
    den = model.lipschitz_L * np.linalg.norm(x - y, axis=1)
    return float(np.max(num / den))
