"""
Explicit convergence constants and total-variation bounds for ULA.

The master bound for the chain Q started at x, split at a burn-in index n < p, reads

    ||delta_x Q^p - pi||_TV <= 2^{-1/2} L (sum_{k=n+1}^p {gamma_k^3 A / 3 + d gamma_k^2})^{1/2}
                                + C(delta_x Q^n) kappa^{Gamma_{n+1,p}}

where TV is the unnormalized norm sup_{|f| <= 1} |mu(f) - nu(f)| (diameter 2).  The
``route`` decides where A, C and kappa come from:

==================  ===========================  ============================================
route               certificate                  ergodicity argument
==================  ===========================  ============================================
UserSupplied        Superexponential             V-uniform ergodicity with user (C, upsilon)
Poincare            Superexponential             Lyapunov-based Poincare constant
Bobkov              LogConcave                   variance-based Poincare constant
ReflectionConvex    LogConcave                   reflection coupling, two-tail form
StrongConvex        StronglyConvexOutsideBall    reflection coupling, dimension-free kappa
LogSobolev          PerturbedStronglyConvex      log-Sobolev with bounded perturbation
==================  ===========================  ============================================

All powers lambda^a, kappa^Gamma and factorial prefactors are assembled in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import special

from . import schedule as sch
from .errors import (ConfigurationError, DomainError, InfeasibleError,
                     NumericRangeError)
from .potentials import (LogConcave, PerturbedStronglyConvex, PotentialModel,
                         StronglyConvexOutsideBall, Superexponential, a_alpha)

__all__ = [
    "ROUTES",
    "ROUTE_CLASS",
    "DriftConstants",
    "ErgodicityRate",
    "RouteInputs",
    "TVBoundCurve",
    "Plan",
    "FixedBudget",
    "BiasBound",
    "ScalingReport",
    "eval_F",
    "eval_G",
    "log_F",
    "log_G",
    "eval_omega",
    "euler_drift",
    "log_lyapunov",
    "A_bound",
    "ergodicity_rate",
    "C_bound",
    "log_C_bound",
    "tv_bound_curve",
    "bias_bound_B",
    "plan_precision",
    "plan_fixed_budget",
    "scaling_study",
    "generic_sde_rate",
    "generic_sde_strong_rate",
    "generic_sde_curve",
    "generic_sde_strong_curve",
    "langevin_sde_constants",
    "rescaled_to_langevin_time",
    "langevin_to_rescaled_time",
]

ROUTE_CLASS = {
    "UserSupplied": Superexponential,
    "Poincare": Superexponential,
    "Bobkov": LogConcave,
    "ReflectionConvex": LogConcave,
    "StrongConvex": StronglyConvexOutsideBall,
    "LogSobolev": PerturbedStronglyConvex,
}
ROUTES = tuple(ROUTE_CLASS) + ("GenericSDE",)

# routes whose C(delta_x Q^n) involves gamma_n or D_n and so needs n >= 1
_NEEDS_N1 = {"Poincare", "Bobkov", "LogSobolev"}
# windows up to this length are optimized over every n; longer ones use a candidate set
EXHAUSTIVE_N_LIMIT = 200_000
_CUMSUM_LIMIT = 1 << 21
_LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# elementary functions
# ---------------------------------------------------------------------------

def _check_lambda(lam):
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


def log_G(log_lam, log_c, gamma, log_w):
    """log G(lambda, c, gamma, w) with G = w + c / (-lambda^gamma log lambda)."""
    second = log_c - gamma * log_lam - np.log(-log_lam)
    return np.logaddexp(log_w, second)


def log_F(log_lam, a, log_c, gamma, log_w):
    """log F(lambda, a, c, gamma, w) with F = lambda^a w + c / (-lambda^gamma log lambda)."""
    second = log_c - gamma * log_lam - np.log(-log_lam)
    return np.logaddexp(np.asarray(a) * log_lam + log_w, second)


def _finite_exp(logv, what):
    v = np.exp(logv)
    if not np.all(np.isfinite(v)):
        raise NumericRangeError(f"{what} overflows double precision (log value {np.max(logv)})")
    return v


def eval_F(lam, a, c, gamma, w):
    """F(lambda, a, c, gamma, w) = lambda^a w + c (-lambda^gamma log lambda)^{-1}."""
    _check_lambda(lam)
    if np.any(np.asarray(a) < 0) or c < 0 or gamma <= 0 or np.any(np.asarray(w) < 0):
        raise DomainError("F needs a >= 0, c >= 0, gamma > 0 and w >= 0")
    out = _finite_exp(log_F(math.log(lam), a, _log(c), gamma, _log(w)), "F")
    return float(out) if np.ndim(out) == 0 else out


def eval_G(lam, c, gamma, w):
    """G(lambda, c, gamma, w) = w + c (-lambda^gamma log lambda)^{-1}."""
    _check_lambda(lam)
    if c < 0 or gamma <= 0 or np.any(np.asarray(w) < 0):
        raise DomainError("G needs c >= 0, gamma > 0 and w >= 0")
    out = _finite_exp(log_G(math.log(lam), _log(c), gamma, _log(w)), "G")
    return float(out) if np.ndim(out) == 0 else out


def eval_omega(epsilon, R):
    """omega(eps, R) = R^2 / (2 Phi^{-1}(1 - eps/2))^2."""
    eps = np.asarray(epsilon, dtype=float)
    if np.any(~((eps > 0) & (eps < 1))):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if np.any(np.asarray(R) < 0):
        raise DomainError("R must be >= 0")
    q = -special.ndtri(eps / 2.0)          # Phi^{-1}(1 - eps/2) without cancellation
    out = np.asarray(R, dtype=float) ** 2 / (2.0 * q) ** 2
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# drift constants
# ---------------------------------------------------------------------------

LYAPUNOV_KINDS = ("ExpHalfU", "ExpEtaDist", "SqDist")


@dataclass(frozen=True)
class DriftConstants:
    """R_gamma V <= lambda^gamma V + gamma c for all gamma in (0, gamma_bar]."""

    log_lam: float
    log_c: float
    gamma_bar: float
    lyapunov: str
    klass: str
    eta: Optional[float] = None
    K: Optional[float] = None
    R_c: Optional[float] = None
    varsigma: Optional[float] = None

    def __post_init__(self):
        if not self.log_lam < 0:
            raise InfeasibleError(f"drift rate lambda = exp({self.log_lam}) is not < 1")
        if self.lyapunov not in LYAPUNOV_KINDS:
            raise ConfigurationError(f"unknown Lyapunov descriptor {self.lyapunov!r}")

    @property
    def lam(self) -> float:
        return math.exp(self.log_lam)

    @property
    def c(self) -> float:
        return math.exp(self.log_c)

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "log_lambda": self.log_lam, "c": self.c, "log_c": self.log_c,
                "gamma_bar": self.gamma_bar, "lyapunov": self.lyapunov, "class": self.klass,
                "eta": self.eta, "K": self.K, "R_c": self.R_c}


def _resolve_cert(model: PotentialModel, cert, klass):
    if cert is None:
        cert = model.certificate(klass.__name__)
    if not isinstance(cert, klass):
        raise ConfigurationError(
            f"expected a {klass.__name__} certificate, got {type(cert).__name__}")
    return cert


def euler_drift(model: PotentialModel, cert, gamma_bar: float) -> DriftConstants:
    """Foster-Lyapunov constants of the Euler kernel R_gamma, gamma <= gamma_bar."""
    d, L = model.dim, model.lipschitz_L
    gb = float(gamma_bar)
    if not gb > 0:
        raise DomainError(f"gamma_bar must be > 0, got {gb}")
    if isinstance(cert, Superexponential):
        if not gb < 1.0 / L:
            raise DomainError(
                f"superexponential drift needs gamma_bar < 1/L = {1.0 / L:.6g} (open interval), "
                f"got {gb:.6g}")
        log_lam = -d * L / (2.0 * (1.0 - L * gb))
        K = max(cert.M_rho, (-8.0 * log_lam / cert.rho ** 2) ** (1.0 / (2.0 * (cert.alpha - 1.0))))
        # sup_{B(x*, K)} e^{U/2} <= e^{L K^2 / 4}
        log_c = _LOG2 + math.log(-log_lam) - gb * log_lam + L * K * K / 4.0
        return DriftConstants(log_lam, log_c, gb, "ExpHalfU", "Superexponential", K=K)
    if isinstance(cert, LogConcave):
        if not gb <= 1.0 / L:
            raise DomainError(
                f"log-concave drift needs gamma_bar <= 1/L = {1.0 / L:.6g}, got {gb:.6g}")
        eta = cert.eta
        log_lam = -eta * eta * (math.sqrt(2.0) - 1.0) / 16.0
        R_c = max(1.0, 2.0 * d / eta, cert.M_eta)
        e4 = (eta * gb / 4.0) * (d + eta * gb / 4.0)
        log_c = (math.log((eta / 4.0) * (d + eta * gb / 4.0) - log_lam)
                 + eta * math.sqrt(R_c * R_c + 1.0) / 4.0 + e4)
        return DriftConstants(log_lam, log_c, gb, "ExpEtaDist", "LogConcave", eta=eta, R_c=R_c)
    if isinstance(cert, StronglyConvexOutsideBall):
        cap = 2.0 * cert.m / L ** 2
        if not gb < cap:
            raise DomainError(
                f"strong-convexity drift needs gamma_bar < 2m/L^2 = {cap:.6g}, got {gb:.6g}")
        log_lam = -2.0 * cert.m + gb * L * L
        c = 2.0 * (d + cert.m * cert.M_s ** 2)
        return DriftConstants(log_lam, math.log(c), gb, "SqDist", "StronglyConvexOutsideBall")
    if isinstance(cert, PerturbedStronglyConvex):
        raise ConfigurationError(
            "no Euler drift is certified for PerturbedStronglyConvex; use the LogSobolev route, "
            "which controls moments of |x - x1*|^2 directly")
    raise ConfigurationError(f"unsupported certificate type {type(cert).__name__}")


def log_lyapunov(drift: DriftConstants, model: PotentialModel, x) -> np.ndarray:
    """log V(x) for the drift's Lyapunov function, vectorized over (..., d)."""
    x = np.asarray(x, dtype=float)
    if drift.lyapunov == "ExpHalfU":
        out = 0.5 * np.asarray(model.value(x), dtype=float)
    else:
        r2 = np.einsum("...i,...i->...", x - model.minimizer, x - model.minimizer)
        if drift.lyapunov == "ExpEtaDist":
            out = (drift.eta / 4.0) * np.sqrt(r2 + 1.0)
        else:
            out = _log(r2)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# ergodicity rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RouteInputs:
    """Non-formula inputs and knobs for the routes.

    ``C_half``/``upsilon_half`` are the V_{1/2}-uniform ergodicity constants required
    by the UserSupplied route; ``C_quarter``/``upsilon_quarter`` feed the bias bound.
    ``variance_integral`` overrides the model's value for the Bobkov route.
    ``poincare_sqrt`` selects C = (chi^2 bound)^{1/2}, the form that follows from the
    Poincare decay of the L^2 norm; False reproduces the bound without the square root.
    ``omega_exponent`` selects exp(theta omega / 4) ("statement") or exp(4 omega / theta)
    ("proof") in the reflection constants.
    """

    C_half: Optional[float] = None
    upsilon_half: Optional[float] = None
    C_quarter: Optional[float] = None
    upsilon_quarter: Optional[float] = None
    variance_integral: Optional[float] = None
    variance_provenance: str = "user"
    poincare_sqrt: bool = True
    omega_exponent: str = "statement"

    def __post_init__(self):
        if self.omega_exponent not in ("statement", "proof"):
            raise ConfigurationError("omega_exponent must be 'statement' or 'proof'")
        if self.variance_provenance not in ("exact", "user", "empirical"):
            raise ConfigurationError("variance_provenance must be exact, user or empirical")
        for name in ("C_half", "C_quarter", "variance_integral"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be > 0, got {v}")
        for name in ("upsilon_half", "upsilon_quarter"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be > 0, got {v}")


@dataclass(frozen=True)
class ErgodicityRate:
    """||mu P_t - pi||_TV <= C(mu) kappa^t for the continuous diffusion."""

    route: str
    log_kappa: float
    aux: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.log_kappa < 0 and math.isfinite(self.log_kappa)):
            raise InfeasibleError(
                f"{self.route} route gives log(kappa) = {self.log_kappa}, so kappa is not in (0, 1); "
                f"constants: {self.aux}")

    @property
    def kappa(self) -> float:
        return math.exp(self.log_kappa)

    def as_dict(self) -> dict:
        return {"route": self.route, "kappa": self.kappa, "log_kappa": self.log_kappa, **self.aux}


def _poincare_lyapunov(model, cert: Superexponential, varsigma=0.5):
    d, L = model.dim, model.lipschitz_L
    theta = varsigma * d * L
    K = max((2.0 * d * L / (cert.rho * (1.0 - varsigma))) ** (1.0 / (2.0 * (cert.alpha - 1.0))),
            cert.M_rho)
    # sup_{B(x*, K)} e^{varsigma U} <= e^{varsigma L K^2 / 2}
    log_beta = math.log(theta) + varsigma * L * K * K / 2.0
    return theta, log_beta, K


def _reflection_constants(model, cert: LogConcave, omega_exponent="statement"):
    d, eta = model.dim, cert.eta
    theta = eta * eta / 8.0
    K = max(1.0, cert.M_eta, 4.0 * d / eta)
    s = math.sqrt(K * K + 1.0)
    log_beta = (math.log(eta / 4.0) + math.log((eta / 4.0) * K + d)
                + max(0.0, -math.log(s) + eta * s / 4.0))
    log_bt = log_beta - math.log(theta)                        # log(beta / theta)
    if not log_bt + math.log(4.0) > 0:
        raise InfeasibleError("reflection radius (8/eta) log(4 beta/theta) is not positive")
    R = (8.0 / eta) * (math.log(4.0) + log_bt)
    omega = eval_omega(0.5, R)
    expo = theta * omega / 4.0 if omega_exponent == "statement" else 4.0 * omega / theta
    log_varpi = -_LOG2 * (theta / 4.0) / (log_bt + np.logaddexp(math.log(3.0), math.log(4.0) + expo)
                                          + _LOG2)
    # constant part of Lambda: 2 (beta/theta) e^{expo}
    log_lambda_tail = _LOG2 + log_bt + expo
    return dict(theta=theta, K=K, log_beta=log_beta, beta_over_theta_log=log_bt, R=R,
                omega=omega, exponent=expo, log_varpi=float(log_varpi),
                log_lambda_tail=log_lambda_tail)


def _strong_log_kappa(m, M_s):
    Mt = max(1.0, M_s)
    omega = eval_omega(0.5, Mt)
    denom = np.logaddexp(0.0, m * omega / 4.0) + math.log1p(Mt) + _LOG2
    return -(m / 2.0) * _LOG2 / float(denom), omega


def _variance_integral(model, inputs: RouteInputs):
    if inputs.variance_integral is not None:
        return inputs.variance_integral, inputs.variance_provenance
    if model.variance_integral is None:
        raise ConfigurationError(
            f"the Bobkov route needs the variance integral of pi; family {model.family!r} "
            f"has none built in, pass variance_integral")
    return float(model.variance_integral), "exact"


def ergodicity_rate(route: str, model: PotentialModel, cert=None,
                    inputs: Optional[RouteInputs] = None) -> ErgodicityRate:
    """kappa (and route-specific constants) of the continuous-time Langevin semigroup."""
    inputs = inputs or RouteInputs()
    if route == "GenericSDE":
        raise ConfigurationError("use generic_sde_rate / generic_sde_strong_rate for GenericSDE")
    if route not in ROUTE_CLASS:
        raise ConfigurationError(f"unknown route {route!r}; choose from {list(ROUTES)}")
    cert = _resolve_cert(model, cert, ROUTE_CLASS[route])
    d, L = model.dim, model.lipschitz_L
    if route == "UserSupplied":
        if inputs.upsilon_half is None or inputs.C_half is None:
            raise ConfigurationError(
                "the UserSupplied route needs C_half and upsilon_half (no explicit formula exists)")
        return ErgodicityRate(route, -inputs.upsilon_half,
                              {"C_half": inputs.C_half, "upsilon_half": inputs.upsilon_half,
                               "provenance": "user"})
    if route == "Poincare":
        theta, log_beta, K = _poincare_lyapunov(model, cert)
        osc = L * K * K / 2.0
        log_bracket = np.logaddexp(0.0, math.log(4.0) + log_beta + 2 * math.log(K)
                                   - 2 * math.log(math.pi) + osc)
        log_kappa = -math.exp(math.log(theta) - float(log_bracket))
        return ErgodicityRate(route, log_kappa, {"theta_half": theta, "log_beta_half": log_beta,
                                                 "K_half": K, "osc_U_on_K": osc})
    if route == "Bobkov":
        var, prov = _variance_integral(model, inputs)
        return ErgodicityRate(route, -1.0 / (432.0 * var),
                              {"variance_integral": var, "provenance": prov})
    if route == "ReflectionConvex":
        rc = _reflection_constants(model, cert, inputs.omega_exponent)
        aux = {k: v for k, v in rc.items() if k != "log_varpi"}
        aux["delta"] = 2.0 * math.exp(rc["beta_over_theta_log"])
        return ErgodicityRate(route, rc["log_varpi"], aux)
    if route == "StrongConvex":
        log_kappa, omega = _strong_log_kappa(cert.m, cert.M_s)
        return ErgodicityRate(route, log_kappa, {"m": cert.m, "M_s": cert.M_s, "omega": omega})
    # LogSobolev
    varpi = 2.0 * cert.m * cert.L1 / (cert.m + cert.L1)
    return ErgodicityRate(route, -cert.m * math.exp(-cert.osc_U2),
                          {"C_LS": math.exp(cert.osc_U2) / cert.m, "osc_U2": cert.osc_U2,
                           "varpi": varpi})


# ---------------------------------------------------------------------------
# A(gamma, x) and C(delta_x Q^n)
# ---------------------------------------------------------------------------

def _x(model, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.dim:
        raise ConfigurationError(f"start point has dimension {x.shape[0]}, model has {model.dim}")
    return x


def _route_check(route, cert, drift):
    if route not in ROUTE_CLASS:
        raise ConfigurationError(f"unknown route {route!r}")
    klass = ROUTE_CLASS[route]
    if not isinstance(cert, klass):
        raise ConfigurationError(
            f"route {route} needs a {klass.__name__} certificate, got {type(cert).__name__}")
    if route != "LogSobolev":
        if drift is None:
            raise ConfigurationError(f"route {route} needs Euler drift constants")
        if drift.klass != klass.__name__:
            raise ConfigurationError(
                f"drift constants come from {drift.klass}, route {route} needs {klass.__name__}")


def _gamma1(schedule):
    return float(sch.gamma(schedule, 1))


def A_bound(route: str, drift: Optional[DriftConstants], model: PotentialModel, cert,
            schedule, x) -> float:
    """Certified bound on sup_k E|grad U(X_k)|^2 for the chain started at x."""
    cert = _resolve_cert(model, cert, ROUTE_CLASS.get(route, type(cert)))
    _route_check(route, cert, drift)
    x = _x(model, x)
    g1 = _gamma1(schedule)
    L, d = model.lipschitz_L, model.dim
    if route == "LogSobolev":
        varpi = 2.0 * cert.m * cert.L1 / (cert.m + cert.L1)
        if g1 > 2.0 / (cert.m + cert.L1) * (1 + 1e-12):
            raise DomainError(f"LogSobolev route needs gamma_1 <= 2/(m+L1) = {2.0 / (cert.m + cert.L1):.6g}")
        g2 = cert.sup_gradU2 ** 2
        dx = float(np.sum((cert.xstar1 - model.minimizer) ** 2))
        return 2.0 * cert.L1 ** 2 * (dx + 2.0 / varpi * (2.0 * d + (g1 + 2.0 / varpi) * g2)) + 2.0 * g2
    if g1 > drift.gamma_bar * (1 + 1e-12):
        raise DomainError(f"gamma_1 = {g1} exceeds the drift's gamma_bar = {drift.gamma_bar}")
    lg = float(log_G(drift.log_lam, drift.log_c, g1, log_lyapunov(drift, model, x)))
    if route in ("UserSupplied", "Poincare"):
        al, rho = cert.alpha, cert.rho
        inner = (al + 1.0) / rho * (a_alpha(cert, L) + 4.0 * (2.0 - al) * (al + 1.0) / (al * rho)
                                    + 2.0 * lg)
        return L * L * inner ** (2.0 / al)
    if route in ("Bobkov", "ReflectionConvex"):
        return L * L * (4.0 / cert.eta * (1.0 + lg)) ** 2
    return L * L * float(_finite_exp(lg, "A bound"))


class _Sums:
    """Partial sums of a schedule needed by the master bound, for splits n < p <= P."""

    def __init__(self, schedule, P: int, L: float, want_dn: bool = False):
        self.s, self.P, self.L, self.want_dn = schedule, int(P), L, want_dn
        self.const = isinstance(schedule, sch.Constant)
        self.arrays = None
        if not self.const and self.P <= _CUMSUM_LIMIT:
            g = sch.steps(schedule, 1, self.P)
            pad = lambda v: np.concatenate(([0.0], np.cumsum(v)))  # noqa: E731
            self.g = np.concatenate(([np.nan], g))
            self.arrays = {"1": pad(g), "2": pad(g ** 2), "3": pad(g ** 3)}
            if want_dn:
                self._dn_check(g[0])
                self.arrays["log1m"] = pad(np.log1p(-L * g))
                self.arrays["ratio"] = pad(g / (1.0 - L * g))
        elif want_dn:
            self._dn_check(_gamma1(schedule))

    def _dn_check(self, g1):
        if not self.L * g1 < 1.0:
            raise DomainError(f"D_n needs L gamma_1 < 1, got L gamma_1 = {self.L * g1}")

    def head(self, n):
        """Gamma_{1,n}, gamma_n (nan for n = 0), and the D_n sums when requested."""
        n = np.asarray(n, dtype=np.int64)
        out = {}
        if self.const:
            g = self.s.gamma
            out["G1n"] = n * g
            out["gn"] = np.where(n >= 1, g, np.nan)
            if self.want_dn:
                out["log1m"] = n * math.log1p(-self.L * g)
                out["ratio"] = n * g / (1.0 - self.L * g)
        elif self.arrays is not None:
            out["G1n"] = self.arrays["1"][n]
            out["gn"] = self.g[n]
            if self.want_dn:
                out["log1m"] = self.arrays["log1m"][n]
                out["ratio"] = self.arrays["ratio"][n]
        else:
            out["G1n"] = np.array([sch.partial_sum(self.s, 1, k) for k in n.ravel()]).reshape(n.shape)
            out["gn"] = np.where(n >= 1, sch.gamma(self.s, np.maximum(n, 1)), np.nan)
            if self.want_dn:
                vals = [(math.fsum(np.log1p(-self.L * sch.steps(self.s, 1, k))),
                         math.fsum(sch.steps(self.s, 1, k) / (1 - self.L * sch.steps(self.s, 1, k))))
                        for k in n.ravel()]
                out["log1m"] = np.array([v[0] for v in vals]).reshape(n.shape)
                out["ratio"] = np.array([v[1] for v in vals]).reshape(n.shape)
        return out

    def tail(self, n, p):
        """Sums over k = n+1..p of gamma_k, gamma_k^2, gamma_k^3."""
        n = np.asarray(n, dtype=np.int64)
        if self.const:
            w = (p - n).astype(float)
            g = self.s.gamma
            return w * g, w * g * g, w * g ** 3
        if self.arrays is not None:
            a = self.arrays
            return a["1"][p] - a["1"][n], a["2"][p] - a["2"][n], a["3"][p] - a["3"][n]
        t = [(sch.partial_sum(self.s, k + 1, p), sch.power_sum(self.s, k + 1, p, 2),
              sch.power_sum(self.s, k + 1, p, 3)) for k in n.ravel()]
        return tuple(np.array([v[i] for v in t]).reshape(n.shape) for i in range(3))


def _log_D_n(d, head):
    with np.errstate(divide="ignore", invalid="ignore"):
        return -(d / 2.0) * (math.log(4.0 * math.pi) + 2.0 * head["log1m"] + np.log(head["ratio"]))


class _RouteEngine:
    """Everything the master bound needs for one (route, model, cert, x, gamma_1, gamma_bar)."""

    def __init__(self, route, model, cert, x, gamma1, gamma_bar, inputs, drift=None, rate=None):
        if route not in ROUTE_CLASS:
            raise ConfigurationError(f"unknown route {route!r}; choose from {list(ROUTE_CLASS)}")
        self.route, self.model = route, model
        self.cert = _resolve_cert(model, cert, ROUTE_CLASS[route])
        self.x = _x(model, x)
        self.inputs = inputs or RouteInputs()
        self.gamma1 = float(gamma1)
        self.gamma_bar = float(gamma_bar)
        if self.gamma1 > self.gamma_bar * (1 + 1e-12):
            raise DomainError(f"gamma_1 = {gamma1} exceeds gamma_bar = {gamma_bar}")
        self.d, self.L = model.dim, model.lipschitz_L
        if drift is None and route != "LogSobolev":
            drift = euler_drift(model, self.cert, self.gamma_bar)
        _route_check(route, self.cert, drift)
        self.drift = drift
        self.rate = rate or ergodicity_rate(route, model, self.cert, self.inputs)
        self.A = A_bound(route, self.drift, model, self.cert, sch.Constant(self.gamma1), self.x)
        self.n_min = 1 if route in _NEEDS_N1 else 0
        self.logV = None if self.drift is None else log_lyapunov(self.drift, model, self.x)
        if route == "Poincare":
            c = self.cert
            self.log_pref = (self.d * math.log(c.alpha + 1.0)
                             + (self.d + 1) / 2.0 * math.log(2 * math.pi) + special.gammaln(self.d)
                             - self.d * math.log(c.rho) - special.gammaln((self.d + 1) / 2.0)
                             + a_alpha(c, self.L))
        elif route == "Bobkov":
            c = self.cert
            t1 = ((self.d + 1) / 2.0 * math.log(2 * math.pi) + special.gammaln(self.d)
                  - self.d * math.log(c.eta) - special.gammaln((self.d + 1) / 2.0))
            t2 = (self.d / 2.0 * math.log(math.pi) + self.d * _log(c.M_eta)
                  - special.gammaln(self.d / 2.0 + 1.0))
            self.log_pref = float(np.logaddexp(t1, t2))
        elif route == "ReflectionConvex":
            self.rc = _reflection_constants(model, self.cert, self.inputs.omega_exponent)
        elif route == "LogSobolev":
            c = self.cert
            if self.gamma1 > 2.0 / (c.m + c.L1) * (1 + 1e-12):
                raise DomainError(f"LogSobolev route needs gamma_1 <= 2/(m+L1) = {2.0 / (c.m + c.L1):.6g}")
        self.Ux = float(model.value(self.x))

    # -- C(delta_x Q^n) in log form ------------------------------------------------------------
    def log_C(self, head):
        r, d = self.route, self.d
        G1n = np.asarray(head["G1n"], dtype=float)
        if r == "UserSupplied":
            return math.log(self.inputs.C_half) + log_F(self.drift.log_lam, G1n, self.drift.log_c,
                                                        self.gamma1, self.logV)
        if r in ("Poincare", "Bobkov"):
            lc = self.log_pref + _log_D_n(d, head) + self.Ux
            return 0.5 * lc if self.inputs.poincare_sqrt else lc
        if r == "StrongConvex":
            c = self.cert
            lf = log_F(self.drift.log_lam, G1n, self.drift.log_c, self.gamma1, self.logV)
            base = 6.0 + 2.0 * math.sqrt(d / c.m + c.M_s ** 2)
            return np.logaddexp(math.log(base), _LOG2 + 0.5 * lf)
        if r == "LogSobolev":
            return 0.5 * _log(np.maximum(self._logsob_C2(head), 0.0))
        # ReflectionConvex: log Lambda_n
        lf = log_F(self.drift.log_lam, G1n, self.drift.log_c, self.gamma1, self.logV)
        first = math.log(0.5) + np.logaddexp(lf, self.rc["beta_over_theta_log"])
        return np.logaddexp(first, self.rc["log_lambda_tail"])

    def _logsob_C2(self, head):
        c, d = self.cert, self.d
        varpi = 2.0 * c.m * c.L1 / (c.m + c.L1)
        gn = np.asarray(head["gn"], dtype=float)
        G1n = np.asarray(head["G1n"], dtype=float)
        g2 = c.sup_gradU2 ** 2
        dx = float(np.sum((self.x - c.xstar1) ** 2))
        return (c.L1 * np.exp(-varpi * G1n / 2.0) * dx
                + c.L1 * gn * (gn + 2.0 / varpi) * g2
                + 2.0 * c.osc_U2
                + 2.0 * c.L1 / varpi * (1.0 - varpi * gn) * (2.0 * d + (self.gamma1 + 2.0 / varpi) * g2)
                - d * (1.0 + np.log(2.0 * gn * c.m) - 2.0 * c.L1 * gn))

    # -- ergodic term -----------------------------------------------------------------------------
    def ergodic(self, head, Gtail):
        logC = self.log_C(head)
        if self.route == "ReflectionConvex":
            th = self.rc["theta"]
            return 2.0 * np.exp(logC - th * Gtail / 4.0) + 4.0 * np.exp(self.rate.log_kappa * Gtail)
        return np.exp(logC + self.rate.log_kappa * Gtail)

    def effective_log_kappa(self):
        if self.route == "ReflectionConvex":
            return max(-self.rc["theta"] / 4.0, self.rate.log_kappa)
        return self.rate.log_kappa

    def disc(self, t2, t3):
        return self.L / math.sqrt(2.0) * np.sqrt(self.A / 3.0 * t3 + self.d * t2)

    def constants(self) -> dict:
        out = {"route": self.route, "A": self.A, "gamma_1": self.gamma1, "gamma_bar": self.gamma_bar,
               "rate": self.rate.as_dict(), "n_min": self.n_min, "U_x": self.Ux}
        if self.drift is not None:
            out["drift"] = self.drift.as_dict()
            out["log_V_x"] = self.logV
        return out


def log_C_bound(route, x, n, schedule, drift, rate, model, cert, inputs=None):
    """log C(delta_x Q^n); vectorized over integer n."""
    cert = _resolve_cert(model, cert, ROUTE_CLASS.get(route, type(cert)))
    _route_check(route, cert, drift)
    n = np.asarray(n, dtype=np.int64)
    if route in _NEEDS_N1 and np.any(n < 1):
        raise DomainError(f"C bound of route {route} needs n >= 1")
    if np.any(n < 0):
        raise DomainError("n must be >= 0")
    g1 = _gamma1(schedule)
    gb = drift.gamma_bar if drift is not None else g1
    eng = _RouteEngine(route, model, cert, x, g1, gb, inputs, drift=drift, rate=rate)
    sums = _Sums(schedule, int(np.max(n)) if n.size else 0, model.lipschitz_L,
                 want_dn=route in ("Poincare", "Bobkov"))
    out = eng.log_C(sums.head(n))
    return float(out) if np.ndim(out) == 0 else out


def C_bound(route, x, n, schedule, drift, rate, model, cert, inputs=None):
    """C(delta_x Q^n) (Lambda(delta_x Q^n) on the ReflectionConvex route)."""
    out = _finite_exp(log_C_bound(route, x, n, schedule, drift, rate, model, cert, inputs), "C bound")
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# TV bound curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TVBoundCurve:
    route: str
    schedule: dict
    split_variant: str
    p: np.ndarray
    n: np.ndarray
    disc: np.ndarray
    erg: np.ndarray
    raw: np.ndarray
    total: np.ndarray
    clamped: np.ndarray
    degenerate: np.ndarray
    constants: dict

    def rows(self):
        for i in range(len(self.p)):
            yield {"p": int(self.p[i]), "n": int(self.n[i]), "term1": float(self.disc[i]),
                   "term2": float(self.erg[i]), "raw": float(self.raw[i]),
                   "total": float(self.total[i]), "clamped": bool(self.clamped[i]),
                   "degenerate_split": bool(self.degenerate[i])}


def _candidates(n_min, p, extra=()):
    if p - n_min <= EXHAUSTIVE_N_LIMIT:
        return np.arange(n_min, p, dtype=np.int64)
    # window lengths w = p - n on a fine geometric grid; any n gives a valid bound
    w = np.unique(np.round(np.geomspace(1, p - n_min, 4000)).astype(np.int64))
    n = np.concatenate((p - w, np.asarray(extra, dtype=np.int64)))
    return np.unique(n[(n >= n_min) & (n < p)])


def _curve_point(eng: _RouteEngine, sums: _Sums, p: int, n_cand):
    n_cand = np.asarray(n_cand, dtype=np.int64)
    head = sums.head(n_cand)
    t1, t2, t3 = sums.tail(n_cand, p)
    disc = eng.disc(t2, t3)
    with np.errstate(over="ignore"):
        erg = eng.ergodic(head, t1)
    raw = disc + erg
    raw = np.where(np.isnan(raw), np.inf, raw)
    i = int(np.argmin(raw))
    return int(n_cand[i]), float(disc[i]), float(erg[i]), float(raw[i])


def tv_bound_curve(route: str, model: PotentialModel, cert, schedule, x, p_max: Optional[int] = None,
                   split_variant: str = "optimize", *, p_values: Optional[Sequence[int]] = None,
                   gamma_bar: Optional[float] = None, inputs: Optional[RouteInputs] = None
                   ) -> TVBoundCurve:
    """Certified bound on ||delta_x Q^p - pi||_TV (unnormalized, <= 2) for each probed p.

    ``split_variant`` is "optimize" (minimize over every admissible n < p), "KappaGamma"
    or "LogGamma".  ``gamma_bar`` defaults to gamma_1, the tightest admissible choice.
    """
    if split_variant not in ("optimize", "KappaGamma", "LogGamma"):
        raise ConfigurationError(f"unknown split variant {split_variant!r}")
    if p_values is None:
        if p_max is None:
            raise ConfigurationError("give p_max or p_values")
        p_values = np.arange(1, int(p_max) + 1)
    ps = np.asarray(sorted(set(int(p) for p in p_values)), dtype=np.int64)
    if ps.size == 0 or ps[0] < 1:
        raise DomainError("probed p must be >= 1")
    g1 = _gamma1(schedule)
    eng = _RouteEngine(route, model, cert, x, g1, g1 if gamma_bar is None else gamma_bar, inputs)
    sums = _Sums(schedule, int(ps[-1]), eng.L, want_dn=route in ("Poincare", "Bobkov"))
    kappa_split = math.exp(eng.effective_log_kappa())
    out = {k: np.zeros(ps.size) for k in ("disc", "erg", "raw")}
    n_used = np.zeros(ps.size, dtype=np.int64)
    degenerate = np.zeros(ps.size, dtype=bool)
    for i, p in enumerate(ps):
        p = int(p)
        if p <= eng.n_min:
            n_used[i], out["disc"][i], out["erg"][i], out["raw"][i] = 0, np.nan, np.nan, 2.0
            degenerate[i] = True
            continue
        if split_variant == "optimize":
            extra = [sch.burnin_split(schedule, p, kappa_split, v).n for v in ("KappaGamma", "LogGamma")]
            cand = _candidates(eng.n_min, p, extra)
        else:
            b = sch.burnin_split(schedule, p, kappa_split, split_variant)
            cand = [max(b.n, eng.n_min)]
            degenerate[i] = b.degenerate or b.n < eng.n_min
        n_used[i], out["disc"][i], out["erg"][i], out["raw"][i] = _curve_point(eng, sums, p, cand)
    total = np.minimum(out["raw"], 2.0)
    consts = eng.constants()
    return TVBoundCurve(route, sch.schedule_to_spec(schedule), split_variant, ps, n_used,
                        out["disc"], out["erg"], out["raw"], total, out["raw"] > 2.0, degenerate,
                        consts)


# ---------------------------------------------------------------------------
# bias of the invariant measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasBound:
    value: float
    leading_coefficient: float
    grad_norm_sq: float
    beta_over_theta: float


def _grad_weighted_norm_sq(model, radius=None, n_dirs=64, n_radii=400, seed=0):
    """sup_x |grad U(x)|^2 / V^{1/2}(x)^2 with V = e^{U/2}, probed on rays from x*."""
    rng = np.random.default_rng(seed)
    d = model.dim
    dirs = rng.standard_normal((n_dirs, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if d <= 3:
        dirs = np.concatenate([dirs, np.eye(d), -np.eye(d)])
    R = radius or max(20.0, 40.0 / math.sqrt(model.lipschitz_L) * math.sqrt(d))
    r = np.linspace(0.0, R, n_radii)
    pts = model.minimizer + r[None, :, None] * dirs[:, None, :]
    g2 = np.sum(model.gradient(pts) ** 2, axis=-1)
    ratio = g2 * np.exp(-0.5 * model.value(pts))         # |grad U|^2 / e^{U/2}
    if not np.all(np.isfinite(ratio)):
        raise InfeasibleError("|grad U|_{V^1/2} probe hit non-finite values")
    peak, edge = ratio.max(), ratio[:, -10:].max()
    if edge > 1e-6 * max(peak, 1e-300) and edge >= ratio[:, -20:-10].max():
        raise InfeasibleError("|grad U|_{V^1/2} does not decay on the probe grid; cannot certify it finite")
    return float(peak)


def bias_bound_B(model: PotentialModel, cert, drift: DriftConstants, rate: ErgodicityRate,
                 gamma: float, v: float = 1.0, *, C_quarter: Optional[float] = None,
                 beta_over_theta: Optional[float] = None, grad_norm_sq: Optional[float] = None,
                 ) -> BiasBound:
    """B(gamma, v): V^{1/2}-norm bias of the constant-step chain (superexponential class).

    ``rate`` carries kappa = exp(-upsilon_{1/4}); ``C_quarter`` is user-supplied.
    ``beta_over_theta`` defaults to beta_{1/2}/theta_{1/2} = e^{L K_{1/2}^2 / 4} and
    ``grad_norm_sq`` to a ray probe of sup |grad U|^2 e^{-U/2}.
    """
    cert = _resolve_cert(model, cert, Superexponential)
    if C_quarter is None:
        raise ConfigurationError("bias_bound_B needs the user-supplied constant C_quarter")
    if not 0 < gamma < 1.0 / model.lipschitz_L:
        raise DomainError(f"gamma must lie in (0, 1/L), got {gamma}")
    if v < 0:
        raise DomainError("v must be >= 0")
    L, d, kap = model.lipschitz_L, model.dim, rate.kappa
    if beta_over_theta is None:
        theta, log_beta, _ = _poincare_lyapunov(model, cert)
        beta_over_theta = math.exp(log_beta - math.log(theta))
    if grad_norm_sq is None:
        grad_norm_sq = _grad_weighted_norm_sq(model)
    pre = L * L * max(1.0, C_quarter ** 2) / (1.0 - kap) ** 2

    def G(g):
        return float(np.exp(log_G(drift.log_lam, drift.log_c, g, _log(v))))

    Gg = G(gamma)
    B2 = pre * (1.0 + gamma) * (2.0 * Gg + beta_over_theta) * (gamma * d + gamma ** 2 / 3.0 * grad_norm_sq * Gg)
    G0 = float(np.exp(np.logaddexp(_log(v), drift.log_c - np.log(-drift.log_lam))))
    lead = math.sqrt(pre * (2.0 * G0 + beta_over_theta) * d)
    return BiasBound(math.sqrt(B2), lead, grad_norm_sq, beta_over_theta)


# ---------------------------------------------------------------------------
# planners
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Plan:
    route: str
    gamma: float
    p: int
    T: float
    epsilon: float
    gamma_bar: float
    gamma_cap: float
    A_bar: float
    C_bar: float
    log_C_bar: float
    log_kappa: float
    certified_bound: float
    certified: bool
    n_split: int
    degenerate: bool
    constants: dict

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("route", "gamma", "p", "T", "epsilon", "gamma_bar",
                                             "gamma_cap", "A_bar", "C_bar", "log_C_bar", "log_kappa",
                                             "certified_bound", "certified", "n_split", "degenerate")}
        out["kappa"] = math.exp(self.log_kappa)
        out["constants"] = self.constants
        return out


def _uniform_constants(route, model, cert, x, gamma_bar, inputs):
    """(A_bar, log C_bar, engine) with every constant taken at gamma_1 = gamma_bar."""
    if route in _NEEDS_N1:
        raise InfeasibleError(
            f"route {route} has no step-uniform C bound (it grows without limit as gamma -> 0), "
            f"so the precision and fixed-budget planners cannot be applied; use tv_bound_curve")
    eng = _RouteEngine(route, model, cert, x, gamma_bar, gamma_bar, inputs)
    lg = float(log_G(eng.drift.log_lam, eng.drift.log_c, gamma_bar, eng.logV))
    if route == "StrongConvex":
        c = eng.cert
        log_Cbar = float(np.logaddexp(math.log(6.0 + 2.0 * math.sqrt(model.dim / c.m + c.M_s ** 2)),
                                      _LOG2 + 0.5 * lg))
    elif route == "UserSupplied":
        log_Cbar = math.log(eng.inputs.C_half) + lg
    else:  # ReflectionConvex: Lambda tilde
        first = math.log(0.5) + float(np.logaddexp(lg, eng.rc["beta_over_theta_log"]))
        log_Cbar = float(np.logaddexp(first, eng.rc["log_lambda_tail"]))
    return eng.A, log_Cbar, eng


def default_gamma_bar(route, model, cert=None) -> float:
    """A conventional admissible gamma_bar per route (half the open caps)."""
    L = model.lipschitz_L
    c = _resolve_cert(model, cert, ROUTE_CLASS[route])
    if route == "StrongConvex":
        return c.m / L ** 2
    if route in ("ReflectionConvex", "Bobkov"):
        return 1.0 / L
    if route == "LogSobolev":
        return 2.0 / (c.m + c.L1)
    return 0.5 / L


def plan_precision(route: str, model: PotentialModel, cert, x, epsilon: float,
                   gamma_bar: Optional[float] = None, inputs: Optional[RouteInputs] = None) -> Plan:
    """Constant step gamma and iteration count p with certified TV precision epsilon."""
    if not 0 < epsilon < 2:
        raise DomainError(f"epsilon must lie in (0, 2), got {epsilon}")
    cert = _resolve_cert(model, cert, ROUTE_CLASS.get(route, type(cert)))
    gb = default_gamma_bar(route, model, cert) if gamma_bar is None else float(gamma_bar)
    A_bar, log_Cbar, eng = _uniform_constants(route, model, cert, x, gb, inputs)
    d, L = model.dim, model.lipschitz_L
    log_kappa = eng.rate.log_kappa
    if route == "ReflectionConvex":
        th = eng.rc["theta"]
        T = max(4.0 / th * (math.log(8.0 / epsilon) + log_Cbar),
                math.log(16.0 / epsilon) / (-log_kappa))
    else:
        T = (log_Cbar - math.log(epsilon / 2.0)) / (-log_kappa)
    degenerate = T <= 0
    if degenerate:
        cap, gamma, p = math.inf, gb, 1
    else:
        q = (2.0 / 3.0) * A_bar * epsilon ** 2 / (L * L * T)
        cap = (epsilon ** 2 / (L * L * T)) / (d + math.sqrt(d * d + q))
        gamma = min(cap, gb)
        if not T / gamma < 2.0 ** 62:
            raise NumericRangeError(
                f"planned iteration count T/gamma = {T / gamma:.3g} exceeds 2^62; "
                f"the bound cannot be re-certified in 64-bit step indices")
        p = int(math.floor(T / gamma)) + 1
    curve = tv_bound_curve(route, model, cert, sch.Constant(gamma), x, p_values=[p],
                           gamma_bar=gamma, inputs=inputs)
    bound = float(curve.total[0])
    consts = {"planning": eng.constants(), "certification": curve.constants}
    C_bar = math.exp(log_Cbar) if log_Cbar < 709.0 else math.inf
    return Plan(route, gamma, p, T, float(epsilon), gb, cap, A_bar, C_bar, log_Cbar, log_kappa,
                bound, bool(bound <= epsilon), int(curve.n[0]), degenerate, consts)


@dataclass(frozen=True)
class FixedBudget:
    gamma: float
    bound: float
    order_form: Optional[float]
    p: int
    n: int
    disc: float
    erg: float


def plan_fixed_budget(route: str, model: PotentialModel, cert, x, p: int, n: int,
                      gamma_bar: Optional[float] = None, inputs: Optional[RouteInputs] = None
                      ) -> FixedBudget:
    """Step gamma = log(p-n) / ((p-n)(-log kappa)) for a fixed budget p and split n.

    ``bound`` is the master bound evaluated at that gamma and split; ``order_form`` is
    the compact (p-n)^{-1/2}{C_bar (p-n)^{-1/2} + log(p-n)(d + A_bar log(p-n)/(p-n))^{1/2}}
    expression (None on routes without a step-uniform C bound).
    """
    p, n = int(p), int(n)
    if not p > n >= 0:
        raise DomainError(f"need p > n >= 0, got p={p}, n={n}")
    cert = _resolve_cert(model, cert, ROUTE_CLASS.get(route, type(cert)))
    gb = default_gamma_bar(route, model, cert) if gamma_bar is None else float(gamma_bar)
    probe = _RouteEngine(route, model, cert, x, gb, gb, inputs)
    r = -probe.effective_log_kappa()
    w = p - n
    gamma = math.log(w) / (w * r) if w > 1 else 0.0
    if not 0 < gamma <= gb:
        # smallest window w >= 3 with log(w)/w <= gb r (log(w)/w decreases beyond e)
        lo, hi = 3, 3
        while math.log(hi) / hi > gb * r:
            hi *= 2
        while lo < hi:
            mid = (lo + hi) // 2
            if math.log(mid) / mid <= gb * r:
                hi = mid
            else:
                lo = mid + 1
        raise InfeasibleError(
            f"fixed-budget step gamma = {gamma:.6g} is not in (0, gamma_bar = {gb:.6g}]; "
            f"use p >= {n + lo} for n = {n}")
    eng = _RouteEngine(route, model, cert, x, gamma, gamma, inputs)
    sums = _Sums(sch.Constant(gamma), p, eng.L, want_dn=route in ("Poincare", "Bobkov"))
    if n < eng.n_min:
        raise DomainError(f"route {route} needs n >= {eng.n_min}")
    _, disc, erg, raw = _curve_point(eng, sums, p, [n])
    order = None
    if route not in _NEEDS_N1:
        A_bar, log_Cbar, _ = _uniform_constants(route, model, cert, x, gb, inputs)
        lw = math.log(w)
        order = w ** -0.5 * (math.exp(log_Cbar) * w ** -0.5
                             + lw * math.sqrt(model.dim + A_bar * lw / w))
    return FixedBudget(gamma, min(raw, 2.0), order, p, n, disc, erg)


# ---------------------------------------------------------------------------
# dimension scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingReport:
    route: str
    family: str
    epsilon: float
    d: np.ndarray
    gamma: np.ndarray
    p: np.ndarray
    T: np.ndarray
    slope_gamma: float
    slope_p: float
    slope_T: float
    certified: np.ndarray


def scaling_study(route: str, family, d_list: Sequence[int], epsilon: float, *,
                  family_params: Optional[dict] = None, gamma_bar=None,
                  inputs: Optional[RouteInputs] = None, start=None) -> ScalingReport:
    """Least-squares slopes of log gamma, log p and log T against log d from plan_precision.

    ``family`` is a callable dim -> PotentialModel (or a registered family name).
    ``start`` maps a model to the start point (default: its minimizer).
    """
    from .potentials import build_family

    d_list = sorted(set(int(d) for d in d_list))
    if len(d_list) < 3:
        raise ConfigurationError("scaling_study needs at least three distinct dimensions to fit slopes")
    params = dict(family_params or {})
    name = family if isinstance(family, str) else getattr(family, "__name__", "custom")
    make = (lambda dim: build_family(family, dim=dim, **params)) if isinstance(family, str) else family
    gam, ps, Ts, ok = [], [], [], []
    for d in d_list:
        model = make(d)
        x = model.minimizer if start is None else start(model)
        gb = gamma_bar(model) if callable(gamma_bar) else gamma_bar
        plan = plan_precision(route, model, None, x, epsilon, gb, inputs)
        gam.append(plan.gamma)
        ps.append(float(plan.p))
        Ts.append(plan.T)
        ok.append(plan.certified)
    ld = np.log(d_list)
    slope = lambda y: float(np.polyfit(ld, np.log(y), 1)[0])  # noqa: E731
    return ScalingReport(route, name, float(epsilon), np.array(d_list), np.array(gam), np.array(ps),
                         np.array(Ts), slope(gam), slope(ps), slope(Ts), np.array(ok))


# ---------------------------------------------------------------------------
# generic SDE bounds (reflection coupling of dX = b(X) dt + dB)
# ---------------------------------------------------------------------------

def generic_sde_rate(theta: float, beta: float, delta: float, R: float,
                     epsilon: float = 0.5) -> ErgodicityRate:
    """kappa for an SDE with A V <= -theta V + beta and {V(x)+V(y) <= 2beta/theta + delta} in {|x-y| <= R}."""
    if not (theta > 0 and beta >= 0 and delta > 0 and R >= 0):
        raise DomainError("need theta > 0, beta >= 0, delta > 0 and R >= 0")
    omega = eval_omega(epsilon, R)
    tt = theta * theta * delta / (2.0 * beta + theta * delta)
    K = beta / tt * (1.0 + math.exp(tt * omega)) + delta / 2.0
    l1e = math.log1p(-epsilon)
    log_kappa = (tt / 2.0) * l1e / (math.log(K) - l1e)
    return ErgodicityRate("GenericSDE", log_kappa,
                          {"theta_tilde": tt, "K_eps": K, "omega": omega, "epsilon": epsilon,
                           "theta": theta, "beta": beta, "delta": delta, "R": R})


def generic_sde_strong_rate(m_tilde: float, M_tilde: float, epsilon: float = 0.5) -> ErgodicityRate:
    """kappa for a drift with <b(x)-b(y), x-y> <= -m_tilde |x-y|^2 when |x-y| >= M_tilde."""
    if not (m_tilde > 0 and M_tilde >= 0):
        raise DomainError("need m_tilde > 0 and M_tilde >= 0")
    omega = eval_omega(epsilon, M_tilde)
    log_D = float(np.logaddexp(0.0, m_tilde * omega / 2.0)) + math.log1p(M_tilde)
    l1e = math.log1p(-epsilon)
    log_kappa = (m_tilde / 2.0) * l1e / (log_D - l1e)
    return ErgodicityRate("GenericSDE", log_kappa,
                          {"m_tilde": m_tilde, "M_tilde": M_tilde, "D_eps": math.exp(log_D),
                           "omega": omega, "epsilon": epsilon})


def generic_sde_curve(rate: ErgodicityRate, t, V_x: float, V_y: float):
    """2 e^{-theta~ t/2}{(V(x)+V(y))/2 + e^{theta~ omega} beta/theta~} + 4 kappa^t."""
    a = rate.aux
    tt = a["theta_tilde"]
    t = np.asarray(t, dtype=float)
    head = 0.5 * (V_x + V_y) + math.exp(tt * a["omega"]) * a["beta"] / tt
    out = 2.0 * np.exp(-tt * t / 2.0) * head + 4.0 * np.exp(rate.log_kappa * t)
    return float(out) if out.ndim == 0 else out


def generic_sde_strong_curve(rate: ErgodicityRate, t, distance: float):
    """2 {(1-eps)^{-1} + 1 + |x-y|} kappa^t."""
    t = np.asarray(t, dtype=float)
    eps = rate.aux["epsilon"]
    out = 2.0 * (1.0 / (1.0 - eps) + 1.0 + distance) * np.exp(rate.log_kappa * t)
    return float(out) if out.ndim == 0 else out


def langevin_sde_constants(route: str, model: PotentialModel, cert=None, epsilon: float = 0.5
                           ) -> ErgodicityRate:
    """GenericSDE constants of the rescaled diffusion dY = -(1/2) grad U(Y) dt + dB.

    Times are in the rescaled clock; kappa in the Langevin clock is kappa_rescaled^2.
    """
    if route == "StrongConvex":
        c = _resolve_cert(model, cert, StronglyConvexOutsideBall)
        return generic_sde_strong_rate(c.m / 2.0, max(1.0, c.M_s), epsilon)
    if route == "ReflectionConvex":
        c = _resolve_cert(model, cert, LogConcave)
        rc = _reflection_constants(model, c)
        beta = math.exp(rc["log_beta"])
        theta = rc["theta"]
        return generic_sde_rate(theta / 2.0, beta / 2.0, 2.0 * beta / theta, rc["R"], epsilon)
    raise ConfigurationError("langevin_sde_constants supports the StrongConvex and ReflectionConvex routes")


def rescaled_to_langevin_time(t):
    """Time of dX = -grad U dt + sqrt(2) dB matching time t of the rescaled diffusion."""
    return np.asarray(t, dtype=float) / 2.0


def langevin_to_rescaled_time(t):
    return np.asarray(t, dtype=float) * 2.0
