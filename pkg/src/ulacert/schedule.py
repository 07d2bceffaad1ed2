"""
Step-size sequences (gamma_k)_{k>=1}, their partial sums and burn-in splits.

Indices follow the usual convention of the master bound: gamma_k is the
step used to go from X_{k-1} to X_k, Gamma_{n,p} = sum_{k=n}^p gamma_k and
the empty sum (p < n) is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError

__all__ = [
    "Constant",
    "PolynomialDecay",
    "Explicit",
    "StepSchedule",
    "schedule_from_spec",
    "schedule_to_spec",
    "gamma",
    "steps",
    "partial_sum",
    "power_sum",
    "cumulative",
    "burnin_split",
    "BurnIn",
]

# windows longer than this use closed forms (Hurwitz zeta / digamma)
_DIRECT_LIMIT = 1 << 20


@dataclass(frozen=True)
class Constant:
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise DomainError(f"constant step must be > 0, got {self.gamma}")


@dataclass(frozen=True)
class PolynomialDecay:
    """gamma_k = gamma1 * k^(-exponent)."""

    gamma1: float
    exponent: float = 0.5

    def __post_init__(self):
        if not (self.gamma1 > 0 and math.isfinite(self.gamma1)):
            raise DomainError(f"gamma1 must be > 0, got {self.gamma1}")
        if not 0 < self.exponent <= 1:
            raise DomainError(f"decay exponent must lie in (0, 1], got {self.exponent}")


@dataclass(frozen=True)
class Explicit:
    """Listed steps, extended by repeating the last value."""

    values: Tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(a) for a in self.values)
        if not v:
            raise DomainError("explicit schedule needs at least one value")
        if any(not (a > 0 and math.isfinite(a)) for a in v):
            raise DomainError("explicit steps must be finite and > 0")
        if any(b > a for a, b in zip(v, v[1:])):
            raise DomainError("explicit steps must be nonincreasing")
        object.__setattr__(self, "values", v)


StepSchedule = Union[Constant, PolynomialDecay, Explicit]


def schedule_from_spec(spec: dict) -> StepSchedule:
    """Build a schedule from a config mapping {kind: ..., parameters}."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    allowed = {"constant": {"gamma"}, "polynomial": {"gamma1", "exponent"},
               "explicit": {"values"}}
    if kind not in allowed:
        raise ConfigurationError(f"unknown schedule kind {kind!r}; use constant, polynomial or explicit")
    extra = set(spec) - allowed[kind]
    if extra:
        raise ConfigurationError(f"unknown schedule keys {sorted(extra)} for kind {kind!r}")
    try:
        if kind == "constant":
            return Constant(float(spec["gamma"]))
        if kind == "polynomial":
            return PolynomialDecay(float(spec["gamma1"]), float(spec.get("exponent", 0.5)))
        return Explicit(tuple(spec["values"]))
    except KeyError as exc:
        raise ConfigurationError(f"schedule of kind {kind!r} is missing {exc}") from None


def schedule_to_spec(s: StepSchedule) -> dict:
    if isinstance(s, Constant):
        return {"kind": "constant", "gamma": s.gamma}
    if isinstance(s, PolynomialDecay):
        return {"kind": "polynomial", "gamma1": s.gamma1, "exponent": s.exponent}
    return {"kind": "explicit", "values": list(s.values)}


def gamma(s: StepSchedule, k):
    """gamma_k for k >= 1 (scalar or integer array)."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 1):
        raise DomainError("step index k must be >= 1")
    if isinstance(s, Constant):
        out = np.full(k_arr.shape, s.gamma)
    elif isinstance(s, PolynomialDecay):
        out = s.gamma1 * np.asarray(k_arr, dtype=float) ** (-s.exponent)
    else:
        v = np.asarray(s.values)
        out = v[np.minimum(k_arr, len(v)) - 1]
    return float(out) if np.ndim(out) == 0 else out


def steps(s: StepSchedule, n: int, p: int) -> np.ndarray:
    """Array (gamma_n, ..., gamma_p); empty when p < n."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if p < n:
        return np.empty(0)
    return np.asarray(gamma(s, np.arange(n, p + 1)), dtype=float).reshape(-1)


def _zeta_window(a: float, n: int, p: int) -> float:
    """sum_{k=n}^p k^(-a) for large windows."""
    if a == 1.0:
        return float(special.digamma(p + 1) - special.digamma(n))
    if a < 1.0:
        # Hurwitz zeta is only defined for a > 1; use Euler-Maclaurin with a
        # tail correction good far beyond double precision for these sizes.
        return _em_sum(a, n, p)
    return float(special.zeta(a, n) - special.zeta(a, p + 1))


def _em_sum(a, n, p, head=64):
    # exact head, Euler-Maclaurin tail sum_{k=m}^p k^-a
    m = n + head
    tot = math.fsum(k ** -a for k in range(n, min(m, p + 1)))
    if p < m:
        return tot
    f = lambda x: x ** -a  # noqa: E731
    integral = (p ** (1 - a) - m ** (1 - a)) / (1 - a)
    d1 = lambda x: -a * x ** (-a - 1)  # noqa: E731
    d3 = lambda x: -a * (a + 1) * (a + 2) * x ** (-a - 3)  # noqa: E731
    tail = integral + (f(m) + f(p)) / 2 + (d1(p) - d1(m)) / 12 - (d3(p) - d3(m)) / 720
    return tot + tail


def _window_power_sum(s: StepSchedule, n: int, p: int, ell: int) -> float:
    if p < n:
        return 0.0
    if n < 1:
        raise DomainError("n must be >= 1")
    count = p - n + 1
    if isinstance(s, Constant):
        return count * s.gamma ** ell
    if isinstance(s, Explicit):
        v = np.asarray(s.values)
        head_hi = min(p, len(v))
        head = math.fsum(v[n - 1:head_hi] ** ell) if n <= head_hi else 0.0
        tail_count = p - max(n - 1, len(v))
        return head + max(tail_count, 0) * v[-1] ** ell
    if count <= _DIRECT_LIMIT:
        return math.fsum(steps(s, n, p) ** ell)
    return s.gamma1 ** ell * _zeta_window(s.exponent * ell, n, p)


def partial_sum(s: StepSchedule, n: int, p: int) -> float:
    """Gamma_{n,p} = sum_{k=n}^p gamma_k, 0 when p < n."""
    return _window_power_sum(s, int(n), int(p), 1)


def power_sum(s: StepSchedule, n: int, p: int, ell: int) -> float:
    """sum_{k=n}^p gamma_k^ell, 0 when p < n."""
    if ell < 1:
        raise DomainError("power_sum needs ell >= 1")
    return _window_power_sum(s, int(n), int(p), int(ell))


def cumulative(s: StepSchedule, p: int, ell: int = 1) -> np.ndarray:
    """Array c with c[k] = sum_{j=1}^k gamma_j^ell for k = 0..p (c[0] = 0)."""
    out = np.zeros(p + 1)
    if p >= 1:
        if isinstance(s, Constant):
            out[1:] = np.arange(1, p + 1) * s.gamma ** ell
        else:
            out[1:] = np.cumsum(steps(s, 1, p) ** ell)
    return out


@dataclass(frozen=True)
class BurnIn:
    n: int
    degenerate: bool = False


def burnin_split(s: StepSchedule, p: int, kappa: float, variant: str = "KappaGamma") -> BurnIn:
    """Burn-in index n(p) in {0, ..., p-1} splitting the master bound.

    KappaGamma: min{k : kappa^Gamma_{k+1,p} > gamma_{k+1}}, valid once
    kappa^gamma_p > gamma_p and kappa^Gamma_p <= gamma_1; otherwise 0 with
    the degenerate flag set.  LogGamma: max(0, floor(log Gamma_p)).
    """
    p = int(p)
    if p < 1:
        raise DomainError("p must be >= 1")
    if not 0 < kappa < 1:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    logk = math.log(kappa)
    if variant == "LogGamma":
        G = partial_sum(s, 1, p)
        n = max(0, math.floor(math.log(G))) if G > 0 else 0
        return BurnIn(min(n, p - 1), degenerate=n > p - 1)
    if variant != "KappaGamma":
        raise ConfigurationError(f"unknown split variant {variant!r}")
    g_p = gamma(s, p)
    if not (g_p * logk > math.log(g_p) and partial_sum(s, 1, p) * logk <= math.log(gamma(s, 1))):
        return BurnIn(0, degenerate=True)
    if isinstance(s, Constant):
        # kappa^(gamma (p - k)) > gamma  <=>  p - k < log(gamma) / (gamma log kappa)
        def ok(k):
            return s.gamma * (p - k) * logk > math.log(s.gamma)

        k = min(max(p - math.floor(math.log(s.gamma) / (s.gamma * logk)), 0), p - 1)
        while k > 0 and ok(k - 1):
            k -= 1
        while k < p - 1 and not ok(k):
            k += 1
        return BurnIn(k) if ok(k) else BurnIn(0, degenerate=True)
    g = steps(s, 1, p)
    tail = np.cumsum(g[::-1])[::-1]          # tail[k] = Gamma_{k+1,p}
    ok = tail * logk > np.log(g)
    idx = np.flatnonzero(ok)
    return BurnIn(int(idx[0])) if idx.size else BurnIn(0, degenerate=True)
