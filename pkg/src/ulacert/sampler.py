"""
Simulation of the ULA chain X_{k+1} = X_k - gamma_{k+1} grad U(X_k) + sqrt(2 gamma_{k+1}) Z_{k+1}.

Chains are processed in fixed blocks of ``BLOCK`` chains.  Block b draws its noise
from an SFC64 generator seeded by ``SeedSequence(seed, spawn_key=(b,))``, so a
chain's trajectory depends only on (seed, chain id, schedule) and never on the
number of worker threads.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from . import schedule as sch
from .certifier import DriftConstants, log_lyapunov
from .errors import DivergenceError, DomainError, NumericRangeError
from .potentials import PotentialModel

__all__ = [
    "BLOCK",
    "DIVERGENCE_THRESHOLD",
    "ula_step",
    "ChainEnsemble",
    "MomentAccumulator",
    "RunResult",
    "run_chains",
    "block_generator",
    "DriftPoint",
    "DriftReport",
    "estimate_drift_violation",
]

BLOCK = 4096
DIVERGENCE_THRESHOLD = 1e100


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Noise stream of chain block ``block``."""
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


def _check_finite(x, step, offset=0):
    bad = ~np.isfinite(x) | (np.abs(x) > DIVERGENCE_THRESHOLD)
    if np.any(bad):
        row = int(np.argwhere(bad)[0][0]) if x.ndim > 1 else 0
        state = x[row] if x.ndim > 1 else x
        raise DivergenceError(f"chain {offset + row} diverged at step {step}",
                              step=step, chain=offset + row, state=np.array(state))


def ula_step(model: PotentialModel, x, gamma: float, z, step: Optional[int] = None) -> np.ndarray:
    """One ULA transition x - gamma grad U(x) + sqrt(2 gamma) z (vectorized over leading axes)."""
    if not gamma > 0:
        raise DomainError(f"step size must be > 0, got {gamma}")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != model.dim or x.shape[-1] != model.dim:
        raise DomainError(f"state and noise must have trailing dimension {model.dim}")
    out = x - gamma * model.gradient(x) + math.sqrt(2.0 * gamma) * z
    _check_finite(out, step)
    return out


@dataclass
class ChainEnsemble:
    """n_chains ULA chains sharing a deterministic start point."""

    model: PotentialModel
    schedule: sch.StepSchedule
    n_chains: int
    start: np.ndarray
    seed: int = 0
    start_spread: float = 0.0
    step_index: int = 0

    def __post_init__(self):
        if self.n_chains < 1:
            raise DomainError("n_chains must be >= 1")
        self.start = np.asarray(self.start, dtype=float).reshape(self.model.dim)
        if self.start_spread < 0:
            raise DomainError("start_spread must be >= 0")

    @property
    def certifiable(self) -> bool:
        """Bounds are stated for delta_x starts; a spread start is for exploration only."""
        return self.start_spread == 0.0


# ---------------------------------------------------------------------------
# accumulators
# ---------------------------------------------------------------------------

@dataclass
class _Moments:
    n: int = 0
    mean_sq: float = 0.0
    m2_sq: float = 0.0
    mean_g: float = 0.0
    m2_g: float = 0.0
    lse_v: float = -np.inf          # log sum V
    lse_v2: float = -np.inf         # log sum V^2

    @staticmethod
    def from_arrays(sq, g2, logv):
        n = sq.size
        m = _Moments(n=n, mean_sq=float(sq.mean()), mean_g=float(g2.mean()))
        m.m2_sq = float(np.sum((sq - m.mean_sq) ** 2))
        m.m2_g = float(np.sum((g2 - m.mean_g) ** 2))
        if logv is not None:
            m.lse_v = float(logsumexp(logv))
            m.lse_v2 = float(logsumexp(2.0 * logv))
        else:
            m.lse_v = m.lse_v2 = np.nan
        return m

    def merge(self, o: "_Moments") -> "_Moments":
        if self.n == 0:
            return _Moments(**o.__dict__)
        if o.n == 0:
            return _Moments(**self.__dict__)
        n = self.n + o.n
        out = _Moments(n=n)
        for mu, m2 in (("mean_sq", "m2_sq"), ("mean_g", "m2_g")):
            da = getattr(o, mu) - getattr(self, mu)
            setattr(out, mu, getattr(self, mu) + da * o.n / n)
            setattr(out, m2, getattr(self, m2) + getattr(o, m2) + da * da * self.n * o.n / n)
        with np.errstate(invalid="ignore"):
            out.lse_v = float(np.logaddexp(self.lse_v, o.lse_v))
            out.lse_v2 = float(np.logaddexp(self.lse_v2, o.lse_v2))
        return out


class MomentAccumulator:
    """Per recorded step: mean and spread of |X - x*|^2, |grad U(X)|^2 and V(X) (log space)."""

    columns = ("step", "n", "mean_sq_dist", "se_sq_dist", "mean_grad_sq", "se_grad_sq",
               "mean_V_log", "se_V_log")

    def __init__(self, steps: Sequence[int] = ()):
        self.data: Dict[int, _Moments] = {int(k): _Moments() for k in steps}

    @property
    def steps(self) -> List[int]:
        return sorted(self.data)

    def add(self, step: int, model: PotentialModel, x: np.ndarray, log_v: Optional[Callable]):
        r = x - model.minimizer
        sq = np.einsum("ij,ij->i", r, r)
        g = model.gradient(x)
        g2 = np.einsum("ij,ij->i", g, g)
        lv = None if log_v is None else np.asarray(log_v(x), dtype=float)
        self.data[int(step)] = self.data.get(int(step), _Moments()).merge(_Moments.from_arrays(sq, g2, lv))

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        out = MomentAccumulator()
        for k in set(self.data) | set(other.data):
            out.data[k] = self.data.get(k, _Moments()).merge(other.data.get(k, _Moments()))
        return out

    def n(self, step):
        return self.data[step].n

    def mean_sq_dist(self, step):
        return self.data[step].mean_sq

    def se_sq_dist(self, step):
        m = self.data[step]
        return math.sqrt(m.m2_sq / max(m.n - 1, 1) / m.n)

    def mean_grad_sq(self, step):
        return self.data[step].mean_g

    def se_grad_sq(self, step):
        m = self.data[step]
        return math.sqrt(m.m2_g / max(m.n - 1, 1) / m.n)

    def log_mean_V(self, step):
        m = self.data[step]
        return m.lse_v - math.log(m.n)

    def se_log_V(self, step):
        """Standard error of log E[V] (delta method)."""
        m = self.data[step]
        rel_var = math.expm1((m.lse_v2 - math.log(m.n)) - 2.0 * self.log_mean_V(step))
        return math.sqrt(max(rel_var, 0.0) * m.n / max(m.n - 1, 1) / m.n)

    def mean_V(self, step):
        return math.exp(self.log_mean_V(step))

    def se_V(self, step):
        return self.mean_V(step) * self.se_log_V(step)

    def rows(self):
        for k in self.steps:
            yield (k, self.n(k), self.mean_sq_dist(k), self.se_sq_dist(k), self.mean_grad_sq(k),
                   self.se_grad_sq(k), self.log_mean_V(k), self.se_log_V(k))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows():
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    moments: MomentAccumulator
    final_states: np.ndarray
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)


def _run_block(ens, b, lo, hi, p, record, log_v, keep):
    model = ens.model
    rng = block_generator(ens.seed, b)
    m = hi - lo
    x = np.repeat(ens.start[None, :], m, axis=0)
    if ens.start_spread > 0:
        x += ens.start_spread * rng.standard_normal(x.shape)
    z = np.empty_like(x)
    acc = MomentAccumulator()
    snaps = {}
    gam = sch.steps(ens.schedule, 1, p) if p >= 1 else np.empty(0)

    def rec(k):
        if k in record:
            acc.add(k, model, x, log_v)
            if keep:
                snaps[k] = x.copy()

    rec(0)
    for k in range(1, p + 1):
        g = gam[k - 1]
        rng.standard_normal(out=z)
        x -= g * model.gradient(x)
        x += math.sqrt(2.0 * g) * z
        # min/max propagate NaN, so this also catches non-finite states
        if not (x.min() >= -DIVERGENCE_THRESHOLD and x.max() <= DIVERGENCE_THRESHOLD):
            _check_finite(x, ens.step_index + k, lo)
        rec(k)
    return acc, x, snaps


def run_chains(ens: ChainEnsemble, p: int, record_at: Sequence[int] = (), *,
               lyapunov: Optional[DriftConstants] = None, keep_states: bool = False,
               workers: int = 1) -> RunResult:
    """Advance every chain p steps from ``ens.start``; record moments at ``record_at``.

    ``lyapunov`` selects the V column (log V through the drift's descriptor).
    """
    p = int(p)
    if p < 0:
        raise DomainError("p must be >= 0")
    record = set(int(k) for k in record_at)
    if any(k < 0 or k > p for k in record):
        raise DomainError(f"record_at must lie in [0, {p}]")
    log_v = None if lyapunov is None else (lambda x: log_lyapunov(lyapunov, ens.model, x))
    bounds = [(b, b * BLOCK, min((b + 1) * BLOCK, ens.n_chains))
              for b in range((ens.n_chains + BLOCK - 1) // BLOCK)]
    job = lambda t: _run_block(ens, t[0], t[1], t[2], p, record, log_v, keep_states)  # noqa: E731
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(t) for t in bounds]
    acc = MomentAccumulator(sorted(record))
    for part in parts:                                   # block order: independent of workers
        acc = acc.merge(part[0])
    final = np.concatenate([part[1] for part in parts])
    snaps = {k: np.concatenate([part[2][k] for part in parts]) for k in record} if keep_states else {}
    ens.step_index += p
    return RunResult(acc, final, snaps)


# ---------------------------------------------------------------------------
# drift inequality checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftPoint:
    x: np.ndarray
    log_V: float
    log_estimate: float       # log of the Monte-Carlo mean of V(X_1)
    log_bound: float          # log(lambda^gamma V(x) + gamma c)
    margin: float             # (estimate - bound) / bound
    se: float                 # standard error of estimate / bound

    @property
    def passed(self) -> bool:
        return self.margin <= 3.0 * self.se


@dataclass(frozen=True)
class DriftReport:
    gamma: float
    n_mc: int
    points: List[DriftPoint]

    @property
    def passed(self) -> bool:
        return all(pt.passed for pt in self.points)

    @property
    def worst(self) -> DriftPoint:
        return max(self.points, key=lambda pt: pt.margin - 3.0 * pt.se)


def estimate_drift_violation(model: PotentialModel, drift: DriftConstants, points, gamma: float,
                             n_mc: int, seed=0, chunk: int = 1 << 16) -> DriftReport:
    """Monte-Carlo check of R_gamma V(x) <= lambda^gamma V(x) + gamma c at each point.

    Margins and standard errors are relative to the right-hand side; a point passes
    when margin <= 3 se.
    """
    if n_mc < 1:
        raise DomainError("n_mc must be >= 1")
    if not 0 < gamma <= drift.gamma_bar * (1 + 1e-12):
        raise DomainError(f"gamma must lie in (0, gamma_bar = {drift.gamma_bar}]")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = []
    for i, x in enumerate(pts):
        rng = block_generator(seed, i)
        lv = float(log_lyapunov(drift, model, x))
        lb = float(np.logaddexp(gamma * drift.log_lam + lv, math.log(gamma) + drift.log_c))
        lse1, lse2, done = -np.inf, -np.inf, 0
        drift_x = x - gamma * model.gradient(x)
        while done < n_mc:
            m = min(chunk, n_mc - done)
            y = drift_x + math.sqrt(2.0 * gamma) * rng.standard_normal((m, model.dim))
            ly = np.asarray(log_lyapunov(drift, model, y), dtype=float)
            lse1 = np.logaddexp(lse1, logsumexp(ly))
            lse2 = np.logaddexp(lse2, logsumexp(2.0 * ly))
            done += m
        log_mean = float(lse1 - math.log(n_mc))
        rel_var = math.expm1(float(lse2 - math.log(n_mc)) - 2.0 * log_mean)   # Var V / (E V)^2
        if not math.isfinite(log_mean) and log_mean != -np.inf:
            raise NumericRangeError(f"V overflows at point {i} even in log space")
        ratio = math.exp(log_mean - lb)
        se = ratio * math.sqrt(max(rel_var, 0.0) / max(n_mc - 1, 1))
        out.append(DriftPoint(x.copy(), lv, log_mean, lb, ratio - 1.0, se))
    return DriftReport(float(gamma), int(n_mc), out)
