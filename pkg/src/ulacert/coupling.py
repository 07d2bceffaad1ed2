"""
Reflection coupling of two Euler-discretized diffusions dX = b(X) dt + dB.

Both copies share the Gaussian increment, one of them reflected across the
hyperplane orthogonal to X - Y.  The pair merges once the difference falls
within ``merge_radius`` or the difference segment crosses the origin
within that radius.  The survival function of the coupling time tau_c
bounds the total variation between the laws of X_t and Y_t.

Langevin targets use the rescaled drift b = -grad U / 2 and report times
in that clock; see ``certifier.rescaled_to_langevin_time``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .certifier import (generic_sde_curve, generic_sde_strong_curve, langevin_sde_constants,
                        _resolve_cert)
from .errors import ConfigurationError, DivergenceError, DomainError, ValidationFailure
from .potentials import LogConcave, PotentialModel
from .sampler import BLOCK, block_generator

__all__ = [
    "CoupledState",
    "reflect",
    "reflection_step",
    "drift_of",
    "tail_bound",
    "CouplingTail",
    "coupling_tail",
    "TVFromCoupling",
    "tv_from_coupling",
    "DISCRETIZATION_ALLOWANCE",
]

DISCRETIZATION_ALLOWANCE = 0.02
_LIMIT = 1e100

Drift = Callable[[np.ndarray], np.ndarray]


@dataclass
class CoupledState:
    """A batch of coupled pairs: x, y of shape (n, d); tau is NaN until coupled."""

    x: np.ndarray
    y: np.ndarray
    coupled: np.ndarray
    tau: np.ndarray
    t: float = 0.0

    @classmethod
    def start(cls, x, y, n: int = 1) -> "CoupledState":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != y.shape or x.ndim != 1:
            raise DomainError("x and y must be points of the same dimension")
        X = np.tile(x, (n, 1))
        Y = np.tile(y, (n, 1))
        same = np.all(X == Y, axis=1)
        return cls(X, Y, same, np.where(same, 0.0, np.nan))


def reflect(z: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Householder reflection z - 2 <e, z> e, row-wise; e = 0 leaves z unchanged."""
    return z - 2.0 * np.sum(e * z, axis=-1, keepdims=True) * e


def _canonical_sign(diff: np.ndarray) -> np.ndarray:
    """Sign of the first nonzero coordinate of each row (0 for zero rows)."""
    nz = diff != 0
    idx = np.argmax(nz, axis=1)
    return np.sign(diff[np.arange(diff.shape[0]), idx])


def reflection_step(state: CoupledState, b: Drift, dt: float, z: np.ndarray,
                    merge_radius: Optional[float] = None, debug: bool = False) -> CoupledState:
    """One Euler step of the reflection coupling.

    The lexicographically larger member of each pair receives sqrt(dt) z and
    the other sqrt(dt) (z - 2 <e, z> e), e the unit difference.  Swapping
    the roles of x and y therefore mirrors the trajectories exactly.
    Coupled pairs share the unreflected increment.
    """
    if not dt > 0:
        raise DomainError("dt must be > 0")
    r = 0.1 * math.sqrt(dt) if merge_radius is None else merge_radius
    x, y = state.x, state.y
    diff = x - y
    sgn = _canonical_sign(diff)
    hi = np.where(sgn[:, None] >= 0, x, y)
    lo = np.where(sgn[:, None] >= 0, y, x)
    dhl = hi - lo
    norm = np.linalg.norm(dhl, axis=1, keepdims=True)
    e = np.divide(dhl, norm, out=np.zeros_like(dhl), where=norm > 0)
    zr = reflect(z, e)
    if debug:
        assert np.allclose(np.linalg.norm(zr, axis=1), np.linalg.norm(z, axis=1))
        assert np.allclose(reflect(zr, e), z)
    sq = math.sqrt(dt)
    hi_n = hi + b(hi) * dt + sq * z
    lo_n = lo + b(lo) * dt + sq * zr
    up = sgn[:, None] >= 0
    x_n = np.where(up, hi_n, lo_n)
    y_n = np.where(up, lo_n, hi_n)

    # already coupled pairs move together
    c = state.coupled
    if c.any():
        x_n[c] = x[c] + b(x[c]) * dt + sq * z[c]
        y_n[c] = x_n[c]
    if not (np.all(np.abs(x_n) <= _LIMIT) and np.all(np.abs(y_n) <= _LIMIT)):
        bad = np.flatnonzero(~(np.all(np.abs(x_n) <= _LIMIT, axis=1)
                               & np.all(np.abs(y_n) <= _LIMIT, axis=1)))[0]
        raise DivergenceError(f"coupled pair {bad} diverged at t = {state.t + dt:g}",
                              step=state.t + dt, chain=int(bad), state=x_n[bad].copy())

    d_new = x_n - y_n
    dist = np.linalg.norm(d_new, axis=1)
    # closest point of the segment diff -> d_new to the origin
    seg = d_new - diff
    seg2 = np.sum(seg * seg, axis=1)
    s = np.clip(np.divide(-np.sum(diff * seg, axis=1), seg2, out=np.zeros_like(seg2), where=seg2 > 0),
                0.0, 1.0)
    closest = np.linalg.norm(diff + s[:, None] * seg, axis=1)
    crossed = (np.sum(diff * d_new, axis=1) < 0) & (closest <= r)
    merge = ~c & ((dist <= r) | crossed)
    t_new = state.t + dt
    tau = state.tau.copy()
    tau[merge] = t_new
    y_n[merge] = x_n[merge]
    return CoupledState(x_n, y_n, c | merge, tau, t_new)


def drift_of(target: Union[PotentialModel, Drift]) -> Drift:
    """Rescaled Langevin drift -grad U / 2 for a model; callables pass through."""
    if isinstance(target, PotentialModel):
        return lambda v: -0.5 * target.gradient(v)
    if callable(target):
        return target
    raise ConfigurationError("drift must be a PotentialModel or a callable b(x)")


def tail_bound(distance: float, t) -> np.ndarray:
    """2 (Phi(|x - y| / (2 sqrt t)) - 1/2), the coupling-time tail for contractive drifts."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(t > 0, 2.0 * ndtr(distance / (2.0 * np.sqrt(np.maximum(t, 1e-300)))) - 1.0,
                       float(distance > 0))
    return out


@dataclass
class CouplingTail:
    t: np.ndarray
    survival: np.ndarray              # P(tau_c > t) at step dt
    se: np.ndarray
    bound: np.ndarray
    n_runs: int
    dt: float
    merge_radius: float
    survival_half: Optional[np.ndarray] = None   # companion run at dt / 2
    states: Dict[float, np.ndarray] = field(default_factory=dict)
    tau: Optional[np.ndarray] = None  # coupling times at step dt, NaN if not coupled

    @property
    def shift(self) -> Optional[np.ndarray]:
        if self.survival_half is None:
            return None
        return np.abs(self.survival - self.survival_half)

    @property
    def dt_sensitive(self) -> bool:
        """True when halving dt moves the tail by more than 2 SE somewhere."""
        if self.survival_half is None:
            return False
        return bool(np.any(self.shift > 2.0 * np.maximum(self.se, 1.0 / self.n_runs)))

    def violations(self, allowance: float = DISCRETIZATION_ALLOWANCE) -> np.ndarray:
        return self.survival > self.bound + 3.0 * self.se + allowance

    def rows(self, theorem: Optional[np.ndarray] = None):
        for i, t in enumerate(self.t):
            yield {"t": float(t), "empirical_tail": float(self.survival[i]), "se": float(self.se[i]),
                   "analytic_bound": float(self.bound[i]),
                   "theorem_curve": "" if theorem is None else float(theorem[i])}

    def to_csv(self, path, theorem: Optional[np.ndarray] = None):
        cols = ["t", "empirical_tail", "se", "analytic_bound", "theorem_curve"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, cols, lineterminator="\n")
            w.writeheader()
            for row in self.rows(theorem):
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def _run_block(b, x, y, n, t_grid, dt, r, rng, halving, keep_states):
    n_steps = int(round(t_grid[-1] / dt))
    coarse = CoupledState.start(x, y, n)
    fine = CoupledState.start(x, y, n) if halving else None
    d = coarse.x.shape[1]
    marks = {int(round(t / dt)): t for t in t_grid}
    states = {}
    sq2 = math.sqrt(2.0)
    for k in range(1, n_steps + 1):
        if halving:
            z1 = rng.standard_normal((n, d))
            z2 = rng.standard_normal((n, d))
            fine = reflection_step(fine, b, dt / 2, z1, r / sq2)
            fine = reflection_step(fine, b, dt / 2, z2, r / sq2)
            z = (z1 + z2) / sq2
        else:
            z = rng.standard_normal((n, d))
        coarse = reflection_step(coarse, b, dt, z, r)
        if k in marks and keep_states:
            states[marks[k]] = np.stack([coarse.x, coarse.y])
    tau = coarse.tau
    tau_f = fine.tau if halving else None
    return tau, tau_f, states


def coupling_tail(target: Union[PotentialModel, Drift], x, y, t_grid: Sequence[float],
                  dt: float = 1e-3, n_runs: int = 10_000, merge_radius: Optional[float] = None,
                  seed: int = 0, halving: bool = True, keep_states: bool = False,
                  workers: int = 1) -> CouplingTail:
    """Empirical survival of tau_c on ``t_grid`` with binomial standard errors.

    With ``halving`` a companion run at dt / 2 shares the Brownian path
    (coarse increment (z1 + z2) / sqrt 2) so the two tails differ only by
    discretization.  Runs are split in blocks with their own streams, so
    the output does not depend on ``workers``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0) or t_grid[0] <= 0:
        raise DomainError("t_grid must be positive and strictly increasing")
    spacing = np.min(np.diff(np.concatenate([[0.0], t_grid])))
    if dt > spacing / 10 * (1 + 1e-12):
        raise DomainError(f"dt = {dt:g} exceeds a tenth of the grid spacing {spacing:g}")
    if np.any(np.abs(t_grid / dt - np.round(t_grid / dt)) > 1e-9):
        raise DomainError("every t in t_grid must be a multiple of dt")
    b = drift_of(target)
    r = 0.1 * math.sqrt(dt) if merge_radius is None else float(merge_radius)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    blocks = [(i, min(BLOCK, n_runs - i * BLOCK)) for i in range((n_runs + BLOCK - 1) // BLOCK)]

    def job(blk):
        i, n = blk
        return _run_block(b, x, y, n, t_grid, dt, r, block_generator(seed, i), halving, keep_states)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(job, blocks))
    else:
        results = [job(blk) for blk in blocks]
    tau = np.concatenate([res[0] for res in results])
    # grid times are compared on the step index to avoid float drift in t
    steps_tau = np.round(tau / dt)
    steps_t = np.round(t_grid / dt)
    surv = np.array([np.mean(~(steps_tau <= k)) for k in steps_t])
    se = np.sqrt(surv * (1.0 - surv) / n_runs)
    surv_half = None
    if halving:
        tau_f = np.concatenate([res[1] for res in results])
        steps_f = np.round(tau_f / (dt / 2))
        surv_half = np.array([np.mean(~(steps_f <= 2 * k)) for k in steps_t])
    states = {}
    if keep_states:
        for t in t_grid:
            states[float(t)] = np.concatenate([res[2][t] for res in results], axis=1)
    dist = float(np.linalg.norm(x - y))
    return CouplingTail(t_grid, surv, se, tail_bound(dist, t_grid), n_runs, dt, r,
                        surv_half, states, tau)


@dataclass
class TVFromCoupling:
    """Coupling estimate of |delta_x P_t - delta_y P_t|_TV (L1 convention) vs the theorem."""

    route: str
    tail: CouplingTail
    theorem: np.ndarray               # certified curve, clamped at 2
    theorem_raw: np.ndarray
    log_kappa: float                  # rescaled clock
    constants: dict

    @property
    def empirical_tv(self) -> np.ndarray:
        """2 P(tau_c > t): the coupling inequality in the L1 convention."""
        return 2.0 * self.tail.survival

    @property
    def violations(self) -> np.ndarray:
        slack = 2.0 * (3.0 * self.tail.se + DISCRETIZATION_ALLOWANCE)
        return self.empirical_tv > self.theorem + slack

    def check(self):
        if np.any(self.violations):
            t = self.tail.t[np.argmax(self.violations)]
            raise ValidationFailure(f"coupling: empirical TV exceeds the {self.route} curve at t = {t:g}")


def _reflection_V(model: PotentialModel, cert: LogConcave, x) -> float:
    r2 = float(np.sum((np.asarray(x, dtype=float) - model.minimizer) ** 2))
    return math.exp(cert.eta / 4.0 * math.sqrt(1.0 + r2))


def tv_from_coupling(route: str, model: PotentialModel, x, t_grid: Sequence[float], *,
                     y=None, cert=None, epsilon: float = 0.5, dt: float = 1e-3,
                     n_runs: int = 10_000, seed: int = 0, halving: bool = True,
                     workers: int = 1) -> TVFromCoupling:
    """Simulate the Langevin reflection coupling from (x, y) and emit the certified curve.

    Times are in the rescaled clock of dY = -grad U(Y)/2 dt + dB.  ``y``
    defaults to the minimizer.
    """
    if route not in ("StrongConvex", "ReflectionConvex"):
        raise ConfigurationError("tv_from_coupling supports the StrongConvex and ReflectionConvex routes")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = model.minimizer.copy() if y is None else np.atleast_1d(np.asarray(y, dtype=float))
    rate = langevin_sde_constants(route, model, cert, epsilon)
    t_grid = np.asarray(t_grid, dtype=float)
    if route == "StrongConvex":
        raw = generic_sde_strong_curve(rate, t_grid, float(np.linalg.norm(x - y)))
    else:
        c = _resolve_cert(model, cert, LogConcave)
        raw = generic_sde_curve(rate, t_grid, _reflection_V(model, c, x), _reflection_V(model, c, y))
    raw = np.atleast_1d(raw)
    tail = coupling_tail(model, x, y, t_grid, dt=dt, n_runs=n_runs, seed=seed, halving=halving,
                         workers=workers)
    return TVFromCoupling(route, tail, np.minimum(raw, 2.0), raw, rate.log_kappa, dict(rate.aux))
