"""Acceptance criteria 1-9.  Each test records one PASS/FAIL line (see conftest)."""

import math
import time

import numpy as np
import pytest
from scipy import optimize, special

from ulacert import certifier as C, oracle as O, potentials as P, schedule as S
from ulacert.coupling import coupling_tail
from ulacert.sampler import ChainEnsemble, estimate_drift_violation, run_chains


def test_criterion_1_gaussian_closed_form(criterion):
    t0 = time.perf_counter()
    worst = 0.0                       # largest |deviation| / SE over every checked quantity
    for d in (1, 4, 16):
        model = P.isotropic_quadratic(d)
        x = np.full(d, 3.0 / math.sqrt(d))
        for g in (0.02, 0.1):
            ens = ChainEnsemble(model, S.Constant(g), 100_000, x, seed=d * 1000 + int(g * 100))
            res = run_chains(ens, 1000, [10, 100, 1000], keep_states=True)
            for p in (10, 100, 1000):
                xs = res.snapshots[p]
                n = xs.shape[0]
                law = O.gaussian_ula_marginal(x, g, p)
                var = xs.var(axis=0, ddof=1)
                z_mean = np.abs(xs.mean(axis=0) - law.mean) / np.sqrt(var / n)
                z_var = np.abs(var - law.variance) / (law.variance * math.sqrt(2.0 / (n - 1)))
                worst = max(worst, z_mean.max(), z_var.max())
    elapsed = time.perf_counter() - t0
    ok = worst < 5.0 and elapsed <= 120.0
    criterion(1, ok, f"max deviation {worst:.2f} SE over 18 (d, gamma, p) cells, {elapsed:.0f} s")
    assert ok


def test_criterion_2_bound_vs_grid_oracle(criterion):
    t0 = time.perf_counter()
    model = P.isotropic_quadratic(1)
    x = 3.0
    ps = np.unique(np.round(np.geomspace(10, 2000, 20)).astype(int))
    assert ps.size == 20
    pi = O.GaussianDist([0.0], 1.0)
    violations, rows, gap = 0, 0, np.inf
    for g in (0.01, 0.05, 0.1):
        sched = S.Constant(g)
        curve = C.tv_bound_curve("StrongConvex", model, None, sched, [x], p_values=ps)
        dens = O.grid_propagate(model, sched, x, int(ps[-1]), record_at=ps)
        for i, p in enumerate(ps):
            oracle = 2.0 * O.grid_tv(dens[int(p)], pi).value          # L1 convention
            bound = float(curve.total[i])
            rows += 1
            violations += not (bound >= oracle and bound <= 2.0 and oracle <= 2.0)
            gap = min(gap, bound - oracle)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed <= 300.0
    criterion(2, ok, f"{violations} violations in {rows} rows, min(bound - oracle) = {gap:.4f}, "
                     f"{elapsed:.0f} s")
    assert ok


def test_criterion_3_pinsker_chain(criterion):
    t0 = time.perf_counter()
    grid = [(g, p, x) for g in (0.01, 0.05, 0.1, 0.3, 0.7) for p in (1, 5, 20, 100, 1000)
            for x in (0.0, 0.5, 1.0, 3.0)]
    assert len(grid) == 100
    bad = 0
    for g, p, x in grid:
        c = O.pinsker_rhs(x, g, p, 1)
        lhs = (2.0 * c.tv) ** 2                                        # squared L1 distance
        bad += not (lhs <= 2 * c.kl_reverse + 1e-12 and 2 * c.kl_reverse <= c.rhs + 1e-12
                    and lhs <= 2 * c.kl_forward + 1e-12)
    elapsed = time.perf_counter() - t0
    ok = bad == 0
    criterion(3, ok, f"{bad} failures of TV^2 <= 2KL <= rhs on {len(grid)} points, {elapsed:.1f} s")
    assert ok


def test_criterion_4_coupling_tail(criterion):
    t0 = time.perf_counter()
    ts = [0.5, 1.0, 2.0, 4.0]
    tail = coupling_tail(lambda v: -0.5 * v, [1.0, 0.0], [-1.0, 0.0], ts, dt=1e-3, n_runs=10_000,
                         seed=0, halving=True)
    within = tail.survival <= tail.bound + 3 * tail.se + 0.02
    stable = tail.shift < 2 * tail.se
    elapsed = time.perf_counter() - t0
    ok = bool(within.all() and stable.all() and elapsed <= 180.0)
    cells = ", ".join(f"t={t:g}: {s:.4f} <= {b:.4f}" for t, s, b in zip(ts, tail.survival, tail.bound))
    criterion(4, ok, f"{cells}; max dt/2 shift {np.max(tail.shift / tail.se):.2f} SE, {elapsed:.0f} s")
    assert ok


def _drift_cases():
    qc = P.quadratic_cosine(2)
    se = C.euler_drift(qc, qc.certificate("Superexponential"), 0.5 / qc.lipschitz_L)
    hub = P.huber(2)
    lc = C.euler_drift(hub, hub.certificate("LogConcave"), 1.0 / hub.lipschitz_L)
    gau = P.isotropic_quadratic(2)
    sc_cert = gau.certificate("StronglyConvexOutsideBall")
    sc = C.euler_drift(gau, sc_cert, C.default_gamma_bar("StrongConvex", gau))
    # K: the drift ball radius of each class; for the quadratic V, the radius where
    # the one-step contraction beats the noise, sqrt(2 d / m) + M_s
    return [("Superexponential", qc, se, se.K),
            ("LogConcave", hub, lc, lc.R_c),
            ("StronglyConvexOutsideBall", gau, sc, math.sqrt(2 * gau.dim / sc_cert.m) + sc_cert.M_s)]


def test_criterion_5_drift_inequalities(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    parts, ok = [], True
    for name, model, drift, K in _drift_cases():
        dirs = rng.standard_normal((20, model.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = model.minimizer + np.linspace(0.0, 3.0 * K, 20)[:, None] * dirs
        worst = -np.inf
        for gamma in (drift.gamma_bar, drift.gamma_bar / 4):
            rep = estimate_drift_violation(model, drift, pts, gamma, 100_000, seed=7)
            ok &= rep.passed
            worst = max(worst, max(pt.margin - 3 * pt.se for pt in rep.points))
        parts.append(f"{name} (K={K:.3g}) worst margin-3SE {worst:.3g}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed <= 180.0
    criterion(5, ok, "; ".join(parts) + f", {elapsed:.0f} s")
    assert ok


def test_criterion_6_moment_lemma(criterion):
    t0 = time.perf_counter()
    model = P.isotropic_quadratic(2)
    x = np.array([3.0, 0.0])
    steps = [1, 10, 100, 1000]
    worst, ok = -np.inf, True
    for sched in (S.Constant(0.1), S.PolynomialDecay(0.5, 0.5)):
        g1 = S.gamma(sched, 1)
        for klass in ("StronglyConvexOutsideBall", "LogConcave"):
            drift = C.euler_drift(model, model.certificate(klass), g1)
            run = run_chains(ChainEnsemble(model, sched, 100_000, x, seed=6), 1000, steps,
                             lyapunov=drift)
            logv = C.log_lyapunov(drift, model, x)
            for n in steps:
                G = S.partial_sum(sched, 1, n)
                F = float(np.exp(C.log_F(drift.log_lam, G, drift.log_c, g1, logv)))
                mean, se = run.moments.mean_V(n), run.moments.se_V(n)
                ok &= mean <= F + 3 * se
                worst = max(worst, (mean - F) / F)
    elapsed = time.perf_counter() - t0
    ok = bool(ok and elapsed <= 60.0)
    criterion(6, ok, f"max (E V - F) / F = {worst:.3f} over 2 schedules x 2 Lyapunov functions x 4 n, "
                     f"{elapsed:.0f} s")
    assert ok


def test_criterion_7_dimension_scaling(criterion):
    t0 = time.perf_counter()
    d_list = list(range(1, 65))
    gau = C.scaling_study("StrongConvex", "isotropic_quadratic", d_list, 0.25)
    hub = C.scaling_study("ReflectionConvex", "huber", d_list, 0.25)
    checks = {
        "Gaussian slope(p) in [0.9, 1.3]": 0.9 <= gau.slope_p <= 1.3,
        "Gaussian slope(gamma) in [-1.2, -0.85]": -1.2 <= gau.slope_gamma <= -0.85,
        "Huber slope(p) in [4.5, 5.5]": 4.5 <= hub.slope_p <= 5.5,
        "Huber slope(gamma) in [-3.4, -2.6]": -3.4 <= hub.slope_gamma <= -2.6,
    }
    # local slopes past the fitted range show where the Huber orders settle
    big = [C.plan_precision("ReflectionConvex", P.huber(d), None, np.zeros(d), 0.25) for d in (64, 128)]
    loc_p = math.log(big[1].p / big[0].p) / math.log(2)
    loc_g = math.log(big[1].gamma / big[0].gamma) / math.log(2)
    elapsed = time.perf_counter() - t0
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    criterion(7, ok, f"Gaussian p {gau.slope_p:.3f}, gamma {gau.slope_gamma:.3f}; Huber p {hub.slope_p:.3f}, "
                     f"gamma {hub.slope_gamma:.3f} (local 64->128: p {loc_p:.2f}, gamma {loc_g:.2f})"
                     + (f"; out of band: {', '.join(failed)}" if failed else "") + f", {elapsed:.1f} s")
    assert ok, failed


def test_criterion_8_omega_vs_bisection(criterion):
    eps = np.geomspace(1e-6, 0.99, 20)
    R = np.linspace(0.1, 20.0, 20)
    worst = 0.0
    for e, r in zip(eps, R):
        # independent route: bisection on the normal CDF via erfc
        tail = lambda u: 0.5 * special.erfc(u / math.sqrt(2.0)) - e / 2.0  # noqa: E731
        q = optimize.bisect(tail, 0.0, 40.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)
        ref = r * r / (2.0 * q) ** 2
        worst = max(worst, abs(C.eval_omega(e, r) - ref) / ref)
    ok = worst <= 1e-9
    criterion(8, ok, f"max relative difference {worst:.2e} at 20 (epsilon, R) pairs")
    assert ok


def test_criterion_9_planner_closure(criterion):
    t0 = time.perf_counter()
    cells, ok = [], True
    for route, family in (("StrongConvex", P.isotropic_quadratic), ("ReflectionConvex", P.huber)):
        for d in (1, 4):
            model = family(d)
            x = model.minimizer + np.eye(d)[0]
            for eps in (0.5, 0.25):
                plan = C.plan_precision(route, model, None, x, eps)
                curve = C.tv_bound_curve(route, model, None, S.Constant(plan.gamma), x,
                                         p_values=[plan.p], gamma_bar=plan.gamma)
                bound = float(curve.total[0])
                ok &= bound <= eps
                cells.append(f"{route[:6]} d={d} eps={eps}: {bound:.3f}")
    elapsed = time.perf_counter() - t0
    criterion(9, bool(ok), "; ".join(cells) + f", {elapsed:.1f} s")
    assert ok
