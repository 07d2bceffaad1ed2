"""
Command-line front end.

    ulacert <subcommand> --config <path> [--out <dir>] [--workers N]

Subcommands: plan, certify, sample, couple, validate, scaling, explain.
Exit codes: 0 success, 1 configuration error, 2 infeasible constants,
3 failed validation.  Every run writes result.json (config hash,
provenance flags, all constants) and, where applicable, curves.csv and
densities.csv.  Reruns with the same config are byte-identical except for
``metadata.timestamp``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import __version__
from . import certifier as cf
from . import potentials as pt
from . import schedule as sch
from .errors import ConfigurationError, InfeasibleError, UlacertError, ValidationFailure

SUBCOMMANDS = ("plan", "certify", "sample", "couple", "validate", "scaling", "explain")
OUT_ENV = "ULACERT_OUT"

# accepted keys per config section; None means free-form (family parameters)
SCHEMA: Dict[str, Any] = {
    "potential": {"family": str, "params": None, "certificate": None},
    "route": str,
    "schedule": None,
    "x": None,
    "gamma_bar": float,
    "seed": int,
    "inputs": {"C_half": float, "upsilon_half": float, "C_quarter": float, "upsilon_quarter": float,
               "variance_integral": float, "variance_provenance": str, "poincare_sqrt": bool,
               "omega_exponent": str},
    "plan": {"epsilon": float, "p": int, "n": int},
    "certify": {"p_max": int, "p_values": list, "split_variant": str},
    "sample": {"n_chains": int, "p": int, "record_at": list, "start_spread": float},
    "couple": {"y": None, "t_grid": list, "dt": float, "n_runs": int, "epsilon": float,
               "halving": bool},
    "validate": {"gammas": list, "p_values": list, "p_max": int, "n_points": int},
    "scaling": {"d_list": list, "epsilon": float, "start_radius": float},
    "explain": {"n": int},
}
CERT_CLASSES = {
    "Superexponential": pt.Superexponential,
    "LogConcave": pt.LogConcave,
    "StronglyConvexOutsideBall": pt.StronglyConvexOutsideBall,
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    """Parse a YAML or JSON document and check it against SCHEMA."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML/JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a mapping at the top level")
    validate_config(cfg)
    return cfg


def _check_type(where, value, typ):
    if typ is None:
        return
    if typ is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        raise ConfigurationError(f"config key {where} must be of type {typ.__name__}, got {value!r}")


def validate_config(cfg: dict):
    unknown = sorted(set(cfg) - set(SCHEMA))
    if unknown:
        raise ConfigurationError(f"unknown config keys {unknown}; allowed: {sorted(SCHEMA)}")
    for key, spec in SCHEMA.items():
        if key not in cfg:
            continue
        if isinstance(spec, dict):
            sec = cfg[key]
            if not isinstance(sec, dict):
                raise ConfigurationError(f"config section {key} must be a mapping")
            extra = sorted(set(sec) - set(spec))
            if extra:
                raise ConfigurationError(f"unknown keys {extra} in section {key}; allowed: {sorted(spec)}")
            for k, typ in spec.items():
                if k in sec:
                    _check_type(f"{key}.{k}", sec[k], typ)
        else:
            _check_type(key, cfg[key], spec)
    if "potential" not in cfg or "family" not in cfg["potential"]:
        raise ConfigurationError("config needs potential.family")


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


class Experiment:
    """Objects built from a validated config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        pot = cfg["potential"]
        params = pot.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigurationError("potential.params must be a mapping")
        self.model = pt.build_family(pot["family"], **params)
        self.route = cfg.get("route")
        if self.route is not None and self.route not in cf.ROUTE_CLASS:
            raise ConfigurationError(f"unknown route {self.route!r}; choose from {list(cf.ROUTE_CLASS)}")
        self.cert, self.cert_provenance = self._certificate(pot.get("certificate"))
        self.schedule = sch.schedule_from_spec(cfg["schedule"]) if "schedule" in cfg else None
        self.x = self._point(cfg.get("x"))
        self.gamma_bar = cfg.get("gamma_bar")
        self.inputs = cf.RouteInputs(**cfg.get("inputs", {}))
        self.seed = int(cfg.get("seed", 0))

    def _certificate(self, spec):
        if spec is None:
            if self.route is None:
                return None, "none"
            name = cf.ROUTE_CLASS[self.route].__name__
            return self.model.certificate(name), "built-in"
        if isinstance(spec, str):
            return self.model.certificate(spec), "built-in"
        if isinstance(spec, dict):
            spec = dict(spec)
            klass = CERT_CLASSES.get(spec.pop("class", None))
            if klass is None:
                raise ConfigurationError(
                    f"certificate.class must be one of {sorted(CERT_CLASSES)} "
                    f"(perturbed certificates carry callables and are built-in only)")
            try:
                return klass(**{k: float(v) for k, v in spec.items()}), "user"
            except TypeError as exc:
                raise ConfigurationError(f"bad certificate fields: {exc}") from None
        raise ConfigurationError("potential.certificate must be a class name or a mapping")

    def _point(self, x):
        d = self.model.dim
        if x is None:
            return self.model.minimizer.copy()
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            out = self.model.minimizer.copy()
            out[0] += float(x)
            return out
        arr = np.asarray(x, dtype=float)
        if arr.shape != (d,):
            raise ConfigurationError(f"x must be a radius or a list of {d} numbers")
        return arr

    def need(self, *what):
        for w in what:
            if getattr(self, w) is None:
                raise ConfigurationError(f"this subcommand needs '{w}' in the config")

    def section(self, name) -> dict:
        return dict(self.cfg.get(name, {}))

    def provenance(self, mc: bool = False) -> dict:
        inp = self.inputs
        var = "not used"
        if self.route == "Bobkov":
            var = inp.variance_provenance if inp.variance_integral is not None else "exact"
        return {
            "certificate": self.cert_provenance,
            "variance_integral": var,
            "C_half": "user" if inp.C_half is not None else "not used",
            "C_quarter": "user" if inp.C_quarter is not None else "not used",
            "constants": "formula",
            "samples": "mc" if mc else "none",
        }


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return v


def write_csv(path: Path, rows: List[dict]):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _csv_value(v) for k, v in row.items()})


def write_result(out: Path, sub: str, cfg: dict, prov: dict, result: dict, status: str):
    doc = {
        "tool": "ulacert",
        "version": __version__,
        "subcommand": sub,
        "status": status,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "provenance": prov,
        "result": result,
        # the only field that changes between reruns
        "metadata": {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")},
    }
    (out / "result.json").write_text(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _log_spaced(p_max, n_points, start=1):
    return sorted(set(int(v) for v in np.round(np.geomspace(start, p_max, n_points))))


def cmd_plan(ex: Experiment, out: Path, workers: int):
    ex.need("route")
    s = ex.section("plan")
    if "epsilon" in s:
        plan = cf.plan_precision(ex.route, ex.model, ex.cert, ex.x, float(s["epsilon"]),
                                 ex.gamma_bar, ex.inputs)
        res = {"mode": "precision", "plan": plan.as_dict()}
        if "p" in s or "n" in s:
            raise ConfigurationError("plan takes either epsilon (precision) or p and n (fixed budget)")
    elif "p" in s:
        fb = cf.plan_fixed_budget(ex.route, ex.model, ex.cert, ex.x, int(s["p"]), int(s.get("n", 0)),
                                  ex.gamma_bar, ex.inputs)
        res = {"mode": "fixed_budget", "plan": dict(vars(fb))}
    else:
        raise ConfigurationError("plan needs plan.epsilon or plan.p")
    return res, [], None, False


def cmd_certify(ex: Experiment, out: Path, workers: int):
    ex.need("route", "schedule")
    s = ex.section("certify")
    if "p_values" in s:
        pv = [int(v) for v in s["p_values"]]
    elif "p_max" in s:
        pv = _log_spaced(int(s["p_max"]), 50)
    else:
        raise ConfigurationError("certify needs certify.p_max or certify.p_values")
    curve = cf.tv_bound_curve(ex.route, ex.model, ex.cert, ex.schedule, ex.x,
                              split_variant=s.get("split_variant", "optimize"), p_values=pv,
                              gamma_bar=ex.gamma_bar, inputs=ex.inputs)
    res = {"constants": curve.constants, "split_variant": curve.split_variant,
           "schedule": curve.schedule, "final_bound": float(curve.total[-1]),
           "any_clamped": bool(curve.clamped.any())}
    return res, list(curve.rows()), None, False


def cmd_sample(ex: Experiment, out: Path, workers: int):
    from .sampler import ChainEnsemble, run_chains

    ex.need("schedule")
    s = ex.section("sample")
    n_chains = int(s.get("n_chains", 10_000))
    p = int(s.get("p", 100))
    record = [int(k) for k in s.get("record_at", _log_spaced(p, 10))]
    drift = None
    if ex.route is not None and ex.route != "LogSobolev":
        gb = ex.gamma_bar if ex.gamma_bar is not None else float(sch.gamma(ex.schedule, 1))
        drift = cf.euler_drift(ex.model, ex.cert, gb)
    ens = ChainEnsemble(ex.model, ex.schedule, n_chains, ex.x, seed=ex.seed,
                        start_spread=float(s.get("start_spread", 0.0)))
    run = run_chains(ens, p, record, lyapunov=drift, workers=workers)
    cols = run.moments.columns
    rows = [dict(zip(cols, r)) for r in run.moments.rows()]
    res = {"n_chains": n_chains, "p": p, "record_at": record, "certifiable": ens.certifiable}
    if drift is not None:
        # moment lemma: E V(X_n) <= F(lambda, Gamma_{1,n}, c, gamma_1, V(x))
        g1 = float(sch.gamma(ex.schedule, 1))
        logv = cf.log_lyapunov(drift, ex.model, ex.x)
        checks = []
        for k in record:
            if k == 0:
                continue
            G = sch.partial_sum(ex.schedule, 1, k)
            bound = float(np.exp(cf.log_F(drift.log_lam, G, drift.log_c, g1, logv)))
            mean, se = run.moments.mean_V(k), run.moments.se_V(k)
            checks.append({"step": k, "mean_V": mean, "se_V": se, "F_bound": bound,
                           "within": bool(mean <= bound + 3 * se)})
        res["moment_lemma"] = checks
        res["drift"] = drift.as_dict()
        if not all(c["within"] for c in checks):
            res["failure"] = "sampler: empirical E V(X_n) exceeds the moment bound F"
            return res, rows, None, True, True
    return res, rows, None, True


def cmd_couple(ex: Experiment, out: Path, workers: int):
    from .coupling import coupling_tail, tv_from_coupling

    s = ex.section("couple")
    t_grid = [float(t) for t in s.get("t_grid", [0.5, 1.0, 2.0, 4.0])]
    kw = dict(dt=float(s.get("dt", 1e-3)), n_runs=int(s.get("n_runs", 10_000)), seed=ex.seed,
              halving=bool(s.get("halving", True)), workers=workers)
    y = s.get("y")
    y = ex.model.minimizer.copy() if y is None else ex._point(y)
    res: Dict[str, Any] = {"clock": "rescaled (drift -grad U / 2); Langevin time = t / 2"}
    if ex.route in ("StrongConvex", "ReflectionConvex"):
        tv = tv_from_coupling(ex.route, ex.model, ex.x, t_grid, y=y, cert=ex.cert,
                              epsilon=float(s.get("epsilon", 0.5)), **kw)
        tail, theorem = tv.tail, tv.theorem
        res.update({"log_kappa_rescaled": tv.log_kappa, "constants": tv.constants,
                    "theorem_violations": int(tv.violations.sum())})
        failed = bool(tv.violations.any())
    else:
        tail = coupling_tail(ex.model, ex.x, y, t_grid, **kw)
        theorem = None
        failed = False
    res.update({"dt": tail.dt, "merge_radius": tail.merge_radius, "n_runs": tail.n_runs,
                "dt_sensitive": tail.dt_sensitive,
                "survival_half_dt": None if tail.survival_half is None else tail.survival_half,
                "tail_bound_violations": int(tail.violations().sum())})
    failed = failed or bool(tail.violations().any())
    rows = list(tail.rows(theorem))
    if failed:
        res["failure"] = "coupling: empirical coupling tail exceeds the certified curve"
    return res, rows, None, True, failed


def cmd_validate(ex: Experiment, out: Path, workers: int):
    from . import oracle as orc

    ex.need("route")
    s = ex.section("validate")
    if "gammas" in s:
        schedules = [sch.Constant(float(g)) for g in s["gammas"]]
    else:
        ex.need("schedule")
        schedules = [ex.schedule]
    if "p_values" in s:
        pv = [int(v) for v in s["p_values"]]
    else:
        pv = _log_spaced(int(s.get("p_max", 2000)), int(s.get("n_points", 20)), start=10)
    gaussian = ex.model.family == "isotropic_quadratic" and ex.model.params.get("curvature", 1.0) == 1.0
    if ex.model.dim != 1 and not gaussian:
        raise ConfigurationError("validate needs a 1-D model (grid oracle) or the standard Gaussian")
    rows, densities = [], {}
    for s_k in schedules:
        curve = cf.tv_bound_curve(ex.route, ex.model, ex.cert, s_k, ex.x, p_values=pv,
                                  gamma_bar=ex.gamma_bar, inputs=ex.inputs)
        label = json.dumps(sch.schedule_to_spec(s_k), sort_keys=True)
        if ex.model.dim == 1:
            dens = orc.grid_propagate(ex.model, s_k, float(ex.x[0]), max(pv), record_at=pv)
            densities[label] = dens[max(pv)]
            pi = (orc.GaussianDist(ex.model.minimizer, 1.0) if gaussian
                  else orc.target_density(ex.model, dens[max(pv)]))
        else:
            pi = orc.GaussianDist(ex.model.minimizer, 1.0)
        for i, p in enumerate(curve.p):
            p = int(p)
            if ex.model.dim == 1:
                g = orc.grid_tv(dens[p], pi)
                tv, err = g.value, g.error
            else:
                if not isinstance(s_k, sch.Constant):
                    raise ConfigurationError("the Gaussian closed form needs a constant schedule")
                law = orc.gaussian_ula_marginal(ex.x, s_k.gamma, p)
                tv, err = orc.gaussian_tv(law, pi), 0.0
            bound = float(curve.total[i])
            rows.append({"schedule": label, "p": p, "n": int(curve.n[i]), "bound": bound,
                         "oracle_tv": 2.0 * tv, "oracle_error": 2.0 * err,
                         "ok": bool(bound >= 2.0 * tv and bound <= 2.0)})
    n_bad = sum(not r["ok"] for r in rows)
    res = {"rows": len(rows), "violations": n_bad,
           "convention": "bound and oracle_tv are L1 distances (diameter 2)"}
    if n_bad:
        res["failure"] = f"certifier: master bound below the oracle TV at {n_bad} of {len(rows)} rows"
    return res, rows, densities, False, n_bad > 0


def cmd_scaling(ex: Experiment, out: Path, workers: int):
    ex.need("route")
    s = ex.section("scaling")
    if "d_list" not in s or "epsilon" not in s:
        raise ConfigurationError("scaling needs scaling.d_list and scaling.epsilon")
    params = {k: v for k, v in (ex.cfg["potential"].get("params") or {}).items() if k != "dim"}
    radius = float(s.get("start_radius", 0.0))

    def start(model):
        x = model.minimizer.copy()
        x[0] += radius
        return x

    rep = cf.scaling_study(ex.route, ex.cfg["potential"]["family"], [int(d) for d in s["d_list"]],
                           float(s["epsilon"]), family_params=params, gamma_bar=ex.gamma_bar,
                           inputs=ex.inputs, start=start)
    rows = [{"d": int(d), "gamma": g, "p": int(p), "T": T, "certified": bool(c)}
            for d, g, p, T, c in zip(rep.d, rep.gamma, rep.p, rep.T, rep.certified)]
    res = {"slope_gamma": rep.slope_gamma, "slope_p": rep.slope_p, "slope_T": rep.slope_T,
           "family": rep.family, "epsilon": rep.epsilon}
    return res, rows, None, False


def cmd_explain(ex: Experiment, out: Path, workers: int):
    ex.need("route")
    s = ex.section("explain")
    n = int(s.get("n", 0))
    text, values = explain(ex, n)
    print(text)
    return {"formula_chain": text.splitlines(), "values": values}, [], None, False


COMMANDS = {
    "plan": cmd_plan,
    "certify": cmd_certify,
    "sample": cmd_sample,
    "couple": cmd_couple,
    "validate": cmd_validate,
    "scaling": cmd_scaling,
    "explain": cmd_explain,
}


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------

_DRIFT_TEXT = {
    "Superexponential": [
        "Euler drift, V = exp(U/2):",
        "  log lambda = -d L / (2 (1 - L gamma_bar))",
        "  K = max(M_rho, (-8 log lambda / rho^2)^(1 / (2 (alpha - 1))))",
        "  c = -2 log(lambda) lambda^(-gamma_bar) exp(L K^2 / 4)",
    ],
    "LogConcave": [
        "Euler drift, V = exp((eta/4) sqrt(1 + |x - x*|^2)):",
        "  log lambda = -eta^2 (sqrt(2) - 1) / 16",
        "  R_c = max(1, 2 d / eta, M_eta)",
        "  c = ((eta/4)(d + eta gamma_bar / 4) - log lambda) exp(eta sqrt(R_c^2 + 1) / 4 + (eta gamma_bar / 4)(d + eta gamma_bar / 4))",
    ],
    "StronglyConvexOutsideBall": [
        "Euler drift, V = |x - x*|^2:",
        "  log lambda = -2 m + gamma_bar L^2",
        "  c = 2 (d + m M_s^2)",
    ],
}

_MOMENT_TEXT = [
    "Moment functions:",
    "  G(lambda, c, gamma, w) = w + c / (-lambda^gamma log lambda)",
    "  F(lambda, a, c, gamma, w) = lambda^a w + c / (-lambda^gamma log lambda)",
    "  E V(X_n) <= F(lambda, Gamma_{1,n}, c, gamma_1, V(x)),  sup_n E V(X_n) <= G(lambda, c, gamma_1, V(x))",
]

_A_TEXT = {
    "UserSupplied": "  A = L^2 ((alpha+1)/rho (a_alpha + 4 (2-alpha)(alpha+1)/(alpha rho) + 2 log G))^(2/alpha)",
    "Poincare": "  A = L^2 ((alpha+1)/rho (a_alpha + 4 (2-alpha)(alpha+1)/(alpha rho) + 2 log G))^(2/alpha)",
    "Bobkov": "  A = L^2 (4/eta (1 + log G))^2",
    "ReflectionConvex": "  A = L^2 (4/eta (1 + log G))^2",
    "StrongConvex": "  A = L^2 G",
    "LogSobolev": "  A = 2 L1^2 (|x1* - x*|^2 + (2/varpi)(2d + (gamma_1 + 2/varpi) sup|grad U2|^2)) + 2 sup|grad U2|^2",
}

_RATE_TEXT = {
    "UserSupplied": [
        "Ergodicity (user-supplied V^(1/2)-uniform constants):",
        "  kappa = exp(-upsilon_half)",
        "  C(delta_x Q^n) = C_half F(lambda, Gamma_{1,n}, c, gamma_1, V(x))",
    ],
    "Poincare": [
        "Ergodicity via a Lyapunov-based Poincare constant:",
        "  theta = varsigma d L, varsigma = 1/2; beta and K from the continuous drift of exp(U/2)",
        "  log kappa = -theta / (1 + 4 beta K^2 exp(L K^2 / 2) / pi^2)",
        "  C(delta_x Q^n) = (P D_n exp(U(x)))^(1/2)",
        "  P = (alpha+1)^d (2 pi)^((d+1)/2) Gamma(d) exp(a_alpha) / (rho^d Gamma((d+1)/2))",
        "  D_n = (4 pi)^(-d/2) prod_k (1 - L gamma_k)^(-d) (sum_k gamma_k / (1 - L gamma_k))^(-d/2)",
    ],
    "Bobkov": [
        "Ergodicity via the variance-based Poincare constant of a log-concave target:",
        "  log kappa = -1 / (432 Var_pi)",
        "  C(delta_x Q^n) = (P D_n exp(U(x)))^(1/2)",
        "  P = (2 pi)^((d+1)/2) Gamma(d) / (eta^d Gamma((d+1)/2)) + pi^(d/2) M_eta^d / Gamma(d/2 + 1)",
        "  D_n = (4 pi)^(-d/2) prod_k (1 - L gamma_k)^(-d) (sum_k gamma_k / (1 - L gamma_k))^(-d/2)",
    ],
    "ReflectionConvex": [
        "Ergodicity via reflection coupling (two-tail form):",
        "  theta = eta^2 / 8, K = max(1, M_eta, 4 d / eta), s = sqrt(K^2 + 1)",
        "  beta = (eta/4)((eta/4) K + d) max(1, exp(eta s / 4) / s)",
        "  R = (8 / eta) log(4 beta / theta), omega = omega(1/2, R) = R^2 / (2 Phi^{-1}(3/4))^2",
        "  log varpi = -(theta/4) log 2 / (log(beta/theta) + log(3 + 4 exp(theta omega / 4)) + log 2)",
        "  Lambda(delta_x Q^n) = (F(lambda, Gamma_{1,n}, c, gamma_1, V(x)) + beta/theta) / 2 + 2 (beta/theta) exp(theta omega / 4)",
        "  ergodic term = 2 Lambda exp(-theta Gamma_{n+1,p} / 4) + 4 varpi^Gamma_{n+1,p}",
    ],
    "StrongConvex": [
        "Ergodicity via reflection coupling under strong convexity outside a ball:",
        "  M = max(1, M_s), omega = omega(1/2, M) = M^2 / (2 Phi^{-1}(3/4))^2",
        "  log kappa = -(m/2) log 2 / (log(1 + exp(m omega / 4)) + log(1 + M) + log 2)",
        "  C(delta_x Q^n) = 6 + 2 sqrt(d/m + M_s^2) + 2 F(lambda, Gamma_{1,n}, c, gamma_1, V(x))^(1/2)",
    ],
    "LogSobolev": [
        "Ergodicity via a log-Sobolev inequality with bounded perturbation:",
        "  C_LS = exp(osc U2) / m, log kappa = -m exp(-osc U2)",
        "  varpi = 2 m L1 / (m + L1)",
        "  C(delta_x Q^n)^2 = L1 e^(-varpi Gamma_{1,n}/2) |x - x1*|^2 + L1 gamma_n (gamma_n + 2/varpi) sup|grad U2|^2",
        "                     + 2 osc U2 + (2 L1/varpi)(1 - varpi gamma_n)(2d + (gamma_1 + 2/varpi) sup|grad U2|^2)",
        "                     - d (1 + log(2 gamma_n m) - 2 L1 gamma_n)",
    ],
}

_MASTER_TEXT = [
    "Master bound (L1 convention, diameter 2), split n < p:",
    "  |delta_x Q^p - pi| <= 2^(-1/2) L (sum_{k=n+1}^p (gamma_k^3 A / 3 + d gamma_k^2))^(1/2) + C(delta_x Q^n) kappa^Gamma_{n+1,p}",
    "  the split n minimizes the right side; the reported value is clamped at 2",
]


def explain(ex: Experiment, n: int = 0):
    route, model = ex.route, ex.model
    klass = cf.ROUTE_CLASS[route].__name__
    cert = ex.cert
    lines = [f"route {route} with a {klass} certificate on family {model.family} (d = {model.dim})",
             f"  certificate: {_cert_fields(cert)}"]
    values: Dict[str, Any] = {}
    schedule = ex.schedule or sch.Constant(ex.gamma_bar or cf.default_gamma_bar(route, model, cert))
    g1 = float(sch.gamma(schedule, 1))
    gb = ex.gamma_bar if ex.gamma_bar is not None else g1
    if route != "LogSobolev":
        drift = cf.euler_drift(model, cert, gb)
        lines += _DRIFT_TEXT[klass]
        lines.append(f"  = lambda {drift.lam:.10g}, c {drift.c:.10g} at gamma_bar {gb:.10g}")
        values["drift"] = drift.as_dict()
        lines += _MOMENT_TEXT
    else:
        drift = None
    A = cf.A_bound(route, drift, model, cert, schedule, ex.x)
    lines += ["Gradient moment bound:", _A_TEXT[route], f"  = A {A:.10g}"]
    values["A"] = A
    rate = cf.ergodicity_rate(route, model, cert, ex.inputs)
    lines += _RATE_TEXT[route]
    lines.append(f"  = kappa {rate.kappa:.10g} (log kappa {rate.log_kappa:.10g})")
    values["rate"] = rate.as_dict()
    n_eff = max(n, 1) if route in ("Poincare", "Bobkov", "LogSobolev") else n
    C = cf.C_bound(route, ex.x, n_eff, schedule, drift, rate, model, cert, ex.inputs)
    lines.append(f"  = C(delta_x Q^{n_eff}) {C:.10g}")
    values["C"] = {"n": n_eff, "value": C}
    lines += _MASTER_TEXT
    return "\n".join(lines), values


def _cert_fields(cert) -> str:
    if cert is None:
        return "none"
    out = []
    for k, v in vars(cert).items():
        if isinstance(v, (int, float)):
            out.append(f"{k}={v:g}")
    return f"{type(cert).__name__}(" + ", ".join(out) + ")"


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _origin(exc: BaseException) -> str:
    """Module of the innermost package frame that raised ``exc``."""
    mod = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("ulacert."):
            mod = name.split(".", 1)[1]
    return mod


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are configuration errors (exit 1), not infeasibility (exit 2)
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ulacert",
                                 description="Certified TV bounds, plans and validation for ULA.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="YAML or JSON experiment config")
    ap.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    ap.add_argument("--workers", type=int, default=1, help="threads for simulation blocks")
    return ap


def run(sub: str, config: str, out: Optional[str] = None, workers: int = 1) -> int:
    out_dir = Path(out or os.environ.get(OUT_ENV) or ".")
    cfg: dict = {}
    try:
        if workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        cfg = load_config(config)
        ex = Experiment(cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
        ret = COMMANDS[sub](ex, out_dir, workers)
        res, rows, densities, mc = ret[:4]
        failed = ret[4] if len(ret) > 4 else False
        status = "validation_failure" if failed else "ok"
        write_result(out_dir, sub, cfg, ex.provenance(mc), res, status)
        write_csv(out_dir / "curves.csv", rows)
        if densities:
            from .oracle import write_densities_csv
            write_densities_csv(out_dir / "densities.csv", densities)
        if failed:
            raise ValidationFailure(res.get("failure", f"{sub}: asserted bound violated"))
        return 0
    except UlacertError as exc:
        if isinstance(exc, ValidationFailure):
            print(f"ulacert {sub}: validation failure in {exc}", file=sys.stderr)
        else:
            print(f"ulacert {sub}: error in {_origin(exc)}: {exc}", file=sys.stderr)
        if not isinstance(exc, ValidationFailure) and cfg:
            try:
                out_dir.mkdir(parents=True, exist_ok=True)
                write_result(out_dir, sub, cfg, {}, {"error": str(exc), "module": _origin(exc),
                                                     "type": type(exc).__name__},
                             "infeasible" if isinstance(exc, InfeasibleError) else "error")
            except OSError:
                pass
        return exc.exit_code
    except (ArithmeticError, ValueError) as exc:
        # numerical trouble outside the checked paths: report, do not crash
        print(f"ulacert {sub}: error in {_origin(exc)}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.workers)


if __name__ == "__main__":
    sys.exit(main())
