import json
import re
import subprocess
import sys

import pytest
import yaml

from ulacert import cli


def write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def run(tmp_path, sub, cfg, out="out", capsys=None):
    code = cli.main([sub, "--config", write(tmp_path, cfg), "--out", str(tmp_path / out)])
    return code, tmp_path / out


GAUSS4 = {"potential": {"family": "isotropic_quadratic", "params": {"dim": 4}},
          "route": "StrongConvex", "x": 3.0, "plan": {"epsilon": 0.25}}


def test_plan_fields_and_provenance(tmp_path):
    code, out = run(tmp_path, "plan", GAUSS4)
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    for key in ("gamma", "p", "T", "kappa", "A_bar", "C_bar"):
        assert key in res["result"]["plan"]
    assert res["result"]["plan"]["certified"]
    assert res["config_hash"] == cli.config_hash(GAUSS4)
    assert res["provenance"]["certificate"] == "built-in"
    assert set(res["metadata"]) == {"timestamp"}


@pytest.mark.parametrize("sub,cfg", [
    ("plan", GAUSS4),
    ("couple", {"potential": {"family": "isotropic_quadratic", "params": {"dim": 2}},
                "route": "StrongConvex", "x": [2.0, 0.0], "seed": 3,
                "couple": {"t_grid": [0.5, 1.0], "dt": 0.01, "n_runs": 300}}),
    ("sample", {"potential": {"family": "huber", "params": {"dim": 2}}, "route": "ReflectionConvex",
                "schedule": {"kind": "polynomial", "gamma1": 0.5}, "x": 2.0, "seed": 7,
                "sample": {"n_chains": 500, "p": 20, "record_at": [0, 10, 20]}}),
    ("validate", {"potential": {"family": "isotropic_quadratic", "params": {"dim": 1}},
                  "route": "StrongConvex", "x": 3.0,
                  "validate": {"gammas": [0.1], "p_values": [10, 50]}}),
])
def test_reruns_are_byte_identical(tmp_path, sub, cfg):
    c1, o1 = run(tmp_path, sub, cfg, "a")
    c2, o2 = run(tmp_path, sub, cfg, "b")
    assert c1 == c2 == 0
    names = sorted(p.name for p in o1.iterdir())
    assert names == sorted(p.name for p in o2.iterdir()) and "result.json" in names
    for name in names:
        a, b = (o1 / name).read_text(), (o2 / name).read_text()
        if name == "result.json":
            a, b = json.loads(a), json.loads(b)
            a.pop("metadata"), b.pop("metadata")
        assert a == b


def test_validate_writes_densities(tmp_path):
    cfg = {"potential": {"family": "isotropic_quadratic", "params": {"dim": 1}},
           "route": "StrongConvex", "x": 3.0, "validate": {"gammas": [0.05], "p_values": [10, 100]}}
    code, out = run(tmp_path, "validate", cfg)
    assert code == 0
    rows = (out / "curves.csv").read_text().splitlines()
    assert len(rows) == 3 and all(r.endswith("true") for r in rows[1:])
    assert (out / "densities.csv").read_text().startswith("label,step,x,density")


def test_unknown_keys_rejected(tmp_path):
    bad = dict(GAUSS4, plann={})
    assert run(tmp_path, "plan", bad)[0] == 1
    bad = dict(GAUSS4, plan={"epsilon": 0.25, "eps": 1})
    assert run(tmp_path, "plan", bad)[0] == 1


def test_type_errors_rejected(tmp_path):
    assert run(tmp_path, "plan", dict(GAUSS4, plan={"epsilon": "small"}))[0] == 1


def test_superexponential_gamma_bar_error(tmp_path, capsys):
    cfg = {"potential": {"family": "quadratic_cosine", "params": {"dim": 2}}, "route": "Poincare",
           "gamma_bar": 1.0 / 1.5, "schedule": {"kind": "constant", "gamma": 0.1},
           "certify": {"p_max": 100}}
    code, out = run(tmp_path, "certify", cfg)
    assert code == 1
    err = capsys.readouterr().err
    assert "certifier" in err and "open interval" in err
    res = json.loads((out / "result.json").read_text())
    assert res["status"] == "error" and res["result"]["module"] == "certifier"


def test_infeasible_exit_code(tmp_path):
    cfg = {"potential": {"family": "quadratic_cosine", "params": {"dim": 2}}, "route": "Bobkov",
           "plan": {"epsilon": 0.25}}
    assert run(tmp_path, "plan", cfg)[0] == 2


def test_validation_failure_exit_code(tmp_path):
    # a false certificate (m = 50 on the standard Gaussian) promises a coupling curve
    # that the simulated tail exceeds
    cfg = {"potential": {"family": "isotropic_quadratic", "params": {"dim": 1},
                         "certificate": {"class": "StronglyConvexOutsideBall", "m": 50.0}},
           "route": "StrongConvex", "x": 2.0,
           "couple": {"t_grid": [1.0, 2.0, 4.0], "dt": 0.01, "n_runs": 2000}}
    code, out = run(tmp_path, "couple", cfg)
    assert code == 3
    assert json.loads((out / "result.json").read_text())["provenance"]["certificate"] == "user"


def test_explain_prints_formula_chain(tmp_path, capsys):
    code, out = run(tmp_path, "explain", dict(GAUSS4, explain={"n": 10}))
    assert code == 0
    text = capsys.readouterr().out
    assert "kappa" in text and "Master bound" in text
    # formulas are named, never cited by number
    assert not re.search(r"(theorem|lemma|proposition|corollary|section|eq\.)\s*\(?\d", text, re.I)


def test_missing_config_is_config_error(tmp_path):
    assert cli.main(["plan", "--config", str(tmp_path / "none.yaml"), "--out", str(tmp_path)]) == 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 1


def test_console_script(tmp_path):
    path = write(tmp_path, GAUSS4)
    proc = subprocess.run([sys.executable, "-m", "ulacert", "plan", "--config", path,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "result.json").exists()


def test_output_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["plan", "--config", write(tmp_path, GAUSS4)]) == 0
    assert (tmp_path / "env_out" / "result.json").exists()
