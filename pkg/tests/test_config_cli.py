import csv
import json

import pytest

from tro.cli import (
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_SCHEMA,
    RUN_SUMMARY,
    SWEEP_SUMMARY,
    SWEEP_TABLE,
    fit_line,
    main,
)
from tro.config import ConfigError, load_config, parse_config

BASE = {
    "instance": {"dim": 2, "cond_number": 2.0, "noise_sigma": 0.01, "radius_R": 1.0, "seed": 4},
    "algorithm": {"eps_prior": 1e-2, "constants_mode": "practical", "t1": 500},
    "baselines": [{"kind": "sgd-strongly-convex", "total_budget": 3000}],
}


def _with(**sections):
    cfg = json.loads(json.dumps(BASE))
    for name, patch in sections.items():
        if isinstance(patch, dict) and isinstance(cfg.get(name), dict):
            cfg[name].update(patch)
        else:
            cfg[name] = patch
    return cfg


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


@pytest.mark.parametrize(
    "cfg, path",
    [
        (_with(instance={"dim": 0}), "instance.dim"),
        (_with(instance={"dim": "3"}), "instance.dim"),
        (_with(algorithm={"tau": 1.0}), "algorithm.tau"),
        (_with(algorithm={"eps_prior": -1}), "algorithm.eps_prior"),
        (_with(instance={"colour": 1}), "instance.colour"),
        (_with(baselines=[{"kind": "adam"}]), "baselines.0.kind"),
        (_with(baselines=[{"kind": "epoch-doubling", "averaging": "final"}]), "baselines.0"),
        (_with(sweep={"eps_prior": [0.1, -0.1]}), "sweep.eps_prior.1"),
        (_with(algorithm={"constants_mode": "theorem", "t1": 5}), "algorithm"),
        (_with(baselines=[{"kind": "sgd-strongly-convex"}, {"kind": "sgd-strongly-convex"}]), "<root>"),
    ],
)
def test_schema_paths(tmp_path, capsys, cfg, path):
    with pytest.raises(ConfigError) as info:
        parse_config(cfg, env={})
    assert info.value.path == path
    assert main(["params", _write(tmp_path, cfg)]) == EXIT_SCHEMA
    assert f"config error at {path}" in capsys.readouterr().err


def test_missing_section_and_bad_json(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config({"instance": BASE["instance"]}, env={})
    assert info.value.path == "algorithm"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError) as info:
        load_config(bad, env={})
    assert info.value.path == "<root>"
    assert main(["run", str(tmp_path / "absent.json")]) == EXIT_SCHEMA


def test_seed_env_override(monkeypatch):
    assert parse_config(BASE, env={"TRO_SEED": "77"}).instance.seed == 77
    assert parse_config(BASE, env={"TRO_SEED": ""}).instance.seed == 4
    with pytest.raises(ConfigError) as info:
        parse_config(BASE, env={"TRO_SEED": "abc"})
    assert info.value.path == "TRO_SEED"
    monkeypatch.setenv("TRO_SEED", "9")
    assert parse_config(BASE).instance.seed == 9


def test_infeasible_target(tmp_path, capsys):
    # eps_opt = sigma^2 / 2 = 5e-5
    cfg = _with(algorithm={"eps_prior": 1e-5})
    assert main(["run", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert "infeasible target risk" in capsys.readouterr().err
    cfg = _with(sweep={"eps_prior": [1e-2, 1e-5]})
    assert main(["sweep", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_outputs_and_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("TRO_SEED", raising=False)
    cfg = _write(tmp_path, _with(replicas=2))
    assert main(["run", cfg, "--out", str(tmp_path / "a"), "--jobs", "1"]) == EXIT_OK
    assert main(["run", cfg, "--out", str(tmp_path / "b"), "--jobs", "2"]) == EXIT_OK
    summary = json.loads((tmp_path / "a" / RUN_SUMMARY).read_text())
    assert len(summary["runs"]) == 4
    for row in summary["runs"]:
        for name in ("trace.csv", "checkpoints.csv"):
            a = (tmp_path / "a" / row["dir"] / name).read_bytes()
            b = (tmp_path / "b" / row["dir"] / name).read_bytes()
            assert a == b
        assert (tmp_path / "a" / row["dir"] / "summary.json").exists()
    trace = _read_csv(tmp_path / "a" / "targetrisk" / "rep_000" / "trace.csv")
    assert trace[0] == ["stage", "samples_seen", "delta_k", "gamma_k", "dist_to_opt", "risk"]
    assert len(trace) == summary["derived"]["m"] + 2
    cps = _read_csv(tmp_path / "a" / "sgd-strongly-convex" / "rep_001" / "checkpoints.csv")
    assert cps[0] == ["samples", "risk"] and int(cps[-1][0]) == 3000


def test_seed_changes_output(tmp_path, monkeypatch):
    cfg = _write(tmp_path, BASE)
    monkeypatch.setenv("TRO_SEED", "11")
    assert main(["run", cfg, "--out", str(tmp_path / "s11")]) == EXIT_OK
    monkeypatch.setenv("TRO_SEED", "12")
    assert main(["run", cfg, "--out", str(tmp_path / "s12")]) == EXIT_OK
    a = json.loads((tmp_path / "s11" / RUN_SUMMARY).read_text())
    b = json.loads((tmp_path / "s12" / RUN_SUMMARY).read_text())
    assert a["instance"]["seed"] == 11 and b["instance"]["seed"] == 12
    assert a["runs"][0]["final_risk"] != b["runs"][0]["final_risk"]


def test_params_verb(tmp_path, capsys):
    assert main(["params", _write(tmp_path, BASE)]) == EXIT_OK
    out = capsys.readouterr().out
    names = [line.split()[0] for line in out.strip().splitlines()]
    assert names == ["alpha", "beta", "eps_opt", "xi", "T1", "eta", "s", "m", "total_samples"]
    assert "T1            500" in out


def test_verify_verb(capsys):
    assert main(["verify", "--suite", "selfbound", "--seed", "3"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["suite"] == "selfbound"


def test_single_point_sweep(tmp_path):
    cfg = _with(sweep={"eps_prior": [1e-2], "replicas": 2})
    assert main(["sweep", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    summary = json.loads((tmp_path / "o" / SWEEP_SUMMARY).read_text())
    assert summary["fits"]["targetrisk"] == {"log": None, "inverse": None, "ratio": None}
    assert any("fits need at least 3" in w for w in summary["warnings"])
    assert any("2 replicas" in w for w in summary["warnings"])
    rows = _read_csv(tmp_path / "o" / SWEEP_TABLE)
    assert rows[0] == ["method", "eps_prior", "n_ok", "n_exhausted", "median", "q25", "q75"]
    assert [r[0] for r in rows[1:]] == ["targetrisk", "sgd-strongly-convex"]


def test_sweep_reports_exhausted_budget(tmp_path):
    cfg = _with(
        baselines=[{"kind": "sgd-strongly-convex", "total_budget": 3000}],
        sweep={"eps_prior": [1e-1, 1e-2, 1e-4], "replicas": 5, "max_budget": 2},
    )
    assert main(["sweep", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    summary = json.loads((tmp_path / "o" / SWEEP_SUMMARY).read_text())
    sgd = [r for r in summary["table"] if r["method"] == "sgd-strongly-convex"]
    assert sgd[-1]["n_exhausted"] == 5 and sgd[-1]["median"] is None
    assert any("exhausted the budget" in w for w in summary["warnings"])
    assert summary["fits"]["sgd-strongly-convex"]["log"] is None
    assert any("2 usable sweep points" in w for w in summary["warnings"])


def test_sweep_without_section(tmp_path):
    assert main(["sweep", _write(tmp_path, BASE), "--out", str(tmp_path / "o")]) == EXIT_SCHEMA


def test_fit_line_exact():
    f = fit_line([1, 2, 3], [3, 5, 7])
    assert f["slope"] == pytest.approx(2) and f["intercept"] == pytest.approx(1) and f["r2"] == pytest.approx(1)
