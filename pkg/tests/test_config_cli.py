import json
import subprocess
import sys

import pytest

from qsdlab.cli import main
from qsdlab.config import SCHEMA, ConfigError, config_from_dict, default_config, parse_config
from qsdlab.validation import FAIL, NOT_APPLICABLE, NOT_RUN, PASS, run_validation

SMALL = """\
alpha = 1.5
output = "unused"

[sigma]
gamma = {gamma}

[grid]
n = 64

[sim]
n_paths = 2000
horizon = 6.0
eps = 0.01
hit_paths = 2000

[validate]
suites = {suites}
kernel_samples = 200
scaling_samples = 200
determinism_paths = 256
"""


def write_cfg(tmp_path, gamma=2.0, suites='["kernels", "entrance"]', name="cfg.toml"):
    path = tmp_path / name
    path.write_text(SMALL.format(gamma=gamma, suites=suites))
    return path


def test_defaults():
    cfg = default_config()
    assert cfg.alpha == 1.5 and cfg["sigma.gamma"] == 2.0
    assert cfg["grid.n"] == 400 and cfg.grid_L() == "auto"
    assert cfg.suites() == {"kernels", "entrance", "spectral", "mc", "determinism"}
    assert set(cfg.echo()) == set(SCHEMA)
    assert cfg.with_overrides(sim__seed=5)["sim.seed"] == 5


def test_parse_file(tmp_path):
    cfg = parse_config(write_cfg(tmp_path))
    assert cfg["grid.n"] == 64 and cfg["sim.n_paths"] == 2000
    assert cfg.base_dir == tmp_path


def test_all_violations_collected():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"alpha": "1.5", "sigma": {"gamma": 2.0}, "grid": {"m": 3}, "bogus": 1})
    codes = info.value.codes
    assert codes.count("UNKNOWN_KEY") == 2 and "TYPE_MISMATCH" in codes
    keys = {v.key for v in info.value.violations}
    assert {"grid.m", "bogus", "alpha"} <= keys


def test_missing_and_constraints():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"sigma": {"gamma": 2.0}})
    assert info.value.codes == ["MISSING_KEY"]
    with pytest.raises(ConfigError) as info:
        config_from_dict({"alpha": 1.5, "sigma": {"gamma": 2.0}, "grid": {"n": 15}, "sim": {"eps": -1.0}})
    assert set(info.value.codes) == {"CONSTRAINT"}
    with pytest.raises(ConfigError) as info:
        config_from_dict({"alpha": 1.5, "sigma": {"kind": "tabulated"}})
    assert "MISSING_KEY" in info.value.codes


@pytest.mark.parametrize("alpha", [1.0, 2.0, 0.7, 2.5])
def test_alpha_range(alpha):
    with pytest.raises(ConfigError) as info:
        config_from_dict({"alpha": alpha, "sigma": {"gamma": 2.0}})
    assert "ALPHA_RANGE" in info.value.codes


@pytest.mark.parametrize("gamma", [1.0, 0.8])
def test_entrance_fail_only_for_spectral_use(gamma):
    config_from_dict({"alpha": 1.5, "sigma": {"gamma": gamma}})
    with pytest.raises(ConfigError) as info:
        config_from_dict({"alpha": 1.5, "sigma": {"gamma": gamma}}, spectral=True)
    assert info.value.codes == ["ENTRANCE_FAIL"]


def test_unreadable_and_syntax(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config(tmp_path / "absent.toml")
    assert info.value.codes == ["UNREADABLE"]
    bad = tmp_path / "bad.toml"
    bad.write_text("alpha = = 1\n")
    with pytest.raises(ConfigError) as info:
        parse_config(bad)
    assert info.value.codes == ["SYNTAX"]


def test_cli_analyze_and_spectrum(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["schema_version"] == 1 and {"analyze", "spectrum"} <= set(report)
    assert report["analyze"]["status"] == "FINITE"
    assert all(report["spectrum"]["invariants"].values())
    for name in ("entrance.csv", "hitting_bound.csv", "hitting_probability.csv", "spectrum.csv", "qsd.csv",
                 "decay.csv"):
        assert (out / name).exists(), name
    assert "lambda0=" in capsys.readouterr().out


def test_cli_divergent_entrance(tmp_path, capsys):
    cfg = write_cfg(tmp_path, gamma=1.0)
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "entrance.csv").read_text().splitlines()
    assert any(r.startswith("entrance_integral,inf,DIVERGENT") for r in rows)
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 2
    assert "ENTRANCE_FAIL" in capsys.readouterr().err


def test_cli_simulate_is_deterministic_and_seeded(tmp_path):
    cfg = write_cfg(tmp_path)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["simulate", "--config", str(cfg), "--out", str(a), "--threads", "1"]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(b), "--threads", "4"]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(c), "--seed", "7"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert {"survival.csv", "occupation.csv", "hits.csv"} <= set(names)
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
    assert (a / "hits.csv").read_bytes() != (c / "hits.csv").read_bytes()


def test_cli_validate_exit_counts_failures(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    code = main(["validate", "--config", str(cfg), "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    checks = report["validate"]["checks"]
    assert code == report["validate"]["failed"] == sum(c["status"] == FAIL for c in checks)
    ran = {c["id"] for c in checks if c["status"] != NOT_RUN}
    assert ran == {1, 2, 3, 4, 5, 17}
    assert all(c["anchor"] for c in checks if c["status"] != NOT_RUN)


def test_divergent_profile_marks_spectral_checks_not_applicable(tmp_path):
    cfg = parse_config(write_cfg(tmp_path, gamma=1.0, suites='["spectral"]'))
    res = run_validation(cfg, tmp_path / "o", echo=None)
    assert {r.status for r in res if 6 <= r.id <= 11} == {NOT_APPLICABLE}


def test_psi0_perturbation_is_detected(tmp_path):
    cfg = default_config().with_overrides(validate__suites=["spectral"])
    clean = run_validation(cfg, tmp_path / "a", only={7}, echo=None)[6]
    assert clean.status == PASS
    hit = run_validation(cfg, tmp_path / "b", only={7}, hooks={"psi0_perturbation": 1e-3}, echo=None)[6]
    assert hit.status == FAIL and "residual" in hit.detail


def test_module_entry_point_rejects_bad_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("alpha = 3.0\n[sigma]\ngamma = 2.0\n")
    proc = subprocess.run([sys.executable, "-m", "qsdlab", "analyze", "--config", str(bad)],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 2
    assert "ALPHA_RANGE" in proc.stderr
