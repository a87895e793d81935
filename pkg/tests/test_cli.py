from __future__ import annotations

import json

import pytest

from dagame.cli import load_config, main
from dagame.errors import ConfigError


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = main(["--out", str(out), *args])
    return code, out


def test_defaults_document_nominal_values():
    cfg = load_config()
    assert cfg["scenario"]["Vc"] == 300.0 and cfg["scenario"]["gamma"] == 2.5
    assert cfg["scenario"]["u_sat"] == pytest.approx(39.24)
    assert cfg["noise"]["eta"] == 0.5 and cfg["noise"]["sigma"] is None
    assert cfg["run"]["laws"] == ["da", "perfect", "separation", "pn"]


def test_overrides():
    cfg = load_config(None, ["eta=0.9", "run.runs=10", "scenario.u_sat="])
    assert cfg["noise"]["eta"] == 0.9 and cfg["run"]["runs"] == 10
    assert cfg["scenario"]["u_sat"] is None
    with pytest.raises(ConfigError):
        load_config(None, ["nonsense=1"])
    with pytest.raises(ConfigError):
        load_config(None, ["runs=ten"])


def test_malformed_config_exit_1_no_artifacts(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario\nVc = 300\n")
    code, out = _run(tmp_path, "o", "--study", "gamma-search", "--config", str(bad))
    assert code == 1
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


def test_invalid_value_exit_1(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[noise]\nconvention = sometimes\n")
    code, out = _run(tmp_path, "o", "--study", "gamma-search", "--config", str(cfg))
    assert code == 1 and not out.exists()


def test_gamma_search_prints_margin(tmp_path, capsys):
    code, out = _run(tmp_path, "g", "--study", "gamma-search", "--set", "eta=0.9")
    assert code == 0
    text = capsys.readouterr().out
    assert "gamma_c = 2.99" in text and "min |Omega| at gamma_c" in text
    meta = json.loads((out / "meta.json").read_text())
    assert meta["seed"] == 0 and "Philox" in meta["rng"] and meta["git_describe"]
    assert meta["config"]["noise"]["eta"] == 0.9
    assert (out / "gamma_search.csv").exists() and (out / "summary.txt").exists()


def test_compare_table_and_reproducible(tmp_path):
    args = ["--study", "mge-compare", "--set", "runs=20", "--workers", "1", "--seed", "3"]
    code, out1 = _run(tmp_path, "a", *args)
    code2, out2 = _run(tmp_path, "b", *args)
    assert code == code2 == 0
    lines = (out1 / "summary.txt").read_text().splitlines()
    rows = [ln for ln in lines if ln[:2] in ("u1", "u2", "u3", "u4")]
    assert [r.split()[0] for r in rows] == ["u1", "u2", "u3", "u4"]
    assert "CEP [cm]" in lines[1] and "Effort" in lines[1]
    for name in ("mge_compare.csv", "mge_miss_distribution.csv", "summary.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_infeasible_exit_2(tmp_path):
    code, out = _run(tmp_path, "i", "--study", "mge-compare", "--set", "gamma=1.5",
                     "--set", "runs=4", "--workers", "1")
    assert code == 2
    assert "infeasible" in (out / "summary.txt").read_text()


@pytest.mark.parametrize("study", ["sbgp-gains", "sbgp-saddle"])
def test_boat_studies(tmp_path, study):
    code, out = _run(tmp_path, study, "--study", study)
    assert code == 0
    assert any(p.suffix == ".csv" for p in out.iterdir())


def test_unknown_study_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--study", "nope", "--out", str(tmp_path / "x")])
    assert exc.value.code == 1
    assert not (tmp_path / "x").exists()
