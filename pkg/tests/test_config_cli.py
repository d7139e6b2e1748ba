import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from novikov_lab.cli_runner import expected_artifacts, export_report, main
from novikov_lab.config import (EXPERIMENTS, ExperimentConfig, load_config, parse_config,
                                serialize_config)
from novikov_lab.errors import ConfigError
from novikov_lab.experiments import (check_experiment_config, default_config, initial_momentum,
                                     make_check, refined_grid, with_dx)
from novikov_lab.field_core import Field, Grid


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_defaults_roundtrip(name):
    cfg = default_config(name)
    assert parse_config(serialize_config(cfg)) == cfg


@given(st.floats(0.001, 1.0), st.integers(7, 5000), st.integers(0, 10**6),
       st.lists(st.floats(0.1, 50.0), min_size=2, max_size=5))
def test_roundtrip_property(dx, n, seed, R):
    cfg = ExperimentConfig(seed=seed)
    text = serialize_config(cfg).replace("grid.dx = 0.05", f"grid.dx = {dx!r}")
    text = text.replace("grid.n = 1601", f"grid.n = {n}")
    text += "windows.R = " + ", ".join(repr(r) for r in R) + "\n"
    a = parse_config(text)
    assert a.grid.dx == dx and a.grid.n == n and a.windows.R == tuple(R)
    assert parse_config(serialize_config(a)) == a


def test_parse_comments_and_lists():
    cfg = parse_config("""
        # a comment
        experiment = stability   # trailing
        windows.R = 5, 10
        modulation.n0_candidates = 8, 16
    """)
    assert cfg.experiment == "stability"
    assert cfg.windows.R == (5.0, 10.0)
    assert cfg.modulation.n0_candidates == (8, 16)


@pytest.mark.parametrize("text, field", [
    ("grid.dx = abc", "grid.dx"),
    ("grid.dx = -1", "grid.dx"),
    ("grid.spacing = 1", "grid.spacing"),
    ("foo.bar = 1", "foo.bar"),
    ("colour = red", "colour"),
    ("experiment = nope", "experiment"),
    ("evolve.cfl = 2", "evolve.cfl"),
    ("init.kind = field-file\ninit.file = /no/such/file", "init.file"),
    ("init.q = 1, 0\ninit.p = 1, 1\ninit.kind = multipeakon", "init.q"),
    ("just words", "line 1"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        parse_config(text)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_experiment_init_requirements():
    cfg = default_config("peakon-travel")
    bad = parse_config("init.kind = smooth", cfg)
    with pytest.raises(ConfigError, match="init.kind"):
        check_experiment_config(bad)


def test_refined_grid_keeps_extent():
    cfg = default_config("stability")
    g = refined_grid(cfg.grid, 0.025)
    assert g.x_left == cfg.grid.x_left
    assert g.x_right == pytest.approx(cfg.grid.x_left + (cfg.grid.n - 1) * cfg.grid.dx)
    c2 = with_dx(cfg, 0.1)
    assert c2.grid.dx == 0.1 and c2.study.dx_list == (0.1, 0.05, 0.025)


def test_initial_momentum_kinds(tmp_path):
    cfg = default_config("stability")
    y = initial_momentum(cfg)
    assert y.values.min() >= 0
    assert np.sum(y.values) * y.grid.dx == pytest.approx(2.0 + 0.01 * 2 * 0.443993816 * np.e,
                                                         rel=1e-3)
    g = Grid.symmetric(10.0, 0.1)
    path = tmp_path / "u.csv"
    Field(g, np.exp(-g.x**2)).to_csv(path)
    cfg2 = parse_config(f"init.kind = field-file\ninit.file = {path}")
    yf = initial_momentum(cfg2)
    assert yf.grid.n == g.n


def test_make_check_relations():
    assert make_check("a", 1.0, 2.0).passed
    assert not make_check("a", 3.0, 2.0).passed
    assert make_check("a", 3.0, 2.0, ">=").passed
    assert not make_check("a", float("nan"), 2.0).passed
    assert not make_check("a", 2.0, 2.0, "<").passed


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment = multipeakon\nevolve.t_end = soon\n")
    code = main(["multipeakon", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 4
    assert "evolve.t_end" in capsys.readouterr().err
    code = main(["stability", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 4


def test_cli_multipeakon_run_and_artifacts(tmp_path):
    out = tmp_path / "mp"
    assert main(["multipeakon", "--out", str(out), "--quiet"]) == 0
    for name in expected_artifacts("multipeakon"):
        assert (out / name).exists(), name
    summary = (out / "summary.txt").read_text()
    kv = dict(line.split("=", 1) for line in summary.splitlines())
    assert kv["verdict"] == "pass" and kv["checks"] == kv["passed"] == "3"
    assert kv["missing"] == ""
    # the resolved config reproduces the run configuration
    assert load_config(out / "config.txt").experiment == "multipeakon"


def test_cli_collision_is_blow_up(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment = multipeakon\ninit.q = -1, 1\ninit.p = 1, -1\n")
    out = tmp_path / "col"
    assert main(["multipeakon", "--config", str(cfg), "--out", str(out), "--quiet"]) == 3
    summary = (out / "summary.txt").read_text()
    assert "status=error" in summary and "verdict=fail" in summary


def test_report_flags_missing_artifacts(tmp_path):
    out = tmp_path / "mp"
    assert main(["multipeakon", "--out", str(out), "--quiet"]) == 0
    (out / "trajectory.csv").unlink()
    text, code = export_report(out)
    assert code == 2
    assert "missing=trajectory.csv" in text and "status=partial" in text
    assert main(["report", "--out", str(out), "--quiet"]) == 2


def test_lemma_oracles_report_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["--seed", "7", "--quiet", "--dx-override", "0.1"]
    ca = main(["lemma-oracles", "--out", str(a)] + args)
    cb = main(["lemma-oracles", "--out", str(b), "--jobs", "2"] + args)
    assert ca == cb
    assert (a / "oracle_report.txt").read_bytes() == (b / "oracle_report.txt").read_bytes()
    assert (a / "corpus.csv").read_bytes() == (b / "corpus.csv").read_bytes()


def test_peakon_travel_convergence_table(tmp_path):
    out = tmp_path / "pt"
    assert main(["peakon-travel", "--out", str(out), "--quiet", "--dx-override", "0.1"]) == 0
    rows = (out / "convergence.csv").read_text().splitlines()
    assert rows[0] == "dx,shape_error,runtime_s"
    errs = [float(r.split(",")[1]) for r in rows[1:]]
    assert errs[0] > errs[1] > errs[2]
    assert "info.shape_error.order=" in (out / "summary.txt").read_text()
