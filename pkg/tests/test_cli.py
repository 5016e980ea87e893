import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqlab import cli
from pqlab.cli import ConfigError, ExperimentConfig

ROOT = Path(__file__).resolve().parents[1]


def write_cfg(tmp_path, name="run.cfg", **kw):
    cfg = ExperimentConfig(out=str(tmp_path / "out"), **kw)
    p = tmp_path / name
    p.write_text(cfg.to_text())
    return p


# ------------------------------------------------------------ config


finite = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(p=st.integers(2, 4), q=st.integers(1, 3), Lmax=st.integers(2, 14),
       l1=finite, l2=finite, seed=st.integers(0, 2 ** 31), eps=st.floats(0, 1),
       win=st.floats(0.05, 1.0), tol=st.one_of(st.none(), finite),
       grid=st.one_of(st.none(), st.tuples(st.floats(0, 10), st.floats(11, 50), st.integers(2, 500))))
def test_config_round_trip(p, q, Lmax, l1, l2, seed, eps, win, tol, grid):
    cfg = ExperimentConfig(p=p, q=q, Lmax=Lmax, lengths=[l1, l2], seed=seed, deform_eps=eps,
                           fit_window=win, tolerance=tol,
                           t_grid=None if grid is None else list(grid))
    cfg.validate()
    text = cfg.to_text()
    back = ExperimentConfig.from_text(text)
    assert back == cfg
    assert back.to_text() == text


def test_matrices_round_trip(ref_rep):
    gens = [[[repr(float(x)) for x in r] for r in g] for g in ref_rep.generators]
    cfg = ExperimentConfig(builder="matrices", generators=gens)
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg
    for a, b in zip(back.build().generators, ref_rep.generators):
        assert np.array_equal(a, b)


def test_reference_config_file_is_default():
    cfg = ExperimentConfig.load(ROOT / "configs" / "reference.cfg")
    assert cfg == ExperimentConfig()


@pytest.mark.parametrize("line,field", [
    ("lengths = [4.0]", "lengths"),
    ("lengths = [4.0, -1.0]", "lengths"),
    ("Lmax = 1", "Lmax"),
    ("Lmax = \"twelve\"", "Lmax"),
    ("colour = 3", "colour"),
    ("p = [2", "p"),
    ("builder = \"magic\"", "builder"),
    ("t_grid = [5, 1, 10]", "t_grid"),
    ("basepoint = [0, 0, 1]", "basepoint"),
    ("fit_window = 0", "fit_window"),
])
def test_config_diagnostics(line, field):
    text = "# header\np = 2\nq = 2\n" + line + "\n"
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_text(text)
    assert e.value.field == field
    assert e.value.line == 4
    assert f"line 4: field '{field}'" in str(e.value)


def test_config_duplicate_and_syntax():
    with pytest.raises(ConfigError, match="duplicate"):
        ExperimentConfig.from_text("p = 2\np = 3\n")
    with pytest.raises(ConfigError, match="line 1"):
        ExperimentConfig.from_text("just words\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.load("/nonexistent/file.cfg")


# ------------------------------------------------------------ commands


def test_gap_reference_and_identity(tmp_path, capsys):
    p = write_cfg(tmp_path, Lmax=6)
    assert cli.main(["gap", "--config", str(p)]) == 0
    d = json.loads((tmp_path / "out" / "gap.json").read_text())
    assert d["anosov"] and d["alpha"] > 0
    assert (tmp_path / "out" / "gap.csv").exists()
    eye = [[repr(float(x)) for x in r] for r in np.eye(4)]
    q = write_cfg(tmp_path, "id.cfg", builder="matrices", generators=[eye, eye], Lmax=4)
    assert cli.main(["gap", "--config", str(q)]) == 1


def test_config_error_exit(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("p = 2\nq = 2\nk = 2\nlengths = [0.1]\n")
    assert cli.main(["gap", "--config", str(p)]) == 2
    assert "field 'lengths'" in capsys.readouterr().err
    # a Schottky construction failure is a config error too
    p.write_text("lengths = [0.01, 0.01]\n")
    assert cli.main(["gap", "--config", str(p)]) == 2


def test_verify_reference(tmp_path):
    p = write_cfg(tmp_path)
    assert cli.main(["verify", "--config", str(p)]) == 0
    d = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert all(s["passed"] for s in d.values())
    assert len(d) == len(cli.SUITES)


def test_verify_failures(tmp_path):
    p = write_cfg(tmp_path, basepoint=[0, 0, 0, 1], verify_samples=100)
    assert cli.main(["verify", "--config", str(p)]) == 1
    d = json.loads((tmp_path / "out" / "verify.json").read_text())
    omega = d["omega_membership"]
    assert not omega["passed"] and omega["worst"] < 1e-9
    p = write_cfg(tmp_path, "tight.cfg", tolerance=1e-20, verify_samples=100)
    assert cli.main(["verify", "--config", str(p)]) == 1


def test_count_deterministic_and_cache_neutral(tmp_path):
    cache = tmp_path / "cache"
    p = write_cfg(tmp_path, Lmax=9, cache_dir=str(cache))
    out = tmp_path / "out"
    assert cli.main(["count", "--config", str(p)]) == 0
    first = (out / "count_b_o.csv").read_bytes(), (out / "count_b_o.json").read_bytes()
    assert any(cache.rglob("*.npz"))
    # cached rerun, threaded rerun, and rerun after deleting the cache are byte identical
    assert cli.main(["count", "--config", str(p)]) == 0
    assert (out / "count_b_o.csv").read_bytes() == first[0]
    assert cli.main(["count", "--config", str(p), "--threads", "4"]) == 0
    assert (out / "count_b_o.csv").read_bytes() == first[0]
    shutil.rmtree(cache)
    assert cli.main(["count", "--config", str(p)]) == 0
    assert (out / "count_b_o.csv").read_bytes() == first[0]
    assert (out / "count_b_o.json").read_bytes() == first[1]
    lines = first[0].split(b"\r\n")
    assert lines[0] == b"t,N,complete,Mehat"


def test_count_both_modes_agree(tmp_path):
    p = write_cfg(tmp_path, Lmax=10)
    out = tmp_path / "out"
    for mode in ("b_o", "b_tau"):
        assert cli.main(["count", "--config", str(p), "--mode", mode]) == 0
    ho = json.loads((out / "count_b_o.json").read_text())["h"]
    ht = json.loads((out / "count_b_tau.json").read_text())["h"]
    assert abs(ho - ht) <= 0.15 * max(ho, ht)


def test_count_beyond_certified_range(tmp_path):
    # every grid point lies beyond the certified range: nothing to fit
    p = write_cfg(tmp_path, Lmax=4, t_grid=[100.0, 200.0, 20])
    assert cli.main(["count", "--config", str(p)]) == 1
    rows = (tmp_path / "out" / "count_b_o.csv").read_text().splitlines()[1:]
    assert rows and all(r.split(",")[2] == "0" for r in rows)


def test_count_margin_violation(tmp_path):
    p = write_cfg(tmp_path, Lmax=6, basepoint=[0, 0, 0, 1])
    assert cli.main(["count", "--config", str(p)]) == 1


def test_distribution(tmp_path):
    p = write_cfg(tmp_path, Lmax=10)
    assert cli.main(["distribution", "--config", str(p)]) == 1
    assert cli.main(["count", "--config", str(p)]) == 0
    assert cli.main(["distribution", "--config", str(p)]) == 0
    rows = (tmp_path / "out" / "distribution_b_o.csv").read_text().splitlines()
    assert rows[0] == "t,one,point_e1_sq,hyperplane_e2_sq"
    ones = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert abs(ones.mean() - 1) < 0.1


def test_flags_override_config(tmp_path):
    p = write_cfg(tmp_path, Lmax=3)
    other = tmp_path / "elsewhere"
    assert cli.main(["gap", "--config", str(p), "--Lmax", "5", "--out", str(other)]) == 0
    d = json.loads((other / "gap.json").read_text())
    assert d["Lmax"] == 5
    assert len((other / "gap.csv").read_text().splitlines()) == 6


def test_module_entry_point(tmp_path):
    p = write_cfg(tmp_path, Lmax=4)
    r = subprocess.run([sys.executable, "-m", "pqlab", "gap", "--config", str(p)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "pqlab", "gap"], capture_output=True, text=True)
    assert r.returncode == 2
