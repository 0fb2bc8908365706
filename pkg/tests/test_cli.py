# tests/test_cli.py
from __future__ import annotations

import json
import os
import runpy
import sys

import pandas as pd
import pytest

from kawahara_lab.errors import InvalidInput, InvalidParameters
from kawahara_lab.experiments import REGISTRY
from kawahara_lab.runtime import MANIFEST_NAME
from kawahara_lab.simulation import EXIT_FAILED, EXIT_INVALID, EXIT_OK, THREADS_ENV, main, resolve_threads

ZERO_SOLVE = """\
# zero data stays zero
L = 8*pi
M = 64
dt = 1e-3
T = 0.01
initial = zero
"""


def _config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _manifest(out_dir):
    with open(os.path.join(out_dir, MANIFEST_NAME), encoding="utf-8") as f:
        return json.load(f)


def test_zero_data_solve(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["solve", "--config", _config(tmp_path, ZERO_SOLVE), "--out", str(out)])
    assert code == EXIT_OK
    assert "completed: solve" in capsys.readouterr().out

    traj = pd.read_csv(out / "trajectory.csv")
    assert list(traj.columns) == ["t", "k", "xi", "re", "im"]
    assert (traj[["re", "im"]] == 0.0).all().all()
    assert len(traj) == 64 * len(traj["t"].unique())

    manifest = _manifest(str(out))
    assert manifest["status"] == "completed"
    assert manifest["reason"] is None
    assert manifest["config"]["M"] == 64
    assert set(manifest["derived"]) >= {"b", "b_prime", "s1", "s2", "D", "a"}
    assert sorted(manifest["artifacts"]) == sorted(p for p in os.listdir(out) if p != MANIFEST_NAME)


def test_invalid_config_exits_before_running(tmp_path):
    out = tmp_path / "out"
    code = main(["solve", "--config", _config(tmp_path, "alpha = 0\n"), "--out", str(out)])
    assert code == EXIT_INVALID
    assert not out.exists()


def test_band_outside_the_grid_is_invalid(tmp_path):
    text = "L = 8*pi\nM = 64\ninitial = bump\nband = 4\n"
    code = main(["solve", "--config", _config(tmp_path, text), "--out", str(tmp_path / "out")])
    assert code == EXIT_INVALID


def test_reruns_are_byte_identical(tmp_path):
    text = "L = 8*pi\nM = 64\ndt = 1e-3\nT = 0.01\ninitial = bump\namplitude = 0.2\nband = 1.5\n"
    cfg = _config(tmp_path, text)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfg, "--out", str(first)]) == EXIT_OK
    assert main(["solve", "--config", cfg, "--out", str(second), "--threads", "3"]) == EXIT_OK
    for name in ("trajectory.csv", "invariants.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_threads_resolution(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(InvalidParameters):
        resolve_threads(None)
    with pytest.raises(InvalidParameters):
        resolve_threads(0)


def test_bad_thread_env_is_invalid(tmp_path, monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "-1")
    code = main(["solve", "--config", _config(tmp_path, ZERO_SOLVE), "--out", str(tmp_path / "out")])
    assert code == EXIT_INVALID


class _PartialThenFail:
    name = "solve"

    def validate(self, cfg):
        pass

    def run(self, cfg, out, *, threads=1):
        out.csv("partial.csv", pd.DataFrame({"t": [0.0], "sup_diff": [1.0]}))
        raise InvalidInput("state went out of range")


def test_failed_run_keeps_partial_artifacts(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(REGISTRY, "solve", _PartialThenFail)
    out = tmp_path / "out"
    code = main(["solve", "--config", _config(tmp_path, ZERO_SOLVE), "--out", str(out)])
    assert code == EXIT_FAILED
    assert "reason: InvalidInput: state went out of range" in capsys.readouterr().out
    manifest = _manifest(str(out))
    assert manifest["status"] == "failed"
    assert manifest["artifacts"] == ["partial.csv"]
    assert (out / "partial.csv").exists()


def test_counterexample_with_plots(tmp_path):
    text = (
        "M = 64\n"
        "epsilon = 0.1\n"
        "s_values = [-1.0, 0.0]\n"
        "N_values = [16, 32, 64, 128]\n"
        "lattice_density = 8\n"
    )
    out = tmp_path / "out"
    code = main(["counterexample", "--config", _config(tmp_path, text), "--out", str(out), "--plots"])
    assert code == EXIT_OK
    slopes = pd.read_csv(out / "slopes.csv")
    assert list(slopes["s"]) == [-1.0, 0.0]
    assert slopes["slope"].iloc[0] > 0.0 > slopes["slope"].iloc[1]
    assert (out / "ratios.svg").exists()
    assert "ratios.svg" in _manifest(str(out))["artifacts"]
    assert not (out / "slopes.svg").exists()


def test_unknown_kind_is_rejected_by_the_parser(tmp_path):
    with pytest.raises(SystemExit):
        main(["heat", "--config", _config(tmp_path, ZERO_SOLVE), "--out", str(tmp_path / "out")])


STRICHARTZ = """\
alpha = 1e-3
L = 8*pi
M = 128
n_t = 64
s = 0.25
epsilon = 0.1
samples = 2
band_fraction = 0.75
"""

CATALOG = [
    "linear-xsb",
    "high-l4l2",
    "high-smoothing-l4linf",
    "l12",
    "l4",
    "high-maximal",
    "high-l4-smoothing",
    "xsb-maximal",
    "maximal",
]


def test_strichartz_check(tmp_path):
    out = tmp_path / "out"
    code = main(["strichartz-check", "--config", _config(tmp_path, STRICHARTZ), "--out", str(out)])
    assert code == EXIT_OK
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary.columns) == ["estimate", "max_ratio", "slope", "skipped", "stable"]
    assert list(summary["estimate"]) == CATALOG
    assert (summary["max_ratio"] > 0.0).all()
    assert set(summary["stable"]) <= {0, 1}
    ratios = pd.read_csv(out / "ratios_maximal.csv")
    # two rough samples at two resolutions
    assert len(ratios) == 4


@pytest.mark.parametrize(
    "old,new",
    [
        ("band_fraction = 0.75", "band_fraction = 0.25"),  # band 2 does not reach D = 4
        ("n_t = 64", "n_t = 8"),  # phase step above pi/4
        ("s = 0.25", "s = 0.0"),
    ],
)
def test_strichartz_check_rejects(tmp_path, old, new):
    text = STRICHARTZ.replace(old, new)
    code = main(["strichartz-check", "--config", _config(tmp_path, text), "--out", str(tmp_path / "out")])
    assert code == EXIT_INVALID


VERIFY = """\
alpha = 0.1
L = 8*pi
M = 32
n_t = 32
s = -0.25
epsilon = 0.1
samples = 2
band_fraction = 0.25
"""


def test_verify_bilinear(tmp_path):
    out = tmp_path / "out"
    code = main(["verify-bilinear", "--config", _config(tmp_path, VERIFY), "--out", str(out)])
    assert code == EXIT_OK
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary["estimate"]) == ["same-regularity", "smoothing"]
    assert (summary["skipped"] == 0).all()
    for name in ("same-regularity", "smoothing"):
        frame = pd.read_csv(out / f"ratios_{name}.csv")
        assert sorted(frame["resolution"].unique()) == [32, 64]


def test_verify_bilinear_keeps_products_on_the_grid(tmp_path):
    text = VERIFY.replace("band_fraction = 0.25", "band_fraction = 0.5")
    code = main(["verify-bilinear", "--config", _config(tmp_path, text), "--out", str(tmp_path / "out")])
    assert code == EXIT_INVALID


UNIFORM = """\
L = 16*pi
M = 128
dt = 1e-4
T = 0.0128
initial = rough
s = -0.4
k_max = 1.0
t_max = 0.0128
t_levels = 7
"""


def test_uniform_run(tmp_path):
    out = tmp_path / "out"
    code = main(["converge-uniform", "--config", _config(tmp_path, UNIFORM), "--out", str(out)])
    assert code == EXIT_OK
    frame = pd.read_csv(out / "uniform.csv")
    assert len(frame) == 8
    assert frame["sup_diff"].iloc[-1] == 0.0
    assert not (out / "refinement.csv").exists()


def test_uniform_refinement_gap_fails_the_run(tmp_path, capsys):
    out = tmp_path / "out"
    text = UNIFORM + "refine_check = true\nrefine_tolerance = 0\n"
    code = main(["converge-uniform", "--config", _config(tmp_path, text), "--out", str(out)])
    assert code == EXIT_FAILED
    assert "reason: ResolutionError: sup-x refinement gap" in capsys.readouterr().out
    manifest = _manifest(str(out))
    assert manifest["status"] == "failed"
    assert sorted(manifest["artifacts"]) == ["refinement.csv", "uniform.csv"]
    check = pd.read_csv(out / "refinement.csv")
    assert list(check.columns) == ["M", "gap", "tolerance", "passed"]
    assert check["passed"].iloc[0] == 0


def test_uniform_ladder_outside_the_small_time_regime_is_invalid(tmp_path):
    text = UNIFORM.replace("k_max = 1.0", "k_max = 4.0").replace("T = 0.0128", "T = 0.1")
    text = text.replace("t_max = 0.0128", "t_max = 0.1").replace("t_levels = 7", "t_levels = 3")
    code = main(["converge-uniform", "--config", _config(tmp_path, text), "--out", str(tmp_path / "out")])
    assert code == EXIT_INVALID


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_module_entry_point(tmp_path, monkeypatch):
    out = tmp_path / "out"
    argv = ["kawahara-lab", "solve", "--config", _config(tmp_path, ZERO_SOLVE), "--out", str(out)]
    monkeypatch.setattr(sys, "argv", argv)
    with pytest.raises(SystemExit) as exc:
        runpy.run_module("kawahara_lab.simulation", run_name="__main__")
    assert exc.value.code == EXIT_OK
    assert (out / "trajectory.csv").exists()


def test_help_names_the_periodic_problem(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    assert "periodic Kawahara equation" in " ".join(capsys.readouterr().out.split())
