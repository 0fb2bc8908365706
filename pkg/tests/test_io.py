# tests/test_io.py
from __future__ import annotations

import math

import pandas as pd
import pytest

from kawahara_lab.errors import InvalidParameters
from kawahara_lab.io import (
    CONFIG_KEYS,
    ExperimentConfig,
    config_from_mapping,
    config_hash,
    load_config,
    parse_flat_config,
    write_csv,
)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_empty_file_gives_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, "empty.cfg", "# nothing\n\n"))
    assert cfg == ExperimentConfig()
    assert cfg.L == pytest.approx(64.0 * math.pi)
    assert cfg.M == 4096


def test_missing_config(tmp_path):
    with pytest.raises(InvalidParameters, match="config not found"):
        load_config(str(tmp_path / "nope.cfg"))


@pytest.mark.parametrize(
    "text,message",
    [
        ("alpha = 0\n", "alpha must be nonzero"),
        ("colour = red\n", "unknown config key: colour"),
        ("M = 100\n", "M"),
        ("epsilon = 0.3\n", "epsilon"),
        ("initial = noise\n", "initial"),
        ("dt = 3e-2\nT = 0.1\n", "whole number of steps"),
        ("band_fraction = 1.0\n", "band_fraction"),
        ("refine_tolerance = -0.1\n", "refine_tolerance"),
    ],
)
def test_invalid_values_are_reported(tmp_path, text, message):
    with pytest.raises(InvalidParameters, match=message):
        load_config(_write(tmp_path, "bad.cfg", text))


def test_flat_parsing():
    raw = parse_flat_config(
        "L = 64*pi   # torus half-length\n"
        "N_values = [1, 2, 4]\n"
        "picard = true\n"
        "dt = 1e-4\n"
    )
    cfg = config_from_mapping(raw)
    assert cfg.L == pytest.approx(64.0 * math.pi)
    assert cfg.N_values == (1.0, 2.0, 4.0)
    assert cfg.picard is True
    assert cfg.dt == pytest.approx(1e-4)


@pytest.mark.parametrize("text", ["M = 64\nM = 128\n", "M 64\n", "= 3\n"])
def test_flat_parsing_rejects(text):
    with pytest.raises(InvalidParameters, match="line"):
        parse_flat_config(text)


def test_yaml_config_and_kind(tmp_path):
    path = _write(tmp_path, "run.yaml", "kind: counterexample\ns: -1.0\nepsilon: 0.1\nL: 8pi\n")
    cfg = load_config(path, kind="counterexample")
    assert cfg.kind == "counterexample"
    assert cfg.L == pytest.approx(8.0 * math.pi)
    derived = cfg.derived()
    assert derived["b"] == pytest.approx(0.6)
    assert derived["b_prime"] == pytest.approx(-0.3)
    assert derived["s1"] == pytest.approx(0.7)
    with pytest.raises(InvalidParameters, match="does not match"):
        load_config(path, kind="solve")


def test_yaml_must_be_a_mapping(tmp_path):
    with pytest.raises(InvalidParameters, match="dict"):
        load_config(_write(tmp_path, "list.yaml", "- 1\n- 2\n"))


def test_snapshot_and_hash():
    cfg = ExperimentConfig(kind="truncate", N_values=(0.5, 1.0))
    snap = cfg.snapshot()
    assert set(snap) == set(CONFIG_KEYS)
    assert snap["N_values"] == [0.5, 1.0]
    assert config_hash(snap) == config_hash(dict(reversed(list(snap.items()))))
    assert config_hash(snap) != config_hash(ExperimentConfig(kind="truncate").snapshot())
    assert len(config_hash(snap)) == 8


def test_write_csv_is_locale_independent(tmp_path):
    path = write_csv(pd.DataFrame({"t": [0.0, 0.5], "value": [1.0, -2.25e-7]}), str(tmp_path / "sub" / "out.csv"))
    data = open(path, "rb").read()
    assert b"\r\n" not in data
    assert data.decode("utf-8").splitlines() == [
        "t,value",
        "0.000000000000e+00,1.000000000000e+00",
        "5.000000000000e-01,-2.250000000000e-07",
    ]
