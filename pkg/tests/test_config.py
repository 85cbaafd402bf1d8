"""Tests for run configuration loading and validation."""
from pathlib import Path

import pytest

from coarse_towers.config import DEFAULT_MAX_POINTS, Caps, RunConfig, load_config, make_config
from coarse_towers.errors import InputError, SizeCapExceeded


def test_defaults():
    config = make_config()
    assert config.net == "closed"
    assert config.caps.max_points == DEFAULT_MAX_POINTS
    assert config.synthesis.b1_max_denominator == 64
    assert config.decision_ledger()["net_convention"] == "closed"


def test_overrides_are_validated():
    assert make_config(net="strict").net == "strict"
    with pytest.raises(InputError):
        make_config(net="open")
    with pytest.raises(InputError):
        make_config(workers=-1)
    with pytest.raises(InputError):
        make_config(caps=Caps(max_points=0))


def test_caps_raise_with_size():
    with pytest.raises(SizeCapExceeded) as err:
        Caps(max_points=3).check_points("space", 4)
    assert (err.value.size, err.value.cap) == (4, 3)


def test_load_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('net = "strict"\nworkers = 1\noutput = "out/r.json"\n\n'
                    '[caps]\nmax_points = 500\n\n[synthesis]\nb1_max_denominator = 32\n',
                    encoding="utf-8")
    config = load_config(path)
    assert config.net == "strict"
    assert config.workers == 1
    assert config.output == Path("out/r.json")
    assert config.caps.max_points == 500
    assert config.caps.exact_net_points == RunConfig().caps.exact_net_points
    assert config.synthesis.b1_max_denominator == 32


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[caps]\nmax_pointz = 5\n", encoding="utf-8")
    with pytest.raises(InputError, match="Unknown key"):
        load_config(path)
    path.write_text("net = ", encoding="utf-8")
    with pytest.raises(InputError):
        load_config(path)
