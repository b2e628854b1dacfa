import math
import os

import pytest
import yaml
from unittest.mock import patch

from utils.errors import ConfigError
from utils.reports import dump_yaml, format_float, load_yaml, write_atomic
from utils.settings import load_settings


def test_defaults_file_values():
    s = load_settings()
    assert s.optimizer.restarts == 64 or "CURVLAB_RESTARTS" in os.environ
    assert s.tolerances.strictness == 1e-8
    assert s.integrator.h_min == 1e-12
    assert s.experiments.pinching_target == 0.99


def test_overrides_take_precedence():
    with patch.dict(os.environ, {"CURVLAB_RESTARTS": "16"}):
        assert load_settings().optimizer.restarts == 16
        assert load_settings(restarts=4).optimizer.restarts == 4


def test_env_threads_and_rel_tol():
    with patch.dict(os.environ, {"CURVLAB_THREADS": "3", "CURVLAB_REL_TOL": "1e-6"}):
        s = load_settings()
    assert s.threads == 3
    assert s.integrator.rel_tol == 1e-6


def test_bad_env_value():
    with patch.dict(os.environ, {"CURVLAB_THREADS": "many"}):
        with pytest.raises(ConfigError):
            load_settings()


def test_unknown_override():
    with pytest.raises(ConfigError):
        load_settings(colour="blue")


def test_unknown_section_key(tmp_path):
    path = tmp_path / "defaults.yaml"
    path.write_text(yaml.safe_dump({"optimizer": {"restart": 3}}))
    with pytest.raises(ConfigError):
        load_settings(str(path))


def test_partial_file_keeps_builtin_defaults(tmp_path):
    path = tmp_path / "defaults.yaml"
    path.write_text(yaml.safe_dump({"optimizer": {"restarts": 5}}))
    s = load_settings(str(path))
    assert s.optimizer.restarts == 5
    assert s.integrator.method == "rk45"


def test_settings_are_echoable():
    data = load_settings(restarts=2).to_dict()
    assert data["optimizer"]["restarts"] == 2
    assert load_yaml(dump_yaml(data)) == data


@pytest.mark.parametrize("value, text", [
    (1.0, "1.0"),
    (0.1, "0.10000000000000001"),
    (1e-12, "9.9999999999999998e-13"),
    (float("inf"), ".inf"),
])
def test_format_float(value, text):
    assert format_float(value) == text


def test_float_round_trip():
    values = [0.1, 1.0 / 3.0, 2.5e-300, -7.0, float("nan")]
    back = load_yaml(dump_yaml({"v": values}))["v"]
    assert back[:4] == values[:4]
    assert math.isnan(back[4])


def test_dump_keeps_key_order():
    text = dump_yaml({"b": 1, "a": 2})
    assert text.index("b:") < text.index("a:")


def test_write_atomic_leaves_no_temporaries(tmp_path):
    path = tmp_path / "out" / "report.yaml"
    write_atomic(str(path), "x: 1\n")
    assert path.read_text() == "x: 1\n"
    assert [p.name for p in path.parent.iterdir()] == ["report.yaml"]
