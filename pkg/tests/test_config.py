import json
from pathlib import Path

import numpy as np
import pytest

from app.src.errors import ConfigError, ConfigIoError, ConfigParseError, ConfigValidationError
from app.src.scenario_config import apply_overrides, load_config, validate_config

SCENARIOS = Path(__file__).parents[1] / "app" / "scenarios"

MINIMAL = """
name = "tiny"

[operator]
kind = "dirichlet_laplacian_1d"
n = 7

[nonlinearity]
a = 5.0
b = 15.0
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_config_fills_defaults(tmp_path):
    config = load_config(write(tmp_path, "tiny.toml", MINIMAL))
    assert config.name == "tiny"
    assert config.operator.n == 7
    assert config.form.kind == "m_form" and config.form.gamma is None
    assert config.run.nt == 512 and config.run.count_mode == "exact"


def test_json_and_toml_agree(tmp_path):
    data = {"name": "tiny", "operator": {"kind": "dirichlet_laplacian_1d", "n": 7}, "nonlinearity": {"a": 5.0, "b": 15.0}}
    from_json = load_config(write(tmp_path, "tiny.json", json.dumps(data)))
    from_toml = load_config(write(tmp_path, "tiny.toml", MINIMAL))
    assert from_json == from_toml


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigValidationError) as info:
        load_config(write(tmp_path, "bad.toml", MINIMAL + "\n[run]\nbogus = 1\n"))
    assert any(p.startswith("run.bogus:") for p in info.value.problems)


def test_every_invalid_key_is_reported():
    data = {"operator": {"kind": "dirichlet_laplacian_1d", "n": 1}, "run": {"nt": 8}}
    with pytest.raises(ConfigValidationError) as info:
        validate_config(data)
    keys = {p.split(":")[0] for p in info.value.problems}
    assert {"operator.n", "run.nt"} <= keys


def test_slopes_out_of_order(tmp_path):
    text = MINIMAL.replace("a = 5.0", "a = 15.0").replace("b = 15.0", "b = 5.0")
    with pytest.raises(ConfigValidationError) as info:
        load_config(write(tmp_path, "bad.toml", text))
    assert any(p.startswith("nonlinearity") and "a < b" in p for p in info.value.problems)


def test_r_form_needs_gamma():
    data = {"operator": {"kind": "dirichlet_laplacian_1d"}, "form": {"kind": "r_form"}}
    with pytest.raises(ConfigValidationError):
        validate_config(data)


def test_window_must_be_increasing():
    data = {"operator": {"kind": "dirichlet_laplacian_1d"}, "run": {"t_min": 5.0, "t_max": -5.0}}
    with pytest.raises(ConfigValidationError) as info:
        validate_config(data)
    assert "t_min" in str(info.value)


def test_toml_parse_error_has_position(tmp_path):
    with pytest.raises(ConfigParseError) as info:
        load_config(write(tmp_path, "broken.toml", "name = \"x\"\n[operator\nkind = 1\n"))
    assert info.value.line == 2
    assert info.value.column is not None


def test_json_parse_error_has_position(tmp_path):
    with pytest.raises(ConfigParseError) as info:
        load_config(write(tmp_path, "broken.json", '{\n  "name": "x",\n  "operator": \n}'))
    assert info.value.line == 4


def test_unknown_extension(tmp_path):
    with pytest.raises(ConfigIoError):
        load_config(write(tmp_path, "tiny.yaml", MINIMAL))


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_matrix_path_is_resolved_against_config(tmp_path):
    np.savetxt(tmp_path / "A.csv", np.eye(7), delimiter=",")
    text = MINIMAL.replace("a = 5.0", 'kind = "nonlocal"\nmatrix_path = "A.csv"\nweight = 2.0\na = 5.0')
    config = load_config(write(tmp_path, "nonlocal.toml", text))
    assert config.nonlinearity.matrix_path == tmp_path / "A.csv"
    np.testing.assert_allclose(config.nonlocal_matrix(), np.eye(7))
    np.testing.assert_allclose(config.nonlocal_weight(7), np.full(7, 2.0))


def test_missing_matrix_path(tmp_path):
    text = MINIMAL.replace("a = 5.0", 'kind = "nonlocal"\nmatrix_path = "absent.csv"\na = 5.0')
    with pytest.raises(ConfigValidationError) as info:
        load_config(write(tmp_path, "nonlocal.toml", text))
    assert info.value.problems[0].startswith("nonlinearity.matrix_path: file not found")


def test_overrides_replace_run_values(tmp_path):
    config = load_config(write(tmp_path, "tiny.toml", MINIMAL))
    updated = apply_overrides(config, output=tmp_path / "out", seed=7, nt=64, t_min=None)
    assert updated.run.seed == 7 and updated.run.nt == 64
    assert updated.run.t_min == config.run.t_min
    assert updated.output == tmp_path / "out"


def test_overrides_are_validated(tmp_path):
    config = load_config(write(tmp_path, "tiny.toml", MINIMAL))
    with pytest.raises(ConfigValidationError):
        apply_overrides(config, nt=4)


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_scenarios_load(path):
    config = load_config(path)
    assert config.name == path.stem
