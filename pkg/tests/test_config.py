import json
import math

import pytest

from hagerlab.config import ExperimentConfig, config_from_dict, load_config, parse_delta
from hagerlab.errors import ConfigError
from hagerlab.symbol import exp_minus_ix


def test_delta_forms():
    assert parse_delta("exp(-1/h)", 0.05) == math.exp(-20)
    assert parse_delta("exp(-0.5/h)", 0.05) == math.exp(-10)
    assert parse_delta(2e-12, 0.002) == 2e-12
    assert parse_delta("2e-12", 0.002) == 2e-12
    for bad in ("exp(h)", "abc", -1.0, True, [1]):
        with pytest.raises(ConfigError):
            parse_delta(bad, 0.05)


def test_defaults():
    cfg = config_from_dict({})
    assert cfg.symbol == exp_minus_ix()
    assert (cfg.h, cfg.N, cfg.trials) == (0.05, 800, 100)
    assert cfg.delta == math.exp(-20)
    assert cfg.params.epsilon0 == pytest.approx(0.92511, abs=1e-5)


def test_epsilon0_instead_of_delta():
    cfg = config_from_dict({"h": 0.05, "epsilon0": 1.0})
    assert cfg.delta == pytest.approx(math.sqrt(0.05) * math.exp(-20), rel=1e-12)


def test_exactly_one_coupling():
    with pytest.raises(ConfigError) as info:
        config_from_dict({"delta": 1e-9, "epsilon0": 1.0})
    assert info.value.field == "delta"


def test_override_replaces_the_other_coupling_form():
    cfg = config_from_dict({"epsilon0": 1.0}, {"delta": "exp(-1/h)"})
    assert cfg.delta == math.exp(-20)


def test_overrides_win():
    cfg = config_from_dict({"N": 100, "seed": 3}, {"N": 50, "seed": None})
    assert cfg.N == 50 and cfg.seed == 3


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"trials": 0}, "trials"),
        ({"bins": 1}, "bins"),
        ({"h": -1}, "h"),
        ({"N": 1.5}, "N"),
        ({"box": [0, 1, -2, 0]}, "box"),
        ({"box": [0, 1]}, "box"),
        ({"symbol": [[1, 0.5, 0], [-1, 0.5, 0]]}, "symbol"),
        ({"epsilon0": 3.0}, "epsilon0"),
        ({"colour": 1}, "colour"),
    ],
)
def test_invalid_fields(doc, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(doc)
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "h": 0.05,\n  "N": ,\n}\n', encoding="utf-8")
    with pytest.raises(ConfigError, match=r"bad.json:3:"):
        load_config(p)


def test_load_round_trip(tmp_path):
    cfg = ExperimentConfig(N=30, trials=2, seed=5)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()), encoding="utf-8")
    assert load_config(p) == cfg
