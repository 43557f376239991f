import json

import pytest

from radaupinn.config import SCHEMA, coerce, defaults, parse_config, read_config_file
from radaupinn.errors import ConfigError


def test_empty_config_gives_defaults():
    cfg = parse_config()
    assert cfg["h"] == 0.05
    assert cfg["net.depth"] == 5
    assert cfg["net.width"] == 100
    assert cfg["train.iterations"] == 100000
    assert cfg["stages"] == 3
    tc = cfg.train_config()
    assert (tc.width, tc.depth, tc.iterations) == (100, 5, 100000)


@pytest.mark.parametrize("key,raw", [("h", "0"), ("h", "-1"), ("stages", "0"), ("stages", "11"),
                                     ("problem", "lorenz"), ("problem.m", "0"),
                                     ("opt.beta1", "1.0"), ("format", "xml"),
                                     ("study.orders", "2,12"), ("stages", "2.5")])
def test_out_of_range_values_name_the_key(key, raw):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        coerce(key, raw)


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config(overrides={"net.colour": "blue"})


def test_type_mismatch():
    with pytest.raises(ConfigError, match="net.width"):
        parse_config(overrides={"net.width": "wide"})


def test_flag_overrides_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# desk run\nstages = 2\nnet.width = 50  # narrower\n\n")
    cfg = parse_config(path, {"stages": "3"})
    assert cfg["stages"] == 3
    assert cfg["net.width"] == 50


def test_bad_config_line(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("stages 2\n")
    with pytest.raises(ConfigError, match=":1:"):
        parse_config(path)


def test_manifest_round_trip(tmp_path):
    cfg = parse_config(overrides={"stages": "5", "study.seeds": "0,1,2", "train.warm_start": "yes"})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"config": cfg.to_json(), "wall_time_s": 1.0}))
    again = parse_config(path)
    assert again.values == cfg.values
    assert read_config_file(path)["stages"] == 5


def test_tend_before_t0():
    with pytest.raises(ConfigError):
        parse_config(overrides={"t0": "1", "tend": "0"})


def test_every_default_passes_its_own_check():
    for key, value in defaults().items():
        assert coerce(key, value) == value, key
    assert set(defaults()) == set(SCHEMA)


def test_problem_params_and_activation_auto():
    cfg = parse_config(overrides={"problem.m": "2", "problem.lambda": "0.5", "net.activation": "auto"})
    assert cfg.problem_params == {"m": 2.0, "lambda": 0.5}
    assert cfg["net.activation"] is None
