import dataclasses
import json

import pytest

from heunmon.config import DEFAULT, Config, load_config
from heunmon.errors import InvalidInputError
from heunmon.tuples import IndexTuple, as_tuple


def test_config_round_trip():
    cfg = dataclasses.replace(DEFAULT, ode_rtol=1e-11, base_point=(0.2, 0.3))
    again = Config.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert again.hash() == cfg.hash()
    assert cfg.hash() != DEFAULT.hash()


def test_config_rejects_nonpositive_and_unknown():
    with pytest.raises(ValueError):
        Config(ode_rtol=0.0)
    with pytest.raises(ValueError):
        Config.from_dict({"no_such_key": 1})


def test_config_from_env(tmp_path, monkeypatch):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"count_resolution": 6}))
    monkeypatch.setenv("HEUNMON_CONFIG", str(p))
    assert load_config().count_resolution == 6
    monkeypatch.delenv("HEUNMON_CONFIG")
    assert load_config() == DEFAULT


def test_index_tuple_parsing():
    n = as_tuple("2,1,0,0")
    assert n == IndexTuple(2, 1, 0, 0)
    assert as_tuple((2, 1, 0, 0)) is not None
    assert n.N == 3 and n.weight == 4
    assert n.coef == (6.0, 2.0, 0.0, 0.0)
    assert str(n) == "2,1,0,0"


@pytest.mark.parametrize("bad", ["1,0,0", "a,b,c,d", (0, 0, 0, 0), (-1, 1, 0, 0), (1.5, 0, 0, 0)])
def test_index_tuple_rejects(bad):
    with pytest.raises(InvalidInputError):
        as_tuple(bad)
