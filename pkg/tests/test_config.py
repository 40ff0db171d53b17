import json

import pytest

from triobs.config import DEFAULTS, RunConfig, parse_override
from triobs.errors import ConfigError


def test_defaults_resolve():
    cfg = RunConfig.from_sources(3)
    assert cfg.box.lower == (-1.0,) * 3 and cfg.box.upper == (1.0,) * 3
    assert cfg.max_order == 7
    assert cfg.tol("rank_tol") == 1e-8
    assert cfg.seed == 0


def test_document_then_overrides_then_flags():
    doc = {"seed": 3, "orders": {"d_z": 4}}
    cfg = RunConfig.from_sources(3, doc, ["orders.n_t=3", "box.grid=[3,4,5]"], seed=9, out="elsewhere")
    assert cfg.section("orders")["n_t"] == 3 and cfg.section("orders")["d_z"] == 4
    assert cfg.box.grid == (3, 4, 5)
    assert cfg.seed == 9 and cfg.out == "elsewhere"


def test_parse_override_values():
    assert parse_override("a.b=1e-3") == (["a", "b"], 1e-3)
    assert parse_override("x=[1, 2]") == (["x"], [1, 2])
    assert parse_override("name=hello") == (["name"], "hello")
    with pytest.raises(ConfigError):
        parse_override("no_equals_sign")


@pytest.mark.parametrize(
    "doc",
    [
        {"bogus": 1},
        {"tolerances": {"rank_tol": -1}},
        {"tolerances": {"nope": 1}},
        {"orders": {"n_t": 3, "d_z": 3}},
        {"seed": -1},
        {"simulation": {"dt": 0}},
        {"simulation": {"T": 1e-4, "dt": 1e-3}},
        {"observer": {"gain": 0.5}},
        {"box": {"lower": [0, 0]}},
        {"box": {"lower": [1, 1, 1], "upper": [0, 0, 0]}},
        {"box": 5},
    ],
)
def test_invalid_documents(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_sources(3, doc)


def test_unknown_override_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_sources(3, None, ["box.colour=red"])
    with pytest.raises(ConfigError):
        RunConfig.from_sources(3, None, ["box=1"])


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.json", 3)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(bad, 3)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.load(arr, 3)


def test_digest_tracks_content():
    a = RunConfig.from_sources(3).digest()
    assert a == RunConfig.from_sources(3).digest()
    assert a != RunConfig.from_sources(3, {"seed": 1}).digest()
    # spelling out a default gives the same resolved document
    assert a == RunConfig.from_sources(3, {"box": {"lower": [-1, -1, -1]}}).digest()


def test_resolved_is_json_and_complete():
    cfg = RunConfig.from_sources(2)
    doc = json.loads(json.dumps(cfg.resolved()))
    assert set(doc) == set(DEFAULTS)
    assert doc["orders"]["max_order"] == 5


def test_shipped_configs_load():
    from pathlib import Path

    for path in sorted(Path(__file__).parent.parent.joinpath("configs").glob("*.json")):
        RunConfig.load(path, 3)
