import json
import math

import numpy as np
import pytest

from ruelle_shift.config import load_config, parse_config, with_overrides
from ruelle_shift.errors import ConfigInvalid
from ruelle_shift.grid import GridFunction
from ruelle_shift.io import dumps, read_grid, read_json, read_jsonl, write_grid, write_json, write_jsonl
from ruelle_shift.weights import Verdict

BASE = {"weights": {"kind": "constant", "alpha": 2.0}}


def test_shipped_configs_parse_and_build(configs_dir):
    paths = sorted(configs_dir.glob("*.json"))
    assert len(paths) >= 8
    for p in paths:
        cfg = load_config(p)
        m = cfg.build_apriori()
        cfg.build_weights()
        cfg.build_space()
        cfg.build_potential(m)


def test_errors_carry_field_paths():
    with pytest.raises(ConfigInvalid) as exc:
        parse_config({"weights": {"kind": "constant", "alpha": 2.0}, "gibbs": {"particles": 0}})
    assert exc.value.errors[0]["path"] == "gibbs.particles"
    with pytest.raises(ConfigInvalid) as exc:
        parse_config({"weights": {"kind": "constant"}})
    assert exc.value.errors[0]["path"] == "weights"
    with pytest.raises(ConfigInvalid) as exc:
        parse_config(dict(BASE, solver={"grids": 3}))
    assert exc.value.errors[0]["path"] == "solver.grids"
    with pytest.raises(ConfigInvalid):
        parse_config(dict(BASE, contract={"particles": 4096}))


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigInvalid):
        load_config(p)
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.json")


def test_hash_ignores_outputs_only():
    a = parse_config(BASE)
    b = parse_config(dict(BASE, outputs={"dir": "elsewhere"}))
    c = parse_config(dict(BASE, gibbs={"seed": 3}))
    assert a.hash() == b.hash() != c.hash()
    assert len(a.hash()) == 64


def test_overrides():
    cfg = with_overrides(parse_config(BASE), seed=5, particles=100, out="x")
    assert cfg.gibbs.seed == 5 and cfg.gibbs.particles == 100 and cfg.outputs.dir == "x"
    assert cfg.gibbs.iters == 30
    with pytest.raises(ConfigInvalid):
        with_overrides(cfg, particles=-1)


def test_json_round_trip_and_non_finite(tmp_path):
    obj = {"a": math.inf, "b": [1, -math.inf, math.nan], "v": Verdict.HOLDS, "x": np.float64(0.1), "n": np.int64(3)}
    text = dumps(obj)
    assert json.loads(text) == {"a": "inf", "b": [1, "-inf", "nan"], "v": "holds", "x": 0.1, "n": 3}
    p = write_json(tmp_path / "sub" / "r.json", obj)
    assert read_json(p)["a"] == "inf"


def test_jsonl_round_trip_exact(tmp_path):
    X = np.random.default_rng(0).normal(size=(50, 4)) / 3.0
    p = write_jsonl(tmp_path / "p.jsonl", X)
    assert np.array_equal(read_jsonl(p), X)


def test_grid_dump_round_trip(tmp_path):
    g = GridFunction((np.linspace(-1, 1, 3), np.array([0.0, 2.0])), np.arange(6.0).reshape(3, 2))
    binp, side = write_grid(tmp_path / "g.bin", g, {"quantity": "test"})
    back = read_grid(binp)
    assert np.array_equal(back.values, g.values) and all(np.array_equal(a, b) for a, b in zip(back.axes, g.axes))
    meta = read_json(side)
    assert meta["count"] == 1 + 2 + 5 + 6 and meta["meta"]["quantity"] == "test"
    assert binp.stat().st_size == 8 * meta["count"]
    assert read_grid(write_grid(tmp_path / "c.bin", GridFunction.constant(4.0))[0]).values == 4.0


def test_atomic_writes_leave_no_temporaries(tmp_path):
    for i in range(3):
        write_json(tmp_path / "r.json", {"i": i})
    assert [p.name for p in tmp_path.iterdir()] == ["r.json"]
    assert read_json(tmp_path / "r.json") == {"i": 2}
