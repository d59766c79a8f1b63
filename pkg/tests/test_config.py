import copy
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from delay_consensus.config import load_config, parse_config, parse_dict, serialize, to_dict
from delay_consensus.errors import SchemaError
from delay_consensus.graph import laplacian

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def base_dict():
    return json.loads((CONFIGS / "reference_example.json").read_text())


def schema_paths(d):
    with pytest.raises(SchemaError) as exc:
        parse_dict(d)
    return [p for p, _ in exc.value.errors]


def test_bundled_reference_config():
    cfg = load_config(CONFIGS / "reference_example.json")
    sys_ = cfg.agent_system()
    assert np.array_equal(sys_.A, [[-2, 2], [-1, 1]])
    assert np.array_equal(sys_.B, [[1], [0]])
    assert np.array_equal(sys_.K, [[-2, -0.5]])
    assert np.array_equal(laplacian(cfg.delay_graph()), [[0, 0, 0], [-1, 2, -1], [0, -1, 1]])
    assert cfg.delays.mu == (0.7, 0.8, 0.9)
    assert [p.value for p in cfg.profiles()] == [0.25, 0.16, 0.16]


def test_corrected_gain_config():
    cfg = load_config(CONFIGS / "corrected_gain.json")
    assert [p.kind for p in cfg.profiles()] == ["sinusoidal"] * 3
    assert cfg.profiles()[2].omega == pytest.approx(2 * 0.9 / 0.1)


def test_empty_edges():
    d = base_dict()
    d["graph"]["edges"] = []
    assert "graph.edges" in schema_paths(d)


def test_mu_one():
    d = base_dict()
    d["delays"]["mu"][1] = 1.0
    assert "delays.mu[1]" in schema_paths(d)


def test_all_errors_collected():
    d = base_dict()
    d["system"]["A"] = [[1, 2, 3], [4, 5, 6]]
    d["graph"]["edges"][0]["weight"] = -1
    d["delays"]["tau_bar"] = [0.1, -0.2, 0.1]
    d["sim"]["h"] = 0
    d["margin"]["mode"] = "sideways"
    paths = schema_paths(d)
    for p in ("system.A", "graph.edges[0].weight", "delays.tau_bar[1]", "sim.h", "margin.mode"):
        assert p in paths


def test_structural_errors():
    d = base_dict()
    del d["system"]
    d["graph"]["edges"].append({"from": 2, "to": 2})
    d["graph"]["edges"].append({"from": 1, "to": 2})
    d["extra"] = 1
    paths = schema_paths(d)
    assert {"system", "graph.edges[3]", "graph.edges[4]", "extra"} <= set(paths)


def test_length_mismatch_and_profile_bound():
    d = base_dict()
    d["delays"]["mu"] = [0.5, 0.5]
    d["delays"]["profiles"][0]["value"] = 0.5
    paths = schema_paths(d)
    assert "delays.mu" in paths and "delays.profiles[0].value" in paths


def test_invalid_json():
    with pytest.raises(SchemaError):
        parse_config("{not json")


@pytest.mark.parametrize("name", ["reference_example.json", "corrected_gain.json"])
def test_round_trip_bundled(name):
    cfg = load_config(CONFIGS / name)
    assert parse_config(serialize(cfg)) == cfg
    assert parse_dict(to_dict(cfg)) == cfg


@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
       st.lists(st.floats(0.0, 0.99), min_size=3, max_size=3),
       st.floats(1e-4, 1e-2), st.floats(0.1, 50), st.sampled_from([-1, 1]),
       st.one_of(st.none(), st.lists(st.floats(-5, 5), min_size=6, max_size=6)))
def test_round_trip_property(tau, mu, h, T, sigma, x0):
    d = base_dict()
    d["delays"] = {"tau_bar": tau, "mu": mu}
    d["sim"] = {"h": h, "T": T} | ({"x0": x0} if x0 is not None else {})
    d["system"]["sigma"] = sigma
    cfg = parse_dict(copy.deepcopy(d))
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)
