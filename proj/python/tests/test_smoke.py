import json
import os
import pathlib

import numpy as np
import pytest

import affdiff

SRC = pathlib.Path(os.environ.get("AFFDIFF_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))

SMALL = {
    "name": "py",
    "topology": {"n_agents": 3, "edges": [[1, 2], [2, 3]]},
    "filter_len": 2,
    "agents": {"sigma_x2": 1.0, "sigma_z2": 0.01},
    "targets": {"stages": [{"start": 0, "w": [0.5, -0.3]}]},
    "components": [{"a2": "identity", "mu": 0.05}, {"a2": "averaging", "mu": 0.05}],
    "combiner": {"scheme": "power_normalized", "nu": 0.01},
    "horizon": 400,
    "runs": 30,
    "seed": 7,
}


def test_preset_stats():
    s = affdiff.build_preset("net3").stats()
    assert s.size == 20
    assert s.diameter >= 1
    a = affdiff.build_preset("net1").rule("metropolis")
    np.testing.assert_allclose(a.sum(axis=0), 1.0, atol=1e-12)


def test_config_roundtrip():
    cfg = affdiff.parse_config(json.dumps(SMALL))
    assert cfg.n_agents == 3 and cfg.filter_len == 2
    assert len(cfg.hash()) == 16
    with pytest.raises(affdiff.ParseError):
        affdiff.parse_config("{ nope")
    with pytest.raises(affdiff.ConfigError):
        affdiff.parse_config(json.dumps(dict(SMALL, horizon=0)))
    assert issubclass(affdiff.ConfigError, affdiff.Error)


def test_simulate_theory_compare(tmp_path):
    cfg = affdiff.parse_config(json.dumps(SMALL))
    sim = affdiff.simulate(cfg)
    assert len(sim) == 400
    np.testing.assert_array_equal(sim["msd"], affdiff.simulate(cfg, workers=3)["msd"])
    th, steady = affdiff.theory(cfg)
    assert len(steady) == 1 and steady[0]["msd"] > 0
    ok, rows = affdiff.compare(sim, th, tol_msd_db=3.0, tol_gamma=0.2)
    assert ok and rows["msd"]["db"]
    out = tmp_path / "sim.json"
    sim.export(out)
    back = affdiff.read_table(out)
    np.testing.assert_allclose(back["msd"], sim["msd"], rtol=1e-9)


def test_bundled_config_loads():
    cfg = affdiff.load_config(SRC / "configs" / "net1_snr1_white_mu0.01_pn.json")
    assert cfg.n_agents == 10 and cfg.horizon == 20000


def test_optimal_gamma():
    assert affdiff.optimal_gamma(2.0, 1.0, 1.0) == pytest.approx(0.0)
    assert affdiff.optimal_gamma(1.0, 1.0, 1.0) is None
