import csv
import json
import math

import pytest

from uavlos.cli import (
    DEFAULT_VALUES,
    PRESETS,
    RUNNERS,
    SWEEPS,
    ConfigError,
    ExperimentConfig,
    config_hash,
    main,
)
from uavlos.env import UrbanGrid


def _cfg(**extra) -> dict:
    base = {"sweep": "velocity", "trials": 5}
    base.update(extra)
    return base


def test_presets_are_frozen():
    assert PRESETS == {
        "suburban": (10.0, 37.0, 10.0),
        "urban": (19.0, 45.0, 13.0),
        "dense_urban": (25.0, 60.0, 20.0),
    }
    assert set(RUNNERS) == set(SWEEPS) == set(DEFAULT_VALUES)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict(_cfg(nonsense=1))


def test_config_requires_sweep():
    with pytest.raises(ConfigError, match="sweep"):
        ExperimentConfig.from_dict({"preset": "urban"})
    with pytest.raises(ConfigError, match="sweep must be one of"):
        ExperimentConfig.from_dict({"sweep": "bogus"})


def test_config_rejects_unknown_preset():
    with pytest.raises(ConfigError, match="preset"):
        ExperimentConfig.from_dict(_cfg(preset="rural"))


def test_config_custom_needs_means():
    with pytest.raises(ConfigError, match="mu_b and mu_s"):
        ExperimentConfig.from_dict(_cfg(preset="custom"))
    cfg = ExperimentConfig.from_dict(_cfg(preset="custom", mu_b=50.0, mu_s=15.0))
    assert cfg.grid_params().mu_b == 50.0


def test_config_height_sweep_needs_reachable_distance():
    with pytest.raises(ConfigError, match="initial_distance"):
        ExperimentConfig.from_dict({"sweep": "uav_height"})
    with pytest.raises(ConfigError, match="incompatible"):
        ExperimentConfig.from_dict(
            {"sweep": "uav_height", "initial_distance": 100.0, "values": [60.0, 99.0]}
        )


def test_config_values_default_and_order():
    cfg = ExperimentConfig.from_dict({"sweep": "velocity"})
    assert cfg.values == DEFAULT_VALUES["velocity"]
    with pytest.raises(ConfigError, match="increasing"):
        ExperimentConfig.from_dict(_cfg(values=[3.0, 2.0]))


def test_config_null_link_range_means_unlimited():
    cfg = ExperimentConfig.from_dict(_cfg(link_range=None))
    assert cfg.link_range == math.inf
    assert config_hash(cfg)  # resolvable to JSON despite the infinity


def test_config_hash_tracks_content():
    a = config_hash(ExperimentConfig.from_dict(_cfg(seed=1)))
    b = config_hash(ExperimentConfig.from_dict(_cfg(seed=1)))
    c = config_hash(ExperimentConfig.from_dict(_cfg(seed=2)))
    assert a == b != c
    assert len(a) == 16


def _run(tmp_path, cfg_dict, *extra):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg_dict))
    out = tmp_path / "out.csv"
    rc = main(["run", "--config", str(cfg_path), "--out", str(out), *extra])
    return rc, out


def test_run_velocity_sweep_csv(tmp_path):
    cfg = _cfg(values=[5.0, 15.0], seed=3, uav_dy=45.0, uav_height=100.0)
    rc, out = _run(tmp_path, cfg)
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# uavlos-results-v1 config=")
    rows = list(csv.DictReader(lines[1:]))
    assert [r["value"] for r in rows] == ["5", "15"]
    for r in rows:
        assert r["sweep"] == "velocity"
        assert r["trials"] == "5"
        assert 0.0 <= float(r["analytic_s"]) <= 10.0
        assert 0.0 <= float(r["mc_mean_s"]) <= 10.0
        assert r["runtime_ms"] == ""


def test_run_is_byte_identical(tmp_path):
    cfg = _cfg(values=[10.0], seed=3)
    _, first = _run(tmp_path, cfg)
    text1 = first.read_bytes()
    _, second = _run(tmp_path, cfg)
    assert second.read_bytes() == text1


def test_run_timing_flag_fills_runtime(tmp_path):
    cfg = _cfg(values=[10.0], seed=3)
    rc, out = _run(tmp_path, cfg, "--timing")
    assert rc == 0
    rows = list(csv.DictReader(out.read_text().splitlines()[1:]))
    assert float(rows[0]["runtime_ms"]) > 0.0


def test_run_trials_and_seed_overrides(tmp_path):
    cfg = _cfg(values=[10.0], seed=3, trials=5)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "o.csv"
    rc = main(["run", "--config", str(cfg_path), "--out", str(out),
               "--trials", "9", "--seed", "4"])
    assert rc == 0
    rows = list(csv.DictReader(out.read_text().splitlines()[1:]))
    assert rows[0]["trials"] == "9"


def test_run_ratio_sweep_has_width_variants(tmp_path):
    cfg = {
        "sweep": "building_ratio", "values": [1.0, 3.0], "trials": 4, "seed": 2,
        "street_widths": [10.0, 20.0],
    }
    rc, out = _run(tmp_path, cfg)
    assert rc == 0
    rows = list(csv.DictReader(out.read_text().splitlines()[1:]))
    assert [(r["variant"], r["value"]) for r in rows] == [
        ("w=10", "1"), ("w=10", "3"), ("w=20", "1"), ("w=20", "3"),
    ]


def test_run_association_sweep_variants(tmp_path):
    cfg = {
        "sweep": "association", "values": [2.0, 20.0], "trials": 6, "seed": 31,
        "uav_dy": 45.0, "uav_height": 100.0, "link_range": 130.0,
    }
    rc, out = _run(tmp_path, cfg)
    assert rc == 0
    rows = list(csv.DictReader(out.read_text().splitlines()[1:]))
    assert [r["variant"] for r in rows] == ["proposed", "benchmark", "difference"] * 2
    for r in rows:
        if r["variant"] == "proposed":
            assert r["analytic_s"] != ""
        else:
            assert r["analytic_s"] == ""


def test_run_config_errors_exit_two(tmp_path):
    rc = main(["run", "--config", str(tmp_path / "missing.json")])
    assert rc == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    bogus = tmp_path / "bogus.json"
    bogus.write_text(json.dumps({"sweep": "nope"}))
    assert main(["run", "--config", str(bogus)]) == 2


def test_run_unwritable_output_exits_two(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(_cfg(values=[10.0])))
    rc = main(["run", "--config", str(cfg_path),
               "--out", str(tmp_path / "no" / "such" / "dir.csv")])
    assert rc == 2


def test_grid_dump_round_trips(tmp_path):
    out = tmp_path / "grid.json"
    rc = main(["grid", "dump", "--preset", "urban", "--seed", "3",
               "--out", str(out)])
    assert rc == 0
    g = UrbanGrid.from_json(out.read_text())
    assert g.seed == 3
    assert g.params.mu_b == 45.0 and g.params.mu_s == 13.0


def test_grid_dump_anchored(tmp_path):
    out = tmp_path / "grid.json"
    rc = main(["grid", "dump", "--preset", "urban", "--seed", "1",
               "--anchor-y", "0", "--street-width", "13", "--out", str(out)])
    assert rc == 0
    g = UrbanGrid.from_json(out.read_text())
    assert g.band_at("y", 6.0) == ("street", g.band_at("y", 6.0)[1], 0.0, 13.0)


def test_validate_quadrature_passes(capsys):
    assert main(["validate", "quadrature"]) == 0
    out = capsys.readouterr().out
    assert "PASS quadrature/segment-closed-form" in out
