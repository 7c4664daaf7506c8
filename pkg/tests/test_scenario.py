from pathlib import Path

import numpy as np
import pytest

from ppfsync.ppf import Variant
from ppfsync.scenario import ConfigError, load_config, load_text, preset_names, preset_path

BROKEN = Path(__file__).parent / "fixtures" / "broken"

EXPECTED_FIELD = {
    "01_toml_syntax": "<toml>",
    "02_unknown_section": "gainz",
    "03_unknown_key": "gains.kk",
    "04_missing_gain_c": "gains.c",
    "05_negative_step": "scenario.step",
    "06_delta_order": "transform.delta_bar",
    "07_outside_funnel": "initial.states",
    "08_self_edge": "graph.edges[4]",
    "09_unknown_plant": "scenario.plant",
    "10_funnel_order": "funnel.rho0",
    "11_unpinned": "graph",
    "12_state_count": "initial.states",
}


def test_presets_listed():
    assert {"example1", "example1_constant", "example2", "linear_demo"} <= set(preset_names())
    assert preset_path("example1").name == "example1.toml"
    assert preset_path("nope") is None


@pytest.mark.parametrize("name", ["example1", "example1_constant", "example2", "linear_demo"])
def test_presets_load(name):
    cfg = load_config(name)
    assert cfg.name == name
    assert cfg.initial_states.shape == (5, cfg.node_dim)


def test_example1_parameters():
    cfg = load_config("example1")
    assert (cfg.c, cfg.k, cfg.xi, cfg.step, cfg.horizon) == (100.0, 0.8, 20.0, 1e-3, 10.0)
    np.testing.assert_array_equal(cfg.pi, 150.0)
    np.testing.assert_array_equal(cfg.rho0, 7.0)
    np.testing.assert_array_equal(cfg.rho_inf, 0.05)
    np.testing.assert_array_equal(cfg.delta_under, 1.0)
    np.testing.assert_array_equal(cfg.initial_states[:, 0], [-2.5743, -0.9814, 1.2596, 1.1472, 2.5196])
    np.testing.assert_array_equal(cfg.graph.pinning, [0, 0, 1, 0, 0])
    assert cfg.neurons == 3 and cfg.variant is Variant.ERF
    assert cfg.effective_hold == cfg.step


def test_example2_parameters():
    cfg = load_config("example2")
    assert cfg.node_dim == 3 and cfg.neurons == 6 and cfg.xi == 50.0
    np.testing.assert_array_equal(cfg.leader.x0_initial, [1.5, 2.7, 3.5])
    assert cfg.basis().centers.shape == (6, 3)


def test_overrides_revalidate():
    cfg = load_config("example1")
    assert cfg.with_overrides(variant="sign").variant is Variant.SIGN
    assert cfg.with_overrides(seed=None) == cfg
    with pytest.raises(ConfigError, match="scenario.step"):
        cfg.with_overrides(step=-1.0)
    with pytest.raises(ConfigError, match="scenario.horizon"):
        cfg.with_overrides(horizon=1e-4)


@pytest.mark.parametrize("name", sorted(EXPECTED_FIELD))
def test_broken_fixture_rejected(name):
    with pytest.raises(ConfigError) as info:
        load_config(BROKEN / f"{name}.toml")
    assert info.value.field == EXPECTED_FIELD[name]


def test_fixture_set_complete():
    assert len(list(BROKEN.glob("*.toml"))) == len(EXPECTED_FIELD) >= 10


def test_toml_error_reports_line():
    with pytest.raises(ConfigError, match="line 39"):
        load_config(BROKEN / "01_toml_syntax.toml")


def test_per_channel_shapes():
    text = preset_path("example2").read_text().replace("rho0 = 7.0", "rho0 = [7.0, 6.0, 7.0, 7.0, 7.0]")
    cfg = load_text(text)
    assert cfg.rho0.shape == (5, 3)
    np.testing.assert_array_equal(cfg.rho0[1], 6.0)
    bad = preset_path("example2").read_text().replace("rho0 = 7.0", "rho0 = [7.0, 6.0]")
    with pytest.raises(ConfigError, match="funnel.rho0"):
        load_text(bad)


def test_missing_file():
    with pytest.raises(ConfigError, match="no such file"):
        load_config("/nonexistent/file.toml")
