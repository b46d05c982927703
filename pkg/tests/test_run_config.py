from __future__ import annotations

import pytest

from src.errors import ConfigError
from src.run_config import RunConfig, load_config


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_empty_file_gives_defaults(tmp_path):
    assert load_config(write(tmp_path, "")) == RunConfig()


def test_sections_and_flat_keys(tmp_path):
    cfg = load_config(write(tmp_path, "seed = 7\n\n[schedule]\nsigma_factor = 0.2\n\n[placer]\ntarget_density = 1\n"))
    assert cfg.seed == 7
    assert cfg.sigma_factor == 0.2
    assert cfg.schedule_spec().sigma_factor == 0.2
    assert isinstance(cfg.target_density, float) and cfg.target_density == 1.0


def test_pyproject_table(tmp_path):
    path = write(tmp_path, '[project]\nname = "x"\n\n[tool.gsp_placer.refine]\nrefine_iteration = 5\n', "pyproject.toml")
    assert load_config(path).refine_iteration == 5


def test_project_file_without_tool_table(tmp_path):
    path = write(tmp_path, '[project]\nname = "x"\n', "pyproject.toml")
    assert load_config(path) == RunConfig()


def test_filter_effects_must_leave_room_for_high_band(tmp_path):
    with pytest.raises(ConfigError, match="low \\+ mid <= 1"):
        load_config(write(tmp_path, "[init]\nlow_filter_effect = 0.6\nmid_filter_effect = 0.5\n"))


@pytest.mark.parametrize(
    "text, message",
    [
        ("[nonsense]\nseed = 1\n", "unknown config section"),
        ("[init]\nseed = 1\n", "does not belong"),
        ("seeds = 1\n", "unknown config key"),
        ("seed = true\n", "expects int"),
        ("skip_init = 1\n", "expects bool"),
        ("schedule_model = 'cosine'\n", "schedule model"),
        ("seed = [\n", "invalid TOML"),
    ],
)
def test_rejected_files(tmp_path, text, message):
    with pytest.raises(ConfigError, match=message):
        load_config(write(tmp_path, text))


def test_missing_explicit_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_overrides_skip_none_and_coerce():
    cfg = RunConfig().with_overrides({"seed": None, "gamma": 2, "skip_refine": True})
    assert cfg.seed == 0
    assert cfg.gamma == 2.0 and isinstance(cfg.gamma, float)
    assert cfg.hint_config().iterations == 0


def test_skip_schedule_gives_hard_footprints():
    assert RunConfig(skip_schedule=True).schedule_spec() is None
    assert RunConfig().schedule_spec().model == "exp-restoration"


def test_builders_carry_values():
    cfg = RunConfig(num_bins=64, bin_capacity=0.7, GP_wirelength="LSE")
    placer = cfg.placer_config()
    assert placer.num_bins_x == placer.num_bins_y == 64
    assert placer.wirelength == "LSE"
    assert cfg.hint_config().bin_capacity == 0.7
    assert RunConfig().hint_config().bin_capacity == 0.9
    assert RunConfig(refine_hint_gain=4.0).hint_config().hint_gain == 4.0
    assert RunConfig().placer_config().num_bins_x is None


def test_config_hash_tracks_values():
    assert RunConfig().config_hash() == RunConfig().config_hash()
    assert RunConfig().config_hash() != RunConfig(seed=1).config_hash()
