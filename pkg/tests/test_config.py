import pytest

from dynlr.config import PRESETS, ExperimentConfig, parse_config_text
from dynlr.errors import ConfigError

SAMPLE = """
# comment line
[phantom]
kind = shepp
side = 48
steps = 12

[noise]
level = 0.02
seed = 99

[schedule]
angles_per_step = 3
stationary = false

[method]
name = bcx
K = 2
alpha = 5
tau = 1.5

[output]
dir = somewhere
"""


def test_parse_and_defaults():
    cfg = ExperimentConfig.from_text(SAMPLE)
    assert cfg.phantom["side"] == 48
    assert cfg.noise["level"] == 0.02
    assert cfg.schedule["angles_per_step"] == [3]
    assert cfg.schedule["increment"] == 32.039  # default preserved
    assert cfg.method["alpha"] == 5.0
    assert cfg.output["dir"] == "somewhere"


def test_echo_round_trips():
    cfg = ExperimentConfig.from_text(SAMPLE)
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again.phantom == cfg.phantom
    assert again.method == cfg.method
    assert again.schedule == cfg.schedule


def test_angle_sweep_list():
    cfg = ExperimentConfig.from_text(
        "[schedule]\nangles_per_step = 2,6,12\n[method]\nname = bcx\nalpha = 1\n")
    assert cfg.schedule["angles_per_step"] == [2, 6, 12]


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[nope]\nx = 1\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("[phantom]\nwhat = 1\n")


def test_key_outside_section_rejected():
    with pytest.raises(ConfigError, match="outside"):
        parse_config_text("kind = shepp\n")


def test_bad_value_rejected():
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config_text("[phantom]\nside = lots\n")


def test_unknown_method_rejected():
    with pytest.raises(ConfigError, match="unknown method"):
        ExperimentConfig.from_text("[method]\nname = magic\n")


def test_sbc_requires_stationary():
    with pytest.raises(ConfigError, match="stationary"):
        ExperimentConfig.from_text("[method]\nname = sbc\nmu_C = 0.1\n")


def test_unknown_preset_listed():
    with pytest.raises(ConfigError, match="available"):
        ExperimentConfig.from_preset("shepp-nonsense")


def test_all_presets_valid():
    for name in PRESETS:
        ExperimentConfig.from_preset(name)


def test_full_scale_preset_values():
    bcx = ExperimentConfig.from_preset("shepp-1pct-bcx").method
    assert (bcx["alpha"], bcx["mu_C"], bcx["tau"]) == (70.0, 0.1, 6.0)
    bc = ExperimentConfig.from_preset("shepp-1pct-bc").method
    assert (bc["mu_C"], bc["tau"]) == (0.1, 10.0)
    gtv = ExperimentConfig.from_preset("shepp-1pct-gradtv").method
    assert (gtv["rho_grad"], gtv["rho_thr"], gtv["rho_tv"],
            gtv["mu_c_tilde"]) == (1e-3, 7e-4, 1e-2, 0.1)
    ves = ExperimentConfig.from_preset("vessel-1pct-bcx").method
    assert (ves["alpha"], ves["mu_C"], ves["tau"]) == (3e2, 1.0, 90.0)
    assert ves["max_iter"] == 1400
    assert ExperimentConfig.from_preset("shepp-1pct-bcx").method["max_iter"] == 1200
