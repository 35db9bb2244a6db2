import pytest

from gatedsurrogate.config import ExperimentConfig, bounds_of, parse_config, parse_lines
from gatedsurrogate.errors import ConfigError


def test_minimal_config_gets_defaults(tmp_path):
    path = tmp_path / "min.cfg"
    path.write_text("oracle.mode = quadratic\nonline.n_tot = 400\n")
    cfg = parse_config(path, "online")
    assert cfg.online.n_pt == (100,)
    assert cfg.gp.nu == 0.5 and cfg.gp.length_scale == 0.75
    assert cfg.bo.n_init == 20 and cfg.seeds == (0,)
    assert bounds_of(cfg).dim == 12
    assert cfg.warnings == []


def test_npt_not_below_ntot_names_both_fields():
    with pytest.raises(ConfigError) as exc:
        parse_lines(["oracle.mode = quadratic", "online.n_pt = 200", "online.n_tot = 100"], "online")
    msg = " ".join(exc.value.violations)
    assert "online.n_pt" in msg and "online.n_tot" in msg


def test_unknown_key_is_a_warning():
    cfg = parse_lines(["oracle.mode = coupled", "oracle.colour = blue", "frobnicate = 3",
                       "al.init_size = 4"], "offline")
    assert len(cfg.warnings) == 2
    assert any("oracle.colour" in w for w in cfg.warnings)
    assert cfg.al.init_size == 4


def test_missing_block():
    with pytest.raises(ConfigError) as exc:
        parse_lines(["oracle.mode = quadratic"], "online")
    assert any("'online'" in v for v in exc.value.violations)


def test_bound_inversion():
    with pytest.raises(ConfigError) as exc:
        parse_lines(["oracle.dim = 3", "oracle.lows = 0, 2, 0", "oracle.highs = 1, 1, 1"])
    assert any("dimensions [1]" in v for v in exc.value.violations)


def test_all_violations_reported():
    lines = ["oracle.mode = linear", "oracle.lows = 1", "oracle.highs = 0",
             "online.n_pt = 500", "gp.nu = 3.5", "bo.n_init = x"]
    with pytest.raises(ConfigError) as exc:
        parse_lines(lines, "online")
    assert len(exc.value.violations) == 5


def test_comments_lists_and_dotted_grid():
    cfg = parse_lines([
        "# comment", "", "seeds = 3, 4,5", "gp.grid.nu = 1.5, 2.5  # inline",
        "gp.search = false", "online.n_pt = 50,100", "oracle.mode = quadratic",
    ])
    assert cfg.seeds == (3, 4, 5)
    assert cfg.gp.grid_nu == (1.5, 2.5)
    assert cfg.gp.search is False
    assert cfg.online.n_pt == (50, 100)


def test_config_hash_tracks_values():
    a = parse_lines(["oracle.latency = 0"])
    b = parse_lines(["oracle.latency = 0.0", "output_dir = elsewhere"])
    c = parse_lines(["oracle.latency = 0.01"])
    assert a.config_hash() == b.config_hash() != c.config_hash()
    assert ExperimentConfig().config_hash() == a.config_hash()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.cfg")
