import pytest

from src.config import OUTPUT_DIR_ENV, config_echo, load_config, parse_config
from src.errors import ConfigError
from src.state import Baker, WeightedIFS

MINIMAL = "system = cantor\nk = 1e6\n"


def test_defaults():
    config = parse_config(MINIMAL)
    assert config.system.kind == "cantor"
    assert config.k == 1_000_000
    assert config.n_grid == [1000]
    assert config.ensemble == 30
    assert config.centers == 30
    assert [o.kind for o in config.observables] == ["g1", "g2", "g3"]
    assert config.observables[0].alpha == 4.0
    assert config.effective_burn_in == 1000
    assert config.bootstrap_B == 1000
    assert config.min_block == 1000


def test_comments_and_lists():
    text = (
        "# a comment\n"
        "system = sierpinski\n"
        "k = 100000   # series length\n"
        "n_grid = 500, 100, 200\n"
        "observables = g1, g3\n"
        "alpha = 2\n"
    )
    config = parse_config(text)
    assert config.n_grid == [100, 200, 500]
    assert [o.kind for o in config.observables] == ["g1", "g3"]
    assert all(o.alpha == 2.0 for o in config.observables)
    assert config.effective_burn_in == 1000


def test_fractions_are_exact():
    config = parse_config("system = baker\nsystem.alpha = 1/3\nk = 1e5\n")
    assert isinstance(config.system, Baker)
    assert config.system.alpha == 1.0 / 3.0
    assert config.effective_burn_in == 10_000


def test_grid_error_names_key_and_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\nk = 1000\nn_grid = 100, 600\n")
    assert exc.value.key == "n_grid"
    assert exc.value.line == 3


def test_duplicate_key():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\nk = 1e5\nk = 2e5\n")
    assert exc.value.key == "k"
    assert exc.value.line == 3
    assert "line 2" in str(exc.value)


def test_unknown_key():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\nk = 1e5\nthreads = 4\n")
    assert exc.value.key == "threads"
    assert exc.value.line == 3


def test_unknown_system():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = julia\nk = 1e5\n")
    assert exc.value.key == "system"
    assert exc.value.line == 1


def test_system_parameter_of_another_kind():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = henon\nsystem.w = 0.4\nk = 1e5\n")
    assert exc.value.key == "system.w"
    assert exc.value.line == 2


def test_system_parameter_out_of_range():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = baker\nk = 1e5\nsystem.gamma_a = 0.7\n")
    assert exc.value.key == "system.gamma_a"
    assert exc.value.line == 3


def test_negative_alpha():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\nk = 1e5\nalpha = -1\n")
    assert exc.value.key == "alpha"
    assert exc.value.line == 3


def test_unknown_observable():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\nk = 1e5\nobservables = g1, g4\n")
    assert exc.value.key == "observables"


def test_non_integer_k():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\nk = 1/3\n")
    assert exc.value.key == "k"


def test_missing_required_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\n")
    assert exc.value.key == "k"
    with pytest.raises(ConfigError) as exc:
        parse_config("k = 1e5\n")
    assert exc.value.key == "system"


def test_missing_value():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\nk =\n")
    assert exc.value.key == "k"
    assert exc.value.line == 2


def test_unparsable_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = cantor\n= 5\n")
    assert exc.value.line == 2


def test_weighted_ifs_from_branches():
    config = parse_config("system = weighted_ifs\nsystem.branches = 0:1/3:0.4, 2/3:1/3:0.6\nk = 1e5\n")
    assert isinstance(config.system, WeightedIFS)
    assert [b.weight for b in config.system.branches()] == [0.4, 0.6]
    assert config.system.branches()[1].offset == [2.0 / 3.0]


def test_weighted_ifs_from_weight():
    config = parse_config("system = weighted_ifs\nsystem.w = 0.4\nk = 1e5\n")
    assert config.system == WeightedIFS.cantor(0.4)


def test_weighted_ifs_needs_exactly_one_description():
    with pytest.raises(ConfigError):
        parse_config("system = weighted_ifs\nk = 1e5\n")
    with pytest.raises(ConfigError) as exc:
        parse_config("system = weighted_ifs\nsystem.w = 0.4\nsystem.branches = 0:1/3:1\nk = 1e5\n")
    assert exc.value.key == "system.w"


def test_weights_must_sum_to_one():
    with pytest.raises(ConfigError) as exc:
        parse_config("system = weighted_ifs\nsystem.branches = 0:1/3:0.4, 2/3:1/3:0.4\nk = 1e5\n")
    assert exc.value.key == "system.branches"


def test_overrides_win_over_the_file():
    config = parse_config(MINIMAL + "seed = 5\n", {"seed": "7", "output_dir": "elsewhere"})
    assert config.seed == 7
    assert config.output_dir == "elsewhere"


def test_output_dir_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "run.cfg"
    path.write_text(MINIMAL + "output_dir = from_file\n", encoding="utf-8")
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
    assert load_config(str(path)).output_dir == str(tmp_path / "from_env")
    # explicit overrides still win
    assert load_config(str(path), {"output_dir": "cli"}).output_dir == "cli"


def test_echo_resolves_defaults():
    echo = config_echo(parse_config(MINIMAL))
    assert echo["burn_in"] == 1000
    assert echo["system"]["kind"] == "cantor"
    assert echo["n_grid"] == [1000]
