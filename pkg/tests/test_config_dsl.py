"""
test_config_dsl.py

Purpose:
    Tests the configuration language: defaults, typed values, error collection with line
    numbers, cross-key consistency rules, sweep detection and the canonical echo.
"""

import pytest

from core.exceptions import ConfigError
from core.model import ParamPoint
from core.thermo import IdealGas, TabulatedGas, ideal_gas, write_table
from dsl.config_dsl import RunConfig, SweepConfig, canonical_text, load_config, parse_config

RUN_TEXT = """
# sample run
grid.dim = 2
grid.n = 16
params.eps = 0.25
params.kappa = 0.5     # heat conduction on
init.generator = well-prepared
integrator.t_end = 0.2
integrator.frozen = theta
"""


def test_defaults_fill_missing_keys():
    config = parse_config("")
    assert isinstance(config, RunConfig)
    assert config.grid.dim == 1 and config.grid.n_per_dim == 64
    assert config.params == ParamPoint(1.0)
    assert config.integrator.t_end == 0.1
    assert config.integrator.fixed_dt is None
    assert config.s == 2
    assert config.source.mode == "none"
    assert isinstance(config.build_gas(), IdealGas)


def test_run_config_values():
    config = parse_config(RUN_TEXT)
    assert config.grid.shape == (16, 16)
    assert config.params == ParamPoint(0.25, 0.0, 0.5)
    assert config.init.generator == "well-prepared"
    assert config.integrator.frozen == ("theta",)
    assert config.values["params.kappa"] == 0.5


def test_all_errors_are_collected():
    text = "grid.n = abc\nfoo.bar = 1\nparams.eps = 0.5\nparams.eps = 0.4\nnot a line\ninit.generator = vortex\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    errors = info.value.errors
    assert "line 1: grid.n expects int (got 'abc')" in errors
    assert "line 2: unknown key 'foo.bar'" in errors
    assert "line 4: duplicate key 'params.eps'" in errors
    assert any(e.startswith("line 5: expected") for e in errors)
    assert any(e.startswith("init.generator must be one of") for e in errors)
    assert len(errors) == 5


def test_range_errors_from_engine_objects():
    with pytest.raises(ConfigError) as info:
        parse_config("params.eps = 1.5\nparams.mu = -1\ngrid.n = 7\n")
    errors = info.value.errors
    assert "eps must be in (0,1]" in errors
    assert "mu must be in [0,1]" in errors
    assert "grid.n must be even and >= 8 (got 7)" in errors


def test_combustion_rules():
    with pytest.raises(ConfigError) as info:
        parse_config("run.formulation = combustion\nparams.mu = 0.5\nparams.kappa = 0.5\nparams.lambda = 0.5\n")
    errors = info.value.errors
    assert "combustion formulation needs init.species >= 1" in errors
    assert any(e.startswith("combustion requires lambda >= sqrt(mu+kappa)") for e in errors)
    ok = parse_config("run.formulation = combustion\ninit.species = 1\nparams.lambda = 1\n"
                      "source.mode = linear\nsource.a1 = 0.1\n")
    assert ok.source.mode == "state"


def test_source_and_formulation_consistency():
    with pytest.raises(ConfigError) as info:
        parse_config("run.formulation = symmetrized\nsource.mode = prescribed\nsource.amplitude = 0.1\n")
    assert "symmetrized formulation requires source.mode = none" in info.value.errors
    with pytest.raises(ConfigError) as info:
        parse_config("source.mode = linear\n")
    assert "source.mode = linear needs run.formulation = combustion" in info.value.errors


def test_transport_positivity_checked():
    with pytest.raises(ConfigError) as info:
        parse_config("transport.k = -1\n")
    assert "transport.k must be > 0" in info.value.errors


def test_sweep_detection_and_points():
    config = parse_config("sweep.eps = 1, 0.5, 0.25\nsweep.kappa = 0, 1\nparams.mu = 0.1\nsweep.workers = 2\n")
    assert isinstance(config, SweepConfig)
    points = config.points()
    assert len(points) == 6
    assert points[0] == ParamPoint(0.25, 0.1, 0.0)
    assert points[-1] == ParamPoint(1.0, 0.1, 1.0)
    assert config.workers == 2
    assert config.with_workers(3).workers == 3


def test_sweep_axis_ranges():
    with pytest.raises(ConfigError) as info:
        parse_config("sweep.eps = 0, 0.5\nsweep.lambda = 3\n")
    errors = info.value.errors
    assert "sweep.eps values must be in (0,1] (got 0.0)" in errors
    assert "sweep.lambda values must be in [0,2] (got 3.0)" in errors


def test_sweep_keeps_inadmissible_combustion_points():
    config = parse_config("run.formulation = combustion\ninit.species = 1\nsweep.lambda = 0, 1\nsweep.mu = 0.5\n")
    admissible = [p.combustion_admissible for p in config.points()]
    assert admissible == [False, True]


def test_canonical_echo_reparses_to_equal_config():
    sweep_text = "grid.dim = 2\nsweep.eps = 1, 0.5\nsource.mode = prescribed\nsource.wavevector = 1, 2\n"
    for text in (RUN_TEXT, sweep_text):
        config = parse_config(text)
        echo = canonical_text(config)
        assert parse_config(echo) == config
        assert canonical_text(parse_config(echo)) == echo
    lines = canonical_text(parse_config(RUN_TEXT)).splitlines()
    assert lines == sorted(lines)
    assert "params.eps = 0.25" in lines


def test_with_seed_and_params():
    config = parse_config(RUN_TEXT).with_seed(7).with_params(ParamPoint(0.5))
    assert config.init.seed == 7
    assert config.values["init.seed"] == 7
    assert config.params.eps == 0.5
    assert "params.eps = 0.5" in canonical_text(config)


def test_table_path_resolved_against_config_dir(tmp_path):
    grid = [0.5, 0.75, 1.0, 1.5, 2.0]
    (tmp_path / "gas.tbl").write_text(write_table(ideal_gas(), grid, grid))
    cfg = tmp_path / "run.cfg"
    cfg.write_text("gas.model = table\ngas.table = gas.tbl\n")
    config = load_config(cfg)
    assert config.gas.table == str((tmp_path / "gas.tbl").resolve())
    assert isinstance(config.build_gas(), TabulatedGas)


def test_missing_table_and_unreadable_config(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config("gas.model = table\ngas.table = nope.tbl\n", base_dir=tmp_path)
    assert any(e.startswith("gas.table file not found") for e in info.value.errors)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_line_errors_do_not_hide_cross_key_errors():
    with pytest.raises(ConfigError) as info:
        parse_config("bogus.key = 1\nrun.formulation = symmetrized\nsource.mode = linear\n")
    assert info.value.errors == [
        "line 1: unknown key 'bogus.key'",
        "symmetrized formulation requires source.mode = none",
        "source.mode = linear needs run.formulation = combustion",
    ]
