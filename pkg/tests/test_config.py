"""Flat key=value configuration parsing and builders."""

import numpy as np
import pytest

from segrelab.config import (
    ConfigError,
    build_grid,
    build_initial_data,
    build_problem,
    build_schedules,
    build_stepper,
    default_config,
    load_config,
    parse_config_text,
    sweep_kappas,
    worker_count,
)
from segrelab.mesh import Field, Grid, write_field


def test_parse_defaults_and_overrides():
    cfg = parse_config_text("# comment only\n\ntime.dt = 0.01  # trailing\n")
    assert cfg["time.dt"] == "0.01"
    assert cfg["reaction.kind"] == "logistic"
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign here")
    with pytest.raises(ConfigError):
        parse_config_text("made.up.key = 1")
    with pytest.raises(ConfigError):
        default_config(bogus=1)


def test_load_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("run.kappa = 42\ngrid.counts = 31\n")
    cfg = load_config(p)
    assert cfg["run.kappa"] == "42"
    assert build_grid(cfg).counts == (31,)


def test_build_grid_dimension_mismatch():
    with pytest.raises(ConfigError):
        build_grid(default_config(**{"grid.dimension": "2"}))
    cfg = default_config(**{"grid.dimension": "2", "grid.lengths": "1.0,2.0",
                            "grid.counts": "7,9"})
    g = build_grid(cfg)
    assert g == Grid.box(7, 9, 1.0, 2.0)


def test_build_schedules_modes():
    cfg = default_config(**{"boundary.mode": "decaying", "boundary.psi_inf": "0.2",
                            "boundary.rho": "0.1", "boundary.gamma": "2.0"})
    g = build_grid(cfg)
    su, sv = build_schedules(cfg, g)
    assert su.mode == "decaying" and su.decay_rate == 2.0
    assert sv.mode == "decaying"
    with pytest.raises(ConfigError):
        build_schedules(default_config(**{"boundary.mode": "wavy"}), g)


def test_initial_data_bumps_and_random():
    cfg = default_config()
    g = build_grid(cfg)
    su, sv = build_schedules(cfg, g)
    init = build_initial_data(cfg, g, su, sv)
    assert init.segregated
    assert np.all(init.u0.values * init.v0.values == 0.0)
    rnd = default_config(**{"init.type": "random", "init.seed": "4"})
    init = build_initial_data(rnd, g, su, sv)
    assert 0.0 <= init.u0.values.min() and init.u0.values.max() <= 1.0
    with pytest.raises(ConfigError):
        build_initial_data(default_config(**{"init.type": "magic"}), g, su, sv)


def test_initial_data_2d_centers():
    cfg = default_config(**{
        "grid.dimension": "2", "grid.lengths": "10.0,10.0",
        "grid.counts": "31,31",
        "init.centers": "3.0:3.0|7.0:7.0",
        "init.radii": "1.0|1.0", "init.amplitudes": "0.9|0.9",
    })
    g = build_grid(cfg)
    su, sv = build_schedules(cfg, g)
    init = build_initial_data(cfg, g, su, sv)
    assert init.segregated
    bad = dict(cfg)
    bad["init.centers"] = "3.0|7.0:7.0"
    with pytest.raises(ConfigError):
        build_initial_data(bad, g, su, sv)


def test_initial_data_from_files(tmp_path):
    cfg = default_config(**{"grid.counts": "31"})
    g = build_grid(cfg)
    su, sv = build_schedules(cfg, g)
    u = Field(g, g.embed(np.full(31, 0.25)))
    write_field(tmp_path / "u.snap", u)
    write_field(tmp_path / "v.snap", Field.zeros(g))
    file_cfg = default_config(**{
        "grid.counts": "31", "init.type": "file",
        "init.file_u": str(tmp_path / "u.snap"),
        "init.file_v": str(tmp_path / "v.snap"),
    })
    init = build_initial_data(file_cfg, g, su, sv)
    assert np.array_equal(init.u0.values, u.values)
    wrong = dict(file_cfg)
    wrong["grid.counts"] = "15"
    g15 = build_grid(wrong)
    with pytest.raises(ConfigError):
        build_initial_data(wrong, g15, su, sv)


def test_build_problem_and_stepper():
    cfg = default_config(**{"run.kappa": "7.5", "time.dt": "0.02"})
    prob = build_problem(cfg)
    assert prob.kappa == 7.5
    assert build_problem(cfg, kappa=3.0).kappa == 3.0
    sc = build_stepper(cfg, prob)
    assert sc.dt == 0.02 and sc.sample_stride == 20
    with pytest.raises(ValueError):
        build_stepper(default_config(**{"time.dt": "2.0"}), prob)


def test_sweep_kappas_validation():
    assert sweep_kappas(default_config()) == [1.0, 10.0, 100.0, 1000.0, 10000.0]
    with pytest.raises(ConfigError):
        sweep_kappas(default_config(**{"sweep.kappas": "10,1"}))
    with pytest.raises(ConfigError):
        sweep_kappas(default_config(**{"sweep.kappas": "-1,1,10"}))


def test_worker_count_env_override(monkeypatch):
    cfg = default_config(workers=3)
    monkeypatch.delenv("SEGRELAB_WORKERS", raising=False)
    assert worker_count(cfg) == 3
    monkeypatch.setenv("SEGRELAB_WORKERS", "6")
    assert worker_count(cfg) == 6
