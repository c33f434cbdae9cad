"""Flat key=value configuration files and their validation.

The format is one `dotted.key = value` pair per line; `#` starts a
comment.  Unknown keys are errors.  List values are comma-separated;
the two species share a key with a `|` separator (u-list | v-list), and
2D coordinates use `:` between components.
"""

import os

import numpy as np

from .mesh import Grid, Field, read_field
from .model import (
    BoundarySchedule,
    InitialData,
    ReactionModel,
    bump_field,
    make_segregated_bumps,
)
from .evolve import Problem, StepperConfig, initial_state


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "grid.dimension": "1",
    "grid.lengths": "20.0",
    "grid.counts": "63",
    "reaction.kind": "logistic",
    "boundary.mode": "stationary",
    "boundary.gamma": "1.0",
    "boundary.psi_inf": "0.0",
    "boundary.zeta_inf": "0.0",
    "boundary.rho": "0.0",
    "boundary.rho_zeta": "0.0",
    "init.type": "bumps",
    "init.centers": "5.0,6.25|13.75,15.0",
    "init.radii": "0.35,0.35|0.35,0.35",
    "init.amplitudes": "1.0,1.0|1.0,1.0",
    "init.seed": "0",
    "init.file_u": "",
    "init.file_v": "",
    "time.dt": "0.05",
    "time.horizon": "inf",
    "time.max_steps": "400000",
    "time.threshold": "1e-6",
    "time.window": "10",
    "time.sample_stride": "20",
    "run.kappa": "100.0",
    "sweep.kappas": "1,10,100,1000,10000",
    "steady.tol": "1e-10",
    "output.dir": "out",
    "workers": "1",
}


def parse_config_text(text):
    """Parse flat key=value text into a dict over the known key set."""
    values = dict(_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = val
    return values


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def default_config(**overrides):
    cfg = dict(_DEFAULTS)
    for key, val in overrides.items():
        if key not in _DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        cfg[key] = str(val)
    return cfg


def _floats(s):
    return [float(x) for x in s.split(",") if x.strip() != ""]


def _species_lists(s):
    parts = s.split("|")
    if len(parts) != 2:
        raise ConfigError(f"expected 'u-list|v-list', got {s!r}")
    return parts


def _centers(part, dim):
    out = []
    for item in part.split(","):
        if item.strip() == "":
            continue
        comps = [float(c) for c in item.split(":")]
        if len(comps) != dim:
            raise ConfigError(f"center {item!r} has {len(comps)} components, need {dim}")
        out.append(np.array(comps))
    return out


def build_grid(cfg) -> Grid:
    dim = int(cfg["grid.dimension"])
    lengths = tuple(_floats(cfg["grid.lengths"]))
    counts = tuple(int(x) for x in _floats(cfg["grid.counts"]))
    if len(lengths) != dim or len(counts) != dim:
        raise ConfigError("grid.lengths/counts must match grid.dimension")
    return Grid(lengths, counts)


def build_schedules(cfg, grid):
    mode = cfg["boundary.mode"]
    gamma = float(cfg["boundary.gamma"])
    psi_inf = float(cfg["boundary.psi_inf"])
    zeta_inf = float(cfg["boundary.zeta_inf"])
    if mode == "stationary":
        return (
            BoundarySchedule.stationary(grid, psi_inf),
            BoundarySchedule.stationary(grid, zeta_inf),
        )
    if mode != "decaying":
        raise ConfigError(f"unknown boundary.mode {mode!r}")
    return (
        BoundarySchedule.decaying(grid, psi_inf, float(cfg["boundary.rho"]), gamma),
        BoundarySchedule.decaying(grid, zeta_inf, float(cfg["boundary.rho_zeta"]), gamma),
    )


def build_initial_data(cfg, grid, sched_u, sched_v) -> InitialData:
    kind = cfg["init.type"]
    if kind == "bumps":
        dim = grid.dim
        cu, cv = (_centers(p, dim) for p in _species_lists(cfg["init.centers"]))
        ru, rv = (_floats(p) for p in _species_lists(cfg["init.radii"]))
        au, av = (_floats(p) for p in _species_lists(cfg["init.amplitudes"]))
        init = make_segregated_bumps(grid, cu, ru, cv, rv, au, av)
    elif kind == "random":
        rng = np.random.default_rng(int(cfg["init.seed"]))
        u = grid.embed(rng.uniform(0.0, 1.0, size=int(np.prod(grid.counts))),
                       sched_u.at(0.0))
        v = grid.embed(rng.uniform(0.0, 1.0, size=int(np.prod(grid.counts))),
                       sched_v.at(0.0))
        init = InitialData(Field(grid, u), Field(grid, v), segregated=False)
    elif kind == "file":
        u, _ = read_field(cfg["init.file_u"])
        v, _ = read_field(cfg["init.file_v"])
        if u.grid != grid or v.grid != grid:
            raise ConfigError("snapshot grids do not match the configured grid")
        init = InitialData(u, v, segregated=False)
    else:
        raise ConfigError(f"unknown init.type {kind!r}")
    return init.validate(sched_u, sched_v)


def build_problem(cfg, kappa=None) -> Problem:
    grid = build_grid(cfg)
    sched_u, sched_v = build_schedules(cfg, grid)
    model = ReactionModel(cfg["reaction.kind"])
    k = float(cfg["run.kappa"]) if kappa is None else float(kappa)
    return Problem(grid, k, model, model, sched_u, sched_v)


def build_stepper(cfg, problem=None) -> StepperConfig:
    sc = StepperConfig(
        dt=float(cfg["time.dt"]),
        max_steps=int(float(cfg["time.max_steps"])),
        horizon=float(cfg["time.horizon"]),
        threshold=float(cfg["time.threshold"]),
        window=int(cfg["time.window"]),
        sample_stride=int(cfg["time.sample_stride"]),
    )
    return sc.validate([problem] if problem is not None else [])


def sweep_kappas(cfg):
    kappas = _floats(cfg["sweep.kappas"])
    if not kappas or any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise ConfigError("sweep.kappas must be nonempty and strictly ascending")
    if any(k <= 0 for k in kappas):
        raise ConfigError("sweep.kappas must be positive")
    return kappas


def worker_count(cfg):
    env = os.environ.get("SEGRELAB_WORKERS")
    return int(env) if env else int(cfg["workers"])
