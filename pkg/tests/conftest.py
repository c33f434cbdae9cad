"""Shared fixtures: the default kappa sweep backs several acceptance checks."""

import pytest

from segrelab.config import default_config
from segrelab.sweeplab import run_sweep


@pytest.fixture(scope="session")
def default_sweep():
    """In-memory sweep over the default configuration (kappa = 1 .. 1e4)."""
    cfg = default_config(workers=1)
    return run_sweep(cfg, outdir=None, render_figures=False)
