"""
helpers.py

Purpose:
    Small configurations shared by the harness tests: a short, cheap 1-D run and sweeps built on it.
"""

from dsl.config_dsl import parse_config

QUICK_RUN = """
grid.dim = 1
grid.n = 16
params.eps = 0.5
params.mu = 0.1
params.kappa = 0.1
init.amplitude = 0.02
integrator.t_end = 0.02
integrator.dt = 0.005
"""


def quick_run(extra: str = ""):
    return parse_config(QUICK_RUN + extra)


def quick_sweep(extra: str = ""):
    return parse_config(QUICK_RUN + "sweep.eps = 1, 0.5\n" + extra)
