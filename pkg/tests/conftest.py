import math
from dataclasses import replace

import numpy as np
import pytest

from nlwave import (
    Envelope,
    ExperimentConfig,
    Grid2D,
    OddSeparated,
    PolyInP,
    ProbeSpec,
    REAL_WAVE,
    ScalarField2D,
    ZeroNonlinearity,
    default_grid,
    gaussian_field,
    gaussian_support_radius,
)
from nlwave import solver as sv

DIAG = (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0))


def small_config(n=384, h=0.04, T=1.0, width2=0.02, omega=(0.0, 1.0),
                 field_kind=REAL_WAVE, nl=None, cfl=0.5):
    """Compact, well-resolved experiment for unit tests."""
    chi = Envelope(kind="gaussian", amplitude=1.0, width2=width2)
    grid = default_grid(T, chi.half_support, n)
    probe = ProbeSpec(h=h, omega=omega, chi=chi, T=T, field_kind=field_kind)
    if nl is None:
        nl = ZeroNonlinearity()
    return ExperimentConfig(grid=grid, probe=probe, nonlinearity=nl, cfl=cfl)


def cubic_config(n=512, h=0.02, T=1.4, omega=(0.0, 1.0),
                 field_kind=REAL_WAVE, cfl=0.5, amplitude=1.0):
    from nlwave import cubic_odd
    chi = Envelope(kind="gaussian", amplitude=1.0, width2=0.02)
    grid = default_grid(T, chi.half_support, n)
    probe = ProbeSpec(h=h, omega=omega, chi=chi, T=T, field_kind=field_kind)
    nl = cubic_odd(grid, amplitude=amplitude)
    return ExperimentConfig(grid=grid, probe=probe, nonlinearity=nl, cfl=cfl)


def magic_diagonal(config):
    """Exact-advection variant: diagonal probe at cfl = 1/sqrt(2) with the
    flight time snapped to the step lattice."""
    cfg = replace(config, probe=replace(config.probe, omega=DIAG),
                  cfl=1.0 / math.sqrt(2.0))
    return sv.snap_flight_time(cfg)


def run_pair(config, prev_mode="taylor"):
    """(nonlinear capture, linear capture) at t = T."""
    _, caps = sv.run_experiment(config, prev_mode=prev_mode)
    _, capsL = sv.run_linear(config, prev_mode=prev_mode)
    return caps[0], capsL[0]


def central_band_mask(config, clear=0.6):
    from nlwave.model import grid_mesh
    X, Y = grid_mesh(config.grid)
    ox, oy = config.probe.omega
    w = X * ox + Y * oy
    p = X * oy - Y * ox
    return ((np.abs(w - config.probe.band_center) <= config.delta)
            & (np.abs(p) <= clear))
