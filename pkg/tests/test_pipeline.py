import math

import numpy as np
import pytest

from nlwave import (
    COMPLEX_WAVE,
    Envelope,
    ExperimentConfig,
    ProbeSpec,
    REAL_WAVE,
    ZeroNonlinearity,
    default_grid,
    gaussian_field,
)
from nlwave import pipeline as pl
from nlwave import xray
from nlwave.harmonics import WindowSpec
from nlwave.errors import WrongVariant

from conftest import cubic_config

XA0 = math.sqrt(math.pi * 0.02)


def _cubic_task(mode, **kw):
    cfg = cubic_config(n=512, h=0.02, T=1.4)
    defaults = dict(n_angles=60, n_offsets=101, offset_max=0.65, k_max=3,
                    n_sweep=40, truth_alpha=cfg.nonlinearity.alpha,
                    window=WindowSpec(mu=0.58, order=2))
    defaults.update(kw)
    return pl.RecoveryTask(mode=mode, config=cfg, **defaults)


def synthetic_measurements(task, scale=1.0):
    """Fabricate angle measurements from the exact cubic model: the sweep
    entries are the window-smoothed signed amplitudes the lock-in would
    return on ideal data, so recovery must undo the smoothing and the
    tomography exactly."""
    probe = task.config.probe
    h = probe.h
    chi = probe.chi
    taus = np.linspace(0.0, pl._tau_at_level(chi, task.m_min_frac),
                       task.n_sweep)
    offsets = np.linspace(-task.offset_max, task.offset_max, task.n_offsets)
    Xa = XA0 * np.exp(-offsets ** 2 / 0.02) * scale
    tt = np.linspace(-0.6, 0.6, 6001)
    out = []
    # g_k(tau, p) = (1/(2k)) chi(tau) gamma_k(chi(tau)) with gamma_1 =
    # (3/4) M^2 Xa, gamma_3 = (1/4) M^2 Xa
    coeffs = {1: 0.75, 3: 0.25}
    win = task.window
    smoothed = {}
    for k, c in coeffs.items():
        gt = chi(tt) * c * chi(tt) ** 2 / (2 * k)
        A = np.array([np.trapezoid(win.psi_h(tl - tt, h) * gt, tt)
                      for tl in taus])
        smoothed[k] = A
    for angle in task.angles:
        m = pl.AngleMeasurement(angle=angle, offsets=offsets, taus=taus)
        for k in (1, 3):
            m.sweeps[k] = (smoothed[k][:, None] * Xa[None, :]).astype(
                np.complex128)
        out.append(m)
    return out


def test_synthetic_cheb_recovery():
    task = _cubic_task("real_odd_cheb")
    rec = pl.run_recovery(task, measurements=synthetic_measurements(task))
    assert rec.metrics["rel_l2"] < 0.05
    iy = ix = rec.grid.ny // 2
    assert rec.alpha.values[iy, ix] == pytest.approx(1.0, abs=0.05)
    assert rec.metrics["gamma_ratio_13"] == pytest.approx(3.0, rel=0.1)


def test_synthetic_abel_recovery():
    task = _cubic_task("real_odd_abel")
    rec = pl.run_recovery(task, measurements=synthetic_measurements(task))
    assert rec.metrics["rel_l2"] < 0.06
    iy = ix = rec.grid.ny // 2
    assert rec.alpha.values[iy, ix] == pytest.approx(1.0, abs=0.06)


def test_synthetic_poly_top_recovery():
    task = _cubic_task("poly_top")
    rec = pl.run_recovery(task, measurements=synthetic_measurements(task))
    assert rec.metrics["rel_l2"] < 0.05


def test_synthetic_scaling_linearity():
    task = _cubic_task("real_odd_abel")
    r1 = pl.run_recovery(task, measurements=synthetic_measurements(task))
    r2 = pl.run_recovery(task,
                         measurements=synthetic_measurements(task, 2.0))
    assert np.allclose(r2.alpha.values, 2.0 * r1.alpha.values, atol=1e-9)


def test_recovered_f0_range_marker():
    task = _cubic_task("real_odd_cheb")
    rec = pl.run_recovery(task, measurements=synthetic_measurements(task))
    assert math.isnan(rec.f0_at(0, 0, 1.5))
    assert math.isnan(rec.f0_at(0, 0, -0.1))
    assert not math.isnan(rec.f0_at(rec.grid.nx // 2, rec.grid.ny // 2, 0.5))


def test_task_validation():
    cfg = cubic_config(n=512, h=0.02)
    with pytest.raises(WrongVariant):
        pl.RecoveryTask(mode="complex_odd", config=cfg)
    with pytest.raises(ValueError):
        pl.RecoveryTask(mode="real_odd_cheb", config=cfg, n_angles=8)
    with pytest.raises(ValueError):
        pl.RecoveryTask(mode="nope", config=cfg)


def test_top_degree_resolution():
    task = _cubic_task("poly_top")
    assert task.top_degree() == 3


def test_zero_nonlinearity_noise_floor():
    chi = Envelope(kind="gaussian", amplitude=1.0, width2=0.02)
    T = 0.9
    grid = default_grid(T, chi.half_support, 256)
    probe = ProbeSpec(h=0.035, omega=(0.0, 1.0), chi=chi, T=T,
                      field_kind=REAL_WAVE)
    cfg = ExperimentConfig(grid=grid, probe=probe,
                           nonlinearity=ZeroNonlinearity())
    task = pl.RecoveryTask(mode="real_odd_cheb", config=cfg, n_angles=8,
                           n_offsets=65, offset_max=0.5, k_max=3,
                           n_sweep=16)
    rec = pl.run_recovery(task, threads=1)
    assert np.abs(rec.alpha.values).max() < 1e-12
    assert np.abs(rec.f0_table).max() < 1e-9


def test_measure_angle_runs_real(tmp_path):
    # one full measurement pass on a small real config
    cfg = cubic_config(n=384, h=0.03)
    task = pl.RecoveryTask(mode="real_odd_abel", config=cfg, n_angles=40,
                           n_offsets=65, offset_max=0.55, k_max=3,
                           n_sweep=16,
                           truth_alpha=cfg.nonlinearity.alpha)
    m = pl.measure_angle(task, 0.3)
    assert set(m.sweeps) == {1, 3}
    assert m.sweeps[1].shape == (16, 65)
    assert np.isfinite(m.sweeps[1]).all()
