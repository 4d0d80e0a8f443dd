import math
from dataclasses import replace

import numpy as np
import pytest

from nlwave import (
    COMPLEX_WAVE,
    Envelope,
    ExperimentConfig,
    OddGeneral,
    OddSeparated,
    PolyInP,
    PolynomialNonlinearity,
    ProbeSpec,
    REAL_WAVE,
    ZeroNonlinearity,
    cubic_odd,
    default_grid,
    gaussian_field,
    gaussian_support_radius,
)
from nlwave import oracle
from nlwave import solver as sv
from nlwave.errors import WrongVariant
from nlwave.model import grid_mesh

from conftest import central_band_mask, cubic_config, magic_diagonal, run_pair

XA = math.sqrt(math.pi * 0.02)  # Gaussian line integral through the center


def test_complex_zero_nonlinearity_is_free_wave():
    cfg = cubic_config(n=384, h=0.03, T=1.0, field_kind=COMPLEX_WAVE)
    cfg = cfg.linearized()
    pred = oracle.predict_complex_odd(cfg)
    phi = cfg.probe.phase_grid(cfg.probe.T, cfg.grid)
    free = cfg.probe.chi(phi) * np.exp(1j * phi / cfg.probe.h)
    assert np.max(np.abs(pred.values - free)) < 1e-14


def test_complex_cubic_subprincipal_envelope():
    cfg = cubic_config(n=384, h=0.03, T=1.0, field_kind=COMPLEX_WAVE)
    pred = oracle.predict_complex_odd(cfg)
    phi = cfg.probe.phase_grid(cfg.probe.T, cfg.grid)
    chi = cfg.probe.chi(phi)
    free = chi * np.exp(1j * phi / cfg.probe.h)
    sub = np.abs(pred.values - free) / cfg.probe.h
    # along the center line the ray integral is the Gaussian line integral
    iy = np.argmin(np.abs(cfg.grid.y() - cfg.probe.band_center
                          * cfg.probe.omega[1]))
    ix = cfg.grid.nx // 2
    want = 0.5 * chi[iy, ix] ** 3 * XA
    # line-quadrature bias of the sampled profile is a few 1e-4 relative
    assert sub[iy, ix] == pytest.approx(want, rel=3e-3)


def test_complex_phase_quadrature():
    cfg = cubic_config(n=384, h=0.03, T=1.0, field_kind=COMPLEX_WAVE)
    pred = oracle.predict_complex_odd(cfg)
    phi = cfg.probe.phase_grid(cfg.probe.T, cfg.grid)
    chi = cfg.probe.chi(phi)
    free = chi * np.exp(1j * phi / cfg.probe.h)
    p = oracle._offset_coordinate(cfg.grid, cfg.probe.omega)
    band = (chi > 0.3) & (np.abs(p) < 0.25)  # where the ray integral lives
    ratio = (pred.values[band] - free[band]) / free[band]
    # subprincipal is the principal rotated by -pi/2
    assert np.allclose(np.angle(ratio), -math.pi / 2, atol=1e-9)


def test_complex_oracle_vs_solver():
    cfg = magic_diagonal(cubic_config(n=512, h=0.02, field_kind=COMPLEX_WAVE))
    uT, _ = run_pair(cfg, prev_mode="exact")
    pred = oracle.predict_complex_odd(cfg)
    band = central_band_mask(cfg)
    err = np.abs(uT.values - pred.values)[band].max()
    assert err < 5e-3


def test_complex_wrong_variant():
    cfg = cubic_config(n=384, h=0.03, T=1.0, field_kind=REAL_WAVE)
    with pytest.raises(WrongVariant):
        oracle.predict_complex_odd(cfg)


# ---------------------------------------------------------------------------
# real odd ladder
# ---------------------------------------------------------------------------

def test_real_cubic_third_harmonic_ratio():
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    lad = oracle.predict_real_odd(cfg, k_max=5)
    r = np.abs(lad.a1[3].values).max() / np.abs(lad.a1[1].values).max()
    assert r == pytest.approx(1.0 / 9.0, abs=1e-12)
    assert 5 not in lad.a1 or np.abs(lad.a1[5].values).max() < 1e-14


def test_real_cubic_closed_form_assembly():
    # pure algebra: the assembled exit field equals the transport-equation
    # closed form with sine coefficients (3/8, 1/24) chi^3 Xalpha
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    lad = oracle.predict_real_odd(cfg, k_max=5)
    assembled = lad.assemble_exit_field()
    probe = cfg.probe
    phi = probe.phase_grid(probe.T, cfg.grid)
    chi = probe.chi(phi)
    p = oracle._offset_coordinate(cfg.grid, probe.omega)
    Xa = XA * np.exp(-p ** 2 / 0.02)
    closed = chi * np.cos(phi / probe.h) + probe.h * chi ** 3 * Xa * (
        (3.0 / 8.0) * np.sin(phi / probe.h)
        + (1.0 / 24.0) * np.sin(3 * phi / probe.h))
    band = central_band_mask(cfg, clear=0.4)
    assert np.max(np.abs(assembled.values - closed)[band]) < 1e-6


def test_real_zero_ladder_is_free_cosine():
    cfg = cubic_config(n=384, h=0.03, T=1.0).linearized()
    lad = oracle.predict_real_odd(cfg, k_max=3)
    assert lad.a1 == {}
    out = lad.assemble_exit_field()
    phi = cfg.probe.phase_grid(cfg.probe.T, cfg.grid)
    free = cfg.probe.chi(phi) * np.cos(phi / cfg.probe.h)
    assert np.max(np.abs(out.values - free)) < 1e-12


def test_ladder_conjugate_symmetry():
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    lad = oracle.predict_real_odd(cfg, k_max=3)
    assert lad.conjugate_residual() < 1e-12


def test_real_oracle_vs_solver_small():
    cfg = magic_diagonal(cubic_config(n=512, h=0.02))
    uT, _ = run_pair(cfg, prev_mode="exact")
    pred = oracle.predict_real_odd(cfg, k_max=5).assemble_exit_field()
    band = central_band_mask(cfg)
    assert np.abs(uT.values - pred.values)[band].max() < 5e-3


def test_real_odd_wrong_variant():
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    cfg = replace(cfg, nonlinearity=PolynomialNonlinearity(
        terms=((2, gaussian_field(cfg.grid, 1.0, 0.02)),),
        support_radius=gaussian_support_radius(1.0, 0.02)))
    with pytest.raises(WrongVariant):
        oracle.predict_real_odd(cfg)


def test_odd_general_matches_separable():
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    sep = oracle.predict_real_odd(cfg, k_max=3)
    gen_nl = OddGeneral(
        f0_xyp=lambda X, Y, P: np.exp(-(X ** 2 + Y ** 2) / 0.02) * P,
        support_radius=cfg.nonlinearity.support_radius)
    gen = oracle.predict_real_odd(cfg.with_nonlinearity(gen_nl), k_max=3)
    for k in (1, 3):
        a, b = sep.a1[k].values, gen.a1[k].values
        assert np.max(np.abs(a - b)) < 2e-3 * np.abs(a).max()


# ---------------------------------------------------------------------------
# polynomial top harmonic
# ---------------------------------------------------------------------------

def test_poly_top_matches_cubic_ladder():
    # cross-path consistency: for f = alpha u^3 the k=3 sine coefficient of
    # the odd ladder equals the top-harmonic formula (2^-m/m) chi^m Xalpha
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    lad = oracle.predict_real_odd(cfg, k_max=3)
    sine3 = lad.sine_coefficient(3)
    poly = PolynomialNonlinearity(
        terms=((3, cfg.nonlinearity.alpha),),
        support_radius=cfg.nonlinearity.support_radius)
    top = oracle.predict_polynomial_top(cfg.with_nonlinearity(poly))
    # identical constants; small residual from the amplitude-table interp
    assert np.max(np.abs(sine3 - top.values)) < 2e-5 * np.abs(
        top.values).max()


def test_poly_top_zero_coefficient():
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    zero_alpha = gaussian_field(cfg.grid, 0.0, 0.02)
    poly = PolynomialNonlinearity(terms=((3, zero_alpha),),
                                  support_radius=0.3)
    out = oracle.predict_polynomial_top(cfg.with_nonlinearity(poly))
    assert not out.values.any()


def test_poly_top_wrong_variant():
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    with pytest.raises(WrongVariant):
        oracle.predict_polynomial_top(cfg)


# ---------------------------------------------------------------------------
# quadratic and general non-odd
# ---------------------------------------------------------------------------

def _quadratic_config(n=384, h=0.03, T=1.0, amplitude=1.0):
    chi = Envelope(kind="gaussian", amplitude=1.0, width2=0.02)
    grid = default_grid(T, chi.half_support, n)
    probe = ProbeSpec(h=h, omega=(0.0, 1.0), chi=chi, T=T,
                      field_kind=REAL_WAVE)
    alpha = gaussian_field(grid, amplitude, 0.02)
    nl = PolynomialNonlinearity(
        terms=((2, alpha),),
        support_radius=gaussian_support_radius(max(amplitude, 1e-6), 0.02))
    return ExperimentConfig(grid=grid, probe=probe, nonlinearity=nl)


def test_quadratic_second_harmonic_closed_form():
    cfg = _quadratic_config()
    lad = oracle.predict_quadratic(cfg)
    probe = cfg.probe
    phi = probe.phase_grid(probe.T, cfg.grid)
    chi = probe.chi(phi)
    p = oracle._offset_coordinate(cfg.grid, probe.omega)
    Xa = XA * np.exp(-p ** 2 / 0.02)
    want = chi ** 2 * Xa / 16.0
    got = np.abs(lad.a1[2].values)
    band = central_band_mask(cfg, clear=0.4)
    assert np.max(np.abs(got - want)[band]) < 1e-6


def test_quadratic_zero_alpha_reduces_to_free():
    cfg = _quadratic_config(amplitude=0.0)
    lad = oracle.predict_quadratic(cfg)
    assert np.abs(lad.u0_zero.values).max() == 0.0
    assert np.abs(lad.a1[1].values).max() == 0.0
    assert np.abs(lad.a1[2].values).max() == 0.0


def test_quadratic_zeroth_mode_h_independent():
    cfg1 = _quadratic_config(h=0.03)
    cfg2 = _quadratic_config(h=0.045)
    u1 = oracle.predict_quadratic(cfg1).u0_zero.values
    u2 = oracle.predict_quadratic(cfg2).u0_zero.values
    assert np.array_equal(u1, u2)


def test_quadratic_wrong_variant():
    cfg = cubic_config(n=384, h=0.03, T=1.0)
    with pytest.raises(WrongVariant):
        oracle.predict_quadratic(cfg)


def test_general_reduces_to_real_odd():
    cfg = cubic_config(n=320, h=0.04, T=1.0)
    gen = oracle.predict_general_nonodd(cfg, k_max=3, targets="line")
    assert np.abs(gen.u0_zero.values).max() < 1e-14
    sep = oracle.predict_real_odd(cfg, k_max=3)
    probe = cfg.probe
    s = gen.line_s
    for k in (1, 3):
        a = sep.a1[k].sample(s * probe.omega[0], s * probe.omega[1], order=1)
        b = gen.line_a1[k]
        scale = np.abs(a).max()
        assert np.max(np.abs(a - b)) < 0.02 * scale


def test_general_matches_quadratic():
    cfg = _quadratic_config(n=320, h=0.04)
    gen = oracle.predict_general_nonodd(cfg, k_max=2, targets="line")
    quad = oracle.predict_quadratic(cfg, targets="line")
    u0g, u0q = gen.u0_zero.values, quad.u0_zero.values
    # two numerically different but equivalent formulations of the nested
    # solve: agreement to accumulated roundoff
    assert np.max(np.abs(u0g - u0q)) < 1e-5 * np.abs(u0q).max()
    a1g = gen.line_a1[1]
    a1q = quad.line_a1[1]
    scale = np.abs(a1q).max()
    assert np.max(np.abs(a1g - a1q)) < 0.02 * scale


def test_general_zero_is_free():
    cfg = cubic_config(n=320, h=0.04, T=1.0).linearized()
    lad = oracle.predict_general_nonodd(cfg, k_max=2)
    assert lad.a1 == {}
    assert lad.u0_zero is None
