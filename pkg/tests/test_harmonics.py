import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlwave import harmonics as hm
from nlwave.errors import DivisionBand, GridMismatch, GridTooCoarse
from nlwave.model import Envelope


H = 0.01
BC = 0.7


def make_trace(values, h=H, ds=None):
    ds = ds or h / 10
    n = int(round(1.3 / ds))
    s = BC + (np.arange(2 * n + 1) - n) * ds
    return hm.ExitTrace(s=s, values=values(s), h=h, omega=(0.0, 1.0),
                        band_center=BC)


def chi(s):
    return np.exp(-(s - BC) ** 2 / 0.02)


def linear_trace(h=H, ds=None):
    return make_trace(lambda s: chi(s) * np.cos((s - BC) / h), h, ds)


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def test_single_mode_projection():
    lin = linear_trace()
    c = 0.37
    tr = make_trace(lambda s: lin.values * 0 + chi(s) * np.cos((s - BC) / H)
                    + H * c * np.sin((s - BC) / H))
    win = hm.WindowSpec(mu=0.5, order=2)
    A = hm.extract_Ak(tr, lin, 1, win)
    assert A == pytest.approx(c, rel=0.01)
    P = hm.extract_Ak_complex(tr, lin, 1, win)
    assert abs(P) == pytest.approx(c, rel=0.01)
    assert abs(P.imag) < 1e-3 * c


def test_two_mode_separation():
    lin = linear_trace()
    c1, c3 = 0.375, 1 / 24
    tr = make_trace(lambda s: chi(s) * np.cos((s - BC) / H)
                    + H * (c1 * np.sin((s - BC) / H)
                           + c3 * np.sin(3 * (s - BC) / H)))
    win = hm.WindowSpec(mu=0.5, order=2)
    assert hm.extract_Ak(tr, lin, 1, win) == pytest.approx(c1, rel=0.01)
    assert hm.extract_Ak(tr, lin, 3, win) == pytest.approx(c3, rel=0.02)


def test_identical_traces_give_zero():
    lin = linear_trace()
    win = hm.WindowSpec()
    assert hm.extract_Ak(lin, lin, 2, win) == 0.0


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_extraction_linearity(a, b):
    lin = linear_trace()
    win = hm.WindowSpec()
    f = make_trace(lambda s: H * 0.3 * np.sin((s - BC) / H))
    g = make_trace(lambda s: H * 0.1 * np.sin((s - BC) / H)
                   + H * 0.05 * np.sin(3 * (s - BC) / H))
    zero = make_trace(lambda s: np.zeros_like(s))
    comb = make_trace(lambda s: a * f.values + b * g.values)
    Af = hm.extract_Ak(f, zero, 1, win)
    Ag = hm.extract_Ak(g, zero, 1, win)
    Ac = hm.extract_Ak(comb, zero, 1, win)
    assert Ac == pytest.approx(a * Af + b * Ag, abs=1e-12)


def test_smooth_component_rejection():
    # h-independent smooth additive piece changes A_k by < 1e-6 relative
    h = 0.002
    win = hm.WindowSpec(mu=0.3, order=8)
    lin = linear_trace(h=h)
    c = 0.3
    tr = make_trace(lambda s: lin.values * 0
                    + h * c * np.sin((s - BC) / h), h=h)
    zero = make_trace(lambda s: np.zeros_like(s), h=h)
    base = hm.extract_Ak(tr, zero, 1, win)
    # smooth bump with a kink (worst-case algebraic spectrum)
    smooth = make_trace(
        lambda s: h * c * np.sin((s - BC) / h)
        + 0.15 * np.maximum(0.0, 1 - np.abs(s - BC) / 0.3) ** 2, h=h)
    pert = hm.extract_Ak(smooth, zero, 1, win)
    assert abs(pert - base) / abs(base) < 1e-6


def test_trace_requires_fine_sampling():
    with pytest.raises(GridTooCoarse):
        make_trace(lambda s: np.zeros_like(s), ds=H / 4)


def test_harmonic_resolution_guard():
    lin = linear_trace(ds=H / 8)
    win = hm.WindowSpec()
    with pytest.raises(GridTooCoarse):
        hm.extract_Ak(lin, lin, 13, win)


def test_grid_mismatch_guard():
    lin = linear_trace()
    other = linear_trace(ds=H / 16)
    with pytest.raises(GridMismatch):
        hm.extract_Ak(lin, other, 1, hm.WindowSpec())


# ---------------------------------------------------------------------------
# window spec
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("order", [1, 2, 4, 8])
def test_window_normalized(order):
    win = hm.WindowSpec(mu=0.5, order=order)
    v = np.linspace(-1.2, 1.2, 240001)
    assert np.trapezoid(win.psi(v), v) == pytest.approx(1.0, abs=1e-10)
    assert np.all(win.psi(v) >= 0.0)


def test_window_mu_validation():
    with pytest.raises(ValueError):
        hm.WindowSpec(mu=1.2)


# ---------------------------------------------------------------------------
# sweep deconvolution and refocusing
# ---------------------------------------------------------------------------

def test_sweep_deconvolver_synthetic():
    h = 0.01
    win = hm.WindowSpec(mu=0.58, order=2)
    chi_e = Envelope(kind="gaussian", amplitude=1.0, width2=0.02)
    taus = np.linspace(0, 0.245, 40)
    g_true = chi_e(taus) ** 3 * 0.2
    tt = np.linspace(-0.5, 0.5, 4001)
    gt = chi_e(np.abs(tt)) ** 3 * 0.2
    A = np.array([np.trapezoid(win.psi_h(tl - tt, h) * gt, tt)
                  for tl in taus])
    D = hm.sweep_deconvolver(taus, win, h)
    g_rec = D @ A
    sel = taus <= 0.15
    assert np.max(np.abs(g_rec - g_true)[sel] / g_true[sel]) < 0.06


def test_refocus_roundtrip():
    offsets = np.linspace(-0.6, 0.6, 128)
    rows = np.exp(-offsets ** 2 / 0.02) * (1 + 0.3j)
    fwd = hm.refocus_rows(rows, offsets, 0.01, 1, -0.5)
    back = hm.refocus_rows(fwd, offsets, 0.01, 1, 0.5)
    # small residual from the zero-padded circular transform
    assert np.max(np.abs(back[0] - rows)) < 1e-6


def test_refocus_conserves_energy():
    offsets = np.linspace(-0.6, 0.6, 128)
    rows = np.exp(-offsets ** 2 / 0.02) + 0j
    out = hm.refocus_rows(rows, offsets, 0.01, 1, 0.7)[0]
    assert np.sum(np.abs(out) ** 2) == pytest.approx(
        np.sum(np.abs(rows) ** 2), rel=1e-6)


# ---------------------------------------------------------------------------
# spectrum and envelope
# ---------------------------------------------------------------------------

def test_spectrum_pure_carrier_peak():
    tr = make_trace(lambda s: np.cos((s - BC) / H))
    harm, mags = hm.spectrum(tr)
    peak = harm[np.argmax(mags)]
    assert abs(peak - 1.0) < 0.05


def test_spectrum_zero_trace():
    tr = make_trace(lambda s: np.zeros_like(s))
    _, mags = hm.spectrum(tr)
    assert not mags.any()


def test_spectrum_two_peaks():
    tr = make_trace(lambda s: chi(s) * (0.375 * np.sin((s - BC) / H)
                                        + (1 / 24) * np.sin(3 * (s - BC) / H)))
    harm, mags = hm.spectrum(tr)
    p1 = hm.spectrum_peak(harm, mags, 1)
    p3 = hm.spectrum_peak(harm, mags, 3)
    assert p1 / p3 == pytest.approx(9.0, rel=0.1)


def test_subtract_linear_cases():
    lin = linear_trace()
    from nlwave import Grid2D, ScalarField2D
    g = Grid2D(17, 17, -1, 1, -1, 1)
    a = ScalarField2D(g, np.random.default_rng(0).normal(size=g.shape()),
                      "real")
    z = ScalarField2D(g, np.zeros(g.shape()), "real")
    assert not hm.subtract_linear(a, a).values.any()
    assert np.array_equal(hm.subtract_linear(a, z).values, a.values)
    g2 = Grid2D(19, 19, -1, 1, -1, 1)
    b = ScalarField2D(g2, np.zeros(g2.shape()), "real")
    with pytest.raises(GridMismatch):
        hm.subtract_linear(a, b)


def test_envelope_ratio_complex():
    h = H
    lin = make_trace(lambda s: chi(s) * np.exp(1j * (s - BC) / h))
    tr = make_trace(lambda s: chi(s) * np.exp(1j * (s - BC) / h)
                    * (1 - 0.5j * h * 0.25 * chi(s) ** 2))
    curve = hm.envelope_ratio(tr, lin, h)
    band = chi(curve.s) > 0.2
    predicted = 0.5 * 0.25 * chi(curve.s) ** 3
    assert np.max(np.abs(curve.env_vals - predicted)[band]) < 0.01


def test_envelope_ratio_zero_difference():
    lin = linear_trace()
    curve = hm.envelope_ratio(lin, lin, 1.0)
    assert not np.abs(curve.ratio).any()


def test_envelope_ratio_division_guard():
    lin = linear_trace()
    tr = make_trace(lambda s: lin.values + 0.01)
    norm = np.where(np.abs(lin.s - BC) < 0.3, 1.0, 1e-9)
    with pytest.raises(DivisionBand):
        hm.envelope_ratio(tr, lin, norm)
