"""Asymptotic exit-wave predictions, independent of the time stepper except
for the nested zeroth-harmonic solves that the non-odd theory itself
requires.

Transport-equation constants used here (validated against the solver and
cross-checked between the odd and polynomial routes):

* complex odd probe: u = e^{i phi/h} chi (1 - i (h/2) X[f0(., chi^2)]).
* real odd probe:    harmonic k sine coefficient of (u - u_L)/h is
  (1/(2k)) chi Xgamma_k, i.e. a1^(k) = -(i/(4k)) chi Xgamma_k.
* general real probe: a1^(k) = -(i/(4k)) int f_k(x, chi, u0^(0)) d sigma
  along the characteristic; for f = alpha u^m the top harmonic reduces to
  a1^(m) = -i 2^-(m+1)/m chi^m Xalpha_m, with sine coefficient
  (2^-m/m) chi^m Xalpha_m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from . import chebfourier as cf
from . import solver as sv
from . import xray
from .errors import WrongVariant
from .harmonics import probe_normal
from .model import (
    COMPLEX,
    COMPLEX_WAVE,
    REAL,
    REAL_WAVE,
    ExperimentConfig,
    Grid2D,
    NonlinearityBase,
    OddGeneral,
    OddSeparated,
    PolynomialNonlinearity,
    ProbeSpec,
    ScalarField2D,
    grid_mesh,
)


@dataclass
class HarmonicLadder:
    """Leading and subprincipal harmonic amplitudes at the evaluation time,
    plus the zeroth modes when the nonlinearity generates them.

    Ladders built from characteristic integrals on the center measurement
    line additionally expose (line_s, line_a1) with the 1D profiles; their
    2D a1 fields then hold the same values scattered onto nearest nodes,
    for inspection only."""

    probe: ProbeSpec
    t: float
    a0: dict[int, ScalarField2D]
    a1: dict[int, ScalarField2D]
    u0_zero: ScalarField2D | None = None
    u1_zero: ScalarField2D | None = None
    line_s: np.ndarray | None = None
    line_a1: dict | None = None

    def conjugate_residual(self) -> float:
        """max |a_j^(-k) - conj(a_j^(k))| over stored pairs."""
        res = 0.0
        for table in (self.a0, self.a1):
            for k, f in table.items():
                if k > 0 and -k in table:
                    res = max(res, float(np.max(np.abs(
                        table[-k].values - np.conj(f.values)))))
        return res

    def sine_coefficient(self, k: int) -> np.ndarray:
        """Real coefficient of sin(k phi/h) in (u - u_L)/h, i.e. the real
        combination 2i a1^(k) when a1^(-k) = conj a1^(k)."""
        return np.real(2j * self.a1[k].values)

    def assemble_exit_field(self) -> ScalarField2D:
        """Principal term plus h times the stored subprincipal ladder."""
        grid = self.a0[1].grid
        probe = self.probe
        phi = probe.phase_grid(self.t, grid)
        carrier = np.exp(1j * phi / probe.h)
        out = np.zeros(grid.shape(), dtype=np.complex128)
        for k, f in self.a0.items():
            out += f.values * carrier ** k
        for k, f in self.a1.items():
            out += probe.h * f.values * carrier ** k
        if probe.field_kind == REAL_WAVE:
            vals = np.real(out)
            if self.u0_zero is not None:
                vals = vals + self.u0_zero.values
            if self.u1_zero is not None:
                vals = vals + probe.h * self.u1_zero.values
            return ScalarField2D(grid, vals, REAL)
        return ScalarField2D(grid, out, COMPLEX)


# ---------------------------------------------------------------------------
# shared geometry helpers
# ---------------------------------------------------------------------------

def _offset_coordinate(grid: Grid2D, omega) -> np.ndarray:
    X, Y = grid_mesh(grid)
    nx_, ny_ = probe_normal(omega)
    return X * nx_ + Y * ny_


def _xprofile_on_grid(alpha: ScalarField2D, config: ExperimentConfig,
                      margin: float = 0.05) -> np.ndarray:
    """Full-line integrals of alpha through every grid point, as an array
    on the grid (zero where the line misses the support)."""
    grid = config.grid
    R = config.nonlinearity.support_radius + margin
    offs = np.arange(-R, R + grid.dx, 0.5 * grid.dx)
    prof = xray.line_profile_dir(alpha, config.probe.omega, offs)
    p = _offset_coordinate(grid, config.probe.omega)
    return np.interp(p, offs, prof, left=0.0, right=0.0)


def _sample_many(values: np.ndarray, grid: Grid2D, x: np.ndarray,
                 y: np.ndarray, order: int = 1) -> np.ndarray:
    rows = (y - grid.ymin) / grid.dy
    cols = (x - grid.xmin) / grid.dx
    return map_coordinates(values, [rows, cols], order=order, cval=0.0)


# ---------------------------------------------------------------------------
# odd case, complex probe
# ---------------------------------------------------------------------------

def predict_complex_odd(config: ExperimentConfig,
                        n_p_levels: int = 96) -> ScalarField2D:
    """Exit field e^{i phi/h} chi(phi) (1 - i (h/2) I(x)) at t = T, where
    I(x) is the line integral of y -> f0(y, chi^2(phi(x))) through x along
    the probe direction."""
    nl = config.nonlinearity
    probe = config.probe
    if probe.field_kind != COMPLEX_WAVE:
        raise WrongVariant("complex prediction needs a complex probe")
    grid = config.grid
    phi = probe.phase_grid(probe.T, grid)
    chi = probe.chi(phi)
    if isinstance(nl, OddSeparated):
        I = nl.f0(chi * chi) * _xprofile_on_grid(nl.alpha, config)
    elif isinstance(nl, OddGeneral):
        I = _xprofile_of_p(nl, config, chi * chi, n_p_levels)
    elif nl.is_zero:
        I = np.zeros(grid.shape())
    else:
        raise WrongVariant(
            f"odd prediction cannot use {type(nl).__name__}")
    vals = np.exp(1j * phi / probe.h) * chi * (1.0 - 0.5j * probe.h * I)
    return ScalarField2D(grid, vals, COMPLEX)


def _support_box_field(nl_fn, config: ExperimentConfig, margin=0.05):
    """Sub-grid covering the nonlinearity support and a field factory on
    it (keeps the per-level line integrals cheap)."""
    grid = config.grid
    R = config.nonlinearity.support_radius + margin
    x = grid.x()
    y = grid.y()
    jx = np.where(np.abs(x) <= R + 2 * grid.dx)[0]
    jy = np.where(np.abs(y) <= R + 2 * grid.dy)[0]
    sub = Grid2D(len(jx), len(jy), x[jx[0]], x[jx[-1]], y[jy[0]], y[jy[-1]])
    Xs, Ys = grid_mesh(sub)
    return sub, Xs, Ys


def _table_bilinear(table: np.ndarray, levels: np.ndarray,
                    offs: np.ndarray, lev_field: np.ndarray,
                    p_field: np.ndarray) -> np.ndarray:
    """Bilinear lookup of a (level, offset) table at per-point coordinates;
    zero outside the offset range."""
    dL = levels[1] - levels[0] if len(levels) > 1 else 1.0
    li = np.clip((lev_field - levels[0]) / dL, 0.0, len(levels) - 1.000001)
    l0 = li.astype(np.int64)
    lf = li - l0
    dp = offs[1] - offs[0]
    pi = (p_field - offs[0]) / dp
    inside = (pi >= 0.0) & (pi <= len(offs) - 1.0)
    pi = np.clip(pi, 0.0, len(offs) - 1.000001)
    p0 = pi.astype(np.int64)
    pf = pi - p0
    out = (table[l0, p0] * (1 - lf) * (1 - pf)
           + table[l0, p0 + 1] * (1 - lf) * pf
           + table[l0 + 1, p0] * lf * (1 - pf)
           + table[l0 + 1, p0 + 1] * lf * pf)
    out[~inside] = 0.0
    return out


def _xprofile_of_p(nl: OddGeneral, config: ExperimentConfig,
                   p_field: np.ndarray, n_levels: int) -> np.ndarray:
    """Line-integral table of y -> f0(y, P) over offset and level P,
    interpolated to (offset(x), p_field(x))."""
    grid = config.grid
    probe = config.probe
    sub, Xs, Ys = _support_box_field(nl, config)
    R = config.nonlinearity.support_radius + 0.05
    offs = np.arange(-R, R + grid.dx, 0.5 * grid.dx)
    p_max = float(np.max(p_field))
    levels = np.linspace(0.0, max(p_max, 1e-30), n_levels)
    table = np.empty((n_levels, len(offs)))
    for l, P in enumerate(levels):
        f = ScalarField2D(sub, np.asarray(nl.f0_xyp(Xs, Ys, P), dtype=float),
                          REAL)
        table[l] = xray.line_profile_dir(f, probe.omega, offs)
    p = _offset_coordinate(grid, probe.omega)
    return _table_bilinear(table, levels, offs, p_field, p)


# ---------------------------------------------------------------------------
# odd case, real probe
# ---------------------------------------------------------------------------

def _xgamma_fields(config: ExperimentConfig, k_max: int,
                   n_m_levels: int = 257) -> dict[int, np.ndarray]:
    """Xgamma_k(x) = line integral of y -> gamma_k(y, M(x)) through x,
    with M(x) = chi(phi(T, x)); arrays on the grid for odd k <= k_max."""
    nl = config.nonlinearity
    probe = config.probe
    grid = config.grid
    phi = probe.phase_grid(probe.T, grid)
    M = probe.chi(phi)
    K = probe.chi.amplitude
    out: dict[int, np.ndarray] = {}
    if isinstance(nl, OddSeparated):
        Xa = _xprofile_on_grid(nl.alpha, config)
        Mg = np.linspace(0.0, K, n_m_levels)
        gt = cf.gamma_table(nl.f0, Mg, k_max)
        for k in range(1, k_max + 1, 2):
            out[k] = np.interp(M, Mg, gt[:, k]) * Xa
        return out
    if isinstance(nl, PolynomialNonlinearity) and nl.is_odd:
        Xa = {m: _xprofile_on_grid(a, config) for m, a in nl.terms}
        for k in range(1, k_max + 1, 2):
            acc = np.zeros(grid.shape())
            for m, _ in nl.terms:
                c = cf.monomial_to_cheb(m).get(k)
                if c:
                    acc += c * M ** (m - 1) * Xa[m]
            out[k] = acc
        return out
    if isinstance(nl, OddGeneral):
        sub, Xs, Ys = _support_box_field(nl, config)
        R = nl.support_radius + 0.05
        offs = np.arange(-R, R + grid.dx, 0.5 * grid.dx)
        Mg = np.linspace(0.0, K, 97)
        p = _offset_coordinate(grid, probe.omega)
        n_quad = 64
        theta = (np.arange(n_quad) + 0.5) * (math.pi / n_quad)
        ct = np.cos(theta)
        for k in range(1, k_max + 1, 2):
            rows = np.empty((len(Mg), len(offs)))
            ck = np.cos(k * theta) * ct
            for l, Ml in enumerate(Mg):
                vals = nl.f0_xyp(Xs[..., None], Ys[..., None],
                                 (Ml * ct) ** 2) @ ck
                g = (2.0 / n_quad) * vals
                rows[l] = xray.line_profile_dir(
                    ScalarField2D(sub, g, REAL), probe.omega, offs)
            out[k] = _table_bilinear(rows, Mg, offs, M, p)
        return out
    raise WrongVariant(f"odd prediction cannot use {type(nl).__name__}")


def predict_real_odd(config: ExperimentConfig, k_max: int = 9) -> HarmonicLadder:
    """Harmonic ladder of the real odd case at t = T:

        a0^(+-1) = chi/2,
        a1^(k)   = -(i/(4k)) chi(phi) Xgamma_k(x)   (odd k),

    so the exit field is chi cos(phi/h)
    + h chi sum_k (1/(2k)) sin(k phi/h) Xgamma_k + O(h^2)."""
    nl = config.nonlinearity
    probe = config.probe
    if probe.field_kind != REAL_WAVE:
        raise WrongVariant("real prediction needs a real probe")
    if not nl.is_odd:
        raise WrongVariant("predict_real_odd needs an odd nonlinearity")
    grid = config.grid
    phi = probe.phase_grid(probe.T, grid)
    chi = probe.chi(phi)
    half = ScalarField2D(grid, (0.5 * chi).astype(np.complex128), COMPLEX)
    a0 = {1: half, -1: half}
    a1: dict[int, ScalarField2D] = {}
    if not nl.is_zero:
        for k, Xg in _xgamma_fields(config, k_max).items():
            vals = -0.25j / k * chi * Xg
            a1[k] = ScalarField2D(grid, vals.astype(np.complex128), COMPLEX)
            a1[-k] = ScalarField2D(grid, np.conj(a1[k].values), COMPLEX)
    return HarmonicLadder(probe=probe, t=probe.T, a0=a0, a1=a1)


# ---------------------------------------------------------------------------
# polynomial top harmonic
# ---------------------------------------------------------------------------

def predict_polynomial_top(config: ExperimentConfig) -> ScalarField2D:
    """Sine-coefficient field of the highest harmonic at t = T for a
    polynomial nonlinearity with top degree m:

        s_m(x) = (2^-m / m) chi^m(phi) Xalpha_m(x),

    the real coefficient of sin(m phi/h) in (u - u_L)/h (the corresponding
    complex amplitude is a1^(m) = -(i/2) s_m)."""
    nl = config.nonlinearity
    if not isinstance(nl, PolynomialNonlinearity):
        raise WrongVariant("polynomial-top prediction needs a polynomial")
    m = nl.top_degree
    alpha_m = nl.alpha_of_degree(m)
    probe = config.probe
    phi = probe.phase_grid(probe.T, config.grid)
    chi = probe.chi(phi)
    Xa = _xprofile_on_grid(alpha_m, config)
    vals = 2.0 ** (-m) / m * chi ** m * Xa
    return ScalarField2D(config.grid, vals, REAL)


# ---------------------------------------------------------------------------
# nested zeroth-harmonic machinery (non-odd cases)
# ---------------------------------------------------------------------------

class _CharRayAccumulator:
    """Accumulates int g(s, x + (s - T) omega) ds during a nested run, for
    target points x on the exit band (the characteristic through each
    target)."""

    def __init__(self, xt: np.ndarray, yt: np.ndarray, T: float,
                 omega: tuple[float, float], integrand):
        self.xt = xt
        self.yt = yt
        self.T = T
        self.omega = omega
        self.integrand = integrand  # (x, y, u0_vals) -> rows (k, npts)
        self.acc = None

    def __call__(self, state: sv.SolverState):
        shift = state.t - self.T
        x = self.xt + shift * self.omega[0]
        y = self.yt + shift * self.omega[1]
        u0 = _sample_many(state.u_curr, state.grid, x, y)
        rows = self.integrand(x, y, u0)
        if self.acc is None:
            self.acc = np.zeros_like(rows)
        # endpoints carry zero integrand (pulse clear of the support), so a
        # plain rectangle sum is second-order here
        self.acc += state.dt * rows


def _band_targets(config: ExperimentConfig, targets: str):
    grid = config.grid
    probe = config.probe
    if targets == "line":
        bc = probe.band_center
        half = probe.chi.half_support + 0.1
        s = np.arange(bc - half, bc + half, grid.dx)
        xt = s * probe.omega[0]
        yt = s * probe.omega[1]
        return xt, yt, None
    phi = probe.phase_grid(probe.T, grid)
    mask = probe.chi(phi) >= 0.02 * probe.chi.amplitude
    X, Y = grid_mesh(grid)
    return X[mask], Y[mask], mask


def _alpha_sampler(alpha: ScalarField2D):
    return lambda x, y: _sample_many(alpha.values, alpha.grid, x, y)


def predict_quadratic(config: ExperimentConfig, targets: str = "line",
                      compute_u1: bool = False) -> HarmonicLadder:
    """Quadratic-case ladder: the principal zeroth harmonic u0 from the
    nested solve of Box v + alpha v^2 = -(1/2) alpha chi^2(phi), the first
    harmonic from the characteristic integral of alpha chi u0, the second
    harmonic in closed form -(i/16) chi^2 Xalpha, and (optionally) the
    subprincipal zeroth mode."""
    nl = config.nonlinearity
    if not (isinstance(nl, PolynomialNonlinearity)
            and [m for m, _ in nl.terms] == [2]):
        raise WrongVariant("quadratic prediction needs f = alpha u^2")
    probe = config.probe
    grid = config.grid
    alpha = nl.terms[0][1]
    T = probe.T

    src = sv.TravelingBandSource(
        ScalarField2D(grid, -0.5 * alpha.values, REAL),
        lambda w: probe.chi(w) ** 2, probe)
    xt, yt, mask = _band_targets(config, targets)
    asamp = _alpha_sampler(alpha)
    char = _CharRayAccumulator(
        xt, yt, T, probe.omega,
        lambda x, y, u0: (asamp(x, y) * u0)[None, :])

    dt = sv.plan_dt(config.cfl, grid.dx, T)
    state = sv.init_zero(grid, dt, REAL)
    u1_loop = _U1Loop(config, alpha, probe) if compute_u1 else None

    def on_step(st):
        char(st)
        if u1_loop is not None:
            u1_loop(st)

    state, caps = sv.run_to(state, nl, src, T, capture_times=[T],
                            rho=config.kappa_rho, blowup=1e3,
                            on_step=on_step)
    u0_T = caps[0]

    phi_t = -T + xt * probe.omega[0] + yt * probe.omega[1] + T / 2.0
    chi_t = probe.chi(phi_t)
    a1_1_t = -0.5j * chi_t * char.acc[0]

    phi = probe.phase_grid(T, grid)
    chi = probe.chi(phi)
    a1_1 = _scatter(grid, xt, yt, mask, a1_1_t)
    Xa = _xprofile_on_grid(alpha, config)
    a1_2 = -1j / 16.0 * chi ** 2 * Xa

    a1 = {}
    for k, vals in ((1, a1_1), (2, a1_2)):
        a1[k] = ScalarField2D(grid, vals.astype(np.complex128), COMPLEX)
        a1[-k] = ScalarField2D(grid, np.conj(a1[k].values), COMPLEX)
    half = ScalarField2D(grid, (0.5 * chi).astype(np.complex128), COMPLEX)
    ladder = HarmonicLadder(probe=probe, t=T, a0={1: half, -1: half},
                            a1=a1, u0_zero=u0_T)
    if mask is None:
        ladder.line_s = xt * probe.omega[0] + yt * probe.omega[1]
        ladder.line_a1 = {1: a1_1_t}
    if u1_loop is not None:
        ladder.u1_zero = u1_loop.field()
    return ladder


def _scatter(grid: Grid2D, xt, yt, mask, values) -> np.ndarray:
    out = np.zeros(grid.shape(), dtype=np.complex128)
    if mask is None:
        jj = np.clip(np.round((yt - grid.ymin) / grid.dy).astype(int),
                     0, grid.ny - 1)
        ii = np.clip(np.round((xt - grid.xmin) / grid.dx).astype(int),
                     0, grid.nx - 1)
        out[jj, ii] = values
    else:
        out[mask] = values
    return out


class _U1Loop:
    """Co-stepped solve of the subprincipal zeroth mode,

        Box w + 2 alpha u0 w = -alpha chi^2 c1,

    where c1 = chi * (running characteristic integral of alpha u0) is the
    real first-harmonic sine coefficient (the real representative of the
    written source, which is imaginary as printed); maintained with a
    semi-Lagrangian update of the arriving-ray integral."""

    def __init__(self, config: ExperimentConfig, alpha: ScalarField2D,
                 probe: ProbeSpec):
        self.config = config
        self.grid = config.grid
        self.alpha = alpha.values
        self.probe = probe
        shape = self.grid.shape()
        self.A = np.zeros(shape)
        self.w_prev = np.zeros(shape)
        self.w_curr = np.zeros(shape)
        self.X, self.Y = grid_mesh(self.grid)
        self.last_u0 = None
        self.t = 0.0

    def __call__(self, state: sv.SolverState):
        if self.last_u0 is None:
            self.last_u0 = state.u_curr.copy()
            return
        dt = state.dt
        grid = self.grid
        ox, oy = self.probe.omega
        rows = (self.Y - oy * dt - grid.ymin) / grid.dy
        cols = (self.X - ox * dt - grid.xmin) / grid.dx
        Ashift = map_coordinates(self.A, [rows.ravel(), cols.ravel()],
                                 order=1, cval=0.0).reshape(self.A.shape)
        self.A = Ashift + dt * self.alpha * state.u_curr
        phi = self.probe.phase(state.t, self.X, self.Y)
        chi = self.probe.chi(phi)
        c1 = chi * self.A
        srcv = -self.alpha * chi ** 2 * c1
        lap = sv.laplacian5(self.w_curr, grid.dx)
        w_next = (2.0 * self.w_curr - self.w_prev
                  + dt * dt * (lap - 2.0 * self.alpha * state.u_prev
                               * self.w_curr + srcv))
        w_next[0, :] = w_next[-1, :] = 0.0
        w_next[:, 0] = w_next[:, -1] = 0.0
        self.w_prev, self.w_curr = self.w_curr, w_next
        self.last_u0 = state.u_curr.copy()
        self.t = state.t

    def field(self) -> ScalarField2D:
        return ScalarField2D(self.grid, self.w_curr.copy(), REAL)


def predict_general_nonodd(config: ExperimentConfig, k_max: int = 4,
                           targets: str = "line",
                           n_quad: int = 64) -> HarmonicLadder:
    """General (not necessarily odd) real-probe ladder: the zeroth harmonic
    solves Box v + (1/2) f_0(x, chi(phi), v) = 0 with zero data, and

        a1^(k) = -(i/(4k)) int f_k(x, chi, u0) d sigma

    along characteristics, with the mode coefficients f_k of the
    nonlinearity (exact binomial values for polynomials, quadrature
    otherwise)."""
    nl = config.nonlinearity
    probe = config.probe
    grid = config.grid
    if probe.field_kind != REAL_WAVE:
        raise WrongVariant("general prediction needs a real probe")
    T = probe.T
    if nl.is_zero:
        phi0 = probe.phase_grid(T, grid)
        half0 = ScalarField2D(
            grid, (0.5 * probe.chi(phi0)).astype(np.complex128), COMPLEX)
        return HarmonicLadder(probe=probe, t=T, a0={1: half0, -1: half0},
                              a1={}, u0_zero=None)
    sub, Xs, Ys = _support_box_field(nl, config)
    x = grid.x()
    y = grid.y()
    jx0 = int(np.searchsorted(x, sub.xmin - 1e-12))
    jy0 = int(np.searchsorted(y, sub.ymin - 1e-12))
    sl = (slice(jy0, jy0 + sub.ny), slice(jx0, jx0 + sub.nx))
    ox, oy = probe.omega
    w_box = Xs * ox + Ys * oy + T / 2.0

    if isinstance(nl, PolynomialNonlinearity):
        alpha_box = {m: a.values[sl] for m, a in nl.terms}

        def f0_box(t, Vbox):
            M = probe.chi(w_box - t)
            return cf.poly_fourier_modes(alpha_box, M, Vbox, 0)[0]
    elif isinstance(nl, OddSeparated):
        a_box = nl.alpha.values[sl]

        def f0_box(t, Vbox):
            M = probe.chi(w_box - t)
            modes = cf.fourier_modes_scalar(
                lambda v: nl.f0(v * v) * v, M, Vbox, 0, n_quad)
            return a_box * modes[0]
    else:
        def f0_box(t, Vbox):
            M = probe.chi(w_box - t)
            modes = cf.fourier_modes_scalar(
                lambda v: nl.raw(Xs[..., None], Ys[..., None], v),
                M, Vbox, 0, n_quad)
            return modes[0]

    def nested_term(t, V):
        out = np.zeros_like(V)
        out[sl] = 0.5 * f0_box(t, V[sl])
        return out

    nested = sv.TimeDependentNonlinearity(nested_term,
                                          nl.support_radius)

    xt, yt, mask = _band_targets(config, targets)
    phi_t = -T + xt * ox + yt * oy + T / 2.0
    M_t = probe.chi(phi_t)

    if isinstance(nl, PolynomialNonlinearity):
        samplers = {m: _alpha_sampler(a) for m, a in nl.terms}

        def integrand(px, py, u0):
            coeffs = {m: samplers[m](px, py) for m in samplers}
            return cf.poly_fourier_modes(coeffs, M_t, u0, k_max)[1:]
    else:
        def integrand(px, py, u0):
            return cf.fourier_modes_scalar(
                lambda v: nl.raw(px[:, None], py[:, None], v),
                M_t, u0, k_max, n_quad)[1:]

    char = _CharRayAccumulator(xt, yt, T, probe.omega, integrand)
    dt = sv.plan_dt(config.cfl, grid.dx, T)
    state = sv.init_zero(grid, dt, REAL)
    state, caps = sv.run_to(state, nested, None, T, capture_times=[T],
                            rho=config.kappa_rho, blowup=1e3, on_step=char)
    u0_T = caps[0]

    phi = probe.phase_grid(T, grid)
    chi = probe.chi(phi)
    half = ScalarField2D(grid, (0.5 * chi).astype(np.complex128), COMPLEX)
    a1: dict[int, ScalarField2D] = {}
    line_a1 = {}
    for k in range(1, k_max + 1):
        a1_t = -0.25j / k * char.acc[k - 1]
        vals = _scatter(grid, xt, yt, mask, a1_t)
        line_a1[k] = a1_t
        a1[k] = ScalarField2D(grid, vals, COMPLEX)
        a1[-k] = ScalarField2D(grid, np.conj(vals), COMPLEX)
    ladder = HarmonicLadder(probe=probe, t=T, a0={1: half, -1: half},
                            a1=a1, u0_zero=u0_T)
    if mask is None:
        ladder.line_s = xt * probe.omega[0] + yt * probe.omega[1]
        ladder.line_a1 = line_a1
    return ladder
