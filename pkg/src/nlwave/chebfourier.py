"""1D harmonic-analysis kernels.

Chebyshev coefficients gamma_k of an odd nonlinearity profile, their
resummation, monomial-to-Chebyshev tables, cosine-mode coefficients f_k of a
general nonlinearity, and the weakly singular forward/inverse pair relating
gamma_1(M) to f0.

All singular integrals are computed after a trigonometric substitution
(q = cos theta or M = q sin theta), so no endpoint-singular quadrature
appears anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import DomainTooSmall


@lru_cache(maxsize=8)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


# ---------------------------------------------------------------------------
# Chebyshev coefficients of q -> f0(M^2 q^2) q
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChebyshevCoeffs:
    """gamma_k(M), k = 0..k_max, of the expansion
    f0(M^2 q^2) q = sum_k gamma_k T_k(q); even k vanish for genuine odd
    input and are kept only to make that checkable."""

    M: float
    coeffs: np.ndarray
    k_max: int

    def gamma(self, k: int) -> float:
        return float(self.coeffs[k])

    def even_residual(self) -> float:
        """max |gamma_k| over even k (parity check)."""
        return float(np.max(np.abs(self.coeffs[0::2])))

    def tail_magnitude(self) -> float:
        """|gamma_{k_max}|, reported so truncation error is auditable."""
        return float(abs(self.coeffs[self.k_max]))

    def resum(self, q):
        """Clenshaw evaluation of sum_k gamma_k T_k(q) ~ f0(M^2 q^2) q.

        The k=0 entry is stored as the cosine-series gamma_0 and enters
        halved, matching its definition.
        """
        c = self.coeffs.copy()
        c[0] *= 0.5
        return npcheb.chebval(np.asarray(q, dtype=float), c)


def _theta_nodes(n_quad: int) -> tuple[np.ndarray, float]:
    """Midpoint nodes on (0, pi); spectrally accurate for the periodic
    integrands used here."""
    theta = (np.arange(n_quad) + 0.5) * (math.pi / n_quad)
    return theta, math.pi / n_quad


def gamma_coeffs(f0: Callable, M: float, k_max: int = 9,
                 n_quad: int | None = None) -> ChebyshevCoeffs:
    """gamma_k(M) = (2/pi) int_0^pi f0(M^2 cos^2 t) cos t cos(k t) dt,
    computed by the midpoint rule in t (Gauss-Chebyshev in q = cos t).

    f0 must accept numpy arrays of p = M^2 q^2 values.
    """
    if M < 0:
        raise ValueError("amplitude M must be >= 0")
    if n_quad is None:
        n_quad = max(64, 4 * k_max)
    if n_quad < 4 * k_max:
        raise ValueError("n_quad must be at least 4*k_max")
    theta, w = _theta_nodes(n_quad)
    ct = np.cos(theta)
    base = np.asarray(f0(M * M * ct * ct)) * ct
    ks = np.arange(k_max + 1)
    cos_kt = np.cos(np.outer(ks, theta))
    coeffs = (2.0 / math.pi) * w * (cos_kt @ base)
    return ChebyshevCoeffs(M=M, coeffs=coeffs, k_max=k_max)


def gamma_table(f0: Callable, M_grid: np.ndarray, k_max: int = 9,
                n_quad: int | None = None) -> np.ndarray:
    """gamma_k over a grid of amplitudes; shape (len(M_grid), k_max+1)."""
    if n_quad is None:
        n_quad = max(64, 4 * k_max)
    theta, w = _theta_nodes(n_quad)
    ct = np.cos(theta)
    M = np.asarray(M_grid, dtype=float)
    base = np.asarray(f0((M[:, None] * ct) ** 2)) * ct
    ks = np.arange(k_max + 1)
    cos_kt = np.cos(np.outer(theta, ks))
    return (2.0 / math.pi) * w * (base @ cos_kt)


def gamma_resum(coeffs: ChebyshevCoeffs, q):
    """sum gamma_k T_k(q) via the Clenshaw recurrence."""
    return coeffs.resum(q)


def monomial_to_cheb(m: int) -> dict[int, float]:
    """Exact coefficients c_j with q^m = sum_j c_j T_j(q).

    Dyadic rationals, exact in double precision up to m = 32.
    """
    if not (0 <= m <= 32):
        raise ValueError("m must be between 0 and 32")
    out: dict[int, float] = {}
    for j in range(m % 2, m + 1, 2):
        c = math.comb(m, (m - j) // 2) / 2.0 ** (m - 1)
        if j == 0:
            c /= 2.0
        out[j] = c
    return out


# ---------------------------------------------------------------------------
# cosine-mode coefficients of a general (non-odd) nonlinearity
# ---------------------------------------------------------------------------

def fourier_modes_scalar(fn_u: Callable, M, u, k_max: int,
                         n_quad: int = 96) -> np.ndarray:
    """f_k(M, u) = (2/pi) int_0^pi fn_u(u + M cos t) cos(k t) dt for
    k = 0..k_max, midpoint rule; fn_u vectorized over its argument.

    M and u may be arrays (broadcast together); output shape
    (k_max+1,) + broadcast shape.
    """
    theta, w = _theta_nodes(n_quad)
    M = np.asarray(M, dtype=float)
    u = np.asarray(u, dtype=float)
    args = u[..., None] + M[..., None] * np.cos(theta)
    vals = np.asarray(fn_u(args))
    ks = np.arange(k_max + 1)
    cos_kt = np.cos(np.outer(ks, theta))
    out = (2.0 / math.pi) * w * np.tensordot(vals, cos_kt, axes=([-1], [1]))
    return np.moveaxis(out, -1, 0)


def poly_fourier_modes(coeff_by_degree: dict[int, np.ndarray | float], M, u,
                       k_max: int) -> np.ndarray:
    """Exact mode coefficients for f(u) = sum_m a_m u^m via the binomial
    theorem and the monomial Chebyshev tables:

        (u + M cos t)^m = sum_j C(m,j) u^(m-j) M^j cos^j t,
        cos^j t = sum_k c_{j,k} cos(k t).

    Returns shape (k_max+1,) + broadcast(M, u); the k=0 entry carries the
    full (2/pi)-normalized value, i.e. twice the mean.
    """
    M = np.asarray(M, dtype=float)
    u = np.asarray(u, dtype=float)
    shape = np.broadcast(M, u).shape
    out = np.zeros((k_max + 1,) + shape)
    for m, a_m in coeff_by_degree.items():
        for j in range(m + 1):
            cj = monomial_to_cheb(j)
            binom = math.comb(m, j)
            for k, c in cj.items():
                if k > k_max:
                    continue
                scale = 2.0 if k == 0 else 1.0
                out[k] += scale * binom * c * a_m * u ** (m - j) * M ** j
    return out


def fourier_mode_coeffs(nl, x, M: float, u: float, k_max: int = 9,
                        n_quad: int = 96) -> np.ndarray:
    """Mode coefficients f_k(x, M, u) of a nonlinearity variant at a point.

    Polynomial variants use the exact binomial expansion; everything else
    integrates numerically.
    """
    from .model import OddGeneral, OddSeparated, PolynomialNonlinearity
    x = np.asarray(x, dtype=float)
    if isinstance(nl, PolynomialNonlinearity):
        coeffs = {m: float(a.sample(x[0], x[1], order=1))
                  for m, a in nl.terms}
        return poly_fourier_modes(coeffs, M, u, k_max)
    if isinstance(nl, OddSeparated):
        a = float(nl.alpha.sample(x[0], x[1], order=1))
        fn = lambda v: a * nl.f0(v * v) * v
    elif isinstance(nl, OddGeneral):
        fn = lambda v: nl.f0_xyp(x[0], x[1], v * v) * v
    else:
        raise ValueError(f"unsupported variant {type(nl).__name__}")
    return fourier_modes_scalar(fn, M, u, k_max, n_quad)


# ---------------------------------------------------------------------------
# Abel pair
# ---------------------------------------------------------------------------

def abel_forward(f0: Callable, M: float, n_quad: int = 64) -> float:
    """First Chebyshev coefficient through the weakly singular form,

        gamma_1(M) = (4/(pi M^2)) int_0^M f0(q^2) q^2 / sqrt(M^2-q^2) dq
                   = (4/pi) int_0^{pi/2} f0(M^2 sin^2 t) sin^2 t dt,

    regularized by q = M sin t and integrated with Gauss-Legendre nodes.
    """
    if M < 0:
        raise ValueError("amplitude M must be >= 0")
    x, w = _leggauss(n_quad)
    t = 0.25 * math.pi * (x + 1.0)
    st2 = np.sin(t) ** 2
    vals = np.asarray(f0(M * M * st2)) * st2
    return float((4.0 / math.pi) * 0.25 * math.pi * np.dot(w, vals))


def _abel_integral(gamma_of, q: np.ndarray, n_theta: int = 64) -> np.ndarray:
    """I(q) = int_0^q M^3 gamma_1(M)/sqrt(q^2-M^2) dM
            = q^3 int_0^{pi/2} sin^3 t gamma_1(q sin t) dt."""
    x, w = _leggauss(n_theta)
    t = 0.25 * math.pi * (x + 1.0)
    st = np.sin(t)
    w_eff = 0.25 * math.pi * w * st ** 3
    vals = gamma_of(np.outer(q, st))
    return q ** 3 * (vals @ w_eff)


def abel_invert(gamma1: np.ndarray, M_grid: np.ndarray, q_grid: np.ndarray,
                n_theta: int = 64, n_diff: int = 2048) -> np.ndarray:
    """Solve the Abel equation for f0:  f0(q^2) =
    (1/(2 q^2)) d/dq int_0^q M^3 gamma_1(M)/sqrt(q^2-M^2) dM.

    gamma1 is sampled on a uniform M_grid starting at 0; values between
    samples come from cubic interpolation.  The integral is regularized by
    M = q sin t, evaluated on an internal fine q grid (n_diff nodes),
    differentiated there by central differences (one-sided at the ends),
    and the result is sampled onto q_grid.

    Raises DomainTooSmall when q_grid exceeds the sampled M range.
    """
    from scipy.interpolate import CubicSpline
    M_grid = np.asarray(M_grid, dtype=float)
    gamma1 = np.asarray(gamma1, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    if M_grid.ndim != 1 or len(M_grid) < 8:
        raise ValueError("M_grid must be a 1D grid with >= 8 nodes")
    if q_grid.max() > M_grid.max() * (1.0 + 1e-12):
        raise DomainTooSmall(
            f"q up to {q_grid.max():.4g} exceeds sampled M range "
            f"{M_grid.max():.4g}")
    spline = CubicSpline(M_grid, gamma1)
    qf = np.linspace(0.0, float(q_grid.max()), n_diff)
    I = _abel_integral(spline, qf, n_theta)
    dI = np.gradient(I, qf, edge_order=2)
    f0f = np.empty_like(qf)
    f0f[1:] = dI[1:] / (2.0 * qf[1:] ** 2)
    f0f[0] = gamma1[0]  # limit: I ~ (2/3) q^3 gamma_1(0)
    return np.interp(q_grid, qf, f0f)


def abel_invert_many(gamma1: np.ndarray, M_grid: np.ndarray,
                     q_grid: np.ndarray, n_theta: int = 64,
                     n_diff: int = 512) -> np.ndarray:
    """Vectorized Abel inversion for a batch of gamma_1 profiles.

    gamma1 has shape (npix, nM) on a shared uniform M_grid; returns
    f0 values of shape (npix, len(q_grid)).  Linear interpolation along M
    keeps the per-pixel cost flat; adequate for the tomography pipeline
    where the FBP noise dominates.
    """
    M_grid = np.asarray(M_grid, dtype=float)
    gamma1 = np.asarray(gamma1, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid.max() > M_grid.max() * (1.0 + 1e-12):
        raise DomainTooSmall("q exceeds sampled M range")
    x, w = _leggauss(n_theta)
    t = 0.25 * math.pi * (x + 1.0)
    st = np.sin(t)
    w_eff = 0.25 * math.pi * w * st ** 3
    qf = np.linspace(0.0, float(q_grid.max()), n_diff)
    dM = M_grid[1] - M_grid[0]
    I = np.zeros((gamma1.shape[0], n_diff))
    for j in range(n_theta):
        pos = np.clip(qf * st[j] / dM, 0.0, len(M_grid) - 1.000001)
        idx = pos.astype(np.int64)
        frac = pos - idx
        vals = gamma1[:, idx] * (1.0 - frac) + gamma1[:, idx + 1] * frac
        I += w_eff[j] * vals
    I *= qf ** 3
    dI = np.gradient(I, qf, axis=1, edge_order=2)
    out = np.empty_like(I)
    out[:, 1:] = dI[:, 1:] / (2.0 * qf[1:] ** 2)
    out[:, 0] = gamma1[:, 0]
    step = qf[1] - qf[0]
    posq = np.clip(q_grid / step, 0.0, n_diff - 1.000001)
    iq = posq.astype(np.int64)
    fq = posq - iq
    return out[:, iq] * (1.0 - fq) + out[:, iq + 1] * fq
