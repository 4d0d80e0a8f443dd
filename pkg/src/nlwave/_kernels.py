"""Fused leapfrog step kernels (numba).

Each kernel advances one step of u_tt - lap(u) + f(x,u) = r on the interior:

    u_next = 2 u - u_prev + c_lap * (5-point sum) + dt2 * (r - f(x, u))

with c_lap = dt^2/dx^2, writes zero Dirichlet boundaries into u_next, and
returns max|u_next|.  The amplitude cutoff kappa(|u|^2) (quintic roll-off on
[rho, 2 rho]) costs one predictable branch per node and is inactive on
converged runs.
"""
import numpy as np
from numba import njit

_NOPT = dict(cache=True, fastmath=True)


@njit(**_NOPT)
def _kappa(p, rho):
    if p <= rho:
        return 1.0
    if p >= 2.0 * rho:
        return 0.0
    t = (p - rho) / rho
    return 1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0)


@njit(**_NOPT)
def _poly_eval(coeffs, p):
    out = 0.0
    for k in range(len(coeffs) - 1, -1, -1):
        out = out * p + coeffs[k]
    return out


@njit(**_NOPT)
def step_free_real(u, up, un, c_lap, dt2, src, has_src):
    ny, nx = u.shape
    m = 0.0
    for i in range(1, ny - 1):
        for j in range(1, nx - 1):
            lap = u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1] \
                - 4.0 * u[i, j]
            v = 2.0 * u[i, j] - up[i, j] + c_lap * lap
            if has_src:
                v += dt2 * src[i, j]
            un[i, j] = v
            a = abs(v)
            if a > m:
                m = a
    for j in range(nx):
        un[0, j] = 0.0
        un[ny - 1, j] = 0.0
    for i in range(ny):
        un[i, 0] = 0.0
        un[i, nx - 1] = 0.0
    return m


@njit(**_NOPT)
def step_free_cplx(u, up, un, c_lap, dt2, src, has_src):
    ny, nx = u.shape
    m = 0.0
    for i in range(1, ny - 1):
        for j in range(1, nx - 1):
            lap = u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1] \
                - 4.0 * u[i, j]
            v = 2.0 * u[i, j] - up[i, j] + c_lap * lap
            if has_src:
                v += dt2 * src[i, j]
            un[i, j] = v
            a = v.real * v.real + v.imag * v.imag
            if a > m:
                m = a
    for j in range(nx):
        un[0, j] = 0.0
        un[ny - 1, j] = 0.0
    for i in range(ny):
        un[i, 0] = 0.0
        un[i, nx - 1] = 0.0
    return np.sqrt(m)


@njit(**_NOPT)
def step_oddsep_real(u, up, un, alpha, coeffs, rho, c_lap, dt2, src, has_src):
    """f = alpha(x) * F0(u^2) * u with polynomial F0."""
    ny, nx = u.shape
    m = 0.0
    for i in range(1, ny - 1):
        for j in range(1, nx - 1):
            lap = u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1] \
                - 4.0 * u[i, j]
            uc = u[i, j]
            p = uc * uc
            nl = alpha[i, j] * _poly_eval(coeffs, p) * uc
            if p > rho:
                nl *= _kappa(p, rho)
            v = 2.0 * uc - up[i, j] + c_lap * lap - dt2 * nl
            if has_src:
                v += dt2 * src[i, j]
            un[i, j] = v
            a = abs(v)
            if a > m:
                m = a
    for j in range(nx):
        un[0, j] = 0.0
        un[ny - 1, j] = 0.0
    for i in range(ny):
        un[i, 0] = 0.0
        un[i, nx - 1] = 0.0
    return m


@njit(**_NOPT)
def step_oddsep_cplx(u, up, un, alpha, coeffs, rho, c_lap, dt2, src, has_src):
    """f = alpha(x) * F0(|u|^2) * u with polynomial F0, complex state."""
    ny, nx = u.shape
    m = 0.0
    for i in range(1, ny - 1):
        for j in range(1, nx - 1):
            lap = u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1] \
                - 4.0 * u[i, j]
            uc = u[i, j]
            p = uc.real * uc.real + uc.imag * uc.imag
            f0 = alpha[i, j] * _poly_eval(coeffs, p)
            if p > rho:
                f0 *= _kappa(p, rho)
            v = 2.0 * uc - up[i, j] + c_lap * lap - dt2 * f0 * uc
            if has_src:
                v += dt2 * src[i, j]
            un[i, j] = v
            a = v.real * v.real + v.imag * v.imag
            if a > m:
                m = a
    for j in range(nx):
        un[0, j] = 0.0
        un[ny - 1, j] = 0.0
    for i in range(ny):
        un[i, 0] = 0.0
        un[i, nx - 1] = 0.0
    return np.sqrt(m)


@njit(**_NOPT)
def step_poly_real(u, up, un, alphas, degrees, rho, c_lap, dt2, src, has_src):
    """f = sum_k alphas[k](x) * u^degrees[k]."""
    ny, nx = u.shape
    nterm = len(degrees)
    m = 0.0
    for i in range(1, ny - 1):
        for j in range(1, nx - 1):
            lap = u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1] \
                - 4.0 * u[i, j]
            uc = u[i, j]
            nl = 0.0
            for k in range(nterm):
                term = alphas[k, i, j]
                for _ in range(degrees[k]):
                    term *= uc
                nl += term
            p = uc * uc
            if p > rho:
                nl *= _kappa(p, rho)
            v = 2.0 * uc - up[i, j] + c_lap * lap - dt2 * nl
            if has_src:
                v += dt2 * src[i, j]
            un[i, j] = v
            a = abs(v)
            if a > m:
                m = a
    for j in range(nx):
        un[0, j] = 0.0
        un[ny - 1, j] = 0.0
    for i in range(ny):
        un[i, 0] = 0.0
        un[i, nx - 1] = 0.0
    return m


@njit(**_NOPT)
def _cubic_w(t, w):
    """Keys cubic-convolution weights (a = -1/2) for fraction t."""
    t2 = t * t
    t3 = t2 * t
    w[0] = -0.5 * t3 + t2 - 0.5 * t
    w[1] = 1.5 * t3 - 2.5 * t2 + 1.0
    w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t
    w[3] = 0.5 * t3 - 0.5 * t2


@njit(**_NOPT)
def line_integrals(vals, ymin, xmin, dy, dx, offs, nrm_x, nrm_y, dir_x,
                   dir_y, sigma0, n_s, step, weights):
    """Composite-Simpson line integrals with inline bicubic (Keys)
    sampling, zero outside the grid, for one view; offsets along the unit
    normal, integration along the unit direction."""
    ny, nx = vals.shape
    n_off = offs.shape[0]
    out = np.zeros(n_off)
    wr = np.empty(4)
    wc = np.empty(4)
    for j in range(n_off):
        px0 = offs[j] * nrm_x + sigma0 * dir_x
        py0 = offs[j] * nrm_y + sigma0 * dir_y
        acc = 0.0
        for s in range(n_s):
            px = px0 + s * step * dir_x
            py = py0 + s * step * dir_y
            col = (px - xmin) / dx
            row = (py - ymin) / dy
            if col < 1.0 or col > nx - 2.5 or row < 1.0 or row > ny - 2.5:
                # bilinear fallback near the frame, zero outside
                if col < 0.0 or col > nx - 1 or row < 0.0 or row > ny - 1:
                    continue
                c0 = int(col)
                r0 = int(row)
                if c0 >= nx - 1:
                    c0 = nx - 2
                if r0 >= ny - 1:
                    r0 = ny - 2
                fc = col - c0
                fr = row - r0
                acc += weights[s] * (
                    vals[r0, c0] * (1 - fr) * (1 - fc)
                    + vals[r0, c0 + 1] * (1 - fr) * fc
                    + vals[r0 + 1, c0] * fr * (1 - fc)
                    + vals[r0 + 1, c0 + 1] * fr * fc)
                continue
            c0 = int(col)
            r0 = int(row)
            _cubic_w(col - c0, wc)
            _cubic_w(row - r0, wr)
            v = 0.0
            for a in range(4):
                rowsum = (vals[r0 - 1 + a, c0 - 1] * wc[0]
                          + vals[r0 - 1 + a, c0] * wc[1]
                          + vals[r0 - 1 + a, c0 + 1] * wc[2]
                          + vals[r0 - 1 + a, c0 + 2] * wc[3])
                v += wr[a] * rowsum
            acc += weights[s] * v
        out[j] = acc
    return out


_warmed = False


def warm_up():
    """Compile the kernels on tiny arrays (cached on disk by numba)."""
    global _warmed
    if _warmed:
        return
    r = np.zeros((4, 4))
    c = np.zeros((4, 4), dtype=np.complex128)
    one = np.ones((4, 4))
    cf = np.array([0.0, 1.0])
    step_free_real(r, r.copy(), r.copy(), 0.5, 1e-6, r, False)
    step_free_cplx(c, c.copy(), c.copy(), 0.5, 1e-6, c, False)
    step_oddsep_real(r, r.copy(), r.copy(), one, cf, 4.0, 0.5, 1e-6, r, False)
    step_oddsep_cplx(c, c.copy(), c.copy(), one, cf, 4.0, 0.5, 1e-6, c, False)
    step_poly_real(r, r.copy(), r.copy(), one[None], np.array([2]), 4.0,
                   0.5, 1e-6, r, False)
    line_integrals(r, -1.0, -1.0, 0.5, 0.5, np.array([0.0]), 1.0, 0.0,
                   0.0, 1.0, -1.0, 5, 0.5, np.ones(5))
    _warmed = True
