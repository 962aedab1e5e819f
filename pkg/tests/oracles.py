"""Independent oracles used by the test suite.

Everything here recomputes expected values from first principles (grid
search, generic numerical minimization, finite differences, direct
summation) without touching the closed forms under test.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize


def scalar_prox_objective(z, x, y, lam):
    return 0.5 * np.abs(z - x) ** 2 + 0.5 * lam * (np.abs(z) - y) ** 2


def brute_force_scalar_prox(x, y, lam, grid_step=1e-3):
    """Global minimizer of the scalar prox objective: 2-D grid + refinement.

    A multilevel grid search locates the global basin down to ``grid_step``
    (the box is guaranteed to contain the minimizer), then a generic local
    simplex search polishes the point well past 1e-7.
    """

    def best_on_grid(center, half, npts):
        re = np.linspace(center.real - half, center.real + half, npts)
        im = np.linspace(center.imag - half, center.imag + half, npts)
        grid = re[None, :] + 1j * im[:, None]
        vals = scalar_prox_objective(grid, x, y, lam)
        k = int(np.argmin(vals))
        return grid.ravel()[k], (2.0 * half) / (npts - 1)

    radius = abs(x) + abs(y) + 1.0
    z, step = best_on_grid(0j, radius, 241)
    while step > grid_step:
        z, step = best_on_grid(z, 6.0 * step, 49)

    res = minimize(
        lambda v: scalar_prox_objective(v[0] + 1j * v[1], x, y, lam),
        np.array([z.real, z.imag]),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 4000},
    )
    return res.x[0] + 1j * res.x[1]


def pack(z):
    return np.concatenate([np.real(z).ravel(), np.imag(z).ravel()])


def unpack(v, shape):
    n = v.size // 2
    return (v[:n] + 1j * v[n:]).reshape(shape)


def raw_forward(signs, x):
    """The measurement transform rebuilt from scratch: unitary FFT of signs*x."""
    return np.fft.fft2(signs.reshape(x.shape) * x, norm="ortho")


def numeric_data_prox(signs, indices, x, y, lam, seeds=12, rng=None):
    """Minimize 1/2||z-x||^2 + lam/2 || |(SFDz)| - y ||^2 by L-BFGS restarts.

    The objective and its gradient are written out here independently of
    the package; the minimization path (generic quasi-Newton from many
    starts) shares nothing with the closed-form prox.
    """
    rng = rng or np.random.default_rng(0)
    shape = x.shape

    def fun_and_jac(v):
        z = unpack(v, shape)
        u = raw_forward(signs, z).ravel()
        us = u[indices]
        amps = np.abs(us)
        val = 0.5 * np.sum(np.abs(z - x) ** 2) + 0.5 * lam * np.sum((amps - y) ** 2)
        resid = np.zeros_like(u)
        safe = np.where(amps > 0, amps, 1.0)
        resid[indices] = (amps - y) * us / safe
        back = signs.reshape(shape) * np.fft.ifft2(resid.reshape(shape), norm="ortho")
        grad = (z - x) + lam * back
        return val, pack(grad)

    best_v, best_f = None, np.inf
    starts = [pack(x)]
    for _ in range(seeds - 1):
        starts.append(pack(x) + 0.5 * rng.standard_normal(2 * x.size))
    for v0 in starts:
        res = minimize(
            fun_and_jac,
            v0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 2000, "ftol": 1e-16, "gtol": 1e-12},
        )
        if res.fun < best_f:
            best_f, best_v = res.fun, res.x
    return unpack(best_v, shape), best_f


def tv_kink_safe(p, eps, band=5e-5):
    """Pixels whose finite-difference check avoids the Huber kink.

    The Huber envelope is C1 but its second derivative jumps at gradient
    magnitude eps; central differences straddling that locus are
    inaccurate.  A pixel is safe when none of the difference magnitudes it
    touches (its own, left and upper neighbours') lies within ``band`` of eps.
    """
    p = np.asarray(p, dtype=np.float64)
    dx = np.zeros_like(p)
    dy = np.zeros_like(p)
    dx[:, :-1] = p[:, 1:] - p[:, :-1]
    dy[:-1, :] = p[1:, :] - p[:-1, :]
    near = np.abs(np.hypot(dx, dy) - eps) < band
    unsafe = near.copy()
    unsafe[:, 1:] |= near[:, :-1]
    unsafe[1:, :] |= near[:-1, :]
    return ~unsafe


def central_diff_real(fn, p, step=1e-6):
    """Gradient of fn at a real plane by central differences."""
    g = np.zeros_like(p, dtype=np.float64)
    flat = p.ravel().copy()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn(flat.reshape(p.shape))
        flat[i] = orig - step
        down = fn(flat.reshape(p.shape))
        flat[i] = orig
        g.ravel()[i] = (up - down) / (2 * step)
    return g


def central_diff_complex(fn, x, step=1e-6):
    """Gradient of a real-valued fn in (Re, Im) coordinates, as d/dRe + j d/dIm."""
    g = np.zeros_like(x, dtype=np.complex128)
    flat = x.ravel().copy()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up_re = fn(flat.reshape(x.shape))
        flat[i] = orig - step
        down_re = fn(flat.reshape(x.shape))
        flat[i] = orig + 1j * step
        up_im = fn(flat.reshape(x.shape))
        flat[i] = orig - 1j * step
        down_im = fn(flat.reshape(x.shape))
        flat[i] = orig
        g.ravel()[i] = (up_re - down_re) / (2 * step) + 1j * (up_im - down_im) / (2 * step)
    return g
