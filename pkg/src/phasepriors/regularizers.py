"""Explicit image priors and their complex magnitude/phase split.

The built-in prior is isotropic total variation with Huber smoothing so
that it has a gradient and a Lipschitz bound (plain TV has neither, and
the solver needs both to pick its step size).  Complex images are
regularized by applying a real-plane prior R twice: once to the magnitude
plane and once to the normalized phase plane arg(x)/(2*pi), with phases
taken in (-pi, pi] and no unwrapping.

Learned real-plane priors plug in through :class:`PluginRegularizer`,
either in-process (callables) or over the denoiser-bridge wire protocol
with message kind "regularizer-grad".  Plugins must pass the conformance
suite (:func:`validate_plugin`) before solvers accept them.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingCapabilityError, ParameterError

__all__ = [
    "SmoothedTV",
    "PluginRegularizer",
    "ComplexSplitRegularizer",
    "LipschitzBound",
    "tv_value",
    "tv_grad",
    "validate_plugin",
]

DEFAULT_HUBER_EPS = 1e-2
DEFAULT_MAGNITUDE_FLOOR = 1e-3


def _forward_differences(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Replicate (Neumann) boundary: the difference past the last row/column
    # is zero, as if the edge pixel were repeated.
    dx = np.zeros_like(p)
    dy = np.zeros_like(p)
    dx[:, :-1] = p[:, 1:] - p[:, :-1]
    dy[:-1, :] = p[1:, :] - p[:-1, :]
    return dx, dy


def tv_value(p: np.ndarray, huber_eps: float) -> float:
    """Huber-smoothed isotropic TV of a real plane.

    Sum over pixels of h(|grad p|) with h(t) = t^2/(2 eps) for t <= eps and
    t - eps/2 beyond, using forward differences and replicate boundary.
    Quadratic near zero keeps the gradient Lipschitz; linear tails keep the
    edge-preserving behaviour of TV.
    """
    if huber_eps <= 0:
        raise ParameterError(f"huber_eps must be > 0, got {huber_eps}")
    p = np.asarray(p, dtype=np.float64)
    dx, dy = _forward_differences(p)
    mag = np.hypot(dx, dy)
    quad = mag * mag / (2.0 * huber_eps)
    lin = mag - huber_eps / 2.0
    return float(np.sum(np.where(mag <= huber_eps, quad, lin)))


def tv_grad(p: np.ndarray, huber_eps: float) -> np.ndarray:
    """Exact gradient of :func:`tv_value` (adjoint of the differences)."""
    if huber_eps <= 0:
        raise ParameterError(f"huber_eps must be > 0, got {huber_eps}")
    p = np.asarray(p, dtype=np.float64)
    dx, dy = _forward_differences(p)
    mag = np.hypot(dx, dy)
    # h'(m)/m: 1/eps on the quadratic branch, 1/m on the linear branch.
    w = np.where(mag <= huber_eps, 1.0 / huber_eps, 1.0 / np.maximum(mag, huber_eps))
    u = w * dx
    v = w * dy
    grad = -u - v
    grad[:, 1:] += u[:, :-1]
    grad[1:, :] += v[:-1, :]
    return grad


class SmoothedTV:
    """Huber-smoothed TV as a real-plane regularizer.

    The noise parameter ``sigma`` is accepted for interface uniformity but
    ignored: TV does not adapt to noise level.
    """

    kind = "smoothed-tv"

    def __init__(self, huber_eps: float = DEFAULT_HUBER_EPS, sigma: float | None = None):
        if huber_eps <= 0:
            raise ParameterError(f"huber_eps must be > 0, got {huber_eps}")
        self.huber_eps = float(huber_eps)
        self.sigma = sigma

    def value(self, p: np.ndarray) -> float:
        return tv_value(p, self.huber_eps)

    def grad(self, p: np.ndarray) -> np.ndarray:
        return tv_grad(p, self.huber_eps)

    def lipschitz(self) -> float:
        # ||D||^2 <= 8 for the 2-D forward-difference stack, Hessian of the
        # Huber envelope bounded by 1/eps.
        return 8.0 / self.huber_eps

    def with_sigma(self, sigma: float) -> "SmoothedTV":
        return SmoothedTV(self.huber_eps, sigma=sigma)


class PluginRegularizer:
    """External real-plane prior: callables plus a declared Lipschitz bound.

    ``value_fn(plane) -> float`` and ``grad_fn(plane) -> plane`` evaluate the
    prior; ``lipschitz_const`` is the plugin author's bound on the gradient's
    Lipschitz constant (None if unknown, in which case solvers cannot derive
    a step size from it).  Run :func:`validate_plugin` before handing one to
    a solver.
    """

    kind = "external-plugin"

    def __init__(self, value_fn, grad_fn, lipschitz_const=None, sigma=None, name="plugin"):
        self.value_fn = value_fn
        self.grad_fn = grad_fn
        self.lipschitz_const = lipschitz_const
        self.sigma = sigma
        self.name = name
        self.validated = False

    def value(self, p: np.ndarray) -> float:
        return float(self.value_fn(p))

    def grad(self, p: np.ndarray) -> np.ndarray:
        g = np.asarray(self.grad_fn(p), dtype=np.float64)
        if g.shape != np.shape(p):
            raise ParameterError(
                f"plugin '{self.name}' returned gradient of shape {g.shape} "
                f"for input of shape {np.shape(p)}"
            )
        return g

    def lipschitz(self) -> float:
        if self.lipschitz_const is None:
            raise MissingCapabilityError(
                f"plugin '{self.name}' does not declare a Lipschitz bound"
            )
        return float(self.lipschitz_const)


class LipschitzBound:
    """Upper bound L on the Lipschitz constant of a regularizer gradient."""

    def __init__(self, L: float):
        if L <= 0:
            raise ParameterError(f"Lipschitz bound must be > 0, got {L}")
        self.L = float(L)

    @property
    def step_size(self) -> float:
        return 1.0 / self.L


class ComplexSplitRegularizer:
    """R(|x|) + R(arg(x)/2pi) with a magnitude floor in the phase chain rule.

    The phase-plane gradient is mapped back through d(arg)/dx, which blows
    up as 1/|x|; ``magnitude_floor`` bounds that factor so the combined
    gradient stays Lipschitz.  The returned gradient is encoded so that a
    finite difference of :meth:`value` in (Re, Im) coordinates matches it.
    """

    def __init__(self, base, magnitude_floor: float = DEFAULT_MAGNITUDE_FLOOR):
        if magnitude_floor <= 0:
            raise ParameterError(
                f"magnitude_floor must be > 0, got {magnitude_floor}"
            )
        self.base = base
        self.magnitude_floor = float(magnitude_floor)

    def _planes(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.complex128)
        return np.abs(x), np.angle(x) / (2.0 * np.pi)

    def value(self, x: np.ndarray) -> float:
        mag, ph = self._planes(x)
        return self.base.value(mag) + self.base.value(ph)

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        mag, ph = self._planes(x)
        g_mag = self.base.grad(mag)
        g_ph = self.base.grad(ph)
        unit = np.exp(1j * np.angle(x))
        radial = g_mag * unit
        tangential = (g_ph / (2.0 * np.pi * np.maximum(mag, self.magnitude_floor))) * 1j * unit
        return radial + tangential

    def lipschitz(self) -> LipschitzBound:
        """Conservative bound over both planes and the chain-rule factors.

        Magnitude extraction and re-application are 1-Lipschitz; the phase
        path contributes at most 1/(2 pi delta) on each side of the base
        gradient, hence the squared factor (floored at 1).
        """
        per_plane = self.base.lipschitz()
        phase_factor = max(1.0, 1.0 / (2.0 * np.pi * self.magnitude_floor) ** 2)
        return LipschitzBound(per_plane + per_plane * phase_factor)

    def with_sigma(self, sigma: float) -> "ComplexSplitRegularizer":
        """Same split with the base regularizer retargeted to sigma."""
        if hasattr(self.base, "with_sigma"):
            base = self.base.with_sigma(sigma)
        else:
            base = self.base
        return ComplexSplitRegularizer(base, self.magnitude_floor)


def validate_plugin(
    plugin,
    rng: np.random.Generator | None = None,
    n_checks: int = 8,
    shape: tuple[int, int] = (8, 8),
    fd_step: float = 1e-6,
    rel_tol: float = 1e-3,
) -> None:
    """Conformance suite for real-plane plugins.

    Checks nonnegativity, finiteness, gradient shape, and agreement of the
    gradient with central finite differences on random planes.  Marks the
    plugin validated on success; raises ParameterError on failure.
    """
    rng = rng or np.random.default_rng(0)
    for _ in range(n_checks):
        p = rng.random(shape)
        val = plugin.value(p)
        if not np.isfinite(val) or val < 0:
            raise ParameterError(
                f"plugin '{plugin.name}' value must be finite and >= 0, got {val}"
            )
        g = plugin.grad(p)
        if not np.all(np.isfinite(g)):
            raise ParameterError(f"plugin '{plugin.name}' gradient is not finite")
        # Probe a handful of coordinates rather than the full Jacobian.
        flat = p.ravel().copy()
        for idx in rng.choice(flat.size, size=min(6, flat.size), replace=False):
            bumped = flat.copy()
            bumped[idx] += fd_step
            up = plugin.value(bumped.reshape(shape))
            bumped[idx] -= 2 * fd_step
            down = plugin.value(bumped.reshape(shape))
            fd = (up - down) / (2 * fd_step)
            scale = max(abs(fd), abs(g.ravel()[idx]), 1e-8)
            if abs(fd - g.ravel()[idx]) / scale > rel_tol:
                raise ParameterError(
                    f"plugin '{plugin.name}' gradient disagrees with finite "
                    f"differences at index {idx}: {g.ravel()[idx]} vs {fd}"
                )
    plugin.validated = True
