"""Closed-form proximal operator of the amplitude data-fidelity term.

The data term is f(x) = 1/2 * || |S U x| - y ||^2 with U unitary and S a
binary sampling mask.  Its prox has a closed form built from three
ingredients, each exposed here:

* a scalar prox for 1/2 * lam * (|z| - y)^2,
* separability across masked entries (unsampled entries pass through),
* conjugation by the unitary transform.

The scalar solution keeps the phase of the input and blends magnitudes,
(|x| + lam*y) / (1 + lam).  Two conventions close the gaps the closed form
leaves open: arg(0) is taken as 0, and a negative blended magnitude
(possible only when noise makes y negative) is clamped to 0, which is the
constrained minimizer along the fixed-phase ray.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError
from .operator import (
    MeasurementOperator,
    MeasurementSet,
    SamplingMask,
    adjoint_unitary,
    apply_unitary,
)

__all__ = ["scalar_prox", "masked_prox", "data_prox"]


def _check_lambda(lam: float) -> float:
    if lam < 0:
        raise ParameterError(f"prox weight must be >= 0, got {lam}")
    return float(lam)


def scalar_prox(x: complex | np.ndarray, y, lam: float):
    """Minimize 1/2|z - x|^2 + lam/2 (|z| - y)^2 over complex z.

    Vectorized over ``x`` and ``y``.  The output keeps arg(x) (arg(0) := 0,
    i.e. the positive real axis) and has magnitude
    max((|x| + lam*y) / (1 + lam), 0).
    """
    lam = _check_lambda(lam)
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.float64)
    if lam == 0.0:
        return x if x.ndim else complex(x)
    mag = np.maximum((np.abs(x) + lam * y) / (1.0 + lam), 0.0)
    phase = np.exp(1j * np.angle(x))  # angle(0) == 0, so phase factor 1
    out = mag * phase
    return out if out.ndim else complex(out)


def masked_prox(
    x: np.ndarray,
    y: np.ndarray,
    mask: SamplingMask,
    lam: float,
) -> np.ndarray:
    """Entrywise prox on the sampled entries, identity elsewhere.

    ``x`` is a flat complex vector of length mask.n; ``y`` holds targets for
    the mask.m sampled entries only.
    """
    lam = _check_lambda(lam)
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.size != mask.n:
        raise DimensionError(f"expected flat vector of length {mask.n}")
    if y.shape != (mask.m,):
        raise DimensionError(f"expected {mask.m} targets, got shape {y.shape}")
    out = x.copy()
    out[mask.indices] = scalar_prox(x[mask.indices], y, lam)
    return out


def data_prox(
    op: MeasurementOperator,
    x: np.ndarray,
    meas: MeasurementSet,
    lam: float,
) -> np.ndarray:
    """prox of lam * f at x, computed as U^H o masked_prox o U.

    Exactly one forward and one inverse transform; no matrix is formed.
    """
    lam = _check_lambda(lam)
    if meas.m != op.mask.m:
        raise DimensionError(
            f"measurement count {meas.m} does not match mask.m = {op.mask.m}"
        )
    u = apply_unitary(op, x)
    v = masked_prox(u.ravel(), meas.y, op.mask, lam)
    return adjoint_unitary(op, v.reshape(op.shape))


def prox_objective(
    op: MeasurementOperator,
    z: np.ndarray,
    x: np.ndarray,
    meas: MeasurementSet,
    lam: float,
) -> float:
    """1/2||z - x||^2 + lam * f(z), the objective data_prox minimizes."""
    z = np.asarray(z, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    u = apply_unitary(op, z)
    amps = np.abs(u.ravel()[op.mask.indices])
    fit = 0.5 * float(np.sum((amps - meas.y) ** 2))
    return 0.5 * float(np.sum(np.abs(z - x) ** 2)) + lam * fit
