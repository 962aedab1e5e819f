"""Structured random Fourier measurement model.

The forward model observes amplitudes of a subsampled unitary transform of
the image: a random +/-1 diffuser is applied pointwise, followed by a
unitary 2-D DFT, a Bernoulli sampling mask, the modulus, and additive
Gaussian noise.  The composite linear map U (diffuser then DFT) is unitary
by construction, so its adjoint is its inverse.  Complex images are plain
``numpy`` complex arrays of shape ``(height, width)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "Diffuser",
    "SamplingMask",
    "MeasurementOperator",
    "MeasurementSet",
    "make_diffuser",
    "make_mask",
    "apply_unitary",
    "adjoint_unitary",
    "measure",
]


@dataclass(frozen=True)
class Diffuser:
    """Random sign flips applied pointwise before the DFT.

    ``signs`` is a flat vector of +1/-1 values; ``seed`` records how it was
    generated (None for hand-built diffusers).
    """

    signs: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=np.float64)
        if signs.ndim != 1 or signs.size == 0:
            raise DimensionError("diffuser signs must be a non-empty 1-D vector")
        if not np.all(np.abs(signs) == 1.0):
            raise ParameterError("diffuser entries must be exactly +1 or -1")
        object.__setattr__(self, "signs", signs)

    @property
    def n(self) -> int:
        return self.signs.size


@dataclass(frozen=True)
class SamplingMask:
    """Bernoulli(alpha) keep/drop decision per transform coefficient."""

    keep: np.ndarray
    alpha: float
    seed: int | None = None
    m: int = field(init=False)
    indices: np.ndarray = field(init=False)

    def __post_init__(self):
        keep = np.asarray(self.keep, dtype=bool)
        if keep.ndim != 1 or keep.size == 0:
            raise DimensionError("mask must be a non-empty 1-D boolean vector")
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in (0, 1], got {self.alpha}")
        object.__setattr__(self, "keep", keep)
        object.__setattr__(self, "m", int(keep.sum()))
        object.__setattr__(self, "indices", np.flatnonzero(keep))

    @property
    def n(self) -> int:
        return self.keep.size

    def restrict(self, sub_indices: np.ndarray) -> "SamplingMask":
        """Mask keeping only the given positions within the sampled set.

        ``sub_indices`` indexes into the m sampled entries (not into the
        full length-n vector).  Used for data-term down-weighting.
        """
        keep = np.zeros(self.n, dtype=bool)
        keep[self.indices[np.asarray(sub_indices, dtype=int)]] = True
        return SamplingMask(keep=keep, alpha=self.alpha, seed=self.seed)


@dataclass(frozen=True)
class MeasurementOperator:
    """Diffuser + unitary DFT + sampling mask for a height x width grid."""

    diffuser: Diffuser
    mask: SamplingMask
    height: int
    width: int

    def __post_init__(self):
        n = self.height * self.width
        if self.height < 1 or self.width < 1:
            raise DimensionError("image dimensions must be positive")
        if self.diffuser.n != n:
            raise DimensionError(
                f"diffuser length {self.diffuser.n} != height*width = {n}"
            )
        if self.mask.n != n:
            raise DimensionError(f"mask length {self.mask.n} != height*width = {n}")

    @property
    def n(self) -> int:
        return self.height * self.width

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def sign_plane(self) -> np.ndarray:
        return self.diffuser.signs.reshape(self.height, self.width)


@dataclass(frozen=True)
class MeasurementSet:
    """Observed amplitudes at the sampled indices, stored compactly.

    ``y`` has length mask.m and is kept unclipped: Gaussian noise may push
    entries negative, which downstream proximal steps handle explicitly.
    """

    y: np.ndarray
    sigma_n: float
    alpha: float
    noise_seed: int | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 1:
            raise DimensionError("measurements must form a 1-D vector")
        if self.sigma_n < 0:
            raise ParameterError(f"sigma_n must be >= 0, got {self.sigma_n}")
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.y.size


def make_diffuser(n: int, seed: int) -> Diffuser:
    """Draw n i.i.d. signs, +1 or -1 with equal probability."""
    if n < 1:
        raise DimensionError(f"signal length must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0
    return Diffuser(signs=signs, seed=seed)


def make_mask(n: int, alpha: float, seed: int) -> SamplingMask:
    """Keep each of n indices independently with probability alpha.

    alpha = 1 keeps everything regardless of seed (uniform draws live in
    [0, 1), so the comparison is strict).
    """
    if n < 1:
        raise DimensionError(f"signal length must be >= 1, got {n}")
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    rng = np.random.default_rng(seed)
    keep = rng.random(n) < alpha
    return SamplingMask(keep=keep, alpha=float(alpha), seed=seed)


def _check_shape(op: MeasurementOperator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != op.shape:
        raise DimensionError(f"expected shape {op.shape}, got {x.shape}")
    return x.astype(np.complex128, copy=False)


def apply_unitary(op: MeasurementOperator, x: np.ndarray) -> np.ndarray:
    """U x: pointwise signs followed by the unitary 2-D DFT.

    With the orthonormal DFT convention this map preserves the l2 norm,
    which is what makes the data-term prox a pure conjugation.
    """
    x = _check_shape(op, x)
    return np.fft.fft2(op.sign_plane() * x, norm="ortho")


def adjoint_unitary(op: MeasurementOperator, z: np.ndarray) -> np.ndarray:
    """U^H z, the exact inverse of :func:`apply_unitary`."""
    z = _check_shape(op, z)
    return op.sign_plane() * np.fft.ifft2(z, norm="ortho")


def measure(
    op: MeasurementOperator,
    x: np.ndarray,
    sigma_n: float,
    noise_seed: int,
) -> MeasurementSet:
    """Observe y = |U x| at the sampled indices plus Gaussian noise.

    The noise pattern is drawn once from ``noise_seed`` and scaled by
    ``sigma_n``, so (seed, sigma_n) fully determine it and sigma_n = 0
    yields exactly the clean amplitudes.
    """
    if sigma_n < 0:
        raise ParameterError(f"sigma_n must be >= 0, got {sigma_n}")
    u = apply_unitary(op, x)
    amps = np.abs(u.ravel()[op.mask.indices])
    rng = np.random.default_rng(noise_seed)
    noise = rng.standard_normal(op.mask.m) * sigma_n
    return MeasurementSet(
        y=amps + noise,
        sigma_n=float(sigma_n),
        alpha=op.mask.alpha,
        noise_seed=noise_seed,
    )


def clean_amplitudes(op: MeasurementOperator, x: np.ndarray) -> np.ndarray:
    """|U x| restricted to the sampled indices (no noise)."""
    u = apply_unitary(op, x)
    return np.abs(u.ravel()[op.mask.indices])


def operator_provenance(op: MeasurementOperator, meas: MeasurementSet) -> dict:
    """JSON-serializable record from which the operator can be rebuilt."""
    return {
        "height": op.height,
        "width": op.width,
        "alpha": op.mask.alpha,
        "diffuser_seed": op.diffuser.seed,
        "mask_seed": op.mask.seed,
        "noise_seed": meas.noise_seed,
        "sigma_n": meas.sigma_n,
    }
