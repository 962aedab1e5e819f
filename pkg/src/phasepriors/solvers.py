"""Reconstruction solvers for the amplitude measurement model.

Four entry points:

* :func:`apgd_restart` -- accelerated proximal gradient descent with
  value-based adaptive restart, alternating a gradient step on the
  (lambda-scaled) prior with the closed-form data prox.
* :func:`continuation` -- three apgd_restart runs at decreasing prior
  noise parameter sigma (1, 1/4, 1/16), warm-started, with the data term
  down-weighted in the first run at high sampling ratios.
* :func:`pnp` -- plug-and-play iteration: denoise magnitude and phase
  planes at a geometrically decreasing sigma, then apply the data prox.
* :func:`plain_gd` -- gradient descent on the data term alone, the
  no-prior baseline.

Conventions the equations leave open: with noiseless data the prox weight
gamma/sigma_n is undefined, so sigma_n is floored (configurable, default
1e-3), which makes the data term nearly hard-constrained; the prior weight
lambda is folded into the regularizer for both the gradient step and the
default step size gamma = 1/(lambda * L).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import BridgeError, DivergenceError, ParameterError
from .operator import (
    MeasurementOperator,
    MeasurementSet,
    adjoint_unitary,
    apply_unitary,
)
from .prox import data_prox
from .regularizers import ComplexSplitRegularizer, PluginRegularizer

__all__ = [
    "APGDConfig",
    "PnPConfig",
    "RunTrace",
    "IterationRecord",
    "GaussianDenoiser",
    "apgd_restart",
    "continuation",
    "pnp",
    "noise_schedule",
    "plain_gd",
    "complex_gaussian",
    "data_fidelity",
    "CONTINUATION_SIGMAS",
]

CONTINUATION_SIGMAS = (1.0, 0.25, 0.0625)


@dataclass
class APGDConfig:
    """Hyperparameters for accelerated proximal gradient with restart.

    ``gamma=None`` derives the step from the regularizer's Lipschitz bound
    as 1/(lam * L).  ``restart_monitor`` selects what the restart test
    watches: the prior value alone ("regularizer", as printed) or the full
    objective ("objective", opt-in variant).
    """

    lam: float = 1e3
    sigma_n: float = 0.0
    sigma_floor: float = 1e-3
    gamma: float | None = None
    epsilon: float = 1e-5
    max_iters: int = 20000
    restart_monitor: str = "regularizer"

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError(f"lam must be >= 0, got {self.lam}")
        if self.sigma_n < 0:
            raise ParameterError(f"sigma_n must be >= 0, got {self.sigma_n}")
        if self.sigma_floor <= 0:
            raise ParameterError(f"sigma_floor must be > 0, got {self.sigma_floor}")
        if self.gamma is not None and self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.epsilon <= 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.restart_monitor not in ("regularizer", "objective"):
            raise ParameterError(
                f"restart_monitor must be 'regularizer' or 'objective', "
                f"got {self.restart_monitor!r}"
            )

    @property
    def effective_sigma_n(self) -> float:
        return max(self.sigma_n, self.sigma_floor)


@dataclass
class PnPConfig:
    """Hyperparameters for the plug-and-play loop."""

    K: int = 1000
    lam: float = 0.23
    sigma_n: float = 0.0
    sigma_0: float = 1.0
    sigma_K: float = 1e-3
    sigma_floor: float = 1e-3

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if not self.sigma_0 >= self.sigma_K > 0:
            raise ParameterError(
                f"need sigma_0 >= sigma_K > 0, got {self.sigma_0}, {self.sigma_K}"
            )
        if self.lam <= 0:
            raise ParameterError(f"lam must be > 0, got {self.lam}")
        if self.sigma_n < 0:
            raise ParameterError(f"sigma_n must be >= 0, got {self.sigma_n}")

    @classmethod
    def for_alpha(cls, alpha: float, **kwargs) -> "PnPConfig":
        """Final denoising level 1/(1000*alpha) per the sampling ratio."""
        if not 0.0 < alpha <= 1.0:
            raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
        return cls(sigma_K=1.0 / (1000.0 * alpha), **kwargs)

    @property
    def effective_sigma_n(self) -> float:
        return max(self.sigma_n, self.sigma_floor)


@dataclass
class IterationRecord:
    k: int
    r: float
    s: float | None = None
    sigma: float | None = None
    restart: bool = False
    t: float | None = None
    momentum_gap: float | None = None

    def to_dict(self) -> dict:
        d = {"k": self.k, "r": self.r, "restart": self.restart}
        for name in ("s", "sigma", "t", "momentum_gap"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        return d


@dataclass
class RunTrace:
    """Per-iteration log of a solver run plus its outcome."""

    records: list[IterationRecord] = field(default_factory=list)
    wall_ms: float = 0.0
    stopped_by: str = "completed"
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def restarts(self) -> int:
        return sum(1 for rec in self.records if rec.restart)

    @property
    def final_r(self) -> float:
        return self.records[-1].r if self.records else float("inf")

    def to_jsonl(self, fp) -> None:
        import json

        for rec in self.records:
            fp.write(json.dumps(rec.to_dict()) + "\n")

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "restarts": self.restarts,
            "stopped_by": self.stopped_by,
            "final_r": self.final_r,
            "wall_ms": self.wall_ms,
            **({"meta": self.meta} if self.meta else {}),
        }


def complex_gaussian(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with unit per-entry variance.

    Real and imaginary parts are each N(0, 1/2) so E|x_i|^2 = 1.
    """
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def data_fidelity(op: MeasurementOperator, x: np.ndarray, meas: MeasurementSet) -> float:
    """1/2 || |S U x| - y ||^2."""
    u = apply_unitary(op, x)
    amps = np.abs(u.ravel()[op.mask.indices])
    return 0.5 * float(np.sum((amps - meas.y) ** 2))


def _require_conformant(reg: ComplexSplitRegularizer) -> None:
    base = reg.base
    if isinstance(base, PluginRegularizer) and not base.validated:
        raise ParameterError(
            f"plugin '{base.name}' has not passed conformance validation; "
            "run regularizers.validate_plugin first"
        )


def _check_finite(x: np.ndarray, trace: RunTrace, what: str) -> None:
    if not np.all(np.isfinite(x)):
        trace.stopped_by = "diverged"
        raise DivergenceError(f"{what} became non-finite", trace=trace)


def _rel_change(x_next: np.ndarray, x: np.ndarray, trace: RunTrace) -> float:
    """||x_next - x|| / ||x_next||, treating norm overflow as divergence."""
    nrm = float(np.linalg.norm(x_next))
    diff = float(np.linalg.norm(x_next - x))
    if not (np.isfinite(nrm) and np.isfinite(diff)):
        trace.stopped_by = "diverged"
        raise DivergenceError("iterate norm overflowed", trace=trace)
    if nrm > 0:
        return diff / nrm
    return 0.0 if diff == 0.0 else float("inf")


def apgd_restart(
    op: MeasurementOperator,
    meas: MeasurementSet,
    reg: ComplexSplitRegularizer,
    cfg: APGDConfig,
    x0: np.ndarray,
) -> tuple[np.ndarray, RunTrace]:
    """Accelerated proximal gradient descent with value-based restart.

    Per iteration: x_{k+1} = prox_{gamma f / sigma_n}(z_k - gamma grad R(z_k))
    with R the lambda-scaled prior, followed by the Nesterov t-update
    t_{k+1} = (1 + sqrt(1 + 4 t_k^2))/2 and momentum extrapolation.  If the
    monitored value s increased, momentum is discarded (z <- x, t <- 1).
    Stops when the relative change r = ||x_{k+1} - x_k|| / ||x_{k+1}||
    drops to epsilon, or at max_iters.
    """
    _require_conformant(reg)
    start = time.perf_counter()
    sigma_n = cfg.effective_sigma_n
    if cfg.gamma is not None:
        gamma = cfg.gamma
    else:
        L = reg.lipschitz().L * (cfg.lam if cfg.lam > 0 else 1.0)
        gamma = 1.0 / L
    prox_weight = gamma / sigma_n

    trace = RunTrace(stopped_by="max_iters", meta={"gamma": gamma, "sigma_n": sigma_n})
    x = np.asarray(x0, dtype=np.complex128)
    z = x.copy()
    t = 1.0
    s_prev = np.inf
    r = np.inf
    k = 0
    while r > cfg.epsilon and k < cfg.max_iters:
        grad = cfg.lam * reg.grad(z)
        x_next = data_prox(op, z - gamma * grad, meas, prox_weight)
        _check_finite(x_next, trace, f"iterate {k + 1}")
        s_next = cfg.lam * reg.value(z)
        if cfg.restart_monitor == "objective":
            s_next = s_next + data_fidelity(op, z, meas) / sigma_n
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z_next = x_next + ((t - 1.0) / t_next) * (x_next - x)
        restart = bool(s_next > s_prev)
        if restart:
            z_next = x_next
            t_next = 1.0
        r = _rel_change(x_next, x, trace)
        trace.records.append(
            IterationRecord(
                k=k + 1,
                r=r,
                s=s_next,
                restart=restart,
                t=t_next,
                momentum_gap=float(np.linalg.norm(z_next - x_next)),
            )
        )
        x, z, t, s_prev = x_next, z_next, t_next, s_next
        k += 1
    if r <= cfg.epsilon:
        trace.stopped_by = "tolerance"
    trace.wall_ms = (time.perf_counter() - start) * 1e3
    return x, trace


def _subsample_measurements(
    op: MeasurementOperator,
    meas: MeasurementSet,
    rng: np.random.Generator,
) -> tuple[MeasurementOperator, MeasurementSet, dict]:
    """Keep a uniformly chosen quarter of the sampled entries."""
    m = op.mask.m
    kept = max(1, m // 4)
    chosen = np.sort(rng.choice(m, size=kept, replace=False))
    sub_mask = op.mask.restrict(chosen)
    sub_op = MeasurementOperator(
        diffuser=op.diffuser, mask=sub_mask, height=op.height, width=op.width
    )
    sub_meas = MeasurementSet(
        y=meas.y[chosen],
        sigma_n=meas.sigma_n,
        alpha=meas.alpha,
        noise_seed=meas.noise_seed,
    )
    return sub_op, sub_meas, {"kept": int(kept), "of": int(m)}


def continuation(
    op: MeasurementOperator,
    meas: MeasurementSet,
    reg_family,
    cfg: APGDConfig,
    seed: int,
) -> tuple[np.ndarray, RunTrace]:
    """Coarse-to-fine solve at sigma = 1, 1/4, 1/16 with warm starts.

    ``reg_family`` maps sigma to a ComplexSplitRegularizer (a callable, or
    an object with ``with_sigma``).  The first run starts from complex
    Gaussian noise and, when alpha > 0.25, sees only a uniformly chosen
    quarter of the sampled entries (seeded, recorded in the trace);
    the full data returns for runs two and three.
    """
    if callable(reg_family) and not hasattr(reg_family, "with_sigma"):
        make_reg = reg_family
    else:
        make_reg = reg_family.with_sigma

    rng = np.random.default_rng(seed)
    x = complex_gaussian(op.shape, rng)

    combined = RunTrace(meta={"sigmas": list(CONTINUATION_SIGMAS), "seed": seed})
    start = time.perf_counter()
    stage_iters = []
    for stage, sigma in enumerate(CONTINUATION_SIGMAS):
        stage_op, stage_meas = op, meas
        if stage == 0 and meas.alpha > 0.25:
            down_seed = int(np.random.default_rng(seed).integers(2**63))
            stage_op, stage_meas, info = _subsample_measurements(
                op, meas, np.random.default_rng(down_seed)
            )
            combined.meta["downweight"] = {"seed": down_seed, **info}
        reg = make_reg(sigma)
        x, trace = apgd_restart(stage_op, stage_meas, reg, cfg, x)
        for rec in trace.records:
            rec.sigma = sigma
            combined.records.append(rec)
        stage_iters.append(trace.iterations)
        combined.stopped_by = trace.stopped_by
    combined.meta["stage_iters"] = stage_iters
    combined.wall_ms = (time.perf_counter() - start) * 1e3
    return x, combined


def noise_schedule(cfg: PnPConfig, k: int) -> float:
    """Geometric interpolation from sigma_0 down to sigma_K at step k."""
    if not 0 <= k <= cfg.K:
        raise ParameterError(f"step index must be in [0, {cfg.K}], got {k}")
    return float(cfg.sigma_0 * (cfg.sigma_K / cfg.sigma_0) ** (k / cfg.K))


class GaussianDenoiser:
    """Built-in stand-in denoiser: Gaussian smoothing with width ~ sigma.

    Lets the full plug-and-play loop run with no external process; the
    bridge supplies the real learned denoiser.
    """

    backend = "built-in"

    def __init__(self, base_width: float = 3.0):
        if base_width <= 0:
            raise ParameterError(f"base_width must be > 0, got {base_width}")
        self.base_width = float(base_width)

    def denoise(self, plane: np.ndarray, sigma: float) -> np.ndarray:
        return gaussian_filter(np.asarray(plane, dtype=np.float64),
                               sigma=self.base_width * sigma, mode="nearest")


def denoise_complex(x: np.ndarray, den, sigma: float, iteration: int | None = None) -> np.ndarray:
    """Split x into magnitude and phase planes, denoise each, recombine.

    Planes are mapped into the [0, 1] range the denoisers expect: magnitude
    is clipped to [0, 1] (targets here have unit magnitude) and phase goes
    through arg/2pi + 1/2.  Denoised magnitudes are clamped at 0.
    """
    mag = np.clip(np.abs(x), 0.0, 1.0)
    phase01 = np.angle(x) / (2.0 * np.pi) + 0.5
    try:
        dmag = np.asarray(den.denoise(mag, sigma), dtype=np.float64)
        dphase = np.asarray(den.denoise(phase01, sigma), dtype=np.float64)
    except BridgeError:
        raise
    except Exception as exc:
        raise BridgeError(f"denoiser failed: {exc}", iteration=iteration) from exc
    for plane in (dmag, dphase):
        if plane.shape != x.shape:
            raise BridgeError(
                f"denoiser returned shape {plane.shape}, expected {x.shape}",
                iteration=iteration,
            )
        if not np.all(np.isfinite(plane)):
            raise BridgeError("denoiser returned non-finite values", iteration=iteration)
    return np.maximum(dmag, 0.0) * np.exp(1j * 2.0 * np.pi * (dphase - 0.5))


def pnp(
    op: MeasurementOperator,
    meas: MeasurementSet,
    den,
    cfg: PnPConfig,
    x0: np.ndarray,
) -> tuple[np.ndarray, RunTrace]:
    """Plug-and-play reconstruction: denoise then data prox, K times.

    Step k uses beta = lam * sigma_n^2 / sigma_k^2 and
    x_{k+1} = prox_{f/beta}(D_{sigma_k}(x_k)) with the geometric sigma
    schedule.
    """
    start = time.perf_counter()
    sigma_n = cfg.effective_sigma_n
    trace = RunTrace(stopped_by="completed", meta={"sigma_n": sigma_n, "K": cfg.K})
    x = np.asarray(x0, dtype=np.complex128)
    for k in range(cfg.K):
        sigma_k = noise_schedule(cfg, k)
        beta = cfg.lam * sigma_n * sigma_n / (sigma_k * sigma_k)
        try:
            denoised = denoise_complex(x, den, sigma_k, iteration=k)
        except BridgeError as exc:
            if exc.iteration is None:
                exc.iteration = k
            trace.stopped_by = "bridge-error"
            raise
        x_next = data_prox(op, denoised, meas, 1.0 / beta)
        _check_finite(x_next, trace, f"iterate {k + 1}")
        r = _rel_change(x_next, x, trace)
        trace.records.append(IterationRecord(k=k + 1, r=r, sigma=sigma_k))
        x = x_next
    trace.wall_ms = (time.perf_counter() - start) * 1e3
    return x, trace


def amplitude_flow_grad(
    op: MeasurementOperator, x: np.ndarray, meas: MeasurementSet
) -> np.ndarray:
    """Gradient of the data term in (Re, Im) coordinates.

    With u = U x on the sampled set, the residual u - y e^{j arg u} is
    pulled back through U^H; unsampled entries contribute nothing.
    """
    u = apply_unitary(op, x).ravel()
    res = np.zeros_like(u)
    us = u[op.mask.indices]
    res[op.mask.indices] = us - meas.y * np.exp(1j * np.angle(us))
    return adjoint_unitary(op, res.reshape(op.shape))


def plain_gd(
    op: MeasurementOperator,
    meas: MeasurementSet,
    cfg: APGDConfig,
    x0: np.ndarray,
) -> tuple[np.ndarray, RunTrace]:
    """Gradient descent on the data term alone (no prior): the baseline.

    Fixed step (cfg.gamma, default 0.5) and the same relative-change
    stopping rule as the accelerated solver.
    """
    start = time.perf_counter()
    step = cfg.gamma if cfg.gamma is not None else 0.5
    trace = RunTrace(stopped_by="max_iters", meta={"step": step})
    x = np.asarray(x0, dtype=np.complex128)
    r = np.inf
    k = 0
    while r > cfg.epsilon and k < cfg.max_iters:
        x_next = x - step * amplitude_flow_grad(op, x, meas)
        _check_finite(x_next, trace, f"iterate {k + 1}")
        r = _rel_change(x_next, x, trace)
        trace.records.append(
            IterationRecord(k=k + 1, r=r, s=data_fidelity(op, x_next, meas))
        )
        x = x_next
        k += 1
    if r <= cfg.epsilon:
        trace.stopped_by = "tolerance"
    trace.wall_ms = (time.perf_counter() - start) * 1e3
    return x, trace
