"""Self-contained property checks behind the `verify` CLI command.

Each check re-derives its expectation independently (finite differences,
direct summation, statistical bounds) and prints one PASS/FAIL line.
These are quick smoke versions of the full pytest suites.
"""

from __future__ import annotations

import numpy as np

from .bench import cosine_similarity, decode_image, encode_image, psnr
from .operator import (
    MeasurementOperator,
    adjoint_unitary,
    apply_unitary,
    make_diffuser,
    make_mask,
    measure,
)
from .prox import data_prox, prox_objective, scalar_prox
from .regularizers import ComplexSplitRegularizer, SmoothedTV, tv_grad, tv_value
from .solvers import PnPConfig, noise_schedule


def _random_operator(h, w, alpha, seed, rng):
    n = h * w
    return MeasurementOperator(
        diffuser=make_diffuser(n, seed),
        mask=make_mask(n, alpha, seed + 1),
        height=h,
        width=w,
    )


def check_parseval(rng) -> bool:
    for _ in range(20):
        h, w = rng.integers(2, 33, size=2)
        op = _random_operator(h, w, 1.0, int(rng.integers(2**31)), rng)
        x = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
        if abs(np.linalg.norm(apply_unitary(op, x)) - np.linalg.norm(x)) > 1e-10 * np.linalg.norm(x):
            return False
        back = adjoint_unitary(op, apply_unitary(op, x))
        if np.linalg.norm(back - x) > 1e-10 * np.linalg.norm(x):
            return False
    return True


def check_adjoint(rng) -> bool:
    for _ in range(20):
        h, w = rng.integers(2, 17, size=2)
        op = _random_operator(h, w, 1.0, int(rng.integers(2**31)), rng)
        x = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
        z = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
        lhs = np.vdot(z, apply_unitary(op, x))
        rhs = np.vdot(adjoint_unitary(op, z), x)
        if abs(lhs - rhs) > 1e-10 * max(abs(lhs), 1.0):
            return False
    return True


def check_determinism(rng) -> bool:
    seed = int(rng.integers(2**31))
    d1 = make_diffuser(256, seed)
    d2 = make_diffuser(256, seed)
    m1 = make_mask(256, 0.4, seed)
    m2 = make_mask(256, 0.4, seed)
    return np.array_equal(d1.signs, d2.signs) and np.array_equal(m1.keep, m2.keep)


def check_scalar_prox(rng) -> bool:
    # Known value: x=1, y=2, lam=1 -> midpoint of magnitudes, phase 0.
    if abs(scalar_prox(1 + 0j, 2.0, 1.0) - 1.5) > 1e-12:
        return False
    for _ in range(200):
        x = (rng.standard_normal() + 1j * rng.standard_normal()) or (1 + 0j)
        y = rng.uniform(-1, 3)
        lam = rng.uniform(0, 10)
        z = scalar_prox(x, y, lam)
        base = 0.5 * abs(z - x) ** 2 + 0.5 * lam * (abs(z) - y) ** 2
        for _ in range(10):
            dz = 1e-4 * (rng.standard_normal() + 1j * rng.standard_normal())
            val = 0.5 * abs(z + dz - x) ** 2 + 0.5 * lam * (abs(z + dz) - y) ** 2
            if val < base - 1e-12:
                return False
    return True


def check_data_prox(rng) -> bool:
    op = _random_operator(4, 4, 0.6, int(rng.integers(2**31)), rng)
    x_true = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    meas = measure(op, x_true, 0.1, int(rng.integers(2**31)))
    x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    lam = 0.8
    z = data_prox(op, x, meas, lam)
    base = prox_objective(op, z, x, meas, lam)
    for _ in range(200):
        delta = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        delta *= 1e-3 / np.linalg.norm(delta)
        if prox_objective(op, z + delta, x, meas, lam) < base - 1e-12:
            return False
    return True


def check_tv_gradient(rng) -> bool:
    eps = 1e-2
    p = rng.random((8, 8))
    g = tv_grad(p, eps)
    step = 1e-6
    for idx in rng.choice(64, size=12, replace=False):
        bump = p.ravel().copy()
        bump[idx] += step
        up = tv_value(bump.reshape(8, 8), eps)
        bump[idx] -= 2 * step
        down = tv_value(bump.reshape(8, 8), eps)
        fd = (up - down) / (2 * step)
        if abs(fd - g.ravel()[idx]) > 1e-4 * max(abs(fd), 1e-4):
            return False
    return True


def check_split_gradient(rng) -> bool:
    reg = ComplexSplitRegularizer(SmoothedTV(1e-2), magnitude_floor=1e-3)
    x = (0.5 + rng.random((6, 6))) * np.exp(1j * rng.uniform(-1.5, 1.5, (6, 6)))
    g = reg.grad(x)
    step = 1e-6
    ok = True
    for idx in rng.choice(36, size=8, replace=False):
        for part in (1.0, 1j):
            bump = x.ravel().copy()
            bump[idx] += step * part
            up = reg.value(bump.reshape(6, 6))
            bump[idx] -= 2 * step * part
            down = reg.value(bump.reshape(6, 6))
            fd = (up - down) / (2 * step)
            got = g.ravel()[idx].real if part == 1.0 else g.ravel()[idx].imag
            if abs(fd - got) > 1e-3 * max(abs(fd), 1e-4):
                ok = False
    return ok


def check_t_sequence(rng) -> bool:
    t = 1.0
    expected = [(1 + np.sqrt(5)) / 2]
    for _ in range(5):
        t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
        if expected and abs(t_next - expected[0]) > 1e-12:
            return False
        expected = []
        t = t_next
    return abs((1 + np.sqrt(5)) / 2 - 1.618034) < 1e-6


def check_noise_schedule(rng) -> bool:
    for alpha in (0.1, 0.5, 1.0):
        cfg = PnPConfig.for_alpha(alpha)
        if abs(noise_schedule(cfg, 0) - 1.0) > 1e-15:
            return False
        if abs(noise_schedule(cfg, cfg.K) - 1.0 / (1000 * alpha)) > 1e-12:
            return False
        ratios = [
            noise_schedule(cfg, k + 1) / noise_schedule(cfg, k) for k in range(0, 50)
        ]
        if max(ratios) - min(ratios) > 1e-12:
            return False
    return True


def check_encode_decode(rng) -> bool:
    p = rng.random((16, 16))
    x = encode_image(p)
    if not np.allclose(np.abs(x), 1.0, atol=1e-12):
        return False
    if np.max(np.abs(decode_image(x) - p)) > 1e-12:
        return False
    rotated = x * np.exp(1j * 0.7)
    if np.max(np.abs(decode_image(rotated, reference=x) - p)) > 1e-9:
        return False
    return abs(cosine_similarity(x, rotated) - 1.0) < 1e-12 and psnr(p, p) == float("inf")


CHECKS = [
    ("parseval-and-inversion", check_parseval),
    ("adjoint-identity", check_adjoint),
    ("seeded-determinism", check_determinism),
    ("scalar-prox-optimality", check_scalar_prox),
    ("data-prox-optimality", check_data_prox),
    ("tv-gradient-fd", check_tv_gradient),
    ("split-gradient-fd", check_split_gradient),
    ("nesterov-t-sequence", check_t_sequence),
    ("pnp-noise-schedule", check_noise_schedule),
    ("phase-encode-decode", check_encode_decode),
]


def run_property_suites(seed: int = 7) -> int:
    """Run every check; print one line each; return count of failures."""
    rng = np.random.default_rng(seed)
    failures = 0
    for name, fn in CHECKS:
        try:
            ok = fn(rng)
        except Exception as exc:
            ok = False
            print(f"FAIL {name}: raised {type(exc).__name__}: {exc}")
        else:
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    return failures
