import numpy as np
import pytest

from phasepriors.errors import DimensionError, ParameterError
from phasepriors.operator import make_mask, measure
from phasepriors.prox import data_prox, masked_prox, prox_objective, scalar_prox

from conftest import build_operator, random_complex
from oracles import (
    brute_force_scalar_prox,
    numeric_data_prox,
    scalar_prox_objective,
)


class TestScalarProx:
    def test_known_value_against_grid_oracle(self):
        # Frozen from the brute-force 2-D grid minimizer (step refined to
        # 2e-7): magnitudes 1 and 2 blend to 1.5 on the positive real axis.
        assert scalar_prox(1 + 0j, 2.0, 1.0) == pytest.approx(1.5 + 0j, abs=1e-12)
        z = brute_force_scalar_prox(1 + 0j, 2.0, 1.0)
        assert abs(z - 1.5) < 1e-5

    def test_matching_amplitude_is_fixed_point(self, rng):
        for _ in range(20):
            x = random_complex(rng, ())
            lam = rng.uniform(0, 50)
            assert scalar_prox(x, abs(x), lam) == pytest.approx(x, abs=1e-12)

    def test_lambda_zero_is_identity(self, rng):
        x = random_complex(rng, ())
        assert scalar_prox(x, 5.0, 0.0) == x

    def test_infinite_weight_forces_target_magnitude(self):
        x = 3.0 * np.exp(1j * np.pi / 4)
        z = scalar_prox(x, 0.0, 1e12)
        assert abs(z) < 1e-11

    def test_zero_input_lands_on_positive_real_axis(self):
        z = scalar_prox(0j, 2.0, 3.0)
        assert z == pytest.approx(1.5 + 0j)  # 3/(1+3) * 2 along arg 0

    def test_negative_target_clamps_at_zero(self):
        # (|x| + lam*y)/(1+lam) < 0 is possible only for y < 0; the
        # constrained minimizer along the ray sits at the origin.
        z = scalar_prox(0.5 + 0j, -2.0, 5.0)
        assert z == 0
        obj0 = scalar_prox_objective(0j, 0.5 + 0j, -2.0, 5.0)
        for t in (1e-3, 0.1, 0.5):
            assert scalar_prox_objective(t + 0j, 0.5 + 0j, -2.0, 5.0) > obj0

    def test_phase_preserved_when_output_positive(self, rng):
        for _ in range(50):
            x = random_complex(rng, ())
            y = rng.uniform(0, 3)
            lam = rng.uniform(0, 10)
            z = scalar_prox(x, y, lam)
            if abs(z) > 1e-12:
                assert np.angle(z) == pytest.approx(np.angle(x), abs=1e-12)

    def test_nonexpansive_along_common_phase(self, rng):
        # Same-phase pairs with y >= 0: the prox contracts distances.
        for _ in range(200):
            phase = np.exp(1j * rng.uniform(-np.pi, np.pi))
            x1 = rng.uniform(0, 3) * phase
            x2 = rng.uniform(0, 3) * phase
            y = rng.uniform(0, 3)
            lam = rng.uniform(0, 10)
            d_out = abs(scalar_prox(x1, y, lam) - scalar_prox(x2, y, lam))
            assert d_out <= abs(x1 - x2) + 1e-12

    def test_negative_lambda_rejected(self):
        with pytest.raises(ParameterError):
            scalar_prox(1 + 0j, 1.0, -0.5)

    def test_against_grid_oracle_batch(self, rng):
        # Smaller version of the acceptance sweep, kept here for fast runs.
        for _ in range(50):
            x = rng.uniform(0.1, 3) * np.exp(1j * rng.uniform(-np.pi, np.pi))
            y = rng.uniform(-1, 3)
            lam = 10 ** rng.uniform(-2, 2)
            got = scalar_prox(x, y, lam)
            want = brute_force_scalar_prox(x, y, lam)
            assert abs(got - want) < 1e-5


class TestMaskedProx:
    def test_empty_mask_is_identity(self, rng):
        mask = make_mask(16, 0.5, 3)
        empty = mask.restrict(np.array([], dtype=int))
        x = random_complex(rng, (16,))
        out = masked_prox(x, np.zeros(0), empty, 2.0)
        assert np.array_equal(out, x)

    def test_full_mask_lambda_zero_identity(self, rng):
        mask = make_mask(16, 1.0, 0)
        x = random_complex(rng, (16,))
        out = masked_prox(x, rng.uniform(0, 2, 16), mask, 0.0)
        assert np.array_equal(out, x)

    def test_separability_matches_scalar_calls(self, rng):
        mask = make_mask(32, 0.4, 17)
        x = random_complex(rng, (32,))
        y = rng.uniform(-0.5, 2, mask.m)
        lam = 1.7
        out = masked_prox(x, y, mask, lam)
        for pos, target in zip(mask.indices, y):
            assert out[pos] == pytest.approx(scalar_prox(x[pos], target, lam))
        untouched = np.setdiff1d(np.arange(32), mask.indices)
        assert np.array_equal(out[untouched], x[untouched])

    def test_length_mismatch(self, rng):
        mask = make_mask(16, 0.5, 3)
        with pytest.raises(DimensionError):
            masked_prox(random_complex(rng, (16,)), np.zeros(mask.m + 1), mask, 1.0)


class TestDataProx:
    def test_lambda_zero_roundtrip(self, rng):
        op = build_operator(4, 4, 0.5, 5)
        x = random_complex(rng, (4, 4))
        meas = measure(op, random_complex(rng, (4, 4)), 0.0, 1)
        out = data_prox(op, x, meas, 0.0)
        assert np.linalg.norm(out - x) < 1e-13 * np.linalg.norm(x)

    def test_consistent_measurements_fixed_point(self, rng):
        op = build_operator(6, 6, 0.7, 11)
        x = random_complex(rng, (6, 6))
        meas = measure(op, x, 0.0, 2)
        out = data_prox(op, x, meas, 3.0)
        assert np.linalg.norm(out - x) < 1e-12 * np.linalg.norm(x)

    def test_matches_numeric_minimizer(self, rng):
        # Generic quasi-Newton minimizer from 12 starts on the full-mask
        # n=16 problem lands on the same point as the closed form.
        op = build_operator(4, 4, 1.0, 23)
        x = random_complex(rng, (4, 4))
        meas = measure(op, random_complex(rng, (4, 4)), 0.05, 3)
        lam = 0.7
        z_prox = data_prox(op, x, meas, lam)
        z_num, f_num = numeric_data_prox(
            op.diffuser.signs, op.mask.indices, x, meas.y, lam, rng=rng
        )
        assert prox_objective(op, z_prox, x, meas, lam) <= f_num + 1e-9
        assert np.max(np.abs(z_num - z_prox)) < 1e-5

    def test_beats_random_perturbations(self, rng):
        op = build_operator(4, 4, 0.6, 31)
        x = random_complex(rng, (4, 4))
        meas = measure(op, random_complex(rng, (4, 4)), 0.2, 6)
        lam = 1.3
        z = data_prox(op, x, meas, lam)
        base = prox_objective(op, z, x, meas, lam)
        for _ in range(200):
            delta = random_complex(rng, (4, 4))
            delta *= 1e-3 / np.linalg.norm(delta)
            assert prox_objective(op, z + delta, x, meas, lam) >= base - 1e-12

    def test_composition_identity(self, rng):
        # data_prox must equal the inlined U^H(masked-prox(U x)) composition.
        from phasepriors.operator import adjoint_unitary, apply_unitary

        op = build_operator(5, 3, 0.5, 41)
        x = random_complex(rng, (5, 3))
        meas = measure(op, random_complex(rng, (5, 3)), 0.1, 9)
        lam = 2.2
        u = apply_unitary(op, x)
        inlined = adjoint_unitary(
            op, masked_prox(u.ravel(), meas.y, op.mask, lam).reshape(op.shape)
        )
        assert np.array_equal(data_prox(op, x, meas, lam), inlined)

    def test_shape_mismatch(self, rng):
        op = build_operator(4, 4, 0.5, 5)
        meas = measure(op, random_complex(rng, (4, 4)), 0.0, 1)
        with pytest.raises(DimensionError):
            data_prox(op, random_complex(rng, (3, 3)), meas, 1.0)
