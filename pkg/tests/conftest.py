import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phasepriors.operator import MeasurementOperator, make_diffuser, make_mask

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def data_dir():
    return DATA_DIR


def build_operator(h, w, alpha, seed):
    n = h * w
    return MeasurementOperator(
        diffuser=make_diffuser(n, seed),
        mask=make_mask(n, alpha, seed + 7919),
        height=h,
        width=w,
    )


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
