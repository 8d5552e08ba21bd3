import numpy as np
import pytest

from wavetok.modelio import SyntheticSpec, gen_synthetic, gen_synthetic_image
from wavetok.tokenizer import build_token_plan

DESK = SyntheticSpec(
    dim=32, blocks=2, heads=4, mlp_ratio=4, patch=8, levels=2, out_dim=16, classes=8
)


@pytest.fixture(scope="session")
def desk_model():
    params, bank = gen_synthetic(11, DESK)
    return params, bank


@pytest.fixture(scope="session")
def desk_model_f64():
    params, bank = gen_synthetic(11, DESK, dtype=np.float64)
    return params, bank


@pytest.fixture(scope="session")
def desk_plan():
    return build_token_plan(64, 64, DESK.patch, DESK.levels)


@pytest.fixture()
def rgb_image():
    return gen_synthetic_image(3, 64, 64)
