"""Shared fixtures: one codec model and one small rendered cycle."""

import pytest

from cardioseq.codec import CodecModel
from cardioseq.synth import CycleParams, gen_cycle


@pytest.fixture(scope="session")
def model():
    return CodecModel()


@pytest.fixture(scope="session")
def clean_cycle(model):
    # 24 frames is enough for every temporal test here and keeps rendering cheap.
    return gen_cycle(CycleParams(n_frames=24, seed=3), model)
