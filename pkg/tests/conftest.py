import numpy as np
import pytest

from slomokit.media import Frame


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def noise_frame(rng, width=64, height=64):
    return Frame(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def constant_frame(value, width=16, height=16):
    return Frame(np.full((height, width, 3), value, dtype=np.uint8))


def rolled(frame, dx, dy=0):
    return Frame(np.roll(np.roll(frame.pixels, dx, axis=1), dy, axis=0))
