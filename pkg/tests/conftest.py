import numpy as np
import pytest

from glasskit.projection import CameraIntrinsics


@pytest.fixture
def intr():
    return CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)


@pytest.fixture
def small_intr():
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=60.0, cy=48.0, width=120, height=96)


def random_canonical_normal(rng) -> np.ndarray:
    """Uniform unit normal folded into the -z hemisphere."""
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    if v[2] > 0:
        v = -v
    return v
