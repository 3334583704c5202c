import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reloc.geometry import Pose, Quaternion


def random_pose(rng: np.random.Generator) -> Pose:
    q = Quaternion(*rng.standard_normal(4)).normalized()
    return Pose(q, rng.uniform(-2.0, 2.0, size=3))


def random_rotation(rng: np.random.Generator) -> Quaternion:
    return Quaternion(*rng.standard_normal(4)).normalized()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
