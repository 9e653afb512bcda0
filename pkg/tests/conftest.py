import numpy as np
import pytest

from countgraph.geometry import Box
from countgraph.counting import Scene


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def worked_scene():
    """Two duplicate relevant boxes, one disjoint relevant box, one disjoint distractor."""
    dup = Box(0.0, 0.0, 0.2, 0.2)
    return Scene(
        boxes=(dup, dup, Box(0.5, 0.5, 0.7, 0.7), Box(0.3, 0.6, 0.4, 0.9)),
        attention=(1.0, 1.0, 1.0, 0.0),
        true_count=2,
    )
