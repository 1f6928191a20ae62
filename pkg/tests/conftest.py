import numpy as np
import pytest

import nullgraph as ng


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_operator(kind, small=True):
    """Desk-scale instances used across test modules."""
    if kind == "HadamardCS":
        return ng.HadamardCS(1, 16, 16, 64)
    if kind == "BlockAverageSR":
        return ng.BlockAverageSR(1, 8, 8, 2)
    if kind == "BayerMosaic":
        return ng.BayerMosaic(3, 8, 8)
    if kind == "GaussianBlur":
        return ng.GaussianBlur(1, 16, 16)
    raise ValueError(kind)


OPERATOR_KINDS = ("HadamardCS", "BlockAverageSR", "BayerMosaic", "GaussianBlur")
