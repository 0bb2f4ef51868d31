import numpy as np
import pytest

from rostf.raster import MultiBandImage


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, height=6, width=5, bands=3, lo=0.0, hi=1.0):
    data = rng.uniform(lo, hi, height * width * bands)
    return MultiBandImage(height, width, bands, data)


def operator_matrix(op):
    """Dense matrix of a linear operator, column by column."""
    cols = []
    for j in range(op.in_dim):
        e = np.zeros(op.in_dim)
        e[j] = 1.0
        cols.append(op.forward(e))
    return np.stack(cols, axis=1)
