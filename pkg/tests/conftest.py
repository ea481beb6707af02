import numpy as np
import pytest

from dogforge import orange_slice_2d, twisted_3d


@pytest.fixture(scope="session")
def twisted_2000():
    return twisted_3d(np.pi / 2000)


@pytest.fixture(scope="session")
def twisted_20000():
    return twisted_3d(np.pi / 20000)


@pytest.fixture(scope="session")
def orange_pi2():
    return orange_slice_2d(np.pi / 2)


@pytest.fixture(scope="session")
def orange_designs():
    return [orange_slice_2d(phi) for phi in (np.pi / 4, np.pi / 2, 3 * np.pi / 4)]
