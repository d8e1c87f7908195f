import numpy as np
import pytest

from seekdecode.core.code import CodeSpec, load_code, quasi_cyclic_code

# Hamming(7,4): checks {1,2,3,5}, {1,2,4,6}, {1,3,4,7}
HAMMING_ALIST = """\
7 3
3 4
3 2 2 2 1 1 1
4 4 4
1 2 3
1 2 0
1 3 0
2 3 0
1 0 0
2 0 0
3 0 0
1 2 3 5
1 2 4 6
1 3 4 7
"""


@pytest.fixture(scope="session")
def small_code() -> CodeSpec:
    "Rate-1/2 quasi-cyclic code with n=192, k=96: big enough for belief propagation, small enough for fast tests"
    return quasi_cyclic_code(lift=8)


@pytest.fixture(scope="session")
def hamming_code() -> CodeSpec:
    return load_code(HAMMING_ALIST)


@pytest.fixture(scope="function")
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
