import pytest

from ttlogistic.pipeline import load_spec

# a coarse, quick configuration for end-to-end plumbing tests
SMALL = [
    "grid.nx_grid=26",
    "grid.nt=460",
    "ttopt.n=6",
    "ttopt.r_max=2",
    "ttopt.n_sweeps=2",
    "ttopt.threads=1",
    "descent.max_iter=15",
]


@pytest.fixture
def small_overrides():
    return list(SMALL)


@pytest.fixture
def small_spec():
    return load_spec(None, SMALL)
