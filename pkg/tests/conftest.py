import pytest

from rgflow import lattice
from rgflow.decomp import WindowProfile, build_decomposition
from rgflow.lattice import TorusSpec


@pytest.fixture(autouse=True)
def _default_sign():
    lattice.set_laplacian_sign(-1)
    yield
    lattice.set_laplacian_sign(-1)


@pytest.fixture(scope="session")
def dec_small():
    """Massless d=4, L=2, N=5 decomposition with the default window."""
    return build_decomposition(TorusSpec(4, 2, 5), 0.0, WindowProfile())


@pytest.fixture(scope="session")
def dec_small_massive():
    return build_decomposition(TorusSpec(4, 2, 5), 1.0 / 64, WindowProfile())


@pytest.fixture(scope="session")
def table_small(dec_small):
    from rgflow.coeffs import coefficient_table

    return coefficient_table(dec_small, (4, 0, 0, 0))
