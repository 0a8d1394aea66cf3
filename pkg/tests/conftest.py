import numpy as np
import pytest

from app.model.catalog import S0, SX, SZ
from app.model.lattice import HoppingTable, assemble_element, random_hopping_table
from app.model.torus import FluxTensor, TorusGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="module")
def geometry():
    return TorusGeometry((5, 5, 7), orbitals=2)


def random_element(geometry, rng, range_=1, flux=FluxTensor()):
    table = random_hopping_table(geometry.orbitals, range_, rng, hermitian=False)
    f = assemble_element(geometry, table, flux)
    return f * (1.0 / np.linalg.norm(f.matrix) * np.sqrt(geometry.dimension))


def weak_hopping_table(hop=0.05):
    """Two orbitals split by 2, coupled by a weak hop along every direction."""
    half = {(0, 0, 0): SZ}
    half.update({e: hop * (SX + 0.5j * S0) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))})
    return HoppingTable.from_half(half)
