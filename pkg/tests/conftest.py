import pytest

from qsdvib import morse, qstate, units

# benchmark decoherence rate used throughout: 9e-3 Angstrom^-2 fs^-1
LAM_BENCH = units.convert_rate(9e-3, "ang^-2 fs^-1", "au")


@pytest.fixture(scope="session")
def spec():
    return morse.MorseSpec.iodine()


@pytest.fixture(scope="session")
def grid():
    return qstate.Grid.from_angstrom(1.6, 6.4, 1024)


@pytest.fixture(scope="session")
def basis(spec, grid):
    return morse.diagonalize(spec, grid.x, 60)


@pytest.fixture(scope="session")
def psi03(basis):
    return qstate.superposition(basis, 0, 3, 0.4, 0.6)
