import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run long stochastic search tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long stochastic search test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def hex_tiling():
    """Unit hexagons tiling the plane in p1, edge-to-edge."""
    import math

    from geometry import make_regular_ngon
    from packing import Configuration
    from symmetry import CellParams, get_group

    side = math.sqrt(3.0)
    return Configuration(get_group("p1"), CellParams(side, side, 2.0 * math.pi / 3.0),
                         (0.0, 0.0), math.pi / 6.0, make_regular_ngon(6, 1.0))


@pytest.fixture
def square_tiling():
    """Unit squares (side 1) tiling the plane in p1."""
    import math

    from geometry import make_regular_ngon
    from packing import Configuration
    from symmetry import CellParams, get_group

    return Configuration(get_group("p1"), CellParams(1.0, 1.0, math.pi / 2.0),
                         (0.0, 0.0), math.pi / 4.0, make_regular_ngon(4, 1.0 / math.sqrt(2.0)))


@pytest.fixture
def disc_lattice():
    """Unit discs on the triangular lattice."""
    import math

    from geometry import make_disc
    from packing import Configuration
    from symmetry import CellParams, get_group

    return Configuration(get_group("p1"), CellParams(2.0, 2.0, math.pi / 3.0),
                         (0.0, 0.0), 0.0, make_disc(1.0))
