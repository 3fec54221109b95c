import pathlib

import pytest

import guidesim as g

REPO = pathlib.Path(__file__).resolve().parent.parent
SCENARIOS = REPO / "scenarios"


@pytest.fixture(scope="session")
def two_route_cfg() -> g.ScenarioConfig:
    return g.load_scenario(SCENARIOS / "two_route.cfg")


@pytest.fixture(scope="session")
def hunting_cfg() -> g.ScenarioConfig:
    return g.load_scenario(SCENARIOS / "hunting.cfg")


@pytest.fixture(scope="session")
def two_route_net(two_route_cfg) -> g.Network:
    return g.load_network(pathlib.Path(two_route_cfg.network).read_text())


@pytest.fixture
def parallel_net() -> g.Network:
    """Two nodes joined by two parallel links (ids 1 and 2)."""
    return g.load_network(
        "link_id,from_node,to_node,length,t0,capacity,alpha,beta\n"
        "1,1,2,5.0,5,10,0.15,4\n"
        "2,1,2,5.0,5,10,0.15,4\n"
    )


@pytest.fixture
def chain_net() -> g.Network:
    """n1 -> n2 -> n3 with lengths 3 and 4."""
    return g.load_network(
        "link_id,from_node,to_node,length,t0,capacity,alpha,beta\n"
        "1,1,2,3.0,3,10,0.15,4\n"
        "2,2,3,4.0,4,10,0.15,4\n"
    )
