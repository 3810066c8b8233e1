"""Shared fixtures: hand networks with known values and a reusable suite
of random certified networks (mixed acyclic and cyclic).
"""
import numpy as np
import pytest

from attnflow import (
    GeneratorSpec,
    build_flow_network,
    balance,
    generate,
    validate,
)


@pytest.fixture
def chain_net():
    """SOURCE -> A -> B -> SINK, weight 2 everywhere; balanced as given."""
    return build_flow_network(
        {("__source__", "A"): 2, ("A", "B"): 2, ("B", "__sink__"): 2}
    )


@pytest.fixture
def star_net():
    """Hub fed 3 from the source, one unit through each of 3 leaves."""
    edges = {("__source__", "hub"): 3}
    for leaf in ("x", "y", "z"):
        edges[("hub", leaf)] = 1
        edges[(leaf, "__sink__")] = 1
    return build_flow_network(edges)


@pytest.fixture
def selfloop_net():
    """Single node with a self-loop, deliberately left unbalanced: the
    walk probabilities (0.5 loop, 0.5 out) are what the distance fixtures
    assume.
    """
    return build_flow_network(
        {("__source__", "X"): 2, ("X", "X"): 1, ("X", "__sink__"): 1}
    )


@pytest.fixture
def single_node_net():
    return build_flow_network(
        {("__source__", "X"): 5, ("X", "__sink__"): 5}
    )


def _random_specs():
    rng = np.random.default_rng(20240501)
    specs = []
    for i in range(100):
        size = int(rng.integers(20, 501))
        cyclic = i % 2 == 1
        specs.append(
            GeneratorSpec(
                family="random-cyclic",
                size=size,
                recirculation=0.3 if cyclic else 0.0,
                seed=1000 + i,
                avg_degree=float(rng.uniform(2.0, 5.0)),
            )
        )
    return specs


@pytest.fixture(scope="session")
def random_suite():
    """100 certified random networks, 20-500 nodes, alternating DAG and
    cyclic, with integer edge weights.
    """
    nets = []
    for spec in _random_specs():
        net = generate(spec)
        report = validate(net)
        assert report.certified, f"generator produced uncertified network: {spec}"
        nets.append(net)
    return nets


@pytest.fixture
def small_log_text():
    return "u1,A\nu1,B\nu1,A\nu2,A\nu2,C\nu3,B\n"


@pytest.fixture
def balanced_cyclic_net():
    """Mid-size cyclic certified network for single-network tests."""
    net = generate(
        GeneratorSpec(family="random-cyclic", size=60, recirculation=0.3, seed=7)
    )
    assert validate(net).certified
    return net
