"""
tests/conftest.py
=================
Shared fixtures and the ``slow`` marker.

Acceptance-scale checks (thousands of Monte Carlo trials, exhaustive sweeps over every labeled tree on up to 8 nodes,
the exponent solver at its full number of starts) are marked ``slow`` and only run with ``pytest --runslow``.
"""
import numpy as np
import pytest

from noisytree.models import exact_correlations, ising_model, noisy_correlations
from noisytree.trees import make_named_tree


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run acceptance-scale tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale test, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def chain4():
    return make_named_tree('chain', 4)


@pytest.fixture
def chain12():
    return make_named_tree('chain', 12)


@pytest.fixture
def exact_noisy():
    """Returns a function building the noisy correlation matrix of an Ising tree."""
    def build(tree, rho, q=None):
        clean = exact_correlations(ising_model(tree, rho))
        return noisy_correlations(clean, [0.0] * tree.d if q is None else q)
    return build


@pytest.fixture
def random_parameters():
    """Returns a function drawing edge correlations in +-rho_range and crossover probabilities in [0, q_max]."""
    def draw(tree, rng, rho_range=(0.3, 0.9), q_max=0.3):
        rho = {e: float(rng.choice((-1, 1)) * rng.uniform(*rho_range)) for e in tree.edge_list}
        q = rng.uniform(0, q_max, tree.d).tolist()
        return rho, q
    return draw
