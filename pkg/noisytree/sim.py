"""Forward sampling of tree models, the noise channels applied to samples, and empirical correlations.

Every sampler takes an explicit ``numpy.random.Generator`` and touches no other source of randomness, so a fixed seed
always reproduces the same matrix. Use `substream`_ to derive independent generators for parallel trials.
"""
import logging

import networkx as nx
import numpy as np

from . import NOISYTREE_SIM
from .exceptions import DimensionMismatch, NotPositiveDefinite, ZeroVariance
from .models import flip_probabilities

log = logging.getLogger(__name__)




def apply_ising_noise(samples, noise, rng):
    """Returns a copy of ``samples`` in which every entry of column ``j`` is sign-flipped with probability ``q_j``.

    :param samples: an n x d matrix of +1 / -1 entries
    :param noise: an IsingNoiseSpec, or a plain vector of d flip probabilities in [0, 1]
    :param rng: a numpy Generator
    :return: the noisy matrix, same dtype as ``samples``
    """
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise DimensionMismatch(f'Samples must be an n x d matrix, got shape {samples.shape}.')
    q = flip_probabilities(noise, samples.shape[1])
    flips = rng.random(samples.shape) < q
    return np.where(flips, -samples, samples).astype(samples.dtype)



def empirical_correlations(samples, centered=None):
    """Returns the d x d matrix of pairwise empirical correlations of ``samples``.

    Correlations are normalized inner products, ``sum_k y_ki y_kj / sqrt(sum_k y_ki ** 2 * sum_k y_kj ** 2)``. For
    +1 / -1 samples every column has unit second moment, so this is exactly ``(1 / n) sum_k y_ki y_kj``. The models are
    zero-mean, so columns are not centered unless ``centered`` (or ``NOISYTREE_SIM['centered']``) says otherwise.

    ..  code-block:: python

        empirical_correlations([[1, 1], [1, -1], [-1, -1]])[0, 1]  # 1 / 3

    :param samples: an n x d matrix with n >= 1
    :param centered: subtract column means first; defaults to ``NOISYTREE_SIM['centered']``
    :return: a d x d correlation matrix with unit diagonal
    """
    y = np.asarray(samples, dtype=float)
    if y.ndim != 2 or y.shape[0] < 1:
        raise DimensionMismatch(f'Samples must be an n x d matrix with n >= 1, got shape {y.shape}.')
    if NOISYTREE_SIM['centered'] if centered is None else centered:
        y = y - y.mean(axis=0)
    m = y.T @ y
    scale = np.sqrt(np.diag(m))
    if (scale == 0).any():
        raise ZeroVariance(f'Columns {(np.flatnonzero(scale == 0) + 1).tolist()} have zero empirical second moment.')
    c = np.clip(m / np.outer(scale, scale), -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return c



def sample_gaussian(model, noise, n, rng):
    """Returns ``n`` draws of ``Y = X + N``, i.e. from ``N(0, Sigma* + D*)``.

    Draws are standard normals pushed through the lower Cholesky factor of the covariance.
    """
    v = np.asarray(noise.variances, dtype=float)
    if len(v) != model.d:
        raise DimensionMismatch(f'Noise covers {len(v)} nodes, the model has {model.d}.')
    try:
        factor = np.linalg.cholesky(model.covariance + np.diag(v))
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite('The observation covariance Sigma* + D* is not positive definite.')
    return rng.standard_normal((n, model.d)) @ factor.T



def sample_ising(model, n, rng):
    """Returns ``n`` i.i.d. samples of an Ising tree model as an ``(n, d)`` int8 matrix.

    Node 1 is the root and is uniform on {-1, +1}. Walking the tree breadth-first, each child copies its parent and is
    then flipped with probability ``(1 - rho_e) / 2``, which gives it edge correlation ``rho_e`` with the parent.
    """
    d = model.d
    x = np.empty((n, d), dtype=np.int8)
    x[:, 0] = 1 - 2 * rng.integers(0, 2, size=n)
    for parent, child in nx.bfs_edges(model.tree.graph, 1):
        r = model.edge_corr[tuple(sorted((parent, child)))]
        flips = rng.random(n) < (1 - r) / 2
        x[:, child - 1] = np.where(flips, -x[:, parent - 1], x[:, parent - 1])
    return x



def substream(seed, *keys):
    """Returns the generator for the stream addressed by ``keys`` under the master ``seed``.

    Streams are ``SeedSequence(seed, spawn_key=keys)``, so the stream for a given trial never depends on which worker
    draws it or in what order.

    ..  code-block:: python

        rng = substream(2020, 3, 17)  # n-grid index 3, trial 17
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))
