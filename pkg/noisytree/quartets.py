"""Star / non-star classification of four nodes from their six pairwise correlations.

Both classifiers come in a batch form, working on an ``(m, 6)`` array whose columns hold the correlations of pairs
12, 13, 14, 23, 24 and 34, and a scalar form taking a 4 x 4 matrix. Batch results are pairing codes:

* ``0``: Star
* ``1``: ``{1, 2} | {3, 4}``
* ``2``: ``{1, 3} | {2, 4}``
* ``3``: ``{1, 4} | {2, 3}``

so code ``k`` pairs the first node with node ``k + 1``. Margins measure how far the deciding statistic sits from the
threshold ``alpha``; they are positive whenever the verdict was not a tie.
"""
from dataclasses import dataclass

import numpy as np

from . import NOISYTREE_QUARTET
from .exceptions import DimensionMismatch, DomainError, InsufficientCorrelation


PAIRINGS = {1: ((0, 1), (2, 3)), 2: ((0, 2), (1, 3)), 3: ((0, 3), (1, 2))}




# TYPES
@dataclass(frozen=True)
class QuartetVerdict:
    """The outcome of one quartet test.

    ``pair`` is None for a star; for a non-star it holds the two 1-based positions (within the quartet) that form the
    pair containing position 1.
    """
    code: int
    margin: float

    @property
    def is_star(self):
        return self.code == 0

    @property
    def kind(self):
        return 'star' if self.code == 0 else 'nonstar'

    @property
    def pair(self):
        return None if self.code == 0 else frozenset((1, self.code + 1))

    def __str__(self):
        if self.code == 0:
            return f'Star (margin {self.margin:.4g})'
        (a, b), (c, d) = PAIRINGS[self.code]
        return f'NonStar {{{a + 1},{b + 1}}}|{{{c + 1},{d + 1}}} (margin {self.margin:.4g})'




# FUNCTIONS
def alpha(rho_max):
    """Returns the decision threshold ``(1 + rho_max ** 2) / 2``."""
    if not 0 < rho_max < 1:
        raise DomainError(f'rho_max must lie in (0, 1), got {rho_max}.')
    return (1 + rho_max ** 2) / 2



def classify_ka(c, alpha):
    """Classifies one quartet with the signed two-ratio test.

    Three branches are tried in order, one per pairing; the branch for ``{1, 2}`` fires when
    ``r13 r24 / (r12 r34) < alpha`` and ``r13 r24 / (r14 r23) > alpha``, and the other two follow by relabeling. If no
    branch fires, the quartet is a star. Both inequalities are strict, so a statistic landing exactly on ``alpha``
    falls through to Star.

    ..  code-block:: python

        v = classify_ka(exact_4_chain_correlations, 0.82)
        v.pair  # frozenset({1, 2})

    :param c: a 4 x 4 correlation matrix
    :param alpha: the threshold
    :return: a QuartetVerdict
    """
    codes, margins = classify_ka_batch(quartet_vector(c), alpha)
    return QuartetVerdict(int(codes[0]), float(margins[0]))



def classify_ka_batch(r, alpha):
    """Batch form of `classify_ka`_; returns ``(codes, margins)``.

    The margin of a fired branch is the smaller of its two slacks; a star's margin is minus the best slack of any
    branch, i.e. how far the nearest branch was from firing.
    """
    p12, p13, p14 = products(r)
    slack = np.stack([
        np.minimum(alpha - p13 / p12, p13 / p14 - alpha),
        np.minimum(alpha - p12 / p13, p12 / p14 - alpha),
        np.minimum(alpha - p12 / p14, p12 / p13 - alpha),
    ], axis=1)
    fired = slack > 0
    codes = np.where(fired.any(axis=1), fired.argmax(axis=1) + 1, 0)
    rows = np.arange(len(codes))
    margins = np.where(codes > 0, slack[rows, np.maximum(codes - 1, 0)], -slack.max(axis=1))
    return codes, margins



def classify_sga(c, alpha):
    """Classifies one quartet with the symmetric geometric-average test.

    For each pairing, the statistic is the geometric mean of the two cross products over the pair product:
    ``v2 = sqrt|r13 r24 r14 r23| / |r12 r34|`` and likewise ``v3``, ``v4``. The smallest statistic ``v`` names the
    candidate pairing; it is declared when ``v < alpha``. Exact ties between statistics go to the smallest index.

    ..  code-block:: python

        v = classify_sga(exact_4_chain_correlations, 0.82)
        v.pair, v.margin  # frozenset({1, 2}), 0.18

    :param c: a 4 x 4 correlation matrix
    :param alpha: the threshold
    :return: a QuartetVerdict
    """
    codes, margins = classify_sga_batch(quartet_vector(c), alpha)
    return QuartetVerdict(int(codes[0]), float(margins[0]))



def classify_sga_batch(r, alpha):
    """Batch form of `classify_sga`_; returns ``(codes, margins)``."""
    p12, p13, p14 = (np.abs(p) for p in products(r))
    v = np.stack([np.sqrt(p13 * p14) / p12, np.sqrt(p12 * p14) / p13, np.sqrt(p12 * p13) / p14], axis=1)
    best = v.argmin(axis=1)
    low = v[np.arange(len(best)), best]
    nonstar = low < alpha
    return np.where(nonstar, best + 1, 0), np.where(nonstar, alpha - low, low - alpha)



def products(r):
    """Returns the three pairing products ``(r12 r34, r13 r24, r14 r23)`` of an ``(m, 6)`` array."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[1] != 6:
        raise DimensionMismatch(f'Quartet correlations must have shape (m, 6), got {r.shape}.')
    eps = NOISYTREE_QUARTET['eps_den']
    if (np.abs(r) < eps).any():
        raise InsufficientCorrelation(f'A quartet correlation is smaller than {eps} in magnitude.')
    return r[:, 0] * r[:, 5], r[:, 1] * r[:, 4], r[:, 2] * r[:, 3]



def quartet_correlations(c, quartets):
    """Gathers the ``(m, 6)`` correlation rows of ``quartets`` (an ``(m, 4)`` array of 0-based indices) from ``c``."""
    q = np.asarray(quartets, dtype=int).reshape(-1, 4)
    return np.stack([c[q[:, a], q[:, b]] for a, b in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))], axis=1)



def quartet_vector(c):
    c = np.asarray(c, dtype=float)
    if c.shape != (4, 4):
        raise DimensionMismatch(f'A quartet correlation matrix must be 4 x 4, got {c.shape}.')
    return quartet_correlations(c, [0, 1, 2, 3])
