import logging
import math

from dataclasses import dataclass, field

import numpy as np

from . import NOISYTREE_GUARDS
from .exceptions import DimensionMismatch, DomainError, NotPositiveDefinite, SizeGuard

log = logging.getLogger(__name__)




# ISING
@dataclass(frozen=True, eq=False)
class IsingTreeModel:
    """A zero-field Ising model on a tree, given by one correlation per edge.

    Marginals are uniform by construction. When ``rho_min`` / ``rho_max`` are declared, every edge must satisfy
    ``rho_min <= |rho_e| <= rho_max``; otherwise edges only need ``0 < |rho_e| < 1``. Declaring ``rho_max=1`` is the
    one way to allow perfectly correlated edges, which is handy in tests.
    """
    tree: object
    edge_corr: dict
    rho_min: float = None
    rho_max: float = None

    def __post_init__(self):
        corr = {tuple(sorted(e)): float(r) for e, r in self.edge_corr.items()}
        if set(corr) != set(self.tree.edges):
            raise DimensionMismatch(f'Edge correlations cover {sorted(corr)}, the tree has {self.tree.edge_list}.')
        lo = 0 if self.rho_min is None else self.rho_min
        hi = 1 if self.rho_max is None else self.rho_max
        for e, r in corr.items():
            if not (lo <= abs(r) <= hi) or r == 0 or (self.rho_max is None and abs(r) >= 1):
                raise DomainError(f'Edge {e} has correlation {r}, outside the declared bounds [{lo}, {hi}].')
        object.__setattr__(self, 'edge_corr', corr)

    @property
    def d(self):
        return self.tree.d



@dataclass(frozen=True, eq=False)
class IsingNoiseSpec:
    """Per-node crossover probabilities ``q_i`` with ``0 <= q_i <= q_max < 0.5``."""
    q: tuple
    q_max: float = None

    def __post_init__(self):
        q = tuple(float(x) for x in self.q)
        q_max = max(q, default=0.0) if self.q_max is None else float(self.q_max)
        if not 0 <= q_max < 0.5:
            raise DomainError(f'q_max must lie in [0, 0.5), got {q_max}.')
        for i, x in enumerate(q, 1):
            if not 0 <= x <= q_max:
                raise DomainError(f'Node {i} has crossover probability {x}, outside [0, {q_max}].')
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'q_max', q_max)

    @property
    def d(self):
        return len(self.q)



def exact_correlations(model):
    """Returns the d x d matrix of clean correlations of an Ising tree model.

    On a tree, the correlation of two nodes is the product of the edge correlations along the path joining them, so a
    walk outward from every node fills its row.
    """
    tree = model.tree
    c = np.eye(tree.d)
    for root in tree.nodes:
        stack = [(root, 0, 1.0)]
        while stack:
            i, parent, r = stack.pop()
            c[root - 1, i - 1] = r
            for j in tree.neighbors(i):
                if j != parent:
                    stack.append((j, i, r * model.edge_corr[tuple(sorted((i, j)))]))
    return c



def ising_model(tree, rho, rho_min=None, rho_max=None):
    """Returns an IsingTreeModel on ``tree``.

    ``rho`` is either a single correlation shared by every edge or a dict keyed by edge.

    ..  code-block:: python

        m = ising_model(make_named_tree('chain', 12), 0.8, rho_min=0.8, rho_max=0.8)
        exact_correlations(m)[0, 2]  # 0.64
    """
    edge_corr = dict(rho) if isinstance(rho, dict) else {e: rho for e in tree.edges}
    return IsingTreeModel(tree, edge_corr, rho_min, rho_max)



def joint_distribution(model):
    """Returns the probability of every configuration in ``{-1, +1} ** d``, ordered as in `spin_states`_.

    With node 1 uniform and every child copying its parent with probability ``(1 + rho_e) / 2``, the joint reduces to
    ``2 ** -1`` times the product over edges of ``(1 + rho_e x_i x_j) / 2``, whatever the rooting.
    """
    d = model.d
    guard_states(d, 'joint')
    x = spin_states(d)
    p = np.full(2 ** d, 0.5)
    for (i, j), r in model.edge_corr.items():
        p *= (1 + r * x[:, i - 1] * x[:, j - 1]) / 2
    return p



def noisy_correlations(clean, noise):
    """Returns the correlations seen through the sign-flip channel.

    Entry ``(i, j)`` is scaled by ``(1 - 2 q_i)(1 - 2 q_j)``; the diagonal stays at 1.

    :param clean: a d x d correlation matrix
    :param noise: an IsingNoiseSpec or a plain vector of d crossover probabilities
    :return: the noisy matrix
    """
    clean = np.asarray(clean, dtype=float)
    q = flip_probabilities(noise, clean.shape[0])
    a = 1 - 2 * q
    c = clean * np.outer(a, a)
    np.fill_diagonal(c, 1.0)
    return c



def noisy_joint_distribution(p, noise):
    """Pushes the joint ``p`` through independent per-node sign flips.

    The joint is viewed as a ``(2,) * d`` array whose axis ``i - 1`` is node ``i``; flipping node ``i`` mixes the array
    with its own mirror image along that axis.

    :param p: a probability vector of length ``2 ** d``
    :param noise: an IsingNoiseSpec or a plain vector of flip probabilities in [0, 1]
    :return: the noisy probability vector
    """
    p = np.asarray(p, dtype=float)
    d = int(round(math.log2(len(p))))
    guard_states(d, 'joint')
    if len(p) != 2 ** d:
        raise DimensionMismatch(f'A joint distribution needs 2 ** d entries, got {len(p)}.')
    q = flip_probabilities(noise, d)
    t = p.reshape((2,) * d) if d else p
    for i, qi in enumerate(q):
        if qi:
            t = (1 - qi) * t + qi * np.flip(t, axis=i)
    return t.reshape(-1)



def pairwise_expectations(p, d=None):
    """Returns the d x d matrix of ``E[X_i X_j]`` under the joint ``p``."""
    d = d or int(round(math.log2(len(p))))
    x = spin_states(d)
    return x.T @ (np.asarray(p)[:, None] * x)



def spin_states(d):
    """Returns the ``2 ** d`` configurations of ``d`` spins as rows of a ``(2 ** d, d)`` array.

    Row ``s`` assigns node ``i`` the value ``+1`` when bit ``d - i`` of ``s`` is clear, so node 1 is the most
    significant bit and reshaping a distribution to ``(2,) * d`` puts node ``i`` on axis ``i - 1``.
    """
    bits = (np.arange(2 ** d)[:, None] >> np.arange(d - 1, -1, -1)) & 1
    return 1 - 2 * bits



def theta_from_rho(rho):
    """Returns the edge interaction ``atanh(rho)`` that yields edge correlation ``rho``."""
    if abs(rho) >= 1:
        raise DomainError(f'Correlation {rho} has no finite interaction parameter.')
    return math.atanh(rho)




# GAUSSIAN
@dataclass(frozen=True, eq=False)
class GaussianTreeModel:
    """A zero-mean Gaussian tree whose precision has unit diagonal and weight ``w`` on every tree edge."""
    tree: object
    w: float
    precision: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    correlation: np.ndarray = field(repr=False)

    @property
    def d(self):
        return self.tree.d

    @property
    def bounds(self):
        """``(rho_min, rho_max)``: the smallest and largest ``|K*_ij|`` over tree edges."""
        r = [abs(self.correlation[i - 1, j - 1]) for i, j in self.tree.edges]
        return min(r), max(r)



@dataclass(frozen=True, eq=False)
class GaussianNoiseSpec:
    """Additive noise variances, the diagonal of ``D*``."""
    variances: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in self.variances)
        for i, x in enumerate(v, 1):
            if x < 0:
                raise DomainError(f'Node {i} has negative noise variance {x}.')
        object.__setattr__(self, 'variances', v)

    @property
    def d(self):
        return len(self.variances)



def gaussian_model(tree, w):
    """Builds the Gaussian tree model with precision ``I + w * A`` for the tree's adjacency matrix ``A``.

    ..  code-block:: python

        m = gaussian_model(make_named_tree('chain', 10), 0.5)
        m.bounds  # rho_max close to 0.8

    :param tree: a TreeStructure
    :param w: the off-diagonal precision weight
    :return: a GaussianTreeModel
    """
    precision = np.eye(tree.d)
    for i, j in tree.edges:
        precision[i - 1, j - 1] = precision[j - 1, i - 1] = w
    try:
        np.linalg.cholesky(precision)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f'w={w} makes the precision matrix of {tree} indefinite.')
    covariance = np.linalg.inv(precision)
    covariance = (covariance + covariance.T) / 2
    return GaussianTreeModel(tree, float(w), precision, covariance, normalize_covariance(covariance))



def gaussian_bounds(model):
    """Returns ``(rho_min, rho_max)`` read off the model's correlation matrix over tree edges."""
    return model.bounds



def gaussian_noisy_correlations(model, noise):
    """Returns the correlation matrix of the observations ``Y = X + N``, i.e. of ``Sigma* + D*``."""
    v = np.asarray(noise.variances, dtype=float)
    if len(v) != model.d:
        raise DimensionMismatch(f'Noise covers {len(v)} nodes, the model has {model.d}.')
    return normalize_covariance(model.covariance + np.diag(v))



def noise_ratios(model, noise):
    """Returns ``S_i = sigma_i ** 2 / E[X_i ** 2]`` for every node."""
    v = np.asarray(noise.variances, dtype=float)
    if len(v) != model.d:
        raise DimensionMismatch(f'Noise covers {len(v)} nodes, the model has {model.d}.')
    return v / np.diag(model.covariance)



def max_noise_ratio(model, noise):
    """Returns ``S_max``, the largest of the `noise_ratios`_."""
    return float(noise_ratios(model, noise).max())



def normalize_covariance(cov):
    s = 1 / np.sqrt(np.diag(cov))
    c = cov * np.outer(s, s)
    np.fill_diagonal(c, 1.0)
    return c




# HELPERS
def correlation_matrix(values):
    """Returns ``values`` as a validated correlation matrix (a float ndarray).

    The matrix must be square and symmetric, with a unit diagonal and every entry in [-1, 1].
    """
    c = np.array(values, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimensionMismatch(f'A correlation matrix must be square, got shape {c.shape}.')
    if not np.allclose(c, c.T, atol=1e-12) or not np.allclose(np.diag(c), 1) or np.abs(c).max() > 1 + 1e-12:
        raise DomainError('Correlation matrices must be symmetric with unit diagonal and entries in [-1, 1].')
    return c



def flip_probabilities(noise, d):
    q = np.asarray(getattr(noise, 'q', noise), dtype=float)
    if q.shape != (d,):
        raise DimensionMismatch(f'Noise covers {q.size} nodes, expected {d}.')
    if ((q < 0) | (q > 1)).any():
        raise DomainError(f'Flip probabilities must lie in [0, 1], got {q.tolist()}.')
    return q



def guard_states(d, key):
    limit = NOISYTREE_GUARDS[key]
    if d > limit:
        raise SizeGuard(f'Explicit distributions over 2 ** d states are limited to d <= {limit}, got d={d}.')



def noise_pattern(d, kind, value=0.0):
    """Returns a per-node noise vector of one of the experiment patterns.

    ..  code-block:: python

        noise_pattern(6, 'odd', 0.2)  # [0.2, 0.0, 0.2, 0.0, 0.2, 0.0]
        noise_pattern(4, 'custom', [0, 0, 0, 0.1])

    :param d: the node count
    :param kind: ``none``, ``odd`` (nodes 1, 3, 5, ...), ``even`` (nodes 2, 4, ...) or ``custom``
    :param value: the noise level, or for ``custom`` the full vector
    :return: a list of d floats
    """
    if kind == 'none':
        return [0.0] * d
    if kind in ('odd', 'even'):
        r = 1 if kind == 'odd' else 0
        return [float(value) if i % 2 == r else 0.0 for i in range(1, d + 1)]
    if kind == 'custom':
        v = [float(x) for x in value]
        if len(v) != d:
            raise DimensionMismatch(f'Custom noise has {len(v)} entries, expected {d}.')
        return v
    raise DomainError(f'Unknown noise pattern "{kind}".')
