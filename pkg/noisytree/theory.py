"""Sample-complexity bounds, the impossibility construction, and error exponents of the quartet tests."""
import itertools
import logging
import math

from dataclasses import dataclass

import numpy as np

from scipy.optimize import minimize
from scipy.special import logsumexp, softmax, xlogy

from . import NOISYTREE_EXPONENT, NOISYTREE_GUARDS
from .exceptions import DimensionMismatch, DomainError, Infeasible, NonConvergence, SizeGuard, SupportViolation
from .models import (
    IsingNoiseSpec, IsingTreeModel, ising_model, joint_distribution, noisy_joint_distribution, spin_states
)
from .quartets import alpha as quartet_alpha
from .recovery import check_bounds, thresholds_ising
from .trees import TreeStructure, enumerate_equivalence_class, make_named_tree

log = logging.getLogger(__name__)

CONSTRAINTS = ('E1', 'E2', 'E3', 'E4', 'E5', 'KA_STAR', 'SGA_STAR')

# (16, 6): the products x_i x_j of every state, pairs ordered 12 13 14 23 24 34
PAIR_PRODUCTS = spin_states(4)[:, [0, 0, 0, 1, 1, 2]] * spin_states(4)[:, [1, 2, 3, 2, 3, 3]]

SCENARIOS = {
    'chain_vs_rho': {'structure': 'chain', 'vary': 'rho', 'rho': None,
                     'grid': (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.74, 0.8)},
    'chain_vs_qmax': {'structure': 'chain', 'vary': 'q_max', 'rho': 0.74,
                      'grid': (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)},
    'star_vs_rho': {'structure': 'star', 'vary': 'rho', 'rho': None, 'grid': (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)},
    'star_vs_qmax': {'structure': 'star', 'vary': 'q_max', 'rho': 0.4,
                     'grid': (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)},
}




# BOUNDS
def necessary_samples(d, rho_min, rho_max, q_max):
    """Returns the number of samples below which no estimator can find the equivalence class with error under 1/2.

    The bound is ``log(d) / (4 (1 - rho_max) rho_q atanh(rho_q))`` with ``rho_q = (1 - 2 q_max) rho_min``, and holds
    for ``d > 32`` only, so smaller ``d`` is rejected rather than extrapolated.

    ..  code-block:: python

        necessary_samples(64, 0.5, 0.5, 0.0)  # about 7.57
    """
    if d <= 32:
        raise DomainError(f'The necessary-sample bound holds for d > 32, got d={d}.')
    check_noise(rho_min, rho_max, q_max)
    rho_q = (1 - 2 * q_max) * rho_min
    return math.log(d) / (4 * (1 - rho_max) * rho_q * math.atanh(rho_q))



def sufficient_samples_improved(d, tau, rho_min, rho_max, q_max):
    """Returns ``(2 / delta ** 2) log(d ** 2 / tau)`` with ``delta = t2 (1 - alpha) / 20``.

    With this many samples both quartet estimators find the equivalence class with probability at least
    ``1 - tau``. The bound scales as ``rho_min ** -8``.
    """
    delta = perturbation_radius(tau, rho_min, rho_max, q_max)
    return 2 / delta ** 2 * math.log(d ** 2 / tau)



def sufficient_samples_ka(d, tau, rho_min, rho_max, q_max):
    """Returns ``(128 / delta ** 2) log(6 d ** 2 / tau)`` with ``delta = t2 ** 3 (1 - alpha) / 128``.

    This is the older guarantee for the KA estimator; it scales as ``rho_min ** -24``.
    """
    check_tau(tau)
    t2 = thresholds_ising(rho_min, rho_max, q_max)[1]
    delta = t2 ** 3 * (1 - quartet_alpha(rho_max)) / 128
    return 128 / delta ** 2 * math.log(6 * d ** 2 / tau)



def perturbation_radius(tau, rho_min, rho_max, q_max):
    """Returns ``t2 (1 - alpha) / 20``, the largest correlation error under which recovery is guaranteed."""
    check_tau(tau)
    t2 = thresholds_ising(rho_min, rho_max, q_max)[1]
    return t2 * (1 - quartet_alpha(rho_max)) / 20



def check_noise(rho_min, rho_max, q_max):
    check_bounds(rho_min, rho_max)
    if not 0 <= q_max < 0.5:
        raise DomainError(f'q_max must lie in [0, 0.5), got {q_max}.')



def check_tau(tau):
    if not 0 < tau < 1:
        raise DomainError(f'tau must lie in (0, 1), got {tau}.')




# FANO FAMILY
@dataclass(frozen=True, eq=False)
class FanoFamily:
    """The ``t ** 2 + 1`` trees on ``d = 2t + 1`` nodes whose classes are pairwise disjoint yet hard to tell apart.

    ``models[0]`` is the star centered at node ``2t + 1``; ``models[k]`` moves the edge of node ``k_a`` from the center
    to node ``k_b + t``. Nodes ``1..t`` carry correlation ``rho_min`` to their parent and crossover noise ``q_max``; the
    rest carry ``rho_max`` and no noise.
    """
    t: int
    rho_min: float
    rho_max: float
    q_max: float
    models: tuple
    noise: IsingNoiseSpec

    @property
    def d(self):
        return 2 * self.t + 1

    @property
    def trees(self):
        return tuple(m.tree for m in self.models)



@dataclass(frozen=True)
class FanoReport:
    """What `verify_fano_family`_ found.

    ``exact`` holds ``J(P_k, P_0)`` for ``k = 1..M``; ``closed_form`` uses ``rho_q = (1 - 2 q_max) rho_min`` and
    ``proof_variant`` uses ``(1 - q_max) rho_min``. ``matched`` names the constants that agree with every exact value
    (``'closed_form'``, ``'proof_variant'``, both joined by ``'+'``, or ``'none'``).
    """
    disjoint: bool
    exact: tuple
    closed_form: float
    proof_variant: float
    matched: str
    max_error: float

    @property
    def ok(self):
        return self.disjoint and 'closed_form' in self.matched



def fano_family(t, rho_min, rho_max, q_max):
    """Builds the impossibility family for half-size ``t``.

    ..  code-block:: python

        f = fano_family(2, 0.5, 0.8, 0.1)
        f.trees[1].edge_list  # node 1 re-wired from the center 5 to node 3

    :param t: at least 2, and ``2t + 1`` may not exceed ``NOISYTREE_GUARDS['fano']``
    :return: a FanoFamily
    """
    if t < 2:
        raise DomainError(f'The family needs t >= 2, got t={t}.')
    limit = NOISYTREE_GUARDS['fano']
    if 2 * t + 1 > limit:
        raise SizeGuard(f'Fano families are limited to d <= {limit}, got d={2 * t + 1}.')
    check_noise(rho_min, rho_max, q_max)
    center = 2 * t + 1
    base = {(j, center): rho_min if j <= t else rho_max for j in range(1, 2 * t + 1)}
    models = [IsingTreeModel(TreeStructure(center, base), base)]
    for k in range(1, t * t + 1):
        ka, kb = 1 + (k - 1) // t, k - ((k - 1) // t) * t
        corr = dict(base)
        del corr[(ka, center)]
        corr[(ka, kb + t)] = rho_min
        models.append(IsingTreeModel(TreeStructure(center, corr), corr))
    noise = IsingNoiseSpec([q_max] * t + [0.0] * (t + 1), q_max)
    return FanoFamily(t, rho_min, rho_max, q_max, tuple(models), noise)



def symmetric_kl_closed_form(rho_min, rho_max, q_max, variant='closed_form'):
    """Returns ``2 atanh(rho_q) rho_q (1 - rho_max)``, the symmetric KL divergence between family members.

    ``variant='closed_form'`` takes ``rho_q = (1 - 2 q_max) rho_min``; ``variant='proof_variant'`` takes the
    ``(1 - q_max) rho_min`` constant, kept so the two can be compared against exact values.
    """
    check_noise(rho_min, rho_max, q_max)
    if variant == 'closed_form':
        rho_q = (1 - 2 * q_max) * rho_min
    elif variant == 'proof_variant':
        rho_q = (1 - q_max) * rho_min
    else:
        raise DomainError(f'Unknown variant "{variant}".')
    return 2 * math.atanh(rho_q) * rho_q * (1 - rho_max)



def verify_fano_family(family, tol=1e-9):
    """Checks a FanoFamily exactly and returns a FanoReport.

    Equivalence classes are enumerated and compared pairwise. For every ``k``, the noisy joints of ``P_k`` and ``P_0``
    are computed over all ``2 ** d`` states and their symmetric KL divergence compared with both closed-form
    constants.
    """
    limit = NOISYTREE_GUARDS['fano']
    if family.d > limit:
        raise SizeGuard(f'Fano verification is limited to d <= {limit}, got d={family.d}.')
    classes = [enumerate_equivalence_class(tree) for tree in family.trees]
    disjoint = all(not (a & b) for a, b in itertools.combinations(classes, 2))
    p0 = noisy_joint_distribution(joint_distribution(family.models[0]), family.noise)
    exact = []
    for m in family.models[1:]:
        pk = noisy_joint_distribution(joint_distribution(m), family.noise)
        exact.append(kl_divergence(pk, p0) + kl_divergence(p0, pk))
    forms = {
        v: symmetric_kl_closed_form(family.rho_min, family.rho_max, family.q_max, v)
        for v in ('closed_form', 'proof_variant')
    }
    errors = {v: max(abs(j - f) for j in exact) for v, f in forms.items()}
    matched = '+'.join(v for v in forms if errors[v] <= tol) or 'none'
    if 'proof_variant' not in matched:
        log.warning(
            f'Exact J={exact[0]:.12g} matches rho_q=(1-2q)rho_min ({forms["closed_form"]:.12g}), '
            f'not (1-q)rho_min ({forms["proof_variant"]:.12g}).'
        )
    if not disjoint:
        log.warning(f'Equivalence classes of the t={family.t} family overlap.')
    return FanoReport(disjoint, tuple(exact), forms['closed_form'], forms['proof_variant'], matched,
                      errors['closed_form'])




# ERROR EXPONENTS
@dataclass(frozen=True, eq=False)
class ExponentProblem:
    """Minimize ``D(Q || base)`` over distributions ``Q`` on ``{-1, +1} ** 4`` subject to one error event.

    The events, in terms of the pairing products ``p1 = r12 r34``, ``p2 = r13 r24`` and ``p3 = r14 r23`` of ``Q``:

    * ``E1``: ``p2 >= alpha p1`` with ``p1 >= 0`` (KA misses ``{1, 2}`` through its first ratio)
    * ``E2``: ``p2 <= alpha p3`` with ``p3 >= 0`` (KA misses ``{1, 2}`` through its second ratio)
    * ``E3``: ``|p2 p3| >= alpha ** 2 p1 ** 2`` (SGA calls a non-star a star)
    * ``E4``: ``|p2| >= |p1|`` and ``E5``: ``|p3| >= |p1|`` (SGA prefers a wrong pairing)
    * ``KA_STAR``: ``p2 <= alpha p1`` and ``p2 >= alpha p3``, with ``p1, p3 >= 0`` (KA calls a star ``{1, 2}``)
    * ``SGA_STAR``: ``alpha ** 2 p1 ** 2 >= |p2 p3|`` (SGA calls a star ``{1, 2}``)
    """
    base: np.ndarray
    constraint: str
    alpha: float

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        if base.shape != (16,):
            raise DimensionMismatch(f'The base distribution must have 16 entries, got {base.shape}.')
        if (base <= 0).any() or abs(base.sum() - 1) > 1e-9:
            raise DomainError('The base distribution must be strictly positive and sum to 1.')
        if self.constraint not in CONSTRAINTS:
            raise DomainError(f'Unknown constraint "{self.constraint}"; expected one of {CONSTRAINTS}.')
        object.__setattr__(self, 'base', base)

    def correlations(self, q):
        return q @ PAIR_PRODUCTS

    def residual(self, q):
        """Returns how far ``q`` is from satisfying the constraint (0 when feasible)."""
        return max(0.0, -float(constraint_values(self.constraint, self.correlations(q), self.alpha)[0].min()))



def constraint_values(tag, r, a, eps=1e-12):
    """Returns ``(g, jac)``: the constraint values (feasible when all ``>= 0``) and their gradient in the six
    correlations."""
    p1, p2, p3 = r[0] * r[5], r[1] * r[4], r[2] * r[3]
    dp = np.array([
        [r[5], 0, 0, 0, 0, r[0]],
        [0, r[4], 0, 0, r[1], 0],
        [0, 0, r[3], r[2], 0, 0],
    ])

    def sabs(x):
        s = math.sqrt(x * x + eps * eps)
        return s, x / s

    if tag == 'E1':
        g, dg = [p2 - a * p1, p1], [[-a, 1, 0], [1, 0, 0]]
    elif tag == 'E2':
        g, dg = [a * p3 - p2, p3], [[0, -1, a], [0, 0, 1]]
    elif tag == 'E3':
        s, ds = sabs(p2 * p3)
        g, dg = [s - a * a * p1 * p1], [[-2 * a * a * p1, ds * p3, ds * p2]]
    elif tag == 'E4':
        (s2, d2), (s1, d1) = sabs(p2), sabs(p1)
        g, dg = [s2 - s1], [[-d1, d2, 0]]
    elif tag == 'E5':
        (s3, d3), (s1, d1) = sabs(p3), sabs(p1)
        g, dg = [s3 - s1], [[-d1, 0, d3]]
    elif tag == 'KA_STAR':
        g, dg = [a * p1 - p2, p2 - a * p3, p1, p3], [[a, -1, 0], [0, 1, -a], [1, 0, 0], [0, 0, 1]]
    else:
        s, ds = sabs(p2 * p3)
        g, dg = [a * a * p1 * p1 - s], [[2 * a * a * p1, -ds * p3, -ds * p2]]
    return np.array(g, dtype=float), np.array(dg, dtype=float) @ dp



def error_exponent(prob, starts=None, seed=None):
    """Returns ``(value, Q)``: the smallest ``D(Q || base)`` over distributions ``Q`` in the error event of ``prob``.

    ``Q`` is parameterized as a softmax of 16 free logits. Each start minimizes the divergence plus a quadratic
    penalty on constraint violation with BFGS, raising the penalty weight through ``NOISYTREE_EXPONENT['penalties']``,
    then polishes the result with SLSQP on the constraint itself. Half the starts are drawn at random from the
    simplex and half are random perturbations of ``base``.

    If ``base`` already satisfies the constraint, the answer is ``(0, base)``. The best value must be reproduced by at
    least two starts (within ``NOISYTREE_EXPONENT['agreement']``), otherwise NonConvergence is raised; if no start
    ends within ``NOISYTREE_EXPONENT['feasibility']`` of the constraint set, Infeasible is raised.

    :param prob: an ExponentProblem
    :param starts: the number of starts, defaulting to ``NOISYTREE_EXPONENT['starts']``
    :param seed: the seed of the start generator, defaulting to ``NOISYTREE_EXPONENT['seed']``
    :return: a tuple of the exponent and the minimizing distribution
    """
    cfg = NOISYTREE_EXPONENT
    if prob.residual(prob.base) == 0:
        return 0.0, prob.base.copy()
    starts = starts or cfg['starts']
    rng = np.random.default_rng(cfg['seed'] if seed is None else seed)
    log_base = np.log(prob.base)
    g0 = np.abs(constraint_values(prob.constraint, prob.correlations(prob.base), prob.alpha)[0])
    scale = np.maximum(g0, max(1e-3 * g0.max(), 1e-12))

    def scaled(z):
        q = softmax(z)
        g, jac = constraint_values(prob.constraint, prob.correlations(q), prob.alpha)
        return q, g / scale, (jac / scale[:, None]) @ PAIR_PRODUCTS.T

    def chain(q, h):
        return q * (h - q @ h)

    def divergence(z):
        lq = z - logsumexp(z)
        q = np.exp(lq)
        return float(q @ (lq - log_base)), chain(q, lq - log_base + 1)

    def penalized(z, weight):
        f, grad = divergence(z)
        q, g, dg = scaled(z)
        short = np.minimum(g, 0)
        return f + weight * float(short @ short), grad + chain(q, 2 * weight * (short @ dg))

    values, minimizers = [], []
    for s in range(starts):
        if s % 2:
            z = log_base + rng.normal(0, 0.5, 16)
        else:
            z = np.log(rng.dirichlet(np.ones(16)))
        for weight in cfg['penalties']:
            z = minimize(penalized, z, args=(weight,), jac=True, method='BFGS',
                         options={'gtol': 1e-10, 'maxiter': 400}).x
        polished = minimize(
            divergence, z, jac=True, method='SLSQP',
            constraints=[{'type': 'ineq', 'fun': lambda x: scaled(x)[1], 'jac': lambda x: scaled(x)[2]}],
            options={'ftol': cfg['tol'] * 1e-3, 'maxiter': 500}
        )
        candidates = [polished.x, z] if np.isfinite(polished.fun) else [z]
        for x in candidates:
            q = softmax(x)
            if prob.residual(q) <= cfg['feasibility']:
                values.append(kl_divergence(q, prob.base))
                minimizers.append(q)
                break
        else:
            log.debug(f'Start {s} for {prob.constraint} ended {prob.residual(softmax(z)):.3g} from the feasible set.')
    if not values:
        raise Infeasible(f'No start reached the {prob.constraint} set (alpha={prob.alpha}).')
    best = int(np.argmin(values))
    agree = sum(abs(v - values[best]) <= cfg['agreement'] for v in values)
    log.debug(f'{prob.constraint}: best {values[best]:.6g}, {agree} of {len(values)} feasible starts agree.')
    if agree < 2:
        raise NonConvergence(
            f'The best {prob.constraint} value {values[best]:.6g} was reached by a single start out of {len(values)}.'
        )
    return max(values[best], 0.0), minimizers[best]



def exponent_curves(scenario, grid=None, **kwargs):
    """Returns rows ``(parameter, E_KA, E_SGA)`` for one of the 4-node sweeps.

    * ``chain_vs_rho`` / ``star_vs_rho``: homogeneous correlation ``rho`` over the grid, no noise
    * ``chain_vs_qmax`` (``rho = 0.74``) / ``star_vs_qmax`` (``rho = 0.4``): noise ``q_max`` on node 4 only

    ..  code-block:: python

        for rho, ka, sga in exponent_curves('chain_vs_rho', grid=[0.4, 0.74]):
            print(rho, ka, sga)

    :param scenario: a key of ``SCENARIOS``
    :param grid: the parameter values, defaulting to the scenario's own grid
    :param kwargs: passed on to `error_exponent`_
    :return: a list of tuples
    """
    if scenario not in SCENARIOS:
        raise DomainError(f'Unknown scenario "{scenario}"; expected one of {sorted(SCENARIOS)}.')
    s = SCENARIOS[scenario]
    rows = []
    for x in (s['grid'] if grid is None else grid):
        x = float(x)
        if s['vary'] == 'rho':
            rho, q = x, [0.0] * 4
        else:
            rho, q = s['rho'], [0.0, 0.0, 0.0, x]
        base = quartet_base(s['structure'], rho, q)
        a = quartet_alpha(abs(rho))
        ka = exponents_ka(base, a, s['structure'], **kwargs)['value']
        sga = exponents_sga(base, a, s['structure'], **kwargs)['value']
        log.debug(f'{scenario} at {x}: E_KA={ka:.6g}, E_SGA={sga:.6g}')
        rows.append((x, ka, sga))
    return rows



def exponents_ka(base, alpha, structure='chain', **kwargs):
    """Returns the KA error exponent of a 4-node base distribution and the events it is the minimum of.

    For a chain (true pairing ``{1, 2} | {3, 4}``) the exponent is ``min(E1, E2)``; for a star it is the ``KA_STAR``
    value, since the three wrong pairings are equally likely.
    """
    tags = ('E1', 'E2') if structure == 'chain' else ('KA_STAR',)
    return exponents(base, alpha, tags, **kwargs)



def exponents_sga(base, alpha, structure='chain', **kwargs):
    """Returns the SGA error exponent: ``min(E3, E4, E5)`` for a chain, the ``SGA_STAR`` value for a star."""
    tags = ('E3', 'E4', 'E5') if structure == 'chain' else ('SGA_STAR',)
    return exponents(base, alpha, tags, **kwargs)



def exponents(base, alpha, tags, **kwargs):
    r = {t: error_exponent(ExponentProblem(base, t, alpha), **kwargs)[0] for t in tags}
    r['value'] = min(r[t] for t in tags)
    return r



def kl_divergence(q, p):
    """Returns ``D(q || p) = sum q log(q / p)`` in nats, with ``0 log 0 = 0``.

    :param q: a probability vector
    :param p: a probability vector of the same length, positive wherever ``q`` is
    :return: a non-negative float
    """
    q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise DimensionMismatch(f'Cannot compare distributions of shapes {q.shape} and {p.shape}.')
    if ((p <= 0) & (q > 0)).any():
        raise SupportViolation('q puts mass where p has none.')
    return float(np.sum(xlogy(q, q) - xlogy(q, p)))



def quartet_base(structure, rho, q=0.0):
    """Returns the 16-state noisy joint of a homogeneous 4-node ``chain`` (``1-2-3-4``) or ``star`` (center 1).

    :param structure: ``chain`` or ``star``
    :param rho: the correlation of every edge
    :param q: one crossover probability for all nodes, or four of them
    :return: a probability vector of length 16
    """
    if structure not in ('chain', 'star'):
        raise DomainError(f'Quartet scenarios are "chain" or "star", got "{structure}".')
    q = [float(q)] * 4 if np.isscalar(q) else list(q)
    m = ising_model(make_named_tree(structure, 4), rho)
    return noisy_joint_distribution(joint_distribution(m), q)
