"""Partial recovery of a tree, up to its equivalence class, from a correlation matrix.

The quartet pipeline runs in four stages:

1. thresholds (`thresholds_ising`_ or `thresholds_gaussian`_) fix which correlations are trusted
2. `proximal_sets`_ keeps, for every node, the nodes it is trusted to be compared with
3. `detect_clusters`_ classifies every quartet whose six pairs are all proximal and groups nodes that no such quartet
   separates into equivalence clusters
4. `assemble_tree`_ splits the cluster representatives recursively into a tree and hangs every member off its
   cluster's representative

Cluster detection reads only quartets with all six pairs proximal. Assembly prefers them and falls back to other
quartets only where no admissible one decides. The Chow-Liu baseline, `chow_liu`_, is a plain maximum-weight
spanning tree.
"""
import itertools
import logging
import math

from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np

from networkx.utils import UnionFind

from . import NOISYTREE_GUARDS, NOISYTREE_QUARTET, NOISYTREE_RECOVERY
from .exceptions import AssemblyAmbiguous, DomainError, InvalidShape, SizeGuard
from .models import correlation_matrix
from .quartets import PAIRINGS, alpha, classify_ka_batch, classify_sga_batch, quartet_correlations
from .trees import TreeStructure

log = logging.getLogger(__name__)

CLASSIFIERS = {
    'ka': classify_ka_batch,
    'sga': classify_sga_batch,
}

# row k: the position paired with each position under pairing code k (row 0 leaves every position alone)
PARTNERS = np.array([(0, 1, 2, 3), (1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)])




# CONFIGURATION
@dataclass(frozen=True)
class RecoveryConfig:
    """Everything recovery needs to know besides the correlations.

    ..  code-block:: python

        cfg = RecoveryConfig(rho_min=0.8, rho_max=0.8, noise_bound=0.2, classifier='sga')
        cfg.thresholds  # (t1, t2)

    :param rho_min: the smallest edge correlation magnitude
    :param rho_max: the largest edge correlation magnitude
    :param noise_bound: ``q_max`` for Ising models, ``S_max`` for Gaussian ones
    :param classifier: ``ka`` or ``sga``
    :param model_kind: ``ising`` or ``gaussian``
    :param threshold: when set, replaces the computed ``t2`` / ``h2`` in the proximal test
    """
    rho_min: float
    rho_max: float
    noise_bound: float = 0.0
    classifier: str = 'sga'
    model_kind: str = 'ising'
    threshold: float = None

    def __post_init__(self):
        if not 0 < self.rho_min <= self.rho_max < 1:
            raise DomainError(f'Need 0 < rho_min <= rho_max < 1, got {self.rho_min} and {self.rho_max}.')
        if self.classifier not in CLASSIFIERS:
            raise DomainError(f'Unknown classifier "{self.classifier}"; expected one of {sorted(CLASSIFIERS)}.')
        if self.model_kind == 'ising':
            if not 0 <= self.noise_bound < 0.5:
                raise DomainError(f'q_max must lie in [0, 0.5), got {self.noise_bound}.')
        elif self.model_kind == 'gaussian':
            if self.noise_bound < 0:
                raise DomainError(f'S_max must be non-negative, got {self.noise_bound}.')
        else:
            raise DomainError(f'Unknown model kind "{self.model_kind}".')
        if self.threshold is not None and self.threshold <= 0:
            raise DomainError(f'A proximal threshold must be positive, got {self.threshold}.')

    @property
    def alpha(self):
        return alpha(self.rho_max)

    @property
    def classify(self):
        return CLASSIFIERS[self.classifier]

    @property
    def proximal_threshold(self):
        return self.threshold if self.threshold is not None else self.thresholds[1]

    @property
    def thresholds(self):
        if self.model_kind == 'ising':
            return thresholds_ising(self.rho_min, self.rho_max, self.noise_bound)
        return thresholds_gaussian(self.rho_min, self.rho_max, self.noise_bound)




# TYPES
@dataclass(frozen=True)
class ClusterView:
    """Detected clusters, one representative per cluster, and (once assembled) the tree over the representatives."""
    clusters: tuple
    representatives: tuple
    rep_tree: frozenset = field(default_factory=frozenset)

    def index_of(self):
        return {i: k for k, c in enumerate(self.clusters) for i in c}



class QuartetTable:
    """Quartet verdicts for one correlation matrix, classified on first use and kept.

    Every admissible quartet (all six pairs proximal) is classified up front, since cluster detection reads them all.
    Assembly asks for further quartets through `query`_. Verdicts live in a dict keyed by the sorted 0-based node
    4-tuple, so memory follows the number of quartets read.

    ``separated[i, j]`` is True when some admissible NonStar quartet puts ``i`` and ``j`` on opposite sides.
    """
    def __init__(self, c, proximal, classify, alpha):
        d = c.shape[0]
        self.c = c
        self.proximal = proximal
        self.classify = classify
        self.alpha = alpha
        self.cache = {}
        self.separated = np.zeros((d, d), dtype=bool)
        combos = np.array(list(itertools.combinations(range(d), 4)), dtype=int).reshape(-1, 4)
        self.quartets = combos[self.admissible(combos)]
        self.codes, self.margins = self.classify_rows(self.quartets)
        for code, (pair, rest) in PAIRINGS.items():
            hit = self.quartets[self.codes == code]
            for a in pair:
                for b in rest:
                    self.separated[hit[:, a], hit[:, b]] = True
                    self.separated[hit[:, b], hit[:, a]] = True

    def __len__(self):
        return len(self.quartets)

    def admissible(self, rows):
        """Returns a boolean mask over the ``(m, 4)`` array ``rows``: True where all six pairs are proximal."""
        rows = np.asarray(rows, dtype=int).reshape(-1, 4)
        ok = np.ones(len(rows), dtype=bool)
        for a, b in itertools.combinations(range(4), 2):
            ok &= self.proximal[rows[:, a], rows[:, b]]
        return ok

    def classify_rows(self, rows):
        """Classifies sorted quartets and stores their verdicts.

        A quartet with a correlation too small to divide by reads as Star with margin 0.
        """
        codes = np.zeros(len(rows), dtype=int)
        margins = np.zeros(len(rows))
        if len(rows):
            r = quartet_correlations(self.c, rows)
            ok = (np.abs(r) >= NOISYTREE_QUARTET['eps_den']).all(axis=1)
            if ok.any():
                codes[ok], margins[ok] = self.classify(r[ok], self.alpha)
        self.cache.update(zip(map(tuple, rows.tolist()), zip(codes.tolist(), margins.tolist())))
        return codes, margins

    def query(self, rows):
        """Returns ``(codes, margins)`` for an ``(m, 4)`` array of distinct 0-based nodes, read in the order given.

        Code ``k`` pairs ``rows[i, 0]`` with ``rows[i, k]``; 0 is Star. Quartets not read before are classified in one
        batch.

        ..  code-block:: python

            codes, _ = table.query([[3, 0, 1, 2]])
            codes[0] == 3  # {4, 3} | {1, 2} on a 4-chain
        """
        rows = np.asarray(rows, dtype=int).reshape(-1, 4)
        order = np.argsort(rows, axis=1)
        keys = list(map(tuple, np.take_along_axis(rows, order, axis=1).tolist()))
        missing = sorted(set(k for k in keys if k not in self.cache))
        if missing:
            self.classify_rows(np.array(missing, dtype=int))
        found = [self.cache[k] for k in keys]
        codes = np.array([f[0] for f in found], dtype=int)
        margins = np.array([f[1] for f in found], dtype=float)
        first = (order == 0).argmax(axis=1)
        partner = PARTNERS[codes, first]
        return order[np.arange(len(rows)), partner], margins



class SplitTree:
    """Recursive assembly of the tree over cluster representatives.

    Nodes are 0-based. Any observed node may serve as a witness in a quartet, cluster members included. A verdict read
    from an admissible quartet always outranks one read from a quartet with a pair below the proximal cutoff; within
    either tier the larger margin wins. Scores are ``(tier, margin)`` tuples with tier 2 for admissible, 1 for the
    rest and ``(0, 0.0)`` for no verdict at all.

    :param c: the correlation matrix
    :param table: a QuartetTable for ``c``
    :param strength: per-node total ``|c|`` over its proximal set
    """
    def __init__(self, c, table, strength):
        self.a = np.abs(c)
        self.table = table
        self.strength = strength
        self.nodes = np.arange(c.shape[0])

    def attachment(self, side, anchors, other):
        """Returns the node of ``side`` adjacent to the other side.

        Every other node of ``side`` has the attachment point strictly between itself and the anchors across the
        split, which shows as some ``{x, w} | {y, anchor}``. The node with the weakest such evidence wins; ties go to
        the largest ``|c|`` across the cut, then to the lowest index.
        """
        if len(side) == 1:
            return side[0]
        scores = {x: self.pairs_off(x, [(y, z) for y in side if y != x for z in anchors]) for x in side}
        return self.pick(side, scores, lambda x: (self.a[x, other].max(), -x))

    def center(self, reps):
        """Returns the hub of a star: the one node never seen outside the path between two others."""
        scores = {r: self.pairs_off(r, list(itertools.combinations([s for s in reps if s != r], 2))) for r in reps}
        return self.pick(reps, scores, lambda r: (self.strength[r], -r))

    def middle(self, reps):
        """Returns the middle node of three, falling back to ``|c_xm c_my| / |c_xy|`` when witnesses do not decide."""
        scores = {r: self.pairs_off(r, [tuple(s for s in reps if s != r)]) for r in reps}

        def ratio(m):
            x, y = (s for s in reps if s != m)
            return self.a[x, m] * self.a[m, y] / self.a[x, y], -m

        return self.pick(reps, scores, ratio)

    def pairs_off(self, x, targets):
        """Scores the strongest verdict ``{x, w} | {y, z}`` over ``(y, z)`` in ``targets`` and every witness ``w``."""
        rows = []
        for y, z in targets:
            w = self.nodes[(self.nodes != x) & (self.nodes != y) & (self.nodes != z)]
            rows.append(np.column_stack([np.full(len(w), x), w, np.full(len(w), y), np.full(len(w), z)]))
        rows = np.concatenate(rows) if rows else np.zeros((0, 4), dtype=int)
        codes, margins = self.table.query(rows)
        hit = codes == 1
        if not hit.any():
            return 0, 0.0
        tier = np.where(self.table.admissible(rows[hit]), 2, 1)
        top = tier.max()
        return int(top), float(margins[hit][tier == top].max())

    def pick(self, nodes, scores, tie_break):
        low = min(scores.values())
        tied = [n for n in nodes if scores[n] == low]
        if len(tied) > 1:
            log.debug(f'Witnesses tie between nodes {[n + 1 for n in tied]}; breaking on correlations.')
        return max(tied, key=tie_break)

    def sides(self, reps, quartet):
        """Splits ``reps`` by the quartet ``{a, b} | {c, d}`` into the side holding ``a, b`` and the other."""
        a, b, c, d = quartet
        rest = [u for u in reps if u not in quartet]
        side_a, side_b = [a, b], [c, d]
        if rest:
            u = np.array(rest)
            ones = np.ones(len(u), dtype=int)
            to_c, _ = self.table.query(np.column_stack([a * ones, b * ones, u, c * ones]))
            to_d, _ = self.table.query(np.column_stack([a * ones, b * ones, u, d * ones]))
            near = self.a[u, a] * self.a[u, b] >= self.a[u, c] * self.a[u, d]
            for k, node in enumerate(rest):
                if (to_c[k] == 1) == (to_d[k] == 1):
                    far = to_c[k] == 1
                else:
                    far = not near[k]
                (side_b if far else side_a).append(node)
        return sorted(side_a), sorted(side_b)

    def split(self, reps):
        """Returns the edges of the tree over ``reps``, a sorted list of 0-based nodes."""
        if len(reps) <= 2:
            return [tuple(reps)] if len(reps) == 2 else []
        if len(reps) == 3:
            m = self.middle(reps)
            return [(m, r) for r in reps if r != m]
        quartet = self.split_quartet(reps)
        if quartet is None:
            hub = self.center(reps)
            return [(hub, r) for r in reps if r != hub]
        side_a, side_b = self.sides(reps, quartet)
        a, b, c, d = quartet
        edges = self.split(side_a) + self.split(side_b)
        edges.append((self.attachment(side_a, (c, d), side_b), self.attachment(side_b, (a, b), side_a)))
        return edges

    def split_quartet(self, reps):
        """Returns the NonStar quartet of ``reps`` with the largest margin as ``(a, b, c, d)`` for ``{a, b} | {c, d}``.

        Admissible quartets are searched first and the rest only when none of them is NonStar. Returns None when every
        quartet reads Star.
        """
        rows = np.array(list(itertools.combinations(reps, 4)), dtype=int)
        codes, margins = self.table.query(rows)
        for pool in (self.table.admissible(rows), np.ones(len(rows), dtype=bool)):
            found = np.flatnonzero(pool & (codes > 0))
            if len(found):
                i = found[margins[found].argmax()]
                k = codes[i]
                row = rows[i].tolist()
                a, b = row[0], row[k]
                c, d = (x for x in row if x not in (a, b))
                return a, b, c, d
        return None




# THRESHOLDS
def thresholds_gaussian(rho_min, rho_max, s_max):
    """Returns ``(h1, h2)`` for a Gaussian tree with additive noise.

    ``h1 = rho_min ** 4 / (1 + S_max)`` and ``h2 = min(h1, h1 / (rho_max sqrt(1 + S_max)))``.
    """
    check_bounds(rho_min, rho_max)
    if s_max < 0:
        raise DomainError(f'S_max must be non-negative, got {s_max}.')
    h1 = rho_min ** 4 / (1 + s_max)
    return h1, min(h1, h1 / (rho_max * math.sqrt(1 + s_max)))



def thresholds_ising(rho_min, rho_max, q_max):
    """Returns ``(t1, t2)`` for an Ising tree behind crossover noise bounded by ``q_max``.

    ..  code-block:: python

        thresholds_ising(0.6, 0.8, 0.2)  # (0.046656, 0.034992)

    ``t1 = (1 - 2 q_max) ** 2 rho_min ** 4`` and ``t2 = min(t1, t1 (1 - 2 q_max) / rho_max)``.
    """
    check_bounds(rho_min, rho_max)
    if not 0 <= q_max < 0.5:
        raise DomainError(f'q_max must lie in [0, 0.5), got {q_max}.')
    t1 = (1 - 2 * q_max) ** 2 * rho_min ** 4
    return t1, min(t1, t1 * (1 - 2 * q_max) / rho_max)



def check_bounds(rho_min, rho_max):
    if not 0 < rho_min <= rho_max < 1:
        raise DomainError(f'Need 0 < rho_min <= rho_max < 1, got {rho_min} and {rho_max}.')




# PIPELINE
def assemble_tree(view, c, cfg, classify=None, table=None):
    """Builds the tree over the cluster representatives and returns it with every cluster member attached.

    The representatives are split recursively:

    * one or two representatives need no decision
    * of three, the middle one is the node no witness ``w`` shows as ``{r, w} | {s, t}``; when witnesses tie, the
      middle maximizes ``|c_xm c_my| / |c_xy|``
    * of four or more, the NonStar quartet ``{a, b} | {c, d}`` with the largest margin splits them: a node ``u`` joins
      the ``c, d`` side when both ``{a, b, u, c}`` and ``{a, b, u, d}`` pair ``{a, b}`` against it, the ``a, b`` side
      when neither does, and the side it correlates with more strongly when the two disagree. Both sides are split
      again and joined by one edge between their attachment points, each the node of its side with the least
      evidence of another node standing between it and the far side. Ties go to the largest ``|c|`` across the cut.
    * when every quartet reads Star the representatives form a star around the node never shown off a path between
      two others, ties going to the largest total ``|c|`` over its proximal set

    Finally every non-representative member becomes a leaf of its representative, so a single cluster yields a star.

    :param view: the ClusterView from `detect_clusters`_
    :param c: the correlation matrix
    :param cfg: a RecoveryConfig
    :param classify: a batch classifier; defaults to ``cfg.classify``
    :param table: a QuartetTable computed earlier for the same inputs
    :return: a TreeStructure on all nodes
    """
    c = np.asarray(c, dtype=float)
    if table is None:
        table = QuartetTable(c, proximal_matrix(c, cfg.proximal_threshold), classify or cfg.classify, cfg.alpha)
    reps = sorted(r - 1 for r in view.representatives)
    strength = (np.abs(c) * table.proximal).sum(axis=1)
    links = SplitTree(c, table, strength).split(reps)
    rep_tree = set(tuple(sorted((int(x) + 1, int(y) + 1))) for x, y in links)
    if len(rep_tree) != len(reps) - 1:
        raise AssemblyAmbiguous(f'Splitting {len(reps)} representatives produced {len(rep_tree)} links.')
    edges = list(rep_tree)
    for cl, r in zip(view.clusters, view.representatives):
        edges.extend((r, i) for i in sorted(cl) if i != r)
    return TreeStructure(c.shape[0], edges)



def chow_liu(c):
    """Returns the maximum-weight spanning tree under weights ``|c_ij|``.

    For zero-field Ising and zero-mean Gaussian models, mutual information grows strictly with ``|rho|``, so this is
    the Chow-Liu tree. Equal weights are taken in lexicographic edge order.
    """
    c = np.asarray(c, dtype=float)
    d = c.shape[0]
    if d < 2:
        raise InvalidShape(f'Chow-Liu needs d >= 2, got d={d}.')
    uf = UnionFind(range(1, d + 1))
    edges = []
    for w, i, j in sorted((-abs(c[i - 1, j - 1]), i, j) for i, j in itertools.combinations(range(1, d + 1), 2)):
        if uf[i] != uf[j]:
            uf.union(i, j)
            edges.append((i, j))
    return TreeStructure(d, edges)



def detect_clusters(c, cfg, classify=None, table=None):
    """Groups nodes into equivalence clusters.

    Two nodes are kept together when they are proximal and no admissible quartet separates them. Clusters are the
    connected components of that relation, listed by smallest member. Each cluster's representative is the member
    with the largest total ``|c|`` over its proximal set (lowest label on ties).

    :param c: the correlation matrix
    :param cfg: a RecoveryConfig
    :param classify: a batch classifier; defaults to ``cfg.classify``
    :param table: a QuartetTable computed earlier for the same inputs
    :return: a ClusterView without ``rep_tree``
    """
    c = np.asarray(c, dtype=float)
    d = c.shape[0]
    if table is None:
        table = QuartetTable(c, proximal_matrix(c, cfg.proximal_threshold), classify or cfg.classify, cfg.alpha)
    proximal = table.proximal
    together = proximal & ~table.separated
    g = nx.Graph()
    g.add_nodes_from(range(d))
    g.add_edges_from(zip(*np.nonzero(np.triu(together, 1))))
    clusters = sorted((sorted(cc) for cc in nx.connected_components(g)), key=lambda cc: cc[0])
    strength = (np.abs(c) * proximal).sum(axis=1)
    reps = tuple(int(max(cc, key=lambda i: (strength[i], -i))) + 1 for cc in clusters)
    log.debug(f'{len(table)} admissible quartets, {len(clusters)} clusters.')
    return ClusterView(tuple(frozenset(i + 1 for i in cc) for cc in clusters), reps)



def prepare_correlations(c):
    """Validates the input of quartet recovery and returns it as a float array.

    :raises InvalidShape: for fewer than three nodes
    :raises SizeGuard: above ``NOISYTREE_GUARDS['recovery']`` nodes
    """
    c = correlation_matrix(c)
    d = c.shape[0]
    if d < 3:
        raise InvalidShape(f'Quartet recovery needs d >= 3, got d={d}.')
    if d > NOISYTREE_GUARDS['recovery']:
        raise SizeGuard(
            f'Quartet recovery classifies up to C(d, 4) quartets; d={d} is above the limit of '
            f'{NOISYTREE_GUARDS["recovery"]} (raise NOISYTREE_GUARDS["recovery"] to allow it).'
        )
    return c



def proximal_matrix(c, threshold):
    factor = NOISYTREE_RECOVERY['proximal_factor']
    p = np.abs(c) >= factor * threshold
    np.fill_diagonal(p, False)
    return p



def proximal_sets(c, threshold):
    """Returns ``{i: N(i)}`` where ``N(i)`` holds every ``j != i`` with ``|c_ij| >= 0.5 * threshold``.

    :param c: the correlation matrix
    :param threshold: ``t2`` (Ising) or ``h2`` (Gaussian)
    :return: a dict of sets keyed by 1-based node
    """
    if threshold <= 0:
        raise DomainError(f'A proximal threshold must be positive, got {threshold}.')
    p = proximal_matrix(np.asarray(c, dtype=float), threshold)
    return {i + 1: set((np.flatnonzero(row) + 1).tolist()) for i, row in enumerate(p)}



def recover(c, cfg):
    """Runs the full quartet pipeline and returns the estimated tree.

    This is `build`_ for a builder holding ``cfg``, so both share every stage and every check.

    ..  code-block:: python

        cfg = RecoveryConfig(0.8, 0.8, 0.2, classifier='ka')
        tree = recover(empirical_correlations(samples), cfg)

    :param c: a d x d correlation matrix, ``d >= 3``
    :param cfg: a RecoveryConfig
    :return: a TreeStructure
    """
    from .builders import TreeBuilder
    return TreeBuilder(config=cfg).build(c)



def with_rep_tree(view, tree):
    """Returns ``view`` with ``rep_tree`` filled in from an assembled ``tree``."""
    reps = set(view.representatives)
    return replace(view, rep_tree=frozenset(e for e in tree.edges if e[0] in reps and e[1] in reps))
