import itertools
import math

from dataclasses import dataclass
from functools import cached_property

import networkx as nx

from . import NOISYTREE_GUARDS
from .exceptions import DimensionMismatch, InvalidShape, SizeGuard




# TYPES
@dataclass(frozen=True)
class TreeStructure:
    """A labeled tree on nodes ``1..d``.

    Edges are stored as sorted pairs in a frozenset, so two trees compare equal exactly when they share a node count
    and an edge set, and instances can be hashed, collected into sets and shipped to worker processes.

    ..  code-block:: python

        from noisytree.trees import TreeStructure

        t = TreeStructure(4, [(1, 2), (3, 2), (3, 4)])
        t.edge_list  # [(1, 2), (2, 3), (3, 4)]
        t.neighbors(2)  # (1, 3)

    Construction fails with ``InvalidShape`` unless the edges form a spanning tree of ``1..d``.
    """
    d: int
    edges: frozenset

    def __post_init__(self):
        d = int(self.d)
        edges = frozenset(tuple(sorted((int(i), int(j)))) for i, j in self.edges)
        object.__setattr__(self, 'd', d)
        object.__setattr__(self, 'edges', edges)
        if d < 1:
            raise InvalidShape(f'A tree needs at least one node, got d={d}.')
        if len(edges) != d - 1:
            raise InvalidShape(f'A tree on {d} nodes needs {d - 1} edges, got {len(edges)}.')
        for i, j in edges:
            if i == j or i < 1 or j > d:
                raise InvalidShape(f'Edge ({i}, {j}) is not a pair of distinct labels in 1..{d}.')
        if d > 1 and not nx.is_tree(self.graph):
            raise InvalidShape(f'Edges {sorted(edges)} do not form a connected acyclic graph.')

    def __str__(self):
        return f'TreeStructure(d={self.d}, edges={self.edge_list})'

    @cached_property
    def adjacency(self):
        adj = {i: [] for i in self.nodes}
        for i, j in self.edge_list:
            adj[i].append(j)
            adj[j].append(i)
        return {i: tuple(sorted(v)) for i, v in adj.items()}

    def degree(self, i):
        return len(self.adjacency[i])

    @property
    def edge_list(self):
        return sorted(self.edges)

    @cached_property
    def graph(self):
        g = nx.Graph()
        g.add_nodes_from(range(1, self.d + 1))
        g.add_edges_from(self.edge_list)
        return g

    def neighbors(self, i):
        return self.adjacency[i]

    @property
    def nodes(self):
        return range(1, self.d + 1)

    def path(self, i, j):
        """Returns the unique path from ``i`` to ``j`` as a list of nodes, both ends included."""
        return nx.shortest_path(self.graph, i, j)




@dataclass(frozen=True)
class EquivalenceClusterPartition:
    """The equivalence clusters of a tree and the tree they form.

    ``clusters`` holds one frozenset per cluster, sorted by smallest member. ``internal`` names, for each cluster, the
    node that is internal in the tree the partition was computed from. ``cluster_tree`` holds pairs of cluster indices
    whose internal nodes are adjacent.
    """
    clusters: tuple
    internal: tuple
    cluster_tree: frozenset

    @property
    def canonical(self):
        """The partition and cluster adjacency with cluster indices replaced by the clusters themselves.

        Two trees on the same nodes are equivalent exactly when their canonical forms are equal.
        """
        return (
            frozenset(self.clusters),
            frozenset(frozenset((self.clusters[a], self.clusters[b])) for a, b in self.cluster_tree)
        )

    def index_of(self):
        return {i: k for k, c in enumerate(self.clusters) for i in c}




# FUNCTIONS
def all_labeled_trees(d):
    """Yields every labeled tree on ``d`` nodes by decoding all ``d ** (d - 2)`` Prüfer sequences.

    :param d: the node count, at most 8
    :return: a generator of TreeStructure
    """
    if d > 8:
        raise SizeGuard(f'Refusing to list all {d ** (d - 2)} labeled trees on {d} nodes (limit d=8).')
    if d == 2:
        yield TreeStructure(2, [(1, 2)])
        return
    for seq in itertools.product(range(d), repeat=d - 2):
        g = nx.from_prufer_sequence(list(seq))
        yield TreeStructure(d, [(i + 1, j + 1) for i, j in g.edges])



def cluster_of(tree):
    """Returns a dict mapping each node to the index of its cluster in `equivalence_clusters`_."""
    return equivalence_clusters(tree).index_of()



def enumerate_equivalence_class(tree):
    """Returns the set of all trees equivalent to ``tree``.

    A member of the class is produced by choosing, in each cluster that holds leaves, either nothing or one leaf, and
    swapping every chosen leaf with its internal neighbor. No two chosen leaves share a neighbor, so the swaps are
    disjoint transpositions and can be applied as a single relabeling.

    ..  code-block:: python

        chain = make_named_tree('chain', 4)
        sorted(t.edge_list for t in enumerate_equivalence_class(chain))
        # [[(1, 2), (1, 3), (3, 4)], [(1, 2), (1, 4), (2, 3)], [(1, 2), (2, 3), (3, 4)], [(1, 2), (2, 4), (3, 4)]]

    :param tree: a TreeStructure with at most ``NOISYTREE_GUARDS['enumeration']`` nodes
    :return: a set of TreeStructure, ``tree`` included
    """
    limit = NOISYTREE_GUARDS['enumeration']
    if tree.d > limit:
        raise SizeGuard(f'Enumeration is limited to d <= {limit}, got d={tree.d}.')
    if tree.d <= 2:
        return {tree}
    p = equivalence_clusters(tree)
    choices = [[None] + sorted(c - {p.internal[k]}) for k, c in enumerate(p.clusters)]
    members = set()
    for picks in itertools.product(*choices):
        mapping = {}
        for k, leaf in enumerate(picks):
            if leaf is not None:
                mapping[leaf] = p.internal[k]
                mapping[p.internal[k]] = leaf
        members.add(relabel(tree, mapping))
    return members



def equivalence_clusters(tree):
    """Returns the EquivalenceClusterPartition of ``tree``.

    Each internal node forms a cluster together with its adjacent leaves, so internal nodes without leaves form
    singleton clusters. A star is a single cluster, and so is the lone edge of a 2-node tree.

    :param tree: a TreeStructure with ``d >= 2``
    :return: the partition
    """
    if tree.d < 2:
        raise InvalidShape(f'Equivalence clusters need d >= 2, got d={tree.d}.')
    if tree.d == 2:
        return EquivalenceClusterPartition((frozenset((1, 2)),), (1,), frozenset())
    internal = [i for i in tree.nodes if tree.degree(i) > 1]
    clusters = sorted(
        ((frozenset([i] + [j for j in tree.neighbors(i) if tree.degree(j) == 1]), i) for i in internal),
        key=lambda x: min(x[0])
    )
    position = {i: k for k, (_, i) in enumerate(clusters)}
    cluster_tree = frozenset(
        tuple(sorted((position[i], position[j]))) for i, j in tree.edges if i in position and j in position
    )
    return EquivalenceClusterPartition(tuple(c for c, _ in clusters), tuple(i for _, i in clusters), cluster_tree)



def equivalence_class_size(tree):
    """Returns the number of trees in the equivalence class of ``tree``.

    This is the product of ``1 + (leaves in the cluster)`` over all clusters, which for a chain of 4 or more nodes is
    always 4, for a star is ``d``, and never exceeds ``3 ** (d / 3)``.
    """
    if tree.d <= 2:
        return 1
    return math.prod(len(c) for c in equivalence_clusters(tree).clusters)



def is_equivalent(a, b):
    """Returns True if ``b`` belongs to the equivalence class of ``a``.

    Rather than enumerating the class, we compare canonical forms: the two trees must have the same cluster partition
    and the same adjacency between clusters.

    :param a: a TreeStructure
    :param b: a TreeStructure on the same number of nodes
    :return: a bool
    """
    if a.d != b.d:
        raise DimensionMismatch(f'Cannot compare a tree on {a.d} nodes with one on {b.d} nodes.')
    if a.d <= 2 or a == b:
        return True
    return equivalence_clusters(a).canonical == equivalence_clusters(b).canonical



def leaves(tree):
    return {i for i in tree.nodes if tree.degree(i) == 1}



def make_named_tree(kind, d):
    """Returns one of the fixed structures used in the experiments.

    * ``chain``: the path ``1 - 2 - ... - d``
    * ``star``: node 1 adjacent to every other node
    * ``hybrid12``: the chain ``1..6`` with nodes ``7..12`` all adjacent to node 6 (d must be 12)
    * ``gauss_hybrid10``: the chain ``1..5`` with nodes ``6..10`` all adjacent to node 5 (d must be 10)
    * ``double_cherry``: internal edge ``1 - 2`` with leaves 3, 4 on node 1 and 5, 6 on node 2 (d must be 6)
    * ``caterpillar``: a spine ``1, 4, 7, ...`` where every spine node holds two leaves (d a multiple of 3)

    :param kind: the structure name
    :param d: the node count
    :return: a TreeStructure
    """
    if kind == 'chain' and d >= 1:
        edges = [(i, i + 1) for i in range(1, d)]
    elif kind == 'star' and d >= 2:
        edges = [(1, i) for i in range(2, d + 1)]
    elif kind == 'hybrid12' and d == 12:
        edges = [(i, i + 1) for i in range(1, 6)] + [(6, i) for i in range(7, 13)]
    elif kind == 'gauss_hybrid10' and d == 10:
        edges = [(i, i + 1) for i in range(1, 5)] + [(5, i) for i in range(6, 11)]
    elif kind == 'double_cherry' and d == 6:
        edges = [(1, 2), (1, 3), (1, 4), (2, 5), (2, 6)]
    elif kind == 'caterpillar' and d >= 3 and d % 3 == 0:
        spine = list(range(1, d + 1, 3))
        edges = [(a, b) for a, b in zip(spine, spine[1:])] + [(s, s + k) for s in spine for k in (1, 2)]
    else:
        raise InvalidShape(f'No "{kind}" tree on {d} nodes.')
    return TreeStructure(d, edges)



def random_tree(d, rng):
    """Returns a tree drawn uniformly from the ``d ** (d - 2)`` labeled trees on ``d`` nodes.

    A uniform Prüfer sequence decodes to a uniform labeled tree; ``rng`` is a ``numpy.random.Generator`` and is the
    only source of randomness, so a fixed seed gives a fixed tree.
    """
    if d < 2:
        raise InvalidShape(f'Random trees need d >= 2, got d={d}.')
    if d == 2:
        return TreeStructure(2, [(1, 2)])
    g = nx.from_prufer_sequence([int(x) for x in rng.integers(0, d, size=d - 2)])
    return TreeStructure(d, [(i + 1, j + 1) for i, j in g.edges])



def relabel(tree, mapping):
    """Returns ``tree`` with node ``i`` renamed ``mapping[i]``; unmapped nodes keep their labels."""
    return TreeStructure(tree.d, [(mapping.get(i, i), mapping.get(j, j)) for i, j in tree.edges])
