import logging

from noisytree.recovery import (
    RecoveryConfig, QuartetTable, assemble_tree, chow_liu, detect_clusters, prepare_correlations, proximal_matrix,
    with_rep_tree
)
from noisytree.exceptions import DomainError
from noisytree.models import correlation_matrix

log = logging.getLogger(__name__)




class TreeBuilder(object):
    """A bare-bones tree estimator on which the quartet estimators are built.

    A builder turns a correlation matrix into a tree in a fixed series of steps, each one a small method that can be
    overridden on its own. Suppose we want the symmetric geometric-average estimator for a 12-node chain whose
    observations pass through crossover noise of at most 0.2:

    ..  code-block:: python

        from noisytree.builders import SGATreeBuilder

        builder = SGATreeBuilder(rho_min=0.8, rho_max=0.8, noise_bound=0.2)
        tree = builder.build(empirical_correlations(samples))

    The call to `build`_ results in the following series of events:

    1. Validate the correlation matrix with `prepare_correlations`_, which also requires ``d >= 3`` and enforces the
       size guard
    2. Call `get_thresholds`_, which returns ``(t1, t2)`` (or ``(h1, h2)`` for Gaussian models)
    3. Call `get_proximal_sets`_ to mark which pairs are trusted, then classify every quartet whose six pairs are all
       trusted
    4. Call `get_clusters`_ to group the nodes into equivalence clusters
    5. Call `get_tree`_ to link the clusters and attach their members

    The intermediate results stay on the builder (``thresholds``, ``table``, ``view``) for inspection once `build`_
    returns. The KA and SGA estimators differ only in the ``classifier`` attribute, so a comparison between them is a
    comparison of quartet tests and nothing else. `noisytree.recovery.recover` runs this same method.

    If you need a different estimator, subclass and set ``classifier`` to any batch classifier name known to
    `noisytree.recovery`, or override the step that needs changing.
    """
    classifier = None  # "ka" or "sga"
    model_kind = 'ising'
    name = None

    def __init__(self, rho_min=None, rho_max=None, noise_bound=0.0, threshold=None, config=None):
        self.name = self.name or self.__class__.__name__
        if config is None:
            classifier = self.classifier or 'sga'
            config = RecoveryConfig(rho_min, rho_max, noise_bound, classifier, self.model_kind, threshold)
        self.config = config
        self.table = self.thresholds = self.view = None

    def __str__(self):
        return f'{self.name} ({self.config})'

    def build(self, c):
        """Returns the tree estimated from the correlation matrix ``c``.

        :param c: a d x d correlation matrix
        :return: a TreeStructure
        """
        c = prepare_correlations(c)
        self.thresholds = self.get_thresholds()
        proximal = self.get_proximal_sets(c)
        log.debug(f'Proximal threshold {self.config.proximal_threshold:.4g}, set sizes {proximal.sum(axis=1).tolist()}')
        self.table = QuartetTable(c, proximal, self.config.classify, self.config.alpha)
        self.view = self.get_clusters(c)
        tree = self.get_tree(c)
        self.view = with_rep_tree(self.view, tree)
        log.debug(f'{self.name}: {len(self.view.clusters)} clusters from {len(self.table)} quartets.')
        return tree

    def get_clusters(self, c):
        return detect_clusters(c, self.config, table=self.table)

    def get_proximal_sets(self, c):
        """Returns the d x d boolean matrix of proximal pairs.

        :param c: the correlation matrix
        :return: a boolean numpy array with a False diagonal
        """
        return proximal_matrix(c, self.config.proximal_threshold)

    def get_thresholds(self):
        return self.config.thresholds

    def get_tree(self, c):
        return assemble_tree(self.view, c, self.config, table=self.table)



class KATreeBuilder(TreeBuilder):
    classifier = 'ka'
    name = 'KA'



class SGATreeBuilder(TreeBuilder):
    classifier = 'sga'
    name = 'SGA'



class GaussianKATreeBuilder(KATreeBuilder):
    model_kind = 'gaussian'



class GaussianSGATreeBuilder(SGATreeBuilder):
    model_kind = 'gaussian'



class ChowLiuTreeBuilder(TreeBuilder):
    """The Chow-Liu baseline: it needs no bounds and ignores the noise entirely."""
    name = 'CL'

    def __init__(self, *args, **kwargs):
        self.name = self.name or self.__class__.__name__
        self.config = self.table = self.thresholds = self.view = None

    def __str__(self):
        return self.name

    def build(self, c):
        return chow_liu(correlation_matrix(c))



def get_builder(estimator, rho_min=None, rho_max=None, noise_bound=0.0, model_kind='ising', threshold=None):
    """Returns the builder for ``estimator`` (``ka``, ``sga`` or ``cl``, any case).

    ..  code-block:: python

        get_builder('KA', 0.8, 0.8, 0.2).build(c)
    """
    key = estimator.lower()
    if key == 'cl':
        return ChowLiuTreeBuilder()
    classes = {
        ('ka', 'ising'): KATreeBuilder,
        ('sga', 'ising'): SGATreeBuilder,
        ('ka', 'gaussian'): GaussianKATreeBuilder,
        ('sga', 'gaussian'): GaussianSGATreeBuilder,
    }
    if (key, model_kind) not in classes:
        raise DomainError(f'No "{estimator}" estimator for {model_kind} models.')
    return classes[(key, model_kind)](rho_min, rho_max, noise_bound, threshold)