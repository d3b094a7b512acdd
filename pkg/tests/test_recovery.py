"""
tests/test_recovery.py
======================
Thresholds, the quartet table, cluster detection, tree assembly and the Chow-Liu baseline.

Most checks feed exact noisy correlations to the pipeline: with infinitely many samples both quartet estimators must
land in the equivalence class of the true tree every time.
"""
import logging

import numpy as np
import pytest

from noisytree import recovery
from noisytree.exceptions import DomainError, InvalidShape, SizeGuard
from noisytree.models import exact_correlations, ising_model, noise_pattern, noisy_correlations
from noisytree.quartets import classify_ka_batch
from noisytree.recovery import (
    ClusterView, QuartetTable, RecoveryConfig, assemble_tree, chow_liu, detect_clusters, prepare_correlations,
    proximal_matrix, proximal_sets, recover, thresholds_gaussian, thresholds_ising
)
from noisytree.sim import apply_ising_noise, empirical_correlations, sample_ising
from noisytree.theory import perturbation_radius
from noisytree.trees import TreeStructure, all_labeled_trees, is_equivalent, make_named_tree, random_tree


def config_for(rho, q, classifier):
    """The tightest RecoveryConfig for per-edge correlations ``rho`` and crossover probabilities ``q``."""
    r = [abs(v) for v in rho.values()]
    return RecoveryConfig(min(r), max(r), max(q), classifier)


def nudged(c, cfg, rng, share=0.99):
    """Moves every off-diagonal entry of ``c`` by ``share`` of the guaranteed radius, with random signs."""
    radius = perturbation_radius(0.05, cfg.rho_min, cfg.rho_max, cfg.noise_bound)
    e = np.triu(rng.choice((-1.0, 1.0), c.shape), 1) * share * radius
    return c + e + e.T


def check_oracle(tree, rho, q, classifier, rng):
    """Recovers ``tree`` from its exact noisy correlations, as given and nudged just inside the guaranteed radius."""
    cfg = config_for(rho, q, classifier)
    c = noisy_correlations(exact_correlations(ising_model(tree, rho)), q)
    assert is_equivalent(tree, recover(c, cfg)), (tree, rho, q)
    assert is_equivalent(tree, recover(nudged(c, cfg, rng), cfg)), (tree, rho, q)


# ---------------------------------------------------------------------------
# thresholds and configuration
# ---------------------------------------------------------------------------

def test_thresholds_ising():
    t1, t2 = thresholds_ising(0.6, 0.8, 0.2)
    assert t1 == pytest.approx(0.046656)
    assert t2 == pytest.approx(0.034992)
    assert thresholds_ising(0.5, 0.5, 0.0) == pytest.approx((0.0625, 0.0625))


def test_thresholds_gaussian():
    h1, h2 = thresholds_gaussian(0.5, 0.8, 0.0)
    assert h1 == pytest.approx(0.0625)
    assert h2 == pytest.approx(0.0625)
    h1, h2 = thresholds_gaussian(0.5, 0.5, 3.0)
    assert h1 == pytest.approx(0.015625)
    assert h2 == pytest.approx(0.015625)
    with pytest.raises(DomainError):
        thresholds_gaussian(0.5, 0.8, -1)


@pytest.mark.parametrize('args', [
    (0.8, 0.6, 0.0),
    (0.0, 0.6, 0.0),
    (0.6, 1.0, 0.0),
    (0.6, 0.8, 0.5),
])
def test_thresholds_reject_bad_bounds(args):
    with pytest.raises(DomainError):
        thresholds_ising(*args)


def test_config():
    cfg = RecoveryConfig(0.8, 0.8, 0.2, 'ka')
    assert cfg.alpha == pytest.approx(0.82)
    assert cfg.classify is recovery.classify_ka_batch
    assert cfg.thresholds == thresholds_ising(0.8, 0.8, 0.2)
    assert cfg.proximal_threshold == cfg.thresholds[1]
    assert RecoveryConfig(0.8, 0.8, threshold=0.1).proximal_threshold == 0.1
    g = RecoveryConfig(0.5, 0.5, 3.0, model_kind='gaussian')
    assert g.thresholds == thresholds_gaussian(0.5, 0.5, 3.0)


@pytest.mark.parametrize('kwargs', [
    {'classifier': 'nj'},
    {'model_kind': 'potts'},
    {'noise_bound': 0.6},
    {'threshold': -0.1},
])
def test_config_rejects(kwargs):
    with pytest.raises(DomainError):
        RecoveryConfig(0.5, 0.8, **kwargs)


# ---------------------------------------------------------------------------
# proximal sets and the quartet table
# ---------------------------------------------------------------------------

def test_proximal_sets(chain12, exact_noisy):
    c = exact_noisy(chain12, 0.8)
    t2 = thresholds_ising(0.8, 0.8, 0.0)[1]
    sets = proximal_sets(c, t2)
    # 0.8 ** 7 = 0.2097 clears 0.5 * 0.4096, 0.8 ** 8 does not
    assert sets[1] == set(range(2, 9))
    assert sets[6] == set(range(1, 13)) - {6}
    assert not proximal_matrix(c, t2).diagonal().any()
    with pytest.raises(DomainError):
        proximal_sets(c, 0.0)


def test_quartet_table_reads_any_order(exact_noisy):
    c = exact_noisy(make_named_tree('chain', 6), 0.8)
    cfg = RecoveryConfig(0.8, 0.8)
    table = QuartetTable(c, proximal_matrix(c, cfg.proximal_threshold), cfg.classify, cfg.alpha)
    codes, margins = table.query([[0, 1, 2, 3], [1, 0, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [2, 3, 0, 1], [3, 0, 1, 2]])
    assert codes.tolist() == [1, 1, 2, 3, 1, 3]
    assert (margins > 0).all()
    assert table.separated[1, 2] and not table.separated[0, 1]
    assert len(table) == 15


def test_quartet_table_classifies_on_demand(exact_noisy):
    c = exact_noisy(make_named_tree('chain', 9), 0.8)
    cfg = RecoveryConfig(0.8, 0.8)
    table = QuartetTable(c, proximal_matrix(c, cfg.proximal_threshold), cfg.classify, cfg.alpha)
    # 0.8 ** 8 falls below 0.5 * t2, so nodes 1 and 9 are never compared up front
    assert table.admissible([[0, 1, 2, 3], [0, 1, 7, 8]]).tolist() == [True, False]
    assert len(table.cache) == len(table)
    codes, _ = table.query([[8, 7, 1, 0]])
    assert codes.tolist() == [1]
    assert len(table.cache) == len(table) + 1
    table.query([[0, 1, 7, 8]])
    assert len(table.cache) == len(table) + 1


def test_quartet_table_star_and_vanishing_correlations(exact_noisy):
    c = exact_noisy(make_named_tree('star', 5), 0.6)
    table = QuartetTable(c, proximal_matrix(c, 0.01), recovery.classify_sga_batch, 0.68)
    assert table.query([[1, 2, 3, 4]])[0].tolist() == [0]
    c = exact_noisy(make_named_tree('chain', 6), 0.8)
    c[0, 5] = c[5, 0] = 0.0
    table = QuartetTable(c, proximal_matrix(c, 0.5), recovery.classify_sga_batch, 0.82)
    codes, margins = table.query([[0, 1, 4, 5]])
    assert codes.tolist() == [0] and margins.tolist() == [0.0]


def test_input_checks():
    with pytest.raises(InvalidShape):
        prepare_correlations(np.eye(2))
    with pytest.raises(SizeGuard):
        prepare_correlations(np.eye(65))
    assert prepare_correlations(np.eye(64)).shape == (64, 64)


def test_size_guard_is_read_at_call_time(monkeypatch, exact_noisy):
    monkeypatch.setitem(recovery.NOISYTREE_GUARDS, 'recovery', 5)
    with pytest.raises(SizeGuard):
        recover(exact_noisy(make_named_tree('chain', 6), 0.8), RecoveryConfig(0.8, 0.8))


# ---------------------------------------------------------------------------
# clusters
# ---------------------------------------------------------------------------

def test_detect_clusters_on_chain(exact_noisy):
    c = exact_noisy(make_named_tree('chain', 6), 0.7, noise_pattern(6, 'odd', 0.1))
    view = detect_clusters(c, RecoveryConfig(0.7, 0.7, 0.1))
    assert view.clusters == (frozenset({1, 2}), frozenset({3}), frozenset({4}), frozenset({5, 6}))
    # representatives carry the largest total correlation within their proximal sets
    assert view.representatives == (2, 3, 4, 5)


def test_detect_clusters_on_star(exact_noisy):
    c = exact_noisy(make_named_tree('star', 7), 0.6)
    view = detect_clusters(c, RecoveryConfig(0.6, 0.6))
    assert view.clusters == (frozenset(range(1, 8)),)
    assert view.representatives == (1,)


def test_weak_pairs_are_not_split_by_correlation_alone(exact_noisy):
    # every pair sits well below the 0.64 that rho_min = 0.8 promises, yet no quartet separates any of them
    c = exact_noisy(make_named_tree('star', 5), 0.3)
    view = detect_clusters(c, RecoveryConfig(0.8, 0.8, threshold=0.01))
    assert view.clusters == (frozenset(range(1, 6)),)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_assemble_tree_splits_representatives(exact_noisy):
    chain6 = make_named_tree('chain', 6)
    c = exact_noisy(chain6, 0.7)
    view = ClusterView((frozenset({1, 2}), frozenset({3}), frozenset({4}), frozenset({5, 6})), (2, 3, 4, 5))
    assert assemble_tree(view, c, RecoveryConfig(0.7, 0.7)) == chain6


def test_assemble_single_cluster_is_a_star(exact_noisy):
    star7 = make_named_tree('star', 7)
    view = ClusterView((frozenset(range(1, 8)),), (1,))
    assert assemble_tree(view, exact_noisy(star7, 0.6), RecoveryConfig(0.6, 0.6)) == star7


def test_assemble_two_clusters(exact_noisy):
    chain4 = make_named_tree('chain', 4)
    view = ClusterView((frozenset({1, 2}), frozenset({3, 4})), (2, 3))
    assert assemble_tree(view, exact_noisy(chain4, 0.5), RecoveryConfig(0.5, 0.5)) == chain4


def test_three_representatives_find_their_middle(exact_noisy):
    chain5 = make_named_tree('chain', 5)
    view = ClusterView((frozenset({1, 2}), frozenset({3}), frozenset({4, 5})), (2, 3, 4))
    tree = assemble_tree(view, exact_noisy(chain5, 0.6, noise_pattern(5, 'odd', 0.2)), RecoveryConfig(0.6, 0.6, 0.2))
    assert tree == chain5


@pytest.mark.parametrize('classifier', ['ka', 'sga'])
def test_noisy_hub_is_still_the_star_center(classifier, exact_noisy):
    tree = TreeStructure(10, [(1, 2), (1, 3), (1, 4), (2, 5), (2, 6), (3, 7), (3, 8), (4, 9), (4, 10)])
    q = [0.3] + [0.0] * 9
    c = exact_noisy(tree, 0.8, q)
    cfg = RecoveryConfig(0.8, 0.8, 0.3, classifier)
    view = detect_clusters(c, cfg)
    assert view.representatives == (1, 2, 3, 4)
    # node 2 outweighs the true hub in total correlation
    strength = (np.abs(c) * proximal_matrix(c, cfg.proximal_threshold)).sum(axis=1)
    assert strength[1] > strength[0]
    assert is_equivalent(tree, assemble_tree(view, c, cfg))


@pytest.mark.parametrize('classifier', ['ka', 'sga'])
def test_noisy_attachment_point_is_still_joined(classifier):
    tree = make_named_tree('chain', 6)
    rho = {(1, 2): 0.8, (2, 3): 0.9, (3, 4): 0.5, (4, 5): 0.8, (5, 6): 0.8}
    c = noisy_correlations(exact_correlations(ising_model(tree, rho)), [0.0, 0.0, 0.3, 0.0, 0.0, 0.0])
    # across the split {2, 3} | {4, 5}, the strongest pair is 2-4 rather than the true edge 3-4
    assert abs(c[1, 3]) > abs(c[2, 3])
    assert is_equivalent(tree, recover(c, RecoveryConfig(0.5, 0.9, 0.3, classifier)))


# ---------------------------------------------------------------------------
# full recovery from exact correlations
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('classifier', ['ka', 'sga'])
@pytest.mark.parametrize('d', [4, 5])
def test_oracle_on_every_small_tree(d, classifier, random_parameters):
    rng = np.random.default_rng(d)
    for tree in all_labeled_trees(d):
        for _ in range(3):
            rho, q = random_parameters(tree, rng)
            check_oracle(tree, rho, q, classifier, rng)


@pytest.mark.parametrize('classifier', ['ka', 'sga'])
def test_oracle_on_noiseless_random_trees(classifier, random_parameters):
    rng = np.random.default_rng(11)
    for _ in range(40):
        tree = random_tree(int(rng.integers(6, 10)), rng)
        rho, _ = random_parameters(tree, rng)
        check_oracle(tree, rho, [0.0] * tree.d, classifier, rng)


@pytest.mark.parametrize('classifier', ['ka', 'sga'])
@pytest.mark.parametrize('kind, rho, pattern', [
    ('chain', 0.6, 'odd'),
    ('hybrid12', 0.6, 'even'),
    ('star', 0.6, 'odd'),
])
def test_oracle_on_experiment_structures(kind, rho, pattern, classifier):
    tree = make_named_tree(kind, 12)
    check_oracle(tree, {e: rho for e in tree.edge_list}, noise_pattern(12, pattern, 0.1), classifier,
                 np.random.default_rng(3))


def test_oracle_on_the_hybrid_with_noisy_even_nodes(exact_noisy):
    tree = make_named_tree('hybrid12', 12)
    c = exact_noisy(tree, 0.8, noise_pattern(12, 'even', 0.2))
    for classifier in ('ka', 'sga'):
        assert is_equivalent(tree, recover(c, RecoveryConfig(0.8, 0.8, 0.2, classifier)))


@pytest.mark.parametrize('classifier', ['ka', 'sga'])
def test_recovery_survives_small_perturbations(classifier, chain12, exact_noisy):
    q = noise_pattern(12, 'odd', 0.1)
    c = exact_noisy(chain12, 0.6, q)
    cfg = RecoveryConfig(0.6, 0.6, 0.1, classifier)
    rng = np.random.default_rng(5)
    for _ in range(20):
        assert is_equivalent(chain12, recover(nudged(c, cfg, rng), cfg))


def test_recover_needs_three_nodes():
    with pytest.raises(InvalidShape):
        recover(np.eye(2), RecoveryConfig(0.5, 0.5))


def test_recover_returns_a_path_on_three_nodes(exact_noisy):
    tree = recover(exact_noisy(make_named_tree('chain', 3), 0.5), RecoveryConfig(0.5, 0.5))
    assert sorted(tree.degree(i) for i in tree.nodes) == [1, 1, 2]


def test_recovery_logs_no_warnings(caplog, chain12, exact_noisy):
    c = exact_noisy(chain12, 0.8, noise_pattern(12, 'odd', 0.2))
    with caplog.at_level(logging.WARNING, logger='noisytree'):
        for classifier in ('ka', 'sga'):
            assert is_equivalent(chain12, recover(c, RecoveryConfig(0.8, 0.8, 0.2, classifier)))
    assert not caplog.records


def test_recovery_is_deterministic(chain12, exact_noisy):
    c = nudged(exact_noisy(chain12, 0.7), RecoveryConfig(0.7, 0.7), np.random.default_rng(8), share=20)
    cfg = RecoveryConfig(0.7, 0.7)
    assert recover(c, cfg) == recover(c.copy(), cfg)


def test_classifier_is_looked_up_at_call_time(monkeypatch, chain12, exact_noisy):
    def all_stars(r, alpha):
        return np.zeros(len(r), dtype=int), np.zeros(len(r))

    monkeypatch.setitem(recovery.CLASSIFIERS, 'sga', all_stars)
    tree = recover(exact_noisy(chain12, 0.8), RecoveryConfig(0.8, 0.8, classifier='sga'))
    # nothing is ever separated, so every node lands in one cluster around a single hub
    assert max(tree.degree(i) for i in tree.nodes) == 11


def test_estimators_differ_only_in_their_classifier(monkeypatch, chain12):
    rng = np.random.default_rng(17)
    model = ising_model(chain12, 0.8)
    q = noise_pattern(12, 'odd', 0.2)
    samples = [
        empirical_correlations(apply_ising_noise(sample_ising(model, n, rng), q, rng)) for n in (200, 400, 800, 1600)
    ]
    ka = [recover(c, RecoveryConfig(0.8, 0.8, 0.2, 'ka')) for c in samples]
    monkeypatch.setitem(recovery.CLASSIFIERS, 'sga', classify_ka_batch)
    sga = [recover(c, RecoveryConfig(0.8, 0.8, 0.2, 'sga')) for c in samples]
    assert sga == ka


# ---------------------------------------------------------------------------
# Chow-Liu
# ---------------------------------------------------------------------------

def test_chow_liu_noiseless(chain12, exact_noisy):
    assert chow_liu(exact_noisy(chain12, 0.8)) == chain12


def test_chow_liu_is_fooled_by_noise(chain12, exact_noisy):
    c = exact_noisy(chain12, 0.8, noise_pattern(12, 'odd', 0.2))
    tree = chow_liu(c)
    assert (2, 4) in tree.edges
    assert not is_equivalent(chain12, tree)


def test_chow_liu_needs_two_nodes():
    with pytest.raises(InvalidShape):
        chow_liu(np.eye(1))


# ---------------------------------------------------------------------------
# acceptance-scale oracle
# ---------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize('classifier', ['ka', 'sga'])
def test_oracle_exhaustive(classifier, random_parameters):
    rng = np.random.default_rng(2020)
    for d in (6, 7):
        for tree in all_labeled_trees(d):
            for _ in range(3):
                rho, q = random_parameters(tree, rng)
                check_oracle(tree, rho, q, classifier, rng)


@pytest.mark.slow
@pytest.mark.parametrize('classifier', ['ka', 'sga'])
def test_oracle_random_trees(classifier, random_parameters):
    rng = np.random.default_rng(300)
    for _ in range(300):
        tree = random_tree(int(rng.integers(8, 13)), rng)
        for _ in range(3):
            rho, q = random_parameters(tree, rng)
            check_oracle(tree, rho, q, classifier, rng)


@pytest.mark.slow
def test_chow_liu_on_clean_correlations(random_parameters):
    rng = np.random.default_rng(10)
    for d in range(2, 8):
        for tree in all_labeled_trees(d):
            rho, _ = random_parameters(tree, rng)
            assert chow_liu(exact_correlations(ising_model(tree, rho))) == tree
    for _ in range(200):
        tree = random_tree(10, rng)
        rho, _ = random_parameters(tree, rng)
        assert chow_liu(exact_correlations(ising_model(tree, rho))) == tree
