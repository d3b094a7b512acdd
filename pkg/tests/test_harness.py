"""
tests/test_harness.py
=====================
Experiment specs, presets, the Monte Carlo runner and its summaries.

Runs here are kept tiny: a 4-node chain with rho = 0.5 has quartet margins of 0.375, so a few trials at large n are
enough to expect zero errors from both quartet estimators.
"""
import json
import math

import numpy as np
import pytest

from noisytree.exceptions import DimensionMismatch, DomainError, FileFormatError, GridMismatch, UnknownPreset
from noisytree.harness import (
    ESTIMATORS, N4, N12, PRESETS, ExperimentSpec, ResultRow, aggregate_family, describe_noise, empirical_slope,
    load_spec, preset, results_csv, run_experiment, write_results
)
from noisytree.models import noise_pattern
from noisytree.quartets import alpha
from noisytree.theory import exponents_ka, exponents_sga, quartet_base
from noisytree.trees import is_equivalent, make_named_tree
from noisytree.utils import write_tree

HEADER = 'experiment_id,structure,d,rho,noise_pattern,n,estimator,trials,errors,err_prob,stderr'


@pytest.fixture
def small_spec(chain4):
    return ExperimentSpec('small', 'ising', 'chain4', (chain4,), 0.5, 'odd', 0.1, n_grid=(20000,), trials=3,
                          estimators=('KA', 'SGA'))


def row(structure, n, err_prob, estimator='SGA'):
    return ResultRow('x', structure, 4, 0.5, 'none', n, estimator, 100, round(err_prob * 100), err_prob, 0.0)


def combined_stderr(a, b):
    return math.hypot(a.stderr, b.stderr)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def test_every_preset_builds():
    for name in PRESETS:
        spec = preset(name)
        assert spec.id == name
        assert spec.trials == 2000
        assert spec.seed == 2020
        assert spec.estimators == ESTIMATORS


def test_ising_presets():
    spec = preset('fig6b')
    assert spec.d == 12
    assert spec.noise == noise_pattern(12, 'odd', 0.2)
    assert spec.n_grid == N12
    assert describe_noise(spec) == 'odd(0.2)'
    assert preset('fig4a').noise == [0.0] * 12
    assert describe_noise(preset('fig4a')) == 'none'
    assert preset('fig5b').trees[0] == make_named_tree('hybrid12', 12)
    assert preset('fig5b').noise_pattern == 'even'


def test_gaussian_presets():
    spec = preset('gauss_fig9')
    assert spec.model == 'gaussian'
    assert spec.param == 0.5
    assert spec.noise == noise_pattern(10, 'odd', 2.0)
    assert preset('gauss_fig9_clean').noise == [0.0] * 10
    assert preset('gauss_fig10').trees[0] == make_named_tree('gauss_hybrid10', 10)
    assert preset('gauss_fig11').param == 0.325


def test_family_presets():
    chains = preset('appH_4chain')
    assert len(chains.trees) == 12
    assert len(set(chains.trees)) == 12
    assert chains.n_grid == N4
    assert chains.param == 0.4
    assert preset('appH_4chain_08').param == 0.8
    stars = preset('appH_4star')
    assert len(stars.trees) == 4
    assert stars.label(0) == 'star4[1-2 1-3 1-4]'
    assert 'chain4[1-2 2-3 3-4]' in {chains.label(s) for s in range(12)}


def test_preset_overrides():
    spec = preset('fig4b', trials=10, n_grid=[100, 200], estimators=['sga'], seed=None)
    assert spec.trials == 10
    assert spec.n_grid == (100, 200)
    assert spec.estimators == ('SGA',)
    assert spec.seed == 2020
    with pytest.raises(DomainError):
        preset('fig4b', workers=3)
    with pytest.raises(UnknownPreset):
        preset('fig7')


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('kwargs', [
    {'model': 'potts'},
    {'n_grid': (200, 100)},
    {'n_grid': ()},
    {'estimators': ('KA', 'NJ')},
    {'trials': 0},
    {'noise_pattern': 'all', 'noise_value': 0.1},
])
def test_spec_rejects(chain4, kwargs):
    base = {'id': 'x', 'model': 'ising', 'structure': 'chain4', 'trees': (chain4,), 'param': 0.5}
    with pytest.raises(DomainError):
        ExperimentSpec(**{**base, **kwargs})


def test_spec_needs_a_common_node_count(chain4):
    with pytest.raises(DimensionMismatch):
        ExperimentSpec('x', 'ising', 'mixed', (chain4, make_named_tree('chain', 5)), 0.5)
    with pytest.raises(DimensionMismatch):
        ExperimentSpec('x', 'ising', 'none', (), 0.5)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def test_small_run(small_spec):
    result = run_experiment(small_spec)
    assert len(result) == 2
    for r in result:
        assert r.errors == 0
        assert r.err_prob == 0.0
        assert r.stderr == 0.0
        assert r.trials == 3
        assert r.noise_pattern == 'odd(0.1)'
    assert [r.estimator for r in result.select(n=20000)] == ['KA', 'SGA']
    assert result.select(estimator='CL') == []


def test_runs_do_not_depend_on_workers(chain4):
    spec = ExperimentSpec('workers', 'ising', 'chain4', (chain4,), 0.3, 'odd', 0.2, n_grid=(50, 100), trials=5)
    serial = run_experiment(spec, workers=1)
    assert run_experiment(spec, workers=1, chunk=2).rows == serial.rows
    assert run_experiment(spec, workers=2, chunk=2).rows == serial.rows


def test_results_file_is_reproducible(small_spec, tmp_path):
    a, b = tmp_path / 'a.csv', tmp_path / 'b.csv'
    write_results(run_experiment(small_spec), a)
    write_results(run_experiment(small_spec), b)
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().split('\n')
    assert lines[0] == HEADER
    assert lines[1].startswith('small,chain4,4,0.5,odd(0.1),20000,KA,3,0,0.0,0.0')
    assert b'\r' not in a.read_bytes()


def test_gaussian_results_head_the_weight_column(chain4):
    spec = ExperimentSpec('g', 'gaussian', 'chain4', (chain4,), 0.5, n_grid=(30,), trials=2, estimators=('CL',))
    lines = results_csv(run_experiment(spec)).splitlines()
    assert lines[0] == HEADER.replace(',rho,', ',w,')
    assert lines[1].startswith('g,chain4,4,0.5,none,30,CL,2,')


def test_family_run_labels_every_member():
    spec = preset('appH_4star', trials=2, n_grid=(30,), estimators=('CL',))
    result = run_experiment(spec)
    assert len(result) == 4
    assert len({r.structure for r in result}) == 4
    summary = aggregate_family(result)
    assert len(summary) == 1
    assert summary[0].structures == 4


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def test_aggregate_family():
    rows = [row('a', 100, 0.1), row('b', 100, 0.3), row('a', 200, 0.0), row('b', 200, 0.0)]
    summary = aggregate_family(rows)
    assert [(f.n, f.structures) for f in summary] == [(100, 2), (200, 2)]
    assert summary[0].mean == pytest.approx(0.2)
    assert summary[0].stddev == pytest.approx(0.1)
    assert summary[1].stddev == 0.0


def test_aggregate_needs_a_common_grid():
    with pytest.raises(GridMismatch):
        aggregate_family([row('a', 100, 0.1), row('b', 200, 0.3)])


def test_empirical_slope():
    rows = [row('a', 1000, 0.1), row('a', 2000, 0.01), row('a', 4000, 0.0), row('a', 1000, 0.5, 'KA')]
    assert empirical_slope(rows, 'SGA') == pytest.approx(math.log(10) / 1000)
    with pytest.raises(DomainError):
        empirical_slope(rows, 'KA')


# ---------------------------------------------------------------------------
# spec files
# ---------------------------------------------------------------------------

def write_json(tmp_path, data):
    path = tmp_path / 'spec.json'
    path.write_text(json.dumps(data))
    return path


def test_load_preset_spec(tmp_path):
    spec = load_spec(write_json(tmp_path, {'preset': 'fig4b', 'trials': 500, 'n_grid': [1000, 4000]}))
    assert spec.id == 'fig4b'
    assert spec.trials == 500
    assert spec.n_grid == (1000, 4000)


def test_load_full_spec(tmp_path):
    spec = load_spec(write_json(tmp_path, {
        'id': 'chain8', 'model': 'ising', 'structure': 'chain', 'd': 8, 'param': 0.7, 'noise_pattern': 'odd',
        'noise_value': 0.1, 'n_grid': [1000, 2000], 'estimators': ['KA', 'SGA'],
    }))
    assert spec.trees == (make_named_tree('chain', 8),)
    assert spec.noise == noise_pattern(8, 'odd', 0.1)
    assert spec.estimators == ('KA', 'SGA')
    assert spec.trials == 2000


def test_load_spec_with_edges_or_tree_file(tmp_path):
    data = {'id': 'e', 'edges': [[1, 2], [2, 3], [2, 4]], 'param': 0.5, 'n_grid': [100]}
    spec = load_spec(write_json(tmp_path, data))
    assert spec.structure == 'custom'
    assert spec.trees[0].degree(2) == 3

    tree = make_named_tree('double_cherry', 6)
    write_tree(tree, tmp_path / 'tree.txt')
    spec = load_spec(write_json(tmp_path, {
        'id': 't', 'structure': 'cherries', 'tree_file': str(tmp_path / 'tree.txt'), 'param': 0.5, 'n_grid': [100],
    }))
    assert is_equivalent(spec.trees[0], tree)
    assert spec.structure == 'cherries'


@pytest.mark.parametrize('key', ['rho', 'w', 'param'])
def test_load_spec_parameter_aliases(tmp_path, key):
    model = 'gaussian' if key == 'w' else 'ising'
    spec = load_spec(write_json(tmp_path, {'id': 'a', 'model': model, 'structure': 'star', 'd': 5, key: 0.4,
                                           'n_grid': [100]}))
    assert spec.param == 0.4
    assert spec.model == model


@pytest.mark.parametrize('data', [
    {},
    {'id': 'x', 'structure': 'chain', 'd': 4, 'n_grid': [100]},
    {'id': 'x', 'structure': 'chain', 'd': 4, 'rho': 0.5, 'param': 0.5, 'n_grid': [100]},
    {'id': 'x', 'structure': 'chain', 'd': 4, 'param': 0.5, 'n_grid': [100], 'workers': 4},
    {'id': 'x', 'structure': 'chain', 'd': 4, 'param': 0.5, 'n_grid': 100},
])
def test_load_spec_errors(tmp_path, data):
    with pytest.raises(FileFormatError):
        load_spec(write_json(tmp_path, data))


def test_load_missing_spec(tmp_path):
    with pytest.raises(FileFormatError):
        load_spec(tmp_path / 'missing.json')


# ---------------------------------------------------------------------------
# acceptance-scale runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope='module')
def preset_runs():
    """Runs each preset once per module, at full scale."""
    cache = {}

    def run(name):
        if name not in cache:
            cache[name] = run_experiment(preset(name), workers=4)
        return cache[name]
    return run


def paired(result):
    return [(result.select('KA', n)[0], result.select('SGA', n)[0]) for n in result.spec.n_grid]


@pytest.mark.slow
def test_noisy_chain_at_4000_samples():
    result = run_experiment(preset('fig4b', n_grid=(4000,)), workers=4)
    ka, sga, cl = (result.select(estimator=e)[0] for e in ('KA', 'SGA', 'CL'))
    assert cl.err_prob > 0.95
    assert ka.err_prob - sga.err_prob > 3 * combined_stderr(ka, sga)


@pytest.mark.slow
@pytest.mark.parametrize('name', ['fig5b', 'fig5d', 'fig6b', 'gauss_fig9', 'gauss_fig10'])
def test_sga_is_clearly_better_under_noise(preset_runs, name):
    pairs = paired(preset_runs(name))
    if name.startswith('fig'):
        assert all(sga.err_prob <= ka.err_prob for ka, sga in pairs)
    clear = sum(ka.err_prob - sga.err_prob > combined_stderr(ka, sga) for ka, sga in pairs)
    assert 2 * clear >= len(pairs)


@pytest.mark.slow
def test_chow_liu_fails_on_the_noisy_hybrid(preset_runs):
    result = preset_runs('fig5b')
    assert result.select('CL', result.spec.n_grid[-1])[0].err_prob > 0.9


@pytest.mark.slow
def test_sga_is_never_worse_on_the_gaussian_star(preset_runs):
    for ka, sga in paired(preset_runs('gauss_fig11')):
        assert sga.err_prob <= ka.err_prob + combined_stderr(ka, sga)


@pytest.mark.slow
@pytest.mark.parametrize('name', ['fig5b', 'fig5d', 'fig6b', 'gauss_fig9', 'gauss_fig10', 'gauss_fig11'])
def test_error_rates_do_not_rise_with_n(preset_runs, name):
    # CL is left out: behind noise its error grows with n
    result = preset_runs(name)
    for estimator in ('KA', 'SGA'):
        rows = sorted(result.select(estimator=estimator), key=lambda r: r.n)
        averages = np.convolve([r.err_prob for r in rows], np.ones(3) / 3, mode='valid')
        tolerance = max(r.stderr for r in rows)
        assert (np.diff(averages) <= tolerance).all(), (estimator, averages)


@pytest.mark.slow
@pytest.mark.parametrize('name, structure, rho', [('appH_4chain_08', 'chain', 0.8), ('appH_4star', 'star', 0.6)])
def test_error_slopes_match_the_exponents(name, structure, rho):
    result = run_experiment(preset(name, trials=10000, estimators=('KA', 'SGA')), workers=4)
    base = quartet_base(structure, rho)
    for estimator, exponents in (('KA', exponents_ka), ('SGA', exponents_sga)):
        expected = exponents(base, alpha(rho), structure)['value']
        assert empirical_slope(result, estimator) == pytest.approx(expected, rel=0.2), estimator


@pytest.mark.slow
def test_quartet_estimators_converge_without_noise():
    result = run_experiment(preset('fig4c', trials=100, n_grid=(16000,), estimators=('KA', 'SGA')), workers=4)
    for r in result:
        assert r.err_prob <= 0.1, r
