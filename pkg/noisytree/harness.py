"""Monte Carlo experiments: how often does each estimator miss the equivalence class of the true tree?

An `ExperimentSpec`_ names a model, one or more tree structures, a noise pattern, a grid of sample sizes and the
estimators to compare. `run_experiment`_ draws ``trials`` sample matrices per structure and sample size, computes their
empirical correlations once and hands the same matrix to every estimator, so estimators are always compared on
identical data. Every trial draws from its own random stream, ``substream(seed, structure, n_index, trial)``, which
makes the output independent of how trials are split between worker processes.

..  code-block:: python

    from noisytree.harness import preset, run_experiment, write_results

    result = run_experiment(preset('fig4b', trials=500), workers=4)
    write_results(result, 'fig4b.csv')
"""
import logging
import math

from collections import defaultdict, namedtuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import NOISYTREE_HARNESS
from .builders import get_builder
from .exceptions import DimensionMismatch, DomainError, FileFormatError, GridMismatch, UnknownPreset
from .models import (
    GaussianNoiseSpec, IsingNoiseSpec, gaussian_model, ising_model, max_noise_ratio, noise_pattern
)
from .sim import apply_ising_noise, empirical_correlations, sample_gaussian, sample_ising, substream
from .trees import TreeStructure, all_labeled_trees, is_equivalent, make_named_tree
from .utils import get_csv_content, get_json_object, read_tree, write_text

log = logging.getLogger(__name__)

ESTIMATORS = ('KA', 'SGA', 'CL')
N12 = (500, 1000, 2000, 4000, 8000, 16000)
N4 = (250, 500, 1000, 2000, 3000)

ResultRow = namedtuple('ResultRow', [
    'experiment_id', 'structure', 'd', 'param', 'noise_pattern', 'n', 'estimator', 'trials', 'errors', 'err_prob',
    'stderr',
])
FamilyRow = namedtuple('FamilyRow', ['estimator', 'n', 'structures', 'mean', 'stddev'])
PARAM_COLUMNS = {'ising': 'rho', 'gaussian': 'w'}




# TYPES
@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo study.

    :param id: the experiment name written to every result row
    :param model: ``ising`` or ``gaussian``
    :param structure: a label for the structure (or family of structures)
    :param trees: the TreeStructure objects to run on; a family holds several labelings of one shape
    :param param: the edge correlation ``rho`` (Ising) or the precision weight ``w`` (Gaussian)
    :param noise_pattern: ``none``, ``odd``, ``even`` or ``custom``
    :param noise_value: ``q`` (Ising) or the noise variance (Gaussian); a full vector for ``custom``
    :param n_grid: ascending sample sizes
    :param trials: trials per structure and sample size
    :param estimators: names out of ``KA``, ``SGA`` and ``CL``
    :param seed: the master seed
    """
    id: str
    model: str
    structure: str
    trees: tuple
    param: float
    noise_pattern: str = 'none'
    noise_value: object = 0.0
    n_grid: tuple = N12
    trials: int = None
    estimators: tuple = ESTIMATORS
    seed: int = None

    def __post_init__(self):
        trees = tuple(self.trees)
        object.__setattr__(self, 'trees', trees)
        object.__setattr__(self, 'n_grid', tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, 'estimators', tuple(e.upper() for e in self.estimators))
        if isinstance(self.noise_value, (list, tuple)):
            object.__setattr__(self, 'noise_value', tuple(float(v) for v in self.noise_value))
        if self.trials is None:
            object.__setattr__(self, 'trials', NOISYTREE_HARNESS['trials'])
        if self.seed is None:
            object.__setattr__(self, 'seed', NOISYTREE_HARNESS['seed'])
        if self.model not in ('ising', 'gaussian'):
            raise DomainError(f'Unknown model "{self.model}"; expected "ising" or "gaussian".')
        if not trees or len({t.d for t in trees}) != 1:
            raise DimensionMismatch(f'{self.id}: an experiment needs one or more trees on a common node count.')
        if self.trials < 1:
            raise DomainError(f'{self.id}: trials must be at least 1, got {self.trials}.')
        grid = self.n_grid
        if not grid or grid[0] < 1 or any(a >= b for a, b in zip(grid, grid[1:])):
            raise DomainError(f'{self.id}: the n grid must be non-empty, positive and strictly ascending, got {grid}.')
        unknown = set(self.estimators) - set(ESTIMATORS)
        if not self.estimators or unknown:
            raise DomainError(f'{self.id}: unknown estimators {sorted(unknown)}; expected a subset of {ESTIMATORS}.')
        noise_pattern(self.d, self.noise_pattern, self.noise_value)

    @property
    def d(self):
        return self.trees[0].d

    @property
    def noise(self):
        """The per-node noise vector: crossover probabilities or noise variances."""
        return noise_pattern(self.d, self.noise_pattern, self.noise_value)

    def label(self, s):
        """The ``structure`` column for tree ``s``; family members carry their edges."""
        if len(self.trees) == 1:
            return self.structure
        return f"{self.structure}[{' '.join(f'{i}-{j}' for i, j in self.trees[s].edge_list)}]"



@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    rows: tuple

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def select(self, estimator=None, n=None):
        return [r for r in self.rows if (estimator is None or r.estimator == estimator) and (n is None or r.n == n)]




# RUNNER
def make_trial_setup(spec, s):
    """Returns ``(model, noise, builders)`` for tree ``s`` of ``spec``.

    Ising estimators get ``rho_min = rho_max = |rho|`` and ``q_max`` the largest crossover probability; Gaussian ones
    read their bounds off the model and use ``S_max`` as the noise bound.
    """
    tree = spec.trees[s]
    if spec.model == 'ising':
        rho = abs(spec.param)
        model = ising_model(tree, spec.param, rho_min=rho, rho_max=rho)
        noise = IsingNoiseSpec(spec.noise)
        bounds = (rho, rho, noise.q_max)
    else:
        model = gaussian_model(tree, spec.param)
        noise = GaussianNoiseSpec(spec.noise)
        bounds = model.bounds + (max_noise_ratio(model, noise),)
    builders = {e: get_builder(e, *bounds, model_kind=spec.model) for e in spec.estimators}
    return model, noise, builders



def draw(spec, model, noise, n, rng):
    if spec.model == 'ising':
        return apply_ising_noise(sample_ising(model, n, rng), noise, rng)
    return sample_gaussian(model, noise, n, rng)



def run_chunk(spec, s, a, start, stop):
    """Runs trials ``start..stop - 1`` for tree ``s`` at grid index ``a``; returns ``(s, a, {estimator: errors})``."""
    model, noise, builders = make_trial_setup(spec, s)
    tree, n = spec.trees[s], spec.n_grid[a]
    errors = dict.fromkeys(spec.estimators, 0)
    for trial in range(start, stop):
        rng = substream(spec.seed, s, a, trial)
        c = empirical_correlations(draw(spec, model, noise, n, rng))
        for e, builder in builders.items():
            if not is_equivalent(tree, builder.build(c)):
                errors[e] += 1
    return s, a, errors



def run_experiment(spec, workers=None, chunk=None):
    """Runs ``spec`` and returns its ExperimentResult.

    Trials are cut into chunks of ``chunk`` (default ``NOISYTREE_HARNESS['chunk']``) and spread over ``workers``
    processes (default ``NOISYTREE_HARNESS['workers']``; 1 runs everything in this process). Error counts are summed
    per cell, so the result does not depend on either setting.

    :param spec: an ExperimentSpec
    :param workers: the number of worker processes
    :param chunk: trials per task
    :return: an ExperimentResult with one row per structure, sample size and estimator
    """
    workers = workers or NOISYTREE_HARNESS['workers']
    chunk = chunk or NOISYTREE_HARNESS['chunk']
    tasks = [
        (s, a, start, min(start + chunk, spec.trials))
        for s in range(len(spec.trees)) for a in range(len(spec.n_grid)) for start in range(0, spec.trials, chunk)
    ]
    log.debug(f'{spec.id}: {len(tasks)} tasks over {workers} worker(s).')
    counts = defaultdict(int)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_chunk, spec, *t) for t in tasks]
            outcomes = (f.result() for f in futures)
            merge_counts(counts, outcomes, spec)
    else:
        merge_counts(counts, (run_chunk(spec, *t) for t in tasks), spec)

    rows = []
    for s in range(len(spec.trees)):
        for a, n in enumerate(spec.n_grid):
            for e in spec.estimators:
                errors = counts[(s, a, e)]
                p = errors / spec.trials
                rows.append(ResultRow(
                    spec.id, spec.label(s), spec.d, spec.param, describe_noise(spec), n, e, spec.trials, errors, p,
                    math.sqrt(p * (1 - p) / spec.trials)
                ))
    return ExperimentResult(spec, tuple(rows))



def merge_counts(counts, outcomes, spec):
    for s, a, errors in outcomes:
        for e, k in errors.items():
            counts[(s, a, e)] += k
        log.debug(f'{spec.id}: tree {s}, n={spec.n_grid[a]}: {errors}')



def describe_noise(spec):
    if spec.noise_pattern == 'none':
        return 'none'
    if spec.noise_pattern == 'custom':
        return 'custom(' + ' '.join(repr(v) for v in spec.noise) + ')'
    return f'{spec.noise_pattern}({spec.noise_value!r})'




# SUMMARIES
def aggregate_family(rows):
    """Returns the mean and standard deviation of ``err_prob`` across structures, per estimator and sample size.

    Standard deviations are population ones (``ddof=0``), so a single structure gives ``stddev == 0``.

    :param rows: ResultRow objects (or an ExperimentResult) covering one or more structures
    :return: a list of FamilyRow sorted by estimator, then n
    """
    grids = defaultdict(set)
    values = defaultdict(list)
    for r in rows:
        grids[(r.structure, r.estimator)].add(r.n)
        values[(r.estimator, r.n)].append(r.err_prob)
    if len({frozenset(g) for g in grids.values()}) > 1:
        raise GridMismatch('The structures being aggregated were not run on the same n grid.')
    return [
        FamilyRow(e, n, len(v), float(np.mean(v)), float(np.std(v)))
        for (e, n), v in sorted(values.items())
    ]



def empirical_slope(rows, estimator, structure=None):
    """Returns ``-(log p2 - log p1) / (n2 - n1)`` over the two largest sample sizes with a non-zero error count.

    This is the empirical reading of an error exponent. With several structures, ``p`` is their mean error probability.

    :param rows: ResultRow objects
    :param estimator: the estimator whose rows to use
    :param structure: restrict to one ``structure`` label
    :return: a float
    """
    chosen = [r for r in rows if r.estimator == estimator and (structure is None or r.structure == structure)]
    means = {f.n: f.mean for f in aggregate_family(chosen)}
    points = sorted((n, p) for n, p in means.items() if p > 0)[-2:]
    if len(points) < 2:
        raise DomainError(f'{estimator}: fewer than two sample sizes with errors, so there is no slope to read.')
    (n1, p1), (n2, p2) = points
    return -(math.log(p2) - math.log(p1)) / (n2 - n1)



def results_csv(result):
    """Returns ``result`` as CSV text with a header row.

    The parameter column is headed ``rho`` for Ising experiments and ``w`` for Gaussian ones.
    """
    return get_csv_content(list(result.rows), headers={'param': PARAM_COLUMNS[result.spec.model]})



def write_results(result, path):
    """Writes ``result`` as CSV (header row, UTF-8, LF line endings)."""
    write_text(path, results_csv(result))




# PRESETS
def chain_family(d=4):
    paths = (t for t in all_labeled_trees(d) if max(map(t.degree, t.nodes)) <= 2)
    return tuple(sorted(paths, key=lambda t: t.edge_list))



def star_family(d=4):
    stars = (t for t in all_labeled_trees(d) if max(map(t.degree, t.nodes)) == d - 1)
    return tuple(sorted(stars, key=lambda t: t.edge_list))



def ising_preset(name, kind, d, rho, pattern='none', q=0.0):
    return ExperimentSpec(name, 'ising', f'{kind}{d}', (named_tree(kind, d),), rho, pattern, q, N12)



def gaussian_preset(name, kind, d, w, variance=2.0):
    pattern = 'odd' if variance else 'none'
    return ExperimentSpec(name, 'gaussian', f'{kind}{d}', (named_tree(kind, d),), w, pattern, variance, N12)



PRESETS = {
    'fig4a': lambda: ising_preset('fig4a', 'chain', 12, 0.8),
    'fig4b': lambda: ising_preset('fig4b', 'chain', 12, 0.8, 'odd', 0.2),
    'fig4c': lambda: ising_preset('fig4c', 'chain', 12, 0.6),
    'fig4d': lambda: ising_preset('fig4d', 'chain', 12, 0.6, 'odd', 0.2),
    'fig5a': lambda: ising_preset('fig5a', 'hybrid', 12, 0.8),
    'fig5b': lambda: ising_preset('fig5b', 'hybrid', 12, 0.8, 'even', 0.2),
    'fig5c': lambda: ising_preset('fig5c', 'hybrid', 12, 0.6),
    'fig5d': lambda: ising_preset('fig5d', 'hybrid', 12, 0.6, 'even', 0.2),
    'fig6a': lambda: ising_preset('fig6a', 'star', 12, 0.6),
    'fig6b': lambda: ising_preset('fig6b', 'star', 12, 0.6, 'odd', 0.2),
    'appH_4chain': lambda: ExperimentSpec('appH_4chain', 'ising', 'chain4', chain_family(), 0.4, n_grid=N4),
    'appH_4chain_08': lambda: ExperimentSpec('appH_4chain_08', 'ising', 'chain4', chain_family(), 0.8, n_grid=N4),
    'appH_4star': lambda: ExperimentSpec('appH_4star', 'ising', 'star4', star_family(), 0.6, n_grid=N4),
    'gauss_fig9': lambda: gaussian_preset('gauss_fig9', 'chain', 10, 0.5),
    'gauss_fig9_clean': lambda: gaussian_preset('gauss_fig9_clean', 'chain', 10, 0.5, 0.0),
    'gauss_fig10': lambda: gaussian_preset('gauss_fig10', 'hybrid', 10, 0.38),
    'gauss_fig10_clean': lambda: gaussian_preset('gauss_fig10_clean', 'hybrid', 10, 0.38, 0.0),
    'gauss_fig11': lambda: gaussian_preset('gauss_fig11', 'star', 10, 0.325),
    'gauss_fig11_clean': lambda: gaussian_preset('gauss_fig11_clean', 'star', 10, 0.325, 0.0),
}



def preset(name, **overrides):
    """Returns the catalog experiment ``name``, with any ExperimentSpec field replaced through ``overrides``.

    ..  code-block:: python

        preset('fig6b').noise  # 0.2 on nodes 1, 3, ..., 11
        preset('fig4b', trials=200, n_grid=(4000,))

    :param name: a key of ``PRESETS``
    :return: an ExperimentSpec
    """
    if name not in PRESETS:
        raise UnknownPreset(f'No preset named "{name}"; choose one of {", ".join(PRESETS)}.')
    spec = PRESETS[name]()
    overrides = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(overrides) - {f.name for f in fields(ExperimentSpec)}
    if unknown:
        raise DomainError(f'Presets have no fields {sorted(unknown)}.')
    return replace(spec, **overrides) if overrides else spec



def named_tree(kind, d):
    """Like `make_named_tree`, with ``hybrid`` standing for the 12-node and 10-node hybrids of the experiments."""
    if kind == 'hybrid':
        return make_named_tree('hybrid12' if d == 12 else 'gauss_hybrid10', d)
    return make_named_tree(kind, d)



def load_spec(path):
    """Reads an ExperimentSpec from a JSON file.

    The file either names a ``preset`` and overrides some of its fields, or describes the experiment in full:

    ..  code-block:: javascript

        {"preset": "fig4b", "trials": 500, "n_grid": [1000, 4000]}

        {"id": "chain8", "model": "ising", "structure": "chain", "d": 8, "rho": 0.7,
         "noise_pattern": "odd", "noise_value": 0.1, "n_grid": [1000, 2000], "estimators": ["KA", "SGA"]}

    In the full form, the tree comes from ``structure`` and ``d`` (a named structure), from ``edges`` or from a
    ``tree_file`` in the plain-text tree format. The edge parameter may be given as ``rho``, ``w`` or ``param``.

    :param path: the JSON file
    :return: an ExperimentSpec
    """
    data = get_json_object(path)
    if not data:
        raise FileFormatError(f'"{path}" holds an empty JSON object.')
    if 'preset' in data:
        name = data.pop('preset')
        if 'n_grid' in data:
            data['n_grid'] = tuple(data['n_grid'])
        return preset(name, **data)
    try:
        if 'tree_file' in data:
            tree = read_tree(data.pop('tree_file'))
        elif 'edges' in data:
            tree = TreeStructure(data.pop('d', None) or len(data['edges']) + 1, data.pop('edges'))
        else:
            kind, d = data['structure'], data.pop('d')
            tree = named_tree(kind, d)
        spec = ExperimentSpec(
            id=data.pop('id'),
            model=data.pop('model', 'ising'),
            structure=data.pop('structure', 'custom'),
            trees=(tree,),
            param=data.pop(next((k for k in ('rho', 'w') if k in data), 'param')),
            noise_pattern=data.pop('noise_pattern', 'none'),
            noise_value=data.pop('noise_value', 0.0),
            n_grid=tuple(data.pop('n_grid')),
            trials=data.pop('trials', None),
            estimators=tuple(data.pop('estimators', ESTIMATORS)),
            seed=data.pop('seed', None),
        )
    except KeyError as e:
        raise FileFormatError(f'"{path}" is missing the field {e}.')
    except TypeError as e:
        raise FileFormatError(f'"{path}" has a malformed field: {e}.')
    if data:
        raise FileFormatError(f'"{path}" has unknown fields {sorted(data)}.')
    return spec
