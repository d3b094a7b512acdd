"""The ``noisytree`` command line.

..  code-block:: bash

    noisytree recover --samples y.csv --rho-min 0.6 --rho-max 0.8 --qmax 0.2 --classifier sga --out tree.txt
    noisytree bounds --d 100 --tau 0.05 --rho-min 0.5 --rho-max 0.8 --qmax 0.1
    noisytree exponent --scenario chain_vs_rho --grid 0.4,0.74
    noisytree experiment --preset fig4b --trials 2000 --workers 4 --out fig4b.csv
    noisytree verify-fano --t 3 --rho-min 0.5 --rho-max 0.8 --qmax 0.1
    noisytree presets
"""
import argparse
import logging
import sys

from dataclasses import replace

from . import NOISYTREE_HARNESS
from .builders import get_builder
from .exceptions import DomainError, NoisyTreeError
from .harness import PRESETS, load_spec, preset, results_csv, run_experiment, write_results
from .sim import empirical_correlations
from .theory import (
    SCENARIOS, exponent_curves, fano_family, necessary_samples, sufficient_samples_improved, sufficient_samples_ka,
    verify_fano_family
)
from .utils import format_tree, get_csv_content, read_samples, write_text, write_tree

log = logging.getLogger(__name__)




def parse_grid(value, kind=float):
    try:
        return tuple(kind(x) for x in value.split(',') if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f'"{value}" is not a comma-separated list of numbers.')



def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog='noisytree', description='Learn tree models from noisy samples.')
    parser.add_argument('-v', '--verbose', action='store_true', help='log debug messages')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('recover', help='estimate a tree from a sample CSV')
    p.add_argument('--samples', required=True, help='CSV with one sample per row')
    p.add_argument('--rho-min', type=float)
    p.add_argument('--rho-max', type=float)
    p.add_argument('--qmax', type=float, default=0.0, help='q_max (Ising) or S_max (Gaussian)')
    p.add_argument('--classifier', choices=('ka', 'sga', 'cl'), default='sga')
    p.add_argument('--model', choices=('ising', 'gaussian'), default='ising')
    p.add_argument('--out', help='tree file to write; printed to stdout when omitted')

    p = sub.add_parser('bounds', help='print the sample-complexity bounds')
    p.add_argument('--d', type=int, required=True)
    p.add_argument('--tau', type=float, default=0.05)
    p.add_argument('--rho-min', type=float, required=True)
    p.add_argument('--rho-max', type=float, required=True)
    p.add_argument('--qmax', type=float, default=0.0)

    p = sub.add_parser('exponent', help='compute error-exponent curves of the 4-node scenarios')
    p.add_argument('--scenario', choices=sorted(SCENARIOS), required=True)
    p.add_argument('--grid', type=parse_grid, help='comma-separated parameter values')
    p.add_argument('--out', help='CSV to write; printed to stdout when omitted')

    p = sub.add_parser('experiment', help='run a Monte Carlo experiment')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--preset', choices=sorted(PRESETS))
    source.add_argument('--spec', help='JSON experiment spec')
    p.add_argument('--trials', type=int)
    p.add_argument('--n-grid', type=lambda v: parse_grid(v, int))
    p.add_argument('--seed', type=int)
    p.add_argument('--workers', type=int, default=NOISYTREE_HARNESS['workers'])
    p.add_argument('--out', help='CSV to write; printed to stdout when omitted')

    p = sub.add_parser('verify-fano', help='check the impossibility family exactly')
    p.add_argument('--t', type=int, required=True)
    p.add_argument('--rho-min', type=float, required=True)
    p.add_argument('--rho-max', type=float, required=True)
    p.add_argument('--qmax', type=float, default=0.0)

    sub.add_parser('presets', help='list the experiment presets')
    return parser.parse_args(argv)




# COMMANDS
def cmd_recover(args):
    if args.classifier != 'cl' and (args.rho_min is None or args.rho_max is None):
        raise DomainError('--rho-min and --rho-max are required for the quartet estimators.')
    builder = get_builder(args.classifier, args.rho_min, args.rho_max, args.qmax, args.model)
    tree = builder.build(empirical_correlations(read_samples(args.samples)))
    if args.out:
        write_tree(tree, args.out)
    else:
        print(format_tree(tree))
    return 0



def cmd_bounds(args):
    try:
        necessary = f'{necessary_samples(args.d, args.rho_min, args.rho_max, args.qmax):.6g}'
    except DomainError:
        if args.d > 32:
            raise
        necessary = 'n/a (d <= 32)'
    ka = sufficient_samples_ka(args.d, args.tau, args.rho_min, args.rho_max, args.qmax)
    improved = sufficient_samples_improved(args.d, args.tau, args.rho_min, args.rho_max, args.qmax)
    print(f'necessary: {necessary}')
    print(f'sufficient (KA): {ka:.6g}')
    print(f'sufficient (improved, KA): {improved:.6g}')
    print(f'sufficient (SGA): {improved:.6g}')
    return 0



def cmd_exponent(args):
    curves = exponent_curves(args.scenario, args.grid)
    rows = [[SCENARIOS[args.scenario]['vary'], 'E_KA', 'E_SGA']] + [list(r) for r in curves]
    emit(get_csv_content(rows), args.out)
    return 0



def cmd_experiment(args):
    overrides = {'trials': args.trials, 'n_grid': args.n_grid, 'seed': args.seed}
    if args.preset:
        spec = preset(args.preset, **overrides)
    else:
        spec = load_spec(args.spec)
        if any(v is not None for v in overrides.values()):
            spec = with_overrides(spec, overrides)
    log.info(f'Running {spec.id}: {len(spec.trees)} tree(s), n={spec.n_grid}, {spec.trials} trials.')
    result = run_experiment(spec, workers=args.workers)
    if args.out:
        write_results(result, args.out)
    else:
        emit(results_csv(result), None)
    return 0



def cmd_verify_fano(args):
    report = verify_fano_family(fano_family(args.t, args.rho_min, args.rho_max, args.qmax))
    print(f'disjoint classes: {report.disjoint}')
    print(f'exact J: {report.exact[0]:.12g} (all {len(report.exact)} members within {report.max_error:.3g})')
    print(f'closed form, rho_q = (1 - 2q) rho_min: {report.closed_form:.12g}')
    print(f'variant, rho_q = (1 - q) rho_min: {report.proof_variant:.12g}')
    print(f'matched: {report.matched}')
    return 0 if report.ok else 1



def cmd_presets(args):
    for name in PRESETS:
        spec = preset(name)
        print(f'{name}: {spec.model} {spec.structure} param={spec.param} noise={spec.noise_pattern}'
              f'({spec.noise_value}) trees={len(spec.trees)} n={",".join(map(str, spec.n_grid))}')
    return 0



COMMANDS = {
    'bounds': cmd_bounds,
    'experiment': cmd_experiment,
    'exponent': cmd_exponent,
    'presets': cmd_presets,
    'recover': cmd_recover,
    'verify-fano': cmd_verify_fano,
}




# HELPERS
def emit(text, path):
    if path:
        write_text(path, text)
    else:
        sys.stdout.write(text)



def with_overrides(spec, overrides):
    return replace(spec, **{k: v for k, v in overrides.items() if v is not None})



def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except NoisyTreeError as e:
        print(f'noisytree: {e.__class__.__name__}: {e}', file=sys.stderr)
        return 2



if __name__ == '__main__':
    sys.exit(main())
