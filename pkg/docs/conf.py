# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

sys.path.insert(0, os.path.abspath('../'))

# Project information
# https://www.sphinx-doc.org/en/master/usage/configuration.html#project-information
project = 'Noisytree'
copyright = '2026'
author = ''
release = '0.0.1'

# General configuration
# https://www.sphinx-doc.org/en/master/usage/configuration.html#general-configuration
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
extensions = ['sphinx.ext.autodoc']
templates_path = ['_templates']


# Options for HTML output
# https://www.sphinx-doc.org/en/master/usage/configuration.html#options-for-html-output
html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']

# Global settings
rst_epilog = """
.. _assemble_tree: recovery.html#noisytree.recovery.assemble_tree
.. _build: builders.html#noisytree.builders.TreeBuilder.build
.. _chow_liu: recovery.html#noisytree.recovery.chow_liu
.. _classify_ka: quartets.html#noisytree.quartets.classify_ka
.. _classify_sga: quartets.html#noisytree.quartets.classify_sga
.. _detect_clusters: recovery.html#noisytree.recovery.detect_clusters
.. _equivalence_clusters: trees.html#noisytree.trees.equivalence_clusters
.. _error_exponent: theory.html#noisytree.theory.error_exponent
.. _experimentspec: harness.html#noisytree.harness.ExperimentSpec
.. _get_clusters: builders.html#noisytree.builders.TreeBuilder.get_clusters
.. _get_proximal_sets: builders.html#noisytree.builders.TreeBuilder.get_proximal_sets
.. _get_thresholds: builders.html#noisytree.builders.TreeBuilder.get_thresholds
.. _get_tree: builders.html#noisytree.builders.TreeBuilder.get_tree
.. _noise_ratios: models.html#noisytree.models.noise_ratios
.. _proximal_sets: recovery.html#noisytree.recovery.proximal_sets
.. _prepare_correlations: recovery.html#noisytree.recovery.prepare_correlations
.. _query: recovery.html#noisytree.recovery.QuartetTable.query
.. _run_experiment: harness.html#noisytree.harness.run_experiment
.. _spin_states: models.html#noisytree.models.spin_states
.. _substream: sim.html#noisytree.sim.substream
.. _thresholds_gaussian: recovery.html#noisytree.recovery.thresholds_gaussian
.. _thresholds_ising: recovery.html#noisytree.recovery.thresholds_ising
.. _verify_fano_family: theory.html#noisytree.theory.verify_fano_family
"""
