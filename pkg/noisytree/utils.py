# -*- coding: utf-8 -*-
import csv
import json

from io import StringIO

import numpy as np

from .exceptions import FileFormatError
from .models import GaussianNoiseSpec, IsingNoiseSpec, IsingTreeModel, gaussian_model
from .trees import TreeStructure




class ResultDialect(csv.excel):
    """Excel-style CSV with LF line endings."""
    lineterminator = '\n'




# CSV / JSON
def get_csv_content(rows, headers=None, dialect=ResultDialect):
    """Returns ``rows`` as a CSV string, ready to be written to a file.

    ``rows`` here may take one of the following forms:

    ..  code-block:: python

        records = [
            ResultRow('fig4b', 'chain12', 12, 0.8, 'odd(0.2)', 500, 'KA', 2000, 1234, 0.617, 0.0109),
            ResultRow('fig4b', 'chain12', 12, 0.8, 'odd(0.2)', 500, 'SGA', 2000, 987, 0.4935, 0.0112),
        ]

        list_of_lists = [
            ['rho', 'E_KA', 'E_SGA'],
            [0.4, 0.0021, 0.0047],
        ]

    Records are namedtuples such as ``ResultRow`` or ``FamilyRow``; their field names make the header row, and
    ``headers`` can rename some of them. For ``list_of_lists``, headers, if desired, should be included as the first
    row and data rows thereafter.

    :param rows: a list of namedtuples or a list of lists
    :param headers: for records, a dict mapping field names to the column names to write instead
    :param dialect: the dialect in which to write the CSV
    :return: a string, ready for writing to a file
    """
    f = StringIO()
    if rows:
        if hasattr(rows[0], '_fields'):
            rows = get_rows_from_records(rows, headers)
        csv.writer(f, dialect).writerows(rows)
    return f.getvalue()



def get_json_object(path):
    """Returns the JSON object stored at ``path`` as a dict.

    :param path: the path to a json file
    :return: a dict of file contents
    :raises FileFormatError: if the file is missing, unreadable, malformed or holds something other than an object
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise FileFormatError(f'Cannot read "{path}": {e.strerror}.')
    except ValueError as e:
        raise FileFormatError(f'"{path}" is not valid JSON: {e}.')
    if not isinstance(data, dict):
        raise FileFormatError(f'"{path}" holds a JSON {type(data).__name__}, not an object.')
    return data



def get_rows_from_records(records, headers=None):
    """Transforms a list of namedtuples into a list of lists headed by their field names.

    :param records: namedtuples of one type
    :param headers: a dict renaming some fields in the header row
    :return: a list of lists, suitable for output as a CSV
    """
    headers = headers or {}
    return [[headers.get(k, k) for k in records[0]._fields]] + [list(r) for r in records]



def write_text(path, text):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)




# PLAIN-TEXT FORMATS
def read_lines(path):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return [line.split() for line in f if line.strip()]
    except OSError as e:
        raise FileFormatError(f'Cannot read "{path}": {e}')



def parse_tree(lines, path):
    try:
        d = int(lines[0][0])
        edges = [(int(i), int(j)) for i, j in (line[:2] for line in lines[1:d])]
    except (IndexError, ValueError):
        raise FileFormatError(f'"{path}" is not a tree file: expected "d" then d - 1 lines of "i j".')
    if len(edges) != d - 1 or any(len(line) != 2 for line in lines[1:d]):
        raise FileFormatError(f'"{path}" declares d={d} but does not list {d - 1} edges.')
    return TreeStructure(d, edges)



def read_model(path):
    """Reads a model file: a tree file followed by ``i j rho`` lines (Ising) or a single ``w`` line (Gaussian).

    :param path: the file path
    :return: an IsingTreeModel or a GaussianTreeModel
    """
    lines = read_lines(path)
    tree = parse_tree(lines, path)
    rest = lines[tree.d:]
    try:
        if len(rest) == 1 and len(rest[0]) == 1:
            return gaussian_model(tree, float(rest[0][0]))
        corr = {(int(i), int(j)): float(r) for i, j, r in rest}
    except ValueError:
        raise FileFormatError(f'"{path}" has malformed parameter lines after the tree.')
    return IsingTreeModel(tree, corr)



def read_noise(path, kind='ising'):
    """Reads a noise file, one ``q_i`` (``kind='ising'``) or ``sigma2_i`` (``kind='gaussian'``) per line."""
    try:
        values = [float(line[0]) for line in read_lines(path)]
    except ValueError:
        raise FileFormatError(f'"{path}" must hold one number per line.')
    return IsingNoiseSpec(values) if kind == 'ising' else GaussianNoiseSpec(values)



def read_samples(path):
    """Reads a sample CSV, one row per sample. Matrices made only of 1 and -1 come back as int8."""
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            rows = [row for row in csv.reader(f) if row]
        values = np.array([[float(x) for x in row] for row in rows])
    except OSError as e:
        raise FileFormatError(f'Cannot read "{path}": {e}')
    except ValueError:
        raise FileFormatError(f'"{path}" must be a rectangular CSV of numbers.')
    if values.ndim != 2 or not values.size:
        raise FileFormatError(f'"{path}" holds no samples.')
    if np.isin(values, (-1, 1)).all():
        return values.astype(np.int8)
    return values



def read_tree(path):
    """Reads a tree file: ``d`` on the first line, then one ``i j`` line per edge."""
    return parse_tree(read_lines(path), path)



def write_model(model, path):
    lines = [format_tree(model.tree)]
    if isinstance(model, IsingTreeModel):
        lines += [f'{i} {j} {model.edge_corr[(i, j)]!r}' for i, j in model.tree.edge_list]
    else:
        lines.append(repr(model.w))
    write_text(path, '\n'.join(lines) + '\n')



def write_noise(noise, path):
    values = noise.q if isinstance(noise, IsingNoiseSpec) else noise.variances
    write_text(path, ''.join(f'{v!r}\n' for v in values))



def write_samples(samples, path):
    """Writes a sample matrix as CSV; +1 / -1 matrices are written as ``1`` and ``-1``."""
    samples = np.asarray(samples)
    if np.issubdtype(samples.dtype, np.integer):
        rows = samples.tolist()
    else:
        rows = [[repr(float(x)) for x in row] for row in samples]
    write_text(path, get_csv_content(rows))



def write_tree(tree, path):
    write_text(path, format_tree(tree) + '\n')



def format_tree(tree):
    return '\n'.join([str(tree.d)] + [f'{i} {j}' for i, j in tree.edge_list])
