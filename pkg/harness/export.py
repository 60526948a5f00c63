"""CSV and JSON writers. Floats are written with 17 significant digits so every
double survives a round trip; nothing time-dependent goes into the CSV files."""
import csv
import json
import os

import numpy as np

FLOAT_FORMAT = '.17g'


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    return value


def write_json(path, payload):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
        handle.write('\n')
    return path


def snapshot_rows(t, grid, rho, phi, v, u, eps, psi=None):
    """Rows of the field snapshot schema: t, x, rho, Phi, v, u, eps_local[, re, im]."""
    for i, x in enumerate(grid.centers):
        row = [t, x, rho[i], phi[i], v[i], u[i], eps[i]]
        if psi is not None:
            row += [psi[i].real, psi[i].imag]
        yield row


SNAPSHOT_HEADER = ['t', 'x', 'rho', 'Phi', 'v', 'u', 'eps_local']
WAVEFUNCTION_HEADER = SNAPSHOT_HEADER + ['re', 'im']
TRAJECTORY_HEADER = ['step', 'time', 'particle_id', 'x']
HISTOGRAM_HEADER = ['x_center', 'rho']
