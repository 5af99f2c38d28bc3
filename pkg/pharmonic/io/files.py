""" Body JSON, measure CSV, diagnostics CSV, variation reports and mesh dumps """
import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence, get_args

import numpy as np

from pharmonic.errors import InputOutputError, ValidationFailure
from pharmonic.geometry import DirectionGrid, SupportFunction, make_grid, support_of_polygon
from pharmonic.logger import setup_logger
from pharmonic.measure import Provenance, SphericalMeasure
from pharmonic.pde import AnnulusMesh, PHarmonicSolution

logger = setup_logger('files')

MEASURE_COLUMNS = ['theta', 'density']
DIAGNOSTIC_COLUMNS = ['iter', 'objective', 'residual', 'gamma', 'step']
SOLUTION_COLUMNS = ['s_index', 'theta_index', 'x', 'y', 'u']


def _fmt(value) -> str:
    """Shortest round-tripping text for floats, plain text otherwise."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise InputOutputError('file-unreadable', f'{path}: {e.strerror}') from e


def _ensure_parent(path: str) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputOutputError('file-unwritable', f'{path}: {e.strerror}') from e
    return target


def file_digest(paths: Iterable[str], extra: str = '') -> str:
    digest = hashlib.sha256(extra.encode())
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()[:16]


# Bodies
def read_body(path: str, grid: Optional[DirectionGrid] = None) -> SupportFunction:
    """
    Read {"grid_size": M, "support": [...]} or {"vertices": [[x, y], ...]}.
    Polygons are sampled on `grid`, which is then required.

    Raises:
        InputOutputError: unreadable file, JSON syntax error (with line) or missing key.
    """
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputOutputError('parse-error', f'{path}, line {e.lineno}: {e.msg}') from e
    if not isinstance(data, dict):
        raise InputOutputError('parse-error', f'{path}: body file must hold a JSON object')

    if 'vertices' in data:
        if grid is None:
            raise InputOutputError('parse-error', f"{path}: 'vertices' body needs a grid size from the configuration")
        try:
            vertices = np.asarray(data['vertices'], dtype=float)
        except (TypeError, ValueError) as e:
            raise InputOutputError('parse-error', f"{path}: key 'vertices' must be a list of [x, y] pairs") from e
        return support_of_polygon(vertices, grid)

    for key in ('grid_size', 'support'):
        if key not in data:
            raise InputOutputError('parse-error', f"{path}: missing key '{key}'")
    try:
        M = int(data['grid_size'])
        support = np.asarray(data['support'], dtype=float)
    except (TypeError, ValueError) as e:
        raise InputOutputError('parse-error', f"{path}: key 'support' must be a list of numbers") from e
    if grid is not None and grid.M != M:
        raise ValidationFailure('grid-mismatch', f'{path} has grid_size {M}, configuration uses {grid.M}')
    return SupportFunction(grid=make_grid(M), h=support)


def write_body(path: str, K: SupportFunction) -> str:
    target = _ensure_parent(path)
    payload = {'grid_size': K.M, 'support': [float(v) for v in K.h]}
    target.write_text(json.dumps(payload, indent=2) + '\n')
    logger.info(f'wrote body to {path}')
    return str(target)


# Measures
def write_measure_csv(path: str, m: SphericalMeasure) -> str:
    """Comment header with p, q, provenance and grid size, then theta,density rows."""
    target = _ensure_parent(path)
    with target.open('w', newline='') as f:
        f.write(f'# p={_fmt(m.p) if m.p is not None else ""}\n')
        f.write(f'# q={_fmt(m.q) if m.q is not None else ""}\n')
        f.write(f'# provenance={m.provenance}\n')
        f.write(f'# grid_size={m.grid.M}\n')
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(MEASURE_COLUMNS)
        for theta, value in zip(m.grid.angles, m.density):
            writer.writerow([_fmt(theta), _fmt(value)])
    logger.info(f'wrote measure to {path}')
    return str(target)


def read_measure_csv(path: str) -> SphericalMeasure:
    """
    Raises:
        InputOutputError: malformed header or rows, naming the offending line.
        ValidationFailure: angles that do not form the uniform grid.
    """
    lines = _read_text(path).splitlines()
    meta = {}
    body_start = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.startswith('#'):
            body_start = lineno - 1
            break
        key, _, value = line[1:].strip().partition('=')
        meta[key.strip()] = value.strip()
    else:
        raise InputOutputError('parse-error', f'{path}: no data rows')

    reader = csv.reader(lines[body_start:])
    header = next(reader, None)
    if header != MEASURE_COLUMNS:
        raise InputOutputError('parse-error', f'{path}, line {body_start + 1}: expected header {",".join(MEASURE_COLUMNS)}')
    thetas, density = [], []
    for offset, row in enumerate(reader, start=body_start + 2):
        if not row:
            continue
        try:
            theta, value = (float(v) for v in row)
        except ValueError as e:
            raise InputOutputError('parse-error', f'{path}, line {offset}: expected two numbers') from e
        thetas.append(theta)
        density.append(value)

    M = _header_value(path, meta, 'grid_size', int) or len(density)
    if len(density) != M:
        raise InputOutputError('parse-error', f'{path}: grid_size {M} but {len(density)} rows')
    grid = make_grid(M)
    if not np.allclose(thetas, grid.angles, atol=1e-9):
        raise ValidationFailure('grid-mismatch', f'{path}: angles are not the uniform grid of {M} directions')
    provenance = meta.get('provenance') or 'target'
    if provenance not in get_args(Provenance):
        raise InputOutputError(
            'parse-error', f'{path}: unknown provenance {provenance!r}, expected one of {", ".join(get_args(Provenance))}'
        )
    return SphericalMeasure(
        grid=grid,
        density=density,
        provenance=provenance,
        p=_header_value(path, meta, 'p', float),
        q=_header_value(path, meta, 'q', float),
    )


def _header_value(path: str, meta: dict[str, str], key: str, cast):
    if not meta.get(key):
        return None
    try:
        return cast(meta[key])
    except ValueError as e:
        raise InputOutputError('parse-error', f'{path}: header {key}={meta[key]!r} is not a number') from e


# Tables
def write_rows(path: str, columns: Sequence[str], rows: Iterable[dict]) -> str:
    target = _ensure_parent(path)
    with target.open('w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    logger.info(f'wrote {path}')
    return str(target)


def write_diagnostics_csv(path: str, trace: Sequence) -> str:
    return write_rows(path, DIAGNOSTIC_COLUMNS, (row.model_dump() for row in trace))


def write_reports_csv(path: str, reports: Sequence, labels: Optional[Sequence[tuple[str, str]]] = None) -> str:
    """One row per variation report; `labels` names the (K, L) bodies of each row."""
    columns = ['K', 'L'] + list(type(reports[0]).model_fields) if reports else ['K', 'L']
    rows = []
    for k, report in enumerate(reports):
        K_label, L_label = labels[k] if labels else (report.K_id, report.L_id)
        rows.append({'K': K_label, 'L': L_label, **report.model_dump()})
    return write_rows(path, columns, rows)


def write_solution_csv(path: str, mesh: AnnulusMesh, sol: PHarmonicSolution) -> str:
    """Mesh dump with columns s_index, theta_index, x, y, u."""
    U = sol.grid_values(mesh)
    rows = (
        {'s_index': i, 'theta_index': j, 'x': mesh.nodes[i, j, 0], 'y': mesh.nodes[i, j, 1], 'u': U[i, j]}
        for i in range(mesh.Ns + 1)
        for j in range(mesh.Ntheta)
    )
    return write_rows(path, SOLUTION_COLUMNS, rows)


def write_json(path: str, payload: dict) -> str:
    target = _ensure_parent(path)
    target.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + '\n')
    return str(target)
