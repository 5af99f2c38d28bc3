import csv
import json

import numpy as np
import pytest

from pharmonic.errors import InputOutputError, ValidationFailure
from pharmonic.geometry import make_grid, support_of_ellipse
from pharmonic.io.files import (
    DIAGNOSTIC_COLUMNS,
    SOLUTION_COLUMNS,
    read_body,
    read_measure_csv,
    write_body,
    write_diagnostics_csv,
    write_measure_csv,
    write_solution_csv,
)
from pharmonic.measure import lq_measure
from pharmonic.minkowski import TraceRow
from pharmonic.pde import AnnulusConfig, solve_body


def test_read_support_body(body_file):
    K = read_body(body_file())
    assert K.M == 32
    assert K.h == pytest.approx(support_of_ellipse(1.5, 1.0, make_grid(32)).h)
    with pytest.raises(ValidationFailure) as e:
        read_body(body_file(), make_grid(64))
    assert e.value.code == 'grid-mismatch'


def test_read_polygon_body(tmp_path):
    path = tmp_path / 'square.json'
    path.write_text(json.dumps({'vertices': [[1, 1], [-1, 1], [-1, -1], [1, -1]]}))
    K = read_body(str(path), make_grid(32))
    assert K.h[0] == pytest.approx(1.0)
    assert K.h[4] == pytest.approx(np.sqrt(2.0))
    with pytest.raises(InputOutputError):
        read_body(str(path))


def test_missing_key_is_named(tmp_path):
    path = tmp_path / 'body.json'
    path.write_text(json.dumps({'grid_size': 32}))
    with pytest.raises(InputOutputError) as e:
        read_body(str(path))
    assert e.value.code == 'parse-error'
    assert "'support'" in e.value.message
    assert e.value.exit_code == 4


def test_json_errors_carry_the_line(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{\n  "grid_size": 32,\n  "support": [1.0,\n}\n')
    with pytest.raises(InputOutputError) as e:
        read_body(str(path))
    assert 'line 4' in e.value.message


def test_unreadable_body(tmp_path):
    with pytest.raises(InputOutputError) as e:
        read_body(str(tmp_path / 'missing.json'))
    assert e.value.code == 'file-unreadable'


def test_body_file_is_exact(tmp_path):
    K = support_of_ellipse(1.5, 1.0, make_grid(32), rotation=0.3)
    path = write_body(str(tmp_path / 'out' / 'body.json'), K)
    assert np.array_equal(read_body(path).h, K.h)


def test_measure_csv(tmp_path, small_cfg):
    K = support_of_ellipse(1.5, 1.0, small_cfg.grid)
    mu_q = lq_measure(K, 0.5, small_cfg)
    path = write_measure_csv(str(tmp_path / 'measure.csv'), mu_q)

    lines = open(path).read().splitlines()
    assert lines[:5] == ['# p=2.0', '# q=0.5', '# provenance=lq', '# grid_size=64', 'theta,density']
    back = read_measure_csv(path)
    assert np.array_equal(back.density, mu_q.density)
    assert (back.p, back.q, back.provenance) == (2.0, 0.5, 'lq')


def test_measure_csv_errors(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text('# grid_size=8\ntheta,density\n0.0,1.0\n0.785,oops\n')
    with pytest.raises(InputOutputError) as e:
        read_measure_csv(str(path))
    assert 'line 4' in e.value.message

    path.write_text('theta,mass\n0.0,1.0\n')
    with pytest.raises(InputOutputError):
        read_measure_csv(str(path))

    angles = np.linspace(0.0, 1.0, 8)
    path.write_text('theta,density\n' + ''.join(f'{a!r},1.0\n' for a in angles))
    with pytest.raises(ValidationFailure) as e:
        read_measure_csv(str(path))
    assert e.value.code == 'grid-mismatch'


@pytest.mark.parametrize('header', ['# provenance=measured', '# p=two', '# grid_size=eight'])
def test_measure_csv_header_errors(tmp_path, header):
    path = tmp_path / 'bad.csv'
    angles = make_grid(8).angles
    path.write_text(header + '\ntheta,density\n' + ''.join(f'{a!r},1.0\n' for a in angles))
    with pytest.raises(InputOutputError) as e:
        read_measure_csv(str(path))
    assert e.value.code == 'parse-error'
    assert e.value.exit_code == 4


def test_solution_dump(tmp_path):
    grid = make_grid(32)
    cfg = AnnulusConfig(Ns=4, Ntheta=16)
    mesh, sol = solve_body(support_of_ellipse(1.5, 1.0, grid), cfg)
    path = write_solution_csv(str(tmp_path / 'solution.csv'), mesh, sol)
    with open(path) as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == SOLUTION_COLUMNS
    assert len(rows) == 5 * 16
    assert float(rows[0]['u']) == pytest.approx(1.0)
    assert float(rows[-1]['u']) == pytest.approx(0.0, abs=1e-12)


def test_diagnostics_csv(tmp_path):
    trace = [TraceRow(iter=0, objective=6.0, residual=0.3, gamma=6.28, step=0.0),
             TraceRow(iter=1, objective=5.9, residual=0.1, gamma=6.28, step=1.0)]
    path = write_diagnostics_csv(str(tmp_path / 'diagnostics.csv'), trace)
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == DIAGNOSTIC_COLUMNS
    assert rows[2] == ['1', '5.9', '0.1', '6.28', '1.0']
