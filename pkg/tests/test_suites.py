import numpy as np
import pytest

from pharmonic.config import RunConfig
from pharmonic.geometry import make_grid
from pharmonic.measure import MeasureConfig
from pharmonic.pde import AnnulusConfig
from pharmonic.suites import (
    SUITES,
    centroid_suite,
    gradient_bound_suite,
    homogeneity_suite,
    metric_suite,
    radial_suite,
    run_suites,
    translation_suite,
    weak_convergence_suite,
)


def coarse_cfg(M, Ns, Ntheta, **annulus):
    return MeasureConfig(annulus=AnnulusConfig(Ns=Ns, Ntheta=Ntheta, **annulus), grid=make_grid(M))


def test_radial_suite_reports_every_exponent(radial_cfg):
    result = radial_suite(radial_cfg)
    assert result.name == 'radial'
    assert len(result.details) == 4
    assert result.worst <= 0.03


@pytest.mark.parametrize('suite', [centroid_suite, translation_suite, homogeneity_suite, gradient_bound_suite, metric_suite])
def test_suite_passes_on_a_coarse_configuration(small_cfg, suite):
    result = suite(small_cfg)
    assert result.passed, result.details
    assert result.worst <= result.tolerance


def test_weak_convergence_fails_when_polygons_coincide_with_the_grid():
    # every direction of a 16-grid is a vertex of the 16-, 32- and 64-gon
    result = weak_convergence_suite(coarse_cfg(16, 8, 16))
    assert not result.passed
    assert result.worst == np.inf
    assert any(line.startswith('mu, f=1:') and line.endswith('NOT decreasing') for line in result.details)


def test_weak_convergence_passes_once_the_grid_resolves_the_polygons():
    result = weak_convergence_suite(coarse_cfg(128, 16, 128))
    assert result.passed, result.details
    assert result.worst < 1.0
    assert len(result.details) == 6


def test_gradient_bound_with_a_pinned_obstacle(small_cfg):
    # a family constant derived from rho_factor would sit below the disk gradient 1 / ln(5/3)
    cfg = small_cfg.model_copy(update={'annulus': small_cfg.annulus.model_copy(update={'rho': 0.6, 'obstacle_center': (0.0, 0.0)})})
    result = gradient_bound_suite(cfg)
    assert result.passed, result.details
    disk_gradient = float(result.details[0].split('max gradient ')[1].split(',')[0])
    assert disk_gradient > 1.0 / (0.95 - 0.4)


def test_library_errors_fail_their_suite_only(small_cfg):
    cfg = small_cfg.model_copy(update={'annulus': small_cfg.annulus.model_copy(update={'rho': 0.95, 'obstacle_center': (0.0, 0.0)})})
    results = run_suites(cfg, names=['metric', 'centroid'])
    assert [r.name for r in results] == ['metric', 'centroid']
    assert results[0].passed
    assert not results[1].passed
    assert results[1].worst == np.inf
    assert results[1].details[0].startswith('obstacle-clearance')


@pytest.mark.slow
def test_default_configuration_passes_every_suite():
    results = run_suites(RunConfig().measure_config())
    assert [r.name for r in results] == list(SUITES)
    for result in results:
        assert result.passed, (result.name, result.details)
