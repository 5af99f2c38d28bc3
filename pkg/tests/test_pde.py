import numpy as np
import pytest
from pydantic import ValidationError

from pharmonic.errors import ConvergenceFailure, ValidationFailure
from pharmonic.geometry import make_grid, polygon_is_convex, regular_polygon, support_of_ball, support_of_ellipse, translate
from pharmonic.pde import (
    AnnulusConfig,
    build_mesh,
    gradient_bound,
    level_set,
    radial_oracle,
    resolve_obstacle,
    solve_body,
    solve_plaplace,
)


@pytest.mark.parametrize('p, expected', [
    (2.0, 1.0 / np.log(2.0)),
    (1.5, 1.0),
    (4.0, (2.0 / 3.0) / (1.0 - 0.5 ** (2.0 / 3.0))),
])
def test_radial_oracle_slope(p, expected):
    u, g = radial_oracle(1.0, 0.5, p)
    assert g == pytest.approx(expected, rel=1e-4)
    assert u(0.5) == pytest.approx(1.0)
    assert u(1.0) == pytest.approx(0.0, abs=1e-15)


def test_radial_oracle_scales():
    _, g = radial_oracle(2.0, 1.0, 2.0)
    assert g == pytest.approx(1.0 / (2.0 * np.log(2.0)))
    with pytest.raises(ValidationFailure):
        radial_oracle(1.0, 1.5, 2.0)


def test_config_rejects_p_at_most_one():
    with pytest.raises(ValidationError):
        AnnulusConfig(p=1.0)
    with pytest.raises(ValidationError):
        AnnulusConfig(n=3)


def test_mesh_rings_of_the_disk():
    grid = make_grid(64)
    cfg = AnnulusConfig(rho=0.5, obstacle_center=(0.0, 0.0), Ns=4, Ntheta=16)
    mesh = build_mesh(support_of_ball(1.0, (0.0, 0.0), grid), cfg)
    radii = np.linalg.norm(mesh.nodes, axis=-1)
    assert np.allclose(radii, np.array([0.5, 0.625, 0.75, 0.875, 1.0])[:, None])
    assert len(mesh.triangles) == 2 * 4 * 16


def test_mesh_follows_the_boundary():
    grid = make_grid(128)
    K = support_of_ellipse(2.0, 1.0, grid)
    mesh = build_mesh(K, AnnulusConfig(Ns=4, Ntheta=32))
    assert mesh.nodes[-1, 0] == pytest.approx((2.0, 0.0))
    assert mesh.nodes[-1, 8] == pytest.approx((0.0, 1.0), abs=1e-12)
    assert mesh.rho == pytest.approx(0.4)


def test_obstacle_is_derived_from_the_body():
    grid = make_grid(64)
    K = translate(support_of_ellipse(1.5, 1.0, grid), (0.2, 0.1))
    center, rho, pinned = resolve_obstacle(K, AnnulusConfig())
    assert np.allclose(center, (0.2, 0.1), atol=1e-9)
    assert rho == pytest.approx(0.4)
    assert pinned.rho == pytest.approx(0.4)

    _, rho_mw, _ = resolve_obstacle(K, AnnulusConfig(rho_scale='mean-width'))
    assert rho_mw == pytest.approx(0.4 * np.mean(support_of_ellipse(1.5, 1.0, grid).h))


def test_obstacle_clearance():
    grid = make_grid(64)
    ball = support_of_ball(1.0, (0.0, 0.0), grid)
    with pytest.raises(ValidationFailure) as e:
        build_mesh(ball, AnnulusConfig(rho=0.95, obstacle_center=(0.0, 0.0)))
    assert e.value.code == 'obstacle-clearance'


def test_laplace_needs_a_single_picard_step():
    grid = make_grid(64)
    cfg = AnnulusConfig(p=2.0, Ns=8, Ntheta=64)
    mesh = build_mesh(support_of_ellipse(1.5, 1.0, grid), cfg)
    sol = solve_plaplace(mesh, cfg)
    assert sol.iterations == 1
    assert sol.converged
    assert sol.residual < 1e-8


@pytest.mark.parametrize('p', [1.5, 2.0, 2.5, 4.0])
def test_disk_matches_ring_solution(radial_cfg, p):
    ball = support_of_ball(1.0, (0.0, 0.0), radial_cfg.grid)
    cfg = radial_cfg.annulus.model_copy(update={'p': p})
    mesh, sol = solve_body(ball, cfg)
    u_exact, g_exact = radial_oracle(1.0, 0.5, p)
    r = np.linalg.norm(mesh.points, axis=1)
    assert np.abs(sol.u - u_exact(r)).max() <= 0.01
    assert sol.boundary_gradient == pytest.approx(np.full(ball.M, g_exact), rel=0.01)


def test_large_disk_gradient():
    grid = make_grid(128)
    cfg = AnnulusConfig(rho=1.0, obstacle_center=(0.0, 0.0), Ns=64, Ntheta=128)
    _, sol = solve_body(support_of_ball(2.0, (0.0, 0.0), grid), cfg)
    assert sol.boundary_gradient == pytest.approx(np.full(grid.M, 1.0 / (2.0 * np.log(2.0))), rel=0.01)


@pytest.mark.parametrize('p', [1.5, 2.5])
def test_maximum_principle_and_monotone_rays(p):
    grid = make_grid(64)
    cfg = AnnulusConfig(p=p, Ns=16, Ntheta=64)
    mesh, sol = solve_body(support_of_ellipse(1.5, 1.0, grid), cfg)
    assert sol.u.min() >= -1e-12
    assert sol.u.max() <= 1.0 + 1e-12
    U = sol.grid_values(mesh)
    assert np.all(np.diff(U, axis=0) < 0.0)


def test_level_sets_are_convex():
    grid = make_grid(64)
    cfg = AnnulusConfig(p=2.5, Ns=16, Ntheta=64)
    mesh, sol = solve_body(support_of_ellipse(1.5, 1.0, grid), cfg)
    for level in (0.25, 0.5, 0.75):
        assert polygon_is_convex(level_set(sol, mesh, level), tol=1e-6)
    with pytest.raises(ValidationFailure):
        level_set(sol, mesh, 1.0)


def test_gradient_stays_below_barrier_bound():
    grid = make_grid(64)
    cfg = AnnulusConfig(p=2.0, Ns=16, Ntheta=64)
    K = support_of_ellipse(2.0, 1.0, grid)
    _, sol = solve_body(K, cfg)
    assert np.all(sol.boundary_gradient <= 1.02 * gradient_bound(K, cfg))


def test_picard_iteration_cap():
    grid = make_grid(64)
    cfg = AnnulusConfig(p=4.0, Ns=8, Ntheta=64, max_iters=1)
    mesh = build_mesh(support_of_ball(1.0, (0.0, 0.0), grid), cfg)
    with pytest.raises(ConvergenceFailure) as e:
        solve_plaplace(mesh, cfg)
    assert e.value.code == 'no-convergence'
    assert e.value.iterations == 1


def test_polygon_gradients_approach_the_disk():
    """Boundary gradient at edge midpoints of regular m-gons tends to the disk value."""
    grid = make_grid(128)
    cfg = AnnulusConfig(rho=0.3, obstacle_center=(0.0, 0.0), Ns=32, Ntheta=128)
    _, disk = solve_body(support_of_ball(1.0, (0.0, 0.0), grid), cfg)
    errors = []
    for m in (8, 16, 32):
        _, sol = solve_body(regular_polygon(m, grid), cfg)
        midpoints = (2 * np.arange(m) + 1) * grid.M // (2 * m)
        errors.append(np.abs(sol.boundary_gradient[midpoints] - disk.boundary_gradient[midpoints]).max())
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.slow
def test_mesh_refinement_order():
    errors = []
    for Ns, Nt in ((16, 64), (32, 128), (64, 256)):
        cfg = AnnulusConfig(rho=0.5, obstacle_center=(0.0, 0.0), Ns=Ns, Ntheta=Nt)
        _, sol = solve_body(support_of_ball(1.0, (0.0, 0.0), make_grid(Nt)), cfg)
        errors.append(np.abs(sol.boundary_gradient - 1.0 / np.log(2.0)).max())
    assert errors[-1] <= errors[0] / 2.0 ** 3
