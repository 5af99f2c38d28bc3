import numpy as np
import pytest

from pharmonic.errors import ValidationFailure
from pharmonic.geometry import (
    BodyTransform,
    SupportFunction,
    body_centroid,
    boundary_point,
    curvature_density,
    hausdorff,
    inner_center,
    inradius,
    make_grid,
    perimeter,
    polygon_is_convex,
    q_sum,
    qsum_step_bound,
    radial_function,
    random_body,
    regular_polygon,
    rounded_square,
    scale,
    support_of_ball,
    support_of_ellipse,
    support_of_polygon,
    translate,
    wulff_shape,
)

SQUARE = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]


def test_grid_needs_eight_directions():
    with pytest.raises(ValidationFailure) as e:
        make_grid(4)
    assert e.value.code == 'grid-too-coarse'
    assert make_grid(8).spacing == pytest.approx(np.pi / 4)


def test_grid_angles_and_directions(grid):
    assert grid.angles[64] == pytest.approx(np.pi / 2)
    assert np.allclose(np.linalg.norm(grid.directions, axis=1), 1.0)
    assert np.allclose(np.einsum('kd,kd->k', grid.directions, grid.tangents), 0.0)


def test_support_values_are_read_only(ball):
    with pytest.raises(ValueError):
        ball.h[0] = 2.0


def test_ball_support(grid):
    K = support_of_ball(1.0, (0.3, 0.0), grid)
    assert K.h[0] == pytest.approx(1.3)
    assert K.h[128] == pytest.approx(0.7)


def test_ball_must_contain_origin(grid):
    with pytest.raises(ValidationFailure) as e:
        support_of_ball(0.2, (0.5, 0.0), grid)
    assert e.value.code == 'origin-not-interior'


def test_square_support(grid):
    K = support_of_polygon(SQUARE, grid)
    assert K.h[0] == pytest.approx(1.0)
    assert K.h[32] == pytest.approx(np.sqrt(2.0))


@pytest.mark.parametrize('vertices, code', [
    ([(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)], 'origin-not-interior'),
    ([(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)], 'degenerate-body'),
    ([(1.0, 0.0), (0.0, 1.0)], 'degenerate-body'),
])
def test_polygon_rejections(grid, vertices, code):
    with pytest.raises(ValidationFailure) as e:
        support_of_polygon(vertices, grid)
    assert e.value.code == code


def test_regular_polygon_support_bounds(grid):
    K = regular_polygon(64, grid)
    assert K.h.max() <= 1.0 + 1e-12
    assert K.h.min() >= np.cos(np.pi / 64) - 1e-12


@pytest.mark.parametrize('h, code', [
    (lambda g: 1.0 + 0.5 * np.cos(4.0 * g.angles), 'not-convex'),
    (lambda g: np.cos(g.angles), 'origin-not-interior'),
    (lambda g: np.ones(g.M - 1), 'grid-mismatch'),
    (lambda g: np.full(g.M, np.nan), 'degenerate-body'),
])
def test_support_function_validation(grid, h, code):
    with pytest.raises(ValidationFailure) as e:
        SupportFunction(grid=grid, h=h(grid))
    assert e.value.code == code


def test_boundary_points(grid):
    assert np.allclose(boundary_point(support_of_ellipse(2.0, 1.0, grid), 0), (2.0, 0.0), atol=1e-12)
    assert np.allclose(boundary_point(support_of_ball(1.0, (0.3, 0.0), grid), 64), (0.3, 1.0), atol=1e-4)
    assert np.allclose(boundary_point(support_of_ball(1.0, (0.0, 0.0), grid), 10), grid.directions[10], atol=1e-12)


def test_curvature_density(grid):
    assert np.allclose(curvature_density(support_of_ball(2.0, (0.0, 0.0), grid)), 2.0)
    s = curvature_density(support_of_ellipse(2.0, 1.0, grid))
    assert s[0] == pytest.approx(0.5, rel=1e-3)
    assert s[64] == pytest.approx(4.0, rel=1e-3)


@pytest.mark.parametrize('body, expected', [
    (lambda g: support_of_ball(1.0, (0.0, 0.0), g), 2.0 * np.pi),
    (lambda g: support_of_polygon(SQUARE, g), 8.0),
    (lambda g: support_of_ellipse(2.0, 1.0, g), 9.688448220547675),
])
def test_perimeter(grid, body, expected):
    assert perimeter(body(grid)) == pytest.approx(expected, rel=1e-3)


def test_radial_function(grid):
    assert radial_function(support_of_ball(1.0, (0.0, 0.0), grid), 0.0) == pytest.approx(1.0)
    assert radial_function(support_of_polygon(SQUARE, grid), np.pi / 4) == pytest.approx(np.sqrt(2.0))
    r = radial_function(support_of_ellipse(2.0, 1.0, grid), np.array([0.0, np.pi / 2]))
    assert r == pytest.approx([2.0, 1.0])


def test_hausdorff(grid, ball):
    assert hausdorff(ball, ball) == 0.0
    assert hausdorff(ball, support_of_ball(2.0, (0.0, 0.0), grid)) == pytest.approx(1.0)
    assert hausdorff(ball, support_of_polygon(SQUARE, grid)) == pytest.approx(np.sqrt(2.0) - 1.0)
    with pytest.raises(ValidationFailure) as e:
        hausdorff(ball, support_of_ball(1.0, (0.0, 0.0), make_grid(64)))
    assert e.value.code == 'grid-mismatch'


def test_hausdorff_metric_axioms(grid):
    rng = np.random.default_rng(7)
    for _ in range(10):
        A, B, C = (random_body(rng, grid) for _ in range(3))
        assert hausdorff(A, B) == hausdorff(B, A)
        assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-12


def test_translate_and_scale(grid, ball):
    moved = translate(ball, (0.2, 0.1))
    assert np.allclose(moved.h, support_of_ball(1.0, (0.2, 0.1), grid).h)
    assert np.allclose(scale(ball, 2.0).h, 2.0)
    with pytest.raises(ValidationFailure) as e:
        translate(ball, (1.5, 0.0))
    assert e.value.code == 'origin-not-interior'
    with pytest.raises(ValidationFailure) as e:
        scale(ball, 0.0)
    assert e.value.code == 'parameter-domain'


def test_body_transform(grid, ball):
    K = BodyTransform(translation=(0.1, 0.0), scale=2.0).apply(ball)
    assert np.allclose(K.h, support_of_ball(2.0, (0.1, 0.0), grid).h)


@pytest.mark.parametrize('body', [
    lambda g: support_of_ball(1.0, (0.0, 0.0), g),
    lambda g: support_of_polygon(SQUARE, g),
    lambda g: support_of_ellipse(1.5, 1.0, g, rotation=0.4),
])
def test_wulff_shape_of_support_function_is_identity(grid, body):
    K = body(grid)
    assert np.abs(wulff_shape(K.h, grid).h - K.h).max() <= 1e-12 * K.h.max()


def test_wulff_shape_drops_redundant_constraint(grid):
    f = np.ones(grid.M)
    f[0] = 2.0
    W = wulff_shape(f, grid)
    assert W.h[0] == pytest.approx(1.0 / np.cos(grid.spacing))
    assert np.allclose(W.h[1:], 1.0)


def test_wulff_shape_is_dominated_and_idempotent(grid):
    rng = np.random.default_rng(3)
    f = 1.0 + 0.3 * rng.random(grid.M)
    W = wulff_shape(f, grid)
    assert np.all(W.h <= f + 1e-12)
    assert np.abs(wulff_shape(W.h, grid).h - W.h).max() <= 1e-10


def test_wulff_shape_rejects_non_positive_data(grid):
    f = np.ones(grid.M)
    f[5] = 0.0
    with pytest.raises(ValidationFailure) as e:
        wulff_shape(f, grid)
    assert e.value.code == 'degenerate-wulff'


def test_polygons_approach_the_disk(grid, ball):
    distances = [hausdorff(regular_polygon(m, grid), ball) for m in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(distances, distances[1:]))
    assert distances[-1] == pytest.approx(1.0 - np.cos(np.pi / 64))


@pytest.mark.parametrize('q', [0.3, 0.5, 0.9])
@pytest.mark.parametrize('t', [-0.05, 0.05])
def test_q_sum_with_itself_scales(grid, q, t):
    K = support_of_ellipse(1.5, 1.0, grid)
    assert np.abs(q_sum(K, K, q, t).h - (1.0 + t) ** (1.0 / q) * K.h).max() <= 1e-10 * K.h.max()


def test_q_sum_of_concentric_disks(grid, ball):
    L = support_of_ball(2.0, (0.0, 0.0), grid)
    assert np.allclose(q_sum(ball, L, 0.5, 0.1).h, (1.0 + 0.1 * np.sqrt(2.0)) ** 2)


def test_q_sum_rejections(grid, ball):
    with pytest.raises(ValidationFailure) as e:
        q_sum(ball, ball, 0.5, -2.0)
    assert e.value.code == 'invalid-qsum'
    with pytest.raises(ValidationFailure) as e:
        q_sum(ball, ball, 0.0, 0.1)
    assert e.value.code == 'parameter-domain'
    assert qsum_step_bound(ball, support_of_ball(2.0, (0.0, 0.0), grid), 0.5) == pytest.approx(1.0 / np.sqrt(2.0))


def test_inradius_and_inner_center(grid):
    K = support_of_ellipse(2.0, 1.0, grid)
    r, _ = inradius(K)
    assert r == pytest.approx(1.0, rel=1e-9)

    moved = translate(K, (0.2, 0.1))
    center, clearance = inner_center(moved)
    assert np.allclose(center, (0.2, 0.1), atol=1e-9)
    assert clearance >= 0.95 * r - 1e-12


def test_inner_center_of_symmetric_body(grid):
    K = rounded_square(grid)
    center, clearance = inner_center(K)
    assert np.allclose(center, 0.0, atol=1e-9)
    assert clearance == pytest.approx(1.25, rel=1e-9)


def test_body_centroid(grid):
    K = translate(support_of_ellipse(1.5, 1.0, grid), (0.2, 0.1))
    assert np.allclose(body_centroid(K), (0.2, 0.1), atol=1e-9)


def test_polygon_is_convex():
    assert polygon_is_convex(SQUARE)
    dented = [(1.0, 1.0), (0.0, 0.2), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
    assert not polygon_is_convex(dented)
