""" Support-function calculus for planar convex bodies sampled on a uniform direction grid """
import functools
import hashlib
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from pharmonic.errors import ValidationFailure
from pharmonic.logger import setup_logger

logger = setup_logger('geometry')

MIN_GRID_SIZE = 8
CONVEX_TOL_FACTOR = 1e-8
# inner parallel body used for the obstacle center sits this fraction below the inradius
INNER_CENTER_SLACK = 0.05

ArrayLike = Union[Sequence[float], np.ndarray]


@functools.lru_cache(maxsize=64)
def _grid_arrays(M: int) -> tuple[np.ndarray, np.ndarray]:
    angles = 2.0 * np.pi * np.arange(M) / M
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    angles.setflags(write=False)
    directions.setflags(write=False)
    return angles, directions


def _frozen(values: ArrayLike) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


# Data Models
class DirectionGrid(BaseModel):
    """
    Uniform grid of M directions xi_j = (cos theta_j, sin theta_j), theta_j = 2 pi j / M.
    """
    model_config = ConfigDict(frozen=True)

    M: int = Field(..., description='Number of directions on the unit circle')

    @field_validator('M')
    @classmethod
    def _check_size(cls, M: int) -> int:
        if M < MIN_GRID_SIZE:
            raise ValidationFailure('grid-too-coarse', f'grid needs at least {MIN_GRID_SIZE} directions, got {M}')
        return M

    @property
    def angles(self) -> np.ndarray:
        return _grid_arrays(self.M)[0]

    @property
    def directions(self) -> np.ndarray:
        return _grid_arrays(self.M)[1]

    @property
    def tangents(self) -> np.ndarray:
        """Directions rotated by +pi/2."""
        d = self.directions
        return np.column_stack([-d[:, 1], d[:, 0]])

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.M

    def matches(self, other: 'DirectionGrid') -> bool:
        return self.M == other.M


class SupportFunction(BaseModel):
    """
    A convex body containing the origin in its interior, encoded by its support
    values h_j = h_K(xi_j) on a direction grid.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: DirectionGrid = Field(..., description='Direction grid the support values live on')
    h: np.ndarray = Field(..., description='Support values, one per grid direction (length units)')

    @field_validator('h', mode='before')
    @classmethod
    def _as_array(cls, h: ArrayLike) -> np.ndarray:
        return _frozen(h)

    @model_validator(mode='after')
    def _check_body(self) -> 'SupportFunction':
        if self.h.shape != (self.grid.M,):
            raise ValidationFailure('grid-mismatch', f'expected {self.grid.M} support values, got {self.h.shape}')
        if not np.all(np.isfinite(self.h)):
            raise ValidationFailure('degenerate-body', 'support values must be finite')
        if np.any(self.h <= 0.0):
            raise ValidationFailure('origin-not-interior', 'support values must be strictly positive')
        s = second_difference(self.h, self.grid.spacing) + self.h
        if s.min() < -self.tol_convex:
            raise ValidationFailure('not-convex', f'discrete curvature density reaches {s.min():.3e}')
        return self

    @field_serializer('h')
    def _serialize_h(self, h: np.ndarray) -> list[float]:
        return h.tolist()

    @property
    def M(self) -> int:
        return self.grid.M

    @property
    def tol_convex(self) -> float:
        return CONVEX_TOL_FACTOR * float(self.h.max())

    def digest(self) -> str:
        """Short content hash used as a body identifier in measure metadata."""
        return hashlib.sha256(np.ascontiguousarray(self.h).tobytes()).hexdigest()[:16]


class BodyTransform(BaseModel):
    model_config = ConfigDict(frozen=True)

    translation: tuple[float, float] = Field((0.0, 0.0), description='Translation x0 (length)')
    scale: float = Field(1.0, gt=0.0, description='Scale factor lambda (dimensionless)')

    def apply(self, K: SupportFunction) -> SupportFunction:
        return translate(scale(K, self.scale), self.translation)


def second_difference(h: np.ndarray, dtheta: float) -> np.ndarray:
    """Periodic centered second difference (h_{j-1} - 2 h_j + h_{j+1}) / dtheta^2."""
    return (np.roll(h, 1) - 2.0 * h + np.roll(h, -1)) / dtheta ** 2


def first_difference(h: np.ndarray, dtheta: float) -> np.ndarray:
    """Periodic centered first difference (h_{j+1} - h_{j-1}) / (2 dtheta)."""
    return (np.roll(h, -1) - np.roll(h, 1)) / (2.0 * dtheta)


def _require_same_grid(K: SupportFunction, L: SupportFunction) -> None:
    if not K.grid.matches(L.grid):
        raise ValidationFailure('grid-mismatch', f'grids differ: M={K.M} vs M={L.M}')


# Construction
def make_grid(M: int) -> DirectionGrid:
    return DirectionGrid(M=M)


def support_of_ball(R: float, center: ArrayLike, grid: DirectionGrid) -> SupportFunction:
    """
    Support function of the disk of radius R about `center`: h_j = R + <center, xi_j>.
    """
    c = np.asarray(center, dtype=float)
    if R - np.hypot(*c) <= 0.0:
        raise ValidationFailure('origin-not-interior', f'disk of radius {R} about {c.tolist()} misses the origin')
    return SupportFunction(grid=grid, h=R + grid.directions @ c)


def support_of_polygon(vertices: ArrayLike, grid: DirectionGrid) -> SupportFunction:
    """
    Support function of the convex hull of `vertices`: h_j = max_v <v, xi_j>.

    Raises:
        ValidationFailure: 'degenerate-body' for fewer than three affinely independent
            points, 'origin-not-interior' when the origin is not strictly inside the hull.
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
        raise ValidationFailure('degenerate-body', 'a polygon needs at least three 2-D vertices')
    try:
        hull = ConvexHull(V)
    except QhullError as e:
        raise ValidationFailure('degenerate-body', f'vertices span no area: {e}') from e
    scale_ = float(np.abs(V).max())
    # equations: n . x + offset <= 0 inside
    if hull.equations[:, 2].max() >= -1e-12 * scale_:
        raise ValidationFailure('origin-not-interior', 'origin is not strictly inside the convex hull')
    return SupportFunction(grid=grid, h=(grid.directions @ V.T).max(axis=1))


def support_of_ellipse(a: float, b: float, grid: DirectionGrid, rotation: float = 0.0) -> SupportFunction:
    """
    Centered ellipse with semi-axes a (along `rotation`) and b:
    h_j = sqrt(a^2 cos^2(theta_j - rotation) + b^2 sin^2(theta_j - rotation)).
    """
    if a <= 0.0 or b <= 0.0:
        raise ValidationFailure('degenerate-body', f'semi-axes must be positive, got a={a}, b={b}')
    phi = grid.angles - rotation
    return SupportFunction(grid=grid, h=np.sqrt(a ** 2 * np.cos(phi) ** 2 + b ** 2 * np.sin(phi) ** 2))


def regular_polygon(m: int, grid: DirectionGrid, radius: float = 1.0, phase: float = 0.0) -> SupportFunction:
    """Regular m-gon inscribed in the circle of the given radius."""
    k = np.arange(m)
    ang = phase + 2.0 * np.pi * k / m
    return support_of_polygon(radius * np.column_stack([np.cos(ang), np.sin(ang)]), grid)


def rounded_square(grid: DirectionGrid, half_width: float = 1.0, corner_radius: float = 0.25) -> SupportFunction:
    """Wulff shape of the smoothed square support a(|cos| + |sin|) + r."""
    d = grid.directions
    f = half_width * (np.abs(d[:, 0]) + np.abs(d[:, 1])) + corner_radius
    return wulff_shape(f, grid)


def random_body(rng: np.random.Generator, grid: DirectionGrid) -> SupportFunction:
    """Randomly rotated centered ellipse with axes in [0.8, 1.6]; used by metric property checks."""
    a, b = rng.uniform(0.8, 1.6, size=2)
    return support_of_ellipse(float(a), float(b), grid, rotation=float(rng.uniform(0.0, np.pi)))


# Evaluation
def boundary_points(K: SupportFunction) -> np.ndarray:
    """
    grad h_K(xi_j) = h_j xi_j + h'_j xi_j^perp for every grid direction, shape (M, 2).
    The point lies on the boundary of K with outward normal xi_j.
    """
    dh = first_difference(K.h, K.grid.spacing)
    return K.h[:, None] * K.grid.directions + dh[:, None] * K.grid.tangents


def boundary_point(K: SupportFunction, j: int) -> np.ndarray:
    return boundary_points(K)[j % K.M]


def curvature_density(K: SupportFunction) -> np.ndarray:
    """
    Discrete h'' + h (radius of curvature as a function of the normal).

    Raises:
        ValidationFailure: 'not-convex' if an entry falls below -tol_convex.
    """
    s = second_difference(K.h, K.grid.spacing) + K.h
    if s.min() < -K.tol_convex:
        raise ValidationFailure('not-convex', f'curvature density reaches {s.min():.3e}')
    return np.where(s < 0.0, 0.0, s)


def perimeter(K: SupportFunction) -> float:
    """Sum of the curvature density times dtheta (the second differences telescope away)."""
    return float(curvature_density(K).sum() * K.grid.spacing)


def radial_function(K: SupportFunction, phi: Union[float, ArrayLike]) -> Union[float, np.ndarray]:
    """
    rho_K(phi) = max{t > 0 : t (cos phi, sin phi) in K}, computed as
    min_j h_j / <xi_j, u> over directions with <xi_j, u> > 0.
    """
    scalar = np.ndim(phi) == 0
    ph = np.atleast_1d(np.asarray(phi, dtype=float))
    u = np.vstack([np.cos(ph), np.sin(ph)])
    den = K.grid.directions @ u
    with np.errstate(divide='ignore'):
        ratio = np.where(den > 1e-12, K.h[:, None] / np.where(den > 1e-12, den, 1.0), np.inf)
    r = ratio.min(axis=0)
    return float(r[0]) if scalar else r


def hausdorff(K: SupportFunction, L: SupportFunction) -> float:
    _require_same_grid(K, L)
    return float(np.abs(K.h - L.h).max())


def translate(K: SupportFunction, x0: ArrayLike) -> SupportFunction:
    x = np.asarray(x0, dtype=float)
    h = K.h + K.grid.directions @ x
    if np.any(h <= 0.0):
        raise ValidationFailure('origin-not-interior', f'translation by {x.tolist()} moves the origin out of the body')
    return SupportFunction(grid=K.grid, h=h)


def scale(K: SupportFunction, lam: float) -> SupportFunction:
    if not lam > 0.0:
        raise ValidationFailure('parameter-domain', f'scale factor must be positive, got {lam}')
    return SupportFunction(grid=K.grid, h=lam * K.h)


# Wulff shapes
def polygon_area(V: np.ndarray) -> float:
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(V: np.ndarray) -> np.ndarray:
    x, y = V[:, 0], V[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    return np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / (6.0 * area)


def polygon_is_convex(points: ArrayLike, tol: float = 1e-9) -> bool:
    """
    True if the closed counterclockwise polyline turns left (or goes straight) at every vertex.
    `tol` is relative to the squared diameter.
    """
    P = np.asarray(points, dtype=float)
    e = np.roll(P, -1, axis=0) - P
    turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    diam2 = float(np.ptp(P, axis=0).max()) ** 2
    return bool(turn.min() >= -tol * diam2)


def wulff_vertices(f: ArrayLike, grid: DirectionGrid) -> np.ndarray:
    """
    Vertices (counterclockwise) of the polygon  {x : <x, xi_j> <= f_j for all j}.

    The halfplanes all contain the origin, so a constraint is non-redundant exactly
    when xi_j / f_j is a vertex of the convex hull of those dual points; consecutive
    active constraints meet at the polygon vertices.

    Raises:
        ValidationFailure: 'degenerate-wulff' when the intersection has empty interior
            or f is not strictly positive.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.M,):
        raise ValidationFailure('grid-mismatch', f'expected {grid.M} values, got {f.shape}')
    if not np.all(np.isfinite(f)) or np.any(f <= 0.0):
        raise ValidationFailure('degenerate-wulff', 'Wulff data must be finite and strictly positive')
    dual = grid.directions / f[:, None]
    try:
        hull = ConvexHull(dual)
    except QhullError as e:
        raise ValidationFailure('degenerate-wulff', f'halfplane intersection failed: {e}') from e
    if hull.equations[:, 2].max() >= 0.0:
        raise ValidationFailure('degenerate-wulff', 'halfplane intersection is unbounded')

    active = hull.vertices  # counterclockwise in 2-D
    nxt = np.roll(active, -1)
    A = np.stack([grid.directions[active], grid.directions[nxt]], axis=1)
    rhs = np.stack([f[active], f[nxt]], axis=1)
    V = np.linalg.solve(A, rhs[..., None])[..., 0]
    if polygon_area(V) <= 1e-14 * float(f.max()) ** 2:
        raise ValidationFailure('degenerate-wulff', 'halfplane intersection has empty interior')
    return V


def wulff_shape(f: ArrayLike, grid: DirectionGrid) -> SupportFunction:
    """
    Support function of the Wulff shape of f, re-evaluated as the max over its vertices.
    The result never exceeds f and reproduces f when f is already a support function.
    """
    f = np.asarray(f, dtype=float)
    V = wulff_vertices(f, grid)
    h = (grid.directions @ V.T).max(axis=1)
    return SupportFunction(grid=grid, h=np.minimum(h, f))


def q_sum(K: SupportFunction, L: SupportFunction, q: float, t: float) -> SupportFunction:
    """
    L_q sum K +_q t.L: Wulff shape of (h_K^q + t h_L^q)^(1/q).

    Raises:
        ValidationFailure: 'invalid-qsum' when h_K^q + t h_L^q is not strictly positive.
    """
    _require_same_grid(K, L)
    if not 0.0 < q <= 1.0:
        raise ValidationFailure('parameter-domain', f'q-sum needs q in (0, 1], got {q}')
    base = K.h ** q + t * L.h ** q
    if np.any(base <= 0.0):
        raise ValidationFailure('invalid-qsum', f'h_K^q + t h_L^q is not positive at t={t}')
    return wulff_shape(base ** (1.0 / q), K.grid)


def qsum_step_bound(K: SupportFunction, L: SupportFunction, q: float) -> float:
    """Largest tau with h_K^q - tau h_L^q > 0 everywhere."""
    return float(np.min(K.h ** q / L.h ** q))


# Centers
def body_centroid(K: SupportFunction) -> np.ndarray:
    """Area centroid of the polygon the support values describe."""
    return polygon_centroid(wulff_vertices(K.h, K.grid))


def inradius(K: SupportFunction) -> tuple[float, np.ndarray]:
    """
    Largest inscribed disk by linear programming: maximize r s.t. <c, xi_j> + r <= h_j.

    Returns:
        (r, c): the inradius and one (not necessarily unique) maximizing center.
    """
    d = K.grid.directions
    res = linprog(
        c=np.array([0.0, 0.0, -1.0]),
        A_ub=np.column_stack([d, np.ones(K.M)]),
        b_ub=K.h,
        bounds=[(None, None), (None, None), (0.0, None)],
        method='highs',
    )
    if not res.success:
        raise ValidationFailure('degenerate-body', f'inscribed disk problem failed: {res.message}')
    return float(-res.fun), np.asarray(res.x[:2])


def inner_center(K: SupportFunction) -> tuple[np.ndarray, float]:
    """
    A unique interior center: the centroid of the inner parallel body at depth
    (1 - INNER_CENTER_SLACK) * inradius. Translates with K, is fixed by any symmetry of K
    and sits at distance >= (1 - INNER_CENTER_SLACK) * inradius from the boundary.

    Returns:
        (center, r): the center and the largest disk radius about it.
    """
    r_star, c_star = inradius(K)
    depth = (1.0 - INNER_CENTER_SLACK) * r_star
    f = K.h - K.grid.directions @ c_star - depth
    center = c_star + polygon_centroid(wulff_vertices(f, K.grid))
    r = float(np.min(K.h - K.grid.directions @ center))
    logger.debug(f'inner center {center.tolist()} with clearance {r:.6g} (inradius {r_star:.6g})')
    return center, r


if __name__ == '__main__':
    grid = make_grid(256)
    ellipse = support_of_ellipse(2.0, 1.0, grid)
    print('perimeter', perimeter(ellipse))
    print('boundary point at theta=0', boundary_point(ellipse, 0))
    print('inner center', inner_center(ellipse))
