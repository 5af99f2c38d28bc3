""" p-Laplace capacitary problem on the annulus between an obstacle disk and the boundary of a convex body """
import warnings
from typing import Callable, Literal, Optional

import matplotlib.tri as mtri
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from pharmonic.errors import ConvergenceFailure, ValidationFailure
from pharmonic.geometry import SupportFunction, boundary_points, inner_center, inradius, radial_function, translate
from pharmonic.logger import setup_logger

logger = setup_logger('pde')

MIN_RELAXATION = 0.05


class AnnulusConfig(BaseModel):
    """
    Discretization and obstacle settings for one capacitary solve.
    When `rho` or `obstacle_center` is left unset it is derived from the body,
    so the obstacle translates and scales together with it.
    """
    model_config = ConfigDict(frozen=True)

    p: float = Field(2.0, gt=1.0, description='Exponent of the p-Laplacian')
    n: int = Field(2, description='Ambient dimension (only 2 is solved)')
    rho: Optional[float] = Field(None, gt=0.0, description='Obstacle radius (length); derived when unset')
    obstacle_center: Optional[tuple[float, float]] = Field(None, description='Obstacle center (length); derived when unset')
    rho_factor: float = Field(0.4, gt=0.0, lt=1.0, description='Derived obstacle radius as a fraction of the reference length')
    rho_scale: Literal['inradius', 'mean-width'] = Field(
        'inradius', description='Reference length of the derived obstacle radius: inradius or half the mean width'
    )
    clearance_factor: float = Field(0.1, gt=0.0, lt=1.0, description='Minimum obstacle clearance as a fraction of the inradius')
    Ns: int = Field(64, ge=2, description='Radial cell count')
    Ntheta: int = Field(256, ge=8, description='Angular node count')
    epsilon_reg: float = Field(1e-6, gt=0.0, description='Relative gradient regularization')
    picard_tol: float = Field(1e-8, gt=0.0, description='Relative update tolerance of the Picard iteration')
    max_iters: int = Field(200, ge=1, description='Picard iteration cap')

    @field_validator('n')
    @classmethod
    def _planar_only(cls, n: int) -> int:
        if n != 2:
            raise ValueError('only the planar case n = 2 is solved')
        return n

    @property
    def relaxation(self) -> float:
        """Picard relaxation 2/p balances the radial and tangential error modes."""
        return 2.0 / self.p


class AnnulusMesh(BaseModel):
    """
    Structured mesh between the obstacle circle (ring 0) and the body boundary (ring Ns).
    Node (i, j) sits at center + ((1 - s_i) rho + s_i R(theta_j)) (cos theta_j, sin theta_j)
    with R the radial function of the body about the obstacle center.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: np.ndarray = Field(..., description='Node coordinates, shape (Ns + 1, Ntheta, 2)')
    triangles: np.ndarray = Field(..., description='Counterclockwise node index triples')
    center: np.ndarray = Field(..., description='Obstacle center')
    rho: float = Field(..., description='Obstacle radius')

    @property
    def Ns(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def Ntheta(self) -> int:
        return self.nodes.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.nodes.reshape(-1, 2)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0] * self.nodes.shape[1]

    @property
    def outer_radii(self) -> np.ndarray:
        return np.linalg.norm(self.nodes[-1] - self.center, axis=1)

    @property
    def thickness(self) -> float:
        return float(np.mean(self.outer_radii) - self.rho)

    def triangulation(self) -> mtri.Triangulation:
        pts = self.points
        return mtri.Triangulation(pts[:, 0], pts[:, 1], self.triangles)


class PHarmonicSolution(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    u: np.ndarray = Field(..., description='Nodal values, ring-major (Ns + 1) * Ntheta')
    residual: float = Field(..., description='Relative residual of the discrete weak form')
    iterations: int = Field(..., description='Picard steps taken')
    converged: bool = Field(True, description='Relative update fell below picard_tol')
    boundary_gradient: Optional[np.ndarray] = Field(None, description='|grad u| at the boundary point of each normal direction (1/length)')

    def grid_values(self, mesh: AnnulusMesh) -> np.ndarray:
        return self.u.reshape(mesh.Ns + 1, mesh.Ntheta)


def resolve_obstacle(K: SupportFunction, cfg: AnnulusConfig) -> tuple[np.ndarray, float, AnnulusConfig]:
    """
    Concrete obstacle for K: the inner center and rho_factor times the reference length
    (inradius, or half the mean width = mean of h) unless pinned in cfg. Half the mean
    width varies smoothly along L_q sum paths where the inradius can have a kink.

    Returns:
        (center, rho, pinned): pinned is cfg with both obstacle fields filled in.

    Raises:
        ValidationFailure: 'obstacle-clearance' when the obstacle disk comes closer than
            clearance_factor * inradius to the boundary.
    """
    r_star, _ = inradius(K)
    if cfg.obstacle_center is None:
        center, _ = inner_center(K)
    else:
        center = np.asarray(cfg.obstacle_center, dtype=float)
    if cfg.rho is not None:
        rho = cfg.rho
    elif cfg.rho_scale == 'mean-width':
        rho = cfg.rho_factor * float(np.mean(K.h))
    else:
        rho = cfg.rho_factor * r_star
    gap = float(np.min(K.h - K.grid.directions @ center)) - rho
    clearance_min = cfg.clearance_factor * r_star
    if gap < clearance_min:
        raise ValidationFailure(
            'obstacle-clearance',
            f'obstacle of radius {rho:.6g} leaves clearance {gap:.6g} < {clearance_min:.6g}',
        )
    pinned = cfg.model_copy(update={'rho': float(rho), 'obstacle_center': (float(center[0]), float(center[1]))})
    return center, float(rho), pinned


def build_mesh(K: SupportFunction, cfg: AnnulusConfig) -> AnnulusMesh:
    center, rho, _ = resolve_obstacle(K, cfg)
    Ns, Nt = cfg.Ns, cfg.Ntheta

    phi = 2.0 * np.pi * np.arange(Nt) / Nt
    R = radial_function(translate(K, -center), phi)
    s = np.arange(Ns + 1) / Ns
    radii = (1.0 - s)[:, None] * rho + s[:, None] * R[None, :]
    nodes = center + radii[..., None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)[None, :, :]

    i, j = np.meshgrid(np.arange(Ns), np.arange(Nt), indexing='ij')
    a = i * Nt + j
    b = (i + 1) * Nt + j
    c = (i + 1) * Nt + (j + 1) % Nt
    d = i * Nt + (j + 1) % Nt
    triangles = np.concatenate([
        np.stack([a, b, c], axis=-1).reshape(-1, 3),
        np.stack([a, c, d], axis=-1).reshape(-1, 3),
    ])

    mesh = AnnulusMesh(nodes=nodes, triangles=triangles, center=center, rho=rho)
    _, area = _p1_gradients(mesh.points, triangles)
    if area.min() <= 0.0:
        raise ValidationFailure('mesh-degenerate', f'non-positive cell area {area.min():.3e}')
    logger.debug(f'mesh {Ns}x{Nt}: obstacle rho={rho:.6g} at {center.tolist()}, thickness {mesh.thickness:.6g}')
    return mesh


def _p1_gradients(points: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Constant gradients of the three P1 basis functions per triangle, and triangle areas."""
    P = points[triangles]
    d1 = P[:, 1] - P[:, 0]
    d2 = P[:, 2] - P[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    # edge opposite vertex k, rotated by -pi/2
    edges = np.stack([P[:, 2] - P[:, 1], P[:, 0] - P[:, 2], P[:, 1] - P[:, 0]], axis=1)
    grads = np.stack([-edges[..., 1], edges[..., 0]], axis=-1) / area2[:, None, None]
    return grads, 0.5 * area2


def _stiffness(grads: np.ndarray, area: np.ndarray, triangles: np.ndarray, weight: np.ndarray, n: int) -> sparse.csr_matrix:
    local = (weight * area)[:, None, None] * np.einsum('tkd,tld->tkl', grads, grads)
    rows = np.broadcast_to(triangles[:, :, None], local.shape)
    cols = np.broadcast_to(triangles[:, None, :], local.shape)
    return sparse.csr_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n))


def _coefficient(grads: np.ndarray, triangles: np.ndarray, u: np.ndarray, p: float, eps2: float) -> np.ndarray:
    gu = np.einsum('tkd,tk->td', grads, u[triangles])
    return (np.einsum('td,td->t', gu, gu) + eps2) ** ((p - 2.0) / 2.0)


def _dirichlet_solve(A: sparse.csr_matrix, Nt: int, Ns: int) -> np.ndarray:
    """Solve for the interior rings with u = 1 on ring 0 and u = 0 on ring Ns."""
    interior = slice(Nt, Ns * Nt)
    A_II = A[interior, interior].tocsc()
    rhs = -np.asarray(A[interior, :Nt].sum(axis=1)).ravel()
    with warnings.catch_warnings():
        warnings.simplefilter('error', MatrixRankWarning)
        try:
            u_I = spsolve(A_II, rhs)
        except MatrixRankWarning as e:
            raise ValidationFailure('mesh-degenerate', 'singular stiffness matrix') from e
    if not np.all(np.isfinite(u_I)):
        raise ValidationFailure('mesh-degenerate', 'linear solve produced non-finite values')
    u = np.zeros((Ns + 1) * Nt)
    u[:Nt] = 1.0
    u[interior] = u_I
    return u


def _weak_residual(A: sparse.csr_matrix, u: np.ndarray, Nt: int, Ns: int) -> float:
    interior = slice(Nt, Ns * Nt)
    r = A[interior, :] @ u
    flux = np.abs(np.asarray(A[interior, :Nt].sum(axis=1)).ravel()).max()
    return float(np.abs(r).max() / flux)


def solve_plaplace(mesh: AnnulusMesh, cfg: AnnulusConfig) -> PHarmonicSolution:
    """
    Picard (frozen-coefficient) iteration for
        div((|grad u|^2 + (eps G)^2)^((p - 2)/2) grad u) = 0,  u = 1 inner, u = 0 outer,
    with G = 1 / annulus thickness, starting from the harmonic (p = 2) solution.
    The relaxed update is halved whenever its size grows.

    Raises:
        ConvergenceFailure: 'no-convergence' after max_iters steps.
        ValidationFailure: 'mesh-degenerate' on a singular linear system.
    """
    Nt, Ns, n = mesh.Ntheta, mesh.Ns, mesh.n_nodes
    grads, area = _p1_gradients(mesh.points, mesh.triangles)
    eps2 = (cfg.epsilon_reg / mesh.thickness) ** 2

    u = _dirichlet_solve(_stiffness(grads, area, mesh.triangles, np.ones(len(area)), n), Nt, Ns)
    omega = cfg.relaxation
    previous = np.inf
    for it in range(1, cfg.max_iters + 1):
        weight = _coefficient(grads, mesh.triangles, u, cfg.p, eps2)
        A = _stiffness(grads, area, mesh.triangles, weight, n)
        u_star = _dirichlet_solve(A, Nt, Ns)
        update = float(np.abs(u_star - u).max())
        if update > previous and omega > MIN_RELAXATION:
            omega = max(0.5 * omega, MIN_RELAXATION)
            logger.debug(f'picard update grew ({previous:.3e} -> {update:.3e}); relaxation now {omega:.3g}')
        u = u + omega * (u_star - u)
        previous = update
        logger.debug(f'picard {it}: update {update:.3e}')
        if update < cfg.picard_tol:
            break
    else:
        A = _stiffness(grads, area, mesh.triangles, _coefficient(grads, mesh.triangles, u, cfg.p, eps2), n)
        residual = _weak_residual(A, u, Nt, Ns)
        raise ConvergenceFailure(
            'no-convergence',
            f'Picard iteration for p={cfg.p} stalled after {cfg.max_iters} steps',
            residual=residual,
            iterations=cfg.max_iters,
        )

    A = _stiffness(grads, area, mesh.triangles, _coefficient(grads, mesh.triangles, u, cfg.p, eps2), n)
    residual = _weak_residual(A, u, Nt, Ns)
    logger.debug(f'p={cfg.p}: converged in {it} Picard steps, residual {residual:.3e}')
    return PHarmonicSolution(u=u, residual=residual, iterations=it)


def boundary_gradient(sol: PHarmonicSolution, mesh: AnnulusMesh, K: SupportFunction) -> np.ndarray:
    """
    |grad u| at grad h_K(xi_j) for every normal direction xi_j.

    u vanishes on the discrete boundary, so with samples at depths delta and 2 delta
    below it, |grad u| = (4 u(delta) - u(2 delta)) / (2 delta) to second order. The
    depths are measured from the mesh chord under the boundary point, which removes
    the chord sagitta from the estimate. Values are read by P1 interpolation.

    Raises:
        ValidationFailure: 'geometry-inconsistent' when a sample leaves the mesh or the
            nearer sample is not positive.
    """
    x = boundary_points(K)
    nu = K.grid.directions
    Nt = mesh.Ntheta

    rel = x - mesh.center
    phi = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * np.pi)
    j = np.floor(phi / (2.0 * np.pi / Nt)).astype(int) % Nt
    outer = mesh.nodes[-1]
    P0, P1 = outer[j], outer[(j + 1) % Nt]
    e = P1 - P0
    n_e = np.column_stack([e[:, 1], -e[:, 0]])
    depth0 = np.einsum('kd,kd->k', x - P0, n_e) / np.einsum('kd,kd->k', nu, n_e)

    delta = (np.linalg.norm(rel, axis=1) - mesh.rho) / mesh.Ns
    y1 = x - (depth0 + delta)[:, None] * nu
    y2 = x - (depth0 + 2.0 * delta)[:, None] * nu

    interp = mtri.LinearTriInterpolator(mesh.triangulation(), sol.u)
    u1 = interp(y1[:, 0], y1[:, 1])
    u2 = interp(y2[:, 0], y2[:, 1])
    if np.ma.is_masked(u1) or np.ma.is_masked(u2):
        raise ValidationFailure('geometry-inconsistent', 'boundary gradient samples fall outside the mesh')
    u1, u2 = np.asarray(u1), np.asarray(u2)
    if u1.min() <= 0.0:
        raise ValidationFailure('geometry-inconsistent', f'non-positive interior sample {u1.min():.3e}')
    # near sharp corners u is too flat for the two-point stencil; fall back to one point
    two_point = 4.0 * u1 - u2
    return np.where(two_point > 0.0, two_point / (2.0 * delta), u1 / delta)


def solve_body(K: SupportFunction, cfg: AnnulusConfig) -> tuple[AnnulusMesh, PHarmonicSolution]:
    """Mesh K, solve, and attach the boundary gradient to the solution."""
    mesh = build_mesh(K, cfg)
    sol = solve_plaplace(mesh, cfg)
    g = boundary_gradient(sol, mesh, K)
    return mesh, sol.model_copy(update={'boundary_gradient': g})


def radial_oracle(R: float, rho: float, p: float, n: int = 2) -> tuple[Callable[[np.ndarray], np.ndarray], float]:
    """
    Closed-form capacitary potential of the ring rho < r < R and its boundary slope |u'(R)|.
    u(r) = (r^a - R^a) / (rho^a - R^a) with a = (p - n)/(p - 1), and the logarithmic
    profile when p = n.
    """
    if not 0.0 < rho < R:
        raise ValidationFailure('parameter-domain', f'radial oracle needs 0 < rho < R, got rho={rho}, R={R}')
    if p == n:
        def u(r):
            return np.log(R / np.asarray(r)) / np.log(R / rho)
        return u, 1.0 / (R * np.log(R / rho))

    a = (p - n) / (p - 1.0)

    def u(r):
        return (np.asarray(r) ** a - R ** a) / (rho ** a - R ** a)
    return u, abs(a * R ** (a - 1.0) / (rho ** a - R ** a))


def level_set(sol: PHarmonicSolution, mesh: AnnulusMesh, level: float = 0.5) -> np.ndarray:
    """Points where u crosses `level` on each radial line, linearly interpolated (shape (Ntheta, 2))."""
    if not 0.0 < level < 1.0:
        raise ValidationFailure('parameter-domain', f'level must lie in (0, 1), got {level}')
    U = sol.grid_values(mesh)
    cols = np.arange(mesh.Ntheta)
    i1 = np.argmax(U <= level, axis=0)
    i0 = i1 - 1
    frac = (U[i0, cols] - level) / (U[i0, cols] - U[i1, cols])
    return mesh.nodes[i0, cols] + frac[:, None] * (mesh.nodes[i1, cols] - mesh.nodes[i0, cols])


def gradient_bound(K: SupportFunction, cfg: AnnulusConfig) -> np.ndarray:
    """
    Upper bound for the boundary gradient from the linear barrier
    (h_j - <x, xi_j>) / d_j, with d_j the gap between the obstacle disk and the
    supporting line of direction xi_j. The barrier dominates u, so |grad u| <= 1 / d_j.
    """
    center, rho, _ = resolve_obstacle(K, cfg)
    return 1.0 / (K.h - K.grid.directions @ center - rho)


if __name__ == '__main__':
    from pharmonic.geometry import make_grid, support_of_ball

    grid = make_grid(128)
    ball = support_of_ball(1.0, (0.0, 0.0), grid)
    cfg = AnnulusConfig(p=1.5, rho=0.5, Ns=32, Ntheta=128)
    _, sol = solve_body(ball, cfg)
    print('boundary gradient range', sol.boundary_gradient.min(), sol.boundary_gradient.max())
    print('radial oracle', radial_oracle(1.0, 0.5, 1.5)[1])
