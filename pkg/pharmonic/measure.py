""" p-harmonic measures, their L_q weighting and the functional Gamma """
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
from scipy.ndimage import uniform_filter1d

from pharmonic.errors import ValidationFailure
from pharmonic.geometry import ArrayLike, DirectionGrid, SupportFunction, curvature_density
from pharmonic.logger import setup_logger
from pharmonic.pde import AnnulusConfig, solve_body

logger = setup_logger('measure')

Provenance = Literal['pharmonic', 'lq', 'target', 'synthetic']


class SphericalMeasure(BaseModel):
    """
    Nonnegative measure on the circle stored as a density per radian on a direction grid.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: DirectionGrid
    density: np.ndarray = Field(..., description='Density with respect to dtheta, one value per direction')
    provenance: Provenance = Field('synthetic', description='Where the measure came from')
    p: Optional[float] = Field(None, description='p-Laplace exponent, for PDE-derived measures')
    q: Optional[float] = Field(None, description='L_q exponent, for L_q measures')
    body_id: Optional[str] = Field(None, description='Content hash of the generating body')

    @field_validator('density', mode='before')
    @classmethod
    def _as_array(cls, density: ArrayLike) -> np.ndarray:
        arr = np.array(density, dtype=float)
        arr.setflags(write=False)
        return arr

    @model_validator(mode='after')
    def _check_density(self) -> 'SphericalMeasure':
        if self.density.shape != (self.grid.M,):
            raise ValidationFailure('grid-mismatch', f'expected {self.grid.M} density values, got {self.density.shape}')
        if not np.all(np.isfinite(self.density)) or np.any(self.density < 0.0):
            raise ValidationFailure('parameter-domain', 'measure density must be finite and nonnegative')
        return self

    @field_serializer('density')
    def _serialize_density(self, density: np.ndarray) -> list[float]:
        return density.tolist()

    @property
    def total_mass(self) -> float:
        return total_mass(self)


class MeasureConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    annulus: AnnulusConfig = Field(default_factory=AnnulusConfig, description='PDE settings')
    grid: Optional[DirectionGrid] = Field(None, description='Expected direction grid; unchecked when unset')
    n: int = Field(2, description='Ambient dimension')
    workers: int = Field(1, ge=1, description='Threads for independent solves')

    @property
    def p(self) -> float:
        return self.annulus.p

    def with_p(self, p: float) -> 'MeasureConfig':
        return self.model_copy(update={'annulus': self.annulus.model_copy(update={'p': p})})


def _check_grid(K: SupportFunction, cfg: MeasureConfig) -> None:
    if cfg.grid is not None and not cfg.grid.matches(K.grid):
        raise ValidationFailure('grid-mismatch', f'body has M={K.M}, configuration expects M={cfg.grid.M}')


def measure_and_gradient(K: SupportFunction, cfg: MeasureConfig) -> tuple[SphericalMeasure, np.ndarray]:
    """mu_K together with the boundary gradient it was built from."""
    _check_grid(K, cfg)
    _, sol = solve_body(K, cfg.annulus)
    density = sol.boundary_gradient ** (cfg.p - 1.0) * curvature_density(K)
    logger.debug(f'p-harmonic measure of body {K.digest()}: mass {density.sum() * K.grid.spacing:.6g}')
    mu = SphericalMeasure(grid=K.grid, density=density, provenance='pharmonic', p=cfg.p, body_id=K.digest())
    return mu, sol.boundary_gradient


def pharmonic_measure(K: SupportFunction, cfg: MeasureConfig) -> SphericalMeasure:
    """
    mu_K with density |grad u|^(p-1) (h'' + h) at each normal direction.
    """
    return measure_and_gradient(K, cfg)[0]


def lq_measure(K: SupportFunction, q: float, cfg: MeasureConfig, mu: Optional[SphericalMeasure] = None) -> SphericalMeasure:
    """
    mu_{K,q} = h_K^(1-q) mu_K, for any real q. A precomputed mu_K may be passed in.
    """
    mu = mu if mu is not None else pharmonic_measure(K, cfg)
    return SphericalMeasure(
        grid=K.grid,
        density=K.h ** (1.0 - q) * mu.density,
        provenance='lq',
        p=mu.p,
        q=q,
        body_id=K.digest(),
    )


def gamma(K: SupportFunction, cfg: MeasureConfig, mu: Optional[SphericalMeasure] = None) -> float:
    """Gamma(K) = integral of h_K against mu_K."""
    mu = mu if mu is not None else pharmonic_measure(K, cfg)
    return integrate(mu, K.h)


def integrate(m: SphericalMeasure, f: ArrayLike) -> float:
    f = np.asarray(f, dtype=float)
    if f.shape != (m.grid.M,):
        raise ValidationFailure('grid-mismatch', f'integrand has shape {f.shape}, measure lives on M={m.grid.M}')
    return float(np.sum(f * m.density) * m.grid.spacing)


def total_mass(m: SphericalMeasure) -> float:
    return float(m.density.sum() * m.grid.spacing)


def measure_centroid(m: SphericalMeasure) -> np.ndarray:
    return (m.density[:, None] * m.grid.directions).sum(axis=0) * m.grid.spacing


def bin_atoms(directions: ArrayLike, masses: ArrayLike, grid: DirectionGrid, provenance: Provenance = 'target') -> SphericalMeasure:
    """
    Atomic measure sum_k masses_k delta_{v_k} binned to the nearest grid direction.

    Args:
        directions: (k, 2) array of nonzero vectors (normalized internally)
        masses: k nonnegative masses
    """
    V = np.asarray(directions, dtype=float).reshape(-1, 2)
    w = np.asarray(masses, dtype=float).ravel()
    if len(w) != len(V):
        raise ValidationFailure('parameter-domain', f'{len(V)} directions but {len(w)} masses')
    theta = np.mod(np.arctan2(V[:, 1], V[:, 0]), 2.0 * np.pi)
    idx = np.rint(theta / grid.spacing).astype(int) % grid.M
    density = np.bincount(idx, weights=w, minlength=grid.M) / grid.spacing
    return SphericalMeasure(grid=grid, density=density, provenance=provenance)


def scaled_measure(m: SphericalMeasure, lam: float, n: int = 2) -> SphericalMeasure:
    """
    Measure of the body scaled by lam: densities of mu_K pick up lam^(n-p) and those
    of mu_{K,q} lam^(n-p+1-q).
    """
    if m.p is None:
        raise ValidationFailure('parameter-domain', 'scaling needs a measure with a known p')
    degree = n - m.p + (1.0 - m.q if m.q is not None else 0.0)
    return m.model_copy(update={'density': m.density * lam ** degree, 'body_id': None})


def box_filter(density: np.ndarray, width: int = 3) -> np.ndarray:
    """Periodic moving average over `width` cells."""
    return uniform_filter1d(np.asarray(density, dtype=float), size=width, mode='wrap')


def relative_sup_distance(a: SphericalMeasure, b: SphericalMeasure, smooth: int = 0) -> float:
    """max_j |a_j - b_j| / max_j a_j, optionally after a periodic box filter on both densities."""
    if not a.grid.matches(b.grid):
        raise ValidationFailure('grid-mismatch', f'grids differ: M={a.grid.M} vs M={b.grid.M}')
    da, db = a.density, b.density
    if smooth > 1:
        da, db = box_filter(da, smooth), box_filter(db, smooth)
    return float(np.abs(da - db).max() / da.max())


def pharmonic_measures(bodies: Sequence[SupportFunction], cfg: MeasureConfig) -> list[SphericalMeasure]:
    """Measures of several bodies, solved on `cfg.workers` threads, returned in input order."""
    if cfg.workers == 1:
        return [pharmonic_measure(K, cfg) for K in bodies]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda K: pharmonic_measure(K, cfg), bodies))
