""" Finite-difference checks of the first variation of Gamma along L_q sum paths """
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pharmonic.errors import ValidationFailure
from pharmonic.geometry import SupportFunction, q_sum, qsum_step_bound, scale
from pharmonic.logger import setup_logger
from pharmonic.measure import (
    MeasureConfig,
    SphericalMeasure,
    gamma,
    integrate,
    lq_measure,
    pharmonic_measure,
    pharmonic_measures,
)
from pharmonic.pde import resolve_obstacle

logger = setup_logger('variation')


class VariationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    delta: float = Field(1e-3, gt=0.0, description='Central difference step')
    tol_var: float = Field(0.02, gt=0.0, description='Relative error accepted by verify_variation')
    richardson: bool = Field(True, description='Combine steps delta and delta/2 by Richardson extrapolation')
    richardson_warn: float = Field(0.2, gt=0.0, description='Relative disagreement of the two estimates that triggers a warning')
    floor: float = Field(1e-8, gt=0.0, description='Lower bound of the relative error denominator')
    obstacle: Literal['mean-width', 'inradius', 'fixed'] = Field(
        'mean-width',
        description='Obstacle derived from each body on the path with its radius tied to half the mean width or to the '
                    'inradius, or pinned to the one of the base body',
    )


class VariationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    K_id: str
    L_id: str
    q: float
    p: float
    fd_value: float = Field(..., description='Finite-difference derivative of Gamma at t = 0')
    formula_value: float = Field(..., description='Closed-form first variation')
    gamma_value: float = Field(..., description='Gamma of the base body')
    rel_error: float
    step: float = Field(..., gt=0.0)
    richardson_used: bool
    degenerate: bool = Field(False, description='n - p + 1 = 0, both sides vanish')
    passed: bool


def path_config(K: SupportFunction, cfg: MeasureConfig, vcfg: VariationConfig) -> MeasureConfig:
    """Measure configuration used for every body on a path issued from K."""
    if vcfg.obstacle == 'fixed':
        _, _, pinned = resolve_obstacle(K, cfg.annulus)
        return cfg.model_copy(update={'annulus': pinned})
    return cfg.model_copy(update={'annulus': cfg.annulus.model_copy(update={'rho_scale': vcfg.obstacle})})


def gamma_on_path(K: SupportFunction, L: SupportFunction, q: float, t: float, cfg: MeasureConfig) -> float:
    """Gamma of the L_q sum K +_q t.L."""
    if t == 0.0:
        return gamma(K, cfg)
    return gamma(q_sum(K, L, q, t), cfg)


def _gammas(K, L, q, ts: Sequence[float], cfg: MeasureConfig) -> list[float]:
    if cfg.workers == 1:
        return [gamma_on_path(K, L, q, t, cfg) for t in ts]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda t: gamma_on_path(K, L, q, t, cfg), ts))


def _check_step(K: SupportFunction, L: SupportFunction, q: float, step: float) -> None:
    bound = qsum_step_bound(K, L, q)
    if step >= 0.5 * bound:
        raise ValidationFailure('invalid-qsum', f'step {step:g} exceeds half the admissible bound {bound:.4g}')


def central_differences(K, L, q: float, cfg: MeasureConfig, steps: Sequence[float], vcfg: Optional[VariationConfig] = None) -> list[float]:
    """Central differences (Gamma(t=d) - Gamma(t=-d)) / 2d for each step d, all solves run together."""
    vcfg = vcfg or VariationConfig()
    path_cfg = path_config(K, cfg, vcfg)
    for d in steps:
        _check_step(K, L, q, d)
    ts = [s * d for d in steps for s in (1.0, -1.0)]
    values = _gammas(K, L, q, ts, path_cfg)
    return [(values[2 * k] - values[2 * k + 1]) / (2.0 * d) for k, d in enumerate(steps)]


def fd_derivative(
        K: SupportFunction,
        L: SupportFunction,
        q: float,
        cfg: MeasureConfig,
        step: Optional[float] = None,
        vcfg: Optional[VariationConfig] = None,
) -> float:
    """
    d/dt Gamma(K +_q t.L) at t = 0 by central differences; with Richardson extrapolation
    the steps delta and delta/2 are combined as (4 D(delta/2) - D(delta)) / 3.
    """
    vcfg = vcfg or VariationConfig()
    delta = step if step is not None else vcfg.delta
    if not vcfg.richardson:
        return central_differences(K, L, q, cfg, [delta], vcfg)[0]

    coarse, fine = central_differences(K, L, q, cfg, [delta, 0.5 * delta], vcfg)
    if abs(coarse - fine) > vcfg.richardson_warn * max(abs(fine), vcfg.floor):
        logger.warning(f'central differences at steps {delta:g} and {delta / 2:g} disagree: {coarse:.6g} vs {fine:.6g}')
    return (4.0 * fine - coarse) / 3.0


def formula_derivative(
        K: SupportFunction,
        L: SupportFunction,
        q: float,
        cfg: MeasureConfig,
        mu: Optional[SphericalMeasure] = None,
) -> float:
    """((n - p + 1)/q) times the integral of h_L^q h_K^(1-q) against mu_K."""
    mu = mu if mu is not None else pharmonic_measure(K, cfg)
    return (cfg.n - cfg.p + 1.0) / q * integrate(mu, L.h ** q * K.h ** (1.0 - q))


def verify_variation(
        K: SupportFunction,
        L: SupportFunction,
        q: float,
        cfg: MeasureConfig,
        vcfg: Optional[VariationConfig] = None,
) -> VariationReport:
    """Compare the finite-difference derivative with the closed form; failures are carried by the report."""
    vcfg = vcfg or VariationConfig()
    path_cfg = path_config(K, cfg, vcfg)
    mu = pharmonic_measure(K, path_cfg)
    formula = formula_derivative(K, L, q, path_cfg, mu=mu)
    gamma_K = gamma(K, path_cfg, mu=mu)
    fd = fd_derivative(K, L, q, cfg, vcfg=vcfg)

    degenerate = abs(cfg.n - cfg.p + 1.0) < 1e-12
    rel_error = abs(fd - formula) / max(abs(formula), vcfg.floor)
    if degenerate:
        passed = abs(fd - formula) <= vcfg.tol_var * abs(gamma_K)
    else:
        passed = rel_error <= vcfg.tol_var
    report = VariationReport(
        K_id=K.digest(),
        L_id=L.digest(),
        q=q,
        p=cfg.p,
        fd_value=fd,
        formula_value=formula,
        gamma_value=gamma_K,
        rel_error=rel_error,
        step=vcfg.delta,
        richardson_used=vcfg.richardson,
        degenerate=degenerate,
        passed=passed,
    )
    log = logger.info if passed else logger.warning
    log(f'variation p={cfg.p} q={q}: fd {fd:.6g} vs formula {formula:.6g} (rel. error {rel_error:.3e})')
    return report


class FdOrderStudy(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: list[float]
    estimates: list[float]
    orders: list[float] = Field(..., description='log2 of successive difference ratios')

    @property
    def order(self) -> float:
        return float(min(self.orders))


def fd_order_study(
        K: SupportFunction,
        L: SupportFunction,
        q: float,
        cfg: MeasureConfig,
        step: float = 0.04,
        levels: int = 4,
        vcfg: Optional[VariationConfig] = None,
) -> FdOrderStudy:
    """
    Observed order of the central difference from steps step, step/2, ...; the ratio
    (D(d) - D(d/2)) / (D(d/2) - D(d/4)) tends to 2^order without a reference value.
    """
    if levels < 3:
        raise ValidationFailure('parameter-domain', 'an order study needs at least three steps')
    steps = [step / 2 ** k for k in range(levels)]
    estimates = central_differences(K, L, q, cfg, steps, vcfg)
    diffs = np.abs(np.diff(estimates))
    orders = np.log2(diffs[:-1] / diffs[1:])
    return FdOrderStudy(steps=steps, estimates=estimates, orders=orders.tolist())


class HomogeneityFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambdas: list[float]
    gamma_slope: float = Field(..., description='Fitted exponent of Gamma under scaling')
    lq_slopes: dict[float, float] = Field(default_factory=dict, description='Fitted exponent of the L_q total mass, per q')


def homogeneity_exponent(
        K: SupportFunction,
        cfg: MeasureConfig,
        lambdas: Sequence[float] = (0.5, 0.75, 1.5, 2.0),
        qs: Sequence[float] = (),
) -> HomogeneityFit:
    """Least-squares slopes of log Gamma(lambda K) and log |mu_{lambda K, q}| against log lambda."""
    bodies = [scale(K, lam) for lam in lambdas]
    measures = pharmonic_measures(bodies, cfg)

    x = np.log(np.asarray(lambdas, dtype=float))
    gammas = [gamma(B, cfg, mu=mu) for B, mu in zip(bodies, measures)]
    gamma_slope = float(np.polyfit(x, np.log(gammas), 1)[0])
    lq_slopes = {}
    for q in qs:
        masses = [lq_measure(B, q, cfg, mu=mu).total_mass for B, mu in zip(bodies, measures)]
        lq_slopes[q] = float(np.polyfit(x, np.log(masses), 1)[0])
    logger.info(f'homogeneity at p={cfg.p}: Gamma slope {gamma_slope:.4f} (expected {cfg.n - cfg.p + 1:.4f})')
    return HomogeneityFit(lambdas=list(lambdas), gamma_slope=gamma_slope, lq_slopes=lq_slopes)
