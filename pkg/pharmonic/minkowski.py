""" L_q Minkowski problem for the p-harmonic measure: find Omega and c with mu = c mu_{Omega,q} """
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pharmonic.errors import ConvergenceFailure, PharmonicError, ValidationFailure
from pharmonic.geometry import ArrayLike, SupportFunction, scale, support_of_ball, translate, wulff_shape
from pharmonic.logger import setup_logger
from pharmonic.measure import (
    MeasureConfig,
    SphericalMeasure,
    gamma,
    lq_measure,
    measure_and_gradient,
    relative_sup_distance,
    scaled_measure,
)

logger = setup_logger('minkowski')

PROBES_PER_DIRECTION = 4
SPREAD_FLOOR = 1e-12
OBJECTIVE_SLACK = 1e-12


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: float = Field(0.5, gt=0.0, lt=1.0, description='L_q exponent, 0 < q < 1')
    tol_solve: float = Field(0.05, gt=0.0, description='Stationarity residual at which the solver stops')
    tol_center: float = Field(1e-8, gt=0.0, description='Inner maximizer gradient tolerance, relative to total mass')
    tol_norm: float = Field(0.01, gt=0.0, description='Accepted relative drift of Gamma after normalization')
    max_outer: int = Field(60, ge=1, description='Outer iteration cap')
    max_center_iters: int = Field(100, ge=1, description='Inner maximizer iteration cap')
    step_floor: float = Field(1e-8, gt=0.0, description='Smallest step tried by the line search')
    smoothing: int = Field(3, ge=1, description='Box filter width used by the stationarity residual')
    rescale_c1: bool = Field(False, description='Rescale the solution so that the constant becomes 1')


class TargetMeasure(SphericalMeasure):
    """
    A measure that is not concentrated on any closed half circle.

    Raises:
        ValidationFailure: 'hemisphere-concentrated' when the spread margin is not positive.
    """

    @model_validator(mode='after')
    def _check_spread(self) -> 'TargetMeasure':
        if self.total_mass <= 0.0:
            raise ValidationFailure('hemisphere-concentrated', 'target measure has no mass')
        margin = check_spread(self)
        # probes aligned with a supporting line see round-off, not mass
        if margin <= SPREAD_FLOOR * self.total_mass:
            raise ValidationFailure('hemisphere-concentrated', f'spread margin {margin:.3e} is not positive')
        return self

    @property
    def spread_margin(self) -> float:
        return check_spread(self)

    @classmethod
    def from_measure(cls, m: SphericalMeasure) -> 'TargetMeasure':
        if isinstance(m, TargetMeasure):
            return m
        return cls(grid=m.grid, density=m.density, provenance='target', p=m.p, q=m.q, body_id=m.body_id)


class SolverState(BaseModel):
    """One Gamma-normalized iterate, translated so that its inner maximizer sits at the origin."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    Q: SupportFunction
    zeta: np.ndarray = Field(..., description='Inner maximizer before recentering')
    objective: float
    residual: float
    iter: int
    c: float
    gamma: float
    mu_Q: SphericalMeasure = Field(..., description='p-harmonic measure of Q')
    gradient: np.ndarray = Field(..., description='Boundary gradient of Q per normal direction')


class TraceRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    iter: int
    objective: float
    residual: float
    gamma: float
    step: float


class MinkowskiSolution(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    omega: SupportFunction
    c: float = Field(..., gt=0.0)
    residual: float
    iterations: int
    converged: bool
    rescaled_to_unit: bool = False
    gamma_ball: float = Field(..., description='Gamma of the unit disk, the normalization level')
    diagnostics: list[TraceRow] = Field(default_factory=list)


def check_spread(mu: SphericalMeasure, probes: Optional[int] = None) -> float:
    """
    min over probe directions v of the one-sided moment sum_j density_j max(<xi_j, v>, 0) dtheta.
    Positive exactly when mu charges every open half circle.
    """
    count = probes or PROBES_PER_DIRECTION * mu.grid.M
    ang = 2.0 * np.pi * np.arange(count) / count
    V = np.column_stack([np.cos(ang), np.sin(ang)])
    moments = np.maximum(V @ mu.grid.directions.T, 0.0) @ mu.density * mu.grid.spacing
    return float(moments.min())


def _bases(Q: SupportFunction, zeta: ArrayLike) -> np.ndarray:
    return Q.h - Q.grid.directions @ np.asarray(zeta, dtype=float)


def phi(Q: SupportFunction, zeta: ArrayLike, mu: SphericalMeasure, q: float) -> float:
    """Phi_Q(zeta) = sum_j (h_Q(xi_j) - <zeta, xi_j>)^q density_j dtheta."""
    base = _bases(Q, zeta)
    if base.min() <= 0.0:
        raise ValidationFailure('zeta-not-interior', f'point {np.asarray(zeta).tolist()} is not interior to the body')
    return float(np.sum(base ** q * mu.density) * mu.grid.spacing)


def optimal_center(Q: SupportFunction, mu: SphericalMeasure, q: float, tol_center: float = 1e-8, max_iters: int = 100) -> np.ndarray:
    """
    Unique maximizer of the strictly concave Phi_Q, by Newton ascent with backtracking
    that keeps every base h_j - <zeta, xi_j> positive and never lowers Phi.

    Raises:
        ConvergenceFailure: 'center-no-convergence' after max_iters steps.
    """
    xi = Q.grid.directions
    w = mu.density * mu.grid.spacing
    threshold = tol_center * float(w.sum())
    zeta = np.zeros(2)
    value = phi(Q, zeta, mu, q)
    grad_norm = np.inf
    for _ in range(max_iters):
        base = _bases(Q, zeta)
        grad = -q * (base ** (q - 1.0) * w) @ xi
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= threshold:
            return zeta
        hess = q * (q - 1.0) * (xi.T * (base ** (q - 2.0) * w)) @ xi
        try:
            direction = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            direction = grad
        t = 1.0
        while t > 1e-16:
            trial = zeta + t * direction
            if _bases(Q, trial).min() > 0.0:
                trial_value = phi(Q, trial, mu, q)
                if trial_value >= value - 1e-15 * abs(value):
                    zeta, value = trial, trial_value
                    break
            t *= 0.5
        else:
            break
    raise ConvergenceFailure(
        'center-no-convergence',
        f'inner maximizer gradient {grad_norm:.3e} above {threshold:.3e}',
        residual=grad_norm,
        iterations=max_iters,
    )


def objective(Q: SupportFunction, mu: SphericalMeasure, q: float, scfg: Optional[SolverConfig] = None) -> float:
    """sup over zeta of Phi_Q(zeta)."""
    scfg = scfg or SolverConfig(q=q)
    zeta = optimal_center(Q, mu, q, scfg.tol_center, scfg.max_center_iters)
    return phi(Q, zeta, mu, q)


def _normalization_degree(cfg: MeasureConfig) -> float:
    degree = cfg.n - cfg.p + 1.0
    if abs(degree) < 1e-12:
        raise ValidationFailure('normalization-undefined', f'Gamma has degree 0 at p = n + 1 = {cfg.p}')
    return degree


def unit_gamma(grid, cfg: MeasureConfig) -> float:
    """Gamma of the unit disk on the given grid."""
    return gamma(support_of_ball(1.0, (0.0, 0.0), grid), cfg)


def normalize_gamma(Q: SupportFunction, cfg: MeasureConfig, gamma_ball: Optional[float] = None, tol_norm: float = 0.01) -> SupportFunction:
    """
    Rescale Q so that Gamma(Q) = Gamma(B), using Gamma(lam Q) = lam^(n-p+1) Gamma(Q).
    One corrective rescale is applied if the drift after the first exceeds tol_norm.

    Raises:
        ValidationFailure: 'normalization-undefined' for p = n + 1, 'degenerate-body' when Gamma(Q) <= 0.
    """
    degree = _normalization_degree(cfg)
    target = gamma_ball if gamma_ball is not None else unit_gamma(Q.grid, cfg)
    value = gamma(Q, cfg)
    if value <= 0.0:
        raise ValidationFailure('degenerate-body', f'Gamma = {value:.3e} is not positive')
    normalized = scale(Q, (target / value) ** (1.0 / degree))

    value = gamma(normalized, cfg)
    drift = abs(value / target - 1.0)
    if drift > tol_norm:
        logger.warning(f'Gamma off by {drift:.2%} after rescaling, applying one correction')
        normalized = scale(normalized, (target / value) ** (1.0 / degree))
    return normalized


def rescale_to_unit_constant(omega: SupportFunction, c: float, p: float, q: float, n: int = 2) -> SupportFunction:
    """
    scale(omega, c^(1/(n-p+1-q))): mu_{Omega,q} is homogeneous of degree n-p+1-q, so the
    rescaled body carries the target with constant 1.

    Raises:
        ValidationFailure: 'rescale-undefined' when p = n + 1 - q.
    """
    degree = n - p + 1.0 - q
    if abs(degree) < 1e-12:
        raise ValidationFailure('rescale-undefined', f'mu_(Omega,q) has degree 0 at p = n + 1 - q = {p}')
    if c <= 0.0:
        raise ValidationFailure('parameter-domain', f'constant must be positive, got {c}')
    return scale(omega, c ** (1.0 / degree))


def stationarity_residual(
        omega: SupportFunction,
        c: float,
        mu: SphericalMeasure,
        q: float,
        cfg: MeasureConfig,
        mu_omega: Optional[SphericalMeasure] = None,
        smoothing: int = 3,
) -> float:
    """Relative sup distance between mu and c mu_{Omega,q}, both box-filtered."""
    lq = lq_measure(omega, q, cfg, mu=mu_omega)
    fitted = lq.model_copy(update={'density': c * lq.density})
    return relative_sup_distance(mu, fitted, smooth=smoothing)


def synth_target(omega_star: SupportFunction, p: float, q: float, cfg: MeasureConfig, normalize: bool = True) -> TargetMeasure:
    """Target mu_{Omega*,q}, scaled to unit total mass unless `normalize` is off."""
    lq = lq_measure(omega_star, q, cfg.with_p(p))
    density = lq.density / lq.total_mass if normalize else lq.density
    return TargetMeasure(grid=lq.grid, density=density, provenance='target', p=p, q=q, body_id=lq.body_id)


def _evaluate(Q_raw: SupportFunction, mu: TargetMeasure, q: float, cfg: MeasureConfig, gamma_ball: float, scfg: SolverConfig, it: int) -> SolverState:
    """Normalize Q_raw by the exact scaling law, recenter it on its inner maximizer and score it."""
    mu_raw, g_raw = measure_and_gradient(Q_raw, cfg)
    gamma_raw = gamma(Q_raw, cfg, mu=mu_raw)
    if gamma_raw <= 0.0:
        raise ValidationFailure('degenerate-body', f'Gamma = {gamma_raw:.3e} is not positive')
    lam = (gamma_ball / gamma_raw) ** (1.0 / _normalization_degree(cfg))
    Q = scale(Q_raw, lam)
    mu_Q = scaled_measure(mu_raw, lam, n=cfg.n)

    zeta = optimal_center(Q, mu, q, scfg.tol_center, scfg.max_center_iters)
    Q = translate(Q, -zeta)
    value = phi(Q, np.zeros(2), mu, q)
    c = float(np.sum(Q.h ** q * mu.density) * mu.grid.spacing) / gamma_ball
    residual = stationarity_residual(Q, c, mu, q, cfg, mu_omega=mu_Q, smoothing=scfg.smoothing)
    return SolverState(
        Q=Q, zeta=zeta, objective=value, residual=residual, iter=it, c=c,
        gamma=gamma_ball, mu_Q=mu_Q, gradient=g_raw / lam,
    )


def _curvature_symbol(M: int) -> np.ndarray:
    """Fourier symbol of the periodic operator h -> h'' + h used by curvature_density."""
    k = np.arange(M // 2 + 1)
    dtheta = 2.0 * np.pi / M
    return 1.0 - (2.0 / dtheta * np.sin(0.5 * k * dtheta)) ** 2


def _search_direction(state: SolverState, mu: TargetMeasure, q: float, p: float) -> np.ndarray:
    """
    Danskin gradient of Phi projected against the Gamma constraint, expressed as the
    curvature-density correction (mu - c mu_{Q,q}) / (c h^(1-q) |grad u|^(p-1)) and
    preconditioned by inverting h'' + h in Fourier space. The first harmonic (translations)
    is dropped.
    """
    h = state.Q.h
    weight = state.c * h ** (1.0 - q) * state.gradient ** (p - 1.0)
    fitted = state.c * h ** (1.0 - q) * state.mu_Q.density
    ds = (mu.density - fitted) / weight
    coef = np.fft.rfft(ds)
    symbol = _curvature_symbol(len(h))
    coef[1] = 0.0
    symbol[1] = 1.0
    return np.fft.irfft(coef / symbol, n=len(h))


def _danskin_direction(state: SolverState, mu: TargetMeasure, q: float, cfg: MeasureConfig) -> np.ndarray:
    """
    Negative Danskin gradient of h -> Phi_h(zeta*) at the recentered maximizer zeta* = 0,
    with the component along the Gamma gradient (n - p + 1) mu_Q removed.
    """
    dtheta = mu.grid.spacing
    g = q * state.Q.h ** (q - 1.0) * mu.density * dtheta
    normal = (cfg.n - cfg.p + 1.0) * state.mu_Q.density * dtheta
    return -g + (g @ normal) / (normal @ normal) * normal


def _try_step(
        state: SolverState,
        direction: np.ndarray,
        tau: float,
        mu: TargetMeasure,
        q: float,
        cfg: MeasureConfig,
        gamma_ball: float,
        scfg: SolverConfig,
) -> Optional[SolverState]:
    h_trial = state.Q.h + tau * direction
    if h_trial.min() <= 0.0:
        return None
    try:
        return _evaluate(wulff_shape(h_trial, mu.grid), mu, q, cfg, gamma_ball, scfg, state.iter + 1)
    except PharmonicError as e:
        logger.debug(f'step {tau:.3g} rejected: {e}')
        return None


def _not_higher(candidate: SolverState, state: SolverState) -> bool:
    return candidate.objective <= state.objective + OBJECTIVE_SLACK * abs(state.objective)


def _trace_row(state: SolverState, step: float) -> TraceRow:
    return TraceRow(iter=state.iter, objective=state.objective, residual=state.residual, gamma=state.gamma, step=step)


def solve(mu: SphericalMeasure, p: float, q: float, cfg: MeasureConfig, scfg: Optional[SolverConfig] = None) -> MinkowskiSolution:
    """
    Projected descent for  inf_Q sup_zeta Phi_Q(zeta)  subject to Gamma(Q) = Gamma(B).

    Each step moves the support values along a search direction, convexifies by a Wulff
    shape, renormalizes Gamma and recenters on the inner maximizer. The preconditioned
    curvature step is kept when the stationarity residual drops and the objective does not
    rise; otherwise a backtracking step along the projected Danskin gradient is taken, kept
    only when the objective falls. The objective trace is therefore non-increasing.
    The iteration stops at residual <= tol_solve. Hitting max_outer or the step floor
    returns the last iterate with converged=False.

    Raises:
        ValidationFailure: 'parameter-domain' for q outside (0, 1) or p <= 1 or p = n + 1,
            'hemisphere-concentrated' for a target charging only a closed half circle,
            'rescale-undefined' when rescale_c1 is requested at p = n + 1 - q.
    """
    if not 0.0 < q < 1.0:
        raise ValidationFailure('parameter-domain', f'the solver needs 0 < q < 1, got q={q}')
    scfg = (scfg or SolverConfig()).model_copy(update={'q': q})
    if p <= 1.0 or abs(p - (cfg.n + 1.0)) < 1e-12:
        raise ValidationFailure('parameter-domain', f'the solver needs 1 < p != n + 1, got p={p}')
    cfg = cfg.with_p(p)
    if scfg.rescale_c1 and abs(cfg.n - p + 1.0 - q) < 1e-12:
        raise ValidationFailure('rescale-undefined', f'cannot rescale to unit constant at p = n + 1 - q = {p}')
    target = TargetMeasure.from_measure(mu)

    gamma_ball = unit_gamma(target.grid, cfg)
    logger.info(f'solving L_q Minkowski problem: p={p}, q={q}, M={target.grid.M}, Gamma(B)={gamma_ball:.6g}')
    state = _evaluate(support_of_ball(1.0, (0.0, 0.0), target.grid), target, q, cfg, gamma_ball, scfg, 0)
    trace = [_trace_row(state, 0.0)]
    tau = 1.0
    while state.residual > scfg.tol_solve and state.iter < scfg.max_outer:
        accepted, step, kind = None, tau, 'curvature'
        direction = _search_direction(state, target, q, p)
        while step >= scfg.step_floor:
            candidate = _try_step(state, direction, step, target, q, cfg, gamma_ball, scfg)
            if candidate is not None and candidate.residual < state.residual and _not_higher(candidate, state):
                accepted = candidate
                break
            step *= 0.5
        if accepted is None:
            kind = 'danskin'
            direction = _danskin_direction(state, target, q, cfg)
            step = 0.5 * float(state.Q.h.mean()) / max(float(np.abs(direction).max()), SPREAD_FLOOR)
            while step >= scfg.step_floor:
                candidate = _try_step(state, direction, step, target, q, cfg, gamma_ball, scfg)
                if candidate is not None and candidate.objective < state.objective:
                    accepted = candidate
                    break
                step *= 0.5
        if accepted is None:
            logger.warning(f'line search stalled at iteration {state.iter} with residual {state.residual:.4f}')
            break
        state = accepted
        trace.append(_trace_row(state, step))
        logger.debug(f'iteration {state.iter}: {kind} step {step:.3g}, objective {state.objective:.6g}, residual {state.residual:.4f}')
        if kind == 'curvature':
            tau = min(1.0, 2.0 * step)

    converged = state.residual <= scfg.tol_solve
    omega, c, residual = state.Q, state.c, state.residual
    if scfg.rescale_c1:
        omega = rescale_to_unit_constant(omega, c, p, q, cfg.n)
        c = 1.0
        residual = stationarity_residual(omega, c, target, q, cfg, smoothing=scfg.smoothing)
    log = logger.info if converged else logger.warning
    log(f'solver finished after {state.iter} iterations: residual {residual:.4f}, c={c:.6g}')
    return MinkowskiSolution(
        omega=omega,
        c=c,
        residual=residual,
        iterations=state.iter,
        converged=converged,
        rescaled_to_unit=scfg.rescale_c1,
        gamma_ball=gamma_ball,
        diagnostics=trace,
    )
