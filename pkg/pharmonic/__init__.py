from pharmonic.errors import ConvergenceFailure, InputOutputError, PharmonicError, ValidationFailure
from pharmonic.geometry import (
    BodyTransform,
    DirectionGrid,
    SupportFunction,
    boundary_point,
    curvature_density,
    hausdorff,
    make_grid,
    q_sum,
    radial_function,
    scale,
    support_of_ball,
    support_of_ellipse,
    support_of_polygon,
    translate,
    wulff_shape,
)
from pharmonic.measure import (
    MeasureConfig,
    SphericalMeasure,
    gamma,
    integrate,
    lq_measure,
    measure_centroid,
    pharmonic_measure,
)
from pharmonic.minkowski import (
    MinkowskiSolution,
    SolverConfig,
    TargetMeasure,
    check_spread,
    normalize_gamma,
    objective,
    optimal_center,
    phi,
    rescale_to_unit_constant,
    solve,
    stationarity_residual,
    synth_target,
)
from pharmonic.pde import AnnulusConfig, AnnulusMesh, PHarmonicSolution, boundary_gradient, build_mesh, radial_oracle, solve_plaplace
from pharmonic.variation import VariationConfig, VariationReport, fd_derivative, formula_derivative, gamma_on_path, verify_variation

__all__ = [
    'AnnulusConfig',
    'AnnulusMesh',
    'BodyTransform',
    'ConvergenceFailure',
    'DirectionGrid',
    'InputOutputError',
    'MeasureConfig',
    'MinkowskiSolution',
    'PHarmonicSolution',
    'PharmonicError',
    'SolverConfig',
    'SphericalMeasure',
    'SupportFunction',
    'TargetMeasure',
    'ValidationFailure',
    'VariationConfig',
    'VariationReport',
    'boundary_gradient',
    'boundary_point',
    'build_mesh',
    'check_spread',
    'curvature_density',
    'fd_derivative',
    'formula_derivative',
    'gamma',
    'gamma_on_path',
    'hausdorff',
    'integrate',
    'lq_measure',
    'make_grid',
    'measure_centroid',
    'normalize_gamma',
    'objective',
    'optimal_center',
    'pharmonic_measure',
    'phi',
    'q_sum',
    'radial_function',
    'radial_oracle',
    'rescale_to_unit_constant',
    'scale',
    'solve',
    'solve_plaplace',
    'stationarity_residual',
    'support_of_ball',
    'support_of_ellipse',
    'support_of_polygon',
    'synth_target',
    'translate',
    'verify_variation',
    'wulff_shape',
]
