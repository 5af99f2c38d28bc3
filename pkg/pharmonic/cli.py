""" Command line entry point: measure, verify, variation, solve and roundtrip workflows """
import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from pharmonic.config import RunConfig, RunReport, apply_overrides, load_run_config
from pharmonic.errors import PharmonicError
from pharmonic.geometry import hausdorff, translate
from pharmonic.io.files import (
    file_digest,
    read_body,
    read_measure_csv,
    write_body,
    write_diagnostics_csv,
    write_json,
    write_measure_csv,
    write_reports_csv,
    write_rows,
    write_solution_csv,
)
from pharmonic.io.plots import plot_density_polar, plot_error_vs_step, plot_residual_trace
from pharmonic.logger import set_verbosity, setup_logger
from pharmonic.measure import MeasureConfig, gamma, lq_measure, measure_centroid, pharmonic_measure
from pharmonic.minkowski import (
    MinkowskiSolution,
    normalize_gamma,
    optimal_center,
    rescale_to_unit_constant,
    solve,
    synth_target,
)
from pharmonic.pde import solve_body
from pharmonic.suites import SUITES, run_suites
from pharmonic.variation import verify_variation

logger = setup_logger('cli')
console = Console()

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_NO_CONVERGENCE = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Run configuration (JSON)')
    common.add_argument('--grid-size', type=int, help='Number of directions M')
    common.add_argument('--ns', type=int, help='Radial cells of the annulus mesh')
    common.add_argument('--ntheta', type=int, help='Angular nodes of the annulus mesh')
    common.add_argument('--workers', type=int, help='Threads for independent solves')
    common.add_argument('--seed', type=int, help='Seed for generated test bodies')
    common.add_argument('--out-dir', help='Directory for output artifacts')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('--quiet', action='store_true', help='Warnings and errors only')

    parser = argparse.ArgumentParser(prog='pharmonic', description='p-harmonic measures and the L_q Minkowski problem')
    sub = parser.add_subparsers(dest='command', required=True)

    measure = sub.add_parser('measure', parents=[common], help='p-harmonic and L_q measures of a body')
    measure.add_argument('--body', required=True, help='Body JSON')
    measure.add_argument('--p', type=float, help='p-Laplace exponent')
    measure.add_argument('--q', type=float, help='L_q exponent of the weighted measure')
    measure.add_argument('--dump-mesh', action='store_true', help='Also write the mesh and nodal solution')

    verify = sub.add_parser('verify', parents=[common], help='Run the property suites')
    verify.add_argument('--suite', action='append', choices=list(SUITES), help='Suite to run (repeatable; default all)')

    variation = sub.add_parser('variation', parents=[common], help='Finite-difference check of the first variation of Gamma')
    variation.add_argument('--pair', nargs=2, action='append', required=True, metavar=('K', 'L'), help='Body JSON pair (repeatable)')
    variation.add_argument('--p', type=float, nargs='+', help='p values')
    variation.add_argument('--q', type=float, nargs='+', help='q values')
    variation.add_argument('--delta', type=float, nargs='+', help='Finite-difference steps')

    for name, helptext in (('solve', 'Solve mu = c mu_(Omega,q) for a target measure'),
                           ('roundtrip', 'Synthesize a target from a body and solve for it')):
        cmd = sub.add_parser(name, parents=[common], help=helptext)
        if name == 'solve':
            cmd.add_argument('--target', required=True, help='Measure CSV')
            cmd.add_argument('--out', required=True, help='Body JSON for the solution')
        else:
            cmd.add_argument('--body', required=True, help='Body JSON of the generating body')
        cmd.add_argument('--p', type=float, required=True, help='p-Laplace exponent')
        cmd.add_argument('--q', type=float, required=True, help='L_q exponent, 0 < q < 1')
        cmd.add_argument('--rescale-c1', action='store_true', help='Rescale the solution to constant 1')
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Configuration file first, flags win."""
    cfg = load_run_config(args.config)
    overrides = {
        'grid_size': args.grid_size,
        'annulus.Ns': args.ns,
        'annulus.Ntheta': args.ntheta,
        'workers': args.workers,
        'seed': args.seed,
        'out_dir': args.out_dir,
    }
    p = getattr(args, 'p', None)
    if isinstance(p, float):
        overrides['annulus.p'] = p
    q = getattr(args, 'q', None)
    # measure accepts any real q, only the solver restricts it to (0, 1)
    if isinstance(q, float) and args.command in ('solve', 'roundtrip'):
        overrides['solver.q'] = q
    if getattr(args, 'rescale_c1', False):
        overrides['solver.rescale_c1'] = True
    return apply_overrides(cfg, overrides)


def _out(cfg: RunConfig, name: str) -> str:
    return str(Path(cfg.out_dir) / name)


def cmd_measure(args: argparse.Namespace, cfg: RunConfig) -> RunReport:
    started = time.perf_counter()
    mcfg = cfg.measure_config()
    K = read_body(args.body, mcfg.grid)
    q = cfg.solver_config().q if args.q is None else args.q

    mu = pharmonic_measure(K, mcfg)
    mu_q = lq_measure(K, q, mcfg, mu=mu)
    artifacts = [
        write_measure_csv(_out(cfg, 'measure.csv'), mu),
        write_measure_csv(_out(cfg, 'measure_lq.csv'), mu_q),
        plot_density_polar(_out(cfg, 'density.svg'), [('mu_K', mu), (f'mu_K,q (q={q})', mu_q)], title=f'p = {mcfg.p}'),
    ]
    if args.dump_mesh:
        mesh, sol = solve_body(K, mcfg.annulus)
        artifacts.append(write_solution_csv(_out(cfg, 'solution.csv'), mesh, sol))

    centroid = measure_centroid(mu)
    gamma_K = gamma(K, mcfg, mu=mu)
    table = Table(title=f'p-harmonic measure of {args.body}')
    table.add_column('quantity')
    table.add_column('value', justify='right')
    table.add_row('Gamma', f'{gamma_K:.8g}')
    table.add_row('total mass', f'{mu.total_mass:.8g}')
    table.add_row(f'L_q total mass (q={q})', f'{mu_q.total_mass:.8g}')
    table.add_row('centroid', f'({centroid[0]:.3e}, {centroid[1]:.3e})')
    console.print(table)
    return RunReport(
        command='measure',
        inputs_digest=file_digest([args.body], cfg.model_dump_json()),
        wall_time=time.perf_counter() - started,
        outcome='pass',
        artifacts=artifacts,
        details={'gamma': gamma_K, 'total_mass': mu.total_mass},
    )


def cmd_verify(args: argparse.Namespace, cfg: RunConfig) -> RunReport:
    started = time.perf_counter()
    results = run_suites(cfg.measure_config(), names=args.suite, seed=cfg.seed)
    table = Table(title='property suites')
    for column in ('suite', 'outcome', 'worst', 'tolerance'):
        table.add_column(column)
    for result in results:
        table.add_row(result.name, 'pass' if result.passed else 'FAIL', f'{result.worst:.3g}', f'{result.tolerance:g}')
    console.print(table)
    for result in results:
        if not result.passed:
            for line in result.details:
                console.print(f'  [{result.name}] {line}')
    path = write_rows(
        _out(cfg, 'verify.csv'),
        ['suite', 'passed', 'worst', 'tolerance'],
        ({'suite': r.name, 'passed': r.passed, 'worst': r.worst, 'tolerance': r.tolerance} for r in results),
    )
    return RunReport(
        command='verify',
        inputs_digest=file_digest([], cfg.model_dump_json()),
        wall_time=time.perf_counter() - started,
        outcome='pass' if all(r.passed for r in results) else 'fail',
        artifacts=[path],
        details={r.name: r.details for r in results},
    )


def cmd_variation(args: argparse.Namespace, cfg: RunConfig) -> RunReport:
    started = time.perf_counter()
    mcfg = cfg.measure_config()
    ps = args.p or [cfg.annulus.p]
    qs = args.q or [cfg.solver_config().q]
    deltas = args.delta or [cfg.variation.delta]

    bodies = {path: read_body(path, mcfg.grid) for pair in args.pair for path in pair}
    jobs = [(K, L, p, q, d) for K, L in args.pair for p in ps for q in qs for d in deltas]

    def run(job):
        K, L, p, q, d = job
        vcfg = cfg.variation.model_copy(update={'delta': d})
        # inner solves stay sequential when jobs already run in parallel
        return verify_variation(bodies[K], bodies[L], q, mcfg.with_p(p).model_copy(update={'workers': 1}), vcfg)

    if cfg.workers == 1:
        reports = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(run, jobs))

    artifacts = [write_reports_csv(_out(cfg, 'variation.csv'), reports, labels=[(K, L) for K, L, *_ in jobs])]
    if len(deltas) > 1:
        first = [r for r, job in zip(reports, jobs) if job[:4] == jobs[0][:4]]
        artifacts.append(plot_error_vs_step(_out(cfg, 'variation_error.svg'), [r.step for r in first], [r.rel_error for r in first]))

    for (K, L, p, q, d), r in zip(jobs, reports):
        flag = ' (degenerate: n - p + 1 = 0)' if r.degenerate else ''
        console.print(f'{K} / {L}  p={p} q={q} step={d}: fd={r.fd_value:.6g} formula={r.formula_value:.6g} '
                      f'rel.error={r.rel_error:.3e} {"pass" if r.passed else "FAIL"}{flag}')
    return RunReport(
        command='variation',
        inputs_digest=file_digest(sorted(bodies), cfg.model_dump_json()),
        wall_time=time.perf_counter() - started,
        outcome='pass' if all(r.passed for r in reports) else 'fail',
        artifacts=artifacts,
    )


def _solution_artifacts(cfg: RunConfig, solution: MinkowskiSolution, body_path: str) -> list[str]:
    return [
        write_body(body_path, solution.omega),
        write_diagnostics_csv(_out(cfg, 'diagnostics.csv'), solution.diagnostics),
        plot_residual_trace(_out(cfg, 'residual.svg'), solution.diagnostics),
    ]


def _outcome(solution: MinkowskiSolution) -> str:
    return 'pass' if solution.converged else 'no-convergence'


def cmd_solve(args: argparse.Namespace, cfg: RunConfig) -> RunReport:
    started = time.perf_counter()
    mu = read_measure_csv(args.target)
    mcfg = MeasureConfig(annulus=cfg.annulus, grid=mu.grid, workers=cfg.workers)
    solution = solve(mu, args.p, args.q, mcfg, cfg.solver_config())
    console.print(f'c = {solution.c:.8g}, residual = {solution.residual:.4f}, iterations = {solution.iterations}'
                  f'{" (rescaled to c = 1)" if solution.rescaled_to_unit else ""}')
    return RunReport(
        command='solve',
        inputs_digest=file_digest([args.target], cfg.model_dump_json()),
        wall_time=time.perf_counter() - started,
        outcome=_outcome(solution),
        artifacts=_solution_artifacts(cfg, solution, args.out),
        details={'c': solution.c, 'residual': solution.residual, 'iterations': solution.iterations},
    )


def cmd_roundtrip(args: argparse.Namespace, cfg: RunConfig) -> RunReport:
    """Synthesize mu from a body, solve, and compare against the Gamma-normalized, recentered body."""
    started = time.perf_counter()
    mcfg = cfg.measure_config().with_p(args.p)
    scfg = cfg.solver_config()
    K_star = read_body(args.body, mcfg.grid)
    mu = synth_target(K_star, args.p, args.q, mcfg)
    artifacts = [write_measure_csv(_out(cfg, 'target.csv'), mu)]
    solution = solve(mu, args.p, args.q, mcfg, scfg)

    reference = normalize_gamma(K_star, mcfg, gamma_ball=solution.gamma_ball, tol_norm=scfg.tol_norm)
    reference = translate(reference, -optimal_center(reference, mu, args.q, scfg.tol_center, scfg.max_center_iters))
    reference_c = float(np.sum(reference.h ** args.q * mu.density) * mu.grid.spacing) / solution.gamma_ball
    if solution.rescaled_to_unit:
        reference = rescale_to_unit_constant(reference, reference_c, args.p, args.q, mcfg.n)
    recovery = hausdorff(solution.omega, reference) / float(reference.h.max())
    artifacts += _solution_artifacts(cfg, solution, _out(cfg, 'recovered.json'))
    console.print(f'recovery sup error {recovery:.3%}, c = {solution.c:.6g} (reference {reference_c:.6g}), '
                  f'residual = {solution.residual:.4f}')
    return RunReport(
        command='roundtrip',
        inputs_digest=file_digest([args.body], cfg.model_dump_json()),
        wall_time=time.perf_counter() - started,
        outcome=_outcome(solution),
        artifacts=artifacts,
        details={'recovery': recovery, 'c': solution.c, 'residual': solution.residual},
    )


COMMANDS = {
    'measure': cmd_measure,
    'verify': cmd_verify,
    'variation': cmd_variation,
    'solve': cmd_solve,
    'roundtrip': cmd_roundtrip,
}


def exit_code(report: RunReport) -> int:
    return {'pass': EXIT_PASS, 'fail': EXIT_FAIL, 'no-convergence': EXIT_NO_CONVERGENCE}[report.outcome]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_verbosity(verbose=args.verbose, quiet=args.quiet)
    try:
        cfg = resolve_config(args)
        report = COMMANDS[args.command](args, cfg)
        write_json(_out(cfg, f'{args.command}_report.json'), report.model_dump())
    except PharmonicError as e:
        logger.error(str(e))
        return e.exit_code
    except ValidationError as e:
        logger.error(f'invalid-config: {e}')
        return 2
    logger.info(f'{args.command}: {report.outcome} in {report.wall_time:.1f}s')
    return exit_code(report)


if __name__ == '__main__':
    sys.exit(main())
