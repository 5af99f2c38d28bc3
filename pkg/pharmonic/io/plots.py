""" Self-contained SVG plots """
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from pharmonic.logger import setup_logger  # noqa: E402
from pharmonic.measure import SphericalMeasure  # noqa: E402

logger = setup_logger('plots')

# stable element ids and no timestamp keep repeated runs byte-identical
matplotlib.rcParams['svg.hashsalt'] = 'pharmonic'
matplotlib.rcParams['svg.fonttype'] = 'path'
SVG_METADATA = {'Date': None}


def _save(fig, path: str) -> str:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(target, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    logger.info(f'wrote plot {path}')
    return str(target)


def plot_density_polar(path: str, measures: Sequence[tuple[str, SphericalMeasure]], title: str = '') -> str:
    """Polar plot of one or more densities against the normal angle."""
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection='polar')
    for label, m in measures:
        theta = np.append(m.grid.angles, 2.0 * np.pi)
        ax.plot(theta, np.append(m.density, m.density[0]), label=label, linewidth=1.2)
    ax.set_title(title)
    if measures:
        ax.legend(loc='lower left', fontsize='small')
    return _save(fig, path)


def plot_error_vs_step(path: str, steps: Sequence[float], errors: Sequence[float], label: str = 'relative error') -> str:
    """Log-log error curve with a reference slope of 2."""
    fig, ax = plt.subplots(figsize=(5, 4))
    steps = np.asarray(steps, dtype=float)
    errors = np.maximum(np.asarray(errors, dtype=float), np.finfo(float).tiny)
    ax.loglog(steps, errors, 'o-', label=label)
    ax.loglog(steps, errors[0] * (steps / steps[0]) ** 2, 'k--', linewidth=0.8, label='slope 2')
    ax.set_xlabel('step')
    ax.set_ylabel('error')
    ax.legend(fontsize='small')
    return _save(fig, path)


def plot_residual_trace(path: str, trace: Sequence) -> str:
    """Stationarity residual and objective per solver iteration."""
    fig, ax = plt.subplots(figsize=(5, 4))
    its = [row.iter for row in trace]
    ax.semilogy(its, [max(row.residual, 1e-16) for row in trace], 'o-', label='residual')
    ax.set_xlabel('iteration')
    ax.set_ylabel('residual')
    twin = ax.twinx()
    twin.plot(its, [row.objective for row in trace], 's--', color='tab:orange', label='objective')
    twin.set_ylabel('objective')
    return _save(fig, path)
