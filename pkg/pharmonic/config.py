""" Run configuration and run reports for the command line workflows """
import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from pharmonic.errors import InputOutputError, ValidationFailure
from pharmonic.geometry import DirectionGrid, make_grid
from pharmonic.logger import setup_logger
from pharmonic.measure import MeasureConfig
from pharmonic.minkowski import SolverConfig
from pharmonic.pde import AnnulusConfig
from pharmonic.variation import VariationConfig

logger = setup_logger('config')


class RunConfig(BaseModel):
    """
    Everything a run needs. Loaded from one JSON file; command line flags override it.
    The defaults are the acceptance configuration (M = 256, 64 x 256 mesh).
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    grid_size: int = Field(256, ge=8, description='Number of directions M')
    annulus: AnnulusConfig = Field(default_factory=AnnulusConfig)
    variation: VariationConfig = Field(default_factory=VariationConfig)
    solver: Optional[SolverConfig] = Field(None, description='Minkowski solver settings; q must lie in (0, 1)')
    out_dir: str = Field('pharmonic-out', description='Directory receiving CSV, JSON and SVG artifacts')
    seed: int = Field(0, description='Seed for generated test bodies')
    workers: int = Field(1, ge=1, description='Threads for independent PDE solves')

    def grid(self) -> DirectionGrid:
        return make_grid(self.grid_size)

    def measure_config(self) -> MeasureConfig:
        return MeasureConfig(annulus=self.annulus, grid=self.grid(), workers=self.workers)

    def solver_config(self) -> SolverConfig:
        return self.solver or SolverConfig()


class RunReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: str
    inputs_digest: str = Field(..., description='Hash of the configuration and input files')
    wall_time: float = Field(..., description='Seconds')
    outcome: Literal['pass', 'fail', 'no-convergence']
    artifacts: list[str] = Field(default_factory=list)
    details: dict[str, Any] = Field(default_factory=dict)


def _describe(e: ValidationError) -> str:
    first = e.errors()[0]
    key = '.'.join(str(part) for part in first['loc']) or '<root>'
    return f"'{key}': {first['msg']}"


def validate_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ValidationFailure('invalid-config', _describe(e)) from e


def load_run_config(path: Optional[str]) -> RunConfig:
    """
    Read a RunConfig from JSON, or return the defaults when no path is given.

    Raises:
        InputOutputError: unreadable file or malformed JSON (with line number).
        ValidationFailure: 'invalid-config' naming the offending key.
    """
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputOutputError('file-unreadable', f'{path}: {e.strerror}') from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputOutputError('parse-error', f'{path}, line {e.lineno}: {e.msg}') from e
    if not isinstance(data, dict):
        raise InputOutputError('parse-error', f'{path}: top level must be an object')
    logger.debug(f'loaded configuration from {path}')
    return validate_config(data)


def apply_overrides(cfg: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """
    Apply dotted-key overrides such as {'annulus.p': 1.5}; None values are skipped.
    """
    data = cfg.model_dump()
    for dotted, value in overrides.items():
        if value is None:
            continue
        *parents, leaf = dotted.split('.')
        node = data
        for key in parents:
            if node.get(key) is None:
                node[key] = {}
            node = node[key]
        node[leaf] = value
    return validate_config(data)
