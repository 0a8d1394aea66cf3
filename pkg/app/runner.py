"""
Config-driven execution: one task per disorder realization, then aggregation.

Realizations are independent work items. They run sequentially or through a
joblib pool; either way records are collected and written in realization
order, so outputs do not depend on the worker count.
"""

import logging
import sys
import time
from typing import List, Optional, Sequence, Tuple, Union

import pandas as pd
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits
from tqdm import tqdm

from . import __version__, schemas
from .config import settings
from .dependencies import check_feasible, realization
from .errors import ConfigError, ToolkitError
from .routers import identities, response, z2
from .routing import TaskRegistry
from .storage import open_writer
from .utils import aggregate, config_hash, records_frame

logger = logging.getLogger(__name__)

registry = TaskRegistry()
registry.include_router(response.router)
registry.include_router(z2.router)
registry.include_router(identities.router)

SweepAxis = str
SWEEP_AXES = ("L", "N_t", "realizations", "kgrid")
DEFAULT_SWEEPS = {
    "L": [5, 7, 9],
    "N_t": [8, 16, 32],
    "realizations": [1, 2, 4, 8],
    "kgrid": [8, 12, 16],
}

Outcome = Tuple[Optional[schemas.RealizationRecord], Optional[schemas.RealizationFailure], Optional[ToolkitError]]


def check_threads() -> None:
    if settings.blas_threads != 1 and not settings.allow_nondeterministic_blas:
        raise ConfigError(
            f"blas_threads={settings.blas_threads} needs allow_nondeterministic_blas; threaded BLAS is not bitwise reproducible"
        )


def run_realization(
    config: schemas.RunConfig,
    index: int,
    path_workers: int = 1,
    profile_name: Optional[str] = None,
) -> Outcome:
    with threadpool_limits(limits=settings.blas_threads):
        try:
            with realization(config, index, path_workers, profile_name) as ctx:
                result = registry.handler(config.task)(ctx)
                seed = ctx.seed
        except ToolkitError as e:
            logger.error("realization %d failed: %s", index, e.detail)
            failure = schemas.RealizationFailure(
                realization_index=index, error=type(e).__name__, detail=e.detail, exit_code=e.exit_code
            )
            return None, failure, e
    logger.info(
        "realization %d: gap_min %.4g, %s",
        index,
        result.gap_min,
        ", ".join(f"{k}={v:.6g}" for k, v in result.observables.items()),
    )
    record = schemas.RealizationRecord(
        realization_index=index,
        seed=seed,
        gap_min=result.gap_min,
        observables=result.observables,
        report=result.report.model_dump(mode="json"),
    )
    return record, None, None


def _execute(config: schemas.RunConfig, workers: int, profile_name: Optional[str]) -> List[Outcome]:
    indices = range(config.ensemble.realizations)
    if workers > 1 and len(indices) > 1:
        return Parallel(n_jobs=workers, backend=settings.parallel_backend)(
            delayed(run_realization)(config, i, 1, profile_name) for i in indices
        )
    # a single realization spends the workers on path samples instead
    progress = tqdm(indices, desc=config.task, disable=len(indices) == 1 or not sys.stderr.isatty())
    return [run_realization(config, i, workers, profile_name) for i in progress]


def run(
    config: schemas.RunConfig,
    out: Optional[str] = None,
    workers: Optional[int] = None,
    profile_name: Optional[str] = None,
    raise_on_failure: bool = True,
) -> schemas.EnsembleResult:
    """Run the configured task on every realization and write the result files.

    Writes one JSON report per realization, ``summary.csv``, ``ensemble.json``
    and ``run_manifest.json``. Failed realizations are recorded in the manifest;
    with ``raise_on_failure`` the first failure is re-raised after writing.
    """
    check_feasible(config)
    check_threads()
    workers = settings.workers if workers is None else workers
    digest = config_hash(config)
    started = time.perf_counter()

    outcomes = _execute(config, workers, profile_name)
    records = [record for record, _, _ in outcomes if record is not None]
    failures = [failure for _, failure, _ in outcomes if failure is not None]
    mean, stderr = aggregate(records)
    result = schemas.EnsembleResult(
        task=config.task,
        records=records,
        mean=mean,
        stderr=stderr,
        config_hash=digest,
        version=__version__,
    )

    with open_writer(out or config.output_dir or settings.output_dir) as writer:
        for record in records:
            writer.write_report(record.realization_index, record)
        if records:
            writer.write_frame("summary.csv", records_frame(records, digest, __version__))
        writer.write_model("ensemble.json", result)
        manifest = schemas.RunManifest(
            config_hash=digest,
            version=__version__,
            task=config.task,
            complete=not failures,
            realizations_requested=config.ensemble.realizations,
            realizations_completed=[r.realization_index for r in records],
            failures=failures,
            wall_time=time.perf_counter() - started,
        )
        writer.write_model("run_manifest.json", manifest)
    result.wall_time = manifest.wall_time

    if failures:
        logger.warning("run incomplete: %d of %d realizations failed", len(failures), config.ensemble.realizations)
        if raise_on_failure:
            raise next(e for _, _, e in outcomes if e is not None)
    return result


def with_axis_value(config: schemas.RunConfig, axis: SweepAxis, value: Union[int, float]) -> schemas.RunConfig:
    """Copy of ``config`` with one sweep axis set; the copy is validated again."""
    payload = config.model_dump()
    if axis == "L":
        payload["geometry"]["extents"] = (int(value),) * 3
    elif axis == "N_t":
        if payload.get("path") is None:
            raise ConfigError("sweeping N_t needs a path")
        payload["path"]["samples"] = int(value)
    elif axis == "realizations":
        payload["ensemble"]["realizations"] = int(value)
    elif axis == "kgrid":
        payload["oracle"]["grid"] = (payload["oracle"]["grid"][0], int(value))
        payload["oracle"]["nk"] = int(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return schemas.RunConfig.model_validate(payload)


def convergence_sweep(
    config: schemas.RunConfig,
    axis: SweepAxis,
    values: Optional[Sequence[Union[int, float]]] = None,
    out: Optional[str] = None,
    workers: Optional[int] = None,
    profile_name: Optional[str] = None,
) -> pd.DataFrame:
    """Repeat the task along one axis and write observable-vs-axis rows to ``sweep.csv``."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = DEFAULT_SWEEPS[axis] if values is None else list(values)
    root = out or config.output_dir or settings.output_dir
    digest = config_hash(config)
    rows = []
    for value in values:
        point = with_axis_value(config, axis, value)
        logger.info("sweep %s = %s", axis, value)
        result = run(point, out=f"{root}/{axis}_{value:g}", workers=workers, profile_name=profile_name)
        for name in sorted(result.mean):
            rows.append(
                schemas.SweepRow(
                    axis=axis,
                    value=float(value),
                    observable=name,
                    mean=result.mean[name],
                    stderr=result.stderr[name],
                    config_hash=digest,
                    version=__version__,
                ).model_dump()
            )
    frame = pd.DataFrame(rows, columns=list(schemas.SweepRow.model_fields))
    with open_writer(root) as writer:
        writer.write_frame("sweep.csv", frame)
    return frame
