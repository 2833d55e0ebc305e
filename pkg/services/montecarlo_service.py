"""
Monte Carlo protocol: corrupt the phantom, filter each replicate and measure.

Replicate r of every looks level is corrupted with seed base_seed + r, so the
records do not depend on how replicates are scheduled across workers.
"""

import asyncio
import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor

from errors import SpeckleError
from schemas import FilterConfig, MetricsRecord, RunConfig
from services.phantom_service import corrupt, generate_phantom, phantom_geometry
from services.quality_metrics import measure
from services.speckle_filters import filter_image

logger = logging.getLogger(__name__)


def filter_config(identifier: str, config: RunConfig, looks: float) -> FilterConfig:
    """
    FilterConfig for one filter identifier at one looks level.

    "kl@0.01" selects the KL filter at η = 0.01; a bare identifier uses the
    run-wide significance. The acquisition looks feed Lee and fixed-looks mode.
    """
    method, _, level = identifier.partition("@")
    return FilterConfig(
        method=method,
        significance=float(level) if level else config.significance,
        looks_mode=config.looks_mode,
        nominal_looks=looks,
        dedupe=config.dedupe,
        lee_window=config.lee_window,
    )


def failed_record(replicate: int, looks: float, filter_name: str, reason: str) -> MetricsRecord:
    return MetricsRecord(
        replicate=replicate,
        looks=looks,
        filter_name=filter_name,
        nel=math.nan,
        line_pres=math.nan,
        edge_grad=math.nan,
        edge_var=math.nan,
        q_index=math.nan,
        beta_rho=math.nan,
        flags=[f"failed: {reason}"],
    )


def run_replicate(config: RunConfig, looks: float, replicate: int) -> list[MetricsRecord]:
    """
    Corrupt, filter and measure one replicate at one looks level.

    A failure is recorded against the affected filters and never raised.
    """
    truth, labels = generate_phantom(config.phantom)
    geometry = phantom_geometry(config.phantom)
    seed = config.base_seed + replicate

    try:
        noisy = corrupt(truth, looks, seed)
    except SpeckleError as e:
        logger.error("replicate %d at L=%g: corruption failed: %s", replicate, looks, e)
        return [failed_record(replicate, looks, name, str(e)) for name in config.filters]

    records = []
    for name in config.filters:
        try:
            filtered = filter_image(noisy, filter_config(name, config, looks))
            records.append(measure(filtered, truth, labels, geometry, replicate, looks, name))
        except (SpeckleError, ValueError, FloatingPointError) as e:
            logger.error("replicate %d at L=%g, filter %s failed: %s", replicate, looks, name, e)
            records.append(failed_record(replicate, looks, name, str(e)))
    return records


def _executor(workers: int) -> Executor:
    if workers > 1:
        return ProcessPoolExecutor(max_workers=workers)
    return ThreadPoolExecutor(max_workers=1)


def sort_records(records: list[MetricsRecord], filters: list[str]) -> list[MetricsRecord]:
    """Order records by (looks, filter position in the run config, replicate)."""
    position = {name: index for index, name in enumerate(filters)}
    return sorted(records, key=lambda r: (r.looks, position.get(r.filter_name, len(position)), r.filter_name, r.replicate))


async def run_protocol_async(config: RunConfig) -> list[MetricsRecord]:
    """
    Run every (looks, replicate) task concurrently.

    Returns:
        replicates x |looks_list| x |filters| records in deterministic order
    """
    loop = asyncio.get_running_loop()
    tasks = [(looks, replicate) for looks in config.looks_list for replicate in range(config.replicates)]
    logger.info(
        "running %d replicates x %d looks levels x %d filters on %d workers",
        config.replicates, len(config.looks_list), len(config.filters), config.workers,
    )

    with _executor(config.workers) as executor:
        futures = [loop.run_in_executor(executor, run_replicate, config, looks, r) for looks, r in tasks]
        results = await asyncio.gather(*futures)

    records = sort_records([record for batch in results for record in batch], config.filters)
    failures = sum(record.failed for record in records)
    if failures:
        logger.error("%d of %d records failed", failures, len(records))
    else:
        logger.info("collected %d records", len(records))
    return records


def run_protocol(config: RunConfig) -> list[MetricsRecord]:
    """Synchronous entry point for run_protocol_async."""
    return asyncio.run(run_protocol_async(config))
