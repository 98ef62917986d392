"""Range sweeps over seeds and pipelines, aggregated per (range, pipeline)."""

from __future__ import annotations

import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..activation import ActivationPolicy
from ..errors import CotIdnError
from ..rng import derive_seed
from .config import ExperimentConfig
from .runner import RunRecord, load_modules, run_single
from .training import ensure_policy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepRow:
    range_m: float
    pipeline: str
    mean_coverage: float
    mean_sum_rate_bps: float
    mean_q_total: float
    std_coverage: float
    std_sum_rate_bps: float
    std_q_total: float
    n: int
    failures: int = 0


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    records: tuple[RunRecord, ...] = ()
    config_hash: str = ""
    failures: tuple[str, ...] = field(default=())

    @property
    def fallback_count(self) -> int:
        return sum(r.fallback for r in self.records)


def _std(values: list[float]) -> float:
    return statistics.stdev(values) if len(values) > 1 else 0.0


def _aggregate(range_m: float, pipeline: str, records: list[RunRecord], failures: int) -> SweepRow:
    cov = [r.metrics["coverage_ratio"] for r in records]
    rate = [r.metrics["sum_rate_bps"] for r in records]
    q = [r.utility.q_total for r in records]
    if not records:
        nan = float("nan")
        return SweepRow(range_m, pipeline, nan, nan, nan, nan, nan, nan, 0, failures)
    return SweepRow(
        range_m,
        pipeline,
        statistics.fmean(cov),
        statistics.fmean(rate),
        statistics.fmean(q),
        _std(cov),
        _std(rate),
        _std(q),
        len(records),
        failures,
    )


def run_sweep(config: ExperimentConfig, policy: ActivationPolicy | None = None) -> SweepResult:
    """Every (range, pipeline, seed) cell, aggregated per (range, pipeline).

    Cell ``i`` gets its own policy stream seeded by ``derive_seed(config_seed, i)``,
    so results do not depend on execution order.  A cell that fails hard is
    logged, counted in its row, and skipped.
    """
    ranges = sorted(config.range_sweep)
    pipelines = sorted(config.pipelines)
    cells = [(r, p, s) for r in ranges for p in pipelines for s in config.seeds]
    needs_policy = "cot" in pipelines
    base = (policy or ensure_policy(config)) if needs_policy else None
    modules = load_modules(config)

    def run_cell(i: int):
        r, p, s = cells[i]
        cell_policy = None
        if base is not None:
            cell_policy = ActivationPolicy(base.q, base.epsilon, derive_seed(config.config_seed, i))
        try:
            return run_single(config, s, r, p, policy=cell_policy, modules=modules)
        except CotIdnError as exc:
            log.error("cell range=%g pipeline=%s seed=%d failed: %s", r, p, s, exc)
            return exc

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_cell, range(len(cells))))
    else:
        results = [run_cell(i) for i in range(len(cells))]

    rows, records, failures = [], [], []
    for r in ranges:
        for p in pipelines:
            ok, bad = [], 0
            for i, (cr, cp, cs) in enumerate(cells):
                if (cr, cp) != (r, p):
                    continue
                out = results[i]
                if isinstance(out, RunRecord):
                    ok.append(out)
                else:
                    bad += 1
                    failures.append(f"range={r:g} pipeline={p} seed={cs}: {out}")
            rows.append(_aggregate(r, p, ok, bad))
            records.extend(ok)
    return SweepResult(tuple(rows), tuple(records), config.config_hash(), tuple(failures))
