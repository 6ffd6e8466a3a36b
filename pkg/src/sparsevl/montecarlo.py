"""Monte-Carlo sweeps over noise precision and simulated sparsity.

Every replication derives its own seed from ``(base_seed, cell, rep)``, so a
sweep gives identical records whatever the execution order or number of
worker processes.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .comparison import DEFAULT_THRESHOLD, RECORD_FIELDS, ComparisonRecord, evaluate
from .glm import Scenario, make_design, simulate
from .transforms import SparsifyConfig
from .vl import OptimOptions, PriorSpec

__all__ = [
    "SweepGrid",
    "ModelSettings",
    "CellSummary",
    "BinSummary",
    "SweepResult",
    "TooFewRecords",
    "run_cell",
    "iter_records",
    "run_sweep",
    "summarize",
    "quantile_bins",
    "record_pairs",
    "write_records_csv",
    "read_records_csv",
    "write_cells_csv",
    "write_bins_csv",
]

log = logging.getLogger(__name__)

DEFAULT_PRECISIONS = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_RATES = (0.0, 0.25, 0.5, 0.75, 0.9375)
_SCENARIO_CODE = {"sparse": 0, "gaussian": 1}


class TooFewRecords(ValueError):
    pass


@dataclass(frozen=True)
class SweepGrid:
    """Cells are ``(precision, rate)`` pairs for the sparse scenario and one
    cell per precision (rate 0) for the Gaussian scenario."""

    precisions: tuple = DEFAULT_PRECISIONS
    sparsity_rates: tuple = DEFAULT_RATES
    n_reps: int = 32
    n_y: int = 64
    n_theta: int = 128
    base_seed: int = 0
    scenario: str = "both"

    def __post_init__(self):
        object.__setattr__(self, "precisions", tuple(float(p) for p in self.precisions))
        object.__setattr__(self, "sparsity_rates", tuple(float(r) for r in self.sparsity_rates))
        if not self.precisions or not self.sparsity_rates:
            raise ValueError("precisions and sparsity_rates must be nonempty")
        if any(p <= 0 for p in self.precisions):
            raise ValueError("precisions must be positive")
        if any(not 0.0 <= r <= 1.0 for r in self.sparsity_rates):
            raise ValueError("sparsity rates must lie in [0, 1]")
        if self.n_reps < 1 or self.n_y < 1 or self.n_theta < 1:
            raise ValueError("n_reps, n_y and n_theta must be >= 1")
        if self.scenario not in ("sparse", "gaussian", "both"):
            raise ValueError(f"unknown scenario {self.scenario!r}")

    def cells(self):
        """``(scenario, precision_index, rate_index)`` in canonical order."""
        out = []
        if self.scenario in ("sparse", "both"):
            out += [("sparse", i, j) for i in range(len(self.precisions))
                    for j in range(len(self.sparsity_rates))]
        if self.scenario in ("gaussian", "both"):
            out += [("gaussian", i, 0) for i in range(len(self.precisions))]
        return out

    def cell_values(self, kind, i, j):
        rate = self.sparsity_rates[j] if kind == "sparse" else 0.0
        return self.precisions[i], rate


@dataclass(frozen=True)
class ModelSettings:
    """Everything about the inversion that is shared by all replications."""

    sparsify: SparsifyConfig = field(default_factory=SparsifyConfig)
    prior: PriorSpec = field(default_factory=PriorSpec)
    opts: OptimOptions = field(default_factory=OptimOptions)
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")


def _child_seeds(grid, kind, i, j, rep):
    ss = np.random.SeedSequence(grid.base_seed, spawn_key=(_SCENARIO_CODE[kind], i, j, rep))
    design_seed, data_seed = (int(s) for s in ss.generate_state(2))
    return design_seed, data_seed


def run_cell(grid: SweepGrid, kind: str, i: int, j: int, rep: int,
             settings: ModelSettings | None = None) -> ComparisonRecord:
    """One replication of cell ``(kind, i, j)``: fresh design, data, two inversions."""
    settings = settings or ModelSettings()
    precision, rate = grid.cell_values(kind, i, j)
    seed_tag = f"{grid.base_seed}:{_SCENARIO_CODE[kind]}:{i}:{j}:{rep}"
    design_seed, data_seed = _child_seeds(grid, kind, i, j, rep)
    scenario = Scenario.sparse(rate) if kind == "sparse" else Scenario.gaussian()
    try:
        model = make_design(grid.n_y, grid.n_theta, design_seed)
        data = simulate(model, scenario, 1.0 / precision, data_seed)
        rec, _, _ = evaluate(data, settings.sparsify, settings.prior, settings.opts,
                             settings.threshold, precision=precision)
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as err:
        log.warning("replication %s failed: %s", seed_tag, err)
        return ComparisonRecord.failure(seed_tag, kind, precision, rate)
    rec.seed = seed_tag
    return rec


def _run_item(args):
    return run_cell(*args)


def iter_records(grid: SweepGrid, settings: ModelSettings | None = None,
                 jobs: int = 1) -> Iterator[ComparisonRecord]:
    """Yield replication records in canonical (cell, rep) order."""
    settings = settings or ModelSettings()
    items = [(grid, kind, i, j, rep, settings)
             for kind, i, j in grid.cells() for rep in range(grid.n_reps)]
    if jobs <= 1:
        for item in items:
            yield _run_item(item)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_run_item, items, chunksize=max(1, len(items) // (8 * jobs)))


@dataclass
class CellSummary:
    scenario: str
    precision: float
    sparsity_rate: float
    n_records: int
    n_failed: int
    delta_F: float
    delta_F_std: float
    delta_r: float
    tpr: float
    tnr: float
    est_sparsity: float
    pooled_tpr: float
    pooled_tnr: float


def _nanmean(values):
    v = np.asarray([x for x in values if x is not None], dtype=float)
    v = v[np.isfinite(v)]
    return float(v.mean()) if v.size else math.nan


def _summarize_cell(kind, precision, rate, recs):
    ok = [r for r in recs if not r.failed]
    dF = np.array([r.delta_F for r in ok])
    tp = sum(r.tp for r in ok)
    fn = sum(r.fn for r in ok)
    tn = sum(r.tn for r in ok)
    fp = sum(r.fp for r in ok)
    return CellSummary(
        scenario=kind, precision=precision, sparsity_rate=rate,
        n_records=len(ok), n_failed=len(recs) - len(ok),
        delta_F=_nanmean(dF), delta_F_std=float(dF.std()) if dF.size else math.nan,
        delta_r=_nanmean(r.delta_r for r in ok),
        tpr=_nanmean(r.tpr for r in ok), tnr=_nanmean(r.tnr for r in ok),
        est_sparsity=_nanmean(r.est_sparsity for r in ok),
        pooled_tpr=tp / (tp + fn) if tp + fn else math.nan,
        pooled_tnr=tn / (tn + fp) if tn + fp else math.nan,
    )


@dataclass
class SweepResult:
    grid: SweepGrid
    records: list
    cells: dict

    def cell(self, kind, precision, rate=0.0) -> CellSummary:
        return self.cells[(kind, float(precision), float(rate))]

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.records)


def summarize(grid: SweepGrid, records: Iterable[ComparisonRecord]) -> SweepResult:
    """Per-cell averages of a sweep's records (failed replications excluded)."""
    records = list(records)
    by_cell = {}
    for rec in records:
        key = (rec.scenario, float(rec.precision), float(rec.sparsity_rate))
        by_cell.setdefault(key, []).append(rec)
    cells = {}
    for kind, i, j in grid.cells():
        precision, rate = grid.cell_values(kind, i, j)
        key = (kind, precision, rate)
        cells[key] = _summarize_cell(kind, precision, rate, by_cell.get(key, []))
    return SweepResult(grid, records, cells)


def run_sweep(grid: SweepGrid, settings: ModelSettings | None = None, jobs: int = 1) -> SweepResult:
    return summarize(grid, iter_records(grid, settings, jobs))


@dataclass
class BinSummary:
    count: int
    delta_r: float
    delta_F: float
    delta_F_std: float


def quantile_bins(records, n_bins: int = 10):
    """Sort ``(delta_r, delta_F)`` pairs by ``delta_r`` and split into equal-count bins.

    When the count does not divide evenly the leading bins take one extra
    record each.  Standard deviations are population (ddof=0).
    """
    pairs = sorted((float(dr), float(dF)) for dr, dF in records)
    n = len(pairs)
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if n < n_bins:
        raise TooFewRecords(f"{n} records for {n_bins} bins")
    base, extra = divmod(n, n_bins)
    out = []
    start = 0
    for b in range(n_bins):
        size = base + (1 if b < extra else 0)
        chunk = np.array(pairs[start:start + size])
        start += size
        out.append(BinSummary(size, float(chunk[:, 0].mean()), float(chunk[:, 1].mean()),
                              float(chunk[:, 1].std())))
    return out


def record_pairs(records):
    """``(delta_r, delta_F)`` of the usable records (not failed, finite)."""
    out = []
    for r in records:
        if r.failed:
            continue
        dr, dF = r.delta_r, r.delta_F
        if math.isfinite(dr) and math.isfinite(dF):
            out.append((dr, dF))
    return out


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def _write_rows(path, fields, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(row[f]) for f in fields])


def write_records_csv(path, records):
    _write_rows(path, RECORD_FIELDS, (r.as_row() for r in records))


def read_records_csv(path):
    with open(path, newline="") as fh:
        return [ComparisonRecord.from_row(row) for row in csv.DictReader(fh)]


CELL_FIELDS = tuple(CellSummary.__dataclass_fields__)
BIN_FIELDS = tuple(BinSummary.__dataclass_fields__)


def write_cells_csv(path, result: SweepResult):
    _write_rows(path, CELL_FIELDS, (vars(c) for c in result.cells.values()))


def write_bins_csv(path, bins):
    rows = [dict(bin=i, **vars(b)) for i, b in enumerate(bins)]
    _write_rows(path, ("bin",) + BIN_FIELDS, rows)
