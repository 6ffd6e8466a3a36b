import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsevl.comparison import ComparisonRecord
from sparsevl.montecarlo import (
    ModelSettings, SweepGrid, TooFewRecords, iter_records, quantile_bins, read_records_csv,
    record_pairs, run_cell, run_sweep, summarize, write_bins_csv, write_cells_csv,
    write_records_csv,
)
from sparsevl.vl import OptimOptions

SMALL = dict(n_y=12, n_theta=16)
FAST = ModelSettings(opts=OptimOptions(max_iter=64))


def rows(records):
    # repr keeps NaN fields comparable
    return [repr(r.as_row()) for r in records]


def test_grid_cells():
    g = SweepGrid(precisions=(1, 10), sparsity_rates=(0, 0.5, 0.9), n_reps=2)
    cells = g.cells()
    assert len(cells) == 2 * 3 + 2
    assert cells[0] == ("sparse", 0, 0) and cells[-1] == ("gaussian", 1, 0)
    assert g.cell_values("gaussian", 1, 0) == (10.0, 0.0)
    assert len(SweepGrid(scenario="sparse").cells()) == 25


def test_grid_validation():
    with pytest.raises(ValueError):
        SweepGrid(precisions=(0,))
    with pytest.raises(ValueError):
        SweepGrid(sparsity_rates=(1.5,))
    with pytest.raises(ValueError):
        SweepGrid(scenario="laplace")


def test_run_cell_deterministic():
    g = SweepGrid(**SMALL, base_seed=3)
    a = run_cell(g, "sparse", 2, 3, 1, FAST)
    b = run_cell(g, "sparse", 2, 3, 1, FAST)
    assert rows([a]) == rows([b])
    assert a.seed == "3:0:2:3:1"
    assert run_cell(g, "sparse", 2, 3, 2, FAST).F_sparse != a.F_sparse


def test_run_cell_all_zero_truth():
    g = SweepGrid(precisions=(100.0,), sparsity_rates=(1.0,), n_y=32, n_theta=32)
    est = [run_cell(g, "sparse", 0, 0, rep).est_sparsity for rep in range(3)]
    assert min(est) >= 0.9


def test_rate_zero_sparse_matches_gaussian_law():
    # same generative law: per-record means agree up to sampling error
    g = SweepGrid(precisions=(10.0,), sparsity_rates=(0.0,), n_reps=6, **SMALL)
    res = run_sweep(g, FAST)
    sp = res.cell("sparse", 10.0, 0.0)
    ga = res.cell("gaussian", 10.0, 0.0)
    assert sp.n_records == ga.n_records == 6
    assert abs(sp.delta_F - ga.delta_F) < 3 * max(sp.delta_F_std, ga.delta_F_std)


def test_one_cell_sweep_wraps_run_cell():
    g = SweepGrid(precisions=(10.0,), sparsity_rates=(0.5,), n_reps=1, scenario="sparse", **SMALL)
    res = run_sweep(g, FAST)
    assert len(res.records) == 1
    assert rows(res.records) == rows([run_cell(g, "sparse", 0, 0, 0, FAST)])
    c = res.cell("sparse", 10.0, 0.5)
    assert c.delta_F == res.records[0].delta_F and c.delta_F_std == 0.0


def test_sweep_parallel_matches_serial(tmp_path):
    g = SweepGrid(precisions=(1.0, 100.0), sparsity_rates=(0.5,), n_reps=2, **SMALL)
    serial = list(iter_records(g, FAST, jobs=1))
    parallel = list(iter_records(g, FAST, jobs=2))
    assert rows(serial) == rows(parallel)
    write_records_csv(tmp_path / "a.csv", serial)
    write_records_csv(tmp_path / "b.csv", parallel)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_summarize_excludes_failures():
    g = SweepGrid(precisions=(1.0,), sparsity_rates=(0.5,), n_reps=3, scenario="sparse")
    ok = ComparisonRecord("s", "sparse", 1.0, 0.5, 2.0, 1.0, 0.5, 0.4, 1.0, 0.5, 0.5, 2, 0, 1, 1)
    res = summarize(g, [ok, ok, ComparisonRecord.failure("f", "sparse", 1.0, 0.5)])
    c = res.cell("sparse", 1.0, 0.5)
    assert c.n_records == 2 and c.n_failed == 1 and res.n_failed == 1
    assert c.delta_F == 1.0 and c.pooled_tpr == 1.0 and c.pooled_tnr == 0.5


def test_quantile_bins_singletons():
    pairs = [(float(i), float(-i)) for i in range(10)]
    bins = quantile_bins(pairs[::-1], 10)
    assert [b.count for b in bins] == [1] * 10
    assert [b.delta_r for b in bins] == list(range(10))
    assert all(b.delta_F_std == 0.0 for b in bins)


def test_quantile_bins_uneven_and_errors():
    bins = quantile_bins([(i, i) for i in range(23)], 10)
    assert [b.count for b in bins] == [3, 3, 3] + [2] * 7
    with pytest.raises(TooFewRecords):
        quantile_bins([(0, 0)] * 3, 4)


@given(st.lists(st.tuples(st.floats(0.01, 1), st.floats(-50, 50)), min_size=5, max_size=40))
def test_quantile_bins_antisymmetric(half):
    pairs = [(dr + i * 1e-3, dF) for i, (dr, dF) in enumerate(half)]
    sym = pairs + [(-dr, -dF) for dr, dF in pairs]
    # equal-size bins only when the bin count divides the record count
    bins = quantile_bins(sym, len(pairs))
    for lo, hi in zip(bins, bins[::-1]):
        assert lo.delta_r == pytest.approx(-hi.delta_r, abs=1e-12)
        assert lo.delta_F == pytest.approx(-hi.delta_F, abs=1e-9)


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-100, 100)), min_size=10, max_size=60),
       st.integers(1, 10))
def test_quantile_bins_brute_force(pairs, n_bins):
    bins = quantile_bins(pairs, n_bins)
    ordered = sorted(pairs)
    sizes = [len(ordered) // n_bins + (1 if b < len(ordered) % n_bins else 0) for b in range(n_bins)]
    start = 0
    for b, size in zip(bins, sizes):
        chunk = ordered[start:start + size]
        start += size
        mean_F = sum(c[1] for c in chunk) / size
        assert b.count == size
        assert b.delta_r == pytest.approx(sum(c[0] for c in chunk) / size, abs=1e-12)
        assert b.delta_F == pytest.approx(mean_F, abs=1e-9)
        assert b.delta_F_std == pytest.approx(
            math.sqrt(sum((c[1] - mean_F) ** 2 for c in chunk) / size), abs=1e-6)


def test_record_pairs_skips_unusable():
    ok = ComparisonRecord("s", "sparse", 1.0, 0.5, 2.0, 1.0, 0.5, 0.4, 1.0, 0.5, 0.5)
    nan_r = ComparisonRecord("s", "sparse", 1.0, 0.5, 2.0, 1.0, math.nan, 0.4, 1.0, 0.5, 0.5)
    fail = ComparisonRecord.failure("f", "sparse", 1.0, 0.5)
    assert record_pairs([ok, nan_r, fail]) == [(pytest.approx(0.1), 1.0)]


def test_csv_round_trip(tmp_path):
    g = SweepGrid(precisions=(10.0,), sparsity_rates=(0.5,), n_reps=2, **SMALL)
    res = run_sweep(g, FAST)
    write_records_csv(tmp_path / "raw.csv", res.records)
    back = read_records_csv(tmp_path / "raw.csv")
    assert rows(back) == rows(res.records)
    write_cells_csv(tmp_path / "cells.csv", res)
    write_bins_csv(tmp_path / "bins.csv", quantile_bins(record_pairs(res.records), 2))
    header = (tmp_path / "bins.csv").read_text().splitlines()[0]
    assert header == "bin,count,delta_r,delta_F,delta_F_std"
    assert len((tmp_path / "cells.csv").read_text().splitlines()) == 3
