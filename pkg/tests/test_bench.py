"""Benchmark harness: statistics, CSV contract, latency cells."""

from __future__ import annotations

import random

import numpy as np
import pytest

from hubd.bench import (
    CSV_HEADER,
    OUTLIER_HEADER,
    WARMUP,
    BenchRecord,
    WorkloadSpec,
    compute_stats,
    emit_csv,
    quantile,
    run_attr_latency,
    run_client_latency,
    run_ep_latency,
    run_throughput,
)
from hubd.clock import VirtualClock
from hubd.errors import ConfigError, UnreachableError
from hubd.sim import DEFAULT_DAC_LATENCY, DEFAULT_REGISTER_LATENCY, SimBackend

# --- statistics against the numpy reference ---------------------------------

DATASETS = [
    [1.0, 2.0],
    [5.0, 5.0, 5.0, 5.0],
    [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0],
    [random.Random(13).gauss(1000, 50) for _ in range(1001)],
    [float(x) for x in random.Random(14).sample(range(10_000), 500)],
]


@pytest.mark.parametrize("data", DATASETS, ids=range(len(DATASETS)))
def test_stats_match_numpy(data):
    record = compute_stats(7, data)
    arr = np.asarray(data, dtype=float)
    assert record.size == 7
    assert record.n == len(data)
    assert record.mean_ns == pytest.approx(float(np.mean(arr)), rel=1e-12)
    if len(data) > 1 and float(np.std(arr, ddof=1)) > 0:
        assert record.std_ns == pytest.approx(float(np.std(arr, ddof=1)),
                                              rel=1e-12)
    else:
        assert record.std_ns == 0.0
    assert record.min_ns == float(np.min(arr))
    assert record.max_ns == float(np.max(arr))
    for got, q in [(record.q25_ns, 0.25), (record.median_ns, 0.5),
                   (record.q75_ns, 0.75), (record.q99_ns, 0.99)]:
        assert got == pytest.approx(float(np.quantile(arr, q)), rel=1e-12)


@pytest.mark.parametrize("q", [0.0, 0.25, 0.5, 0.75, 0.99, 1.0])
def test_quantile_matches_numpy_on_grid(q):
    data = sorted(random.Random(15).gauss(0, 1) for _ in range(257))
    assert quantile(data, q) == pytest.approx(
        float(np.quantile(np.asarray(data), q)), rel=1e-12, abs=1e-12)


def test_quantile_edge_cases():
    assert quantile([42.0], 0.99) == 42.0
    assert quantile([1.0, 3.0], 0.5) == 2.0
    assert quantile([1.0, 3.0], 0.25) == 1.5
    with pytest.raises(ValueError):
        quantile([], 0.5)


def test_outliers_are_strictly_above_q99():
    data = [1.0] * 99 + [1000.0]
    record = compute_stats(1, data)
    assert record.outliers == (1000.0,)
    flat = compute_stats(1, [5.0] * 100)
    assert flat.outliers == ()


def test_stats_need_two_samples():
    with pytest.raises(ValueError):
        compute_stats(1, [1.0])


def test_stats_are_order_independent():
    data = [float(x) for x in random.Random(16).sample(range(1000), 200)]
    shuffled = list(data)
    random.Random(17).shuffle(shuffled)
    assert compute_stats(3, data) == compute_stats(3, shuffled)


# --- workload validation -----------------------------------------------------

def test_workload_spec_accepts_good_input():
    spec = WorkloadSpec(kind="ep-latency", sizes=(1, 16, 256),
                        repetitions=100, direction="wr")
    assert spec.sizes == (1, 16, 256)


@pytest.mark.parametrize("kwargs", [
    dict(kind="nope", sizes=(1,), repetitions=10),
    dict(kind="ep-latency", sizes=(1,), repetitions=1),
    dict(kind="ep-latency", sizes=(), repetitions=10),
    dict(kind="ep-latency", sizes=(0, 4), repetitions=10),
    dict(kind="ep-latency", sizes=(4, 4), repetitions=10),
    dict(kind="ep-latency", sizes=(8, 4), repetitions=10),
    dict(kind="ep-latency", sizes=(1,), repetitions=10, direction="x"),
    dict(kind="ep-latency", sizes=(1,), repetitions=10, variant="utf8"),
    dict(kind="throughput", sizes=(64,), repetitions=10, blocks=0),
    dict(kind="throughput", sizes=(64,), repetitions=10, direction="wr"),
])
def test_workload_spec_rejects_bad_input(kwargs):
    with pytest.raises(ConfigError):
        WorkloadSpec(**kwargs)


# --- CSV contract ------------------------------------------------------------

GOLDEN_RECORDS = [
    BenchRecord(size=1, n=3, mean_ns=1.5, std_ns=0.5, min_ns=1.0,
                q25_ns=1.25, median_ns=1.5, q75_ns=1.75, q99_ns=1.99,
                max_ns=2.0, outliers=(2.0,)),
    BenchRecord(size=16, n=2, mean_ns=326.0, std_ns=0.0, min_ns=326.0,
                q25_ns=326.0, median_ns=326.0, q75_ns=326.0, q99_ns=326.0,
                max_ns=326.0),
]

GOLDEN_CSV = (
    "size,n,mean_ns,std_ns,min_ns,q25_ns,median_ns,q75_ns,q99_ns,max_ns\n"
    "1,3,1.5,0.5,1.0,1.25,1.5,1.75,1.99,2.0\n"
    "16,2,326.0,0.0,326.0,326.0,326.0,326.0,326.0,326.0\n"
)

GOLDEN_OUTLIERS = (
    "size,outlier_ns\n"
    "1,2.0\n"
)


def test_emit_csv_golden_bytes(tmp_path):
    out = tmp_path / "cells.csv"
    emit_csv(GOLDEN_RECORDS, out)
    assert out.read_text() == GOLDEN_CSV
    assert (tmp_path / "cells.csv.outliers.csv").read_text() == GOLDEN_OUTLIERS


def test_emit_csv_is_deterministic(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    emit_csv(GOLDEN_RECORDS, a)
    emit_csv(GOLDEN_RECORDS, b)
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.outliers.csv").read_bytes() == \
        (tmp_path / "b.csv.outliers.csv").read_bytes()


def test_outlier_file_written_even_when_empty(tmp_path):
    out = tmp_path / "cells.csv"
    emit_csv([GOLDEN_RECORDS[1]], out)
    assert (tmp_path / "cells.csv.outliers.csv").read_text() == \
        OUTLIER_HEADER + "\n"


def test_csv_header_is_frozen():
    assert CSV_HEADER == ("size,n,mean_ns,std_ns,min_ns,q25_ns,"
                          "median_ns,q75_ns,q99_ns,max_ns")
    assert OUTLIER_HEADER == "size,outlier_ns"


def test_full_float_precision_survives_roundtrip(tmp_path):
    record = compute_stats(1, [1.1, 2.2, 3.3000000000000007])
    out = tmp_path / "precise.csv"
    emit_csv([record], out)
    row = out.read_text().splitlines()[1].split(",")
    assert float(row[2]) == record.mean_ns
    assert float(row[3]) == record.std_ns


# --- endpoint latency cells (virtual clock: closed-form oracle) --------------

REG = DEFAULT_REGISTER_LATENCY
DAC = DEFAULT_DAC_LATENCY


def expected_register_ns(direction: str, words: int) -> float:
    read = REG.base_read_ns + (words - 1) * REG.per_word_ns
    write = REG.base_write_ns + (words - 1) * REG.per_word_ns
    return {"r": read, "w": write, "wr": write + read}[direction]


@pytest.mark.parametrize("direction", ["r", "w", "wr"])
def test_ep_latency_virtual_clock_matches_closed_form(direction):
    sizes = (1, 16, 256)
    spec = WorkloadSpec(kind="ep-latency", sizes=sizes, repetitions=20,
                        direction=direction, virtual_clock=True)
    records = run_ep_latency(spec)
    assert [r.size for r in records] == list(sizes)
    for record in records:
        want = expected_register_ns(direction, record.size)
        assert record.mean_ns == want
        assert record.std_ns == 0.0
        assert record.min_ns == record.max_ns == want
        assert record.n == 20


def test_ep_latency_scaling_is_exactly_affine():
    sizes = (64, 128, 256, 512)
    spec = WorkloadSpec(kind="ep-latency", sizes=sizes, repetitions=5,
                        direction="r", virtual_clock=True)
    records = run_ep_latency(spec)
    xs = np.array([r.size for r in records], dtype=float)
    ys = np.array([r.mean_ns for r in records], dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    assert slope == pytest.approx(REG.per_word_ns, rel=1e-12)
    assert intercept == pytest.approx(REG.base_read_ns - REG.per_word_ns,
                                      rel=1e-12)
    fitted = slope * xs + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    assert 1.0 - ss_res / ss_tot > 0.999999


def test_ep_latency_rejects_oversized_span():
    spec = WorkloadSpec(kind="ep-latency", sizes=(2048,), repetitions=5,
                        virtual_clock=True)
    with pytest.raises(ConfigError):
        run_ep_latency(spec)


@pytest.mark.parametrize("direction,want", [
    ("r", DAC.base_read_ns),
    ("w", DAC.base_write_ns),
    ("wr", DAC.base_write_ns + DAC.base_read_ns),
])
def test_attr_latency_virtual_clock_matches_closed_form(direction, want):
    spec = WorkloadSpec(kind="attr-latency", sizes=(1,), repetitions=10,
                        direction=direction, virtual_clock=True)
    records = run_attr_latency(spec)
    assert len(records) == 1
    assert records[0].size == 1
    assert records[0].mean_ns == want
    assert records[0].std_ns == 0.0


def test_warmup_iterations_hit_the_backend_but_not_the_stats():
    backend = SimBackend(clock=VirtualClock())
    try:
        backend.scrub_stochastic()
        spec = WorkloadSpec(kind="ep-latency", sizes=(1,), repetitions=7,
                            virtual_clock=True)
        records = run_ep_latency(spec, backend=backend)
        assert records[0].n == 7
        # every op costs exactly one scrubbed read; warmups advance the
        # clock too, so total time exposes them
        assert backend.clock.now_ns() == (WARMUP + 7) * REG.base_read_ns
    finally:
        backend.close()


# --- client-path cells over a live daemon ------------------------------------

def test_client_latency_records_shape(hub_runner):
    with hub_runner() as (_, target):
        spec = WorkloadSpec(kind="client-latency", sizes=(1, 4),
                            repetitions=5, direction="wr")
        records = run_client_latency(spec, target)
        assert [r.size for r in records] == [1, 4]
        for record in records:
            assert record.n == 5
            assert record.mean_ns > 0
            assert record.min_ns <= record.median_ns <= record.max_ns


def test_attr_latency_over_rpc(hub_runner):
    with hub_runner() as (_, target):
        spec = WorkloadSpec(kind="attr-latency", sizes=(1,), repetitions=4,
                            direction="w")
        records = run_attr_latency(spec, target=target)
        assert len(records) == 1
        # the DAC write model costs 161 us; RPC can only add overhead
        assert records[0].min_ns > DAC.base_write_ns


def test_throughput_read_and_write_verify_crc(hub_runner):
    with hub_runner() as (_, target):
        for direction in ("r", "w"):
            spec = WorkloadSpec(kind="throughput", sizes=(1024,),
                                repetitions=2, direction=direction, blocks=8)
            records, rates = run_throughput(spec, target)
            assert len(records) == 1
            assert records[0].size == 1024
            assert len(rates) == 1
            size, mbit = rates[0]
            assert size == 1024
            assert mbit > 0


def test_throughput_word32_size_checked(hub_runner):
    with hub_runner() as (_, target):
        spec = WorkloadSpec(kind="throughput", sizes=(1022,), repetitions=2,
                            variant="word32", blocks=2)
        with pytest.raises(ConfigError):
            run_throughput(spec, target)


def test_unreachable_target_raises():
    from hubd.bench import _RawClient
    with pytest.raises(UnreachableError):
        _RawClient("127.0.0.1:1", connect_timeout_s=0.5)
