import io

import pytest

from veridl.bench import COLUMNS, bench, fit_r2, size_driver, write_bench_csv
from veridl.datasets import synthetic_dataset
from veridl.dnn.network import NetworkConfig


def test_size_driver():
    assert size_driver(10, 2, 3) == 10 * 5 + 6
    assert size_driver(1, 1, 1) == 3


def test_fit_r2():
    xs = [1, 2, 3, 4, 5]
    assert fit_r2(xs, [3 * x + 7 for x in xs]) == pytest.approx(1.0)
    assert fit_r2(xs, [4, 4, 4, 4, 4]) == 1.0
    assert fit_r2([1, 2, 3, 4], [1, 3, 2, 4]) < 0.9
    with pytest.raises(ValueError):
        fit_r2([1], [1])


def test_bench_rows(params, keys):
    secret, public = keys
    ds = synthetic_dataset(20, 3, seed=5, params=params, distinct_values=3)
    base = NetworkConfig(input_dim=3, hidden_sizes=(2,), learning_rate=0.5)
    rows = bench([2, 3, 4], ds, secret, public, base, params, seed=5)

    assert [r.width for r in rows] == [2, 3, 4]
    assert all(r.verdict == "accept" for r in rows)
    assert all(r.proof_bytes_unique < r.proof_bytes_basic for r in rows)
    assert [r.size_driver for r in rows] == [size_driver(20, 3, w) for w in (2, 3, 4)]
    sizes = [r.proof_bytes_basic for r in rows]
    assert sizes == sorted(sizes)
    assert fit_r2([r.size_driver for r in rows], sizes) > 0.99
    assert all(r.peak_rss_mb > 0 for r in rows)

    text = write_bench_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == 4


def test_bench_needs_widths(params, keys):
    with pytest.raises(ValueError):
        bench([], synthetic_dataset(4, 2, params=params), *keys, NetworkConfig(2, (2,)), params)


def test_csv_to_stream(params, keys):
    rows = bench([2], synthetic_dataset(8, 2, seed=1, params=params), *keys, NetworkConfig(2, (2,), learning_rate=0.5), params)
    buf = io.StringIO()
    assert write_bench_csv(rows, buf) == ""
    assert buf.getvalue().startswith("width,")


@pytest.mark.slow
def test_proof_size_is_affine_across_wide_layers(params, keys):
    secret, public = keys
    ds = synthetic_dataset(30, 4, seed=2, params=params, distinct_values=5)
    base = NetworkConfig(input_dim=4, hidden_sizes=(4,), learning_rate=0.5, convergence_threshold=1e-3)
    rows = bench([4, 8, 16, 32], ds, secret, public, base, params, seed=2)
    assert all(r.verdict == "accept" for r in rows)
    assert fit_r2([r.size_driver for r in rows], [r.proof_bytes_basic for r in rows]) >= 0.99
    assert all(r.proof_bytes_unique < r.proof_bytes_basic for r in rows)
