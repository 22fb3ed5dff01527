from pathlib import Path

import pytest

from veridl.codec import CodecParams, SignFlag
from veridl.datasets import dump_csv, format_fixed, load_csv, parse_csv, synthetic_dataset, write_csv
from veridl.errors import DatasetParseError

SAMPLE = Path(__file__).resolve().parents[2] / "config" / "samples" / "synthetic.csv"


def test_minimal_file(params):
    ds = parse_csv("x0,y\n0,0\n", params)
    assert ds.size == 1
    assert ds.input_dim == 1
    assert ds.sample(0) == ((0,), 0)


def test_values_are_quantized():
    ds = parse_csv("x0,x1,y\n1.5,-0.25,1\n", CodecParams(fractional_bits=4))
    assert ds.features[0] == (24, -4)
    assert ds.labels[0] == 16
    assert ds.max_quantization_error == 0.0
    assert ds.sign_flags(0) == (SignFlag.POSITIVE, SignFlag.NEGATIVE, SignFlag.POSITIVE)


def test_quantization_error_is_reported():
    ds = parse_csv("x0,y\n0.1,0\n", CodecParams(fractional_bits=4))
    assert ds.features[0] == (2,)
    assert ds.max_quantization_error == pytest.approx(0.025)


def test_blank_lines_are_skipped(params):
    ds = parse_csv("x0,y\n\n1,0\n\n0.5,1\n", params)
    assert ds.size == 2


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("a,b\n1,2\n", 1),
        ("x0,x2,y\n1,2,3\n", 1),
        ("x0,y\n", 2),
        ("x0,y\n1,2\n3\n", 3),
        ("x0,y\n1,abc\n", 2),
        ("x0,y\n1,2\nNaN,0\n", 3),
    ],
)
def test_parse_errors_carry_line_numbers(params, text, line):
    with pytest.raises(DatasetParseError) as exc:
        parse_csv(text, params)
    assert exc.value.line == line


def test_format_fixed_is_exact(params):
    assert format_fixed(3 << 19, params) == "1.5"
    assert format_fixed(-1, CodecParams(fractional_bits=4)) == "-0.0625"
    assert format_fixed(0, params) == "0"


def test_dump_then_parse_is_stable(params):
    ds = synthetic_dataset(100, 3, seed=11, params=params)
    text = dump_csv(ds)
    again = parse_csv(text, params)
    assert again.features == ds.features
    assert again.labels == ds.labels
    assert dump_csv(again) == text


def test_write_and_load(tmp_path, params):
    ds = synthetic_dataset(10, 2, seed=4, params=params)
    path = write_csv(ds, tmp_path / "nested" / "data.csv")
    assert load_csv(path, params).features == ds.features


def test_bundled_sample_loads(params):
    ds = load_csv(SAMPLE, params)
    assert ds.input_dim == 2
    assert ds.size == 24
    assert ds.max_quantization_error == 0.0


def test_synthetic_is_seeded(params):
    a = synthetic_dataset(20, 3, seed=5, params=params)
    b = synthetic_dataset(20, 3, seed=5, params=params)
    c = synthetic_dataset(20, 3, seed=6, params=params)
    assert a == b
    assert a != c
    assert set(a.labels) <= {0, params.one}


def test_distinct_values_limits_the_alphabet(params):
    ds = synthetic_dataset(50, 4, seed=1, params=params, distinct_values=3)
    assert ds.distinct_feature_values() <= 3


def test_batch_scaled_and_permuted(params):
    ds = synthetic_dataset(10, 2, seed=2, params=params)
    assert ds.batch(4).size == 4
    assert ds.batch(50) is ds
    doubled = ds.scaled(2)
    assert doubled.features[0] == tuple(2 * v for v in ds.features[0])
    assert doubled.labels[0] == 2 * ds.labels[0]
    assert ds.scaled(3, labels=False).labels == ds.labels
    order = list(reversed(range(10)))
    assert ds.permuted(order).sample(0) == ds.sample(9)
