"""Quantized training sets: CSV ingestion, exact CSV export and synthetic generation."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .codec import CodecParams, ScaledInt, SignFlag, decode_exact, encode
from .errors import CodecOverflowError, DatasetParseError

_log = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class QuantizedDataset:
    """Samples as scale-1 integers f(x), f(y).

    ``max_quantization_error`` is the largest |decode(f(v)) - v| seen while
    quantizing; it is 0 for data that already fits L fractional bits.
    """

    features: Tuple[Tuple[int, ...], ...]
    labels: Tuple[int, ...]
    params: CodecParams
    max_quantization_error: float = 0.0

    def __post_init__(self) -> None:
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        widths = {len(row) for row in self.features}
        if len(widths) > 1:
            raise ValueError("ragged feature rows")

    @property
    def size(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return self.size

    @property
    def input_dim(self) -> int:
        return len(self.features[0]) if self.features else 0

    def sample(self, i: int) -> Tuple[Tuple[int, ...], int]:
        return self.features[i], self.labels[i]

    def rows(self) -> Iterator[Tuple[Tuple[int, ...], int]]:
        return zip(self.features, self.labels)

    def feature_values(self, i: int) -> List[ScaledInt]:
        return [ScaledInt(v, 1) for v in self.features[i]]

    def sign_flags(self, i: int) -> Tuple[SignFlag, ...]:
        """Flags for x_0..x_{m-1} followed by y."""
        return tuple(SignFlag.of(v) for v in (*self.features[i], self.labels[i]))

    def feature_matrix(self) -> np.ndarray:
        unit = self.params.one
        return np.array([[v / unit for v in row] for row in self.features], dtype=np.float64).reshape(
            self.size, self.input_dim
        )

    def label_vector(self) -> np.ndarray:
        unit = self.params.one
        return np.array([v / unit for v in self.labels], dtype=np.float64)

    def batch(self, n: int) -> "QuantizedDataset":
        if n >= self.size:
            return self
        _log.info("truncating dataset from %d to its first %d rows", self.size, n)
        return QuantizedDataset(self.features[:n], self.labels[:n], self.params, self.max_quantization_error)

    def scaled(self, factor: int, *, labels: bool = True) -> "QuantizedDataset":
        """Encoded values multiplied by an integer factor; labels too unless ``labels=False``."""
        return QuantizedDataset(
            tuple(tuple(v * factor for v in row) for row in self.features),
            tuple(v * factor for v in self.labels) if labels else self.labels,
            self.params,
            self.max_quantization_error,
        )

    def permuted(self, order: Sequence[int]) -> "QuantizedDataset":
        return QuantizedDataset(
            tuple(self.features[i] for i in order),
            tuple(self.labels[i] for i in order),
            self.params,
            self.max_quantization_error,
        )

    def distinct_feature_values(self) -> int:
        return len({v for row in self.features for v in row})

    @classmethod
    def from_values(
        cls,
        features: Sequence[Sequence[Union[float, str, Decimal, Fraction]]],
        labels: Sequence[Union[float, str, Decimal, Fraction]],
        params: CodecParams,
    ) -> "QuantizedDataset":
        worst = Fraction(0)
        q_rows: List[Tuple[int, ...]] = []
        for row in features:
            encoded = []
            for v in row:
                value, err = _quantize(v, params)
                encoded.append(value)
                worst = max(worst, err)
            q_rows.append(tuple(encoded))
        q_labels = []
        for v in labels:
            value, err = _quantize(v, params)
            q_labels.append(value)
            worst = max(worst, err)
        return cls(tuple(q_rows), tuple(q_labels), params, float(worst))


def _quantize(v, params: CodecParams) -> Tuple[int, Fraction]:
    exact = Fraction(Decimal(v)) if isinstance(v, str) else Fraction(v)
    q = encode(exact, params)
    return q.value, abs(decode_exact(q, params) - exact)


def _header(m: int) -> List[str]:
    return [f"x{i}" for i in range(m)] + ["y"]


def load_csv(path: PathLike, params: CodecParams) -> QuantizedDataset:
    """Read ``x0,...,x{m-1},y`` rows of decimal literals and quantize them."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_csv(text, params)


def parse_csv(text: str, params: CodecParams) -> QuantizedDataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetParseError("empty file", line=1) from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header != _header(len(header) - 1):
        raise DatasetParseError(f"header must be x0,...,x{{m-1}},y; got {','.join(header)}", line=1)
    m = len(header) - 1
    features: List[List[Fraction]] = []
    labels: List[Fraction] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != m + 1:
            raise DatasetParseError(f"expected {m + 1} columns, got {len(row)}", line=line_no)
        values = []
        for cell in row:
            try:
                d = Decimal(cell.strip())
            except InvalidOperation:
                raise DatasetParseError(f"not a decimal literal: {cell!r}", line=line_no) from None
            if not d.is_finite():
                raise DatasetParseError(f"non-finite value {cell!r}", line=line_no)
            values.append(Fraction(d))
        features.append(values[:m])
        labels.append(values[m])
    if not labels:
        raise DatasetParseError("no samples after the header", line=2)
    try:
        ds = QuantizedDataset.from_values(features, labels, params)
    except CodecOverflowError as exc:
        raise CodecOverflowError(f"dataset value overflows the codec: {exc}") from exc
    _log.info(
        "loaded %d samples with %d features (max quantization error %.3g)",
        ds.size,
        ds.input_dim,
        ds.max_quantization_error,
    )
    return ds


def format_fixed(value: int, params: CodecParams) -> str:
    """Exact decimal text of value / 2^L; no exponent, no trailing zeros."""
    with localcontext() as ctx:
        # 2^-L has exactly L decimal digits
        ctx.prec = len(str(abs(value))) + 2 * params.fractional_bits + 8
        d = (Decimal(value) / (Decimal(2) ** params.fractional_bits)).normalize()
    return format(d, "f")


def dump_csv(dataset: QuantizedDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_header(dataset.input_dim))
    for row, label in dataset.rows():
        w.writerow([format_fixed(v, dataset.params) for v in (*row, label)])
    return buf.getvalue()


def write_csv(dataset: QuantizedDataset, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_csv(dataset), encoding="utf-8")
    return out


def synthetic_dataset(
    n: int,
    m: int,
    *,
    seed: int = 0,
    params: Optional[CodecParams] = None,
    distinct_values: Optional[int] = None,
) -> QuantizedDataset:
    """Linearly separable data: x uniform in [-1, 1], y = 1 when sum(x) > 0.

    With ``distinct_values`` every feature is drawn from that many evenly spaced
    points, which is what makes unique-value proofs small.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    params = params or CodecParams()
    rng = np.random.default_rng(seed)
    if distinct_values:
        grid = np.linspace(-1.0, 1.0, int(distinct_values))
        x = rng.choice(grid, size=(n, m))
    else:
        x = rng.uniform(-1.0, 1.0, size=(n, m))
    features = [[float(v) for v in row] for row in x]
    labels = [1 if sum(row) > 0 else 0 for row in features]
    return QuantizedDataset.from_values(features, labels, params)
