"""Fixed-point encoding of decimals into a prime field.

A decimal x is carried as the integer f(x) = round_half_even(x * 2^L) where L is
``CodecParams.fractional_bits``. Products of encoded values carry a larger scale:
a ScaledInt of scale k stands for ``value / 2^(k*L)``. Negative integers enter the
group exponent as their representative ``value mod p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .errors import CodecOverflowError, RangeViolationError, ScaleLedgerError

# Prime order of the BLS12-381 groups.
BLS12_381_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001

MAX_SCALE = 4

Number = Union[int, float, Fraction, Decimal, str]

_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin over the first twenty prime bases."""
    if n < 2:
        return False
    for q in _WITNESSES:
        if n % q == 0:
            return n == q
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class CodecParams:
    fractional_bits: int = 20
    field_order: int = BLS12_381_ORDER
    max_terms: int = 1 << 16
    magnitude_bits: int = 32

    def __post_init__(self) -> None:
        if self.fractional_bits < 1:
            raise ValueError("fractional_bits must be >= 1")
        if self.max_terms < 1 or self.magnitude_bits < 0:
            raise ValueError("max_terms must be >= 1 and magnitude_bits >= 0")
        if not is_probable_prime(self.field_order):
            raise ValueError("FIELD_ORDER_NOT_PRIME")
        if (1 << self.headroom_bits) >= self.field_order:
            raise ValueError(
                f"FIELD_TOO_SMALL: 2^{self.headroom_bits} must stay below the field order"
            )

    @property
    def headroom_bits(self) -> int:
        # 4*L bits for a scale-4 product, plus magnitude, plus ceil(log2(max_terms)) for summation
        return 4 * self.fractional_bits + self.magnitude_bits + (self.max_terms - 1).bit_length()

    @property
    def one(self) -> int:
        return 1 << self.fractional_bits

    def unit(self, scale: int) -> int:
        return 1 << (scale * self.fractional_bits)


@dataclass(frozen=True)
class ScaledInt:
    value: int
    scale: int = 1

    def __post_init__(self) -> None:
        if self.scale < 1 or self.scale > MAX_SCALE:
            raise ScaleLedgerError(f"scale {self.scale} outside 1..{MAX_SCALE}")

    def __neg__(self) -> "ScaledInt":
        return ScaledInt(-self.value, self.scale)

    def shifted(self, amount: int) -> "ScaledInt":
        return ScaledInt(self.value + amount, self.scale)


class SignFlag(Enum):
    POSITIVE = "+"
    NEGATIVE = "-"

    @classmethod
    def of(cls, value: Union[int, float]) -> "SignFlag":
        return cls.NEGATIVE if value < 0 else cls.POSITIVE

    @property
    def negative(self) -> bool:
        return self is SignFlag.NEGATIVE

    def to_byte(self) -> int:
        return 1 if self.negative else 0

    @classmethod
    def from_byte(cls, raw: int) -> "SignFlag":
        if raw not in (0, 1):
            raise ValueError(f"invalid sign byte {raw}")
        return cls.NEGATIVE if raw else cls.POSITIVE


@dataclass(frozen=True)
class SplitSum:
    """A verified dot product split into its nonnegative-product and negative-product parts.

    The constructor enforces only the structural part of the contract (equal scales,
    part signs). Whether ``pos_sum + neg_sum == total`` holds is a claim the
    verifier checks; see :meth:`is_consistent`.
    """

    pos_sum: ScaledInt
    neg_sum: ScaledInt
    total: ScaledInt
    neg_count: int = 0

    def __post_init__(self) -> None:
        if not (self.pos_sum.scale == self.neg_sum.scale == self.total.scale):
            raise ScaleLedgerError("SplitSum parts carry different scales")
        if self.pos_sum.value < 0 or self.neg_sum.value > 0:
            raise RangeViolationError("SplitSum part has the wrong sign")
        if self.neg_count < 0:
            raise RangeViolationError("negative neg_count")

    @property
    def scale(self) -> int:
        return self.total.scale

    def is_consistent(self) -> bool:
        return self.pos_sum.value + self.neg_sum.value == self.total.value


def _as_fraction(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    try:
        out = Fraction(x)
    except (ValueError, OverflowError, TypeError) as exc:
        raise CodecOverflowError(f"cannot encode {x!r}: {exc}") from exc
    return out


def encode(x: Number, params: CodecParams) -> ScaledInt:
    """f(x): quantize at scale 1 with round-half-to-even."""
    if isinstance(x, float):
        if not math.isfinite(x):
            raise CodecOverflowError(f"cannot encode non-finite value {x!r}")
        # scaling by a power of two is exact in binary floating point
        value = round(x * params.one)
    elif isinstance(x, int):
        value = x << params.fractional_bits
    else:
        value = round(_as_fraction(x) * params.one)
    if abs(value) >= params.field_order:
        raise CodecOverflowError(f"|f({x})| exceeds the field order")
    return ScaledInt(value, 1)


def decode(v: ScaledInt, params: CodecParams) -> float:
    # int / int is correctly rounded
    return v.value / params.unit(v.scale)


def decode_exact(v: ScaledInt, params: CodecParams) -> Fraction:
    return Fraction(v.value, params.unit(v.scale))


def mod_repr(v: Union[ScaledInt, int], params: CodecParams) -> int:
    """[v] = v mod p."""
    value = v.value if isinstance(v, ScaledInt) else v
    if abs(value) >= params.field_order:
        raise RangeViolationError("|value| must be below the field order")
    return value % params.field_order


def in_signed_range(value: int, params: CodecParams) -> bool:
    return 2 * abs(value) < params.field_order


def check_range(value: int, params: CodecParams) -> int:
    if not in_signed_range(value, params):
        raise RangeViolationError("plaintext scalar outside (-p/2, p/2)")
    return value


def from_field(residue: int, params: CodecParams) -> int:
    """Inverse of mod_repr on (-p/2, p/2)."""
    p = params.field_order
    if not 0 <= residue < p:
        raise RangeViolationError("field element outside [0, p)")
    return residue if residue <= p // 2 else residue - p


def round_ratio(numerator: int, denominator: int) -> int:
    """round_half_even(numerator / denominator) computed exactly."""
    return round(Fraction(numerator, denominator))


def _common_scale(values: Sequence[ScaledInt], label: str) -> int:
    scales = {v.scale for v in values}
    if len(scales) != 1:
        raise ScaleLedgerError(f"{label} mixes scales {sorted(scales)}")
    return scales.pop()


def split_dot(u: Sequence[ScaledInt], w: Sequence[ScaledInt], params: CodecParams) -> SplitSum:
    if len(u) != len(w):
        raise ValueError(f"length mismatch {len(u)} != {len(w)}")
    if not u:
        raise ValueError("split_dot needs at least one term")
    scale = _common_scale(u, "u") + _common_scale(w, "w")
    if scale > MAX_SCALE:
        raise ScaleLedgerError(f"product scale {scale} exceeds {MAX_SCALE}")
    p = params.field_order
    pos = neg = 0
    count = 0
    for a, b in zip(u, w):
        term = a.value * b.value
        if term < 0:
            neg += term
            count += 1
        else:
            pos += term
        if pos >= p or neg <= -p:
            raise CodecOverflowError("partial sum left (-p, p)")
    return SplitSum(
        pos_sum=ScaledInt(pos, scale),
        neg_sum=ScaledInt(neg, scale),
        total=ScaledInt(pos + neg, scale),
        neg_count=count,
    )


def lemma_check(u: Iterable[int], w: Iterable[int], p: int) -> bool:
    """Sum of [u_i][w_i] reduced mod p equals z, or z + p when z is negative."""
    u, w = list(u), list(w)
    z = sum(a * b for a, b in zip(u, w))
    residue = sum((a % p) * (b % p) for a, b in zip(u, w)) % p
    return residue == (z if z >= 0 else z + p)
