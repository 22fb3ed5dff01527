import itertools
from fractions import Fraction

import pytest

from veridl.codec import (
    CodecParams,
    ScaledInt,
    SplitSum,
    decode,
    decode_exact,
    encode,
    from_field,
    lemma_check,
    mod_repr,
    round_ratio,
    split_dot,
)
from veridl.errors import CodecOverflowError, RangeViolationError, ScaleLedgerError

L4 = CodecParams(fractional_bits=4)


def test_encode_small_precision_examples():
    assert encode(1.5, L4) == ScaledInt(24, 1)
    assert encode(-0.25, L4) == ScaledInt(-4, 1)
    assert encode(3, L4) == ScaledInt(48, 1)


def test_encode_rounds_half_to_even(params):
    tiny = Fraction(1, 2 ** (params.fractional_bits + 1))
    assert encode(tiny, params).value == 0
    assert encode(3 * tiny, params).value == 2
    assert encode(-tiny, params).value == 0


def test_decode_inverts_encode_on_the_grid(params):
    for x in (0.0, 0.5, -0.75, 1.0, 123.0625):
        assert decode(encode(x, params), params) == x
    assert decode_exact(ScaledInt(3, 2), L4) == Fraction(3, 256)


def test_encode_rejects_non_finite(params):
    with pytest.raises(CodecOverflowError):
        encode(float("nan"), params)
    with pytest.raises(CodecOverflowError):
        encode(float("inf"), params)


def test_mod_repr_and_from_field_agree(params):
    p = params.field_order
    assert mod_repr(-1, params) == p - 1
    assert mod_repr(ScaledInt(5, 2), params) == 5
    for v in (0, 1, -1, 12345, -(p // 2)):
        assert from_field(mod_repr(v, params), params) == v
    with pytest.raises(RangeViolationError):
        mod_repr(p, params)
    with pytest.raises(RangeViolationError):
        from_field(p, params)


def test_round_ratio_ties_to_even():
    assert round_ratio(5, 2) == 2
    assert round_ratio(7, 2) == 4
    assert round_ratio(-5, 2) == -2
    assert round_ratio(10, 3) == 3


def test_split_dot_separates_signs(params):
    u = [ScaledInt(v) for v in (2, -3, 4)]
    w = [ScaledInt(v) for v in (5, 6, -1)]
    s = split_dot(u, w, params)
    assert s.pos_sum == ScaledInt(10, 2)
    assert s.neg_sum == ScaledInt(-22, 2)
    assert s.total == ScaledInt(-12, 2)
    assert s.neg_count == 2
    assert s.is_consistent()


def test_split_dot_zero_products_count_as_positive(params):
    s = split_dot([ScaledInt(0), ScaledInt(-1)], [ScaledInt(-7), ScaledInt(0)], params)
    assert s.pos_sum.value == 0 and s.neg_sum.value == 0
    assert s.neg_count == 0


def test_split_dot_scale_rules(params):
    with pytest.raises(ScaleLedgerError):
        split_dot([ScaledInt(1, 1), ScaledInt(1, 2)], [ScaledInt(1), ScaledInt(1)], params)
    with pytest.raises(ScaleLedgerError):
        split_dot([ScaledInt(1, 3)], [ScaledInt(1, 2)], params)
    with pytest.raises(ValueError):
        split_dot([], [], params)


def test_split_sum_constructor_checks_signs():
    with pytest.raises(ValueError):
        SplitSum(ScaledInt(-1, 2), ScaledInt(0, 2), ScaledInt(-1, 2), 0)
    with pytest.raises(ValueError):
        SplitSum(ScaledInt(1, 2), ScaledInt(1, 2), ScaledInt(2, 2), 0)


def test_scale_is_bounded():
    with pytest.raises(ScaleLedgerError):
        ScaledInt(1, 5)
    with pytest.raises(ScaleLedgerError):
        ScaledInt(1, 0)


def test_field_must_leave_headroom():
    with pytest.raises(ValueError, match="FIELD_TOO_SMALL"):
        CodecParams(field_order=101)
    with pytest.raises(ValueError, match="NOT_PRIME"):
        CodecParams(field_order=100)


def test_field_arithmetic_matches_signed_sums_exhaustively():
    values = range(-5, 6)
    for n in (1, 2, 3):
        for u in itertools.product(values, repeat=n):
            for w in itertools.product(values, repeat=n):
                assert lemma_check(u, w, 101), (u, w)
