import random

import pytest

from veridl.errors import ArtifactFormatError, UnsupportedSecurityLevel
from veridl.pairing import Bls12381Backend, backend_by_id, genkey, get_backend

EMPTY_HASH = 41488545249843983619834546280034941220584063509844290542120901919217557817697
G1_GENERATOR_HEX = (
    "97f1d3a73197d7942695638c4fa9ac0fc3688c4f9774b905a14e3a3f171bac58"
    "6c55e83ff97a1aeffb3af00adb22c6bb"
)


@pytest.fixture(scope="module")
def bls():
    return get_backend("bls12-381")


def test_backends_are_shared_instances():
    assert get_backend("transparent") is get_backend("transparent")
    assert backend_by_id(0x02) is get_backend("transparent")
    assert isinstance(backend_by_id(0x01), Bls12381Backend)
    with pytest.raises(ArtifactFormatError):
        backend_by_id(0x7E)
    with pytest.raises(ValueError):
        get_backend("secp256k1")


def test_hash_to_scalar_golden(bls):
    assert bls.hash_to_scalar(b"") == EMPTY_HASH
    assert bls.hash_to_scalar(b"a") != bls.hash_to_scalar(b"b")
    assert 0 <= bls.hash_to_scalar(b"x" * 1000) < bls.order


def test_g1_generator_encoding_golden(bls):
    assert bls.encode_g1(bls.generator().g1).hex() == G1_GENERATOR_HEX


def test_bilinearity_transparent(transparent):
    rng = random.Random(1)
    for _ in range(100):
        a, b = rng.randrange(transparent.order), rng.randrange(transparent.order)
        left = transparent.pair(transparent.commit(a), transparent.exp_g(b))
        assert left == transparent.gt_exp(a * b)


def test_aggregate_is_order_independent(transparent):
    rng = random.Random(2)
    elements = [transparent.commit(rng.randrange(1, 1 << 64)) for _ in range(12)]
    expected = transparent.aggregate(elements)
    for _ in range(50):
        rng.shuffle(elements)
        assert transparent.aggregate(elements) == expected


def test_folded_and_genuine_checks_agree(transparent):
    b = transparent
    hidden = b.commit(6, twin=True)
    # e(g^6, g^7) * e(g^2, g^3) = e(g, g)^48
    assert b.equation([(hidden, b.exp_g(7)), (b.exp_g(2), b.exp_g(3))], 48)
    assert b.equation([(hidden, hidden), (b.commit(3), b.exp_g(4))], 48)
    assert not b.equation([(hidden, hidden), (b.commit(3), b.exp_g(4))], 47)
    assert b.pairing_check([(b.exp_g(5), b.exp_g(2))], [(b.generator(), b.exp_g(10))])


def test_pairing_without_g2_form_is_refused(transparent):
    with pytest.raises(ValueError, match="NO_G2_FORM"):
        transparent.pair(transparent.commit(2), transparent.commit(3))


def test_genkey_is_seeded(transparent):
    s1, p1 = genkey(seed="owner", backend=transparent)
    s2, p2 = genkey(seed="owner", backend=transparent)
    s3, _ = genkey(seed="other", backend=transparent)
    assert s1.scalar == s2.scalar != s3.scalar
    assert p1.v == p2.v
    assert 0 < s1.scalar < transparent.order


def test_genkey_rejects_unsupported_security(transparent):
    with pytest.raises(UnsupportedSecurityLevel):
        genkey(256, backend=transparent)


def test_transparent_decoding_rejects_unreduced(transparent):
    with pytest.raises(ArtifactFormatError):
        transparent.decode_element(b"\xff" * 32)
    with pytest.raises(ArtifactFormatError):
        transparent.decode_element(b"\x01" * 31)


def test_scalar_codec_bounds(transparent):
    assert transparent.decode_scalar(transparent.encode_scalar(12345)) == 12345
    with pytest.raises(ArtifactFormatError):
        transparent.decode_scalar(b"\x00" * 31)
    with pytest.raises(ValueError):
        transparent.encode_scalar(transparent.order)


@pytest.mark.slow
def test_bilinearity_bls(bls):
    rng = random.Random(3)
    for _ in range(2):
        a, b = rng.randrange(1, 1 << 32), rng.randrange(1, 1 << 32)
        paired = bls.pair(bls.commit(a), bls.exp_g(b))
        assert paired == bls.gt_exp(a * b)
        assert paired != bls.gt_exp(a * b + 1)


@pytest.mark.slow
def test_bls_element_roundtrip_and_rejection(bls):
    el = bls.commit(987654321, twin=True)
    back = bls.decode_element(bls.encode_element(el))
    assert back == el
    with pytest.raises(ArtifactFormatError):
        bls.decode_element(b"\xff" * 48)
