"""Bilinear pairing groups behind a symmetric interface.

The protocol writes every pairing as e: G x G -> G_T. The real backend is the
asymmetric BLS12-381 pairing from py_ecc, so an element optionally carries a G2
form next to its G1 form; the G2 form is produced only for elements that appear
on the right-hand side of a pairing (the public value v and label commitments).

Elements created with :meth:`PairingBackend.exp_g` remember their exponent. Those
exponents are public by construction (the verifier computed them) and let
:meth:`PairingBackend.pairing_check` fold such factors into one G1 accumulator.
Elements created with :meth:`PairingBackend.commit` never carry an exponent.
"""
from __future__ import annotations

import functools
import hashlib
import logging
import os
import secrets
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

from .codec import BLS12_381_ORDER
from .errors import ArtifactFormatError, UnsupportedSecurityLevel

HASH_DOMAIN = b"VERIDL-H2S-v1"
KEYGEN_DOMAIN = b"VERIDL-KEYGEN-v1"
SCALAR_BYTES = 32
SUPPORTED_SECURITY = (128,)
DEFAULT_BACKEND = "bls12-381"

_log = logging.getLogger(__name__)


class GroupElement:
    __slots__ = ("backend", "g1", "g2", "public_exponent")

    def __init__(self, backend: "PairingBackend", g1: Any, g2: Any = None, public_exponent: Optional[int] = None) -> None:
        self.backend = backend
        self.g1 = g1
        self.g2 = g2
        self.public_exponent = public_exponent

    @property
    def has_g2(self) -> bool:
        return self.g2 is not None or self.public_exponent is not None

    def to_bytes(self) -> bytes:
        return self.backend.encode_element(self)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.backend.mul(self, other)

    def __pow__(self, k: int) -> "GroupElement":
        return self.backend.power(self, k)

    def inverse(self) -> "GroupElement":
        return self.backend.inverse(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.backend.name == other.backend.name and self.backend.g1_equal(self.g1, other.g1)

    def __hash__(self) -> int:
        return hash(self.backend.encode_g1(self.g1))

    def __repr__(self) -> str:
        return f"GroupElement({self.backend.name}, {self.backend.encode_g1(self.g1).hex()[:16]}…)"


class TargetElement:
    __slots__ = ("backend", "value")

    def __init__(self, backend: "PairingBackend", value: Any) -> None:
        self.backend = backend
        self.value = value

    def __mul__(self, other: "TargetElement") -> "TargetElement":
        return TargetElement(self.backend, self.backend.gt_mul_raw(self.value, other.value))

    def __pow__(self, k: int) -> "TargetElement":
        return TargetElement(self.backend, self.backend.gt_pow_raw(self.value, k % self.backend.order))

    def to_bytes(self) -> bytes:
        return self.backend.encode_target(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TargetElement):
            return NotImplemented
        return self.backend.name == other.backend.name and self.backend.gt_equal(self.value, other.value)

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def __repr__(self) -> str:
        return f"TargetElement({self.backend.name}, {self.to_bytes().hex()[:16]}…)"


Term = Tuple[GroupElement, GroupElement]


class PairingBackend(ABC):
    name: str
    backend_id: int
    order: int
    g1_size: int
    g2_size: int
    gt_size: int

    # ---------------- primitives ----------------
    @abstractmethod
    def _g1_generator(self) -> Any: ...

    @abstractmethod
    def _g2_generator(self) -> Any: ...

    @abstractmethod
    def _g1_zero(self) -> Any: ...

    @abstractmethod
    def _g1_add(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def _g1_mul(self, a: Any, k: int) -> Any: ...

    @abstractmethod
    def _g1_neg(self, a: Any) -> Any: ...

    @abstractmethod
    def _g1_is_zero(self, a: Any) -> bool: ...

    @abstractmethod
    def g1_equal(self, a: Any, b: Any) -> bool: ...

    @abstractmethod
    def _g2_add(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def _g2_mul(self, a: Any, k: int) -> Any: ...

    @abstractmethod
    def _g2_neg(self, a: Any) -> Any: ...

    @abstractmethod
    def _miller(self, p1: Any, q2: Any) -> Any:
        """Pairing value before final exponentiation."""

    @abstractmethod
    def _miller_one(self) -> Any: ...

    @abstractmethod
    def _miller_mul(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def _finalize(self, raw: Any) -> Any: ...

    @abstractmethod
    def gt_mul_raw(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def gt_pow_raw(self, a: Any, k: int) -> Any: ...

    @abstractmethod
    def _gt_one(self) -> Any: ...

    @abstractmethod
    def gt_equal(self, a: Any, b: Any) -> bool: ...

    @abstractmethod
    def encode_g1(self, a: Any) -> bytes: ...

    @abstractmethod
    def decode_g1(self, data: bytes) -> Any: ...

    @abstractmethod
    def encode_g2(self, a: Any) -> bytes: ...

    @abstractmethod
    def decode_g2(self, data: bytes) -> Any: ...

    @abstractmethod
    def _encode_gt(self, value: Any) -> bytes: ...

    @abstractmethod
    def _decode_gt(self, data: bytes) -> Any: ...

    # ---------------- group G ----------------
    def generator(self) -> GroupElement:
        return GroupElement(self, self._g1_generator(), self._g2_generator(), 1)

    def identity(self) -> GroupElement:
        return GroupElement(self, self._g1_zero(), None, 0)

    def exp_g(self, a: int) -> GroupElement:
        """g^a for a scalar the caller is allowed to reveal."""
        a %= self.order
        return GroupElement(self, self._g1_mul(self._g1_generator(), a), None, a)

    def commit(self, a: int, *, twin: bool = False) -> GroupElement:
        """g^a for a hidden scalar; ``twin`` also produces the G2 form."""
        a %= self.order
        g2 = self._g2_mul(self._g2_generator(), a) if twin else None
        return GroupElement(self, self._g1_mul(self._g1_generator(), a), g2)

    def _g2_form(self, el: GroupElement) -> Any:
        if el.g2 is not None:
            return el.g2
        if el.public_exponent is not None:
            return self._g2_mul(self._g2_generator(), el.public_exponent)
        return None

    def mul(self, a: GroupElement, b: GroupElement) -> GroupElement:
        g1 = self._g1_add(a.g1, b.g1)
        if a.public_exponent is not None and b.public_exponent is not None:
            return GroupElement(self, g1, None, (a.public_exponent + b.public_exponent) % self.order)
        g2 = None
        if (a.g2 is not None or b.g2 is not None) and a.has_g2 and b.has_g2:
            g2 = self._g2_add(self._g2_form(a), self._g2_form(b))
        return GroupElement(self, g1, g2)

    def power(self, a: GroupElement, k: int) -> GroupElement:
        # k may be secret; the result never carries a public exponent
        k %= self.order
        g2 = self._g2_mul(a.g2, k) if a.g2 is not None else None
        return GroupElement(self, self._g1_mul(a.g1, k), g2)

    def inverse(self, a: GroupElement) -> GroupElement:
        g2 = self._g2_neg(a.g2) if a.g2 is not None else None
        exponent = (-a.public_exponent) % self.order if a.public_exponent is not None else None
        return GroupElement(self, self._g1_neg(a.g1), g2, exponent)

    def aggregate(self, elements: Iterable[GroupElement]) -> GroupElement:
        items = list(elements)
        if not items:
            raise ValueError("aggregate needs at least one element")
        return functools.reduce(self.mul, items)

    # ---------------- pairing ----------------
    def _orient(self, a: GroupElement, b: GroupElement) -> Tuple[Any, Any]:
        q2 = self._g2_form(b)
        if q2 is not None:
            return a.g1, q2
        q2 = self._g2_form(a)
        if q2 is not None:
            return b.g1, q2
        raise ValueError("NO_G2_FORM: neither pairing argument carries a G2 form")

    def pair(self, a: GroupElement, b: GroupElement) -> TargetElement:
        p1, q2 = self._orient(a, b)
        return TargetElement(self, self._finalize(self._miller(p1, q2)))

    def pair_product(self, terms: Iterable[Term]) -> TargetElement:
        raw = self._miller_one()
        for a, b in terms:
            raw = self._miller_mul(raw, self._miller(*self._orient(a, b)))
        return TargetElement(self, self._finalize(raw))

    @functools.cached_property
    def _gt_generator(self) -> Any:
        return self._finalize(self._miller(self._g1_generator(), self._g2_generator()))

    def gt_exp(self, a: int) -> TargetElement:
        return TargetElement(self, self.gt_pow_raw(self._gt_generator, a % self.order))

    def gt_identity(self) -> TargetElement:
        return TargetElement(self, self._gt_one())

    def pairing_check(self, lhs: Sequence[Term], rhs: Sequence[Term]) -> bool:
        """Decide prod e(lhs) == prod e(rhs) with a single final exponentiation."""
        acc = self._g1_zero()
        raw = self._miller_one()
        genuine = False
        signed = [(False, t) for t in lhs] + [(True, t) for t in rhs]
        for negate, (a, b) in signed:
            if b.public_exponent is not None:
                point = self._g1_mul(a.g1, b.public_exponent)
            elif a.public_exponent is not None:
                point = self._g1_mul(b.g1, a.public_exponent)
            else:
                p1, q2 = self._orient(a, b)
                if negate:
                    p1 = self._g1_neg(p1)
                raw = self._miller_mul(raw, self._miller(p1, q2))
                genuine = True
                continue
            acc = self._g1_add(acc, self._g1_neg(point) if negate else point)
        if not genuine:
            return self._g1_is_zero(acc)
        if not self._g1_is_zero(acc):
            raw = self._miller_mul(raw, self._miller(acc, self._g2_generator()))
        return self.gt_equal(self._finalize(raw), self._gt_one())

    def equation(self, terms: Sequence[Term], exponent: int) -> bool:
        """prod e(terms) == e(g, g)^exponent."""
        return self.pairing_check(terms, [(self.generator(), self.exp_g(exponent))])

    # ---------------- hashing ----------------
    def hash_to_scalar(self, data: bytes) -> int:
        digest = hashlib.sha512(HASH_DOMAIN + bytes(data)).digest()
        return int.from_bytes(digest, "big") % self.order

    # ---------------- serialization ----------------
    def encode_element(self, el: GroupElement) -> bytes:
        out = self.encode_g1(el.g1)
        if el.g2 is not None:
            out += self.encode_g2(el.g2)
        return out

    def decode_element(self, data: bytes) -> GroupElement:
        if len(data) == self.g1_size:
            return GroupElement(self, self.decode_g1(data))
        if len(data) == self.g1_size + self.g2_size:
            return GroupElement(self, self.decode_g1(data[: self.g1_size]), self.decode_g2(data[self.g1_size:]))
        raise ArtifactFormatError(f"group element of {len(data)} bytes for {self.name}")

    def encode_target(self, t: TargetElement) -> bytes:
        return self._encode_gt(t.value)

    def decode_target(self, data: bytes) -> TargetElement:
        if len(data) != self.gt_size:
            raise ArtifactFormatError(f"target element of {len(data)} bytes for {self.name}")
        return TargetElement(self, self._decode_gt(data))

    def encode_scalar(self, s: int) -> bytes:
        if not 0 <= s < self.order:
            raise ValueError("scalar outside [0, p)")
        return s.to_bytes(SCALAR_BYTES, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != SCALAR_BYTES:
            raise ArtifactFormatError("scalar must be 32 bytes")
        s = int.from_bytes(data, "big")
        if s >= self.order:
            raise ArtifactFormatError("scalar not reduced mod p")
        return s


class TransparentBackend(PairingBackend):
    """The prime-order group represented by its exponents.

    Every element is its own discrete logarithm, so nothing is hidden and nothing
    is binding. Only for fast property matrices; never for real data.
    """

    name = "transparent"
    backend_id = 0x02
    g1_size = SCALAR_BYTES
    g2_size = SCALAR_BYTES
    gt_size = SCALAR_BYTES

    def __init__(self, order: int = BLS12_381_ORDER) -> None:
        self.order = order
        _log.warning("transparent pairing backend active: commitments are not hiding")

    def _g1_generator(self) -> int:
        return 1

    def _g2_generator(self) -> int:
        return 1

    def _g1_zero(self) -> int:
        return 0

    def _g1_add(self, a: int, b: int) -> int:
        return (a + b) % self.order

    def _g1_mul(self, a: int, k: int) -> int:
        return (a * k) % self.order

    def _g1_neg(self, a: int) -> int:
        return (-a) % self.order

    def _g1_is_zero(self, a: int) -> bool:
        return a == 0

    def g1_equal(self, a: int, b: int) -> bool:
        return a == b

    _g2_add = _g1_add
    _g2_mul = _g1_mul
    _g2_neg = _g1_neg

    def _miller(self, p1: int, q2: int) -> int:
        return (p1 * q2) % self.order

    def _miller_one(self) -> int:
        return 0

    def _miller_mul(self, a: int, b: int) -> int:
        return (a + b) % self.order

    def _finalize(self, raw: int) -> int:
        return raw

    def gt_mul_raw(self, a: int, b: int) -> int:
        return (a + b) % self.order

    def gt_pow_raw(self, a: int, k: int) -> int:
        return (a * k) % self.order

    def _gt_one(self) -> int:
        return 0

    def gt_equal(self, a: int, b: int) -> bool:
        return a == b

    def _encode_int(self, a: int) -> bytes:
        return a.to_bytes(SCALAR_BYTES, "big")

    def _decode_int(self, data: bytes) -> int:
        a = int.from_bytes(data, "big")
        if a >= self.order:
            raise ArtifactFormatError("element not reduced mod p")
        return a

    encode_g1 = encode_g2 = _encode_gt = _encode_int
    decode_g1 = decode_g2 = _decode_gt = _decode_int


class Bls12381Backend(PairingBackend):
    name = "bls12-381"
    backend_id = 0x01
    g1_size = 48
    g2_size = 96
    gt_size = 12 * 48

    def __init__(self) -> None:
        from py_ecc import optimized_bls12_381 as curve
        from py_ecc.bls.g2_primitives import G1_to_pubkey, G2_to_signature, pubkey_to_G1, signature_to_G2

        self._curve = curve
        self._g1_bytes = G1_to_pubkey
        self._g1_point = pubkey_to_G1
        self._g2_bytes = G2_to_signature
        self._g2_point = signature_to_G2
        self.order = curve.curve_order

    def _g1_generator(self) -> Any:
        return self._curve.G1

    def _g2_generator(self) -> Any:
        return self._curve.G2

    def _g1_zero(self) -> Any:
        return self._curve.Z1

    def _g1_add(self, a: Any, b: Any) -> Any:
        return self._curve.add(a, b)

    def _g1_mul(self, a: Any, k: int) -> Any:
        return self._curve.multiply(a, k % self.order)

    def _g1_neg(self, a: Any) -> Any:
        return self._curve.neg(a)

    def _g1_is_zero(self, a: Any) -> bool:
        return self._curve.is_inf(a)

    def g1_equal(self, a: Any, b: Any) -> bool:
        return self._curve.eq(a, b)

    def _g2_add(self, a: Any, b: Any) -> Any:
        return self._curve.add(a, b)

    def _g2_mul(self, a: Any, k: int) -> Any:
        return self._curve.multiply(a, k % self.order)

    def _g2_neg(self, a: Any) -> Any:
        return self._curve.neg(a)

    def _miller(self, p1: Any, q2: Any) -> Any:
        if self._curve.is_inf(p1) or self._curve.is_inf(q2):
            return self._curve.FQ12.one()
        return self._curve.pairing(q2, p1, final_exponentiate=False)

    def _miller_one(self) -> Any:
        return self._curve.FQ12.one()

    def _miller_mul(self, a: Any, b: Any) -> Any:
        return a * b

    def _finalize(self, raw: Any) -> Any:
        return self._curve.final_exponentiate(raw)

    def gt_mul_raw(self, a: Any, b: Any) -> Any:
        return a * b

    def gt_pow_raw(self, a: Any, k: int) -> Any:
        return a ** k

    def _gt_one(self) -> Any:
        return self._curve.FQ12.one()

    def gt_equal(self, a: Any, b: Any) -> bool:
        return a == b

    def _in_subgroup(self, point: Any) -> bool:
        return self._curve.is_inf(self._curve.multiply(point, self.order))

    def encode_g1(self, a: Any) -> bytes:
        return bytes(self._g1_bytes(a))

    def decode_g1(self, data: bytes) -> Any:
        try:
            point = self._g1_point(bytes(data))
        except (ValueError, AssertionError) as exc:
            raise ArtifactFormatError(f"invalid G1 encoding: {exc}") from exc
        if not self._in_subgroup(point):
            raise ArtifactFormatError("G1 point outside the prime-order subgroup")
        return point

    def encode_g2(self, a: Any) -> bytes:
        return bytes(self._g2_bytes(a))

    def decode_g2(self, data: bytes) -> Any:
        try:
            point = self._g2_point(bytes(data))
        except (ValueError, AssertionError) as exc:
            raise ArtifactFormatError(f"invalid G2 encoding: {exc}") from exc
        if not self._in_subgroup(point):
            raise ArtifactFormatError("G2 point outside the prime-order subgroup")
        return point

    def _encode_gt(self, value: Any) -> bytes:
        return b"".join(int(getattr(c, "n", c)).to_bytes(48, "big") for c in value.coeffs)

    def _decode_gt(self, data: bytes) -> Any:
        coeffs = [int.from_bytes(data[i : i + 48], "big") for i in range(0, len(data), 48)]
        if any(c >= self._curve.field_modulus for c in coeffs):
            raise ArtifactFormatError("target coefficient not reduced")
        return self._curve.FQ12(coeffs)


_BACKENDS = {
    Bls12381Backend.name: Bls12381Backend,
    TransparentBackend.name: TransparentBackend,
}
_BY_ID = {cls.backend_id: name for name, cls in _BACKENDS.items()}


@functools.lru_cache(maxsize=None)
def _backend_instance(name: str) -> PairingBackend:
    return _BACKENDS[name]()


def get_backend(name: Optional[str] = None) -> PairingBackend:
    name = name or os.environ.get("VERIDL_BACKEND") or DEFAULT_BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"unknown pairing backend {name!r}; choose one of {sorted(_BACKENDS)}")
    return _backend_instance(name)


def backend_by_id(backend_id: int) -> PairingBackend:
    if backend_id not in _BY_ID:
        raise ArtifactFormatError(f"unknown backend id {backend_id:#04x}")
    return get_backend(_BY_ID[backend_id])


# ---------------- keys ----------------
@dataclass(frozen=True)
class SecretKey:
    backend: PairingBackend
    scalar: int


@dataclass(frozen=True)
class PublicKey:
    backend: PairingBackend
    v: GroupElement
    security_parameter: int = 128

    @property
    def g(self) -> GroupElement:
        return self.backend.generator()

    def hash_to_scalar(self, data: bytes) -> int:
        return self.backend.hash_to_scalar(data)


@dataclass(frozen=True)
class KeyMaterial:
    secret: SecretKey
    public: PublicKey


def _seed_bytes(seed: Union[int, str, bytes]) -> bytes:
    if isinstance(seed, bytes):
        return seed
    return str(seed).encode("utf-8")


def derive_secret(seed: Union[int, str, bytes, None], order: int) -> int:
    """Uniform scalar in [1, p): SHA-512 counter mode over the seed, or the OS CSPRNG."""
    if seed is None:
        return secrets.randbelow(order - 1) + 1
    material = _seed_bytes(seed)
    counter = 0
    while True:
        block = hashlib.sha512(KEYGEN_DOMAIN + material + counter.to_bytes(4, "big")).digest()
        candidate = int.from_bytes(block, "big") % order
        if candidate:
            return candidate
        counter += 1


def genkey(
    security_parameter: int = 128,
    *,
    seed: Union[int, str, bytes, None] = None,
    backend: Optional[PairingBackend] = None,
) -> Tuple[SecretKey, PublicKey]:
    if security_parameter not in SUPPORTED_SECURITY:
        raise UnsupportedSecurityLevel(f"security parameter {security_parameter} not supported")
    backend = backend or get_backend()
    s = derive_secret(seed, backend.order)
    v = backend.commit(s, twin=True)
    _log.debug("generated key pair on %s", backend.name)
    return SecretKey(backend, s), PublicKey(backend, v, security_parameter)


def key_material(security_parameter: int = 128, **kwargs: Any) -> KeyMaterial:
    sk, pk = genkey(security_parameter, **kwargs)
    return KeyMaterial(sk, pk)
