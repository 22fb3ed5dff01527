"""Binary artifact files exchanged between data owner, server and verifier.

Every artifact starts with ``b"VDL1"``, a format version byte and a type byte.
Integers are big-endian. Scalars are 32 bytes. Group elements carry a 2-byte
length prefix, sequences a 4-byte count. A signed plaintext integer is written
as its field representative and read back into (-p/2, p/2).
"""
from __future__ import annotations

import json
import struct
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .codec import CodecParams, ScaledInt, SignFlag, SplitSum
from .datasets import QuantizedDataset
from .dnn.network import ModelState
from .errors import ArtifactFormatError, VeriDLError
from .pairing import GroupElement, PairingBackend, PublicKey, SecretKey, backend_by_id
from .protocol import DatasetSignature, Proof, ProofMode, SampleDigest, SampleWitness, unique_commitments

MAGIC = b"VDL1"
FORMAT_VERSION = 1


class ArtifactType(IntEnum):
    PUBLIC_KEY = 0x01
    SECRET_KEY = 0x02
    SIGNATURE = 0x03
    PROOF = 0x04
    MODEL = 0x05
    TASK = 0x06
    RESULT = 0x07
    REPORT = 0x08
    DATASET = 0x09


class _Writer:
    def __init__(self, kind: ArtifactType) -> None:
        self.buf = bytearray(MAGIC)
        self.buf += struct.pack(">BB", FORMAT_VERSION, int(kind))

    def u8(self, v: int) -> None:
        self.buf += struct.pack(">B", v)

    def u16(self, v: int) -> None:
        self.buf += struct.pack(">H", v)

    def u32(self, v: int) -> None:
        self.buf += struct.pack(">I", v)

    def raw(self, data: bytes) -> None:
        self.buf += data

    def blob(self, data: bytes) -> None:
        self.u32(len(data))
        self.buf += data

    def element(self, el: GroupElement) -> None:
        data = el.to_bytes()
        self.u16(len(data))
        self.buf += data

    def signed(self, value: int, order: int) -> None:
        if 2 * abs(value) >= order:
            raise ArtifactFormatError("plaintext integer outside (-p/2, p/2)")
        self.buf += (value % order).to_bytes(32, "big")

    def scaled(self, v: ScaledInt, order: int) -> None:
        self.u8(v.scale)
        self.signed(v.value, order)

    def split(self, s: SplitSum, order: int) -> None:
        for part in (s.pos_sum, s.neg_sum, s.total):
            self.scaled(part, order)
        self.u32(s.neg_count)

    def getvalue(self) -> bytes:
        return bytes(self.buf)


class _Reader:
    def __init__(self, data: bytes, kind: ArtifactType) -> None:
        self.data = memoryview(bytes(data))
        self.pos = 0
        found = artifact_type(data)
        if found != kind:
            raise ArtifactFormatError(f"expected a {kind.name} artifact, found {found.name}")
        self.pos = 6

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ArtifactFormatError("artifact truncated")
        out = bytes(self.data[self.pos : self.pos + n])
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def element(self, backend: PairingBackend) -> GroupElement:
        return backend.decode_element(self.take(self.u16()))

    def signed(self, order: int) -> int:
        residue = int.from_bytes(self.take(32), "big")
        if residue >= order:
            raise ArtifactFormatError("field representative not reduced")
        return residue if residue <= order // 2 else residue - order

    def scaled(self, order: int) -> ScaledInt:
        scale = self.u8()
        value = self.signed(order)
        try:
            return ScaledInt(value, scale)
        except VeriDLError as exc:
            raise ArtifactFormatError(str(exc)) from exc

    def split(self, order: int) -> SplitSum:
        pos, neg, total = (self.scaled(order) for _ in range(3))
        count = self.u32()
        try:
            return SplitSum(pos, neg, total, count)
        except VeriDLError as exc:
            raise ArtifactFormatError(f"invalid split sum: {exc}") from exc

    def sign(self) -> SignFlag:
        try:
            return SignFlag.from_byte(self.u8())
        except ValueError as exc:
            raise ArtifactFormatError(str(exc)) from exc

    def end(self) -> None:
        if self.pos != len(self.data):
            raise ArtifactFormatError(f"{len(self.data) - self.pos} trailing bytes")


def artifact_type(data: bytes) -> ArtifactType:
    if len(data) < 6 or bytes(data[:4]) != MAGIC:
        raise ArtifactFormatError("missing VDL1 magic")
    if data[4] != FORMAT_VERSION:
        raise ArtifactFormatError(f"unsupported format version {data[4]}")
    try:
        return ArtifactType(data[5])
    except ValueError:
        raise ArtifactFormatError(f"unknown artifact type {data[5]:#04x}") from None


# ---------------- keys and signature ----------------
def encode_public_key(pk: PublicKey) -> bytes:
    w = _Writer(ArtifactType.PUBLIC_KEY)
    w.u8(pk.backend.backend_id)
    w.u16(pk.security_parameter)
    w.element(pk.v)
    return w.getvalue()


def decode_public_key(data: bytes) -> PublicKey:
    r = _Reader(data, ArtifactType.PUBLIC_KEY)
    backend = backend_by_id(r.u8())
    lam = r.u16()
    v = r.element(backend)
    if v.g2 is None:
        raise ArtifactFormatError("public value lacks its G2 form")
    r.end()
    return PublicKey(backend, v, lam)


def encode_secret_key(sk: SecretKey) -> bytes:
    w = _Writer(ArtifactType.SECRET_KEY)
    w.u8(sk.backend.backend_id)
    w.raw(sk.backend.encode_scalar(sk.scalar))
    return w.getvalue()


def decode_secret_key(data: bytes) -> SecretKey:
    r = _Reader(data, ArtifactType.SECRET_KEY)
    backend = backend_by_id(r.u8())
    s = backend.decode_scalar(r.take(32))
    r.end()
    if s == 0:
        raise ArtifactFormatError("secret scalar is zero")
    return SecretKey(backend, s)


def encode_signature(sig: DatasetSignature) -> bytes:
    w = _Writer(ArtifactType.SIGNATURE)
    w.u8(sig.gamma.backend.backend_id)
    w.element(sig.gamma)
    return w.getvalue()


def decode_signature(data: bytes) -> DatasetSignature:
    r = _Reader(data, ArtifactType.SIGNATURE)
    backend = backend_by_id(r.u8())
    gamma = r.element(backend)
    r.end()
    return DatasetSignature(gamma)


# ---------------- proof ----------------
def encode_proof(proof: Proof) -> bytes:
    backend = proof.backend
    p = backend.order
    w = _Writer(ArtifactType.PROOF)
    w.u8(backend.backend_id)
    w.u8(proof.mode.code)
    w.u8(proof.fractional_bits)
    w.u32(proof.size)
    w.u32(proof.input_dim)
    w.u32(len(proof.hidden_sizes))
    for d in proof.hidden_sizes:
        w.u32(d)
    # π_E
    w.scaled(proof.s1, p)
    w.scaled(proof.s2, p)
    # π_T
    if proof.mode is ProofMode.UNIQUE:
        entries = unique_commitments(proof)
        table = {(c.to_bytes(), flag.to_byte()): i for i, (c, flag) in enumerate(entries)}
        w.u32(len(entries))
        for c, flag in entries:
            w.element(c)
            w.u8(flag.to_byte())
        for d in proof.digests:
            for c, flag in zip(d.feature_commitments, d.sign_flags):
                w.u32(table[(c.to_bytes(), flag.to_byte())])
            w.element(d.label_commitment)
            w.u8(d.sign_flags[-1].to_byte())
    else:
        for d in proof.digests:
            for c in d.commitments:
                w.element(c)
            w.raw(bytes(f.to_byte() for f in d.sign_flags))
    # π_W
    for s in proof.witnesses:
        for z in (*s.z, *s.z_hat):
            w.split(z, p)
        w.element(s.delta_out)
        for v in s.delta_last:
            w.scaled(v, p)
    for row in proof.layer1_increments:
        for a in row:
            w.split(a, p)
    for b in proof.output_increments:
        w.scaled(b, p)
    return w.getvalue()


def decode_proof(data: bytes) -> Proof:
    r = _Reader(data, ArtifactType.PROOF)
    backend = backend_by_id(r.u8())
    p = backend.order
    mode = ProofMode.from_code(r.u8())
    bits = r.u8()
    n, m = r.u32(), r.u32()
    depth = r.u32()
    if depth < 1 or depth > 64:
        raise ArtifactFormatError(f"implausible layer count {depth}")
    hidden = tuple(r.u32() for _ in range(depth))
    if n < 1 or m < 1 or any(d < 1 for d in hidden):
        raise ArtifactFormatError("empty dimension in proof header")
    s1, s2 = r.scaled(p), r.scaled(p)

    digests: List[SampleDigest] = []
    if mode is ProofMode.UNIQUE:
        count = r.u32()
        entries = [(r.element(backend), r.sign()) for _ in range(count)]
        for _ in range(n):
            feats, flags = [], []
            for _ in range(m):
                idx = r.u32()
                if idx >= count:
                    raise ArtifactFormatError(f"dictionary index {idx} out of range")
                feats.append(entries[idx][0])
                flags.append(entries[idx][1])
            label = r.element(backend)
            flags.append(r.sign())
            digests.append(SampleDigest(tuple(feats), label, tuple(flags)))
    else:
        for _ in range(n):
            feats = tuple(r.element(backend) for _ in range(m))
            label = r.element(backend)
            flags = tuple(r.sign() for _ in range(m + 1))
            digests.append(SampleDigest(feats, label, flags))
    for d in digests:
        if d.label_commitment.g2 is None:
            raise ArtifactFormatError("label commitment lacks its G2 form")

    d1, dl = hidden[0], hidden[-1]
    witnesses = []
    for _ in range(n):
        z = tuple(r.split(p) for _ in range(d1))
        z_hat = tuple(r.split(p) for _ in range(d1))
        delta_out = r.element(backend)
        delta_last = tuple(r.scaled(p) for _ in range(dl))
        witnesses.append(SampleWitness(z, z_hat, delta_out, delta_last))
    layer1 = tuple(tuple(r.split(p) for _ in range(d1)) for _ in range(m))
    output = tuple(r.scaled(p) for _ in range(dl))
    r.end()
    return Proof(backend, mode, bits, m, hidden, s1, s2, tuple(digests), tuple(witnesses), layer1, output)


# ---------------- models and datasets ----------------
def encode_model(model: ModelState) -> bytes:
    w = _Writer(ArtifactType.MODEL)
    sizes = (model.hidden[0].shape[0], *(h.shape[1] for h in model.hidden))
    w.u32(len(sizes))
    for s in sizes:
        w.u32(s)
    for arr in model.arrays():
        w.raw(np.ascontiguousarray(arr, dtype=">f8").tobytes())
    return w.getvalue()


def decode_model(data: bytes) -> ModelState:
    r = _Reader(data, ArtifactType.MODEL)
    count = r.u32()
    if count < 2 or count > 65:
        raise ArtifactFormatError(f"implausible layer count {count}")
    sizes = [r.u32() for _ in range(count)]
    if any(s < 1 for s in sizes):
        raise ArtifactFormatError("zero-width layer")

    def read(shape: Tuple[int, ...]) -> np.ndarray:
        size = int(np.prod(shape))
        arr = np.frombuffer(r.take(8 * size), dtype=">f8").astype(np.float64).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise ArtifactFormatError("non-finite weight")
        return arr

    hidden = [read((a, b)) for a, b in zip(sizes, sizes[1:])]
    output = read((sizes[-1],))
    r.end()
    return ModelState(hidden, output)


def encode_dataset(dataset: QuantizedDataset) -> bytes:
    order = dataset.params.field_order
    w = _Writer(ArtifactType.DATASET)
    w.u8(dataset.params.fractional_bits)
    w.u32(dataset.size)
    w.u32(dataset.input_dim)
    for row, label in dataset.rows():
        for v in (*row, label):
            w.signed(v, order)
    return w.getvalue()


def decode_dataset(data: bytes, params: Optional[CodecParams] = None) -> QuantizedDataset:
    r = _Reader(data, ArtifactType.DATASET)
    bits = r.u8()
    params = params or CodecParams(fractional_bits=bits)
    if params.fractional_bits != bits:
        raise ArtifactFormatError(f"dataset quantized with L={bits}, expected {params.fractional_bits}")
    n, m = r.u32(), r.u32()
    features, labels = [], []
    for _ in range(n):
        values = [r.signed(params.field_order) for _ in range(m + 1)]
        features.append(tuple(values[:m]))
        labels.append(values[m])
    r.end()
    return QuantizedDataset(tuple(features), tuple(labels), params)


# ---------------- bundles and reports ----------------
def encode_bundle(kind: ArtifactType, parts: Dict[str, bytes]) -> bytes:
    w = _Writer(kind)
    w.u32(len(parts))
    for name, payload in parts.items():
        raw = name.encode("utf-8")
        w.u8(len(raw))
        w.raw(raw)
        w.blob(payload)
    return w.getvalue()


def decode_bundle(data: bytes, kind: ArtifactType) -> Dict[str, bytes]:
    r = _Reader(data, kind)
    out: Dict[str, bytes] = {}
    for _ in range(r.u32()):
        try:
            name = r.take(r.u8()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ArtifactFormatError(f"bad bundle entry name: {exc}") from exc
        out[name] = r.blob()
    r.end()
    return out


def encode_json(kind: ArtifactType, payload: Dict[str, Any]) -> bytes:
    w = _Writer(kind)
    w.blob(json.dumps(payload, sort_keys=True).encode("utf-8"))
    return w.getvalue()


def decode_json(data: bytes, kind: ArtifactType) -> Dict[str, Any]:
    r = _Reader(data, kind)
    raw = r.blob()
    r.end()
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactFormatError(f"bad JSON payload: {exc}") from exc


# ---------------- files ----------------
def write_artifact(path: Union[str, Path], data: bytes) -> Path:
    artifact_type(data)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(data)
    return out


def read_artifact(path: Union[str, Path], kind: ArtifactType) -> bytes:
    data = Path(path).read_bytes()
    found = artifact_type(data)
    if found != kind:
        raise ArtifactFormatError(f"{path}: expected a {kind.name} artifact, found {found.name}")
    return data
