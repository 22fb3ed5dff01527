"""Length-prefixed frames for the three-process demo.

A frame is a 4-byte big-endian payload length, one type byte and the payload,
which is the canonical artifact for that step (HELLO and ERROR carry UTF-8
JSON). Every connection carries exactly one request and one response.
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Dict, Optional, Tuple

from .adversary import AttackSpec
from .api.version import VERSION
from .artifacts import ArtifactType, decode_json, decode_signature, encode_json, encode_signature
from .config import RunConfig, network_for
from .datasets import QuantizedDataset
from .dnn.network import ModelState
from .errors import VeriDLError, WireProtocolError
from .pairing import PublicKey, SecretKey
from .protocol import DatasetSignature
from .roles import owner_setup, read_result, read_task, result_bundle, task_bundle, train_and_certify, verify_submission

_log = logging.getLogger(__name__)

HEADER = struct.Struct(">IB")
MAX_FRAME = 1 << 30


class FrameType(IntEnum):
    HELLO = 0x01
    SIGNATURE = 0x02
    TASK = 0x03
    RESULT = 0x04
    VERDICT = 0x05
    ERROR = 0x7F


Frame = Tuple[FrameType, bytes]


def encode_frame(ftype: FrameType, payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME:
        raise WireProtocolError(f"payload of {len(payload)} bytes exceeds the frame limit")
    return HEADER.pack(len(payload), int(ftype)) + payload


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(min(remaining, 1 << 16))
        if not chunk:
            raise WireProtocolError(f"connection closed with {remaining} of {n} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Frame:
    length, raw_type = HEADER.unpack(_recv_exact(sock, HEADER.size))
    if length > MAX_FRAME:
        raise WireProtocolError(f"frame too large: {length} bytes")
    try:
        ftype = FrameType(raw_type)
    except ValueError:
        raise WireProtocolError(f"unknown frame type {raw_type:#04x}") from None
    return ftype, _recv_exact(sock, length)


def write_frame(sock: socket.socket, ftype: FrameType, payload: bytes) -> None:
    sock.sendall(encode_frame(ftype, payload))


def json_payload(obj: Dict[str, Any]) -> bytes:
    return json.dumps(obj, sort_keys=True).encode("utf-8")


def error_frame(code: str, message: str) -> Frame:
    return FrameType.ERROR, json_payload({"success": False, "error": code, "message": message})


def exchange(host: str, port: int, ftype: FrameType, payload: bytes, *, timeout: float = 600.0) -> Frame:
    """One request/response round trip; an ERROR reply raises WireProtocolError."""
    with socket.create_connection((host, port), timeout=timeout) as sock:
        write_frame(sock, ftype, payload)
        sock.shutdown(socket.SHUT_WR)
        reply = read_frame(sock)
    if reply[0] is FrameType.ERROR:
        try:
            body = json.loads(reply[1].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            body = {"error": "WIRE_PROTOCOL", "message": reply[1][:200].decode("utf-8", "replace")}
        raise WireProtocolError(f"peer error {body.get('error')}: {body.get('message')}", peer=body)
    return reply


# ---------------- roles ----------------
class Role(ABC):
    name = "role"

    def hello(self) -> Frame:
        return FrameType.HELLO, json_payload({"role": self.name, "version": VERSION})

    def dispatch(self, ftype: FrameType, payload: bytes) -> Frame:
        if ftype is FrameType.HELLO:
            return self.hello()
        try:
            return self.handle(ftype, payload)
        except VeriDLError as e:
            _log.warning("%s: %s rejected: %s", self.name, ftype.name, e)
            return error_frame(e.code, str(e))
        except Exception as e:
            _log.exception("%s: %s failed", self.name, ftype.name)
            return error_frame("ROLE_FAILED", f"{type(e).__name__}: {e}")

    @abstractmethod
    def handle(self, ftype: FrameType, payload: bytes) -> Frame: ...


class VerifierRole(Role):
    """Holds the owner's public key; learns the signature, then judges results."""

    name = "verifier"

    def __init__(self, public: PublicKey, cfg: RunConfig) -> None:
        self.public = public
        self.cfg = cfg
        self.signature: Optional[DatasetSignature] = None

    def handle(self, ftype: FrameType, payload: bytes) -> Frame:
        if ftype is FrameType.SIGNATURE:
            self.signature = decode_signature(payload)
            return FrameType.HELLO, json_payload({"role": self.name, "ack": "signature"})
        if ftype is FrameType.RESULT:
            if self.signature is None:
                return error_frame("NO_SIGNATURE", "send the dataset signature before a result")
            initial, update, proof = read_result(payload)
            report = verify_submission(initial, update, proof, self.signature, self.public, self.cfg)
            return FrameType.VERDICT, encode_json(ArtifactType.REPORT, report.to_dict())
        return error_frame("UNEXPECTED_FRAME", f"verifier does not accept {ftype.name}")


class ServerRole(Role):
    name = "server"

    def __init__(self, cfg: RunConfig, attack: Optional[AttackSpec] = None) -> None:
        self.cfg = cfg
        self.attack = attack

    def handle(self, ftype: FrameType, payload: bytes) -> Frame:
        if ftype is not FrameType.TASK:
            return error_frame("UNEXPECTED_FRAME", f"server does not accept {ftype.name}")
        dataset, public, initial = read_task(payload, self.cfg.params)
        network = network_for(self.cfg, dataset.input_dim)
        out = train_and_certify(
            dataset, network, self.cfg.params, public, initial=initial, mode=self.cfg.mode, attack=self.attack
        )
        return FrameType.RESULT, result_bundle(out.initial, out.update, out.proof)


class _FrameHandler(socketserver.BaseRequestHandler):
    server: "ArtifactServer"

    def handle(self) -> None:
        sock = self.request
        try:
            ftype, payload = read_frame(sock)
        except WireProtocolError as e:
            _log.warning("bad frame from %s: %s", self.client_address, e)
            reply = error_frame(e.code, str(e))
        else:
            _log.info("%s <- %s (%d bytes)", self.server.role.name, ftype.name, len(payload))
            reply = self.server.role.dispatch(ftype, payload)
        try:
            write_frame(sock, *reply)
        except OSError as e:
            _log.warning("reply to %s failed: %s", self.client_address, e)


class ArtifactServer(socketserver.TCPServer):
    """Sequential accept loop around one role."""

    allow_reuse_address = True

    def __init__(self, address: Tuple[str, int], role: Role) -> None:
        self.role = role
        super().__init__(address, _FrameHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def serve(self, max_requests: Optional[int] = None) -> None:
        if max_requests is None:
            self.serve_forever()
            return
        for _ in range(max_requests):
            self.handle_request()


# ---------------- data owner ----------------
@dataclass
class Endpoint:
    host: str
    port: int


def run_owner(
    dataset: QuantizedDataset,
    secret: SecretKey,
    public: PublicKey,
    initial: ModelState,
    cfg: RunConfig,
    verifier: Endpoint,
    server: Endpoint,
) -> Dict[str, Any]:
    """Sign, hand the signature to the verifier, outsource training, forward the result."""
    network = network_for(cfg, dataset.input_dim)
    signature = owner_setup(dataset, secret, public, network)
    ftype, _ = exchange(verifier.host, verifier.port, FrameType.SIGNATURE, encode_signature(signature))
    if ftype is not FrameType.HELLO:
        raise WireProtocolError(f"verifier answered SIGNATURE with {ftype.name}")
    ftype, result = exchange(server.host, server.port, FrameType.TASK, task_bundle(dataset, public, initial))
    if ftype is not FrameType.RESULT:
        raise WireProtocolError(f"server answered TASK with {ftype.name}")
    ftype, verdict = exchange(verifier.host, verifier.port, FrameType.RESULT, result)
    if ftype is not FrameType.VERDICT:
        raise WireProtocolError(f"verifier answered RESULT with {ftype.name}")
    return decode_json(verdict, ArtifactType.REPORT)
