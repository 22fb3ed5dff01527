from __future__ import annotations

from typing import Any


class VeriDLError(Exception):
    """Base error. `code` follows the agent's upper-snake error codes; `exit_code` is what the CLI returns."""

    code = "VERIDL_ERROR"
    exit_code = 1

    def __init__(self, message: str = "", **context: Any) -> None:
        super().__init__(message or self.code)
        self.context = context

    def to_dict(self) -> dict:
        return {"success": False, "error": self.code, "message": str(self), **self.context}


class CodecOverflowError(VeriDLError, ValueError):
    code = "CODEC_OVERFLOW"
    exit_code = 4


class RangeViolationError(VeriDLError, ValueError):
    code = "RANGE_VIOLATION"


class ScaleLedgerError(VeriDLError, ValueError):
    code = "SCALE_MISMATCH"


class UnsupportedSecurityLevel(VeriDLError, ValueError):
    code = "UNSUPPORTED_LAMBDA"
    exit_code = 4


class ConfigError(VeriDLError, ValueError):
    code = "CONFIG_INVALID"
    exit_code = 4


class DatasetParseError(VeriDLError, ValueError):
    code = "CSV_PARSE"
    exit_code = 4

    def __init__(self, message: str, *, line: int | None = None, **context: Any) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, line=line, **context)
        self.line = line


class ConvergenceError(VeriDLError, RuntimeError):
    code = "NO_CONVERGENCE"
    exit_code = 5


class MalformedProofError(VeriDLError, ValueError):
    code = "MALFORMED_PROOF"


class ArtifactFormatError(MalformedProofError):
    code = "BAD_ARTIFACT"


class WireProtocolError(VeriDLError):
    code = "WIRE_PROTOCOL"
    exit_code = 6


class UnknownAttackError(VeriDLError, ValueError):
    code = "UNKNOWN_ATTACK"
    exit_code = 7
