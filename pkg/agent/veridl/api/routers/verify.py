from __future__ import annotations

import base64
import binascii
import logging
from typing import Any, Dict, Optional

from fastapi import APIRouter
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ... import artifacts as art
from ...config import load_run_config
from ...errors import VeriDLError
from ...roles import verify_submission
from ..store import Ledger

router = APIRouter()
_log = logging.getLogger(__name__)


class VerifyRequest(BaseModel):
    publicKey: str
    signature: str
    initial: str
    updates: str
    proof: str
    network: Optional[Dict[str, Any]] = None


def _unprocessable(code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=422, content={"success": False, "error": code, "message": message})


def _b64(name: str, value: str) -> bytes:
    try:
        return base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError) as e:
        raise art.ArtifactFormatError(f"{name}: not base64 ({e})") from e


@router.post("/verify")
def post_verify(body: VerifyRequest):
    try:
        proof_raw = _b64("proof", body.proof)
        public = art.decode_public_key(_b64("publicKey", body.publicKey))
        signature = art.decode_signature(_b64("signature", body.signature))
        initial = art.decode_model(_b64("initial", body.initial))
        update = art.decode_model(_b64("updates", body.updates))
        proof = art.decode_proof(proof_raw)
        cfg = load_run_config(None, **(body.network or {}))
        report = verify_submission(initial, update, proof, signature, public, cfg)
    except VeriDLError as e:
        _log.warning("verify request refused: %s %s", e.code, e)
        return _unprocessable(e.code, str(e))
    run = Ledger.instance().record_run(report, proof, proof_bytes=len(proof_raw))
    return {
        "runId": run.id,
        "verdict": report.verdict.value,
        "failedStep": report.failed_step.value,
        "detail": report.detail,
        "durationMs": int(report.duration_s * 1000),
    }
