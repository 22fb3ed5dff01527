from __future__ import annotations

import logging
import os
import secrets
from typing import Callable, Optional

from fastapi import Request
from fastapi.responses import JSONResponse

OPEN_PATHS = ("/health", "/version")


def get_or_create_token() -> str:
    tok = os.environ.get("VERIDL_AGENT_TOKEN")
    if not tok:
        tok = secrets.token_urlsafe(24)
        os.environ["VERIDL_AGENT_TOKEN"] = tok
    return tok


def mask(token: Optional[str]) -> Optional[str]:
    return (token[:4] + "…" + token[-4:]) if token else None


def auth_middleware() -> Callable:
    token = get_or_create_token()

    async def middleware(request: Request, call_next):
        path = request.url.path or ""
        if path in OPEN_PATHS or request.method == "OPTIONS":
            return await call_next(request)

        hdr = request.headers.get("x-agent-token") or request.headers.get("authorization")
        provided = None
        if hdr:
            provided = hdr.split(" ", 1)[1] if hdr.lower().startswith("bearer ") else hdr
        if not provided or not secrets.compare_digest(provided, token):
            logging.getLogger(__name__).debug(
                "Auth failed path=%s provided=%s expected=%s", path, mask(provided), mask(token)
            )
            resp = JSONResponse(
                status_code=401,
                content={"success": False, "error": "PERMISSION_DENIED", "message": "Missing or invalid token"},
            )
            resp.headers["WWW-Authenticate"] = "Bearer realm=veridl-agent"
            return resp
        return await call_next(request)

    return middleware
