from __future__ import annotations

import logging
import os
import platform
import sys

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from ..config import configure_logging, load_run_config
from .routers import health, reports, verify
from .security import auth_middleware, get_or_create_token
from .store import Ledger
from .version import VERSION

_log = logging.getLogger(__name__)


def _log_stack() -> None:
    import fastapi as _fastapi
    import numpy as _numpy
    import sqlalchemy as _sqlalchemy
    import sqlmodel as _sqlmodel
    import uvicorn as _uvicorn

    _log.info(
        "Tech stack: %s",
        {
            "python": sys.version.split()[0],
            "platform": platform.platform(),
            "fastapi": getattr(_fastapi, "__version__", "unknown"),
            "sqlalchemy": getattr(_sqlalchemy, "__version__", "unknown"),
            "sqlmodel": getattr(_sqlmodel, "__version__", "unknown"),
            "uvicorn": getattr(_uvicorn, "__version__", "unknown"),
            "numpy": getattr(_numpy, "__version__", "unknown"),
        },
    )


def create_app() -> FastAPI:
    configure_logging()
    app = FastAPI(title="VeriDL Verifier Agent", version=VERSION)
    app.middleware("http")(auth_middleware())
    _log_stack()

    allow_origins = [
        os.environ.get("VERIDL_CORS_ORIGIN", "http://127.0.0.1:5173"),
        "http://localhost:5173",
    ]
    app.add_middleware(
        CORSMiddleware,
        allow_origins=allow_origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    app.include_router(health.router)
    app.include_router(verify.router)
    app.include_router(reports.router)
    get_or_create_token()
    location = load_run_config().ledger
    if location:
        Ledger.configure(location)
    else:
        Ledger.instance()
    return app
