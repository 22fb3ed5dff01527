import os
import platform
import sys

from fastapi import APIRouter

from ..version import VERSION

router = APIRouter()


def _version_of(module: str) -> str:
    try:
        mod = __import__(module)
    except ImportError:
        return "missing"
    return getattr(mod, "__version__", "installed")


@router.get("/health")
def get_health():
    return {"status": "ok", "agent": "veridl-agent", "version": VERSION}


@router.get("/version")
def get_version():
    return {
        "appVersion": VERSION,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        **{name: _version_of(name) for name in ("fastapi", "sqlalchemy", "sqlmodel", "uvicorn", "py_ecc", "numpy")},
        "port": int(os.environ.get("VERIDL_AGENT_PORT", "0") or 0) or None,
    }
