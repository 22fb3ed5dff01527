from __future__ import annotations

import json
import logging
import os
import socket
import sys
from pathlib import Path
from typing import Optional

from ..config import configure_logging, veridl_home
from .security import get_or_create_token, mask

_log = logging.getLogger(__name__)

DEFAULT_PORT = 5185
STRICT_PORT_EXIT = 97


def choose_port(preferred: int, host: str = "127.0.0.1") -> int:
    """The preferred port if free; else any free port, or exit 97 under VERIDL_STRICT_PORT."""
    strict = os.environ.get("VERIDL_STRICT_PORT", "0").lower() not in ("0", "false", "")
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            s.bind((host, preferred))
            return preferred
        except OSError:
            if strict:
                print(f"Port {preferred} busy and strict mode enabled", file=sys.stderr)
                sys.exit(STRICT_PORT_EXIT)
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind((host, 0))
        return s.getsockname()[1]


def write_lockfile(port: int, token: str) -> Optional[Path]:
    data = {"pid": os.getpid(), "port": port, "token": token}
    for folder, name in ((veridl_home, "agent.lock.json"), (Path.cwd, "agent.dev.lock.json")):
        try:
            path = folder() / name
            path.write_text(json.dumps(data))
            _log.info("Lockfile: %s (token %s)", path, mask(token))
            return path
        except OSError as e:
            _log.warning("Lockfile write failed (%s): %s", name, e)
    return None


def run(host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
    import uvicorn

    from .app import create_app

    _log.info("Starting uvicorn server at http://%s:%d", host, port)
    uvicorn.run(create_app(), host=host, port=port, log_level=os.environ.get("UVICORN_LOG", "info"))


def launch(host: Optional[str] = None, port: Optional[int] = None) -> None:
    """Pick the port, make sure a token exists, write the lockfile, serve."""
    configure_logging()
    host = host or os.environ.get("VERIDL_AGENT_HOST", "127.0.0.1")
    preferred = port or int(os.environ.get("VERIDL_AGENT_PORT", str(DEFAULT_PORT)))
    token = get_or_create_token()
    chosen = choose_port(preferred, host=host)
    os.environ["VERIDL_AGENT_PORT"] = str(chosen)
    write_lockfile(chosen, token)
    run(host=host, port=chosen)
