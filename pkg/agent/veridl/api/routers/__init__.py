from . import health, reports, verify  # noqa: F401
