from __future__ import annotations

import datetime as _dt
import json
import logging
import threading
from typing import Iterable, List, Optional

from sqlalchemy.pool import StaticPool
from sqlmodel import Session, SQLModel, create_engine, select

from ..adversary import SoundnessRow
from ..config import veridl_home
from ..protocol import Proof, VerificationReport
from .models import SoundnessResult, VerificationRun


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def ledger_url(location: Optional[str] = None) -> str:
    """A SQLAlchemy URL; bare paths become sqlite files, None means VERIDL_HOME/ledger.db."""
    if location and "://" in location:
        return location
    path = location or str(veridl_home() / "ledger.db")
    return f"sqlite:///{path}"


class Ledger:
    """Process-wide record of verification runs and soundness-matrix rows."""

    _inst: Optional["Ledger"] = None
    _lock = threading.Lock()

    def __init__(self, url: Optional[str] = None) -> None:
        self._mtx = threading.RLock()
        self.url = ledger_url(url)
        kwargs = {}
        if self.url.startswith("sqlite"):
            kwargs["connect_args"] = {"check_same_thread": False}
            if self.url in ("sqlite://", "sqlite:///:memory:"):
                kwargs["poolclass"] = StaticPool
        self.engine = create_engine(self.url, **kwargs)
        SQLModel.metadata.create_all(self.engine)
        self._log = logging.getLogger(__name__)
        self._log.info("ledger at %s", self.url)

    @classmethod
    def instance(cls) -> "Ledger":
        with cls._lock:
            if cls._inst is None:
                cls._inst = Ledger()
            return cls._inst

    @classmethod
    def configure(cls, url: Optional[str]) -> "Ledger":
        """Replace the singleton (tests and explicit ``ledger`` config)."""
        with cls._lock:
            if cls._inst is not None:
                cls._inst.engine.dispose()
            cls._inst = Ledger(url)
            return cls._inst

    # ---------------- runs ----------------
    def record_run(
        self, report: VerificationReport, proof: Proof, *, proof_bytes: int, source: str = "api"
    ) -> VerificationRun:
        row = VerificationRun(
            created_at=_now_iso(),
            verdict=report.verdict.value,
            failed_step=report.failed_step.value,
            detail=json.dumps(report.detail, sort_keys=True, default=str),
            samples=proof.size,
            input_dim=proof.input_dim,
            hidden_sizes=",".join(str(d) for d in proof.hidden_sizes),
            mode=proof.mode.value,
            proof_bytes=proof_bytes,
            duration_ms=report.duration_s * 1000.0,
            source=source,
        )
        with self._mtx, Session(self.engine) as s:
            s.add(row)
            s.commit()
            s.refresh(row)
        return row

    def list_runs(self, limit: Optional[int] = None) -> List[VerificationRun]:
        with self._mtx, Session(self.engine) as s:
            q = select(VerificationRun).order_by(VerificationRun.id)
            if limit:
                q = q.limit(limit)
            return list(s.exec(q).all())

    # ---------------- soundness ----------------
    def record_soundness(self, rows: Iterable[SoundnessRow]) -> int:
        now = _now_iso()
        items = [
            SoundnessResult(
                created_at=now,
                kind=r.kind,
                config_id=r.config_id,
                trial=r.trial,
                verdict=r.verdict,
                failed_step=r.failed_step,
                expected_step=r.expected_step,
                error_gap=r.error_gap,
            )
            for r in rows
        ]
        with self._mtx, Session(self.engine) as s:
            s.add_all(items)
            s.commit()
        return len(items)

    def list_soundness(self, kind: Optional[str] = None) -> List[SoundnessResult]:
        with self._mtx, Session(self.engine) as s:
            q = select(SoundnessResult).order_by(SoundnessResult.id)
            if kind:
                q = q.where(SoundnessResult.kind == kind)
            return list(s.exec(q).all())
