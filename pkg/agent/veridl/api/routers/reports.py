from __future__ import annotations

import csv
import io
from typing import Optional

from fastapi import APIRouter, Query, Response

from ..store import Ledger

router = APIRouter(prefix="/reports")


@router.get("/runs.csv")
def export_runs(limit: Optional[int] = Query(None, ge=1)) -> Response:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["id", "created_at", "verdict", "failed_step", "samples", "input_dim", "hidden_sizes", "mode", "proof_bytes", "duration_ms", "source"])
    for r in Ledger.instance().list_runs(limit):
        w.writerow([
            r.id, r.created_at, r.verdict, r.failed_step, r.samples, r.input_dim,
            r.hidden_sizes, r.mode, r.proof_bytes, round(r.duration_ms, 3), r.source,
        ])
    return Response(content=buf.getvalue(), media_type="text/csv")


@router.get("/soundness.csv")
def export_soundness(kind: Optional[str] = Query(None)) -> Response:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["kind", "config-id", "trial", "verdict", "failed_step", "|E1'-E1|", "expected_step", "created_at"])
    for r in Ledger.instance().list_soundness(kind):
        gap = "" if r.error_gap is None else repr(r.error_gap)
        w.writerow([r.kind, r.config_id, r.trial, r.verdict, r.failed_step, gap, r.expected_step, r.created_at])
    return Response(content=buf.getvalue(), media_type="text/csv")
