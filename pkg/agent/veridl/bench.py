"""Proof size and timing across first-layer widths."""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO

import numpy as np

from .artifacts import encode_proof
from .codec import CodecParams
from .datasets import QuantizedDataset
from .dnn.network import NetworkConfig
from .dnn.training import initial_model, train_to_convergence
from .metrics import ResourceSampler, StageTimer
from .pairing import PublicKey, SecretKey
from .protocol import ProofMode, certify, setup, verify

_log = logging.getLogger(__name__)


@dataclass
class BenchRow:
    width: int
    parameters: int
    size_driver: int
    proof_bytes_basic: int
    proof_bytes_unique: int
    epochs: int
    train_s: float
    certify_s: float
    verify_s: float
    peak_rss_mb: float
    verdict: str


COLUMNS = [f.name for f in dataclasses.fields(BenchRow)]


def size_driver(n: int, m: int, d1: int) -> int:
    """N·(m + d_1) + m·d_1: what the proof grows with when only d_1 moves."""
    return n * (m + d1) + m * d1


def bench(
    widths: Sequence[int],
    dataset: QuantizedDataset,
    secret: SecretKey,
    public: PublicKey,
    base: NetworkConfig,
    params: CodecParams,
    *,
    seed: int = 0,
) -> List[BenchRow]:
    """One honest train/certify/verify per width; later hidden layers keep ``base``'s sizes."""
    if not widths:
        raise ValueError("no widths to bench")
    data = dataset.batch(base.batch_size)
    signature = setup(data, secret, public)
    rows: List[BenchRow] = []
    for width in widths:
        network = dataclasses.replace(base, hidden_sizes=(int(width), *base.hidden_sizes[1:]))
        timer = StageTimer()
        with ResourceSampler() as sampler:
            with timer.measure("train"):
                training = train_to_convergence(initial_model(network, seed), network, data, params)
            with timer.measure("certify"):
                proof = certify(data, training.initial, training.update, training.rounds, public, params)
            with timer.measure("verify"):
                report = verify(training.initial, training.update, proof, signature, public, network, params)
        basic = len(encode_proof(proof))
        unique = len(encode_proof(dataclasses.replace(proof, mode=ProofMode.UNIQUE)))
        rows.append(
            BenchRow(
                width=int(width),
                parameters=network.parameter_count,
                size_driver=size_driver(data.size, data.input_dim, int(width)),
                proof_bytes_basic=basic,
                proof_bytes_unique=unique,
                epochs=training.epochs,
                train_s=timer.seconds("train"),
                certify_s=timer.seconds("certify"),
                verify_s=timer.seconds("verify"),
                peak_rss_mb=sampler.peak_rss_mb,
                verdict=report.verdict.value,
            )
        )
        _log.info("bench d1=%d: %d bytes, verify %.3fs (%s)", width, basic, timer.seconds("verify"), report.verdict.value)
    return rows


def fit_r2(x: Sequence[float], y: Sequence[float]) -> float:
    """R² of the least-squares line through (x, y)."""
    xs, ys = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if xs.size < 2 or xs.size != ys.size:
        raise ValueError("need at least two paired points")
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - float(np.sum(residual**2)) / ss_tot


def write_bench_csv(rows: Iterable[BenchRow], out: Optional[TextIO] = None) -> str:
    buf = out or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([getattr(r, c) for c in COLUMNS])
    return buf.getvalue() if out is None else ""
