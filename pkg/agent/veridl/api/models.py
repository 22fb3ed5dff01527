from typing import Optional

from sqlmodel import Field, SQLModel


class VerificationRun(SQLModel, table=True):
    __tablename__ = "verification_runs"

    id: Optional[int] = Field(default=None, primary_key=True)
    created_at: str
    verdict: str
    failed_step: str
    detail: str = "{}"
    samples: int
    input_dim: int
    hidden_sizes: str
    mode: str
    proof_bytes: int
    duration_ms: float
    source: str = "api"


class SoundnessResult(SQLModel, table=True):
    __tablename__ = "soundness_results"

    id: Optional[int] = Field(default=None, primary_key=True)
    created_at: str
    kind: str
    config_id: str
    trial: int
    verdict: str
    failed_step: str
    expected_step: str
    error_gap: Optional[float] = None
