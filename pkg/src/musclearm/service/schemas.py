"""Request and response models for the pipeline service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..experiment import ExperimentConfig


class StageRequest(BaseModel):
    config: ExperimentConfig
    out_dir: str


class EvaluateRequest(StageRequest):
    use_feedback: bool = False


class AbundanceRequest(StageRequest):
    goal_ids: list[int] | None = None


class PredictRequest(BaseModel):
    out_dir: str
    goal: tuple[float, float, float]


class StageResponse(BaseModel):
    stage: str
    config_hash: str
    seed: int
    summary: dict
    files: list[str] = Field(default_factory=list)


class PredictResponse(BaseModel):
    goal: tuple[float, float, float]
    pressures: list[float]
    units: int


class HealthResponse(BaseModel):
    status: str
    version: str
