"""Request/response models of the inference service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    config: str = Field(description="configuration file contents")
    mode: str = Field(default="infer")
    seed: Optional[int] = None
    outputdir: Optional[str] = None
    serial: bool = False


class RunCreated(BaseModel):
    id: str
    state: str


class RunStatus(BaseModel):
    id: str
    mode: str
    state: str  # queued | running | done | failed
    created: float
    finished: Optional[float] = None
    error: Optional[str] = None
    outputdir: Optional[str] = None
    summary: Optional[dict[str, Any]] = None


class RunList(BaseModel):
    runs: list[RunStatus]


class ParametersResponse(BaseModel):
    labels: list[str]
    columns: list[str]
    rows: list[list[float]]


class ReportResponse(BaseModel):
    batches: int
    burnin: int
    acceptance: float
    ess: Optional[float] = None
    thin: Optional[int] = None
    metrics: dict[str, float]
    qq_slope: Optional[float] = None
    report: str


class SynthesizeRequest(BaseModel):
    config: str
    seed: Optional[int] = None


class SynthesizeResponse(BaseModel):
    parameters: dict[str, float]
    predictions: str  # loader-compatible file contents
    dataset: Optional[str] = None


class ModelTestRequest(BaseModel):
    config: str
    seed: Optional[int] = None


class ModelTestResponse(BaseModel):
    passed: bool
    checks: dict[str, bool]


class HealthResponse(BaseModel):
    status: str
    version: str
