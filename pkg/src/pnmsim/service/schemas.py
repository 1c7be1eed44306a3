"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"


class DeviceInfo(BaseModel):
    name: str
    kind: str
    mem_capacity: int
    mem_bandwidth: float
    peak_compute: float
    link_bandwidth: float
    max_power: float
    op_cost: float
    hw_cost: float


class ModelInfo(BaseModel):
    name: str
    n_l: int
    n_h: int
    d_h: int
    d_in: int
    d_out: int
    g: int
    context_window: int
    bytes_per_elem: int


class SizingRequest(BaseModel):
    model: str = "Llama3.1-8B"
    batch: int = Field(default=1, ge=0)
    context: int = Field(default=131072, ge=0)
    free_bytes: int | None = None
    resident_tokens: int | None = Field(default=None, ge=1)


class SizingResponse(BaseModel):
    model: str
    batch: int
    context: int
    kv_bytes_per_token: int
    kv_cache_bytes: int
    fc_param_bytes: int
    fc_flops_per_token: int
    max_batch: int


class SweepRequest(BaseModel):
    config: str = ""  # experiment config text; empty uses defaults
    seed: int | None = None
    mode: str | None = None
    jobs: int = Field(default=1, ge=1)


class SweepResponse(BaseModel):
    csv: str
    n_rows: int
    n_ok: int
    n_infeasible: int


class FidelityRequest(BaseModel):
    config: str = ""
    seed: int | None = None
    trace_lines: int = Field(default=0, ge=0)


class FidelityResponse(BaseModel):
    recall_curve: list[tuple[int, float]]
    steady_curve: list[tuple[int, int, float]]
    policy_compare: tuple[float, float]
    selection_overlap: float
    merge_max_rel_err: float
    trace: list[str]
    report: str
