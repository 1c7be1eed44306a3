"""HTTP front-end over the simulator operations."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..config import ConfigError
from . import ops
from .schemas import (DeviceInfo, FidelityRequest, FidelityResponse,
                      HealthResponse, ModelInfo, SizingRequest, SizingResponse,
                      SweepRequest, SweepResponse)


def create_app() -> FastAPI:
    app = FastAPI(title="pnmsim", version="0.1.0")

    @app.exception_handler(ConfigError)
    async def _config_error(_: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return ops.health()

    @app.get("/devices", response_model=list[DeviceInfo])
    def devices() -> list[DeviceInfo]:
        return ops.list_devices()

    @app.get("/models", response_model=list[ModelInfo])
    def models() -> list[ModelInfo]:
        return ops.list_models()

    @app.post("/sizing", response_model=SizingResponse)
    def sizing(req: SizingRequest) -> SizingResponse:
        return ops.sizing(req)

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest) -> SweepResponse:
        return ops.sweep(req)

    @app.post("/fidelity", response_model=FidelityResponse)
    def fidelity(req: FidelityRequest) -> FidelityResponse:
        return ops.fidelity(req)

    return app


app = create_app()
