"""Service operations shared by the HTTP app and the in-process CLI client."""

from __future__ import annotations

import dataclasses

from ..cluster import Mode, builtin_devices
from ..config import ConfigError, parse_config, with_overrides
from ..fidelity import format_report, run_fidelity
from ..models import (builtin_specs, fc_flops_per_token, fc_param_count,
                      get_model, kv_bytes_per_token, kv_cache_bytes, max_batch)
from ..sweep import reports_to_csv, run_sweep
from .schemas import (DeviceInfo, FidelityRequest, FidelityResponse,
                      HealthResponse, ModelInfo, SizingRequest, SizingResponse,
                      SweepRequest, SweepResponse)


def health() -> HealthResponse:
    return HealthResponse()


def list_devices() -> list[DeviceInfo]:
    return [DeviceInfo(name=d.name, kind=d.kind, mem_capacity=d.mem_capacity,
                       mem_bandwidth=d.mem_bandwidth, peak_compute=d.peak_compute,
                       link_bandwidth=d.link_bandwidth, max_power=d.max_power,
                       op_cost=d.op_cost, hw_cost=d.hw_cost)
            for d in builtin_devices().values()]


def list_models() -> list[ModelInfo]:
    return [ModelInfo(name=s.name, n_l=s.n_l, n_h=s.n_h, d_h=s.d_h, d_in=s.d_in,
                      d_out=s.d_out, g=s.g, context_window=s.context_window,
                      bytes_per_elem=s.bytes_per_elem)
            for s in builtin_specs()]


def sizing(req: SizingRequest) -> SizingResponse:
    try:
        spec = get_model(req.model)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]))
    resident = req.resident_tokens if req.resident_tokens else max(req.context, 1)
    weight_bytes = fc_param_count(spec) * spec.bytes_per_elem
    free = req.free_bytes
    if free is None:
        # no budget given: assume one default GPU holding the weights
        free = max(builtin_devices()["A100-80GB"].mem_capacity - weight_bytes, 0)
    return SizingResponse(
        model=spec.name, batch=req.batch, context=req.context,
        kv_bytes_per_token=kv_bytes_per_token(spec),
        kv_cache_bytes=kv_cache_bytes(spec, req.batch, req.context),
        fc_param_bytes=weight_bytes,
        fc_flops_per_token=fc_flops_per_token(spec),
        max_batch=max_batch(spec, free, resident))


def _mode_from(name: str | None) -> Mode | None:
    if name is None:
        return None
    try:
        return Mode(name.strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in Mode)
        raise ConfigError(f"unknown mode {name!r} (choices: {choices})")


def sweep(req: SweepRequest) -> SweepResponse:
    config = with_overrides(parse_config(req.config), seed=req.seed,
                            mode=_mode_from(req.mode))
    reports = run_sweep(config, jobs=req.jobs)
    n_ok = sum(1 for r in reports if r.status == "ok")
    return SweepResponse(csv=reports_to_csv(reports), n_rows=len(reports),
                         n_ok=n_ok, n_infeasible=len(reports) - n_ok)


def fidelity(req: FidelityRequest) -> FidelityResponse:
    config = with_overrides(parse_config(req.config), seed=req.seed)
    params = config.fidelity
    if req.trace_lines:
        params = dataclasses.replace(params, trace_lines=req.trace_lines)
    report = run_fidelity(params)
    return FidelityResponse(
        recall_curve=list(report.recall_curve),
        steady_curve=list(report.steady_curve),
        policy_compare=report.policy_compare,
        selection_overlap=report.selection_overlap,
        merge_max_rel_err=report.merge_max_rel_err,
        trace=list(report.trace),
        report=format_report(report))
