"""Experiment configuration: flat key=value text with [section] headers.

Sections and keys (all optional; omitted keys take the defaults below):

    [model]    name, plus any ModelSpec field to override
    [cluster]  gpu, pnm (built-in device name or a [device:NAME] section),
               mapping (tp-dp | tp-tp), host_link_bandwidth
    [device:NAME]  kind, mem_capacity, mem_bandwidth, peak_compute,
               link_bandwidth, max_power, op_cost, hw_cost
    [sweep]    modes, contexts, n_gpu, n_pnm, seed, out
    [budget]   page_size, budget_pages, steady_ratio
    [stream]   locality, drift
    [perf]     sorter_rate, b_sat, weight_bytes, step_overhead_s,
               idle_fraction, activation_fields, recall_source,
               churn_probability, batch, trace_streams, trace_steps,
               trace_warmup, trace_dim
    [fidelity] d_h, page_size, context_pages, capacity_pages, budget_pages,
               steady_budget_pages, n_pnm_range, steps, warmup,
               merge_samples, trace_lines

Lists are comma- or whitespace-separated. `#` starts a comment.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

from .cluster import (DeviceSpec, Mapping, Mode, builtin_devices,
                      HOST_LINK_BW)
from .fidelity import FidelityParams
from .models import ModelSpec, get_model, spec_from_mapping
from .perf import PerfParams


class ConfigError(Exception):
    """Unparseable or inconsistent configuration; message names section/key."""


DEFAULT_MODEL = "Llama3.1-8B"
DEFAULT_CONTEXTS = (131072,)
DEFAULT_MODES = (Mode.BASELINE, Mode.PNM_KV, Mode.PNG_KV)
DEFAULT_N_GPUS = (1,)
DEFAULT_N_PNMS = (1, 2, 4, 8)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    gpu: DeviceSpec
    pnm: DeviceSpec
    mapping: Mapping = Mapping.TP_DP
    host_link_bandwidth: float = HOST_LINK_BW
    modes: tuple[Mode, ...] = DEFAULT_MODES
    contexts: tuple[int, ...] = DEFAULT_CONTEXTS
    n_gpus: tuple[int, ...] = DEFAULT_N_GPUS
    n_pnms: tuple[int, ...] = DEFAULT_N_PNMS
    seed: int = 0
    out: str | None = None
    budget_pages: int | None = None
    steady_ratio: float | None = None
    perf: PerfParams = PerfParams()
    fidelity: FidelityParams = FidelityParams()


def default_config() -> ExperimentConfig:
    devices = builtin_devices()
    return ExperimentConfig(model=get_model(DEFAULT_MODEL),
                            gpu=devices["A100-80GB"], pnm=devices["CXL-PNM"])


def _fail(section: str, key: str, problem: str):
    raise ConfigError(f"[{section}] {key}: {problem}")


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        try:
            value = float(raw)  # allow 80e9-style byte counts
        except ValueError:
            raise ValueError(f"{raw!r} is not an integer") from None
        if value != int(value):
            raise ValueError(f"{raw!r} is not an integer")
        return int(value)


def _parse_list(raw: str) -> list[str]:
    return raw.replace(",", " ").split()


def _parse_mode(raw: str) -> Mode:
    try:
        return Mode(raw.strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in Mode)
        raise ValueError(f"{raw!r} is not one of: {choices}")


def _parse_mapping(raw: str) -> Mapping:
    try:
        return Mapping(raw.strip().lower())
    except ValueError:
        choices = ", ".join(m.value for m in Mapping)
        raise ValueError(f"{raw!r} is not one of: {choices}")


class _Section:
    """Typed key access over one config section with diagnostics."""

    def __init__(self, cp: configparser.ConfigParser, name: str, allowed: set[str]):
        self.name = name
        self.raw = dict(cp.items(name)) if cp.has_section(name) else {}
        for key in self.raw:
            if key not in allowed:
                _fail(name, key, f"unknown key (expected one of: {', '.join(sorted(allowed))})")

    def get(self, key: str, cast, default):
        if key not in self.raw:
            return default
        try:
            return cast(self.raw[key])
        except (ValueError, KeyError) as exc:
            _fail(self.name, key, str(exc))

    def get_list(self, key: str, cast, default):
        return self.get(key, lambda raw: tuple(cast(tok) for tok in _parse_list(raw)), default)


_DEVICE_KEYS = {"kind", "mem_capacity", "mem_bandwidth", "peak_compute",
                "link_bandwidth", "max_power", "op_cost", "hw_cost"}


def _resolve_device(cp: configparser.ConfigParser, name: str, expect_kind: str) -> DeviceSpec:
    builtins = builtin_devices()
    if name in builtins:
        return builtins[name]
    section = f"device:{name}"
    if not cp.has_section(section):
        _fail("cluster", expect_kind.lower(),
              f"unknown device {name!r}: not a built-in and no [{section}] section")
    sec = _Section(cp, section, _DEVICE_KEYS)
    try:
        return DeviceSpec(
            kind=sec.get("kind", str.upper, expect_kind),
            name=name,
            mem_capacity=sec.get("mem_capacity", _parse_int, 0),
            mem_bandwidth=sec.get("mem_bandwidth", float, 0.0),
            peak_compute=sec.get("peak_compute", float, 1e12),
            link_bandwidth=sec.get("link_bandwidth", float, 64e9),
            max_power=sec.get("max_power", float, 0.0),
            op_cost=sec.get("op_cost", float, 0.0),
            hw_cost=sec.get("hw_cost", float, 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}")


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc))

    known_sections = {"model", "cluster", "sweep", "budget", "stream", "perf", "fidelity"}
    for section in cp.sections():
        if section not in known_sections and not section.startswith("device:"):
            raise ConfigError(f"[{section}]: unknown section")

    if cp.has_section("model"):
        try:
            model = spec_from_mapping(dict(cp.items("model")))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"[model]: {exc}")
    else:
        model = get_model(DEFAULT_MODEL)

    cluster = _Section(cp, "cluster", {"gpu", "pnm", "mapping", "host_link_bandwidth"})
    gpu = _resolve_device(cp, cluster.get("gpu", str, "A100-80GB"), "GPU")
    pnm = _resolve_device(cp, cluster.get("pnm", str, "CXL-PNM"), "PNM")
    mapping = cluster.get("mapping", _parse_mapping, Mapping.TP_DP)
    host_link = cluster.get("host_link_bandwidth", float, HOST_LINK_BW)

    sweep = _Section(cp, "sweep", {"modes", "contexts", "n_gpu", "n_pnm", "seed", "out"})
    modes = sweep.get_list("modes", _parse_mode, DEFAULT_MODES)
    contexts = tuple(sorted(set(sweep.get_list("contexts", _parse_int, DEFAULT_CONTEXTS))))
    n_gpus = sweep.get_list("n_gpu", _parse_int, DEFAULT_N_GPUS)
    n_pnms = sweep.get_list("n_pnm", _parse_int, DEFAULT_N_PNMS)
    seed = sweep.get("seed", _parse_int, 0)
    out = sweep.get("out", str, None)
    if any(c < 1 for c in contexts):
        _fail("sweep", "contexts", "context lengths must be >= 1")
    if any(n < 1 for n in n_gpus):
        _fail("sweep", "n_gpu", "GPU counts must be >= 1")
    if any(n < 1 for n in n_pnms):
        _fail("sweep", "n_pnm", "PNM counts must be >= 1 (baseline rows always use 0)")

    budget = _Section(cp, "budget", {"page_size", "budget_pages", "steady_ratio"})
    page_size = budget.get("page_size", _parse_int, 32)
    budget_pages = budget.get("budget_pages", _parse_int, None)
    steady_ratio = budget.get("steady_ratio", float, None)
    if steady_ratio is not None and not 0.0 <= steady_ratio <= 1.0:
        _fail("budget", "steady_ratio", "must lie in [0, 1]")

    stream = _Section(cp, "stream", {"locality", "drift"})
    locality = stream.get("locality", float, PerfParams.locality)
    drift = stream.get("drift", float, PerfParams.drift)
    if not 0.0 <= locality <= 1.0:
        _fail("stream", "locality", "must lie in [0, 1]")
    if drift < 0.0:
        _fail("stream", "drift", "must be non-negative")

    perf_sec = _Section(cp, "perf", {
        "sorter_rate", "b_sat", "weight_bytes", "step_overhead_s", "idle_fraction",
        "activation_fields", "recall_source", "churn_probability", "batch",
        "trace_streams", "trace_steps", "trace_warmup", "trace_dim"})
    try:
        perf = PerfParams(
            page_size=page_size,
            sorter_rate=perf_sec.get("sorter_rate", float, PerfParams.sorter_rate),
            b_sat=perf_sec.get("b_sat", _parse_int, PerfParams.b_sat),
            weight_bytes=perf_sec.get("weight_bytes", _parse_int, None),
            step_overhead_s=perf_sec.get("step_overhead_s", float, 0.0),
            idle_fraction=perf_sec.get("idle_fraction", float, 0.0),
            activation_fields=perf_sec.get("activation_fields", str, "qkv_out"),
            recall_source=perf_sec.get("recall_source", str, "trace"),
            churn_probability=perf_sec.get("churn_probability", float,
                                           PerfParams.churn_probability),
            batch=perf_sec.get("batch", _parse_int, 0),
            locality=locality, drift=drift,
            trace_streams=perf_sec.get("trace_streams", _parse_int, PerfParams.trace_streams),
            trace_steps=perf_sec.get("trace_steps", _parse_int, PerfParams.trace_steps),
            trace_warmup=perf_sec.get("trace_warmup", _parse_int, PerfParams.trace_warmup),
            trace_dim=perf_sec.get("trace_dim", _parse_int, PerfParams.trace_dim),
        )
    except ValueError as exc:
        raise ConfigError(f"[perf]: {exc}")

    fid_sec = _Section(cp, "fidelity", {
        "d_h", "page_size", "context_pages", "capacity_pages", "budget_pages",
        "steady_budget_pages", "n_pnm_range", "steps", "warmup",
        "merge_samples", "trace_lines"})
    try:
        fidelity = FidelityParams(
            seed=seed,
            d_h=fid_sec.get("d_h", _parse_int, FidelityParams.d_h),
            page_size=fid_sec.get("page_size", _parse_int, FidelityParams.page_size),
            context_pages=fid_sec.get_list("context_pages", _parse_int,
                                           FidelityParams.context_pages),
            capacity_pages=fid_sec.get("capacity_pages", _parse_int,
                                       FidelityParams.capacity_pages),
            budget_pages=fid_sec.get("budget_pages", _parse_int,
                                     FidelityParams.budget_pages),
            steady_budget_pages=fid_sec.get("steady_budget_pages", _parse_int,
                                            FidelityParams.steady_budget_pages),
            n_pnm_range=fid_sec.get_list("n_pnm_range", _parse_int,
                                         FidelityParams.n_pnm_range),
            steps=fid_sec.get("steps", _parse_int, FidelityParams.steps),
            warmup=fid_sec.get("warmup", _parse_int, FidelityParams.warmup),
            locality=locality if cp.has_section("stream") else FidelityParams.locality,
            drift=drift if cp.has_section("stream") else FidelityParams.drift,
            merge_samples=fid_sec.get("merge_samples", _parse_int,
                                      FidelityParams.merge_samples),
            trace_lines=fid_sec.get("trace_lines", _parse_int, FidelityParams.trace_lines),
        )
    except ValueError as exc:
        raise ConfigError(f"[fidelity]: {exc}")

    return ExperimentConfig(model=model, gpu=gpu, pnm=pnm, mapping=mapping,
                            host_link_bandwidth=host_link, modes=modes,
                            contexts=contexts, n_gpus=n_gpus, n_pnms=n_pnms,
                            seed=seed, out=out, budget_pages=budget_pages,
                            steady_ratio=steady_ratio, perf=perf, fidelity=fidelity)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}")
    return parse_config(text)


def with_overrides(config: ExperimentConfig, seed: int | None = None,
                   out: str | None = None,
                   mode: Mode | str | None = None) -> ExperimentConfig:
    """Apply CLI-level overrides on top of a parsed config."""
    changes: dict = {}
    if seed is not None:
        changes["seed"] = seed
        changes["fidelity"] = dataclasses.replace(config.fidelity, seed=seed)
    if out is not None:
        changes["out"] = out
    if mode is not None:
        try:
            changes["modes"] = (Mode(mode),)
        except ValueError:
            _fail("sweep", "modes", f"unknown mode {mode!r}")
    return dataclasses.replace(config, **changes) if changes else config
