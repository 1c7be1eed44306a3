"""Transformer shape specs and the memory/compute sizing arithmetic they drive.

All sizes are exact integer byte counts; the KV-cache footprint is
``2 (K and V) * n_l * kv_heads * d_h * bytes_per_elem`` per token, with
``kv_heads = n_h / g`` under grouped-query attention.
"""

from __future__ import annotations

from dataclasses import MISSING, dataclass, fields


@dataclass(frozen=True)
class ModelSpec:
    """Decoder shape: layers, heads, dims, GQA group size, context window."""

    name: str
    n_l: int
    n_h: int
    d_h: int
    d_in: int
    d_out: int
    g: int
    context_window: int
    bytes_per_elem: int = 2  # FP16

    def __post_init__(self):
        for f in ("n_l", "n_h", "d_h", "d_in", "d_out", "g", "context_window", "bytes_per_elem"):
            v = getattr(self, f)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"ModelSpec.{f} must be a positive integer, got {v!r}")
        if self.n_h % self.g != 0:
            raise ValueError(f"n_h={self.n_h} must be divisible by g={self.g}")

    @property
    def kv_heads(self) -> int:
        return self.n_h // self.g


@dataclass(frozen=True)
class SizingReport:
    kv_bytes_per_token: int
    kv_cache_bytes: int
    fc_param_bytes: int
    fc_flops_per_token: int
    max_batch: int


_BUILTINS = (
    ModelSpec("Llama3.1-8B", n_l=32, n_h=32, d_h=128, d_in=4096, d_out=14336,
              g=4, context_window=131072),
    ModelSpec("Llama3.1-70B", n_l=80, n_h=64, d_h=128, d_in=8192, d_out=28672,
              g=8, context_window=131072),
    ModelSpec("Llama3.1-405B", n_l=126, n_h=128, d_h=128, d_in=16384, d_out=53248,
              g=16, context_window=131072),
)


def builtin_specs() -> list[ModelSpec]:
    """The three built-in Llama3.1 shapes."""
    return list(_BUILTINS)


def get_model(name: str) -> ModelSpec:
    for spec in _BUILTINS:
        if spec.name == name:
            return spec
    known = ", ".join(s.name for s in _BUILTINS)
    raise KeyError(f"unknown model {name!r} (built-ins: {known})")


def spec_from_mapping(mapping: dict) -> ModelSpec:
    """Build a ModelSpec from config strings; a built-in name seeds defaults."""
    base: dict = {}
    name = mapping.get("name")
    if name is not None:
        try:
            seed = get_model(name)
            base = {f.name: getattr(seed, f.name) for f in fields(ModelSpec)}
        except KeyError:
            base = {"name": name}
    int_fields = {f.name for f in fields(ModelSpec)} - {"name"}
    for key, value in mapping.items():
        if key == "name":
            continue
        if key not in int_fields:
            raise KeyError(f"unknown model field {key!r}")
        base[key] = int(value)
    required = {f.name for f in fields(ModelSpec) if f.default is MISSING} - {"name"}
    missing = sorted(required - base.keys())
    if missing:
        known = ", ".join(s.name for s in _BUILTINS)
        raise ValueError(f"model {name!r} is not built in (known: {known}); "
                         f"a custom model must also set: {', '.join(missing)}")
    return ModelSpec(**base)


def kv_bytes_per_token(spec: ModelSpec) -> int:
    """KV footprint of one token across all layers and KV heads."""
    return 2 * spec.n_l * spec.kv_heads * spec.d_h * spec.bytes_per_elem


def kv_cache_bytes(spec: ModelSpec, batch: int, context: int) -> int:
    if batch < 0 or context < 0:
        raise ValueError("batch and context must be non-negative")
    return batch * context * kv_bytes_per_token(spec)


def fc_param_count(spec: ModelSpec, mlp_matrices: int = 3) -> int:
    """Attention-projection + gated-MLP parameters (embeddings excluded)."""
    qo = 2 * spec.d_in * spec.d_in
    kv = 2 * spec.d_in * (spec.d_h * spec.kv_heads)
    mlp = mlp_matrices * spec.d_in * spec.d_out
    return spec.n_l * (qo + kv + mlp)


def fc_flops_per_token(spec: ModelSpec, flops_per_param: int = 2, mlp_matrices: int = 3) -> int:
    """Decode-step FC work; GEMV does flops_per_param FLOPs per parameter."""
    return flops_per_param * fc_param_count(spec, mlp_matrices=mlp_matrices)


def max_batch(spec: ModelSpec, free_bytes: int, resident_tokens_per_sample: int) -> int:
    """Largest batch whose resident KV fits in free_bytes; never negative."""
    if resident_tokens_per_sample < 1:
        raise ValueError("resident_tokens_per_sample must be >= 1")
    if free_bytes <= 0:
        return 0
    return free_bytes // (resident_tokens_per_sample * kv_bytes_per_token(spec))


def sizing_report(spec: ModelSpec, batch: int, context: int,
                  free_bytes: int | None = None,
                  resident_tokens_per_sample: int | None = None) -> SizingReport:
    resident = resident_tokens_per_sample if resident_tokens_per_sample else max(context, 1)
    return SizingReport(
        kv_bytes_per_token=kv_bytes_per_token(spec),
        kv_cache_bytes=kv_cache_bytes(spec, batch, context),
        fc_param_bytes=fc_param_count(spec) * spec.bytes_per_elem,
        fc_flops_per_token=fc_flops_per_token(spec),
        max_batch=max_batch(spec, free_bytes, resident) if free_bytes is not None else 0,
    )
