"""Cluster shapes, execution modes, and GPU/PNM communication accounting.

A cluster is a set of GPUs plus a set of near-memory devices hanging off one
switch; devices attach with x8-class links and the host with an x16-class
link. Per decode step the only cross-domain traffic is the batched
activation slice, whose size does not depend on context length.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .models import ModelSpec


class Mode(enum.Enum):
    BASELINE = "baseline"
    PNM_KV = "pnm-kv"
    PNG_KV = "png-kv"


class Mapping(enum.Enum):
    TP_TP = "tp-tp"
    TP_DP = "tp-dp"


# effective PCIe 6.0 bandwidths: x8 per device, x16 for the host uplink
DEVICE_LINK_BW = 64e9
HOST_LINK_BW = 128e9

GIB = 1024 ** 3


@dataclass(frozen=True)
class DeviceSpec:
    kind: str  # "GPU" or "PNM"
    name: str
    mem_capacity: int
    mem_bandwidth: float
    peak_compute: float
    link_bandwidth: float
    max_power: float
    op_cost: float
    hw_cost: float

    def __post_init__(self):
        if self.kind not in ("GPU", "PNM"):
            raise ValueError(f"device kind must be GPU or PNM, got {self.kind!r}")
        for f in ("mem_capacity", "mem_bandwidth", "peak_compute", "link_bandwidth", "max_power"):
            if getattr(self, f) <= 0:
                raise ValueError(f"DeviceSpec.{f} must be positive")
        if self.op_cost < 0 or self.hw_cost < 0:
            raise ValueError("costs must be non-negative")

    @property
    def cost_per_hour(self) -> float:
        return self.op_cost + self.hw_cost


_A100 = DeviceSpec(
    kind="GPU", name="A100-80GB",
    mem_capacity=80 * GIB, mem_bandwidth=2.0e12, peak_compute=312e12,
    link_bandwidth=DEVICE_LINK_BW, max_power=400.0,
    op_cost=0.072, hw_cost=0.761,
)

_CXL_PNM = DeviceSpec(
    kind="PNM", name="CXL-PNM",
    mem_capacity=512 * GIB, mem_bandwidth=1.1e12, peak_compute=8e12,
    link_bandwidth=DEVICE_LINK_BW, max_power=150.0,
    op_cost=0.027, hw_cost=0.266,
)


def builtin_devices() -> dict[str, DeviceSpec]:
    return {_A100.name: _A100, _CXL_PNM.name: _CXL_PNM}


@dataclass(frozen=True)
class ClusterConfig:
    gpus: tuple[DeviceSpec, ...]
    pnms: tuple[DeviceSpec, ...]
    host_link_bandwidth: float = HOST_LINK_BW
    mapping: Mapping = Mapping.TP_DP
    mode: Mode = Mode.BASELINE

    def __post_init__(self):
        object.__setattr__(self, "gpus", tuple(self.gpus))
        object.__setattr__(self, "pnms", tuple(self.pnms))
        if (self.mode is Mode.BASELINE) != (len(self.pnms) == 0):
            raise ValueError("PNM device list must be empty exactly when mode is baseline")
        if self.mode is Mode.PNG_KV and not self.gpus:
            raise ValueError("png-kv needs at least one GPU for the steady share")
        if self.host_link_bandwidth <= 0:
            raise ValueError("host_link_bandwidth must be positive")

    @property
    def n_gpu(self) -> int:
        return len(self.gpus)

    @property
    def n_pnm(self) -> int:
        return len(self.pnms)

    def with_mode(self, mode: Mode) -> "ClusterConfig":
        return replace(self, mode=mode)


def make_cluster(n_gpu: int, n_pnm: int, mode: Mode,
                 mapping: Mapping = Mapping.TP_DP,
                 gpu: DeviceSpec = _A100, pnm: DeviceSpec = _CXL_PNM,
                 host_link_bandwidth: float = HOST_LINK_BW) -> ClusterConfig:
    """Homogeneous cluster of n_gpu copies of gpu and n_pnm copies of pnm."""
    if n_gpu < 0 or n_pnm < 0:
        raise ValueError("device counts must be non-negative")
    return ClusterConfig(gpus=(gpu,) * n_gpu, pnms=(pnm,) * n_pnm,
                         host_link_bandwidth=host_link_bandwidth,
                         mapping=mapping, mode=mode)


@dataclass(frozen=True)
class CommProfile:
    topk_sorts: int
    reduction_msgs: int
    scatter_gather_bytes: int

    def __post_init__(self):
        if min(self.topk_sorts, self.reduction_msgs, self.scatter_gather_bytes) < 0:
            raise ValueError("CommProfile fields must be non-negative")


def steady_ratio(n_gpu: int, n_pnm: int) -> float:
    """Fraction of budget tokens kept on the GPU side: n_gpu / (n_gpu + n_pnm)."""
    if n_gpu < 0 or n_pnm < 0:
        raise ValueError("device counts must be non-negative")
    if n_gpu + n_pnm == 0:
        raise ValueError("cluster has no devices")
    return n_gpu / (n_gpu + n_pnm)


def comm_profile(mapping: Mapping, n_pnm: int, activation_bytes: int) -> CommProfile:
    """Per-step communication counts for N near-memory devices.

    Tensor-parallel mapping runs a Top-K sort per device and N-1 reduction
    messages; data-parallel keeps sorts local and needs no reductions. The
    scatter-gather volume is identical either way.
    """
    if n_pnm < 1:
        raise ValueError("comm_profile requires n_pnm >= 1")
    reductions = n_pnm - 1 if mapping is Mapping.TP_TP else 0
    return CommProfile(topk_sorts=n_pnm, reduction_msgs=reductions,
                       scatter_gather_bytes=activation_bytes)


def activation_bytes(spec: ModelSpec, batch: int, fields: str = "qkv_out") -> int:
    """Bytes exchanged per decode step; independent of context length.

    qkv_out ships the new token's Q plus K/V projections down and the
    attention output back; q_only assumes K/V are produced near memory.
    """
    if batch < 0:
        raise ValueError("batch must be non-negative")
    if fields == "qkv_out":
        per_layer = spec.d_in + 2 * spec.kv_heads * spec.d_h + spec.d_in
    elif fields == "q_only":
        per_layer = spec.d_in + spec.d_in
    else:
        raise ValueError(f"unknown activation field set {fields!r}")
    return batch * spec.n_l * per_layer * spec.bytes_per_elem


def dp_assign(batch_ids, n_pnm: int) -> dict[int, list]:
    """Round-robin batch placement: device i gets samples i, i+N, i+2N, ..."""
    if n_pnm < 1:
        raise ValueError("dp_assign requires n_pnm >= 1")
    assignment: dict[int, list] = {dev: [] for dev in range(n_pnm)}
    for idx, sample in enumerate(batch_ids):
        assignment[idx % n_pnm].append(sample)
    return assignment
