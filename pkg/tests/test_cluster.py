"""Cluster topology, mapping communication counts, activation sizing."""

import pytest

from pnmsim.cluster import (ClusterConfig, DeviceSpec, Mapping, Mode,
                            activation_bytes, builtin_devices, comm_profile,
                            dp_assign, make_cluster, steady_ratio)
from pnmsim.models import ModelSpec, get_model


def test_builtin_device_catalog():
    devs = builtin_devices()
    gpu, pnm = devs["A100-80GB"], devs["CXL-PNM"]
    assert gpu.kind == "GPU" and pnm.kind == "PNM"
    assert gpu.mem_capacity == 80 * 1024**3
    assert pnm.mem_capacity == 512 * 1024**3
    assert gpu.cost_per_hour == pytest.approx(0.833)
    assert pnm.cost_per_hour == pytest.approx(0.293)
    # the near-memory part trades compute for capacity
    assert pnm.peak_compute < gpu.peak_compute
    assert pnm.mem_capacity > gpu.mem_capacity


def test_device_spec_validation():
    ok = builtin_devices()["A100-80GB"]
    with pytest.raises(ValueError):
        DeviceSpec(**{**ok.__dict__, "kind": "TPU"})
    with pytest.raises(ValueError):
        DeviceSpec(**{**ok.__dict__, "mem_bandwidth": 0.0})
    with pytest.raises(ValueError):
        DeviceSpec(**{**ok.__dict__, "op_cost": -0.1})


def test_cluster_mode_device_consistency():
    gpu = builtin_devices()["A100-80GB"]
    pnm = builtin_devices()["CXL-PNM"]
    with pytest.raises(ValueError):  # baseline cannot carry PNM devices
        ClusterConfig(gpus=(gpu,), pnms=(pnm,), mode=Mode.BASELINE)
    with pytest.raises(ValueError):  # offload modes need at least one
        ClusterConfig(gpus=(gpu,), pnms=(), mode=Mode.PNM_KV)
    with pytest.raises(ValueError):  # hybrid needs a GPU for its share
        ClusterConfig(gpus=(), pnms=(pnm,), mode=Mode.PNG_KV)
    with pytest.raises(ValueError):
        ClusterConfig(gpus=(gpu,), pnms=(), mode=Mode.BASELINE,
                      host_link_bandwidth=0.0)


def test_make_cluster_counts_and_mode_switch():
    c = make_cluster(2, 4, Mode.PNM_KV)
    assert c.n_gpu == 2 and c.n_pnm == 4
    assert all(d.name == "A100-80GB" for d in c.gpus)
    assert all(d.name == "CXL-PNM" for d in c.pnms)
    assert c.with_mode(Mode.PNG_KV).mode is Mode.PNG_KV
    with pytest.raises(ValueError):
        make_cluster(-1, 0, Mode.BASELINE)


def test_steady_ratio():
    assert steady_ratio(1, 8) == pytest.approx(1 / 9)
    assert steady_ratio(1, 0) == 1.0
    assert steady_ratio(0, 4) == 0.0
    assert steady_ratio(3, 5) == pytest.approx(3 / 8)
    with pytest.raises(ValueError):
        steady_ratio(0, 0)
    with pytest.raises(ValueError):
        steady_ratio(-1, 2)


def test_comm_profile_tp_vs_dp_over_device_counts():
    for n in range(1, 17):
        tp = comm_profile(Mapping.TP_TP, n, 1000)
        dp = comm_profile(Mapping.TP_DP, n, 1000)
        assert tp.topk_sorts == n
        assert tp.reduction_msgs == n - 1
        assert dp.topk_sorts == n
        assert dp.reduction_msgs == 0
        assert tp.scatter_gather_bytes == dp.scatter_gather_bytes == 1000
    with pytest.raises(ValueError):
        comm_profile(Mapping.TP_TP, 0, 1000)


def test_activation_bytes_hand_values():
    spec = get_model("Llama3.1-8B")
    # per layer: d_in down + K/V for 8 kv-heads + d_in back, fp16
    per_layer = 4096 + 2 * 8 * 128 + 4096
    assert activation_bytes(spec, 2) == 2 * 32 * per_layer * 2 == 1310720
    assert activation_bytes(spec, 1, "q_only") == 32 * (4096 + 4096) * 2
    assert activation_bytes(spec, 0) == 0
    with pytest.raises(ValueError):
        activation_bytes(spec, -1)
    with pytest.raises(ValueError):
        activation_bytes(spec, 1, "keys_only")


def test_activation_bytes_context_independent_by_construction():
    spec = ModelSpec("tiny", n_l=1, n_h=2, d_h=1, d_in=2, d_out=2, g=2,
                     context_window=16)
    # d_in=2, one kv head of width 1, fp16; nothing here mentions context
    assert activation_bytes(spec, 1) == 1 * 1 * (2 + 2 * 1 * 1 + 2) * 2 == 12


def test_dp_assign_round_robin():
    out = dp_assign(list(range(7)), 3)
    assert out == {0: [0, 3, 6], 1: [1, 4], 2: [2, 5]}
    assert dp_assign([], 2) == {0: [], 1: []}
    with pytest.raises(ValueError):
        dp_assign([1], 0)
