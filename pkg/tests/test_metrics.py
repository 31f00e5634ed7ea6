import numpy as np
import pytest

from mulsedge import tensor as T
from mulsedge.metrics import (DEFAULT_COST, DEFAULT_DEVICE, Approach, ComputeCost, DeviceProfile,
                              TaskPayloads, best_latency, count_flops, energy, latency,
                              task1_payloads)
from mulsedge.perceiver import ModalitySpec, ModalityTensor, PerceiverConfig, PerceiverModel, Registry, TaskSpec

P1 = task1_payloads()


def test_task1_payload_sizes():
    assert sum(P1.raw_bits) == 239_904           # ~240 kbit
    assert P1.latent_bits == (23_040, 23_040)     # ~23 kbit per modality
    assert sum(P1.result_bits) == 36


def test_tau2_and_e2():
    assert latency("A2", P1, 1e6) == pytest.approx(0.27624, rel=1e-4)
    assert energy("A2", P1, 1e6) == pytest.approx(2.4600, rel=1e-4)
    assert latency("A4", P1, 1e6) == latency("A2", P1, 1e6)


def test_tau1_reference():
    p = TaskPayloads((120_000, 120_000), (23_040, 23_040))
    assert latency("A1", p, 1e6) == pytest.approx(0.24 + 4 * 0.5 / 428, rel=1e-12)
    # communication part of E1: P_t x airtime
    assert energy("A1", p, 1e6) - DEFAULT_COST.fusion_model(2) / 2.13e9 == pytest.approx(0.024)


def test_a5_collapses():
    for r in (1e5, 1e6, 1e7):
        assert latency("A5", P1, r, p_h=1.0) == latency("A4", P1, r)
        assert energy("A5", P1, r, p_h=1.0) == energy("A4", P1, r)
        assert latency("A5", P1, r, p_h=0.0) >= latency("A3", P1, r)
    with pytest.raises(ValueError):
        latency("A5", P1, 1e6)


@pytest.mark.parametrize("rate,best", [(2e5, {Approach.A2, Approach.A4}), (1e6, {Approach.A3}),
                                       (3e6, {Approach.A1})])
def test_crossovers(rate, best):
    assert set(best_latency(P1, rate, p_h=0.5371)) <= best


def test_profiles_validate():
    with pytest.raises(ValueError):
        DeviceProfile(0, 1, 1)
    with pytest.raises(ValueError):
        ComputeCost(-1)
    assert Approach.parse("a3") is Approach.A3


def test_fusion_model_cost():
    assert ComputeCost(1.0).fusion_model(2) == 4.0
    assert ComputeCost(1.0).fusion_model(4) == 16.0


@pytest.mark.parametrize("cfg", [PerceiverConfig(), PerceiverConfig(n_latents=5, latent_dim=6, ffn_hidden=7,
                                                                    cross_heads=2, cross_head_dim=3,
                                                                    latent_heads=3, latent_head_dim=4, depth=2)])
def test_count_flops_matches_instrumented_forward(cfg):
    reg = Registry([ModalitySpec("a", 6, 5)], [TaskSpec("t", (0,), 2)])
    model = PerceiverModel(reg, cfg, seed=0)
    x = model.pad_and_embed(ModalityTensor(0, np.ones((6, 5))))
    with T.flop_counter as fc:
        model.unimodal_encode_a(x)
    assert fc.count == count_flops(cfg, reg.max_rows, reg.max_cols)
