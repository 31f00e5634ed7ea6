import math

import numpy as np
import pytest

from mulsedge.conformal import AdaptiveThreshold
from mulsedge.metrics import TaskPayloads, energy, latency
from mulsedge.protocol import (MessageKind, MissingModalityError, SimConfig, degrade_modality,
                               run_dataset, run_sample, samples_from)

CLEAN = SimConfig()


def _samples(split, n=30, snr=None):
    return samples_from(split.test, 0, snr)[:n]


def test_message_modulation():
    assert MessageKind.LATENT_DATA.modulation.name == "QAM64"
    assert MessageKind.RAW_DATA.modulation.name == "QAM64"
    for k in MessageKind:
        if k not in (MessageKind.LATENT_DATA, MessageKind.RAW_DATA):
            assert k.modulation.name == "QPSK"


@pytest.mark.parametrize("approach", ["A1", "A2", "A3", "A4", "A5"])
def test_trace_invariants(small_system, approach):
    model, split, calib, topo = small_system
    for s in _samples(split, 10):
        pred, trace, ledger = run_sample(approach, s, topo, model, calib, CLEAN)
        assert pred == ledger.prediction
        assert trace.timestamps_ordered() and trace.tdma_ok() and trace.causality_ok()
        assert trace.count("TaskResult") == 1
        assert ledger.latency_s > 0 and ledger.energy_j > 0


def test_a2_sends_one_word_per_device(small_system):
    model, split, calib, topo = small_system
    _, trace, ledger = run_sample("A2", _samples(split, 1)[0], topo, model, calib, CLEAN)
    assert ledger.uplink_bits == 36
    ups = [m for m in trace.messages if m.src.startswith("dev")]
    assert [m.kind for m in ups] == [MessageKind.UNIMODAL_RESULT] * 2


def test_a1_uplinks_raw_volume(small_system):
    model, split, calib, topo = small_system
    _, _, ledger = run_sample("A1", _samples(split, 1)[0], topo, model, calib, CLEAN)
    assert ledger.uplink_bits == (6 * 5 + 8 * 4) * 18


def test_a5_paths(small_system):
    model, split, calib, topo = small_system
    s = _samples(split, 1)[0]
    simple = AdaptiveThreshold(0.0, 0.3, 0, "sssc")
    hard = AdaptiveThreshold(1.01, 0.3, 0, "sssc")
    _, t_simple, l_simple = run_sample("A5", s, topo, model, calib, CLEAN, threshold=simple)
    assert l_simple.simple and t_simple.count("LatentRequest") == 0
    _, t_cx, l_cx = run_sample("A5", s, topo, model, calib, CLEAN, threshold=hard)
    assert l_cx.simple is False
    assert t_cx.count("LatentRequest") == topo.n_devices
    for dev in topo.device_modality:
        assert t_cx.count("encode_A", dev) == 1
        assert t_cx.count("LatentData", dev) == 1


def test_missing_modality(small_system):
    model, split, calib, topo = small_system
    s = _samples(split, 1)[0]
    partial = type(s)({0: s.inputs[0]}, s.label, s.task_id, s.index)
    for a in ("A1", "A3"):
        with pytest.raises(MissingModalityError):
            run_sample(a, partial, topo, model, calib, CLEAN)
    hard = AdaptiveThreshold(1.01, 0.3, 0, "sssc")
    for a in ("A2", "A4", "A5"):
        pred, trace, ledger = run_sample(a, partial, topo, model, calib, CLEAN, threshold=hard)
        assert trace.count("LatentRequest") == 0
        assert 0 <= pred < 4


def test_degrade_modality(small_system):
    _, split, _, _ = small_system
    s = _samples(split, 1)[0]
    assert degrade_modality(s, 0, math.inf).snr(0) == math.inf
    assert degrade_modality(s, 0, 10.0).snr(0) == 10.0
    assert s.snr(0) == math.inf
    with pytest.raises(KeyError):
        degrade_modality(s, 9, 10.0)


def test_infinite_snr_leaves_predictions_unchanged(small_system):
    model, split, calib, topo = small_system
    clean = run_dataset("A3", _samples(split, 20), topo, model, calib, CLEAN)
    inf = run_dataset("A3", _samples(split, 20, {0: math.inf}), topo, model, calib, CLEAN)
    assert clean.predictions == inf.predictions


def test_noise_is_seeded(small_system):
    model, split, calib, topo = small_system
    cfg = SimConfig(reliable_control=False, seed=4)
    runs = [run_dataset(a, _samples(split, 20, {0: 5.0}), topo, model, calib, cfg).predictions
            for a in ("A3", "A3")]
    assert runs[0] == runs[1]


def test_reliable_control_shields_scores(small_system):
    model, split, calib, topo = small_system
    clean = run_dataset("A4", _samples(split, 20), topo, model, calib, CLEAN)
    noisy = run_dataset("A4", _samples(split, 20, {0: -5.0}), topo, model, calib, CLEAN)
    assert clean.predictions == noisy.predictions


def test_trace_export_lines(small_system):
    model, split, calib, topo = small_system
    _, trace, _ = run_sample("A3", _samples(split, 1)[0], topo, model, calib, CLEAN)
    lines = trace.to_lines()
    assert len(lines) == len(trace.events)
    fields = lines[-1].split("\t")
    assert len(fields) == 5 and fields[2] == "TaskResult" and fields[4] == "QPSK"
    assert any("\tLatentData\t576\tQAM64" in ln for ln in lines)


def test_dataset_degenerate_routing(small_system):
    model, split, calib, topo = small_system
    ss = _samples(split, 15)
    a4 = run_dataset("A4", ss, topo, model, calib, CLEAN)
    a5 = run_dataset("A5", ss, topo, model, calib, CLEAN, threshold=AdaptiveThreshold(0.0, 0.3, 0, "sssc"))
    assert a5.p_h == 1.0 and a5.mean_latency == a4.mean_latency
    a3 = run_dataset("A3", ss, topo, model, calib, CLEAN)
    a5c = run_dataset("A5", ss, topo, model, calib, CLEAN, threshold=AdaptiveThreshold(1.01, 0.3, 0, "sssc"))
    assert a5c.p_h == 0.0 and a5c.mean_latency >= a3.mean_latency


@pytest.mark.parametrize("rate", [1e5, 1e6, 1e7])
def test_simulation_matches_closed_forms(small_system, rate):
    model, split, calib, topo = small_system
    cfg = SimConfig(rate_bps=rate)
    payloads = TaskPayloads((6 * 5 * 18, 8 * 4 * 18), (4 * 8 * 18,) * 2)
    downlink = 18 / rate      # the closed forms leave out the TaskResult delivery
    ss = _samples(split, 15)
    for a in ("A1", "A2", "A3", "A4", "A5"):
        for l in run_dataset(a, ss, topo, model, calib, cfg).ledgers:
            # A5 is compared path by path: p_h is 1 for a Simple sample, 0 for a Complex one
            ph = (1.0 if l.simple else 0.0) if a == "A5" else None
            assert l.latency_s - downlink == pytest.approx(latency(a, payloads, rate, p_h=ph), rel=0.01)
            assert l.energy_j == pytest.approx(energy(a, payloads, rate, p_h=ph), rel=0.01)
