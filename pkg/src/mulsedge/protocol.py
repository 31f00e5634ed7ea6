"""Discrete-event simulation of one task request under approaches A1 to A5.

Nodes are the user device (``user``), the edge server (``server``) and one
AIoT device per modality (``dev<k>``). Devices compute in parallel; their
uplink transmissions share one TDMA channel and never overlap. Request
messages take no simulated time.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import phy
from .conformal import AdaptiveThreshold, ConformalQuantile, prediction_set
from .fusion import Complex, ModalityReport, Simple, fuse, majority_vote, route
from .metrics import (DEFAULT_COST, DEFAULT_DEVICE, DEFAULT_SERVER, Approach, ComputeCost,
                      DeviceProfile, ServerProfile)
from .perceiver import ModalityTensor, PerceiverModel, Registry
from .tensor import Matrix

__all__ = [
    "MissingModalityError",
    "MessageKind",
    "Message",
    "TraceEvent",
    "EventTrace",
    "Topology",
    "Sample",
    "Calibration",
    "SimConfig",
    "RunLedger",
    "DatasetResult",
    "run_sample",
    "run_dataset",
    "degrade_modality",
    "samples_from",
]


class MissingModalityError(RuntimeError):
    """A1 and A3 need every task modality."""


class MessageKind(enum.Enum):
    TASK_REQUEST = "TaskRequest"
    SENSOR_REQUEST = "SensorRequest"
    SOFTMAX_AND_SET = "SoftmaxAndSet"
    LATENT_REQUEST = "LatentRequest"
    LATENT_DATA = "LatentData"
    RAW_DATA = "RawData"
    UNIMODAL_RESULT = "UnimodalResult"
    TASK_RESULT = "TaskResult"

    @property
    def modulation(self) -> phy.Modulation:
        if self in (MessageKind.LATENT_DATA, MessageKind.RAW_DATA):
            return phy.Modulation.QAM64
        return phy.Modulation.QPSK

    @property
    def is_control(self) -> bool:
        return self in (MessageKind.TASK_REQUEST, MessageKind.SENSOR_REQUEST,
                        MessageKind.LATENT_REQUEST)


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    src: str
    dst: str
    bits: int
    t_start: float
    t_end: float

    @property
    def modulation(self) -> phy.Modulation:
        return self.kind.modulation


@dataclass(frozen=True)
class TraceEvent:
    time: float
    node: str
    event: str
    bits: int = 0
    modulation: str = "-"


@dataclass
class EventTrace:
    events: list[TraceEvent] = field(default_factory=list)
    messages: list[Message] = field(default_factory=list)

    def log(self, time: float, node: str, event: str, bits: int = 0, modulation: str = "-") -> None:
        self.events.append(TraceEvent(time, node, event, bits, modulation))

    def count(self, event: str, node: str | None = None) -> int:
        return sum(1 for e in self.events if e.event == event and (node is None or e.node == node))

    def to_lines(self) -> list[str]:
        """``time_s node msg_kind bits modulation``, tab separated."""
        return [f"{e.time:.9f}\t{e.node}\t{e.event}\t{e.bits}\t{e.modulation}" for e in self.events]

    # -- invariant checks --------------------------------------------------

    def timestamps_ordered(self) -> bool:
        return all(a.time <= b.time for a, b in zip(self.events, self.events[1:]))

    def tdma_ok(self) -> bool:
        """No two device uplink transmissions overlap in time."""
        up = sorted((m.t_start, m.t_end) for m in self.messages
                    if m.src.startswith("dev") and m.t_end > m.t_start)
        return all(a[1] <= b[0] + 1e-15 for a, b in zip(up, up[1:]))

    def causality_ok(self) -> bool:
        requested: set[str] = set()
        decided = False
        for e in self.events:
            if e.event == "LatentRequest" and e.node == "server":
                requested.update(_pending_targets(self, e))
            elif e.event == "LatentData":
                if e.node not in requested:
                    return False
            elif e.event in ("route_simple", "mca_done", "vote_done", "fusion_done"):
                decided = True
            elif e.event == "TaskResult" and not decided:
                return False
        return True


def _pending_targets(trace: EventTrace, ev: TraceEvent) -> set[str]:
    return {m.dst for m in trace.messages
            if m.kind is MessageKind.LATENT_REQUEST and m.t_start == ev.time}


@dataclass
class Topology:
    """One AIoT device per modality, one edge server, one user device."""

    device_modality: dict[str, int]
    registry: Registry
    n_users: int = 1

    @classmethod
    def from_registry(cls, registry: Registry) -> "Topology":
        return cls({f"dev{m}": m for m in range(registry.n_modalities)}, registry)

    def __post_init__(self) -> None:
        hosted = list(self.device_modality.values())
        for t in self.registry.tasks:
            for m in t.modalities:
                if hosted.count(m) != 1:
                    raise ValueError(f"modality {m} must be hosted by exactly one device")

    @property
    def n_devices(self) -> int:
        return len(self.device_modality)

    def device_of(self, modality_id: int) -> str:
        for d, m in self.device_modality.items():
            if m == modality_id:
                return d
        raise KeyError(modality_id)


@dataclass(frozen=True)
class Sample:
    inputs: Mapping[int, np.ndarray]
    label: int
    task_id: int = 0
    index: int = 0
    snr_db: Mapping[int, float] = field(default_factory=dict)

    def snr(self, modality_id: int) -> float:
        return self.snr_db.get(modality_id, math.inf)


def degrade_modality(sample: Sample, modality_id: int, snr_db: float) -> Sample:
    """Mark every payload of ``modality_id`` to cross the channel at ``snr_db``."""
    if modality_id not in sample.inputs:
        raise KeyError(f"modality {modality_id} not present in sample")
    return replace(sample, snr_db={**sample.snr_db, modality_id: snr_db})


def samples_from(data, task_id: int = 0, snr_db: Mapping[int, float] | None = None) -> list[Sample]:
    snr = dict(snr_db or {})
    return [Sample({m: a[i] for m, a in data.inputs.items()}, int(data.labels[i]), task_id,
                   int(data.ids[i]), snr) for i in range(len(data))]


@dataclass
class Calibration:
    quantiles: dict[tuple[int, int], ConformalQuantile]
    thresholds: dict[tuple[int, str], AdaptiveThreshold]

    def quantile(self, task_id: int, modality_id: int) -> ConformalQuantile:
        return self.quantiles[(task_id, modality_id)]

    def threshold(self, task_id: int, combiner: str) -> AdaptiveThreshold:
        return self.thresholds[(task_id, combiner)]


@dataclass(frozen=True)
class SimConfig:
    rate_bps: float = 1e6
    combiner: str = "sssc"
    beta: float = 1.0
    device: DeviceProfile = DEFAULT_DEVICE
    server: ServerProfile = DEFAULT_SERVER
    cost: ComputeCost = DEFAULT_COST
    reliable_control: bool = True
    noise_mode: str = "symbol"
    seed: int = 0


@dataclass
class RunLedger:
    approach: str
    prediction: int
    label: int
    uplink_bits: int
    latency_s: float
    energy_j: float
    simple: bool | None = None

    @property
    def correct(self) -> bool:
        return self.prediction == self.label


# ---------------------------------------------------------------------------
# event engine
# ---------------------------------------------------------------------------

class _Engine:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.queue: list = []
        self._seq = itertools.count()
        self.now = 0.0
        self.channel_free = 0.0
        self.trace = EventTrace()
        self.energy = 0.0
        self.uplink_bits = 0

    def at(self, t: float, fn: Callable[[], None]) -> None:
        heapq.heappush(self.queue, (t, next(self._seq), fn))

    def run(self) -> None:
        while self.queue:
            t, _, fn = heapq.heappop(self.queue)
            self.now = t
            fn()

    def control(self, kind: MessageKind, src: str, dst: str) -> None:
        self.trace.messages.append(Message(kind, src, dst, 0, self.now, self.now))
        self.trace.log(self.now, src, kind.value, 0, kind.modulation.name)

    def compute(self, node: str, flops: float, label: str, then: Callable[[], None]) -> None:
        if node == "server":
            dur = flops / self.cfg.server.c_s
            self.energy += flops / self.cfg.server.gamma_s
        else:
            dur = flops / self.cfg.device.c_iot
            self.energy += flops / self.cfg.device.gamma_iot
        self.trace.log(self.now, node, f"{label}_start")
        end = self.now + dur

        def done():
            self.trace.log(self.now, node, label)
            then()

        self.at(end, done)

    def uplink(self, kind: MessageKind, src: str, dst: str, bits: int,
               then: Callable[[], None]) -> None:
        """Device transmission on the shared TDMA channel."""
        start = max(self.now, self.channel_free)
        dur = bits / self.cfg.rate_bps
        self.channel_free = start + dur
        self.energy += self.cfg.device.p_t * dur
        self.uplink_bits += bits
        msg = Message(kind, src, dst, bits, start, start + dur)
        self.trace.messages.append(msg)

        def arrive():
            self.trace.log(self.now, src, kind.value, bits, kind.modulation.name)
            then()

        self.at(start + dur, arrive)

    def downlink(self, kind: MessageKind, src: str, dst: str, bits: int,
                 then: Callable[[], None]) -> None:
        dur = bits / self.cfg.rate_bps
        self.trace.messages.append(Message(kind, src, dst, bits, self.now, self.now + dur))

        def arrive():
            self.trace.log(self.now, src, kind.value, bits, kind.modulation.name)
            then()

        self.at(self.now + dur, arrive)


# ---------------------------------------------------------------------------
# payload handling
# ---------------------------------------------------------------------------

def _carry_reals(values: np.ndarray, kind: phy.PayloadKind, msg: MessageKind, snr: float,
                 cfg: SimConfig, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Quantise, optionally send through the channel, and decode."""
    shape = np.shape(values)
    noisy = not (math.isinf(snr) and snr > 0)
    if noisy and cfg.reliable_control and msg.modulation is not phy.Modulation.QAM64:
        noisy = False
    if noisy and cfg.noise_mode == "direct":
        values = phy.perturb_reals(values, snr, rng)
        noisy = False
    payload = phy.encode_reals(values, kind)
    if noisy:
        payload = phy.transmit(payload, phy.ChannelConfig(snr, msg.modulation, cfg.rate_bps), rng)
    return phy.decode_reals(payload).reshape(shape), payload.n_bits


def _carry_mask(mask: np.ndarray, snr: float, cfg: SimConfig,
                rng: np.random.Generator) -> tuple[np.ndarray, int]:
    payload = phy.encode_mask(mask)
    noisy = not (math.isinf(snr) and snr > 0)
    if noisy and not cfg.reliable_control and cfg.noise_mode == "symbol":
        payload = phy.transmit(payload, phy.ChannelConfig(snr, phy.Modulation.QPSK, cfg.rate_bps), rng)
    return phy.decode_mask(payload), payload.n_bits


class _Device:
    """Per-sample device state; caches the encoder-A latent."""

    def __init__(self, name: str, modality: int, model: PerceiverModel, sample: Sample,
                 engine: _Engine):
        self.name = name
        self.modality = modality
        self.model = model
        self.sample = sample
        self.engine = engine
        self._padded = None
        self.latent: Matrix | None = None
        self.softmax: np.ndarray | None = None

    @property
    def padded(self):
        if self._padded is None:
            self._padded = self.model.pad_and_embed(
                ModalityTensor(self.modality, self.sample.inputs[self.modality], self.sample.task_id))
        return self._padded

    def encode_a(self) -> Matrix:
        if self.latent is None:
            self.engine.trace.log(self.engine.now, self.name, "encode_A")
            self.latent = self.model.unimodal_encode_a(self.padded)
        return self.latent

    def scores(self) -> np.ndarray:
        l_cp = self.model.unimodal_encode_b(self.padded, self.encode_a())
        self.softmax = self.model.task_head(l_cp, self.sample.task_id)
        return self.softmax


# ---------------------------------------------------------------------------
# approaches
# ---------------------------------------------------------------------------

def run_sample(approach, sample: Sample, topology: Topology, model: PerceiverModel,
               calib: Calibration | None, cfg: SimConfig,
               rng: np.random.Generator | None = None,
               threshold: AdaptiveThreshold | None = None) -> tuple[int, EventTrace, RunLedger]:
    """Simulate one task request end to end.

    ``threshold`` overrides the calibrated A5 routing threshold.
    """
    a = Approach.parse(approach)
    task = model.registry.task(sample.task_id)
    rng = rng if rng is not None else np.random.default_rng([cfg.seed, sample.index])
    present = [m for m in task.modalities if m in sample.inputs]
    if not present:
        raise MissingModalityError("no task modality is available")
    if a in (Approach.A1, Approach.A3) and len(present) != len(task.modalities):
        missing = sorted(set(task.modalities) - set(present))
        raise MissingModalityError(f"{a.value} needs every modality; missing {missing}")
    if a in (Approach.A4, Approach.A5) and calib is None:
        raise ValueError(f"{a.value} needs calibration data")

    eng = _Engine(cfg)
    devices = [_Device(topology.device_of(m), m, model, sample, eng) for m in present]
    tb = cfg.cost.t_b
    n = len(task.modalities)
    result: dict = {}

    def deliver(pred: int) -> None:
        result["pred"] = int(pred)
        eng.downlink(MessageKind.TASK_RESULT, "server", "user", phy.WORD_BITS,
                     lambda: result.__setitem__("t", eng.now))

    def server_mca(latents: dict[int, np.ndarray]) -> None:
        lat = [Matrix(latents[m]) for m in task.modalities]
        probs = model.multimodal_cross_attention(lat, sample.task_id)
        eng.compute("server", (n - 1) * n * tb, "mca_done", lambda: deliver(int(np.argmax(probs))))

    def collect(count: int, on_all: Callable[[dict], None]):
        got: dict = {}

        def receive(key, value):
            got[key] = value
            if len(got) == count:
                on_all(got)

        return receive

    def send_latents(receive) -> None:
        for d in devices:
            values, bits = _carry_reals(d.encode_a().data, phy.PayloadKind.LATENT_DATA,
                                        MessageKind.LATENT_DATA, sample.snr(d.modality), cfg, rng)
            eng.uplink(MessageKind.LATENT_DATA, d.name, "server", bits,
                       lambda d=d, v=values: receive(d.modality, v))

    def start() -> None:
        eng.control(MessageKind.TASK_REQUEST, "user", "server")
        if a is Approach.A1:
            def on_raw(raw):
                lat = {}
                for m in task.modalities:
                    x = model.pad_and_embed(ModalityTensor(m, raw[m], sample.task_id))
                    lat[m] = model.unimodal_encode_a(x).data
                probs = model.multimodal_cross_attention([Matrix(lat[m]) for m in task.modalities],
                                                         sample.task_id)
                eng.compute("server", cfg.cost.fusion_model(n), "mca_done",
                            lambda: deliver(int(np.argmax(probs))))

            receive = collect(len(devices), on_raw)
            for d in devices:
                eng.control(MessageKind.SENSOR_REQUEST, "server", d.name)
            for d in devices:
                raw = np.asarray(sample.inputs[d.modality], dtype=np.float64)
                values, bits = _carry_reals(raw, phy.PayloadKind.RAW_DATA, MessageKind.RAW_DATA,
                                            sample.snr(d.modality), cfg, rng)
                eng.uplink(MessageKind.RAW_DATA, d.name, "server", bits,
                           lambda d=d, v=values: receive(d.modality, v))
            return

        if a is Approach.A3:
            receive = collect(len(devices), server_mca)
            for d in devices:
                eng.control(MessageKind.LATENT_REQUEST, "server", d.name)
            ready = collect(len(devices), lambda _: send_latents(receive))
            for d in devices:
                d.encode_a()
                eng.compute(d.name, tb, "encoder_A_done", lambda d=d: ready(d.name, True))
            return

        for d in devices:
            eng.control(MessageKind.SENSOR_REQUEST, "server", d.name)

        if a is Approach.A2:
            def on_labels(labels):
                pred = majority_vote([labels[m] for m in present], rng)
                eng.trace.log(eng.now, "server", "vote_done")
                deliver(pred)

            receive = collect(len(devices), on_labels)

            def send_result(d):
                label = float(np.argmax(d.softmax))
                values, bits = _carry_reals(np.array([label]), phy.PayloadKind.RESULT,
                                            MessageKind.UNIMODAL_RESULT, sample.snr(d.modality),
                                            cfg, rng)
                eng.uplink(MessageKind.UNIMODAL_RESULT, d.name, "server", bits,
                           lambda d=d, v=values: receive(d.modality, int(np.rint(v[0]))))

            ready = collect(len(devices), lambda _: [send_result(d) for d in devices])
            for d in devices:
                d.scores()
                eng.compute(d.name, 2 * tb, "encoders_AB_done", lambda d=d: ready(d.name, True))
            return

        # A4 / A5: softmax scores plus conformal sets
        def on_reports(reports):
            reps = [reports[m] for m in present]
            fused = fuse(reps, cfg.combiner, cfg.beta)
            if a is Approach.A4:
                eng.trace.log(eng.now, "server", "fusion_done")
                result["simple"] = True
                deliver(fused.prediction)
                return
            thr = threshold if threshold is not None else calib.threshold(sample.task_id, cfg.combiner)
            decision = route(fused, thr)
            if isinstance(decision, Simple) or len(present) != len(task.modalities):
                eng.trace.log(eng.now, "server", "route_simple")
                result["simple"] = True
                deliver(decision.prediction if isinstance(decision, Simple) else fused.prediction)
                return
            eng.trace.log(eng.now, "server", "route_complex")
            result["simple"] = False
            receive = collect(len(devices), server_mca)
            for d in devices:
                eng.control(MessageKind.LATENT_REQUEST, "server", d.name)
            send_latents(receive)

        receive = collect(len(devices), on_reports)

        def send_scores(d):
            n_c = task.n_classes
            q = calib.quantile(sample.task_id, d.modality)
            pset = prediction_set(d.softmax, q)
            snr = sample.snr(d.modality)
            soft, b1 = _carry_reals(d.softmax, phy.PayloadKind.SOFTMAX,
                                    MessageKind.SOFTMAX_AND_SET, snr, cfg, rng)
            mask, b2 = _carry_mask(pset.mask(n_c), snr, cfg, rng)
            rep = ModalityReport(d.modality, soft, max(int(mask.sum()), 1))
            eng.uplink(MessageKind.SOFTMAX_AND_SET, d.name, "server", b1 + b2,
                       lambda d=d, r=rep: receive(d.modality, r))

        ready = collect(len(devices), lambda _: [send_scores(d) for d in devices])
        for d in devices:
            d.scores()
            eng.compute(d.name, 2 * tb, "encoders_AB_done", lambda d=d: ready(d.name, True))

    eng.at(0.0, start)
    eng.run()
    ledger = RunLedger(a.value, result["pred"], sample.label, eng.uplink_bits, result["t"],
                       eng.energy, result.get("simple"))
    return result["pred"], eng.trace, ledger


@dataclass
class DatasetResult:
    approach: str
    ledgers: list[RunLedger]
    traces: list[EventTrace] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return float(np.mean([l.correct for l in self.ledgers]))

    @property
    def mean_latency(self) -> float:
        return float(np.mean([l.latency_s for l in self.ledgers]))

    @property
    def mean_energy(self) -> float:
        return float(np.mean([l.energy_j for l in self.ledgers]))

    @property
    def p_h(self) -> float:
        flags = [l.simple for l in self.ledgers if l.simple is not None]
        return float(np.mean(flags)) if flags else float("nan")

    @property
    def predictions(self) -> list[int]:
        return [l.prediction for l in self.ledgers]


def run_dataset(approach, samples: Sequence[Sample], topology: Topology, model: PerceiverModel,
                calib: Calibration | None, cfg: SimConfig, keep_traces: bool = False,
                threshold: AdaptiveThreshold | None = None) -> DatasetResult:
    a = Approach.parse(approach)
    out = DatasetResult(a.value, [])
    for s in samples:
        _, trace, ledger = run_sample(a, s, topology, model, calib, cfg, threshold=threshold)
        out.ledgers.append(ledger)
        if keep_traces:
            out.traces.append(trace)
    return out
