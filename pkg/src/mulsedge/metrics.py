"""Closed-form latency and energy of the five communication approaches.

Work is in FLOPs, compute rates in FLOPs/s and efficiencies in FLOPs/J.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .perceiver import PerceiverConfig

__all__ = [
    "Approach",
    "DeviceProfile",
    "ServerProfile",
    "ComputeCost",
    "TaskPayloads",
    "DEFAULT_DEVICE",
    "DEFAULT_SERVER",
    "DEFAULT_COST",
    "task1_payloads",
    "latency",
    "energy",
    "best_latency",
    "count_flops",
]


class Approach(enum.Enum):
    A1 = "A1"  # raw data, fusion model on the server
    A2 = "A2"  # unimodal results, majority vote
    A3 = "A3"  # latent data, multimodal cross attention on the server
    A4 = "A4"  # softmax scores and prediction sets, set-size-scaled fusion
    A5 = "A5"  # A4 with latent fallback for complex samples

    @classmethod
    def parse(cls, s) -> "Approach":
        return s if isinstance(s, cls) else cls(str(s).upper())


@dataclass(frozen=True)
class DeviceProfile:
    c_iot: float
    gamma_iot: float
    p_t: float

    def __post_init__(self) -> None:
        if min(self.c_iot, self.gamma_iot, self.p_t) <= 0:
            raise ValueError("device profile values must be positive")


@dataclass(frozen=True)
class ServerProfile:
    c_s: float
    gamma_s: float

    def __post_init__(self) -> None:
        if min(self.c_s, self.gamma_s) <= 0:
            raise ValueError("server profile values must be positive")


@dataclass(frozen=True)
class ComputeCost:
    t_b: float

    def __post_init__(self) -> None:
        if self.t_b <= 0:
            raise ValueError("t_b must be positive")

    def fusion_model(self, n: int) -> float:
        """Encoders for every modality plus every ordered fusion pair."""
        return self.t_b * n + self.t_b * (n - 1) * n


DEFAULT_DEVICE = DeviceProfile(c_iot=3.62e9, gamma_iot=0.813e9, p_t=0.1)
DEFAULT_SERVER = ServerProfile(c_s=428e9, gamma_s=2.13e9)
DEFAULT_COST = ComputeCost(t_b=0.5e9)


@dataclass(frozen=True)
class TaskPayloads:
    """Uplink bits per modality for each kind of payload."""

    raw_bits: tuple[int, ...]
    latent_bits: tuple[int, ...]
    result_bits: tuple[int, ...] = ()
    score_bits: tuple[int, ...] = ()

    @property
    def n_modalities(self) -> int:
        return len(self.raw_bits) or len(self.latent_bits)


def task1_payloads(word_bits: int = 18, n_latents: int = 20, latent_dim: int = 64) -> TaskPayloads:
    """Image 28x28 and audio spectrogram 112x112 at 18 bits per value."""
    raw = (28 * 28 * word_bits, 112 * 112 * word_bits)
    lat = (n_latents * latent_dim * word_bits,) * 2
    return TaskPayloads(raw, lat, (word_bits, word_bits))


def _terms(n: int, payloads: TaskPayloads, cost: ComputeCost, rate: float):
    raw_air = sum(payloads.raw_bits) / rate
    lat_air = sum(payloads.latent_bits) / rate
    pairs = (n - 1) * n * cost.t_b
    return raw_air, lat_air, pairs


def latency(approach, payloads: TaskPayloads, rate_bps: float,
            device: DeviceProfile = DEFAULT_DEVICE, server: ServerProfile = DEFAULT_SERVER,
            cost: ComputeCost = DEFAULT_COST, p_h: float | None = None) -> float:
    """End-to-end seconds for one sample under ``approach``."""
    a = Approach.parse(approach)
    n = payloads.n_modalities
    raw_air, lat_air, pairs = _terms(n, payloads, cost, rate_bps)
    tb = cost.t_b
    on_device = 2 * tb / device.c_iot
    if a is Approach.A1:
        return raw_air + cost.fusion_model(n) / server.c_s
    if a in (Approach.A2, Approach.A4):
        return on_device
    if a is Approach.A3:
        return tb / device.c_iot + lat_air + pairs / server.c_s
    if p_h is None:
        raise ValueError("A5 latency needs p_h")
    complex_path = on_device + lat_air + pairs / server.c_s
    return p_h * on_device + (1.0 - p_h) * complex_path


def energy(approach, payloads: TaskPayloads, rate_bps: float,
           device: DeviceProfile = DEFAULT_DEVICE, server: ServerProfile = DEFAULT_SERVER,
           cost: ComputeCost = DEFAULT_COST, p_h: float | None = None) -> float:
    """Total joules spent by all nodes for one sample under ``approach``."""
    a = Approach.parse(approach)
    n = payloads.n_modalities
    raw_air, lat_air, pairs = _terms(n, payloads, cost, rate_bps)
    tb = cost.t_b
    on_device = 2 * tb * n / device.gamma_iot
    if a is Approach.A1:
        return device.p_t * raw_air + cost.fusion_model(n) / server.gamma_s
    if a in (Approach.A2, Approach.A4):
        return on_device
    if a is Approach.A3:
        return tb * n / device.gamma_iot + lat_air * device.p_t + pairs / server.gamma_s
    if p_h is None:
        raise ValueError("A5 energy needs p_h")
    complex_path = on_device + lat_air * device.p_t + pairs / server.gamma_s
    return p_h * on_device + (1.0 - p_h) * complex_path


def best_latency(payloads: TaskPayloads, rate_bps: float, p_h: float = 0.5, **kw) -> list[Approach]:
    """Approaches tied for the minimum latency at ``rate_bps``."""
    vals = {a: latency(a, payloads, rate_bps, p_h=p_h, **kw) for a in Approach}
    lo = min(vals.values())
    return [a for a, v in vals.items() if v <= lo * (1 + 1e-12)]


def count_flops(config: PerceiverConfig, input_rows: int, input_cols: int) -> int:
    """Multiply-adds of one Perceiver unit on an ``input_rows x input_cols`` input.

    Covers the cross-attention, each latent self-attention layer and the
    feed-forward blocks; layer norms and softmax are not counted.
    """
    lp, la, f = config.n_latents, config.latent_dim, config.ffn_hidden
    hc, dc = config.cross_heads, config.cross_head_dim
    hs, ds = config.latent_heads, config.latent_head_dim
    lm, d = input_rows, input_cols
    ffn = 2 * lp * la * f
    cross = hc * (lp * la * dc + 2 * lm * d * dc + 2 * lp * lm * dc) + lp * hc * dc * la
    latent = hs * (3 * lp * la * ds + 2 * lp * lp * ds) + lp * hs * ds * la
    return cross + ffn + config.depth * (latent + ffn)
