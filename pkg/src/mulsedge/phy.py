"""Q9.9 fixed-point payloads, Gray-coded square QAM and an AWGN channel.

Reals are carried as 18-bit two's-complement words (9 integer bits including
sign, 9 fraction bits), most-significant bit first. Out-of-range values
saturate. Symbols have unit average energy, so ``snr_db`` is Es/N0.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import kernels

__all__ = [
    "CodecError",
    "FixedPointCodec",
    "Q9_9",
    "PayloadKind",
    "BitPayload",
    "Modulation",
    "ChannelConfig",
    "encode_reals",
    "decode_reals",
    "encode_mask",
    "decode_mask",
    "constellation",
    "modulate",
    "demodulate",
    "transmit",
    "perturb_reals",
    "airtime",
    "qfunc",
    "ber_qpsk_theory",
    "ber_qam_theory",
]

WORD_BITS = 18


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class FixedPointCodec:
    int_bits: int = 9
    frac_bits: int = 9

    @property
    def word_bits(self) -> int:
        return self.int_bits + self.frac_bits

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return -(2.0 ** (self.int_bits - 1))

    @property
    def max_value(self) -> float:
        return 2.0 ** (self.int_bits - 1) - self.resolution

    def quantize(self, values) -> np.ndarray:
        """Nearest grid value with saturation, without going through bits."""
        v = np.asarray(values, dtype=np.float64)
        k = np.floor(v / self.resolution + 0.5)
        return np.clip(k * self.resolution, self.min_value, self.max_value)


Q9_9 = FixedPointCodec()


class PayloadKind(enum.IntEnum):
    RAW_DATA = 0
    LATENT_DATA = 1
    SOFTMAX = 2
    CONFORMAL_SET = 3
    RESULT = 4
    CONTROL = 5

    @property
    def real_valued(self) -> bool:
        return self in (PayloadKind.RAW_DATA, PayloadKind.LATENT_DATA,
                        PayloadKind.SOFTMAX, PayloadKind.RESULT)


@dataclass(frozen=True)
class BitPayload:
    bits: np.ndarray
    kind: PayloadKind = PayloadKind.RAW_DATA

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", np.ascontiguousarray(self.bits, dtype=np.uint8))

    @property
    def n_bits(self) -> int:
        return int(self.bits.shape[0])

    def __len__(self) -> int:
        return self.n_bits

    def __eq__(self, other) -> bool:
        return (isinstance(other, BitPayload) and self.kind == other.kind
                and np.array_equal(self.bits, other.bits))

    def to_bytes(self) -> bytes:
        """Dump format: kind (1 byte), bit length (u32 LE), bits packed MSB-first."""
        return struct.pack("<BI", int(self.kind), self.n_bits) + np.packbits(self.bits).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BitPayload":
        if len(blob) < 5:
            raise CodecError("payload dump shorter than its header")
        kind, n = struct.unpack_from("<BI", blob, 0)
        body = np.frombuffer(blob, dtype=np.uint8, offset=5)
        if body.size * 8 < n:
            raise CodecError(f"payload dump holds {body.size * 8} bits, header says {n}")
        return cls(np.unpackbits(body)[:n], PayloadKind(kind))


def encode_reals(values, kind: PayloadKind = PayloadKind.RAW_DATA) -> BitPayload:
    v = np.ascontiguousarray(np.asarray(values, dtype=np.float64).reshape(-1))
    if np.isnan(v).any():
        raise CodecError("cannot encode NaN")
    return BitPayload(kernels.q99_encode(v), kind)


def decode_reals(p: BitPayload) -> np.ndarray:
    if p.n_bits % WORD_BITS:
        raise CodecError(f"payload of {p.n_bits} bits is not a whole number of {WORD_BITS}-bit words")
    return kernels.q99_decode(p.bits)


def encode_mask(mask) -> BitPayload:
    """Prediction-set membership as one bit per class."""
    return BitPayload(np.asarray(mask, dtype=np.uint8).reshape(-1), PayloadKind.CONFORMAL_SET)


def decode_mask(p: BitPayload) -> np.ndarray:
    return p.bits.astype(bool)


class Modulation(enum.Enum):
    QPSK = 1
    QAM64 = 3

    @property
    def bits_per_axis(self) -> int:
        return self.value

    @property
    def bits_per_symbol(self) -> int:
        return 2 * self.value

    @property
    def order(self) -> int:
        return 1 << self.bits_per_symbol

    @property
    def scale(self) -> float:
        levels = 1 << self.value
        return 1.0 / math.sqrt(2.0 * (levels * levels - 1) / 3.0)


def constellation(mod: Modulation) -> np.ndarray:
    """Symbol for every bit pattern, indexed by the pattern read MSB-first."""
    k = mod.bits_per_symbol
    pats = ((np.arange(mod.order)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    re, im = kernels.qam_map(np.ascontiguousarray(pats.reshape(-1)), mod.bits_per_axis, mod.scale)
    return re + 1j * im


def modulate(bits, mod: Modulation) -> np.ndarray:
    b = np.asarray(bits, dtype=np.uint8).reshape(-1)
    k = mod.bits_per_symbol
    pad = (-b.shape[0]) % k
    if pad:
        b = np.concatenate([b, np.zeros(pad, dtype=np.uint8)])
    re, im = kernels.qam_map(np.ascontiguousarray(b), mod.bits_per_axis, mod.scale)
    return re + 1j * im


def demodulate(symbols, mod: Modulation, n_bits: int | None = None) -> np.ndarray:
    s = np.asarray(symbols)
    bits = kernels.qam_demap(np.ascontiguousarray(s.real), np.ascontiguousarray(s.imag),
                             mod.bits_per_axis, mod.scale)
    return bits if n_bits is None else bits[:n_bits]


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = math.inf
    modulation: Modulation = Modulation.QAM64
    rate_bps: float = 1e6
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.rate_bps > 0:
            raise ValueError(f"rate_bps must be positive, got {self.rate_bps}")

    def with_(self, **kw) -> "ChannelConfig":
        return replace(self, **kw)


def transmit(p: BitPayload, cfg: ChannelConfig, rng: np.random.Generator | None = None) -> BitPayload:
    """Send ``p`` over AWGN at ``cfg.snr_db`` (Es/N0) with hard-decision demapping.

    An infinite SNR skips the channel. Without an explicit ``rng`` the noise
    comes from ``cfg.seed``.
    """
    if math.isinf(cfg.snr_db) and cfg.snr_db > 0:
        return BitPayload(p.bits.copy(), p.kind)
    if p.n_bits == 0:
        return BitPayload(p.bits.copy(), p.kind)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    sym = modulate(p.bits, cfg.modulation)
    n0 = 10.0 ** (-cfg.snr_db / 10.0)
    sigma = math.sqrt(n0 / 2.0)
    noise = sigma * (rng.standard_normal(sym.shape[0]) + 1j * rng.standard_normal(sym.shape[0]))
    return BitPayload(demodulate(sym + noise, cfg.modulation, p.n_bits), p.kind)


def perturb_reals(values, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian noise on the reals themselves at the given signal-to-noise ratio."""
    v = np.asarray(values, dtype=np.float64)
    if math.isinf(snr_db) and snr_db > 0:
        return v.copy()
    power = float(np.mean(v * v)) if v.size else 0.0
    sigma = math.sqrt(power * 10.0 ** (-snr_db / 10.0))
    return v + sigma * rng.standard_normal(v.shape)


def airtime(p: BitPayload | int, cfg: ChannelConfig | float) -> float:
    n = p if isinstance(p, (int, np.integer)) else p.n_bits
    rate = cfg.rate_bps if isinstance(cfg, ChannelConfig) else float(cfg)
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return n / rate


def qfunc(x):
    return 0.5 * np.vectorize(math.erfc)(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def ber_qpsk_theory(ebn0_db):
    """Gray-coded QPSK bit error rate, ``Q(sqrt(2 Eb/N0))``."""
    ebn0 = 10.0 ** (np.asarray(ebn0_db, dtype=np.float64) / 10.0)
    return qfunc(np.sqrt(2.0 * ebn0))


def ber_qam_theory(esn0_db, order: int = 64):
    """Nearest-neighbour approximation for Gray-coded square M-QAM."""
    k = math.log2(order)
    esn0 = 10.0 ** (np.asarray(esn0_db, dtype=np.float64) / 10.0)
    return (4.0 / k) * (1.0 - 1.0 / math.sqrt(order)) * qfunc(np.sqrt(3.0 * esn0 / (order - 1)))
