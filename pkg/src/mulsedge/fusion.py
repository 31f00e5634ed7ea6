"""Server-side combination of per-modality softmax outputs and prediction sets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .conformal import AdaptiveThreshold, PredictionSet

__all__ = [
    "FusionError",
    "ModalityReport",
    "FusedScore",
    "Simple",
    "Complex",
    "ewc",
    "sssc",
    "fuse",
    "majority_vote",
    "route",
    "argmax_low",
]


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class ModalityReport:
    modality_id: int
    softmax: np.ndarray
    set_size: int

    @classmethod
    def from_set(cls, modality_id: int, softmax, pset: PredictionSet | Sequence[int]) -> "ModalityReport":
        return cls(modality_id, np.asarray(softmax, dtype=np.float64), len(pset))


@dataclass(frozen=True)
class FusedScore:
    c_t: np.ndarray
    combiner: str
    n_reports: int
    beta: float | None = None

    @property
    def prediction(self) -> int:
        return argmax_low(self.c_t)

    @property
    def confidence(self) -> float:
        """Max fused score on the [0, 1] routing scale."""
        m = float(np.max(self.c_t))
        return m / self.n_reports if self.combiner == "ewc" else m


@dataclass(frozen=True)
class Simple:
    prediction: int


@dataclass(frozen=True)
class Complex:
    pass


Route = Union[Simple, Complex]


def argmax_low(c) -> int:
    """Argmax with ties going to the lowest index."""
    return int(np.argmax(np.asarray(c)))


def _stack(reports: Sequence[ModalityReport]) -> np.ndarray:
    if not reports:
        raise FusionError("no modality reports")
    sizes = {np.asarray(r.softmax).shape[-1] for r in reports}
    if len(sizes) != 1:
        raise FusionError(f"class-count mismatch across reports: {sorted(sizes)}")
    return np.stack([np.asarray(r.softmax, dtype=np.float64).reshape(-1) for r in reports])


def ewc(reports: Sequence[ModalityReport]) -> FusedScore:
    """Equal-weight combination: plain sum of softmax vectors."""
    c = _stack(reports)
    return FusedScore(c.sum(axis=0), "ewc", len(reports))


def sssc(reports: Sequence[ModalityReport], beta: float = 1.0) -> FusedScore:
    """Set-size-scaled combination, weights ``|u_m| ** -beta`` normalised."""
    c = _stack(reports)
    if beta < 1:
        raise FusionError(f"beta must be >= 1, got {beta}")
    sizes = np.array([r.set_size for r in reports], dtype=np.float64)
    if np.any(sizes < 1):
        raise FusionError("prediction set size must be at least 1")
    # weights relative to the smallest set keep beta -> inf finite
    w = (sizes.min() / sizes) ** beta
    return FusedScore((w[:, None] * c).sum(axis=0) / w.sum(), "sssc", len(reports), beta)


def fuse(reports: Sequence[ModalityReport], combiner: str = "sssc", beta: float = 1.0) -> FusedScore:
    if combiner == "ewc":
        return ewc(reports)
    if combiner == "sssc":
        return sssc(reports, beta)
    raise FusionError(f"unknown combiner {combiner!r}")


def majority_vote(labels: Sequence[int], rng: np.random.Generator | None = None) -> int:
    """Most common label; ties broken uniformly at random with ``rng``."""
    if len(labels) == 0:
        raise FusionError("no labels to vote on")
    vals, counts = np.unique(np.asarray(labels), return_counts=True)
    tied = vals[counts == counts.max()]
    if tied.size == 1:
        return int(tied[0])
    rng = rng if rng is not None else np.random.default_rng()
    return int(tied[rng.integers(tied.size)])


def route(fused: FusedScore, thr: AdaptiveThreshold) -> Route:
    """Simple when the fused confidence reaches ``q_e``, Complex otherwise."""
    if thr.combiner != fused.combiner:
        raise FusionError(
            f"threshold calibrated for {thr.combiner!r}, fused score uses {fused.combiner!r}"
        )
    if fused.confidence >= thr.q_e:
        return Simple(fused.prediction)
    return Complex()
