"""Split conformal prediction for classifier softmax outputs.

Scores are ``1 - p[y]``; the calibrated quantile ``q_hat`` turns a softmax
vector into the set of classes whose probability exceeds ``1 - q_hat``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CalibrationError",
    "CalibrationRecord",
    "ConformalQuantile",
    "PredictionSet",
    "AdaptiveThreshold",
    "conformal_score",
    "calibrate_quantile",
    "prediction_set",
    "coverage",
    "calibrate_adaptive_threshold",
    "save_calibration",
    "load_calibration",
]


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationRecord:
    softmax: np.ndarray
    true_label: int


@dataclass(frozen=True)
class ConformalQuantile:
    q_hat: float
    alpha: float
    n_cal: int
    task_id: int = 0
    modality_id: int = 0


@dataclass(frozen=True)
class PredictionSet:
    members: frozenset[int]
    alpha: float

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, k) -> bool:
        return k in self.members

    def mask(self, n_classes: int) -> np.ndarray:
        m = np.zeros(n_classes, dtype=bool)
        m[list(self.members)] = True
        return m


@dataclass(frozen=True)
class AdaptiveThreshold:
    q_e: float
    alpha2: float
    task_id: int = 0
    combiner: str = "sssc"


def conformal_score(r: CalibrationRecord) -> float:
    c = np.asarray(r.softmax, dtype=np.float64)
    if not 0 <= r.true_label < c.shape[0]:
        raise CalibrationError(f"label {r.true_label} out of range for {c.shape[0]} classes")
    return float(1.0 - c[r.true_label])


def calibrate_quantile(scores: Sequence[float], alpha: float, task_id: int = 0,
                       modality_id: int = 0) -> ConformalQuantile:
    """Finite-sample split-conformal quantile.

    ``q_hat`` is the ``ceil((n+1)(1-alpha))``-th smallest score, clamped to
    the largest score when that rank exceeds ``n``.
    """
    s = np.sort(np.asarray(scores, dtype=np.float64).reshape(-1))
    n = s.shape[0]
    if n == 0:
        raise CalibrationError("no calibration scores")
    if not 0.0 < alpha < 1.0:
        raise CalibrationError(f"alpha must lie in (0, 1), got {alpha}")
    rank = math.ceil((n + 1) * (1.0 - alpha) - 1e-12)
    rank = min(max(rank, 1), n)
    q = float(min(max(s[rank - 1], 0.0), 1.0))
    return ConformalQuantile(q, alpha, n, task_id, modality_id)


def prediction_set(c, q: ConformalQuantile | float) -> PredictionSet:
    """Classes with probability strictly above ``1 - q_hat``; never empty."""
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    q_hat = q.q_hat if isinstance(q, ConformalQuantile) else float(q)
    alpha = q.alpha if isinstance(q, ConformalQuantile) else float("nan")
    members = np.flatnonzero(c > 1.0 - q_hat)
    if members.size == 0:
        members = np.array([int(np.argmax(c))])
    return PredictionSet(frozenset(int(k) for k in members), alpha)


def coverage(test: Iterable[CalibrationRecord], q: ConformalQuantile | float) -> float:
    hits = total = 0
    for r in test:
        total += 1
        hits += r.true_label in prediction_set(r.softmax, q)
    if total == 0:
        raise CalibrationError("empty test set")
    return hits / total


def calibrate_adaptive_threshold(max_scores: Sequence[float], correct: Sequence[bool],
                                 alpha2: float = 0.3, task_id: int = 0,
                                 combiner: str = "sssc") -> AdaptiveThreshold:
    """Percentile ``alpha2`` of fused max scores over correctly fused samples.

    ``max_scores`` must already be on the routing scale (for EWC the fused
    maximum divided by the number of modalities).
    """
    s = np.asarray(max_scores, dtype=np.float64).reshape(-1)
    ok = np.asarray(correct, dtype=bool).reshape(-1)
    if s.shape != ok.shape:
        raise CalibrationError("scores and correctness flags differ in length")
    if not 0.0 <= alpha2 <= 1.0:
        raise CalibrationError(f"alpha2 must lie in [0, 1], got {alpha2}")
    good = s[ok]
    if good.size == 0:
        raise CalibrationError("no correctly classified calibration samples")
    return AdaptiveThreshold(float(np.quantile(good, alpha2)), alpha2, task_id, combiner)


def save_calibration(path, quantiles: Sequence[ConformalQuantile],
                     thresholds: Sequence[AdaptiveThreshold] = ()) -> None:
    """JSON calibration artifact with one entry per scope."""
    doc = {
        "quantiles": [asdict(q) for q in quantiles],
        "thresholds": [asdict(t) for t in thresholds],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_calibration(path) -> tuple[list[ConformalQuantile], list[AdaptiveThreshold]]:
    doc = json.loads(Path(path).read_text())
    return ([ConformalQuantile(**q) for q in doc.get("quantiles", [])],
            [AdaptiveThreshold(**t) for t in doc.get("thresholds", [])])
