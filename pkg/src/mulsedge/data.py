"""Synthetic multimodal classification tasks with controllable modality quality."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .perceiver import ModalitySpec, Registry, TaskSpec

__all__ = ["SyntheticModality", "SyntheticTaskSpec", "TaskData", "Split", "generate_task"]


@dataclass(frozen=True)
class SyntheticModality:
    rows: int
    cols: int
    informativeness: float = 1.0
    noise_sigma: float = 1.0
    name: str = ""


@dataclass(frozen=True)
class SyntheticTaskSpec:
    n_classes: int
    modalities: tuple[SyntheticModality, ...]
    n_train: int = 200
    n_cal: int = 200
    n_test: int = 200
    seed: int = 0

    def registry(self, n_bands: int = 2) -> Registry:
        mods = [ModalitySpec(m.name or f"m{i}", m.rows, m.cols) for i, m in enumerate(self.modalities)]
        task = TaskSpec("task0", tuple(range(len(mods))), self.n_classes)
        return Registry(mods, [task], n_bands=n_bands)


@dataclass
class TaskData:
    inputs: dict[int, np.ndarray]
    labels: np.ndarray
    ids: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "TaskData":
        return TaskData({m: a[idx] for m, a in self.inputs.items()}, self.labels[idx], self.ids[idx])


@dataclass
class Split:
    train: TaskData
    cal: TaskData
    test: TaskData
    spec: SyntheticTaskSpec | None = field(default=None, repr=False)


def generate_task(spec: SyntheticTaskSpec) -> Split:
    """Draw per-class prototypes per modality and sample around them.

    A sample of class ``k`` in modality ``m`` is
    ``informativeness_m * prototype[m, k] + noise_sigma_m * N(0, 1)``.
    Splits are disjoint and fully determined by ``spec.seed``.
    """
    if spec.n_classes < 2:
        raise ValueError(f"need at least two classes, got {spec.n_classes}")
    if not spec.modalities:
        raise ValueError("need at least one modality")
    for m in spec.modalities:
        if not 0.0 <= m.informativeness <= 1.0:
            raise ValueError(f"informativeness must lie in [0, 1], got {m.informativeness}")
        if m.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
    rng = np.random.default_rng(spec.seed)
    protos = [rng.standard_normal((spec.n_classes, m.rows, m.cols)) for m in spec.modalities]
    n = spec.n_train + spec.n_cal + spec.n_test
    labels = rng.integers(0, spec.n_classes, n)
    inputs = {}
    for i, (m, p) in enumerate(zip(spec.modalities, protos)):
        noise = rng.standard_normal((n, m.rows, m.cols))
        inputs[i] = m.informativeness * p[labels] + m.noise_sigma * noise
    full = TaskData(inputs, labels, np.arange(n))
    a, b = spec.n_train, spec.n_train + spec.n_cal
    return Split(full.subset(slice(0, a)), full.subset(slice(a, b)), full.subset(slice(b, n)), spec)
