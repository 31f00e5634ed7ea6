"""Scenario configs, system calibration, experiment sweeps and CSV reports."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .conformal import (AdaptiveThreshold, calibrate_adaptive_threshold, calibrate_quantile,
                        prediction_set)
from .data import Split, SyntheticModality, SyntheticTaskSpec, generate_task
from .fusion import ModalityReport, fuse
from .metrics import Approach, ComputeCost, DeviceProfile, ServerProfile
from .perceiver import PerceiverConfig, PerceiverModel, train
from .phy import Q9_9
from .protocol import Calibration, SimConfig, Topology, run_dataset, samples_from

__all__ = [
    "ConfigError",
    "Scenario",
    "ReportRow",
    "calibrate_system",
    "train_model",
    "run_point",
    "run_experiment",
    "write_csv",
    "read_csv",
    "summarize",
    "derive_seeds",
]


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    task: SyntheticTaskSpec
    model: PerceiverConfig = field(default_factory=PerceiverConfig)
    epochs: int = 100
    batch_size: int = 32
    approaches: tuple[str, ...] = ("A1", "A2", "A3", "A4", "A5")
    combiner: str = "sssc"
    beta: float = 1.0
    alpha: float = 0.1
    alpha2: float = 0.3
    rates: tuple[float, ...] = (1e6,)
    snr: dict[int, float] = field(default_factory=dict)
    seeds: tuple[int, ...] = (0,)
    reliable_control: bool = True
    noise_mode: str = "symbol"
    device: DeviceProfile | None = None
    server: ServerProfile | None = None
    t_b: float | None = None
    name: str = "task0"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
        try:
            t = d["task"]
            mods = tuple(SyntheticModality(**m) for m in t["modalities"])
            task = SyntheticTaskSpec(
                n_classes=int(t["n_classes"]), modalities=mods,
                n_train=int(t.get("n_train", 200)), n_cal=int(t.get("n_cal", 200)),
                n_test=int(t.get("n_test", 200)), seed=int(t.get("seed", 0)))
            kw = {}
            for f in fields(cls):
                if f.name in ("task",) or f.name not in d:
                    continue
                kw[f.name] = d[f.name]
            if "model" in kw:
                kw["model"] = PerceiverConfig(**kw["model"])
            for k in ("approaches", "rates", "seeds"):
                if k in kw:
                    kw[k] = tuple(kw[k])
            if "approaches" in kw:
                kw["approaches"] = tuple(Approach.parse(a).value for a in kw["approaches"])
            if "snr" in kw:
                kw["snr"] = {int(k): float(v) for k, v in kw["snr"].items()}
            if "device" in kw:
                kw["device"] = DeviceProfile(**kw["device"])
            if "server" in kw:
                kw["server"] = ServerProfile(**kw["server"])
            sc = cls(task=task, **kw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed scenario: {exc}") from exc
        if sc.combiner not in ("ewc", "sssc"):
            raise ConfigError(f"unknown combiner {sc.combiner!r}")
        if not 0 < sc.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def sim_config(self, rate: float, seed: int) -> SimConfig:
        kw = dict(rate_bps=rate, combiner=self.combiner, beta=self.beta,
                  reliable_control=self.reliable_control, noise_mode=self.noise_mode, seed=seed)
        if self.device is not None:
            kw["device"] = self.device
        if self.server is not None:
            kw["server"] = self.server
        if self.t_b is not None:
            kw["cost"] = ComputeCost(self.t_b)
        return SimConfig(**kw)


@dataclass(frozen=True, order=True)
class ReportRow:
    task: str
    approach: str
    combiner: str
    beta: float
    alpha: float
    alpha2: float
    rate_bps: float
    snr_map: str
    accuracy: float
    latency_s: float
    energy_j: float
    p_h: float
    seed: int


def derive_seeds(root: int, n: int) -> list[int]:
    """Independent per-point seeds split from one root seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(root).spawn(n)]


def calibrate_system(model: PerceiverModel, task_id: int, cal, alpha: float = 0.1,
                     alpha2: float = 0.3, beta: float = 1.0) -> Calibration:
    """Per-modality conformal quantiles and per-combiner routing thresholds."""
    task = model.registry.task(task_id)
    probs = model.predict_unimodal(task_id, cal.inputs)
    y = np.asarray(cal.labels)
    quantiles = {}
    for m in task.modalities:
        scores = 1.0 - probs[m][np.arange(len(y)), y]
        quantiles[(task_id, m)] = calibrate_quantile(scores, alpha, task_id, m)
    thresholds = {}
    for combiner in ("ewc", "sssc"):
        conf, ok = [], []
        for i in range(len(y)):
            reports = []
            for m in task.modalities:
                p = probs[m][i]
                size = len(prediction_set(p, quantiles[(task_id, m)]))
                reports.append(ModalityReport(m, Q9_9.quantize(p), size))
            fused = fuse(reports, combiner, beta)
            conf.append(fused.confidence)
            ok.append(fused.prediction == y[i])
        thresholds[(task_id, combiner)] = calibrate_adaptive_threshold(conf, ok, alpha2, task_id, combiner)
    return Calibration(quantiles, thresholds)


def train_model(sc: Scenario, seed: int, split: Split | None = None) -> tuple[PerceiverModel, Split]:
    split = split if split is not None else generate_task(sc.task)
    model = PerceiverModel(sc.task.registry(), sc.model, seed=seed)
    train(model, split, 0, epochs=sc.epochs, batch_size=sc.batch_size, seed=seed)
    return model, split


def _snr_str(snr: dict[int, float]) -> str:
    return ";".join(f"{k}:{v:g}" for k, v in sorted(snr.items())) or "clean"


def run_point(sc: Scenario, model: PerceiverModel, split: Split, calib: Calibration,
              seed: int, approaches: Iterable[str] | None = None,
              rates: Iterable[float] | None = None) -> list[ReportRow]:
    topo = Topology.from_registry(model.registry)
    samples = samples_from(split.test, 0, sc.snr)
    rows = []
    for a in approaches or sc.approaches:
        for rate in rates or sc.rates:
            res = run_dataset(a, samples, topo, model, calib, sc.sim_config(rate, seed))
            p_h = res.p_h if a == "A5" else float("nan")
            rows.append(ReportRow(sc.name, a, sc.combiner, sc.beta, sc.alpha, sc.alpha2,
                                  float(rate), _snr_str(sc.snr), res.accuracy,
                                  res.mean_latency, res.mean_energy, p_h, seed))
    return rows


def _one_seed(args) -> list[ReportRow]:
    sc, seed = args
    model, split = train_model(sc, seed)
    calib = calibrate_system(model, 0, split.cal, sc.alpha, sc.alpha2, sc.beta)
    return run_point(sc, model, split, calib, seed)


def run_experiment(sc: Scenario, jobs: int = 1) -> list[ReportRow]:
    """Train, calibrate and simulate every approach x rate x seed."""
    work = [(sc, s) for s in sc.seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            chunks = list(ex.map(_one_seed, work))
    else:
        chunks = [_one_seed(w) for w in work]
    return sorted(r for c in chunks for r in c)


_HEADER = [f.name for f in fields(ReportRow)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(rows: Sequence[ReportRow], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_HEADER)
    for r in sorted(rows):
        w.writerow([_fmt(getattr(r, k)) for k in _HEADER])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path) -> list[ReportRow]:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for f in fields(ReportRow):
                raw = rec[f.name]
                kw[f.name] = int(raw) if f.type in ("int", int) else (
                    float(raw) if f.type in ("float", float) else raw)
            out.append(ReportRow(**kw))
    return out


def summarize(rows: Sequence[ReportRow]) -> list[dict]:
    """Mean and sample standard deviation over seeds for each scenario point."""
    groups: dict[tuple, list[ReportRow]] = {}
    for r in rows:
        key = (r.task, r.approach, r.combiner, r.beta, r.alpha, r.alpha2, r.rate_bps, r.snr_map)
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups):
        g = groups[key]
        rec = dict(zip(("task", "approach", "combiner", "beta", "alpha", "alpha2",
                        "rate_bps", "snr_map"), key))
        rec["n_seeds"] = len(g)
        for metric in ("accuracy", "latency_s", "energy_j", "p_h"):
            vals = np.array([getattr(r, metric) for r in g], dtype=float)
            rec[f"{metric}_mean"] = float(np.mean(vals))
            rec[f"{metric}_std"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out.append(rec)
    return out
