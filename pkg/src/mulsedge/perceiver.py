"""Unified Perceiver encoders, task heads and server-side multimodal fusion.

One shared encoder (``A``) maps any registered modality to a fixed
``n_latents x latent_dim`` latent matrix. A second encoder (``B``) refines that
latent for the per-task classification heads used by conformal prediction, and
the multimodal block (``M``) fuses latents pairwise on the server.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import tensor as T
from .tensor import Matrix

__all__ = [
    "RegistryError",
    "DataLeakError",
    "ModalitySpec",
    "TaskSpec",
    "Registry",
    "PerceiverConfig",
    "ModalityTensor",
    "PaddedInput",
    "PerceiverModel",
    "TrainResult",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]


class RegistryError(KeyError):
    """Unknown modality or task."""


class DataLeakError(ValueError):
    """Train, calibration and test splits share samples."""


@dataclass(frozen=True)
class ModalitySpec:
    name: str
    rows: int
    cols: int


@dataclass(frozen=True)
class TaskSpec:
    name: str
    modalities: tuple[int, ...]
    n_classes: int


@dataclass
class Registry:
    """Registered modalities and tasks; fixes the common padded input shape."""

    modalities: list[ModalitySpec]
    tasks: list[TaskSpec]
    n_bands: int = 2

    def __post_init__(self) -> None:
        if not self.modalities:
            raise RegistryError("registry needs at least one modality")
        for t in self.tasks:
            for m in t.modalities:
                self.modality(m)

    def modality(self, mid: int) -> ModalitySpec:
        if not 0 <= mid < len(self.modalities):
            raise RegistryError(f"unregistered modality {mid}")
        return self.modalities[mid]

    def task(self, tid: int) -> TaskSpec:
        if not 0 <= tid < len(self.tasks):
            raise RegistryError(f"unknown task {tid}")
        return self.tasks[tid]

    @property
    def n_modalities(self) -> int:
        return len(self.modalities)

    @property
    def n_position(self) -> int:
        return 2 * self.n_bands

    @property
    def max_rows(self) -> int:
        return max(m.rows for m in self.modalities)

    @property
    def max_raw_cols(self) -> int:
        return max(m.cols for m in self.modalities)

    @property
    def max_cols(self) -> int:
        return self.max_raw_cols + self.n_modalities + self.n_position

    def to_dict(self) -> dict:
        return {
            "modalities": [asdict(m) for m in self.modalities],
            "tasks": [dict(asdict(t), modalities=list(t.modalities)) for t in self.tasks],
            "n_bands": self.n_bands,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Registry":
        return cls(
            modalities=[ModalitySpec(**m) for m in d["modalities"]],
            tasks=[TaskSpec(t["name"], tuple(t["modalities"]), t["n_classes"]) for t in d["tasks"]],
            n_bands=d.get("n_bands", 2),
        )


@dataclass(frozen=True)
class PerceiverConfig:
    n_latents: int = 4
    latent_dim: int = 8
    ffn_hidden: int = 16
    cross_heads: int = 1
    cross_head_dim: int = 8
    latent_heads: int = 2
    latent_head_dim: int = 8
    depth: int = 1
    lr: float = 1e-3
    weight_decay: float = 1e-3

    @classmethod
    def full_scale(cls) -> "PerceiverConfig":
        return cls(
            n_latents=20,
            latent_dim=64,
            ffn_hidden=64,
            cross_heads=1,
            cross_head_dim=64,
            latent_heads=6,
            latent_head_dim=64,
            depth=1,
        )


@dataclass
class ModalityTensor:
    modality_id: int
    data: np.ndarray
    task_id: int = 0


@dataclass
class PaddedInput:
    data: Matrix
    modality_id: int
    rows: int


# ---------------------------------------------------------------------------
# padding / embedding
# ---------------------------------------------------------------------------

def fourier_features(n_rows: int, n_bands: int) -> np.ndarray:
    """``n_rows x 2*n_bands`` sin/cos features of the normalised row index."""
    pos = np.linspace(-1.0, 1.0, n_rows) if n_rows > 1 else np.zeros(1)
    freqs = np.pi * 2.0 ** np.arange(n_bands)
    ang = pos[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def pad_batch(registry: Registry, modality_id: int, raw: np.ndarray) -> np.ndarray:
    """Lay out ``[raw, 0 | one-hot | position]`` for a stack of samples.

    The raw block is zero-padded to the widest registered modality so the
    one-hot and position blocks sit in the same columns for every modality.
    ``raw`` has shape ``(N, rows, cols)``; the result is
    ``(N, max_rows, max_cols)`` with zero rows below the sample.
    """
    spec = registry.modality(modality_id)
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim == 2:
        raw = raw[None]
    n, r, c = raw.shape
    if (r, c) != (spec.rows, spec.cols):
        raise T.ShapeError(
            f"modality {modality_id} expects {spec.rows}x{spec.cols}, got {r}x{c}"
        )
    out = np.zeros((n, registry.max_rows, registry.max_cols))
    out[:, :r, :c] = raw
    w = registry.max_raw_cols
    out[:, :r, w + modality_id] = 1.0
    off = w + registry.n_modalities
    out[:, :r, off:off + registry.n_position] = fourier_features(r, registry.n_bands)
    return out


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

class _Init:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def linear(self, fan_in: int, fan_out: int, name: str) -> Matrix:
        bound = 1.0 / math.sqrt(fan_in)
        return Matrix(self.rng.uniform(-bound, bound, (fan_in, fan_out)), True, name)

    def bias(self, n: int, name: str) -> Matrix:
        return Matrix(np.zeros((1, n)), True, name)

    def ones(self, n: int, name: str) -> Matrix:
        return Matrix(np.ones((1, n)), True, name)


def _attention_params(init: _Init, prefix: str, q_dim: int, kv_dim: int,
                      heads: int, head_dim: int, out_dim: int) -> dict[str, Matrix]:
    p = {
        f"{prefix}.ln_q.g": init.ones(q_dim, f"{prefix}.ln_q.g"),
        f"{prefix}.ln_q.b": init.bias(q_dim, f"{prefix}.ln_q.b"),
    }
    if kv_dim is not None:
        p[f"{prefix}.ln_kv.g"] = init.ones(kv_dim, f"{prefix}.ln_kv.g")
        p[f"{prefix}.ln_kv.b"] = init.bias(kv_dim, f"{prefix}.ln_kv.b")
    src = q_dim if kv_dim is None else kv_dim
    for h in range(heads):
        p[f"{prefix}.h{h}.wq"] = init.linear(q_dim, head_dim, f"{prefix}.h{h}.wq")
        p[f"{prefix}.h{h}.wk"] = init.linear(src, head_dim, f"{prefix}.h{h}.wk")
        p[f"{prefix}.h{h}.wv"] = init.linear(src, head_dim, f"{prefix}.h{h}.wv")
    p[f"{prefix}.wo"] = init.linear(heads * head_dim, out_dim, f"{prefix}.wo")
    return p


def _ffn_params(init: _Init, prefix: str, dim: int, hidden: int, out: int | None = None,
                norm: bool = True) -> dict[str, Matrix]:
    out = dim if out is None else out
    p = {}
    if norm:
        p[f"{prefix}.ln.g"] = init.ones(dim, f"{prefix}.ln.g")
        p[f"{prefix}.ln.b"] = init.bias(dim, f"{prefix}.ln.b")
    p[f"{prefix}.w1"] = init.linear(dim, hidden, f"{prefix}.w1")
    p[f"{prefix}.b1"] = init.bias(hidden, f"{prefix}.b1")
    p[f"{prefix}.w2"] = init.linear(hidden, out, f"{prefix}.w2")
    p[f"{prefix}.b2"] = init.bias(out, f"{prefix}.b2")
    return p


def _block_params(init: _Init, prefix: str, cfg: PerceiverConfig, in_dim: int) -> dict[str, Matrix]:
    la = cfg.latent_dim
    p = _attention_params(init, f"{prefix}.cross", la, in_dim, cfg.cross_heads, cfg.cross_head_dim, la)
    p.update(_ffn_params(init, f"{prefix}.cross_ffn", la, cfg.ffn_hidden))
    for d in range(cfg.depth):
        p.update(_attention_params(init, f"{prefix}.self{d}", la, None,
                                   cfg.latent_heads, cfg.latent_head_dim, la))
        p.update(_ffn_params(init, f"{prefix}.self{d}_ffn", la, cfg.ffn_hidden))
    return p


# ---------------------------------------------------------------------------
# forward building blocks
# ---------------------------------------------------------------------------

def _attend(P: Mapping[str, Matrix], prefix: str, latent: Matrix, source: Matrix | None,
            heads: int, head_dim: int, attn_log: list | None) -> Matrix:
    q_in = T.layer_norm(latent, P[f"{prefix}.ln_q.g"], P[f"{prefix}.ln_q.b"])
    if source is None:
        kv_in = q_in
    else:
        kv_in = T.layer_norm(source, P[f"{prefix}.ln_kv.g"], P[f"{prefix}.ln_kv.b"])
    outs = []
    inv = 1.0 / math.sqrt(head_dim)
    for h in range(heads):
        q = T.matmul(q_in, P[f"{prefix}.h{h}.wq"])
        k = T.matmul(kv_in, P[f"{prefix}.h{h}.wk"])
        v = T.matmul(kv_in, P[f"{prefix}.h{h}.wv"])
        w = T.softmax_rows(T.scale(T.matmul(q, T.transpose(k)), inv))
        if attn_log is not None:
            attn_log.append(w.data)
        outs.append(T.matmul(w, v))
    cat = outs[0] if heads == 1 else T.concat_cols(outs)
    return T.add(latent, T.matmul(cat, P[f"{prefix}.wo"]))


def _ffn(P: Mapping[str, Matrix], prefix: str, x: Matrix, residual: bool = True) -> Matrix:
    h = T.layer_norm(x, P[f"{prefix}.ln.g"], P[f"{prefix}.ln.b"]) if f"{prefix}.ln.g" in P else x
    h = T.gelu(T.add_bias(T.matmul(h, P[f"{prefix}.w1"]), P[f"{prefix}.b1"]))
    h = T.add_bias(T.matmul(h, P[f"{prefix}.w2"]), P[f"{prefix}.b2"])
    return T.add(x, h) if residual else h


def _perceiver_block(P: Mapping[str, Matrix], prefix: str, cfg: PerceiverConfig,
                     latent: Matrix, source: Matrix, attn_log: list | None = None) -> Matrix:
    lat = _attend(P, f"{prefix}.cross", latent, source, cfg.cross_heads, cfg.cross_head_dim, attn_log)
    lat = _ffn(P, f"{prefix}.cross_ffn", lat)
    for d in range(cfg.depth):
        lat = _attend(P, f"{prefix}.self{d}", lat, None, cfg.latent_heads, cfg.latent_head_dim, attn_log)
        lat = _ffn(P, f"{prefix}.self{d}_ffn", lat)
    return lat


def _to_probs(logits: np.ndarray) -> np.ndarray:
    z = logits.reshape(-1) - logits.max()
    e = np.exp(z)
    return e / e.sum()


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

_STAGE1 = ("A.", "M.", "MH.")
_STAGE2 = ("B.", "P.")


class PerceiverModel:
    """Parameter store plus the forward passes of every model component.

    Parameter name prefixes: ``A.`` unimodal encoder A (including the input
    latent ``A.latent0``), ``B.`` unimodal encoder B, ``P.<task>.`` unimodal
    task heads, ``M.`` multimodal pair block, ``MH.<task>.`` multimodal heads.
    """

    def __init__(self, registry: Registry, config: PerceiverConfig | None = None,
                 seed: int = 0, params: dict[str, Matrix] | None = None):
        self.registry = registry
        self.config = config or PerceiverConfig()
        self.seed = seed
        self.stats: Counter = Counter()
        if params is None:
            params = self._init_params(np.random.default_rng(seed))
        self.params = params

    def _init_params(self, rng: np.random.Generator) -> dict[str, Matrix]:
        cfg, reg = self.config, self.registry
        init = _Init(rng)
        la, lp = cfg.latent_dim, cfg.n_latents
        p: dict[str, Matrix] = {
            "A.latent0": Matrix(0.02 * rng.standard_normal((lp, la)), True, "A.latent0"),
        }
        p.update(_block_params(init, "A", cfg, reg.max_cols))
        p.update(_block_params(init, "B", cfg, reg.max_cols))
        p.update(_block_params(init, "M", cfg, la))
        for tid, task in enumerate(reg.tasks):
            p.update(_ffn_params(init, f"P.{tid}", la, la, task.n_classes, norm=False))
            n = len(task.modalities)
            pairs = max(n * (n - 1), 1)
            p.update(_ffn_params(init, f"MH.{tid}", pairs * la, la, task.n_classes, norm=False))
        return p

    # -- parameter groups -------------------------------------------------

    def group(self, prefixes: Iterable[str]) -> list[Matrix]:
        prefixes = tuple(prefixes)
        return [m for k, m in self.params.items() if k.startswith(prefixes)]

    def digest(self, prefixes: Iterable[str] = ("A.",)) -> str:
        """SHA-256 over the named parameter group, for freeze checks."""
        h = hashlib.sha256()
        prefixes = tuple(prefixes)
        for k in sorted(self.params):
            if k.startswith(prefixes):
                h.update(k.encode())
                h.update(np.ascontiguousarray(self.params[k].data).tobytes())
        return h.hexdigest()

    # -- operations ---------------------------------------------------------

    def pad_and_embed(self, m: ModalityTensor) -> PaddedInput:
        arr = pad_batch(self.registry, m.modality_id, m.data)[0]
        return PaddedInput(Matrix(arr), m.modality_id, self.registry.modality(m.modality_id).rows)

    def _encode_a(self, x: Matrix, attn_log=None) -> Matrix:
        return _perceiver_block(self.params, "A", self.config, self.params["A.latent0"], x, attn_log)

    def _encode_b(self, x: Matrix, l_u: Matrix) -> Matrix:
        lat = _perceiver_block(self.params, "B", self.config, l_u, x)
        return T.take_row(lat, -1)

    def unimodal_encode_a(self, x: PaddedInput, attn_log: list | None = None) -> Matrix:
        """Latent matrix ``L_u`` of shape ``(n_latents, latent_dim)``."""
        self.stats["encode_a"] += 1
        return self._encode_a(x.data, attn_log)

    def unimodal_encode_b(self, x: PaddedInput, l_u: Matrix) -> np.ndarray:
        """Conformal latent vector: the final latent vector of encoder B."""
        cfg = self.config
        if l_u.data.shape[-2:] != (cfg.n_latents, cfg.latent_dim):
            raise T.ShapeError(
                f"latent must be {cfg.n_latents}x{cfg.latent_dim}, got {l_u.data.shape}"
            )
        self.stats["encode_b"] += 1
        return self._encode_b(x.data, l_u).data.reshape(-1)

    def _head_logits(self, prefix: str, x: Matrix) -> Matrix:
        return _ffn(self.params, prefix, x, residual=False)

    def task_head(self, l_cp, task_id: int) -> np.ndarray:
        """Class-probability vector from the task's two-layer head."""
        self.registry.task(task_id)
        x = l_cp if isinstance(l_cp, Matrix) else Matrix(np.asarray(l_cp).reshape(1, -1))
        return _to_probs(self._head_logits(f"P.{task_id}", x).data)

    def _pair_features(self, latents: Sequence[Matrix]) -> Matrix:
        pooled = []
        n = len(latents)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                self.stats["f_mul"] += 1
                out = _perceiver_block(self.params, "M", self.config, latents[i], latents[j])
                pooled.append(T.take_row(out, -1))
        return pooled[0] if len(pooled) == 1 else T.concat_cols(pooled)

    def multimodal_cross_attention(self, latents: Sequence[Matrix], task_id: int) -> np.ndarray:
        """Fuse one latent per task modality into class probabilities."""
        task = self.registry.task(task_id)
        if len(latents) < 2:
            raise T.ContractError("multimodal cross attention needs at least two latents")
        if len(latents) != len(task.modalities):
            raise T.ContractError(
                f"task {task_id} has {len(task.modalities)} modalities, got {len(latents)} latents"
            )
        cfg = self.config
        lat = [l if isinstance(l, Matrix) else Matrix(l) for l in latents]
        for l in lat:
            if l.data.shape != (cfg.n_latents, cfg.latent_dim):
                raise T.ShapeError(f"latent shape {l.data.shape} != {(cfg.n_latents, cfg.latent_dim)}")
        feats = self._pair_features(lat)
        return _to_probs(self._head_logits(f"MH.{task_id}", feats).data)

    # -- batched forward passes for training and evaluation ------------------

    def batch_latents(self, task_id: int, inputs: Mapping[int, np.ndarray]) -> list[Matrix]:
        task = self.registry.task(task_id)
        return [self._encode_a(Matrix(pad_batch(self.registry, m, inputs[m])))
                for m in task.modalities]

    def batch_multimodal_logits(self, task_id: int, latents: Sequence[Matrix]) -> Matrix:
        return self._head_logits(f"MH.{task_id}", self._pair_features(latents))

    def batch_unimodal_logits(self, task_id: int, modality_id: int, raw: np.ndarray,
                              l_u: Matrix) -> Matrix:
        x = Matrix(pad_batch(self.registry, modality_id, raw))
        return self._head_logits(f"P.{task_id}", self._encode_b(x, l_u))

    def predict_multimodal(self, task_id: int, inputs: Mapping[int, np.ndarray]) -> np.ndarray:
        logits = self.batch_multimodal_logits(task_id, self.batch_latents(task_id, inputs)).data
        return _softmax_last(logits.reshape(logits.shape[0], -1))

    def predict_unimodal(self, task_id: int, inputs: Mapping[int, np.ndarray]) -> dict[int, np.ndarray]:
        task = self.registry.task(task_id)
        lats = self.batch_latents(task_id, inputs)
        out = {}
        for m, l_u in zip(task.modalities, lats):
            logits = self.batch_unimodal_logits(task_id, m, inputs[m], l_u).data
            out[m] = _softmax_last(logits.reshape(logits.shape[0], -1))
        return out


def _softmax_last(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    stage1_loss: list[float] = field(default_factory=list)
    stage2_loss: list[float] = field(default_factory=list)


def _check_disjoint(split) -> None:
    names = ("train", "cal", "test")
    ids = [set(np.asarray(getattr(split, n).ids).tolist()) for n in names]
    for a in range(3):
        for b in range(a + 1, 3):
            shared = ids[a] & ids[b]
            if shared:
                raise DataLeakError(
                    f"{names[a]} and {names[b]} splits share {len(shared)} samples"
                )


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield order[s:s + batch_size]


def train(model: PerceiverModel, split, task_id: int = 0, *, epochs: int = 200,
          stage2_epochs: int | None = None, batch_size: int = 32, seed: int = 0,
          target_loss: float | None = None, lr: float | None = None,
          weight_decay: float | None = None) -> TrainResult:
    """Two-stage training on one task's train split.

    Stage 1 fits encoder A, the input latent, the multimodal block and head
    jointly on cross-entropy. Stage 2 fits encoder B and the unimodal head with
    stage-1 weights held fixed. ``target_loss`` stops a stage early once the
    epoch-mean loss falls below it.
    """
    _check_disjoint(split)
    cfg = model.config
    lr = cfg.lr if lr is None else lr
    wd = cfg.weight_decay if weight_decay is None else weight_decay
    stage2_epochs = epochs if stage2_epochs is None else stage2_epochs
    task = model.registry.task(task_id)
    data = split.train
    rng = np.random.default_rng(seed)
    result = TrainResult()

    if len(task.modalities) >= 2:
        params1 = [p for p in model.group(("A.", "M.", f"MH.{task_id}."))]
        opt = T.AdamW(lr=lr, weight_decay=wd)
        for _ in range(epochs):
            losses = []
            for idx in _minibatches(len(data), batch_size, rng):
                batch = {m: data.inputs[m][idx] for m in task.modalities}
                with T.Tape() as tape:
                    lats = model.batch_latents(task_id, batch)
                    logits = model.batch_multimodal_logits(task_id, lats)
                    loss = T.cross_entropy(logits, data.labels[idx])
                opt.step(params1, T.backward(tape, loss))
                losses.append(loss.data.item() * len(idx))
            result.stage1_loss.append(sum(losses) / len(data))
            if target_loss is not None and result.stage1_loss[-1] < target_loss:
                break

    params2 = model.group(("B.", f"P.{task_id}."))
    opt = T.AdamW(lr=lr, weight_decay=wd)
    # encoder A is frozen: its latents are computed once, off the tape
    frozen = {m: model._encode_a(Matrix(pad_batch(model.registry, m, data.inputs[m]))).data
              for m in task.modalities}
    for _ in range(stage2_epochs):
        losses = []
        for idx in _minibatches(len(data), batch_size, rng):
            with T.Tape() as tape:
                total = None
                for m in task.modalities:
                    logits = model.batch_unimodal_logits(
                        task_id, m, data.inputs[m][idx], Matrix(frozen[m][idx]))
                    l = T.cross_entropy(logits, data.labels[idx])
                    total = l if total is None else T.add(total, l)
                loss = T.scale(total, 1.0 / len(task.modalities))
            opt.step(params2, T.backward(tape, loss))
            losses.append(loss.data.item() * len(idx))
        result.stage2_loss.append(sum(losses) / len(data))
        if target_loss is not None and result.stage2_loss[-1] < target_loss:
            break
    return result


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

_MAGIC = b"MSEDGCKP"
_VERSION = 1


def save_checkpoint(model: PerceiverModel, path) -> None:
    """Write the named-tensor container.

    Layout (little-endian): magic, u32 version, u32 manifest length, UTF-8
    JSON manifest, u32 tensor count, then per tensor u16 name length, name,
    u32 rows, u32 cols, rows*cols float64 values row-major.
    """
    manifest = json.dumps({
        "config": asdict(model.config),
        "registry": model.registry.to_dict(),
        "seed": model.seed,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(manifest)))
        fh.write(manifest)
        fh.write(struct.pack("<I", len(model.params)))
        for name in sorted(model.params):
            arr = np.ascontiguousarray(model.params[name].data, dtype="<f8")
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<II", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> PerceiverModel:
    blob = Path(path).read_bytes()
    if blob[:8] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, mlen = struct.unpack_from("<II", blob, 8)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 16
    manifest = json.loads(blob[off:off + mlen])
    off += mlen
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + nlen].decode()
        off += nlen
        rows, cols = struct.unpack_from("<II", blob, off)
        off += 8
        arr = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols)
        off += 8 * rows * cols
        params[name] = Matrix(arr.astype(np.float64), True, name)
    return PerceiverModel(
        Registry.from_dict(manifest["registry"]),
        PerceiverConfig(**manifest["config"]),
        seed=manifest["seed"],
        params=params,
    )
