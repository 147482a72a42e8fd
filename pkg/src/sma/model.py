"""Residual temporal convolutional classifier: build, train, predict, save/load.

The network is a stem causal conv followed by residual blocks
(conv -> ReLU -> conv, identity skip — 1x1 conv when channel counts differ —
then ReLU over the sum) and a global-average-pool -> dense head. Parameters
live in one flat list whose order also defines the checkpoint layout.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .errors import CorruptionError, FormatError

CHECKPOINT_MAGIC = b"RTCN"
CHECKPOINT_VERSION = 1

DEFAULT_STEM = (7, 32, 1)
DEFAULT_BLOCKS = ((3, 32, 1), (3, 32, 2), (3, 32, 4))


@dataclass(frozen=True)
class ResTcnConfig:
    in_channels: int = 1
    stem: tuple[int, int, int] = DEFAULT_STEM  # (K, C, d)
    blocks: tuple[tuple[int, int, int], ...] = DEFAULT_BLOCKS
    num_classes: int = 2
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "stem", tuple(int(v) for v in self.stem))
        object.__setattr__(self, "blocks", tuple(tuple(int(v) for v in b) for b in self.blocks))
        if self.in_channels < 1:
            raise ValueError("in_channels must be >= 1")
        if len(self.stem) != 3 or any(v < 1 for v in self.stem):
            raise ValueError(f"stem must be (K, C, d) of positives, got {self.stem}")
        if not self.blocks:
            raise ValueError("at least one residual block is required")
        for b in self.blocks:
            if len(b) != 3 or any(v < 1 for v in b):
                raise ValueError(f"block must be (K, C, d) of positives, got {b}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("bad training hyperparameters")

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "stem": list(self.stem),
            "blocks": [list(b) for b in self.blocks],
            "num_classes": self.num_classes,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResTcnConfig":
        return cls(
            in_channels=int(d["in_channels"]),
            stem=tuple(d["stem"]),
            blocks=tuple(tuple(b) for b in d["blocks"]),
            num_classes=int(d["num_classes"]),
            lr=float(d["lr"]),
            batch_size=int(d["batch_size"]),
            epochs=int(d["epochs"]),
            seed=int(d["seed"]),
        )


def receptive_field(cfg: ResTcnConfig) -> int:
    """RF = 1 + (K_stem - 1) * d_stem + sum over blocks of (K - 1) * d."""
    k_s, _, d_s = cfg.stem
    return 1 + (k_s - 1) * d_s + sum((k - 1) * d for k, _, d in cfg.blocks)


def param_layout(cfg: ResTcnConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan_in) for every parameter, in declaration order."""
    layout: list[tuple[str, tuple[int, ...], int]] = []
    k_s, c_s, _ = cfg.stem
    layout.append(("stem.w", (c_s, cfg.in_channels, k_s), cfg.in_channels * k_s))
    layout.append(("stem.b", (c_s,), 1))
    c_prev = c_s
    for i, (k, c, _) in enumerate(cfg.blocks):
        layout.append((f"block{i}.w1", (c, c_prev, k), c_prev * k))
        layout.append((f"block{i}.b1", (c,), 1))
        layout.append((f"block{i}.w2", (c, c, k), c * k))
        layout.append((f"block{i}.b2", (c,), 1))
        if c_prev != c:
            layout.append((f"block{i}.skip_w", (c, c_prev, 1), c_prev))
            layout.append((f"block{i}.skip_b", (c,), 1))
        c_prev = c
    layout.append(("head.w", (cfg.num_classes, c_prev), c_prev))
    layout.append(("head.b", (cfg.num_classes,), 1))
    return layout


@dataclass
class ResTcnModel:
    config: ResTcnConfig
    params: list[np.ndarray]
    epochs_run: int = 0
    final_loss: float | None = None

    def parameters(self) -> list[np.ndarray]:
        return list(self.params)


def build(cfg: ResTcnConfig) -> ResTcnModel:
    """Deterministically initialize a model: He-normal weights, zero biases."""
    rng = np.random.default_rng(cfg.seed)
    params = []
    for name, shape, fan_in in param_layout(cfg):
        if name.endswith((".b", ".b1", ".b2", ".skip_b")):
            params.append(np.zeros(shape, dtype=np.float32))
        else:
            params.append(nn.he_normal(rng, shape, fan_in, dtype=np.float32))
    return ResTcnModel(cfg, params)


def _walk_params(cfg: ResTcnConfig, params: list[np.ndarray]):
    """Split the flat list into stem / per-block / head views."""
    it = iter(params)
    stem = (next(it), next(it))
    blocks = []
    c_prev = cfg.stem[1]
    for k, c, d in cfg.blocks:
        w1, b1, w2, b2 = next(it), next(it), next(it), next(it)
        skip = (next(it), next(it)) if c_prev != c else None
        blocks.append((w1, b1, w2, b2, skip, d))
        c_prev = c
    head = (next(it), next(it))
    return stem, blocks, head


def forward(cfg: ResTcnConfig, params: list[np.ndarray], x: np.ndarray):
    """Run the network; returns (logits, caches) with caches for backward."""
    (stem_w, stem_b), blocks, (head_w, head_b) = _walk_params(cfg, params)
    if x.ndim != 3 or x.shape[1] != cfg.in_channels:
        raise ValueError(f"input shape {x.shape} does not match in_channels={cfg.in_channels}")
    a = nn.causal_conv1d(x, nn.ConvParams(stem_w, stem_b, cfg.stem[2]))
    block_caches = []
    for w1, b1, w2, b2, skip, d in blocks:
        a_in = a
        z1 = nn.causal_conv1d(a_in, nn.ConvParams(w1, b1, d))
        r1 = nn.relu(z1)
        z2 = nn.causal_conv1d(r1, nn.ConvParams(w2, b2, d))
        shortcut = a_in if skip is None else nn.causal_conv1d(a_in, nn.ConvParams(skip[0], skip[1], 1))
        s = z2 + shortcut
        a = nn.relu(s)
        block_caches.append((a_in, z1, r1, s))
    pooled = nn.global_avg_pool(a)
    logits = nn.dense(pooled, head_w, head_b)
    return logits, (x, a, pooled, block_caches)


def loss_and_grads(cfg: ResTcnConfig, params: list[np.ndarray], x: np.ndarray, labels):
    """Mean cross-entropy and its gradient for every parameter, layout order."""
    (stem_w, stem_b), blocks, (head_w, head_b) = _walk_params(cfg, params)
    logits, (x_in, a_last, pooled, block_caches) = forward(cfg, params, x)
    loss, grad_logits = nn.softmax_xent(logits, labels)

    grad_pooled, g_head_w, g_head_b = nn.dense_backward(pooled, head_w, grad_logits)
    grad_a = nn.global_avg_pool_backward(a_last, grad_pooled)

    block_grads = []
    for (w1, b1, w2, b2, skip, d), (a_in, z1, r1, s) in zip(reversed(blocks), reversed(block_caches)):
        grad_s = nn.relu_backward(s, grad_a)
        grad_r1, g_w2, g_b2 = nn.causal_conv1d_backward(r1, nn.ConvParams(w2, b2, d), grad_s)
        grad_z1 = nn.relu_backward(z1, grad_r1)
        grad_in_main, g_w1, g_b1 = nn.causal_conv1d_backward(a_in, nn.ConvParams(w1, b1, d), grad_z1)
        if skip is None:
            grad_in = grad_in_main + grad_s
            block_grads.append([g_w1, g_b1, g_w2, g_b2])
        else:
            grad_in_skip, g_sw, g_sb = nn.causal_conv1d_backward(a_in, nn.ConvParams(skip[0], skip[1], 1), grad_s)
            grad_in = grad_in_main + grad_in_skip
            block_grads.append([g_w1, g_b1, g_w2, g_b2, g_sw, g_sb])
        grad_a = grad_in

    _, g_stem_w, g_stem_b = nn.causal_conv1d_backward(x_in, nn.ConvParams(stem_w, stem_b, cfg.stem[2]), grad_a)

    grads = [g_stem_w, g_stem_b]
    for g in reversed(block_grads):
        grads.extend(g)
    grads.extend([g_head_w, g_head_b])
    return loss, grads


def pre_pool_activations(cfg: ResTcnConfig, params: list[np.ndarray], x: np.ndarray) -> np.ndarray:
    """Activations just before pooling — exposed so causality can be probed."""
    _, (_, a_last, _, _) = forward(cfg, params, x)
    return a_last


def train(model: ResTcnModel, ds, seed: int | None = None):
    """Run config.epochs of shuffled mini-batch Adam; returns (model, loss_curve).

    The input model is left untouched; training is deterministic given
    (config, dataset, seed). The per-epoch curve holds the mean batch loss.
    """
    cfg = model.config
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    if ds.num_classes != cfg.num_classes:
        raise ValueError(f"dataset has {ds.num_classes} classes, model expects {cfg.num_classes}")
    if receptive_field(cfg) > ds.window_len:
        warnings.warn(
            f"receptive field {receptive_field(cfg)} exceeds window length {ds.window_len}",
            stacklevel=2,
        )
    values = ds.stacked_values(np.float32)
    labels = ds.labels()
    n = len(ds)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    params = [p.copy() for p in model.params]
    state = nn.AdamState.init(params, lr=cfg.lr)
    curve: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(cfg, params, values[idx], labels[idx])
            params, state = nn.adam_step(params, grads, state)
            epoch_losses.append(loss)
        curve.append(float(np.mean(epoch_losses)))
    final = curve[-1] if curve else model.final_loss
    return ResTcnModel(cfg, params, model.epochs_run + cfg.epochs, final), curve


def predict(model: ResTcnModel, windows):
    """Class indices and per-class probabilities for a batch of windows.

    ``windows`` is either a WindowedDataset or an (N, C, T) array. Argmax
    ties break toward the lower class index.
    """
    if hasattr(windows, "stacked_values"):
        x = windows.stacked_values(np.float32)
    else:
        x = np.asarray(windows, dtype=np.float32)
    logits, _ = forward(model.config, model.params, x)
    probs = nn.softmax(logits.astype(np.float64))
    return np.argmax(probs, axis=1), probs


def _canonical_config_bytes(cfg: ResTcnConfig) -> bytes:
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode()


def save(model: ResTcnModel, path) -> None:
    """Write magic, version, canonical JSON config, then float32-LE parameters."""
    blob = _canonical_config_bytes(model.config)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for p in model.params:
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load(path) -> ResTcnModel:
    """Read a checkpoint written by save; training metadata is not persisted."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a model checkpoint (bad magic)")
    if len(data) < 12:
        raise CorruptionError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack_from("<I", data, 8)
    if len(data) < 12 + cfg_len:
        raise CorruptionError(f"{path}: truncated config block")
    try:
        cfg = ResTcnConfig.from_dict(json.loads(data[12 : 12 + cfg_len].decode()))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CorruptionError(f"{path}: unreadable config: {exc}") from exc
    offset = 12 + cfg_len
    params = []
    for name, shape, _ in param_layout(cfg):
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(data):
            raise CorruptionError(f"{path}: truncated at parameter {name}")
        params.append(np.frombuffer(data[offset:end], dtype="<f4").reshape(shape).copy())
        offset = end
    if offset != len(data):
        raise CorruptionError(f"{path}: {len(data) - offset} trailing bytes")
    return ResTcnModel(cfg, params)
