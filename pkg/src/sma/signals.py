"""Loading, labelling and windowing of wearable recordings.

Recordings live on disk in a neutral per-subject layout: a ``manifest.json``
describing every channel, one little-endian float32 binary per channel
(axis-major), and a ``labels.i32`` int32 track sampled at the label clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError

CHEST_CHANNELS = ("chest.ACC", "chest.ECG", "chest.EDA", "chest.EMG", "chest.RESP", "chest.TEMP")
WRIST_CHANNELS = ("wrist.ACC", "wrist.BVP", "wrist.EDA", "wrist.TEMP")
ALL_CHANNELS = CHEST_CHANNELS + WRIST_CHANNELS

TASKS = ("identification", "emotion4", "stress_binary")

# Raw label track semantics (dataset documentation): 0 transient, 1 baseline,
# 2 stress, 3 amusement, 4 meditation, 5-7 unused protocol codes.
RAW_LABEL_RANGE = range(0, 8)

EMOTION4_MAP = {1: 0, 2: 1, 3: 2, 4: 3}
EMOTION4_NAMES = ("neutral", "stress", "amusement", "meditation")
STRESS_BINARY_MAP = {1: 0, 2: 1, 3: 0, 4: 0}

ZSCORE_EPS = 1e-8


@dataclass(frozen=True)
class Channel:
    """One modality of one subject: ``samples`` has shape (axes, n)."""

    name: str
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples))
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise ValueError(f"channel {self.name}: sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValidationError(f"channel {self.name}: non-finite samples")

    @property
    def axes(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass(frozen=True)
class Recording:
    """All channels of one subject plus the label track on the reference clock."""

    subject_id: str
    channels: dict[str, Channel]
    labels: np.ndarray
    label_rate: float

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.size and not np.all((labels >= 0) & (labels <= 7)):
            bad = labels[(labels < 0) | (labels > 7)][0]
            raise ValidationError(f"subject {self.subject_id}: label value {bad} outside 0..7")

    def channel(self, name: str) -> Channel:
        if name not in self.channels:
            raise KeyError(f"subject {self.subject_id} has no channel {name!r}")
        return self.channels[name]


@dataclass(frozen=True)
class Window:
    """One standardized input window: ``values`` has shape (axes, window_len)."""

    values: np.ndarray
    label: int
    subject_id: str
    t_start: float


@dataclass(frozen=True)
class WindowedDataset:
    windows: tuple[Window, ...]
    num_classes: int
    modality: str
    task: str

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(self.windows))
        for w in self.windows:
            if not 0 <= w.label < self.num_classes:
                raise ValueError(f"window label {w.label} outside 0..{self.num_classes - 1}")

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def axes(self) -> int:
        return self.windows[0].values.shape[0]

    @property
    def window_len(self) -> int:
        return self.windows[0].values.shape[1]

    def labels(self) -> np.ndarray:
        return np.array([w.label for w in self.windows], dtype=np.int64)

    def subject_ids(self) -> list[str]:
        return [w.subject_id for w in self.windows]

    def stacked_values(self, dtype=np.float64) -> np.ndarray:
        """All windows as one (n, axes, window_len) array."""
        return np.stack([w.values for w in self.windows]).astype(dtype, copy=False)

    def subset(self, indices) -> "WindowedDataset":
        picked = [self.windows[int(i)] for i in indices]
        return WindowedDataset(tuple(picked), self.num_classes, self.modality, self.task)


def load_recording(path, channels: tuple[str, ...] | None = None) -> Recording:
    """Read one neutral-format subject directory.

    ``channels`` restricts loading to the named modalities (labels are always
    read). Values come back bit-exact as the stored float32.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FormatError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable manifest {manifest_path}: {exc}") from exc

    for key in ("subject_id", "channels", "label_rate"):
        if key not in manifest:
            raise FormatError(f"manifest {manifest_path} missing key {key!r}")

    loaded: dict[str, Channel] = {}
    for entry in manifest["channels"]:
        name = entry["name"]
        if channels is not None and name not in channels:
            continue
        axes = int(entry["axes"])
        count = int(entry["sample_count"])
        binary = root / entry["file"]
        if not binary.is_file():
            raise CorruptionError(f"{binary} listed in manifest but absent")
        expected = 4 * axes * count
        actual = binary.stat().st_size
        if actual != expected:
            raise CorruptionError(
                f"{binary}: {actual} bytes, manifest implies {expected} (axes={axes}, samples={count})"
            )
        flat = np.fromfile(binary, dtype="<f4")
        loaded[name] = Channel(name, float(entry["sample_rate"]), flat.reshape(axes, count))

    labels_path = root / "labels.i32"
    if not labels_path.is_file():
        raise CorruptionError(f"{labels_path} missing")
    labels = np.fromfile(labels_path, dtype="<i4").astype(np.int64)
    return Recording(str(manifest["subject_id"]), loaded, labels, float(manifest["label_rate"]))


def map_labels(raw: int, task: str, subject_index: int = 0) -> int | None:
    """Map one raw protocol label to a task class index, or None to discard.

    For identification the class is the caller-supplied subject index; the
    raw label only decides whether the sample is kept.
    """
    if task == "emotion4":
        return EMOTION4_MAP.get(raw)
    if task == "stress_binary":
        return STRESS_BINARY_MAP.get(raw)
    if task == "identification":
        return subject_index if raw in (1, 2, 3, 4) else None
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def num_classes_for(task: str, num_subjects: int = 1) -> int:
    if task == "emotion4":
        return 4
    if task == "stress_binary":
        return 2
    if task == "identification":
        return num_subjects
    raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


def decimate(ch: Channel, factor: int) -> Channel:
    """Block-average a channel by an integer factor; a trailing partial block is dropped."""
    if factor < 1:
        raise ValueError(f"decimation factor must be >= 1, got {factor}")
    if factor == 1:
        return ch
    n_blocks = ch.num_samples // factor
    trimmed = ch.samples[:, : n_blocks * factor].astype(np.float64)
    means = trimmed.reshape(ch.axes, n_blocks, factor).mean(axis=2)
    return Channel(ch.name, ch.sample_rate / factor, means)


def _majority_raw_label(labels: np.ndarray, start: int, stop: int) -> int | None:
    span = labels[max(start, 0) : max(stop, 0)]
    if span.size == 0:
        return None
    counts = np.bincount(span, minlength=8)
    # argmax returns the first maximum, i.e. ties break toward the lower raw value
    return int(np.argmax(counts))


def make_windows(
    rec: Recording,
    modality: str,
    win_s: float,
    stride_s: float,
    task: str,
    subject_index: int = 0,
    num_classes: int | None = None,
) -> WindowedDataset:
    """Segment one channel into z-scored fixed-length windows with task labels.

    The window label is the majority raw label over the window's time span on
    the label clock, passed through map_labels; windows whose majority label
    maps to discard are dropped.
    """
    if win_s <= 0 or stride_s <= 0:
        raise ValueError("win_s and stride_s must be positive")
    ch = rec.channel(modality)
    win = int(round(win_s * ch.sample_rate))
    stride = int(round(stride_s * ch.sample_rate))
    if win < 1 or stride < 1:
        raise ValueError("window and stride must span at least one sample")
    if num_classes is None:
        num_classes = num_classes_for(task, subject_index + 1)

    windows: list[Window] = []
    n = ch.num_samples
    for start in range(0, n - win + 1, stride):
        t0 = start / ch.sample_rate
        t1 = (start + win) / ch.sample_rate
        raw = _majority_raw_label(rec.labels, int(round(t0 * rec.label_rate)), int(round(t1 * rec.label_rate)))
        if raw is None:
            continue
        label = map_labels(raw, task, subject_index)
        if label is None:
            continue
        block = ch.samples[:, start : start + win].astype(np.float64)
        mean = block.mean(axis=1, keepdims=True)
        std = block.std(axis=1, keepdims=True)
        values = (block - mean) / (std + ZSCORE_EPS)
        values[block.max(axis=1) == block.min(axis=1)] = 0.0  # constant axis -> exact zeros
        windows.append(Window(values, label, rec.subject_id, t0))

    return WindowedDataset(tuple(windows), num_classes, modality, task)


def merge_datasets(datasets: list[WindowedDataset], num_classes: int | None = None) -> WindowedDataset:
    """Pool per-subject datasets of the same modality and task."""
    if not datasets:
        raise ValueError("nothing to merge")
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.modality != first.modality or ds.task != first.task:
            raise ValueError("can only merge datasets of one modality and task")
    if num_classes is None:
        num_classes = max(ds.num_classes for ds in datasets)
    windows = tuple(w for ds in datasets for w in ds.windows)
    return WindowedDataset(windows, num_classes, first.modality, first.task)


def build_dataset(
    recordings: list[Recording],
    modality: str,
    win_s: float,
    stride_s: float,
    task: str,
    chest_decimation: int = 1,
) -> WindowedDataset:
    """Window every recording on one modality and pool the result.

    Subjects are indexed by sorted subject_id so identification classes are
    stable across runs. Decimation applies to chest channels only (wrist
    rates are already low).
    """
    ordered = sorted(recordings, key=lambda r: r.subject_id)
    n_subjects = len(ordered)
    parts = []
    for idx, rec in enumerate(ordered):
        ch = rec.channel(modality)
        if chest_decimation > 1 and modality.startswith("chest."):
            ch = decimate(ch, chest_decimation)
            rec = Recording(rec.subject_id, {modality: ch}, rec.labels, rec.label_rate)
        parts.append(
            make_windows(
                rec,
                modality,
                win_s,
                stride_s,
                task,
                subject_index=idx,
                num_classes=num_classes_for(task, n_subjects),
            )
        )
    return merge_datasets(parts, num_classes=num_classes_for(task, n_subjects))
