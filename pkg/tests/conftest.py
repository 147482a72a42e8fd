"""Shared test helpers: synthetic subject trees and windowed datasets."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from sma import signals


def write_subject(root: Path, subject_id: str, channels: dict, labels: np.ndarray, label_rate: float = 700.0) -> Path:
    """Write one neutral-format subject directory.

    ``channels`` maps name -> (sample_rate, array of shape (axes, n) or (n,)).
    Returns the subject directory path.
    """
    sub = root / subject_id
    sub.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, (rate, values) in channels.items():
        values = np.atleast_2d(np.asarray(values, dtype=np.float32))
        fname = name.replace(".", "_") + ".f32"
        values.astype("<f4").tofile(sub / fname)
        entries.append(
            {
                "name": name,
                "sample_rate": rate,
                "axes": int(values.shape[0]),
                "sample_count": int(values.shape[1]),
                "file": fname,
            }
        )
    np.asarray(labels, dtype="<i4").tofile(sub / "labels.i32")
    manifest = {"subject_id": subject_id, "label_rate": label_rate, "channels": entries}
    (sub / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return sub


def protocol_labels(total_s: float, label_rate: float = 700.0) -> np.ndarray:
    """A label track cycling through the four task-relevant conditions."""
    n = int(round(total_s * label_rate))
    labels = np.zeros(n, dtype=np.int64)
    seg = n // 4
    for i, raw in enumerate((1, 2, 3, 4)):
        start = i * seg
        stop = n if i == 3 else (i + 1) * seg
        labels[start:stop] = raw
    return labels


def make_subject_tree(root: Path, n_subjects: int = 3, total_s: float = 120.0, rate: float = 32.0, chest_rate: float = 70.0):
    """Synthetic converted-data tree with chest.RESP and wrist.BVP channels.

    Signals carry a per-condition frequency signature so both emotion and
    identification tasks are learnable. Returns the subject directories.
    """
    dirs = []
    for s in range(n_subjects):
        rng = np.random.default_rng(1000 + s)
        labels = protocol_labels(total_s)
        # subject-specific frequency offset makes identification separable
        offset = 0.3 * s

        def channel(sig_rate):
            n = int(round(total_s * sig_rate))
            out = np.zeros(n)
            seg_bounds = np.linspace(0, n, 5).astype(int)
            for i, raw in enumerate((1, 2, 3, 4)):
                seg = slice(seg_bounds[i], seg_bounds[i + 1])
                m = seg_bounds[i + 1] - seg_bounds[i]
                freq = {1: 0.8, 2: 2.0, 3: 4.5, 4: 9.0}[raw] + offset
                t = np.arange(m) / sig_rate
                out[seg] = np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
                out[seg] += 0.05 * rng.standard_normal(m)
            return out

        dirs.append(
            write_subject(
                root,
                f"S{s + 2}",
                {
                    "chest.RESP": (chest_rate, channel(chest_rate)),
                    "wrist.BVP": (rate, channel(rate)),
                },
                labels,
            )
        )
    return dirs


def dataset_from_arrays(values: np.ndarray, labels, num_classes: int, task: str = "emotion4", subjects=None) -> signals.WindowedDataset:
    """Wrap (n, axes, T) arrays as a WindowedDataset for harness-level tests."""
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if subjects is None:
        subjects = ["s0"] * len(labels)
    windows = tuple(
        signals.Window(values[i], int(labels[i]), subjects[i], float(i)) for i in range(len(labels))
    )
    return signals.WindowedDataset(windows, num_classes, "synthetic", task)


def spectral_dataset(rng: np.random.Generator, n: int, t_len: int = 128, n_classes: int = 3, n_subjects: int = 4) -> signals.WindowedDataset:
    """Classes with disjoint narrowband signatures; z-scored like real windows."""
    freqs = np.array([3.0, 8.0, 16.0, 24.0, 32.0])[:n_classes]
    values = np.empty((n, 1, t_len))
    labels = np.empty(n, dtype=np.int64)
    subjects = []
    t = np.arange(t_len) / t_len
    for i in range(n):
        c = i % n_classes
        wave = np.sin(2 * np.pi * freqs[c] * t + rng.uniform(0, 2 * np.pi))
        wave += 0.1 * rng.standard_normal(t_len)
        wave = (wave - wave.mean()) / (wave.std() + 1e-8)
        values[i, 0] = wave
        labels[i] = c
        subjects.append(f"s{i % n_subjects}")
    return dataset_from_arrays(values, labels, n_classes, subjects=subjects)


@pytest.fixture
def subject_tree(tmp_path):
    dirs = make_subject_tree(tmp_path / "data")
    return tmp_path / "data", dirs
