"""WESAD pickle -> neutral subject directories.

Input: the published per-subject archive (SX/SX.pkl), a python-2 pickle
holding {"signal": {"chest": {...}, "wrist": {...}}, "label": ..., "subject"}.
Output per subject: manifest.json, one little-endian float32 binary per
channel (axis-major), and labels.i32 (little-endian int32 at 700 Hz).
The float32 cast is the only lossy step; labels are copied exactly.
"""

from __future__ import annotations

import json
import pickle
from pathlib import Path

import numpy as np


class ConvertError(Exception):
    """Base class for conversion failures."""


class FormatError(ConvertError):
    """Source archive does not match the published WESAD structure."""


# Published sample rates: RespiBAN (chest) all at 700 Hz, Empatica E4 (wrist)
# per channel. The dataset's key spelling differs between the two devices.
CHEST_RATE = 700.0
LABEL_RATE = 700.0
CHEST_KEYS = {"ACC": 3, "ECG": 1, "EDA": 1, "EMG": 1, "Resp": 1, "Temp": 1}
WRIST_KEYS = {"ACC": (32.0, 3), "BVP": (64.0, 1), "EDA": (4.0, 1), "TEMP": (4.0, 1)}
# canonical channel names in the output layout
RENAME = {"Resp": "RESP", "Temp": "TEMP"}


def _load_archive(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return pickle.load(fh, encoding="latin1")
    except OSError as exc:
        raise ConvertError(f"cannot read {path}: {exc}") from exc
    except Exception as exc:  # pickle raises a zoo of types on corrupt input
        raise FormatError(f"{path} is not a readable archive: {exc}") from exc


def _check_keys(found, expected, path: str) -> None:
    found = set(found)
    expected = set(expected)
    for extra in sorted(found - expected):
        raise FormatError(f"unexpected key {path}.{extra}")
    for missing in sorted(expected - found):
        raise FormatError(f"missing key {path}.{missing}")


def _as_axis_major(raw, axes: int, path: str) -> np.ndarray:
    arr = np.asarray(raw)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != axes:
        raise FormatError(f"{path}: expected shape (n, {axes}), got {arr.shape}")
    if arr.shape[0] == 0:
        raise FormatError(f"{path}: channel is empty")
    return np.ascontiguousarray(arr.T, dtype="<f4")


def _channels_of(archive: dict, src: Path):
    """Yield (canonical name, sample_rate, axis-major float32 array)."""
    _check_keys(archive.keys(), {"signal", "label", "subject"}, "(root)")
    signal = archive["signal"]
    _check_keys(signal.keys(), {"chest", "wrist"}, "signal")
    _check_keys(signal["chest"].keys(), CHEST_KEYS, "signal.chest")
    _check_keys(signal["wrist"].keys(), WRIST_KEYS, "signal.wrist")

    for key, axes in CHEST_KEYS.items():
        name = "chest." + RENAME.get(key, key)
        yield name, CHEST_RATE, _as_axis_major(signal["chest"][key], axes, f"signal.chest.{key}")
    for key, (rate, axes) in WRIST_KEYS.items():
        yield "wrist." + key, rate, _as_axis_major(signal["wrist"][key], axes, f"signal.wrist.{key}")


def _labels_of(archive: dict, src: Path) -> np.ndarray:
    labels = np.asarray(archive["label"]).reshape(-1)
    if labels.size == 0:
        raise FormatError(f"{src}: label track is empty")
    if labels.min() < 0 or labels.max() > 7:
        raise FormatError(f"{src}: label values outside 0..7")
    return labels.astype("<i4")


def convert(subject_file, out_dir) -> Path:
    """Convert one archive; returns the written subject directory.

    Re-running over an existing output is idempotent byte-for-byte: the
    manifest is canonical JSON and binaries depend only on the source.
    """
    src = Path(subject_file)
    archive = _load_archive(src)
    subject_id = str(archive["subject"])
    labels = _labels_of(archive, src)

    sub_dir = Path(out_dir) / subject_id
    sub_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, rate, samples in _channels_of(archive, src):
        fname = name.replace(".", "_") + ".f32"
        (sub_dir / fname).write_bytes(samples.tobytes())
        entries.append(
            {
                "name": name,
                "sample_rate": rate,
                "axes": int(samples.shape[0]),
                "sample_count": int(samples.shape[1]),
                "file": fname,
            }
        )
    (sub_dir / "labels.i32").write_bytes(labels.tobytes())
    manifest = {"subject_id": subject_id, "label_rate": LABEL_RATE, "channels": entries}
    (sub_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return sub_dir


def find_archives(in_root) -> list[Path]:
    """Per-subject pickles in the published layout (SX/SX.pkl), sorted."""
    root = Path(in_root)
    if root.is_file():
        return [root]
    found = sorted(root.glob("S*/S*.pkl")) or sorted(root.glob("*.pkl"))
    if not found:
        raise ConvertError(f"no subject archives under {root}")
    return found


def convert_all(in_root, out_dir, jobs: int = 1) -> list[Path]:
    """Convert every discovered archive and write the index.json roster."""
    archives = find_archives(in_root)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    converted = [convert(a, out) for a in archives]
    roster = sorted(
        ({"subject_id": d.name, "dir": d.name} for d in converted), key=lambda e: e["subject_id"]
    )
    (out / "index.json").write_text(json.dumps({"subjects": roster}, sort_keys=True, indent=2) + "\n")
    return converted
