"""Converter behaviour: structure validation, output layout, round-trip."""

import json
import pickle
from pathlib import Path

import numpy as np
import pytest

from wesad_converter import ConvertError, FormatError, convert, convert_all
from wesad_converter.cli import main as cli_main


def synthetic_archive(subject="S2", seconds=2.0, seed=0):
    """A miniature archive with the published structure and rates."""
    rng = np.random.default_rng(seed)
    n700 = int(700 * seconds)

    def block(n, axes):
        return rng.standard_normal((n, axes))

    return {
        "signal": {
            "chest": {
                "ACC": block(n700, 3),
                "ECG": block(n700, 1),
                "EDA": block(n700, 1),
                "EMG": block(n700, 1),
                "Resp": block(n700, 1),
                "Temp": block(n700, 1),
            },
            "wrist": {
                "ACC": block(int(32 * seconds), 3),
                "BVP": block(int(64 * seconds), 1),
                "EDA": block(int(4 * seconds), 1),
                "TEMP": block(int(4 * seconds), 1),
            },
        },
        "label": rng.integers(0, 8, n700),
        "subject": subject,
    }


@pytest.fixture
def archive_file(tmp_path):
    archive = synthetic_archive()
    path = tmp_path / "S2" / "S2.pkl"
    path.parent.mkdir()
    path.write_bytes(pickle.dumps(archive))
    return path, archive


def test_convert_writes_twelve_files(archive_file, tmp_path):
    path, _ = archive_file
    out = convert(path, tmp_path / "out")
    files = sorted(p.name for p in out.iterdir())
    assert len(files) == 12  # 10 channel binaries + manifest + labels
    assert "manifest.json" in files
    assert "labels.i32" in files
    assert "chest_RESP.f32" in files and "wrist_BVP.f32" in files


def test_manifest_counts_match_binary_lengths(archive_file, tmp_path):
    path, _ = archive_file
    out = convert(path, tmp_path / "out")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subject_id"] == "S2"
    assert manifest["label_rate"] == 700.0
    assert len(manifest["channels"]) == 10
    for entry in manifest["channels"]:
        size = (out / entry["file"]).stat().st_size
        assert size == 4 * entry["axes"] * entry["sample_count"]


def test_first_and_last_samples_survive_cast(archive_file, tmp_path):
    path, archive = archive_file
    out = convert(path, tmp_path / "out")
    manifest = json.loads((out / "manifest.json").read_text())
    by_name = {e["name"]: e for e in manifest["channels"]}

    for device, keys in (("chest", ["ACC", "ECG", "EDA", "EMG", "Resp", "Temp"]), ("wrist", ["ACC", "BVP", "EDA", "TEMP"])):
        for key in keys:
            canon = {"Resp": "RESP", "Temp": "TEMP"}.get(key, key)
            entry = by_name[f"{device}.{canon}"]
            raw = np.atleast_2d(np.asarray(archive["signal"][device][key]))
            if raw.shape[0] > raw.shape[1]:  # (n, axes) in the source
                raw = raw.T
            stored = np.fromfile(out / entry["file"], dtype="<f4").reshape(entry["axes"], entry["sample_count"])
            np.testing.assert_array_equal(stored[:, 0], raw[:, 0].astype(np.float32))
            np.testing.assert_array_equal(stored[:, -1], raw[:, -1].astype(np.float32))


def test_labels_copied_exactly(archive_file, tmp_path):
    path, archive = archive_file
    out = convert(path, tmp_path / "out")
    stored = np.fromfile(out / "labels.i32", dtype="<i4")
    np.testing.assert_array_equal(stored, archive["label"])


def test_convert_idempotent_byte_for_byte(archive_file, tmp_path):
    path, _ = archive_file
    out_dir = tmp_path / "out"
    first = convert(path, out_dir)
    snapshot = {p.name: p.read_bytes() for p in first.iterdir()}
    second = convert(path, out_dir)
    assert first == second
    for p in second.iterdir():
        assert p.read_bytes() == snapshot[p.name], p.name


def test_unknown_key_path_reported(tmp_path):
    archive = synthetic_archive()
    archive["signal"]["chest"]["FOO"] = np.zeros((10, 1))
    path = tmp_path / "S3.pkl"
    path.write_bytes(pickle.dumps(archive))
    with pytest.raises(FormatError, match=r"signal\.chest\.FOO"):
        convert(path, tmp_path / "out")


def test_missing_key_reported(tmp_path):
    archive = synthetic_archive()
    del archive["signal"]["wrist"]["BVP"]
    path = tmp_path / "S3.pkl"
    path.write_bytes(pickle.dumps(archive))
    with pytest.raises(FormatError, match=r"signal\.wrist\.BVP"):
        convert(path, tmp_path / "out")


def test_empty_channel_rejected(tmp_path):
    archive = synthetic_archive()
    archive["signal"]["chest"]["ECG"] = np.zeros((0, 1))
    path = tmp_path / "S3.pkl"
    path.write_bytes(pickle.dumps(archive))
    with pytest.raises(FormatError, match="empty"):
        convert(path, tmp_path / "out")


def test_bad_label_values_rejected(tmp_path):
    archive = synthetic_archive()
    archive["label"] = np.full(1400, 9)
    path = tmp_path / "S3.pkl"
    path.write_bytes(pickle.dumps(archive))
    with pytest.raises(FormatError, match="0..7"):
        convert(path, tmp_path / "out")


def test_unreadable_archive(tmp_path):
    path = tmp_path / "S3.pkl"
    path.write_bytes(b"this is not a pickle")
    with pytest.raises(FormatError):
        convert(path, tmp_path / "out")


def test_convert_all_roster(tmp_path):
    for sid in ("S2", "S10", "S3"):
        d = tmp_path / "src" / sid
        d.mkdir(parents=True)
        (d / f"{sid}.pkl").write_bytes(pickle.dumps(synthetic_archive(subject=sid, seed=hash(sid) % 100)))
    out = tmp_path / "out"
    converted = convert_all(tmp_path / "src", out)
    assert len(converted) == 3
    roster = json.loads((out / "index.json").read_text())["subjects"]
    assert [e["subject_id"] for e in roster] == ["S10", "S2", "S3"]
    assert all((out / e["dir"] / "manifest.json").is_file() for e in roster)


def test_convert_all_empty_source(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ConvertError):
        convert_all(empty, tmp_path / "out")


def test_cli_converts_and_reports(tmp_path, capsys):
    d = tmp_path / "src" / "S2"
    d.mkdir(parents=True)
    (d / "S2.pkl").write_bytes(pickle.dumps(synthetic_archive()))
    assert cli_main([str(tmp_path / "src"), str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "converted 1 subjects" in out

    assert cli_main([str(tmp_path / "nothing"), str(tmp_path / "out2")]) == 2
    err = capsys.readouterr().err
    assert json.loads(err.strip())["error"] == "convert"


def test_round_trip_through_consumer(archive_file, tmp_path):
    """Converted output loads through the consuming package's public reader."""
    sma_signals = pytest.importorskip("sma.signals")
    path, archive = archive_file
    out = convert(path, tmp_path / "out")
    rec = sma_signals.load_recording(out)
    assert rec.subject_id == "S2"
    assert set(rec.channels) == {
        "chest.ACC", "chest.ECG", "chest.EDA", "chest.EMG", "chest.RESP", "chest.TEMP",
        "wrist.ACC", "wrist.BVP", "wrist.EDA", "wrist.TEMP",
    }
    np.testing.assert_array_equal(rec.labels, archive["label"])
    resp = rec.channel("chest.RESP")
    assert resp.sample_rate == 700.0
    np.testing.assert_array_equal(
        resp.samples[0], np.asarray(archive["signal"]["chest"]["Resp"]).reshape(-1).astype(np.float32)
    )
    acc = rec.channel("wrist.ACC")
    assert acc.axes == 3
    np.testing.assert_array_equal(acc.samples, np.asarray(archive["signal"]["wrist"]["ACC"]).T.astype(np.float32))
