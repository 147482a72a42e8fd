"""Fold planning, experiment execution, suite reporting."""

import json

import numpy as np
import pytest

from sma import evaluate, model
from sma.config import Config
from sma.errors import DataError

from conftest import dataset_from_arrays, make_subject_tree, spectral_dataset

TINY_ARCH = dict(stem=(3, 4, 1), blocks=((3, 4, 1),), epochs=2, seed=0)


def _random_ds(rng, n, n_classes=2, n_subjects=3, t_len=16):
    values = rng.standard_normal((n, 1, t_len))
    labels = rng.integers(0, n_classes, n)
    subjects = [f"s{rng.integers(0, n_subjects)}" for _ in range(n)]
    return dataset_from_arrays(values, labels, n_classes, subjects=subjects)


def test_kfold_even_sizes():
    ds = _random_ds(np.random.default_rng(0), 100)
    plan = evaluate.plan_kfold(ds, 10, 1)
    assert [len(test) for _, test in plan.folds] == [10] * 10


def test_kfold_uneven_sizes():
    ds = _random_ds(np.random.default_rng(1), 101)
    plan = evaluate.plan_kfold(ds, 10, 1)
    sizes = sorted(len(test) for _, test in plan.folds)
    assert sizes == [10] * 9 + [11]


def test_kfold_partition_properties():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n = int(rng.integers(10, 150))
        k = int(rng.integers(2, 11))
        if n < k:
            continue
        ds = _random_ds(rng, n, n_classes=int(rng.integers(2, 5)))
        plan = evaluate.plan_kfold(ds, k, int(rng.integers(1 << 20)))
        seen = []
        for train, test in plan.folds:
            assert not set(train) & set(test)
            seen.extend(test)
        assert sorted(seen) == list(range(n))


def test_kfold_stratified_when_possible():
    rng = np.random.default_rng(3)
    values = rng.standard_normal((100, 1, 8))
    labels = np.array([0, 1] * 50)
    ds = dataset_from_arrays(values, labels, 2)
    plan = evaluate.plan_kfold(ds, 10, 4)
    for _, test in plan.folds:
        fold_labels = labels[list(test)]
        assert (fold_labels == 0).sum() == 5
        assert (fold_labels == 1).sum() == 5


def test_kfold_unstratified_fallback_warns():
    rng = np.random.default_rng(4)
    labels = np.zeros(40, dtype=np.int64)
    labels[:3] = 1  # class 1 has 3 < k members
    ds = dataset_from_arrays(rng.standard_normal((40, 1, 8)), labels, 2)
    with pytest.warns(UserWarning, match="unstratified"):
        plan = evaluate.plan_kfold(ds, 10, 0)
    evaluate.validate_plan(plan, 40)


def test_kfold_argument_errors():
    ds = _random_ds(np.random.default_rng(5), 20)
    with pytest.raises(ValueError):
        evaluate.plan_kfold(ds, 1, 0)
    with pytest.raises(ValueError):
        evaluate.plan_kfold(ds, 21, 0)


def test_kfold_seed_changes_split():
    ds = _random_ds(np.random.default_rng(6), 60)
    a = evaluate.plan_kfold(ds, 5, 1)
    b = evaluate.plan_kfold(ds, 5, 2)
    c = evaluate.plan_kfold(ds, 5, 1)
    assert a.folds == c.folds
    assert a.folds != b.folds


def test_loso_one_fold_per_subject():
    ds = _random_ds(np.random.default_rng(7), 50, n_subjects=5)
    plan = evaluate.plan_loso(ds)
    subject_ids = np.array(ds.subject_ids())
    assert len(plan.folds) == len(set(ds.subject_ids()))
    for train, test in plan.folds:
        test_subjects = set(subject_ids[list(test)])
        train_subjects = set(subject_ids[list(train)])
        assert len(test_subjects) == 1
        assert not test_subjects & train_subjects


def test_loso_two_subjects():
    ds = _random_ds(np.random.default_rng(8), 20, n_subjects=2)
    plan = evaluate.plan_loso(ds)
    assert len(plan.folds) == 2
    (train0, test0), (train1, test1) = plan.folds
    assert sorted(train0) == sorted(test1)
    assert sorted(train1) == sorted(test0)


def test_loso_single_subject_rejected():
    ds = _random_ds(np.random.default_rng(9), 10, n_subjects=1)
    with pytest.raises(ValueError):
        evaluate.plan_loso(ds)


def test_mean_std_two_pass_agreement():
    rng = np.random.default_rng(10)
    for _ in range(20):
        accs = rng.uniform(0, 1, int(rng.integers(2, 15)))
        mean = evaluate._mean(tuple(accs))
        std = evaluate._sample_std(tuple(accs))
        # independent two-pass recomputation
        m2 = sum(accs) / len(accs)
        s2 = (sum((a - m2) ** 2 for a in accs) / (len(accs) - 1)) ** 0.5
        assert abs(mean - m2) < 1e-12
        assert abs(std - s2) < 1e-12


def test_single_fold_std_is_zero():
    assert evaluate._sample_std((0.5,)) == 0.0


def test_mode_of():
    assert evaluate.mode_of("identification", "kfold") == "identification"
    assert evaluate.mode_of("emotion4", "loso") == "generalized"
    assert evaluate.mode_of("emotion4", "kfold") == "personalized"


def _experiment_setup(seed=11):
    ds = spectral_dataset(np.random.default_rng(seed), n=60, t_len=32)
    arch = model.ResTcnConfig(in_channels=1, num_classes=3, **TINY_ARCH)
    plan = evaluate.plan_kfold(ds, 5, 3)
    return ds, plan, arch


def test_run_experiment_report_shape():
    ds, plan, arch = _experiment_setup()
    report = evaluate.run_experiment(ds, plan, arch)
    assert len(report.fold_accuracy) == 5
    assert report.mode == "personalized"
    assert report.plan_kind == "kfold"
    assert 0.0 <= report.mean_accuracy <= 1.0
    assert report.num_windows == 60
    d = report.to_dict()
    assert set(d) >= {"modality", "mode", "mean_accuracy", "std_accuracy", "fold_macro_f1"}


def test_run_experiment_class_mismatch():
    ds, plan, _ = _experiment_setup()
    bad = model.ResTcnConfig(in_channels=1, num_classes=2, **TINY_ARCH)
    with pytest.raises(ValueError):
        evaluate.run_experiment(ds, plan, bad)


def test_run_experiment_deterministic_and_jobs_invariant():
    ds, plan, arch = _experiment_setup()
    a = evaluate.run_experiment(ds, plan, arch, jobs=1)
    b = evaluate.run_experiment(ds, plan, arch, jobs=1)
    c = evaluate.run_experiment(ds, plan, arch, jobs=3)
    assert a.fold_accuracy == b.fold_accuracy == c.fold_accuracy
    assert a.fold_macro_f1 == c.fold_macro_f1


def test_run_experiment_fold_error_is_annotated():
    ds, plan, arch = _experiment_setup()
    tiny = ds.subset(range(6))  # 5 folds over 6 windows -> some train folds lack a class
    small_plan = evaluate.plan_kfold(tiny, 3, 0)
    # sabotage: architecture expecting different channel count fails inside the fold
    bad_arch = model.ResTcnConfig(in_channels=2, num_classes=3, **TINY_ARCH)
    with pytest.raises(RuntimeError, match="fold 0"):
        evaluate.run_experiment(tiny, small_plan, bad_arch)


def test_discover_subjects_scan_and_index(tmp_path):
    root = tmp_path / "data"
    make_subject_tree(root, n_subjects=2, total_s=40.0)
    found = evaluate.discover_subjects(root)
    assert [p.name for p in found] == ["S2", "S3"]

    (root / "index.json").write_text(json.dumps({"subjects": [{"dir": "S3"}]}))
    found2 = evaluate.discover_subjects(root)
    assert [p.name for p in found2] == ["S3"]

    with pytest.raises(DataError):
        evaluate.discover_subjects(tmp_path / "nope")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataError):
        evaluate.discover_subjects(empty)


def _tiny_config(root, **kw):
    base = dict(
        data_root=str(root),
        window_s=4.0,
        stride_s=2.0,
        decimation=1,
        k=3,
        epochs=2,
        stem=(5, 6, 1),
        blocks=((3, 6, 1),),
        seed=0,
    )
    base.update(kw)
    return Config(**base)


def test_load_modality_and_arch(subject_tree):
    root, dirs = subject_tree
    cfg = _tiny_config(root)
    ds = evaluate.load_modality(dirs, "wrist.BVP", cfg, "emotion4")
    assert ds.num_classes == 4
    assert ds.axes == 1
    arch = evaluate.arch_for(ds, cfg)
    assert arch.num_classes == 4
    assert arch.in_channels == 1


def test_run_full_suite_reports_and_skips(subject_tree):
    root, _ = subject_tree
    cfg = _tiny_config(root, modalities=None)
    reports, skips = evaluate.run_full_suite(root, cfg)
    # the synthetic tree has 2 of the 10 modalities -> 6 reports, 24 skips
    assert len(reports) == 6
    assert len(skips) == 24
    assert {r.modality for r in reports} == {"chest.RESP", "wrist.BVP"}
    assert {r.mode for r in reports} == {"identification", "generalized", "personalized"}
    for s in skips:
        assert s["modality"] not in {"chest.RESP", "wrist.BVP"}


def test_suite_report_json_deterministic(subject_tree):
    root, _ = subject_tree
    cfg = _tiny_config(root)
    reports, skips = evaluate.run_full_suite(root, cfg)
    doc1 = evaluate.suite_report_json(reports, skips, cfg, ["S2", "S3", "S4"])
    reports2, skips2 = evaluate.run_full_suite(root, cfg)
    doc2 = evaluate.suite_report_json(reports2, skips2, cfg, ["S2", "S3", "S4"])
    assert doc1 == doc2
    parsed = json.loads(doc1)
    assert parsed["schema_version"] == evaluate.SCHEMA_VERSION
    assert parsed["subject_count"] == 3


def test_render_table_order(subject_tree):
    root, _ = subject_tree
    cfg = _tiny_config(root)
    reports, skips = evaluate.run_full_suite(root, cfg)
    table = evaluate.render_table(reports, skips)
    lines = [l for l in table.splitlines() if l.startswith(("chest.", "wrist."))]
    assert [l.split()[0] for l in lines] == list(evaluate.MODALITY_ORDER)
    assert "skipped chest.ACC" in table
