"""Cross-validation planning and experiment execution.

Two protocols drive everything: k-fold over pooled windows (identification
and the personalized mode) and leave-one-subject-out (the generalized mode).
Each fold trains an independent model from a fold-derived seed, so results
do not depend on scheduling order or the --jobs level.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import metrics, model, signals
from .config import Config
from .errors import DataError

SCHEMA_VERSION = 1

# table ordering: chest block then wrist block
MODALITY_ORDER = signals.ALL_CHANNELS


@dataclass(frozen=True)
class FoldPlan:
    kind: str  # "kfold" | "loso"
    folds: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    seed: int


def validate_plan(plan: FoldPlan, n: int) -> None:
    """Assert disjointness, coverage and (k-fold) size balance."""
    seen: set[int] = set()
    sizes = []
    for train_ids, test_ids in plan.folds:
        test = set(test_ids)
        if test & seen:
            raise AssertionError("fold test sets overlap")
        if set(train_ids) & test:
            raise AssertionError("train and test of one fold overlap")
        if len(train_ids) + len(test_ids) != n:
            raise AssertionError("fold does not partition the dataset")
        seen |= test
        sizes.append(len(test_ids))
    if seen != set(range(n)):
        raise AssertionError("test sets do not cover the dataset")
    if plan.kind == "kfold" and sizes and max(sizes) - min(sizes) > 1:
        raise AssertionError(f"fold sizes differ by more than 1: {sizes}")


def plan_kfold(ds, k: int, seed: int) -> FoldPlan:
    """Seeded k-fold split, stratified by class when every class has >= k windows.

    Stratification deals each class's shuffled windows round-robin with a
    pointer that keeps running across classes, so per-class and overall fold
    sizes both stay within 1 of each other.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    n = len(ds)
    if n < k:
        raise ValueError(f"dataset has {n} windows, fewer than k={k}")
    rng = np.random.default_rng(seed)
    labels = ds.labels()
    counts = np.bincount(labels, minlength=ds.num_classes)

    assignment = np.empty(n, dtype=np.int64)
    if np.all(counts >= k):
        pointer = 0
        for c in range(ds.num_classes):
            members = np.flatnonzero(labels == c)
            for idx in rng.permutation(members):
                assignment[idx] = pointer % k
                pointer += 1
    else:
        warnings.warn(
            f"class counts {counts.tolist()} below k={k}; falling back to unstratified folds",
            stacklevel=2,
        )
        perm = rng.permutation(n)
        for fold, chunk in enumerate(np.array_split(perm, k)):
            assignment[chunk] = fold

    folds = []
    for fold in range(k):
        test = np.flatnonzero(assignment == fold)
        train = np.flatnonzero(assignment != fold)
        folds.append((tuple(int(i) for i in train), tuple(int(i) for i in test)))
    plan = FoldPlan("kfold", tuple(folds), seed)
    validate_plan(plan, n)
    return plan


def plan_loso(ds) -> FoldPlan:
    """One fold per subject: that subject's windows form the test set."""
    subject_ids = np.array(ds.subject_ids())
    unique = sorted(set(subject_ids.tolist()))
    if len(unique) < 2:
        raise ValueError(f"leave-one-subject-out needs >= 2 subjects, found {len(unique)}")
    folds = []
    for sid in unique:
        mask = subject_ids == sid
        test = np.flatnonzero(mask)
        train = np.flatnonzero(~mask)
        folds.append((tuple(int(i) for i in train), tuple(int(i) for i in test)))
    plan = FoldPlan("loso", tuple(folds), 0)
    validate_plan(plan, len(ds))
    return plan


@dataclass(frozen=True)
class RunReport:
    modality: str
    task: str
    mode: str
    plan_kind: str
    seed: int
    num_windows: int
    num_subjects: int
    fold_accuracy: tuple[float, ...]
    fold_macro_f1: tuple[float, ...]
    mean_accuracy: float
    std_accuracy: float
    mean_macro_f1: float
    std_macro_f1: float

    @classmethod
    def from_folds(cls, modality, task, mode, plan: FoldPlan, seed, num_windows, num_subjects, accs, f1s):
        accs = tuple(float(a) for a in accs)
        f1s = tuple(float(f) for f in f1s)
        if len(accs) != len(plan.folds) or len(f1s) != len(plan.folds):
            raise ValueError("per-fold metric count does not match the plan")
        return cls(
            modality=modality,
            task=task,
            mode=mode,
            plan_kind=plan.kind,
            seed=seed,
            num_windows=num_windows,
            num_subjects=num_subjects,
            fold_accuracy=accs,
            fold_macro_f1=f1s,
            mean_accuracy=_mean(accs),
            std_accuracy=_sample_std(accs),
            mean_macro_f1=_mean(f1s),
            std_macro_f1=_sample_std(f1s),
        )

    def to_dict(self) -> dict:
        return {
            "modality": self.modality,
            "task": self.task,
            "mode": self.mode,
            "plan_kind": self.plan_kind,
            "seed": self.seed,
            "num_windows": self.num_windows,
            "num_subjects": self.num_subjects,
            "fold_accuracy": list(self.fold_accuracy),
            "fold_macro_f1": list(self.fold_macro_f1),
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "mean_macro_f1": self.mean_macro_f1,
            "std_macro_f1": self.std_macro_f1,
        }


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else 0.0


def _sample_std(values) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def mode_of(task: str, plan_kind: str) -> str:
    if task == "identification":
        return "identification"
    return "generalized" if plan_kind == "loso" else "personalized"


def _run_fold(ds, arch: model.ResTcnConfig, fold_index: int, train_ids, test_ids):
    seed = arch.seed ^ fold_index
    cfg = replace(arch, seed=seed)
    try:
        trained, _ = model.train(model.build(cfg), ds.subset(train_ids), seed=seed)
        test_ds = ds.subset(test_ids)
        pred, _ = model.predict(trained, test_ds)
        cm = metrics.confusion(test_ds.labels(), pred, ds.num_classes)
        return metrics.accuracy(cm), metrics.macro_f1(cm)
    except Exception as exc:
        raise RuntimeError(f"fold {fold_index}: {exc}") from exc


_POOL_DS = None


def _pool_init(ds):
    global _POOL_DS
    _POOL_DS = ds


def _pool_fold(args):
    arch_dict, fold_index, train_ids, test_ids = args
    arch = model.ResTcnConfig.from_dict(arch_dict)
    return fold_index, _run_fold(_POOL_DS, arch, fold_index, train_ids, test_ids)


def run_experiment(ds, plan: FoldPlan, arch: model.ResTcnConfig, jobs: int = 1) -> RunReport:
    """Train/evaluate every fold of the plan; aggregate mean and sample std."""
    if arch.num_classes != ds.num_classes:
        raise ValueError(f"architecture expects {arch.num_classes} classes, dataset has {ds.num_classes}")
    n_folds = len(plan.folds)
    accs = [0.0] * n_folds
    f1s = [0.0] * n_folds
    if jobs > 1 and n_folds > 1:
        tasks = [(arch.to_dict(), i, train, test) for i, (train, test) in enumerate(plan.folds)]
        with ProcessPoolExecutor(max_workers=min(jobs, n_folds), initializer=_pool_init, initargs=(ds,)) as pool:
            for fold_index, (acc, f1) in pool.map(_pool_fold, tasks):
                accs[fold_index], f1s[fold_index] = acc, f1
    else:
        for i, (train_ids, test_ids) in enumerate(plan.folds):
            accs[i], f1s[i] = _run_fold(ds, arch, i, train_ids, test_ids)
    subjects = len(set(ds.subject_ids()))
    return RunReport.from_folds(
        ds.modality, ds.task, mode_of(ds.task, plan.kind), plan, arch.seed, len(ds), subjects, accs, f1s
    )


def discover_subjects(data_root) -> list[Path]:
    """Subject directories under a converted-data root, sorted by subject id.

    An index.json roster (written by the converter) takes precedence; without
    one, any direct subdirectory holding a manifest.json counts.
    """
    root = Path(data_root)
    if not root.is_dir():
        raise DataError(f"data root {root} is not a directory")
    index = root / "index.json"
    if index.is_file():
        entries = json.loads(index.read_text()).get("subjects", [])
        dirs = [root / e["dir"] if isinstance(e, dict) else root / e for e in entries]
    else:
        dirs = [p.parent for p in root.glob("*/manifest.json")]
    dirs = sorted(set(dirs))
    if not dirs:
        raise DataError(f"no converted subjects under {root}")
    return dirs


def load_modality(subject_dirs, modality: str, cfg: Config, task: str):
    """Load one channel for every subject and pool the windowed result."""
    recordings = [signals.load_recording(d, channels=(modality,)) for d in subject_dirs]
    return signals.build_dataset(
        recordings, modality, cfg.window_s, cfg.stride_s, task, chest_decimation=cfg.decimation
    )


def arch_for(ds, cfg: Config) -> model.ResTcnConfig:
    return model.ResTcnConfig(
        in_channels=ds.axes,
        stem=cfg.stem,
        blocks=cfg.blocks,
        num_classes=ds.num_classes,
        lr=cfg.lr,
        batch_size=cfg.batch_size,
        epochs=cfg.epochs,
        seed=cfg.seed,
    )


def plan_for_mode(ds, mode: str, cfg: Config) -> FoldPlan:
    if mode == "generalized":
        return plan_loso(ds)
    return plan_kfold(ds, cfg.k, cfg.seed)


def run_full_suite(data_root, cfg: Config):
    """All 10 modalities x {identification, generalized, personalized} emotion.

    Returns (reports, skips): reports are RunReport objects; skips are dicts
    naming a (modality, mode) pair that could not run and why.
    """
    subject_dirs = discover_subjects(data_root)
    reports: list[RunReport] = []
    skips: list[dict] = []
    run_specs = [
        ("identification", "identification"),
        ("emotion4", "generalized"),
        ("emotion4", "personalized"),
    ]
    for modality in MODALITY_ORDER:
        for task, mode in run_specs:
            try:
                ds = load_modality(subject_dirs, modality, cfg, task)
                plan = plan_for_mode(ds, mode, cfg)
                reports.append(run_experiment(ds, plan, arch_for(ds, cfg), jobs=cfg.jobs))
            except (DataError, KeyError, ValueError) as exc:
                warnings.warn(f"skipping {modality} {mode}: {exc}", stacklevel=2)
                skips.append({"modality": modality, "task": task, "mode": mode, "reason": str(exc)})
    return reports, skips


def suite_report_json(reports, skips, cfg: Config, subject_ids) -> str:
    """Deterministic JSON document for a suite run (no timestamps)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "subject_count": len(subject_ids),
        "subjects": sorted(subject_ids),
        "window_s": cfg.window_s,
        "stride_s": cfg.stride_s,
        "decimation": cfg.decimation,
        "epochs": cfg.epochs,
        "runs": [r.to_dict() for r in reports],
        "skips": sorted(skips, key=lambda s: (s["modality"], s["mode"])),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _fmt_cell(report: RunReport | None, f1: bool = False) -> str:
    if report is None:
        return "--"
    mean = report.mean_macro_f1 if f1 else report.mean_accuracy
    std = report.std_macro_f1 if f1 else report.std_accuracy
    return f"{100 * mean:6.2f} ± {100 * std:5.2f}"

def render_table(reports, skips=()) -> str:
    """Plain-text table, one modality per row in the chest-then-wrist order."""
    by_key = {(r.modality, r.mode): r for r in reports}
    header = (
        f"{'modality':<12} {'identification':>16} {'generalized acc':>16} "
        f"{'generalized f1':>16} {'personalized acc':>17} {'personalized f1':>16}"
    )
    lines = [header, "-" * len(header)]
    for modality in MODALITY_ORDER:
        ident = by_key.get((modality, "identification"))
        gen = by_key.get((modality, "generalized"))
        per = by_key.get((modality, "personalized"))
        lines.append(
            f"{modality:<12} {_fmt_cell(ident):>16} {_fmt_cell(gen):>16} "
            f"{_fmt_cell(gen, f1=True):>16} {_fmt_cell(per):>17} {_fmt_cell(per, f1=True):>16}"
        )
    if skips:
        lines.append("")
        for s in skips:
            lines.append(f"skipped {s['modality']} {s['mode']}: {s['reason']}")
    return "\n".join(lines) + "\n"
