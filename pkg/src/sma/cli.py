"""Command-line entry point.

Commands: convert-check, train, eval, suite, risk, gradcheck. Configuration
comes from an optional JSON file (--config); individual flags override file
values, and the SMA_DATA environment variable overrides the data root.

Exit codes: 0 success, 2 missing/unreadable data, 3 config error,
4 violated internal invariant. Failures print one JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import evaluate, gradcheck, model, risk, signals
from .config import Config, ConfigError, load_config
from .errors import DataError

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONFIG = 3
EXIT_INVARIANT = 4


def _fail(stream, kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=stream)


def _config_from_args(args) -> Config:
    overrides = {
        "task": getattr(args, "task", None),
        "mode": getattr(args, "mode", None),
        "jobs": getattr(args, "jobs", None),
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out", None),
    }
    modality = getattr(args, "modality", None)
    if modality is not None:
        overrides["modalities"] = [modality]
    return load_config(args.config, overrides)


def _data_root(cfg: Config) -> Path:
    root = cfg.resolved_data_root()
    if root is None:
        raise DataError("no data root: set data_root in the config or the SMA_DATA env var")
    if not root.is_dir():
        raise DataError(f"data root {root} does not exist")
    return root


def _out_dir(cfg: Config) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _single_modality(cfg: Config) -> str:
    if cfg.modalities and len(cfg.modalities) == 1:
        return cfg.modalities[0]
    raise ConfigError("this command needs exactly one modality (--modality)")


def cmd_convert_check(args) -> int:
    cfg = _config_from_args(args)
    root = _data_root(cfg)
    dirs = evaluate.discover_subjects(root)
    for d in dirs:
        rec = signals.load_recording(d)
        names = ",".join(sorted(rec.channels))
        print(f"{rec.subject_id}: {len(rec.channels)} channels ({names}), {rec.labels.size} labels")
    print(f"ok: {len(dirs)} subjects under {root}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    modality = _single_modality(cfg)
    root = _data_root(cfg)
    dirs = evaluate.discover_subjects(root)
    ds = evaluate.load_modality(dirs, modality, cfg, cfg.task)
    arch = evaluate.arch_for(ds, cfg)
    trained, curve = model.train(model.build(arch), ds, seed=cfg.seed)
    out = _out_dir(cfg)
    path = out / f"model-{modality}-{cfg.task}.rtcn"
    model.save(trained, path)
    print(f"trained on {len(ds)} windows, final loss {trained.final_loss:.6f}")
    print(f"checkpoint: {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    modality = _single_modality(cfg)
    root = _data_root(cfg)
    dirs = evaluate.discover_subjects(root)
    task = "identification" if cfg.mode == "identification" else cfg.task
    ds = evaluate.load_modality(dirs, modality, cfg, task)
    plan = evaluate.plan_for_mode(ds, cfg.mode, cfg)
    report = evaluate.run_experiment(ds, plan, evaluate.arch_for(ds, cfg), jobs=cfg.jobs)
    out = _out_dir(cfg)
    path = out / f"eval-{modality}-{report.mode}.json"
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    print(
        f"{modality} {report.mode}: accuracy {100 * report.mean_accuracy:.2f} "
        f"± {100 * report.std_accuracy:.2f}, macro-F1 {100 * report.mean_macro_f1:.2f} "
        f"± {100 * report.std_macro_f1:.2f} over {len(plan.folds)} folds"
    )
    print(f"report: {path}")
    return EXIT_OK


def cmd_suite(args) -> int:
    cfg = _config_from_args(args)
    root = _data_root(cfg)
    started = time.time()
    if cfg.modalities is not None:
        whitelist = set(cfg.modalities)
        order = [m for m in evaluate.MODALITY_ORDER if m in whitelist]
    else:
        order = list(evaluate.MODALITY_ORDER)
    subject_dirs = evaluate.discover_subjects(root)
    reports, skips = [], []
    for modality in order:
        for task, mode in (("identification", "identification"), ("emotion4", "generalized"), ("emotion4", "personalized")):
            try:
                ds = evaluate.load_modality(subject_dirs, modality, cfg, task)
                plan = evaluate.plan_for_mode(ds, mode, cfg)
                reports.append(evaluate.run_experiment(ds, plan, evaluate.arch_for(ds, cfg), jobs=cfg.jobs))
            except (DataError, KeyError, ValueError) as exc:
                skips.append({"modality": modality, "task": task, "mode": mode, "reason": str(exc)})
    subject_ids = [signals.load_recording(d, channels=()).subject_id for d in subject_dirs]
    out = _out_dir(cfg)
    (out / "report.json").write_text(evaluate.suite_report_json(reports, skips, cfg, subject_ids))
    table = evaluate.render_table(reports, skips)
    (out / "report.txt").write_text(table)
    meta = {"started_unix": started, "finished_unix": time.time(), "elapsed_s": time.time() - started}
    (out / "report.meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(table, end="")
    print(f"report: {out / 'report.json'}")
    return EXIT_OK


def cmd_risk(args) -> int:
    cfg = _config_from_args(args)
    level = risk.assess(args.impact, args.accuracy, cfg.risk)
    print(str(level))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_all(seed=args.seed if args.seed is not None else 0)
    worst = max(results.values())
    for name in sorted(results):
        print(f"{name:<24} rel_err {results[name]:.3e}")
    ok = gradcheck.passed(results)
    print(f"{'PASS' if ok else 'FAIL'} max rel. error {worst:.3e}")
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sma", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--modality", default=None, help="channel name, e.g. chest.RESP")
        p.add_argument("--task", default=None, choices=["identification", "emotion4", "stress_binary"])
        p.add_argument("--mode", default=None, choices=["identification", "generalized", "personalized"])
        p.add_argument("--jobs", type=int, default=None, help="parallel fold workers")
        p.add_argument("--seed", type=int, default=None)
        return p

    common(sub.add_parser("convert-check", help="validate converted data")).set_defaults(fn=cmd_convert_check)
    common(sub.add_parser("train", help="train one model on one modality")).set_defaults(fn=cmd_train)
    common(sub.add_parser("eval", help="cross-validated evaluation of one modality")).set_defaults(fn=cmd_eval)
    common(sub.add_parser("suite", help="all modalities x all runs, table + JSON report")).set_defaults(fn=cmd_suite)

    p_risk = sub.add_parser("risk", help="risk level for an impact and detector accuracy")
    common(p_risk)
    p_risk.add_argument("--impact", required=True, choices=["low", "moderate", "high"])
    p_risk.add_argument("--accuracy", required=True, type=float)
    p_risk.set_defaults(fn=cmd_risk)

    common(sub.add_parser("gradcheck", help="finite-difference check of every backward pass")).set_defaults(
        fn=cmd_gradcheck
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        _fail(sys.stderr, "config", str(exc))
        return EXIT_CONFIG
    except DataError as exc:
        _fail(sys.stderr, "data", str(exc))
        return EXIT_DATA
    except FileNotFoundError as exc:
        _fail(sys.stderr, "data", str(exc))
        return EXIT_DATA
    except (AssertionError, ValueError, RuntimeError) as exc:
        _fail(sys.stderr, "invariant", str(exc))
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
