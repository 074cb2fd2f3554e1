"""Command line entry point: ``dtgrm {train,eval,gradcheck,ablate,gen-data}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .config import RunConfig, load, override
from .gradcheck import TOLERANCE, default_checks, faulty_check, run_gradcheck
from .graph import GRAPH_VARIANTS
from .training import (
    ABLATION_PARAMS,
    NonFiniteLoss,
    ablate,
    evaluate_model,
    format_table,
    load_data,
    load_model,
    predict_labels,
    report_record,
    train,
)

log = logging.getLogger("dtgrm")

EXIT_CONFIG = 2
EXIT_NONFINITE = 3


def _common(p):
    p.add_argument("--config", type=Path, help="INI run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--precision", type=int, choices=(32, 64))
    p.add_argument("--no-self-supervision", action="store_true")
    p.add_argument("--stages", type=int, help="number of refinement stages S")
    p.add_argument("--levels", type=int, help="DRGC levels K per stage")
    p.add_argument("--eta", type=float, help="percentage of exchanged frames")
    p.add_argument("--graph-variant", choices=GRAPH_VARIANTS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--data", type=Path, help="dataset directory with train/ and test/ splits")


def _run_config(args):
    cfg = load(args.config) if args.config else RunConfig()
    cfg = override(
        cfg,
        seed=args.seed,
        out_dir=str(args.out) if args.out else None,
        precision=args.precision,
        self_supervision=False if args.no_self_supervision else None,
        num_stages=args.stages,
        num_levels=args.levels,
        eta=args.eta,
        graph_variant=args.graph_variant,
        epochs=args.epochs,
        data_dir=str(args.data) if args.data else None,
    )
    if args.seed is not None:
        cfg.data.generator.seed = args.seed
    return cfg


def cmd_gen_data(args):
    cfg = _run_config(args)
    out = Path(args.out or "data")
    cfg.data.data_dir = None
    train_set, test_set, C = load_data(cfg)
    io.write_dataset(out / "train", train_set, C)
    io.write_dataset(out / "test", test_set, C)
    print(f"wrote {len(train_set)} train / {len(test_set)} test sequences to {out}")
    return 0


def cmd_train(args):
    cfg = _run_config(args)
    train_set, test_set, C = load_data(cfg)
    out = Path(cfg.train.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.dumps())
    try:
        res = train(cfg, train_set, test_set, C, out_dir=out)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    record = report_record(res.train_reports, "train/")
    record.update(report_record(res.test_reports, "test/"))
    (out / "metrics.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
    final = res.test_reports or res.train_reports
    print(format_report(final))
    return 0


def format_report(reports):
    lines = [f"{'stage':<10}{'F1@10':>8}{'F1@25':>8}{'F1@50':>8}{'Edit':>8}{'Acc':>8}"]
    for s, r in enumerate(reports):
        name = "backbone" if s == 0 else f"stage {s}"
        lines.append(f"{name:<10}{r.f1[10]:8.2f}{r.f1[25]:8.2f}{r.f1[50]:8.2f}{r.edit:8.2f}{r.acc:8.2f}")
    return "\n".join(lines)


def cmd_eval(args):
    model, cfg, header = load_model(args.checkpoint)
    if args.data:
        sequences, C = io.read_dataset(args.data)
    else:
        train_set, test_set, C = load_data(cfg)
        sequences = train_set if args.split == "train" else test_set
    if C != header["extra"]["num_classes"] or sequences[0].features.shape[1] != header["extra"]["d_in"]:
        print(
            f"error: dataset has {C} classes / width {sequences[0].features.shape[1]}, "
            f"checkpoint expects {header['extra']['num_classes']} / {header['extra']['d_in']}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    ignore = tuple(args.ignore or ())
    reports = evaluate_model(model, sequences, ignore=ignore)
    print(format_report(reports))
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_metrics.json").write_text(json.dumps(report_record(reports, ""), indent=1, sort_keys=True) + "\n")
    if args.timeline:
        from .render import render_timeline

        tdir = Path(args.timeline)
        tdir.mkdir(parents=True, exist_ok=True)
        for seq in sequences[: args.timeline_count]:
            preds = [predict_labels(y) for y in model.predict(seq.features)]
            render_timeline(tdir / f"{seq.id}.png", seq.labels, preds, C, title=seq.id)
    return 0


def cmd_gradcheck(args):
    checks = default_checks()
    if args.inject_fault:
        checks.append(faulty_check())
    results = run_gradcheck(checks, seed=args.seed or 0)
    ok = True
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<24} worst rel error {r.rel_error:.3e}  {status}")
        ok &= r.passed
    print(f"{'all passed' if ok else 'FAILED'} (tolerance {TOLERANCE:g})")
    return 0 if ok else 1


def _ablation_value(param, raw):
    if param in ("num_stages", "num_levels"):
        return int(raw)
    if param == "graph_variant":
        if raw not in GRAPH_VARIANTS:
            raise ValueError(f"unknown graph variant {raw!r}")
        return raw
    if param == "self_supervision":
        return raw.lower() in ("1", "true", "yes", "on")
    return float(raw)


def cmd_ablate(args):
    param = args.param.replace("-", "_")
    if param not in ABLATION_PARAMS:
        print(f"error: unknown parameter {args.param!r}; choose from {', '.join(ABLATION_PARAMS)}", file=sys.stderr)
        return EXIT_CONFIG
    values = [_ablation_value(param, v) for v in args.values]
    cfg = _run_config(args)
    train_set, test_set, C = load_data(cfg)
    out = Path(cfg.train.out_dir)
    rows = ablate(cfg, param, values, train_set, test_set, C, out_dir=out)
    table = format_table(rows)
    print(table)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.txt").write_text(table + "\n")
    dump = [{"param": r["param"], "value": r["value"], **report_record(r["stages"], "")} for r in rows]
    (out / "ablation.json").write_text(json.dumps(dump, indent=1, sort_keys=True) + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dtgrm", description="Dilated temporal graph reasoning for action segmentation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write checkpoints and logs")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("--data", type=Path, help="dataset split directory (default: regenerate from the checkpoint config)")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", type=Path)
    p.add_argument("--timeline", type=Path, help="directory for per-sequence timeline PNGs")
    p.add_argument("--timeline-count", type=int, default=5)
    p.add_argument("--ignore", type=int, nargs="*", help="class indices excluded from edit/F1 (e.g. background)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    p.add_argument("--seed", type=int)
    p.add_argument("--inject-fault", action="store_true", help="add a deliberately wrong gradient (must fail)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="one training run per value of a hyper-parameter")
    p.add_argument("param", help=", ".join(ABLATION_PARAMS))
    p.add_argument("values", nargs="+")
    _common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gen-data", help="write a synthetic dataset to disk")
    _common(p)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
