"""Command-line entry point: ``mulsedge {train,calibrate,simulate,sweep,report}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .conformal import load_calibration, save_calibration
from .data import generate_task
from .perceiver import load_checkpoint, save_checkpoint
from .protocol import Calibration

log = logging.getLogger("mulsedge")


def _parse_snr(items):
    out = {}
    for item in items or []:
        try:
            k, v = item.split(":", 1)
            out[int(k)] = float(v)
        except ValueError:
            raise bench.ConfigError(f"--snr expects MODALITY:DB, got {item!r}") from None
    return out


def _scenario(args) -> bench.Scenario:
    if not args.config:
        raise bench.ConfigError("--config is required")
    sc = bench.Scenario.load(args.config)
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["seeds"] = (args.seed,)
    for name in ("combiner", "beta", "alpha", "alpha2"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if getattr(args, "approach", None):
        kw["approaches"] = tuple(a.upper() for a in args.approach)
    if getattr(args, "rate", None):
        kw["rates"] = tuple(args.rate)
    if getattr(args, "snr", None):
        kw["snr"] = _parse_snr(args.snr)
    return replace(sc, **kw)


def _calibration_from_file(path) -> Calibration:
    qs, ts = load_calibration(path)
    return Calibration({(q.task_id, q.modality_id): q for q in qs},
                       {(t.task_id, t.combiner): t for t in ts})


def cmd_train(args) -> int:
    sc = _scenario(args)
    seed = sc.seeds[0]
    model, _ = bench.train_model(sc, seed)
    out = Path(args.out or "model.ckpt")
    save_checkpoint(model, out)
    log.info("wrote %s", out)
    return 0


def cmd_calibrate(args) -> int:
    sc = _scenario(args)
    model = load_checkpoint(args.checkpoint)
    split = generate_task(sc.task)
    calib = bench.calibrate_system(model, 0, split.cal, sc.alpha, sc.alpha2, sc.beta)
    out = Path(args.out or "calibration.json")
    save_calibration(out, list(calib.quantiles.values()), list(calib.thresholds.values()))
    log.info("wrote %s", out)
    return 0


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    model = load_checkpoint(args.checkpoint)
    split = generate_task(sc.task)
    if args.calibration:
        calib = _calibration_from_file(args.calibration)
    else:
        calib = bench.calibrate_system(model, 0, split.cal, sc.alpha, sc.alpha2, sc.beta)
    # rows carry the seed the checkpoint was trained with unless --seed overrides it
    seed = args.seed if args.seed is not None else model.seed
    rows = bench.run_point(sc, model, split, calib, seed)
    _emit(bench.write_csv(rows), args.out)
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    rows = bench.run_experiment(sc, jobs=args.jobs)
    _emit(bench.write_csv(rows), args.out)
    return 0


def cmd_report(args) -> int:
    rows = []
    for p in args.inputs:
        rows.extend(bench.read_csv(p))
    summary = bench.summarize(rows)
    if not summary:
        raise bench.ConfigError("no rows to report")
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=list(summary[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(summary)
    finally:
        if args.out:
            out.close()
    return 0


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--approach", nargs="+", choices=["A1", "A2", "A3", "A4", "A5", "a1", "a2", "a3", "a4", "a5"])
    p.add_argument("--combiner", choices=["ewc", "sssc"])
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--rate", type=float, nargs="+", help="uplink rate(s) in bit/s")
    p.add_argument("--snr", nargs="+", metavar="MODALITY:DB")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mulsedge",
        description="Train, calibrate and simulate multimodal edge inference scenarios.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("calibrate", help="write conformal quantiles and routing thresholds")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("simulate", help="simulate approaches on the test split")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--calibration")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="train, calibrate and simulate every seed x approach x rate")
    _common(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("report", help="aggregate CSV rows over seeds")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (bench.ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"mulsedge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
