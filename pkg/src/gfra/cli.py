"""Command-line front end for the simulator and analysis tools."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

import numpy as np

from . import analysis, detect, harness, traffic
from .config import default_config, load_config, validate
from .receiver import CnnDetector, GlrtDetector, Receiver, Thresholds

# GLRT operating points used when no explicit thresholds are given (the
# normalized-correlation score roughly measures the aligned energy fraction,
# so 0.75 tolerates interference up to ~1/3 of the wanted unit's power);
# the CNN defaults to 0.5 on both labels.
GLRT_THRESHOLDS = Thresholds(start=0.75, tail=0.75)
CNN_THRESHOLDS = Thresholds(start=0.5, tail=0.5)


def _base_config(args):
    cfg = load_config(args.config) if args.config else default_config()
    traffic_cfg = cfg.traffic
    if getattr(args, "lam", None) is not None:
        traffic_cfg = replace(traffic_cfg, lam=args.lam)
    frame = cfg.frame
    if getattr(args, "sf_length", None) is not None:
        frame = replace(frame, T_SF=args.sf_length)
    return validate(frame, cfg.radio, traffic_cfg)


def _detector(args):
    if args.detector == "cnn":
        if not getattr(args, "weights", None):
            sys.exit("--weights is required with --detector cnn")
        return CnnDetector(detect.load_weights(args.weights))
    return GlrtDetector()


def _thresholds(args):
    base = CNN_THRESHOLDS if args.detector == "cnn" else GLRT_THRESHOLDS
    start = args.threshold_start if args.threshold_start is not None else base.start
    tail = args.threshold_tail if args.threshold_tail is not None else base.tail
    return Thresholds(start=start, tail=tail)


def _write_csv(path, header, rows):
    out = open(path, "w", newline="") if path else sys.stdout
    writer = csv.writer(out)
    writer.writerow(header)
    writer.writerows(rows)
    if path:
        out.close()
        print(f"wrote {path}")


def cmd_simulate(args):
    cfg = _base_config(args)
    rng = np.random.default_rng(args.seed)
    scenario = traffic.generate_scenario(cfg, rng)
    buffer = traffic.synthesize(scenario, rng)
    print(f"superframe: T_SF={cfg.frame.T_SF}, lambda={cfg.traffic.lam}, "
          f"activations={len(scenario.activations)}")
    for i, act in enumerate(scenario.activations):
        starts = act.replica_starts(cfg.L_max)
        print(f"  unit {i}: tau_u={act.tau_u} iota={act.iota_u} "
              f"replica starts={list(starts)} P_rx={act.budget.P_i:.3e} W")
    rx = Receiver(cfg, _detector(args), _thresholds(args))
    units, attempts = rx.run_superframe(buffer.samples, return_attempts=True)
    print(f"decode attempts: {len(attempts)}")
    truth = {a.payload.tobytes() for a in scenario.activations}
    for unit in units:
        ok = unit.payload_key() in truth
        print(f"  decoded unit at tau_hat={unit.tau_hat} iota_hat={unit.iota_hat} "
              f"payload {'matches a transmitted unit' if ok else 'is WRONG'}")
    print(f"recovered {len(units)} unit(s) of {len(scenario.activations)}")


def cmd_plr(args):
    cfg = _base_config(args)
    lam_grid = [float(tok) for tok in args.lambda_grid.split(",")]
    records = harness.plr_campaign(
        cfg, _detector(args), _thresholds(args), lam_grid,
        packets_target=args.packets, seed=args.seed, workers=args.workers)
    _write_csv(args.out, ["lambda", "n_tx", "n_err", "n_miss", "plr"],
               [[r.lam, r.n_tx, r.n_err, r.n_miss, f"{r.plr:.6g}"]
                for r in records])


def cmd_roc(args):
    cfg = _base_config(args)
    rng = np.random.default_rng(args.seed)
    thresholds = np.linspace(0.0, 1.0, args.points)
    curves = harness.roc_campaign(cfg, _detector(args), args.lam, args.count,
                                  thresholds, rng, sf_length=args.sf_length)
    rows = []
    for label, points in curves.items():
        rows += [[label, f"{p.threshold:.6g}", f"{p.false_alarm:.6g}",
                  f"{p.recall:.6g}"] for p in points]
    _write_csv(args.out, ["label", "threshold", "false_alarm", "recall"], rows)


def cmd_confusion_prob(args):
    cfg = _base_config(args)
    frame = cfg.frame
    victim = analysis.VictimReplica(tau_v=args.tau_v, iota_v=args.iota_v,
                                    slot=args.slot, offset=args.offset)
    rng = np.random.default_rng(args.seed)
    rows = []
    for lam in (float(tok) for tok in args.lambda_grid.split(",")):
        closed = analysis.tail_confusion_prob(victim, frame, lam)
        mc = analysis.mc_tail_confusion(victim, frame, lam, args.trials, rng)
        rows.append([f"{lam:.6g}", f"{closed:.8g}", f"{mc.value:.8g}",
                     f"{mc.stderr:.3g}"])
    _write_csv(args.out, ["lambda", "closed_form", "mc_estimate", "mc_stderr"],
               rows)


def cmd_export_dataset(args):
    cfg = _base_config(args)  # --sf-length already applied to the frame
    counts = {}
    for token in args.counts.split(","):
        name, value = token.split("=")
        counts[int(name.strip().lstrip("Hh"))] = int(value)
    rng = np.random.default_rng(args.seed)
    n = harness.export_dataset(args.out, cfg, counts, rng)
    print(f"wrote {n} records to {args.out}")


def cmd_flops(args):
    report = analysis.cnn_flops()
    for name, flops in report.rows:
        print(f"{name:>16s}  {flops:>9,d}")
    print(f"{'total':>16s}  {report.total:>9,d}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gfra",
        description="Asynchronous grant-free random access link simulator")
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, detector=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--sf-length", dest="sf_length", type=int)
        if detector:
            p.add_argument("--detector", choices=["glrt", "cnn"], default="glrt")
            p.add_argument("--weights", help="CNN weights file")
            p.add_argument("--threshold-start", dest="threshold_start", type=float)
            p.add_argument("--threshold-tail", dest="threshold_tail", type=float)

    p = sub.add_parser("simulate", help="trace one superframe")
    p.add_argument("--lambda", dest="lam", type=float)
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plr", help="packet-loss-rate campaign")
    p.add_argument("--lambda-grid", required=True,
                   help="comma-separated traffic levels")
    p.add_argument("--packets", type=int, default=20_000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    add_common(p)
    p.set_defaults(func=cmd_plr)

    p = sub.add_parser("roc", help="detection ROC sweep")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--count", type=int, default=1000,
                   help="windows per class (class 4 gets half)")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out")
    add_common(p)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("confusion-prob",
                       help="closed-form vs Monte Carlo tail-confusion probability")
    p.add_argument("--lambda-grid", default="1e-4,1e-3,1e-2")
    p.add_argument("--iota-v", dest="iota_v", type=int, default=5)
    p.add_argument("--tau-v", dest="tau_v", type=int, default=500)
    p.add_argument("--slot", type=int, default=1)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--out")
    add_common(p, detector=False)
    p.set_defaults(func=cmd_confusion_prob)

    p = sub.add_parser("export-dataset", help="write a labeled window dataset")
    p.add_argument("--counts", required=True,
                   help="per-class record counts, e.g. H1=200,H2=200")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--out", required=True)
    add_common(p, detector=False)
    p.set_defaults(func=cmd_export_dataset)

    p = sub.add_parser("flops", help="detector FLOP accounting")
    p.set_defaults(func=cmd_flops)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
