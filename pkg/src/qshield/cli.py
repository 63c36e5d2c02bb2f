"""Command-line entry point.

Subcommands:
  run     execute a federated experiment, write metrics CSV + JSON summary
          (+ a PNG figure unless --no-figures)
  bench   time a registered KEM or signature scheme, write a CSV (+ PNG)
  demo    print a human-readable key-exchange or teleportation transcript
  report  re-render the figure from an existing metrics CSV

Exit codes: 0 success, 1 runtime failure or a run where no round ever
aggregated, 2 bad configuration or usage.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import qkd, tpchannel
from .config import ConfigError, build_config, read_config_file
from .fedcore import METRICS_SCHEMA_VERSION, run_experiment
from .pqc import bench_scheme, registered_kems, registered_sigs, scheme_info, UnknownSchemeError
from .qsim import fidelity

BENCH_COLUMNS = ("scheme", "op", "trials", "median_seconds", "size_bytes", "fixture_size_bytes")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qshield", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a federated experiment")
    run.add_argument("--config", help="key=value config file; flags override it")
    run.add_argument("--dataset", choices=("iris", "synthetic_genomic"))
    run.add_argument("--devices", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--channel", choices=("plain", "qkd_otp", "qkd_fernet", "teleport", "kem", "pqc_sign"))
    run.add_argument("--adversary", choices=("none", "eve_intercept", "eve_swap", "tamper"))
    run.add_argument("--adversary-fraction", type=float, dest="adversary_fraction")
    run.add_argument("--adversary-target", dest="adversary_target")
    run.add_argument("--dp", type=int)
    run.add_argument("--shots", type=int)
    run.add_argument("--optimizer", choices=("nelder_mead", "spsa"))
    run.add_argument("--seed", type=int)
    run.add_argument("--qkd-block-n", type=int, dest="qkd_block_n")
    run.add_argument("--qber-threshold", type=float, dest="qber_threshold")
    run.add_argument("--teleport-mode", choices=("verify", "tomography"), dest="teleport_mode")
    run.add_argument("--kem-mode", choices=("integrity", "confidential"), dest="kem_mode")
    run.add_argument("--max-iter", type=int, dest="max_iter")
    run.add_argument("--no-comm-time", action="store_true", help="write 0.0 comm time (byte-reproducible CSV)")
    run.add_argument("--out", help="metrics CSV path (summary JSON and figure PNG share the stem)")
    run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    bench = sub.add_parser("bench", help="micro-benchmark registered schemes")
    bench.add_argument("kind", choices=("sig", "kem"))
    bench.add_argument("--schemes", help="comma-separated scheme names (default: all runnable)")
    bench.add_argument("--trials", type=int, default=25)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", help="benchmark CSV path")
    bench.add_argument("--no-figures", action="store_true")

    demo = sub.add_parser("demo", help="print a protocol transcript")
    demo_sub = demo.add_subparsers(dest="demo_kind", required=True)
    demo_qkd = demo_sub.add_parser("qkd")
    demo_qkd.add_argument("--n", type=int, default=64)
    demo_qkd.add_argument("--eve", choices=("none", "intercept", "swap"), default="none")
    demo_qkd.add_argument("--fraction", type=float, default=1.0)
    demo_qkd.add_argument("--seed", type=int, default=0)
    demo_tp = demo_sub.add_parser("teleport")
    demo_tp.add_argument("--theta", type=float, default=1.0)
    demo_tp.add_argument("--phi", type=float, default=0.5)
    demo_tp.add_argument("--seed", type=int, default=0)

    report = sub.add_parser("report", help="render figures from an existing metrics CSV")
    report.add_argument("--metrics", required=True)
    report.add_argument("--out", help="output PNG path (default: CSV stem + .png)")
    return parser


def _cmd_run(args) -> int:
    override_keys = (
        "dataset", "devices", "rounds", "channel", "adversary", "adversary_fraction",
        "adversary_target", "dp", "shots", "optimizer", "seed", "qkd_block_n",
        "qber_threshold", "teleport_mode", "kem_mode", "max_iter", "out_path",
    )
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {k: getattr(args, k, None) for k in override_keys if getattr(args, k, None) is not None}
        overrides["out_path"] = args.out
        if args.no_comm_time:
            overrides["measure_comm_time"] = False
        if args.dataset is None and "dataset" not in file_values:
            print("error: a dataset is required (--dataset or a config file entry)", file=sys.stderr)
            return 2
        cfg = build_config(file_values, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        result = run_experiment(cfg)
    except Exception as exc:  # surfaced as a runtime failure, not a traceback
        print(f"run failed: {exc}", file=sys.stderr)
        return 1

    out_csv = Path(cfg.out_path or f"qshield_{cfg.dataset}_{cfg.channel}.csv")
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    out_csv.write_text(result.to_csv(), encoding="utf-8")
    out_json = out_csv.with_suffix(".json")
    out_json.write_text(json.dumps(result.summary, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out_csv} and {out_json}")
    if not args.no_figures:
        from .report import render_metrics_png

        png = render_metrics_png(out_csv, out_csv.with_suffix(".png"))
        print(f"wrote {png}")
    for row in result.rows:
        note = f" rejected={list(row.aborted_devices)}" if row.aborted_devices else ""
        print(
            f"round {row.round:3d}  acc {row.server_test_acc:.3f}  "
            f"val_loss {row.server_val_loss:.3f}  comm {row.comm_time_s:.3f}s{note}"
        )
    if result.summary["rounds_aggregated"] == 0:
        print("no round aggregated an update", file=sys.stderr)
        return 1
    return 0


def _fixture_size(name: str, op: str) -> str:
    try:
        info = scheme_info(name)
    except UnknownSchemeError:
        return ""
    size = {
        "keygen": info.pk_size,
        "sign": info.sig_size,
        "verify": None,
        "encaps": info.ct_size,
        "decaps": info.ss_size,
    }[op]
    return "" if size is None else str(size)


def _cmd_bench(args) -> int:
    if args.trials < 1:
        print("error: trials must be >= 1", file=sys.stderr)
        return 2
    runnable = registered_sigs() if args.kind == "sig" else registered_kems()
    schemes = [s.strip() for s in args.schemes.split(",")] if args.schemes else runnable
    unknown = [s for s in schemes if s not in runnable]
    if unknown:
        print(f"error: no runnable provider for {unknown}; registered: {runnable}", file=sys.stderr)
        return 2
    rng = np.random.default_rng(args.seed)
    records = []
    for name in schemes:
        records.extend(bench_scheme(name, args.trials, rng))
    lines = [",".join(BENCH_COLUMNS)]
    for r in records:
        lines.append(
            f"{r.scheme},{r.op},{r.trials},{r.median_seconds:.9f},{r.size_bytes},"
            f"{_fixture_size(r.scheme, r.op)}"
        )
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        out_csv = Path(args.out)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        out_csv.write_text(text, encoding="utf-8")
        print(f"wrote {out_csv}")
        if not args.no_figures:
            from .report import render_bench_png

            print(f"wrote {render_bench_png(records, out_csv.with_suffix('.png'))}")
    return 0


def _cmd_demo(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.demo_kind == "qkd":
        eve = {
            "none": qkd.EVE_NONE,
            "intercept": qkd.EveModel("intercept_resend", args.fraction),
            "swap": qkd.EveModel("store_and_resend", args.fraction),
        }[args.eve]
        session = qkd.run_bb84(args.n, eve, rng)
        sifted = session.sifted_sender.size
        test_fraction = max(0.25, min(0.5, (qkd.MIN_TEST_BITS + 0.5) / max(sifted, 1)))
        qkd.estimate_qber(session, test_fraction, rng)
        aborted = qkd.abort_decision(session)
        print(f"qubits sent        : {args.n}")
        print(f"eavesdropper       : {eve.kind} (fraction {eve.fraction:.2f})")
        print(f"sifted key length  : {sifted}")
        print(f"disclosed test bits: {session.test_indices.size}")
        print(f"estimated QBER     : {session.qber:.4f}")
        print(f"decision           : {'ABORT' if aborted else 'continue'} (threshold {qkd.DEFAULT_QBER_THRESHOLD})")
        if not aborted:
            print(f"key bits remaining : {session.key_sender.size}")
        return 0
    outcome = tpchannel.teleport_once(args.theta, args.phi, rng)
    tpchannel.verify_inverse(outcome, args.theta, args.phi, rng)
    fid = fidelity(outcome.bob_state, tpchannel.target_state(args.theta, args.phi))
    corrections = ("X" if outcome.m2 else "") + ("Z" if outcome.m1 else "")
    print(f"encoded angles     : theta={args.theta:.4f} phi={args.phi:.4f}")
    print(f"measured branch    : ({outcome.m1}, {outcome.m2})")
    print(f"corrections applied: {corrections or 'none'}")
    print(f"receiver fidelity  : {fid:.6f}")
    print(f"inverse-check bit  : {outcome.verify_bit} (probability {outcome.verify_pre_prob:.6f})")
    return 0


def _cmd_report(args) -> int:
    from .report import render_metrics_png

    metrics = Path(args.metrics)
    if not metrics.is_file():
        print(f"error: no such metrics file {metrics}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else metrics.with_suffix(".png")
    print(f"wrote {render_metrics_png(metrics, out)}")
    return 0


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "demo":
        return _cmd_demo(args)
    return _cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
