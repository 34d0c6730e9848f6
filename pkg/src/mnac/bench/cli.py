"""Command-line entry point: ``mnac theory|sweep-snr|sweep-eta|sweep-k|run-once``.

Exit codes: 0 on success, 1 on a configuration error, 2 when some point
was unachievable within the search cap.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from ..channel import ChannelConfig
from ..protocol import run_protocol
from ..theory import (
    DegenerateTest,
    feedback_overhead,
    gaussian_fb_capacity,
    min_id_cost,
    multistage_cost_prediction,
    nominal_stage_ks,
    optimize_capacity,
    symmetric_validation_threshold,
)
from .config import ExperimentConfig
from .plot import emit_plot
from .sweeps import build_scheme, parse_scheme, render_csv, run_sweep, write_timing

EXIT_OK, EXIT_CONFIG, EXIT_UNACHIEVABLE = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for Unachievable here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mnac", description="Multi-stage active device identification benchmarks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields")
    common.add_argument("--ell", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--snr-db", type=_floats, help="comma-separated list")
    common.add_argument("--eta1", type=_floats, help="comma-separated list (percent)")
    common.add_argument("--k-grid", type=_ints)
    common.add_argument("--stages", type=int)
    common.add_argument("--decoder", help="bp | ncomp, or one per stage such as bp,ncomp")
    common.add_argument("--schemes", help="comma-separated schemes such as bp,bp-bp,ncomp-bp")
    common.add_argument("--trials", type=int)
    common.add_argument("--final-trials", type=int)
    common.add_argument("--eps", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--n-val", type=int)
    common.add_argument("--resolution", type=float)
    common.add_argument("--cap", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--fast", dest="fast", action="store_true", default=None)
    common.add_argument("--physics", dest="fast", action="store_false")
    common.add_argument("--validate-final", action="store_true", default=None)
    common.add_argument("--include-feedback", action="store_true", default=None)
    common.add_argument("--svg", action="store_true", help="emit an SVG plot next to the CSV")
    common.add_argument("--plot", action="store_true", help="emit gnuplot data and script")
    common.add_argument("--timing", action="store_true", help="write a wall-time sidecar")

    sub.add_parser("theory", parents=[common], help="capacity, costs and overheads")
    for name, help_ in [("sweep-snr", "required uses versus SNR"),
                        ("sweep-eta", "required uses versus first-stage recovery rate"),
                        ("sweep-k", "required uses versus number of active devices")]:
        sub.add_parser(name, parents=[common], help=help_)
    once = sub.add_parser("run-once", parents=[common], help="one seeded protocol run")
    once.add_argument("--n-joint", type=int, required=True, help="total joint channel-uses")
    return p


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    mapping = {"ell": args.ell, "k": args.k, "snr_db": args.snr_db, "eta1": args.eta1,
               "k_grid": args.k_grid, "stages": args.stages, "trials": args.trials,
               "final_trials": args.final_trials, "eps": args.eps, "seed": args.seed,
               "out": args.out, "n_val": args.n_val, "resolution": args.resolution,
               "cap": args.cap, "workers": args.workers, "fast": args.fast,
               "validate_final": args.validate_final, "include_feedback": args.include_feedback}
    data.update({k: v for k, v in mapping.items() if v is not None})
    if args.decoder:
        data["decoders"] = [d.strip().lower() for d in args.decoder.split(",")]
    if args.schemes:
        data["schemes"] = [s.strip() for s in args.schemes.split(",")]
    if "scenario" not in data:
        stages = data.get("stages", 2)
        data["scenario"] = {1: "single_stage", 2: "two_stage"}.get(stages, "m_stage")
    try:
        return ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_theory(config: ExperimentConfig, out) -> int:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["snr_db", "eta1", "stages", "capacity_bits", "q_opt", "gamma_opt",
                     "min_id_cost", "multistage_prediction", "gamma_val", "n_val", "feedback_uses"])
    m = config.num_stages
    for snr_db in config.snr_db:
        cfg = ChannelConfig.from_snr_db(snr_db)
        point = optimize_capacity(config.k, cfg)
        for eta1 in config.eta1:
            etas = [eta1] * (m - 1) + [100.0]
            try:
                scheme = build_scheme(config, ["bp"] * m, cfg, eta1)
                n_val = max(scheme.n_vals)
            except DegenerateTest:
                n_val = ""
            ks = nominal_stage_ks(config.k, etas)
            ells = [config.ell - sum(ks[:j]) for j in range(m)]
            fb = feedback_overhead(ks[:-1], ells[:-1], gaussian_fb_capacity(cfg.snr)) if m > 1 else 0
            writer.writerow([f"{snr_db:g}", f"{eta1:g}", m, f"{point.rate:.6f}", f"{point.q:.6f}",
                             f"{point.gamma:.6f}", f"{min_id_cost(config.ell, config.k, cfg):.3f}",
                             f"{multistage_cost_prediction(config.ell, config.k, etas, cfg):.3f}",
                             f"{symmetric_validation_threshold(cfg):.6f}", n_val, fb])
    return EXIT_OK


def cmd_run_once(config: ExperimentConfig, n_joint: int, out) -> int:
    cfg = ChannelConfig.from_snr_db(config.snr_db[0])
    m = config.num_stages
    decoders = list(config.decoders) + [config.decoders[-1]] * max(0, m - len(config.decoders))
    scheme = build_scheme(config, decoders[:m], cfg, config.eta1[0])
    trace = run_protocol(scheme.plans(n_joint), config.ell, config.k, cfg, config.seed,
                         fast=config.fast, validate_final=config.validate_final)
    rows = trace.rows()
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, sweep: str, args) -> int:
    rows = run_sweep(config, sweep)
    text = render_csv(config, sweep, rows)
    if config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write(text)
        if args.timing:
            write_timing(config.out + ".timing.json", rows)
        if args.plot:
            emit_plot(config.out)
        if args.svg:
            emit_plot(config.out, svg=True)
    else:
        sys.stdout.write(text)
    for r in rows:
        if r.unachievable:
            print(f"unachievable: {r.scheme} at {r.axis}={r.value:g}", file=sys.stderr)
    return EXIT_UNACHIEVABLE if any(r.unachievable for r in rows) else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        if args.schemes:
            for s in config.schemes:
                parse_scheme(s)
        if args.command == "theory":
            return cmd_theory(config, sys.stdout)
        if args.command == "run-once":
            if args.n_joint < 0:
                raise ConfigError("--n-joint must be >= 0")
            return cmd_run_once(config, args.n_joint, sys.stdout)
        sweep = {"sweep-snr": "snr", "sweep-eta": "eta", "sweep-k": "k"}[args.command]
        return cmd_sweep(config, sweep, args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"mnac: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
