"""Sweep recipes: required channel-uses against SNR, first-stage recovery rate, and k.

Every sweep writes a CSV with ``#`` metadata lines (full config and seed),
a header row and one row per (axis value, scheme).  ``total`` is
joint + validation, plus feedback when ``include_feedback`` is set; the
feedback column is always reported on its own.  Wall-clock times are kept
out of the CSV so that equal configs give equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass

import numpy as np

from ..channel import ChannelConfig
from ..theory import min_id_cost
from .config import ExperimentConfig, Scheme, make_scheme
from .search import Unachievable, find_min_budget

COLUMNS = ["axis", "value", "scheme", "stages", "eta1", "ell", "k", "snr_db", "n_joint",
           "joint", "validation", "feedback", "total", "theory_min_cost", "success",
           "half_width", "trials", "flag"]


@dataclass
class SweepRow:
    axis: str
    value: float
    scheme: str
    stages: int
    eta1: float
    ell: int
    k: int
    snr_db: float
    theory_min_cost: float
    n_joint: int | None = None
    joint: float | None = None
    validation: float | None = None
    feedback: float | None = None
    total: float | None = None
    success: float | None = None
    half_width: float | None = None
    trials: int = 0
    flag: str = ""
    wall_time: float = 0.0

    @property
    def unachievable(self) -> bool:
        return "unachievable" in self.flag.split(";")

    def as_record(self) -> dict:
        def num(x, fmt):
            return "" if x is None else format(x, fmt)
        return {"axis": self.axis, "value": format(self.value, "g"), "scheme": self.scheme,
                "stages": self.stages, "eta1": format(self.eta1, "g"), "ell": self.ell,
                "k": self.k, "snr_db": format(self.snr_db, "g"),
                "n_joint": "" if self.n_joint is None else self.n_joint,
                "joint": num(self.joint, ".3f"), "validation": num(self.validation, ".3f"),
                "feedback": num(self.feedback, ".3f"), "total": num(self.total, ".3f"),
                "theory_min_cost": num(self.theory_min_cost, ".3f"),
                "success": num(self.success, ".4f"), "half_width": num(self.half_width, ".4f"),
                "trials": self.trials, "flag": self.flag}


def parse_scheme(text: str) -> tuple[str, ...]:
    """'bp' is single-stage BP; 'ncomp-bp' is two stages, NCOMP first."""
    parts = tuple(p.strip().lower() for p in text.split("-") if p.strip())
    if not parts:
        raise ValueError(f"empty scheme {text!r}")
    return parts


def scheme_specs(config: ExperimentConfig) -> list[tuple[str, ...]]:
    """Schemes evaluated by a sweep: the configured scheme plus a single-stage baseline."""
    if config.schemes:
        return [parse_scheme(s) for s in config.schemes]
    m = config.num_stages
    decoders = list(config.decoders) + [config.decoders[-1]] * max(0, m - len(config.decoders))
    main = tuple(decoders[:m])
    specs = [main]
    if m > 1:
        specs.insert(0, (decoders[0],))
    return specs


def build_scheme(config: ExperimentConfig, decoders, cfg: ChannelConfig, eta1: float,
                 k: int | None = None) -> Scheme:
    m = len(decoders)
    etas = [eta1] * (m - 1) + [100.0]
    return make_scheme(config.ell, config.k if k is None else k, etas, decoders, cfg,
                       n_val=config.n_val, validate_final=config.validate_final)


def point_seed(master: int, *index) -> int:
    return int(np.random.SeedSequence([int(master), *map(int, index)]).generate_state(1)[0])


def evaluate_point(config: ExperimentConfig, axis: str, value: float, decoders, snr_db: float,
                   eta1: float, k: int, seed: int) -> SweepRow:
    cfg = ChannelConfig.from_snr_db(snr_db)
    scheme = build_scheme(config, decoders, cfg, eta1, k)
    theory = min_id_cost(config.ell, k, cfg)
    row = SweepRow(axis=axis, value=value, scheme=scheme.name, stages=scheme.stages,
                   eta1=eta1 if scheme.stages > 1 else 100.0, ell=config.ell, k=k,
                   snr_db=snr_db, theory_min_cost=theory)
    t0 = time.perf_counter()
    try:
        res = find_min_budget(scheme, config.eps, config.trials, seed, config.final_trials,
                              cap=config.cap, resolution=config.resolution, fast=config.fast,
                              workers=config.workers)
    except Unachievable as exc:
        row.flag = "unachievable"
        row.success = exc.success
        row.wall_time = time.perf_counter() - t0
        return row
    row.n_joint = res.n_joint
    row.joint, row.validation, row.feedback = res.joint, res.validation, res.feedback
    row.total = res.total(config.include_feedback)
    row.success, row.half_width, row.trials = res.success, res.half_width, res.trials
    flags = []
    if res.flagged:
        flags.append("wide_ci")
    if not res.monotone:
        flags.append("nonmonotone")
    if row.total < theory:
        flags.append("below_bound")
    row.flag = ";".join(flags)
    row.wall_time = time.perf_counter() - t0
    return row


def sweep_snr(config: ExperimentConfig) -> list[SweepRow]:
    rows = []
    for i, snr_db in enumerate(config.snr_db):
        for s, dec in enumerate(scheme_specs(config)):
            rows.append(evaluate_point(config, "snr_db", snr_db, dec, snr_db, config.eta1[0],
                                       config.k, point_seed(config.seed, 0, i, s)))
    return rows


def sweep_eta(config: ExperimentConfig) -> list[SweepRow]:
    """Multi-stage schemes at every eta1; single-stage schemes once, reported at eta1 = 100."""
    rows = []
    snr_db = config.snr_db[0]
    for s, dec in enumerate(scheme_specs(config)):
        if len(dec) == 1:
            rows.append(evaluate_point(config, "eta1", 100.0, dec, snr_db, 100.0, config.k,
                                       point_seed(config.seed, 1, 0, s)))
            continue
        for i, eta1 in enumerate(config.eta1):
            rows.append(evaluate_point(config, "eta1", eta1, dec, snr_db, eta1, config.k,
                                       point_seed(config.seed, 1, i + 1, s)))
    return rows


def sweep_k(config: ExperimentConfig) -> list[SweepRow]:
    rows = []
    snr_db = config.snr_db[0]
    for i, k in enumerate(config.k_grid):
        for s, dec in enumerate(scheme_specs(config)):
            rows.append(evaluate_point(config, "k", k, dec, snr_db, config.eta1[0], int(k),
                                       point_seed(config.seed, 2, i, s)))
    return rows


def eta_argmin(rows: list[SweepRow]) -> dict:
    """Per multi-stage scheme, the eta1 with the smallest total."""
    best = {}
    for r in rows:
        if r.stages < 2 or r.total is None:
            continue
        if r.scheme not in best or r.total < best[r.scheme][1]:
            best[r.scheme] = (r.value, r.total)
    return {name: v[0] for name, v in best.items()}


def render_csv(config: ExperimentConfig, sweep: str, rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    meta = {"sweep": sweep, "config": config.to_dict()}
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write("# channel: P = 10^(snr_db/10), fading variance 1, noise variance 1\n")
    buf.write(f"# total {'includes' if config.include_feedback else 'excludes'} feedback uses\n")
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r.as_record())
    if sweep == "eta":
        for name, eta in sorted(eta_argmin(rows).items()):
            buf.write(f"# argmin_eta1 {name} {eta:g}\n")
    return buf.getvalue()


def write_csv(path, config: ExperimentConfig, sweep: str, rows: list[SweepRow]) -> str:
    text = render_csv(config, sweep, rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text


def write_timing(path, rows: list[SweepRow]):
    """Wall-clock sidecar; deliberately separate from the reproducible CSV."""
    with open(path, "w") as fh:
        json.dump([{"value": r.value, "scheme": r.scheme, "seconds": round(r.wall_time, 3)}
                   for r in rows], fh, indent=1)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def run_sweep(config: ExperimentConfig, sweep: str) -> list[SweepRow]:
    fn = {"snr": sweep_snr, "eta": sweep_eta, "k": sweep_k}[sweep]
    return fn(config)
