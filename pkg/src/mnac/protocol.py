"""Multi-stage active device identification with feedback and per-device validation.

Each stage runs, in order:

* validation: every device of the previous partial estimate transmits an
  all-'On' block on its own channel-uses and is kept iff a strict majority of
  the block is detected as 1;
* joint phase: active unclassified devices transmit Bern(q) preambles and
  the base station decodes a partial estimate of the remaining actives;
* feedback: the estimate is announced (noiselessly) and its identification
  code cost is charged to the ledger.

The estimate of the final stage is accepted as is, unless ``validate_final``
adds one more validation round for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelConfig, simulate_block, simulate_uses
from .codec import BPOptions, bp_decode, default_match_threshold, gen_preambles, ncomp_decode
from .theory import (
    CostBreakdown,
    TestErrorModel,
    chernoff_test_length,
    feedback_overhead,
    gaussian_fb_capacity,
    optimize_capacity,
    symmetric_validation_threshold,
)

DECODERS = ("bp", "ncomp")


@dataclass(frozen=True)
class StagePlan:
    """Budgets and detector settings for one stage.

    ``q`` and ``gamma_joint`` left as None are resolved at run time from the
    capacity-optimal point for the stage's operational active count;
    ``gamma_val`` None means the symmetric validation threshold.
    """

    eta: float = 100.0
    n_joint: int = 0
    n_val: int = 0
    q: float | None = None
    gamma_joint: float | None = None
    gamma_val: float | None = None
    decoder: str = "bp"

    def __post_init__(self):
        if not 0.0 < self.eta <= 100.0:
            raise ValueError(f"eta must lie in (0, 100], got {self.eta}")
        if self.n_joint < 0 or self.n_val < 0:
            raise ValueError("budgets must be non-negative")
        if self.n_val % 2:
            raise ValueError(f"n_val must be even, got {self.n_val}")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.q is not None and not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")


@dataclass
class ActivityState:
    """Ground truth plus the base station's classification of every device."""

    ell: int
    truth: frozenset
    validated: set = field(default_factory=set)
    rejected: set = field(default_factory=set)
    pending_estimate: list = field(default_factory=list)
    unclassified: list = field(default_factory=list)
    stage: int = 0

    @classmethod
    def initial(cls, ell: int, truth) -> "ActivityState":
        return cls(ell=ell, truth=frozenset(int(i) for i in truth),
                   unclassified=list(range(ell)))

    @property
    def k(self) -> int:
        return len(self.truth)

    @property
    def k_remaining(self) -> int:
        """Actives never placed in any estimate, i.e. |A_j|."""
        return len(self.truth.intersection(self.unclassified))

    @property
    def k_operational(self) -> int:
        """Remaining active count as the base station sees it: k minus accepted devices."""
        return min(max(self.k - len(self.validated), 0), len(self.unclassified))

    @property
    def blocks(self) -> dict:
        """Validation block index of every pending device, in ascending device order."""
        return {dev: b for b, dev in enumerate(sorted(self.pending_estimate))}

    def check(self):
        parts = [set(self.validated), set(self.rejected), set(self.pending_estimate),
                 set(self.unclassified)]
        if sum(len(p) for p in parts) != self.ell or set().union(*parts) != set(range(self.ell)):
            raise RuntimeError("device classification is not a partition of the device set")


@dataclass
class StageTrace:
    stage: int
    cost: CostBreakdown
    k_j: int
    k_operational: int
    ell_j: int
    misdetections: int
    partial_success: bool
    false_accepts: int = 0
    false_rejects: int = 0
    decoder_iterations: int = 0
    decoder_converged: bool = True
    estimate: tuple = ()


@dataclass
class RunTrace:
    stages: list = field(default_factory=list)
    estimate: frozenset = frozenset()
    exact_success: bool = False
    truth: frozenset = frozenset()

    @property
    def cost(self) -> CostBreakdown:
        total = CostBreakdown()
        for s in self.stages:
            total = total + s.cost
        return total

    @property
    def false_accepts(self) -> int:
        return sum(s.false_accepts for s in self.stages)

    @property
    def false_rejects(self) -> int:
        return sum(s.false_rejects for s in self.stages)

    def rows(self) -> list[dict]:
        """One record per stage plus a summary record."""
        out = []
        for s in self.stages:
            out.append({"record": "stage", "stage": s.stage, "k_j": s.k_j, "ell_j": s.ell_j,
                        "joint_uses": s.cost.joint_uses, "validation_uses": s.cost.validation_uses,
                        "feedback_uses": s.cost.feedback_uses, "total": s.cost.total,
                        "misdetections": s.misdetections, "partial_success": int(s.partial_success),
                        "false_accepts": s.false_accepts, "false_rejects": s.false_rejects})
        c = self.cost
        out.append({"record": "summary", "stage": len(self.stages), "k_j": len(self.truth),
                    "ell_j": "", "joint_uses": c.joint_uses, "validation_uses": c.validation_uses,
                    "feedback_uses": c.feedback_uses, "total": c.total,
                    "misdetections": len(self.truth - self.estimate),
                    "partial_success": int(self.exact_success),
                    "false_accepts": self.false_accepts, "false_rejects": self.false_rejects})
        return out


def majority_validate(z_block) -> bool:
    """Accept iff the Hamming weight strictly exceeds half the block length (ties reject)."""
    z_block = np.asarray(z_block)
    return int(z_block.sum()) * 2 > z_block.size


def check_partial_recovery(truth_subset, estimate, eta: float, k_j: int) -> bool:
    """True iff at most k_j (1 - eta/100) members of the remaining active set were missed."""
    if len(estimate) != k_j:
        raise ValueError(f"estimate has {len(estimate)} devices, expected {k_j}")
    misses = len(set(truth_subset) - set(estimate))
    return misses <= k_j * (1.0 - eta / 100.0) + 1e-9


def default_n_val(k_j: int, cfg: ChannelConfig, target: float,
                  gamma_val: float | None = None) -> int:
    """Chernoff-sized validation block for k_j devices at the symmetric threshold."""
    if gamma_val is None:
        gamma_val = symmetric_validation_threshold(cfg)
    return chernoff_test_length(max(k_j, 1), TestErrorModel.from_threshold(gamma_val, cfg), target)


def _resolve_joint(plan: StagePlan, k_op: int, cfg: ChannelConfig) -> tuple[float, float]:
    if plan.q is not None and plan.gamma_joint is not None:
        return plan.q, plan.gamma_joint
    point = optimize_capacity(max(k_op, 1), cfg)
    q = plan.q if plan.q is not None else point.q
    gamma = plan.gamma_joint if plan.gamma_joint is not None else point.gamma
    return float(q), float(gamma)


def _validate(state: ActivityState, plan: StagePlan, cfg: ChannelConfig,
              rng: np.random.Generator, fast: bool):
    """Validation round over the pending estimate; returns (uses, false_accepts, false_rejects)."""
    pending = sorted(state.pending_estimate)
    if not pending:
        return 0, 0, 0
    gamma_val = plan.gamma_val if plan.gamma_val is not None else symmetric_validation_threshold(cfg)
    # block b occupies uses [b * n_val, (b + 1) * n_val); only active owners are 'On'
    num_on = np.repeat([1 if dev in state.truth else 0 for dev in pending], plan.n_val)
    z = simulate_uses(num_on, gamma_val, cfg, rng, fast=fast)
    false_accepts = false_rejects = 0
    for b, dev in enumerate(pending):
        accepted = majority_validate(z[b * plan.n_val:(b + 1) * plan.n_val])
        if accepted:
            state.validated.add(dev)
            false_accepts += dev not in state.truth
        else:
            state.rejected.add(dev)
            false_rejects += dev in state.truth
    state.pending_estimate = []
    return len(pending) * plan.n_val, false_accepts, false_rejects


def run_stage(state: ActivityState, plan: StagePlan, cfg: ChannelConfig, rng: np.random.Generator,
              final: bool = False, validate_final: bool = False, fast: bool = True,
              bp_opts: BPOptions = BPOptions(), charge_feedback: bool = True):
    """Execute one stage in place on ``state``; returns (state, StageTrace)."""
    state.check()
    state.stage += 1
    seeds = rng.integers(0, 2**63 - 1, size=4)
    val_rng, pre_seed, joint_rng, final_rng = (np.random.default_rng(seeds[0]), int(seeds[1]),
                                               np.random.default_rng(seeds[2]),
                                               np.random.default_rng(seeds[3]))

    val_uses, fa, fr = _validate(state, plan, cfg, val_rng, fast)

    devices = np.array(sorted(state.unclassified), dtype=np.int64)
    ell_j = devices.size
    k_j = state.k_remaining
    k_op = state.k_operational
    remaining_truth = state.truth.intersection(devices.tolist())

    estimate = np.zeros(0, dtype=np.int64)
    iterations, converged = 0, True
    if ell_j:
        q, gamma = _resolve_joint(plan, k_op, cfg)
        pre = gen_preambles(ell_j, plan.n_joint, q, pre_seed)
        active = np.isin(devices, list(remaining_truth))
        z = simulate_block(pre.bits, active, gamma, cfg, joint_rng, fast=fast)
        if plan.decoder == "bp":
            result = bp_decode(pre, z, k_op, gamma, cfg, bp_opts)
        else:
            result = ncomp_decode(pre, z, k_op, default_match_threshold(gamma, cfg))
        estimate = devices[result.estimated_set]
        iterations, converged = result.iterations, result.converged

    misses = len(remaining_truth - set(estimate.tolist()))
    false_pos = len(set(estimate.tolist()) - remaining_truth)
    if k_op == k_j and misses != false_pos:
        raise RuntimeError("misdetections and false positives disagree for a size-k_j estimate")
    partial_ok = misses <= k_j * (1.0 - plan.eta / 100.0) + 1e-9

    state.unclassified = [d for d in state.unclassified if d not in set(estimate.tolist())]
    fb_uses = 0
    if final and not validate_final:
        state.validated.update(int(d) for d in estimate)
    else:
        state.pending_estimate = [int(d) for d in estimate]
        if charge_feedback and len(estimate) and ell_j >= 3:
            fb_uses = feedback_overhead([len(estimate)], [ell_j], gaussian_fb_capacity(cfg.snr))
        if final:
            extra, fa2, fr2 = _validate(state, plan, cfg, final_rng, fast)
            val_uses += extra
            fa += fa2
            fr += fr2
    state.check()

    trace = StageTrace(stage=state.stage,
                       cost=CostBreakdown(joint_uses=plan.n_joint if ell_j else 0,
                                          validation_uses=val_uses, feedback_uses=fb_uses),
                       k_j=k_j, k_operational=k_op, ell_j=ell_j, misdetections=misses,
                       partial_success=partial_ok, false_accepts=fa, false_rejects=fr,
                       decoder_iterations=iterations, decoder_converged=converged,
                       estimate=tuple(int(d) for d in estimate))
    return state, trace


def draw_active_set(ell: int, k: int, rng: np.random.Generator) -> frozenset:
    return frozenset(int(i) for i in rng.choice(ell, size=k, replace=False))


def run_protocol(plans, ell: int, k: int, cfg: ChannelConfig, seed, fast: bool = True,
                 validate_final: bool = False, bp_opts: BPOptions = BPOptions(),
                 truth=None) -> RunTrace:
    """Run all stages on a uniformly drawn active set; deterministic given ``seed``."""
    plans = list(plans)
    if not plans:
        raise ValueError("need at least one stage")
    if plans[-1].eta != 100.0:
        raise ValueError("the last stage must target eta = 100")
    if not 0 <= k <= ell:
        raise ValueError(f"need 0 <= k <= ell, got k={k}, ell={ell}")
    root = np.random.default_rng(seed)
    truth_rng, stage_rng = (np.random.default_rng(s) for s in root.integers(0, 2**63 - 1, size=2))
    if truth is None:
        truth = draw_active_set(ell, k, truth_rng)
    state = ActivityState.initial(ell, truth)
    trace = RunTrace(truth=state.truth)
    for j, plan in enumerate(plans):
        final = j == len(plans) - 1
        state, st = run_stage(state, plan, cfg, stage_rng, final=final,
                              validate_final=validate_final, fast=fast, bp_opts=bp_opts)
        trace.stages.append(st)
    trace.estimate = frozenset(state.validated)
    trace.exact_success = trace.estimate == state.truth
    return trace


def with_budget(plans, joint_budgets) -> list[StagePlan]:
    return [replace(p, n_joint=int(n)) for p, n in zip(plans, joint_budgets)]


def split_budget(total: int, shares) -> list[int]:
    """Split ``total`` joint uses proportionally to ``shares`` (largest-remainder rounding)."""
    shares = np.asarray(shares, dtype=float)
    if shares.sum() <= 0:
        out = np.zeros(len(shares), dtype=int)
        out[-1] = total
        return out.tolist()
    raw = total * shares / shares.sum()
    base = np.floor(raw).astype(int)
    rem = total - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:rem]] += 1
    return base.tolist()


__all__ = [
    "ActivityState", "RunTrace", "StagePlan", "StageTrace", "check_partial_recovery",
    "default_n_val", "draw_active_set", "majority_validate", "run_protocol", "run_stage",
    "split_budget", "with_budget",
]
