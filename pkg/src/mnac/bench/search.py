"""Monte Carlo evaluation of a scheme and the minimal-budget search."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..protocol import run_protocol
from ..theory import min_id_cost
from .config import Scheme

GALLOP_CAP = 2**16


class Unachievable(RuntimeError):
    """Success probability stays below target at the gallop cap."""

    def __init__(self, message: str, cap: int, success: float):
        super().__init__(message)
        self.cap = cap
        self.success = success


@dataclass
class TrialOutcome:
    success: bool
    joint: int
    validation: int
    feedback: int


@dataclass
class Evaluation:
    n: int
    outcomes: list

    @property
    def trials(self) -> int:
        return len(self.outcomes)

    @property
    def successes(self) -> int:
        return sum(o.success for o in self.outcomes)

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.outcomes else 0.0

    def mean(self, attr: str) -> float:
        return float(np.mean([getattr(o, attr) for o in self.outcomes])) if self.outcomes else 0.0


@dataclass
class BudgetResult:
    n_joint: int
    success: float
    half_width: float
    trials: int
    joint: float
    validation: float
    feedback: float
    flagged: bool
    monotone: bool
    probes: dict = field(default_factory=dict)

    def total(self, include_feedback: bool = False) -> float:
        return self.joint + self.validation + (self.feedback if include_feedback else 0.0)


def half_width(rate: float, trials: int, z: float = 1.959963984540054) -> float:
    """Normal-approximation 95% confidence half-width of a success rate."""
    return z * math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)


def trial_seed(master: int, trial: int) -> list[int]:
    return [int(master), int(trial)]


def _one_trial(args) -> TrialOutcome:
    scheme, n, master, trial, fast = args
    trace = run_protocol(scheme.plans(n), scheme.ell, scheme.k, scheme.cfg,
                         trial_seed(master, trial), fast=fast,
                         validate_final=scheme.validate_final)
    c = trace.cost
    return TrialOutcome(trace.exact_success, c.joint_uses, c.validation_uses, c.feedback_uses)


class Evaluator:
    """Runs trials with common random numbers: trial t always uses seed (master, t).

    With ``need`` set, evaluation stops at the first trial that settles
    whether ``need`` successes out of ``trials`` are reachable; the outcome
    is the same as running every trial.  Trials are scanned in index order
    even when a worker pool computes them, so the result never depends on
    the pool size.
    """

    def __init__(self, scheme: Scheme, master: int, fast: bool = True, workers: int = 1):
        self.scheme = scheme
        self.master = master
        self.fast = fast
        self.workers = workers
        self._pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _run(self, n: int, trial_ids):
        args = [(self.scheme, n, self.master, t, self.fast) for t in trial_ids]
        if self._pool is None:
            return [_one_trial(a) for a in args]
        return list(self._pool.map(_one_trial, args))

    def evaluate(self, n: int, trials: int, need: int | None = None) -> Evaluation:
        outcomes = []
        if need is not None and need <= 0:
            return Evaluation(n, outcomes)
        chunk = 1 if self._pool is None else 4 * self.workers
        t = 0
        while t < trials:
            ids = range(t, min(t + chunk, trials))
            for o in self._run(n, ids):
                outcomes.append(o)
                if need is not None:
                    s = sum(x.success for x in outcomes)
                    f = len(outcomes) - s
                    if s >= need or f > trials - need:
                        return Evaluation(n, outcomes)
            t = ids.stop
        return Evaluation(n, outcomes)


def required_successes(eps: float, trials: int) -> int:
    return max(0, math.ceil(eps * trials - 1e-9))


def initial_probe(scheme: Scheme, cap: int) -> int:
    try:
        guess = min_id_cost(scheme.ell, scheme.k, scheme.cfg)
    except ValueError:
        guess = 1.0
    if not math.isfinite(guess):
        return cap
    return int(min(max(1, math.floor(guess)), cap))


def find_min_budget(scheme: Scheme, eps: float = 0.9, trials: int = 200, seed: int = 0,
                    final_trials: int = 1000, cap: int = GALLOP_CAP, resolution: float = 0.01,
                    fast: bool = True, workers: int = 1, start: int | None = None) -> BudgetResult:
    """Smallest total joint budget whose empirical exact-recovery rate reaches ``eps``.

    The search gallops upward from ``start`` (default: the theoretical
    minimum cost) by doubling, then bisects the bracket until it is narrower
    than ``resolution`` times its upper end (and at least one use).  The
    returned budget is re-evaluated with ``final_trials`` fresh trials.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    need = required_successes(eps, trials)
    probes: dict[int, float] = {}

    with Evaluator(scheme, seed, fast=fast, workers=workers) as ev:
        def passes(n: int) -> bool:
            e = ev.evaluate(n, trials, need)
            probes[n] = e.rate
            return e.successes >= need

        lo = 0
        hi = min(start if start is not None else initial_probe(scheme, cap), cap)
        hi = max(hi, 1)
        while not passes(hi):
            if hi >= cap:
                raise Unachievable(f"success {probes[hi]:.3f} < {eps} at the cap of {cap} uses",
                                   cap, probes[hi])
            lo = hi
            hi = min(2 * hi, cap)
        while hi - lo > max(1, resolution * hi):
            mid = (lo + hi) // 2
            if passes(mid):
                hi = mid
            else:
                lo = mid
        # fresh trials for the reported point, disjoint from the search trials
        with Evaluator(scheme, seed + 1_000_003, fast=fast, workers=workers) as final:
            fin = final.evaluate(hi, final_trials)

    hw = half_width(fin.rate, fin.trials)
    return BudgetResult(n_joint=hi, success=fin.rate, half_width=hw, trials=fin.trials,
                        joint=fin.mean("joint"), validation=fin.mean("validation"),
                        feedback=fin.mean("feedback"), flagged=hw > 0.05,
                        monotone=spot_check_monotone(probes, hi), probes=dict(sorted(probes.items())))


def spot_check_monotone(probes: dict, n_star: int) -> bool:
    """Success must be non-decreasing over the three probes nearest the returned budget."""
    near = sorted(sorted(probes, key=lambda n: (abs(n - n_star), n))[:3])
    rates = [probes[n] for n in near]
    return all(a <= b + 1e-12 for a, b in zip(rates, rates[1:]))
