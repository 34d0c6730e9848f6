"""Experiment configuration and scheme construction."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from ..channel import ChannelConfig
from ..protocol import DECODERS, StagePlan, default_n_val, split_budget
from ..theory import nominal_stage_ks, stage_cost_shares

SCENARIOS = ("single_stage", "two_stage", "m_stage")
VALIDATION_TARGET = 1e-2


@dataclass
class ExperimentConfig:
    scenario: str = "two_stage"
    ell: int = 1000
    k: int = 20
    snr_db: list = field(default_factory=lambda: [10.0])
    eta1: list = field(default_factory=lambda: [75.0])
    k_grid: list = field(default_factory=lambda: [10, 20, 30, 40, 50])
    decoders: list = field(default_factory=lambda: ["bp", "bp"])
    schemes: list | None = None
    stages: int = 2
    trials: int = 200
    final_trials: int = 1000
    eps: float = 0.9
    seed: int = 2024
    out: str | None = None
    fast: bool = True
    validate_final: bool = False
    include_feedback: bool = False
    n_val: int | None = None
    resolution: float = 0.01
    cap: int = 2**16
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.trials < 1 or self.final_trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        for name in ("snr_db", "eta1", "k_grid", "decoders"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} grid must be non-empty")
        for d in self.decoders:
            if d not in DECODERS:
                raise ValueError(f"unknown decoder {d!r}")
        for name in self.schemes or []:
            for d in name.split("-"):
                if d.strip().lower() not in DECODERS:
                    raise ValueError(f"unknown decoder {d!r} in scheme {name!r}")
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if not 1 <= self.k < self.ell:
            raise ValueError(f"need 1 <= k < ell, got k={self.k}, ell={self.ell}")
        if self.n_val is not None and (self.n_val < 0 or self.n_val % 2):
            raise ValueError("n_val must be even and non-negative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def num_stages(self) -> int:
        return {"single_stage": 1, "two_stage": 2}.get(self.scenario, self.stages)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Scheme:
    """A stage layout whose joint budget is still free."""

    ell: int
    k: int
    etas: tuple
    decoders: tuple
    cfg: ChannelConfig
    n_vals: tuple
    shares: tuple
    validate_final: bool = False

    @property
    def name(self) -> str:
        return "-".join(self.decoders)

    @property
    def stages(self) -> int:
        return len(self.etas)

    def plans(self, total_joint: int) -> list[StagePlan]:
        budgets = split_budget(total_joint, self.shares)
        return [StagePlan(eta=eta, n_joint=n, n_val=nv, decoder=d)
                for eta, n, nv, d in zip(self.etas, budgets, self.n_vals, self.decoders)]


def make_scheme(ell: int, k: int, etas, decoders, cfg: ChannelConfig,
                n_val: int | None = None, validate_final: bool = False) -> Scheme:
    """Build a scheme.

    Validation blocks default to Chernoff lengths for an overall error target
    of 1e-2 split evenly over the m stages; joint budgets are later split in
    proportion to the theoretical per-stage costs.
    """
    etas = tuple(float(e) for e in etas)
    decoders = tuple(decoders)
    if len(etas) != len(decoders):
        raise ValueError("one decoder per stage is required")
    if etas[-1] != 100.0:
        raise ValueError("the last stage must target eta = 100")
    m = len(etas)
    ks = nominal_stage_ks(k, list(etas))
    n_vals = []
    for j in range(m):
        if n_val is not None:
            n_vals.append(n_val if (j > 0 or validate_final) else 0)
            continue
        if j == 0 and not (validate_final and m == 1):
            n_vals.append(0)
            continue
        # stage j validates the previous estimate, which has k_{j-1} members (k_0 := k for
        # the lone final validation of a single-stage run)
        size = ks[j - 1] if j > 0 else k
        n_vals.append(default_n_val(max(size, 1), cfg, VALIDATION_TARGET / m))
    shares = stage_cost_shares(ell, k, list(etas), cfg)
    return Scheme(ell=ell, k=k, etas=etas, decoders=decoders, cfg=cfg, n_vals=tuple(n_vals),
                  shares=tuple(shares), validate_final=validate_final)
