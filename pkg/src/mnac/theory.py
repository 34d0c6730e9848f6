"""Closed-form quantities: capacity, minimum identification cost, test lengths, feedback.

All rates and costs are in bits (log base 2).  The Chernoff test length uses
natural logarithms, in which the bound is stated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .channel import ChannelConfig, transition_prob


class DegenerateTest(ValueError):
    """Raised when the majority-vote Chernoff bound is vacuous (rho >= 1/2)."""


@dataclass(frozen=True)
class CapacityPoint:
    gamma: float
    q: float
    k: int
    rate: float


@dataclass(frozen=True)
class CostBreakdown:
    joint_uses: int = 0
    validation_uses: int = 0
    feedback_uses: int = 0

    def __post_init__(self):
        if min(self.joint_uses, self.validation_uses, self.feedback_uses) < 0:
            raise ValueError("channel-use counts must be non-negative")

    @property
    def total(self) -> int:
        return self.joint_uses + self.validation_uses + self.feedback_uses

    @property
    def uplink(self) -> int:
        return self.joint_uses + self.validation_uses

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(self.joint_uses + other.joint_uses,
                             self.validation_uses + other.validation_uses,
                             self.feedback_uses + other.feedback_uses)


@dataclass(frozen=True)
class TestErrorModel:
    """Per-symbol error rates of an individual validation block."""

    __test__ = False  # not a pytest class

    p10: float
    p01: float

    def __post_init__(self):
        for name in ("p10", "p01"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")

    @classmethod
    def from_threshold(cls, gamma_val: float, cfg: ChannelConfig) -> "TestErrorModel":
        return cls(p10=1.0 - transition_prob(1, gamma_val, cfg),
                   p01=transition_prob(0, gamma_val, cfg))

    @property
    def rho(self) -> float:
        # the rate with the slower Chernoff exponent, i.e. closest to 1/2
        return max((self.p01, self.p10), key=lambda r: r * (1.0 - r))


def binary_entropy(x):
    """h(x) in bits, with h(0) = h(1) = 0 exactly."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inner = (x > 0) & (x < 1)
    xi = x[inner]
    out[inner] = -(xi * np.log2(xi) + (1 - xi) * np.log2(1 - xi))
    return out if out.ndim else float(out)


def binomial_weights(k: int, q: float) -> np.ndarray:
    """Binomial(k, q) pmf over 0..k, computed in the log domain."""
    v = np.arange(k + 1)
    if q <= 0.0:
        w = np.zeros(k + 1)
        w[0] = 1.0
        return w
    if q >= 1.0:
        w = np.zeros(k + 1)
        w[k] = 1.0
        return w
    log_comb = np.array([math.lgamma(k + 1) - math.lgamma(i + 1) - math.lgamma(k - i + 1)
                         for i in range(k + 1)])
    return np.exp(log_comb + v * math.log(q) + (k - v) * math.log1p(-q))


def mutual_info(gamma: float, q: float, k: int, cfg: ChannelConfig) -> float:
    """I(X; Z) in bits for i.i.d. Bern(q) preambles of k active devices and threshold gamma."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    w = binomial_weights(k, q)
    p1 = np.asarray(transition_prob(np.arange(k + 1), gamma, cfg), dtype=float)
    rate = binary_entropy(float(w @ p1)) - float(w @ binary_entropy(p1))
    return max(rate, 0.0)


def _mutual_info_grid(gammas: np.ndarray, qs: np.ndarray, k: int, cfg: ChannelConfig) -> np.ndarray:
    """Vectorised I over a gamma x q grid (rows: gamma, cols: q)."""
    v = np.arange(k + 1)
    mean_energy = v * (cfg.fading_var * cfg.on_power) + cfg.noise_var
    p1 = np.exp(-gammas[:, None] / mean_energy[None, :])          # G x (k+1)
    hp1 = binary_entropy(p1)
    w = np.stack([binomial_weights(k, q) for q in qs], axis=1)     # (k+1) x Q
    return binary_entropy(p1 @ w) - hp1 @ w


def _line_max(f, lo: float, hi: float) -> tuple[float, float]:
    res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x), -float(res.fun)


@lru_cache(maxsize=512)
def optimize_capacity(k: int, cfg: ChannelConfig, n_gamma: int = 200, n_q: int = 101,
                      rel_tol: float = 1e-8) -> CapacityPoint:
    """Maximise mutual_info over (gamma, q).

    A log-spaced gamma grid over [1e-3, 1e3] * noise_var crossed with a linear
    q grid seeds a coordinate-wise bounded scalar refinement.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    log_g = np.linspace(math.log(1e-3 * cfg.noise_var), math.log(1e3 * cfg.noise_var), n_gamma)
    qs = np.linspace(0.0, 1.0, n_q)
    grid = _mutual_info_grid(np.exp(log_g), qs, k, cfg)
    gi, qi = np.unravel_index(int(np.argmax(grid)), grid.shape)
    best_rate = float(grid[gi, qi])
    lg, q = float(log_g[gi]), float(qs[qi])
    # refinement brackets are one grid step either side, widened if the optimum walks
    dlg = log_g[1] - log_g[0]
    dq = qs[1] - qs[0]
    lg_lo, lg_hi = log_g[0], log_g[-1]
    for _ in range(100):
        prev = best_rate
        cand_lg, r = _line_max(lambda x: mutual_info(math.exp(x), q, k, cfg),
                               max(lg - dlg, lg_lo), min(lg + dlg, lg_hi))
        if r >= best_rate:
            lg, best_rate = cand_lg, r
        cand_q, r = _line_max(lambda x: mutual_info(math.exp(lg), x, k, cfg),
                              max(q - dq, 0.0), min(q + dq, 1.0))
        if r >= best_rate:
            q, best_rate = cand_q, r
        if best_rate - prev <= rel_tol * max(best_rate, 1e-300):
            break
    return CapacityPoint(gamma=math.exp(lg), q=float(q), k=k, rate=float(best_rate))


def min_id_cost(ell: int, k: int, cfg: ChannelConfig) -> float:
    """k log2(ell) / C: minimum identification cost, identical for any stage count."""
    if k < 1 or ell <= k:
        raise ValueError(f"need ell > k >= 1, got ell={ell}, k={k}")
    return k * math.log2(ell) / optimize_capacity(k, cfg).rate


def nominal_stage_ks(k: int, etas) -> list[int]:
    """Worst-case remaining active counts k_1 = k, k_{j+1} = floor(k_j (1 - eta_j/100))."""
    ks = [k]
    for eta in etas[:-1]:
        ks.append(int(math.floor(ks[-1] * (1.0 - eta / 100.0) + 1e-9)))
    return ks


def stage_cost_shares(ell: int, k: int, etas, cfg: ChannelConfig) -> list[float]:
    """Per-stage theoretical joint cost: stage j resolves k_j - k_{j+1} devices among ell_j."""
    ks = nominal_stage_ks(k, etas) + [0]
    shares = []
    ell_j = ell
    for j in range(len(etas)):
        resolved = ks[j] - ks[j + 1]
        if ks[j] == 0:
            shares.append(0.0)
            continue
        rate = optimize_capacity(ks[j], cfg).rate
        shares.append(resolved * math.log2(ell_j) / rate)
        ell_j -= ks[j]
    return shares


def multistage_cost_prediction(ell: int, k: int, etas, cfg: ChannelConfig) -> float:
    """Sum of per-stage costs; tends to min_id_cost as ell grows for any eta schedule."""
    return float(sum(stage_cost_shares(ell, k, etas, cfg)))


def chernoff_bound(n_val: int, k_j: int, errors: TestErrorModel) -> float:
    """k_j * exp(-(n/2) ln(1 / (4 rho (1 - rho))))."""
    rho = errors.rho
    return k_j * math.exp(-(n_val / 2.0) * math.log(1.0 / (4.0 * rho * (1.0 - rho))))


def chernoff_test_length(k_j: int, errors: TestErrorModel, target: float) -> int:
    """Smallest even block length whose union Chernoff bound is at most ``target``."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    if k_j < 1:
        raise ValueError("k_j must be >= 1")
    rho = errors.rho
    if rho >= 0.5:
        raise DegenerateTest(f"rho={rho} >= 1/2: majority vote cannot separate the hypotheses")
    exponent = 0.5 * math.log(1.0 / (4.0 * rho * (1.0 - rho)))
    n = 2 * max(1, math.ceil(math.log(k_j / target) / exponent / 2.0))
    while n > 2 and chernoff_bound(n - 2, k_j, errors) <= target:
        n -= 2
    while chernoff_bound(n, k_j, errors) > target:
        n += 2
    return n


def symmetric_validation_threshold(cfg: ChannelConfig) -> float:
    """gamma with P(Z=1 | V=0) = P(Z=0 | V=1), equalising both validation error rates."""
    def gap(g):
        return transition_prob(0, g, cfg) - (1.0 - transition_prob(1, g, cfg))

    hi = cfg.noise_var
    while gap(hi) > 0:
        hi *= 2.0
    return brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-14)


def gaussian_fb_capacity(snr: float) -> float:
    if snr < 0:
        raise ValueError("snr must be >= 0")
    return math.log2(1.0 + snr)


def feedback_overhead_exact(stage_ks, stage_ells, c_fb: float) -> float:
    if c_fb <= 0:
        raise ValueError("feedback capacity must be > 0")
    if len(stage_ks) != len(stage_ells):
        raise ValueError("stage_ks and stage_ells differ in length")
    total = 0.0
    for k_j, ell_j in zip(stage_ks, stage_ells):
        if ell_j < 3:
            raise ValueError(f"ell_j must be >= 3 for log log to be positive, got {ell_j}")
        if k_j < 0:
            raise ValueError("k_j must be non-negative")
        total += (k_j / c_fb) * math.log2(math.log2(ell_j))
    return total


def feedback_overhead(stage_ks, stage_ells, c_fb: float) -> int:
    """Feedback channel-uses sum_j (k_j / C_fb) log2 log2 ell_j, rounded up."""
    return int(math.ceil(feedback_overhead_exact(stage_ks, stage_ells, c_fb) - 1e-9))
