from __future__ import annotations

import numpy as np

from ..channel import ChannelConfig, transition_prob
from .bp import DecodeResult


def default_match_threshold(gamma: float, cfg: ChannelConfig) -> float:
    """1 - 2 * p_miss for a lone 'On' transmitter, clamped to [0.5, 1]."""
    p_miss = 1.0 - transition_prob(1, gamma, cfg)
    return float(min(max(1.0 - 2.0 * p_miss, 0.5), 1.0))


def ncomp_decode(pre, z, k_target: int, match_threshold: float = 1.0) -> DecodeResult:
    """Noisy COMP: score each device by the fraction of its 'On' uses that tested positive.

    Devices reaching ``match_threshold`` rank above all others; within each
    group higher scores win and ties go to the lowest index.  A device that is
    never 'On' scores 0.
    """
    bits = np.asarray(getattr(pre, "bits", pre), dtype=np.int64)
    z = np.asarray(z, dtype=np.int64).reshape(-1)
    n_dev, n = bits.shape
    if z.shape[0] != n:
        raise ValueError(f"observation length {z.shape[0]} != preamble length {n}")
    if not 0 <= k_target <= n_dev:
        raise ValueError(f"k_target={k_target} outside [0, {n_dev}]")
    if not 0.0 <= match_threshold <= 1.0:
        raise ValueError("match_threshold must lie in [0, 1]")
    on_count = bits.sum(axis=1)
    hits = bits @ z
    scores = np.divide(hits, on_count, out=np.zeros(n_dev), where=on_count > 0)
    qualified = scores >= match_threshold
    order = np.lexsort((np.arange(n_dev), -scores, ~qualified))
    chosen = np.sort(order[:k_target])
    return DecodeResult(estimated_set=chosen, marginals=None, iterations=0, converged=True,
                        diagnostics={"scores": scores, "qualified": int(qualified.sum())})
