from __future__ import annotations

import itertools
import math

import numpy as np

from ..channel import ChannelConfig, likelihood_table

MAX_CANDIDATES = 10**6
TIE_TOL = 1e-9


def subset_loglik(bits: np.ndarray, z: np.ndarray, subset, log_lik: np.ndarray) -> float:
    v = bits[list(subset)].sum(axis=0) if len(subset) else np.zeros(bits.shape[1], dtype=np.int64)
    return float(log_lik[z, v].sum())


def ml_oracle_decode(pre, z, k: int, gamma: float, cfg: ChannelConfig,
                     chunk: int = 4096) -> np.ndarray:
    """Exhaustive maximum-likelihood active set of size k (small instances only).

    Log-likelihoods within TIE_TOL of the maximum count as ties, which resolve
    to the first subset in lexicographic order.
    """
    bits = np.asarray(getattr(pre, "bits", pre), dtype=np.int64)
    z = np.asarray(z, dtype=np.int64).reshape(-1)
    n_dev, n = bits.shape
    if z.shape[0] != n:
        raise ValueError(f"observation length {z.shape[0]} != preamble length {n}")
    if not 0 <= k <= n_dev:
        raise ValueError(f"k={k} outside [0, {n_dev}]")
    if math.comb(n_dev, k) > MAX_CANDIDATES:
        raise ValueError(f"C({n_dev}, {k}) exceeds the {MAX_CANDIDATES} candidate guard")
    with np.errstate(divide="ignore"):
        log_lik = np.log(likelihood_table(k, gamma, cfg))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    scores = []
    combos = itertools.combinations(range(n_dev), k)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        weights = bits[block].sum(axis=1)                  # C x n
        scores.append(log_lik[z[None, :], weights].sum(axis=1))
    scores = np.concatenate(scores)
    top = scores.max()
    # summation order can split exact ties by an ulp, so ties are taken within TIE_TOL
    first = int(np.argmax(scores >= top - TIE_TOL))
    return np.array(next(itertools.islice(itertools.combinations(range(n_dev), k), first, None)),
                    dtype=np.int64)
