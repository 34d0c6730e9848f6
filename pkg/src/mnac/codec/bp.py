"""Sum-product decoding of the noisy pooled-test graph with soft thresholding (BP-ST).

Device nodes are joined to the channel-uses in which their preamble is 'On'.
The factor at use t scores the number V_t of active 'On' neighbours through
P(Z_t | V_t); its message to a device marginalises the other neighbours
exactly via leave-one-out Poisson-binomial sums, built from a forward
partial convolution and a backward recursion of the likelihood (O(deg^2)).
When the neighbours' activity probabilities are small the number of 'On'
neighbours has a short effective support A; cutting both tables there gives
the same messages up to a 1e-17 tail in O(deg A).
Messages travel as log-likelihood ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import expit

from ..channel import ChannelConfig, likelihood_table

_LLR_CLIP = 50.0
# Poisson-binomial tail mass ignored by the truncated factor update
_TAIL_EPS = 1e-17


@dataclass
class DecodeResult:
    estimated_set: np.ndarray
    marginals: np.ndarray | None = None
    iterations: int = 0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BPOptions:
    max_iters: int = 50
    damping: float = 0.5
    tol: float = 1e-6
    tail_eps: float = _TAIL_EPS
    cardinality: bool = True


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties broken towards the lowest index; sorted ascending."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return np.sort(order[:k])


@numba.njit(cache=True)
def _clip_llr(m0, m1):
    if m0 <= 0.0 and m1 <= 0.0:
        return 0.0
    if m0 <= 0.0:
        return _LLR_CLIP
    if m1 <= 0.0:
        return -_LLR_CLIP
    llr = math.log(m1) - math.log(m0)
    if llr > _LLR_CLIP:
        return _LLR_CLIP
    if llr < -_LLR_CLIP:
        return -_LLR_CLIP
    return llr


@numba.njit(cache=True)
def _support(mu, start, d, eps):
    # number of 'On' neighbours beyond which the Poisson-binomial tail is below eps
    pmf = np.zeros(d + 1)
    pmf[0] = 1.0
    top = 0
    for j in range(d):
        p = mu[start + j]
        pmf[top + 1] = pmf[top] * p
        for a in range(top, 0, -1):
            pmf[a] = pmf[a] * (1.0 - p) + pmf[a - 1] * p
        pmf[0] = pmf[0] * (1.0 - p)
        top += 1
        while top > 0 and pmf[top] < eps:
            top -= 1
    return top


@numba.njit(cache=True)
def _factor_update(start, d, top, zt, mu, lik, out, g, f):
    # g[j, a]: expected likelihood given a 'On' among items < j, items >= j random.
    # Prefix counts above `top` carry negligible mass, so g is only needed for
    # a <= top + 1; columns up to 2 * top + 2 keep the cut-off error inside the tail.
    cap = min(d, 2 * top + 2)
    for a in range(cap + 1):
        g[d, a] = lik[zt, a]
    for j in range(d - 1, -1, -1):
        p = mu[start + j]
        hi = min(j, cap)
        for a in range(hi + 1):
            up = g[j + 1, a + 1] if a + 1 <= cap else lik[zt, a + 1]
            g[j, a] = (1.0 - p) * g[j + 1, a] + p * up
    f[0] = 1.0
    for a in range(1, top + 2):
        f[a] = 0.0
    for j in range(d):
        m0 = 0.0
        m1 = 0.0
        for a in range(min(j, top) + 1):
            m0 += f[a] * g[j + 1, a]
            m1 += f[a] * g[j + 1, a + 1]
        out[start + j] = _clip_llr(m0, m1)
        p = mu[start + j]
        for a in range(min(j + 1, top), 0, -1):
            f[a] = f[a] * (1.0 - p) + f[a - 1] * p
        f[0] = f[0] * (1.0 - p)


@numba.njit(cache=True)
def _factor_messages(fac_ptr, fac_dev, mu, z, lik, out, tail_eps):
    n = fac_ptr.shape[0] - 1
    max_deg = 0
    for t in range(n):
        d = fac_ptr[t + 1] - fac_ptr[t]
        if d > max_deg:
            max_deg = d
    g = np.empty((max_deg + 2, max_deg + 2))
    f = np.empty(max_deg + 2)
    for t in range(n):
        start = fac_ptr[t]
        d = fac_ptr[t + 1] - start
        if d == 0:
            continue
        top = d
        if tail_eps > 0.0:
            top = _support(mu, start, d, tail_eps)
        _factor_update(start, d, top, z[t], mu, lik, out, g, f)


@numba.njit(cache=True)
def _cardinality_messages(belief, k, out):
    # Factor "exactly k devices are active": its message to device i is
    # log e_{k-1}(r_{-i}) - log e_k(r_{-i}), with e_c the elementary symmetric
    # polynomials of the other devices' odds r_j = exp(belief_j).  Prefix and
    # suffix tables over c <= k are rescaled row by row; scales cancel in the ratio.
    n_dev = belief.shape[0]
    pre = np.zeros((n_dev + 1, k + 1))
    suf = np.zeros((n_dev + 2, k + 1))
    pre[0, 0] = 1.0
    for i in range(n_dev):
        b = belief[i]
        # multiply the new term by 1/(1+r) or r/(1+r) to keep entries bounded
        if b > 0:
            w0, w1 = math.exp(-b), 1.0
        else:
            w0, w1 = 1.0, math.exp(b)
        top = 0.0
        for c in range(k, -1, -1):
            v = pre[i, c] * w0
            if c > 0:
                v += pre[i, c - 1] * w1
            pre[i + 1, c] = v
            if v > top:
                top = v
        if top > 0.0:
            for c in range(k + 1):
                pre[i + 1, c] /= top
    suf[n_dev + 1, 0] = 1.0
    suf[n_dev, 0] = 1.0
    for i in range(n_dev - 1, -1, -1):
        b = belief[i]
        if b > 0:
            w0, w1 = math.exp(-b), 1.0
        else:
            w0, w1 = 1.0, math.exp(b)
        top = 0.0
        for c in range(k, -1, -1):
            v = suf[i + 1, c] * w0
            if c > 0:
                v += suf[i + 1, c - 1] * w1
            suf[i, c] = v
            if v > top:
                top = v
        if top > 0.0:
            for c in range(k + 1):
                suf[i, c] /= top
    for i in range(n_dev):
        e_km1 = 0.0
        e_k = 0.0
        for a in range(k + 1):
            fa = pre[i, a]
            if fa == 0.0:
                continue
            if k - 1 - a >= 0:
                e_km1 += fa * suf[i + 1, k - 1 - a]
            e_k += fa * suf[i + 1, k - a]
        out[i] = _clip_llr(e_k, e_km1)


@numba.njit(cache=True)
def _evidence(fac_dev, llr_ft, n_dev):
    total = np.zeros(n_dev)
    for e in range(fac_dev.shape[0]):
        total[fac_dev[e]] += llr_ft[e]
    return total


@numba.njit(cache=True)
def _device_update(fac_dev, llr_ft, evidence, prior_llr, mu, damping):
    total = evidence + prior_llr
    for e in range(fac_dev.shape[0]):
        x = total[fac_dev[e]] - llr_ft[e]
        fresh = 1.0 / (1.0 + math.exp(-x))
        mu[e] = damping * mu[e] + (1.0 - damping) * fresh
    return total


def _graph(bits: np.ndarray):
    # edges grouped by channel-use (column), device indices ascending within a use
    cols, devs = np.nonzero(bits.T)
    fac_ptr = np.zeros(bits.shape[1] + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=bits.shape[1]), out=fac_ptr[1:])
    return fac_ptr, devs.astype(np.int64)


def bp_decode(pre, z, k_target: int, gamma: float, cfg: ChannelConfig,
              opts: BPOptions = BPOptions(), prior: float | None = None) -> DecodeResult:
    """Belief propagation on the preamble graph; returns the k_target most likely active devices.

    ``pre`` is a PreambleMatrix or a bare devices x uses 0/1 array.  With
    ``opts.cardinality`` off, devices get independent priors, by default
    k_target / devices, and devices without 'On' uses keep that prior.
    """
    bits = np.asarray(getattr(pre, "bits", pre), dtype=np.uint8)
    z = np.asarray(z, dtype=np.int64).reshape(-1)
    n_dev, n = bits.shape
    if z.shape[0] != n:
        raise ValueError(f"observation length {z.shape[0]} != preamble length {n}")
    if not 0 <= k_target <= n_dev:
        raise ValueError(f"k_target={k_target} outside [0, {n_dev}]")
    if prior is None:
        prior = k_target / n_dev
    prior = min(max(prior, 1e-12), 1.0 - 1e-12)
    prior_llr = math.log(prior) - math.log1p(-prior)

    fac_ptr, fac_dev = _graph(bits)
    n_edges = fac_dev.shape[0]
    max_deg = int(np.max(np.diff(fac_ptr))) if n > 0 else 0
    lik = likelihood_table(max_deg, gamma, cfg)
    mu = np.full(n_edges, prior)
    llr_ft = np.zeros(n_edges)
    prior_vec = np.full(n_dev, prior_llr)
    card = np.zeros(n_dev)
    marginals = np.full(n_dev, prior)
    iterations = 0
    converged = True
    if n_edges:
        converged = False
        for iterations in range(1, opts.max_iters + 1):
            _factor_messages(fac_ptr, fac_dev, mu, z, lik, llr_ft, opts.tail_eps)
            evidence = _evidence(fac_dev, llr_ft, n_dev)
            if opts.cardinality:
                _cardinality_messages(evidence, k_target, card)
                total = _device_update(fac_dev, llr_ft, evidence, card, mu, opts.damping)
            else:
                total = _device_update(fac_dev, llr_ft, evidence, prior_vec, mu, opts.damping)
            if not np.all(np.isfinite(total)):
                raise FloatingPointError("non-finite belief-propagation message")
            fresh = expit(total)
            change = float(np.max(np.abs(fresh - marginals)))
            marginals = fresh
            if change < opts.tol:
                converged = True
                break
        if not opts.cardinality:
            isolated = np.bincount(fac_dev, minlength=n_dev) == 0
            marginals[isolated] = prior
    return DecodeResult(estimated_set=top_k(marginals, k_target), marginals=marginals,
                        iterations=iterations, converged=converged)
