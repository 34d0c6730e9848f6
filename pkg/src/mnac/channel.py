"""Non-coherent Rayleigh-fading many-access channel with OOK inputs.

One channel-use superimposes the fading-weighted 'On' symbols of the active
devices, adds complex AWGN and thresholds the received energy.  Conditioned
on the number ``v`` of 'On' transmitters the energy is exponential with mean
``v * fading_var * on_power + noise_var``, which gives the closed-form
transition law used by the decoders and by the capacity engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelConfig:
    """Physical parameters: 'On' power P, fading variance and noise variance.

    Both variances are totals over the real and imaginary parts of a
    circularly-symmetric complex Gaussian.
    """

    on_power: float = 1.0
    fading_var: float = 1.0
    noise_var: float = 1.0

    def __post_init__(self):
        for name in ("on_power", "fading_var", "noise_var"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def snr(self) -> float:
        return self.on_power * self.fading_var / self.noise_var

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "ChannelConfig":
        """Normalised config with unit fading and noise variance, P = 10^(dB/10)."""
        return cls(on_power=10.0 ** (snr_db / 10.0), fading_var=1.0, noise_var=1.0)

    def to_dict(self) -> dict:
        return {"on_power": self.on_power, "fading_var": self.fading_var,
                "noise_var": self.noise_var}


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not gamma >= 0 or math.isnan(gamma):
        raise ValueError(f"threshold must be >= 0, got {gamma!r}")
    return gamma


def transition_prob(v, gamma: float, cfg: ChannelConfig):
    """P(Z=1 | V=v) = exp(-gamma / (v * sigma^2 * P + sigma_w^2)).

    ``v`` may be an integer or an integer array; the result has the same shape.
    """
    gamma = _check_gamma(gamma)
    v_arr = np.asarray(v)
    if np.any(v_arr < 0):
        raise ValueError("Hamming weight must be non-negative")
    mean_energy = v_arr * (cfg.fading_var * cfg.on_power) + cfg.noise_var
    p = np.exp(-gamma / mean_energy)
    if np.ndim(p) == 0:
        return float(p)
    return p


def likelihood_table(max_weight: int, gamma: float, cfg: ChannelConfig) -> np.ndarray:
    """Array ``L[z, v]`` = P(Z=z | V=v) for v = 0..max_weight."""
    p1 = np.asarray(transition_prob(np.arange(max_weight + 1), gamma, cfg), dtype=float)
    return np.vstack([1.0 - p1, p1])


def _physics_energy(num_on: np.ndarray, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    # CN(0, s) realised as independent real/imag parts of variance s/2
    num_on = np.asarray(num_on, dtype=np.int64)
    n = num_on.shape[0]
    total_on = int(num_on.sum())
    fade_std = math.sqrt(cfg.fading_var / 2.0)
    h = rng.normal(0.0, fade_std, size=total_on) + 1j * rng.normal(0.0, fade_std, size=total_on)
    owner = np.repeat(np.arange(n), num_on)
    signal = np.zeros(n, dtype=complex)
    np.add.at(signal, owner, math.sqrt(cfg.on_power) * h)
    noise_std = math.sqrt(cfg.noise_var / 2.0)
    noise = rng.normal(0.0, noise_std, size=n) + 1j * rng.normal(0.0, noise_std, size=n)
    return np.abs(signal + noise) ** 2


def simulate_uses(num_on, gamma: float, cfg: ChannelConfig, rng: np.random.Generator,
                  fast: bool = True) -> np.ndarray:
    """Detector outputs for a sequence of channel-uses with ``num_on[t]`` 'On' transmitters.

    The fast path draws Z directly from the transition law; the physics path
    draws fading coefficients and noise explicitly and thresholds |S|^2.
    """
    gamma = _check_gamma(gamma)
    num_on = np.asarray(num_on, dtype=np.int64).reshape(-1)
    if np.any(num_on < 0):
        raise ValueError("num_on must be non-negative")
    if num_on.size == 0:
        return np.zeros(0, dtype=np.uint8)
    if fast:
        p1 = transition_prob(num_on, gamma, cfg)
        return (rng.random(num_on.size) < p1).astype(np.uint8)
    energy = _physics_energy(num_on, cfg, rng)
    return (energy > gamma).astype(np.uint8)


def simulate_symbol(num_on: int, gamma: float, cfg: ChannelConfig, rng: np.random.Generator,
                    fast: bool = False) -> int:
    """One detector output Z in {0, 1}."""
    if num_on < 0:
        raise ValueError("num_on must be non-negative")
    return int(simulate_uses(np.array([num_on]), gamma, cfg, rng, fast=fast)[0])


def simulate_block(preambles: np.ndarray, active, gamma: float, cfg: ChannelConfig,
                   rng: np.random.Generator, fast: bool = True) -> np.ndarray:
    """Detector outputs for a block of joint transmissions.

    ``preambles`` is a devices x uses 0/1 matrix and ``active`` a boolean mask
    over its rows; only active rows contribute energy.  Fading is redrawn at
    every channel-use.
    """
    preambles = np.asarray(preambles)
    active = np.asarray(active, dtype=bool).reshape(-1)
    if preambles.ndim != 2:
        raise ValueError("preambles must be a 2-D devices x uses matrix")
    if active.shape[0] != preambles.shape[0]:
        raise ValueError(
            f"activity mask has {active.shape[0]} entries for {preambles.shape[0]} preamble rows")
    num_on = preambles[active].sum(axis=0, dtype=np.int64)
    return simulate_uses(num_on, gamma, cfg, rng, fast=fast)
