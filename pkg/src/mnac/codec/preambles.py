from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PreambleMatrix:
    """Devices x channel-uses On/Off bank together with the 'On' probabilities used to draw it."""

    bits: np.ndarray
    q_schedule: np.ndarray

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]


def gen_preambles(ell: int, n: int, q, seed) -> PreambleMatrix:
    """Draw an ell x n matrix of independent Bern(q) bits.

    ``q`` is a scalar, a per-use vector of length n or a full ell x n schedule.
    Columns are drawn in order from a single stream, so the first n columns of
    a longer matrix with the same seed equal the n-column matrix.
    """
    if ell < 1 or n < 0:
        raise ValueError(f"need ell >= 1 and n >= 0, got ell={ell}, n={n}")
    q_arr = np.asarray(q, dtype=float)
    if q_arr.ndim == 1:
        if q_arr.shape[0] != n:
            raise ValueError("per-use q schedule must have length n")
        q_arr = q_arr[None, :]
    schedule = np.broadcast_to(q_arr, (ell, n)).astype(float)
    if np.any((schedule < 0) | (schedule > 1)):
        raise ValueError("sampling probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    u = rng.random((n, ell)).T
    return PreambleMatrix(bits=(u < schedule).astype(np.uint8), q_schedule=schedule)
