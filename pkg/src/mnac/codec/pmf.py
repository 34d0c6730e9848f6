import numpy as np


def weight_pmf(on_probs) -> np.ndarray:
    """Distribution of the number of successes among independent Bernoulli trials.

    Iterative convolution, O(len^2); entry v is P(sum = v).
    """
    probs = np.asarray(on_probs, dtype=float).reshape(-1)
    if np.any((probs < 0) | (probs > 1)) or np.any(np.isnan(probs)):
        raise ValueError("probabilities must lie in [0, 1]")
    pmf = np.zeros(probs.size + 1)
    pmf[0] = 1.0
    for j, p in enumerate(probs):
        pmf[1:j + 2] = pmf[1:j + 2] * (1.0 - p) + pmf[0:j + 1] * p
        pmf[0] *= 1.0 - p
    return pmf
