# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from typing import Dict, List

import numpy as np
from scipy import stats

__all__ = ['split_chains', 'rank_normalize', 'is_degenerate', 'split_rhat', 'effective_sample_size', 'CoverageMetric']


def _check_chains(chains: np.ndarray) -> np.ndarray:
    chains = np.asarray(chains, dtype=np.float64)
    if chains.ndim != 2:
        raise AssertionError("chains are expected to be of shape (num_chains, num_draws)")
    if chains.shape[0] < 2 or chains.shape[1] < 4:
        raise ValueError(f"convergence diagnostics need at least 2 chains of 4 draws, got {chains.shape}")
    return chains


def split_chains(chains: np.ndarray) -> np.ndarray:
    """Split each chain in two halves (the middle draw is dropped for odd lengths)

    Args:
        chains: array of shape (M, N)

    Returns:
        array of shape (2 * M, N // 2)
    """

    half = chains.shape[1] // 2
    return np.concatenate([chains[:, :half], chains[:, chains.shape[1] - half:]], axis=0)


def rank_normalize(draws: np.ndarray) -> np.ndarray:
    """Replace draws by the normal scores of their pooled ranks"""

    ranks = stats.rankdata(draws, method='average').reshape(draws.shape)
    return stats.norm.ppf((ranks - 3 / 8) / (draws.size + 1 / 4))


def is_degenerate(chains: np.ndarray) -> bool:
    """Whether a parameter takes a single value across all chains and draws"""

    chains = np.asarray(chains)
    return bool(np.all(chains == chains.flat[0]))


def _rhat(chains: np.ndarray) -> float:
    num_draws = chains.shape[1]
    within = chains.var(axis=1, ddof=1).mean()
    between = num_draws * chains.mean(axis=1).var(ddof=1)
    if within == 0:
        return 1. if between == 0 else float('inf')
    var_hat = (num_draws - 1) / num_draws * within + between / num_draws
    return float(np.sqrt(var_hat / within))


def split_rhat(chains: np.ndarray) -> float:
    """Potential scale reduction factor of split chains

    The returned value is the largest of the split-R-hat of the raw draws, of their rank-normalized
    version (bulk) and of the rank-normalized folded draws (tails), and is at least 1.

    Example::
        >>> import numpy as np
        >>> from srbayes.utils.metrics import split_rhat
        >>> rhat = split_rhat(np.random.default_rng(0).normal(size=(4, 1000)))

    Args:
        chains: array of shape (num_chains, num_draws)

    Returns:
        the R-hat, 1 for degenerate parameters
    """

    chains = _check_chains(chains)
    if is_degenerate(chains):
        return 1.
    split = split_chains(chains)
    bulk = _rhat(rank_normalize(split))
    tail = _rhat(rank_normalize(np.abs(split - np.median(split))))
    return max(1., _rhat(split), bulk, tail)


def _autocovariance(chains: np.ndarray) -> np.ndarray:
    num_draws = chains.shape[1]
    centered = chains - chains.mean(axis=1, keepdims=True)
    # Zero-padding avoids circular wrap-around
    size = 2 ** int(np.ceil(np.log2(2 * num_draws)))
    freqs = np.fft.rfft(centered, n=size, axis=1)
    return np.fft.irfft(freqs * np.conjugate(freqs), n=size, axis=1)[:, :num_draws].real / num_draws


def effective_sample_size(chains: np.ndarray) -> float:
    """Bulk effective sample size, from autocorrelation sums truncated by Geyer's initial monotone sequence

    Args:
        chains: array of shape (num_chains, num_draws)

    Returns:
        the effective number of independent draws, the total number of draws for degenerate parameters
    """

    chains = _check_chains(chains)
    if is_degenerate(chains):
        return float(chains.size)
    split = rank_normalize(split_chains(chains))
    num_chains, num_draws = split.shape

    acov = _autocovariance(split)
    chain_var = acov[:, 0] * num_draws / (num_draws - 1)
    mean_var = chain_var.mean()
    var_plus = mean_var * (num_draws - 1) / num_draws + split.mean(axis=1).var(ddof=1)

    rho_hat = np.zeros(num_draws)
    rho_even = 1.
    rho_hat[0] = rho_even
    rho_odd = 1. - (mean_var - acov[:, 1].mean()) / var_plus
    rho_hat[1] = rho_odd
    # Initial positive sequence
    t = 1
    while t < num_draws - 3 and rho_even + rho_odd > 0:
        rho_even = 1. - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_odd = 1. - (mean_var - acov[:, t + 2].mean()) / var_plus
        if rho_even + rho_odd >= 0:
            rho_hat[t + 1] = rho_even
            rho_hat[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0:
        rho_hat[max_t + 1] = rho_even
    # Initial monotone sequence
    t = 1
    while t <= max_t - 2:
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t]:
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2
            rho_hat[t + 2] = rho_hat[t + 1]
        t += 2

    total = num_chains * num_draws
    tau = -1. + 2. * rho_hat[:max_t + 1].sum() + rho_hat[max_t + 1: max_t + 2].sum()
    tau = max(tau, 1 / np.log10(total))
    return float(total / tau)


class CoverageMetric:
    """Implements an out-of-sample calibration metric for interval predictions

    Example::
        >>> import numpy as np
        >>> from srbayes.utils.metrics import CoverageMetric
        >>> metric = CoverageMetric()
        >>> metric.update(np.array([1.05]), np.array([1.02]), np.array([1.08]), np.array([1.05]))
        >>> metric.summary()
    """

    def __init__(self) -> None:
        self.reset()

    def update(
        self,
        observed: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        median: np.ndarray,
    ) -> None:
        """Updates the metric

        Args:
            observed: observed values
            lower: lower bounds of the predicted intervals
            upper: upper bounds of the predicted intervals
            median: predicted medians
        """

        observed, lower, upper, median = (np.atleast_1d(np.asarray(arr, dtype=np.float64))
                                          for arr in (observed, lower, upper, median))
        if not observed.shape == lower.shape == upper.shape == median.shape:
            raise AssertionError("prediction and observation arrays are expected to have the same shape")
        if np.any(lower > upper):
            raise AssertionError("lower bounds are expected to be lower than upper bounds")
        self.below += int(np.sum(observed < lower))
        self.above += int(np.sum(observed > upper))
        self.errors.extend((observed - median).tolist())
        self.total += observed.size

    def summary(self) -> Dict[str, float]:
        """Computes the aggregated metrics

        Returns:
            a dictionary with the empirical coverage (as a fraction and a percentage), the mean error, the median
            absolute error, and the shares of observations below and above their interval
        """

        # Check that we have at least one element
        if self.total == 0:
            raise AssertionError("you need to update the metric before getting the summary")
        coverage = (self.total - self.below - self.above) / self.total
        errors = np.asarray(self.errors)
        return dict(
            count=self.total,
            coverage=coverage,
            coverage_pct=100 * coverage,
            mean_error=float(errors.mean()),
            median_abs_error=float(np.median(np.abs(errors))),
            share_below=self.below / self.total,
            share_above=self.above / self.total,
        )

    def reset(self) -> None:
        self.below = 0
        self.above = 0
        self.total = 0
        self.errors: List[float] = []
