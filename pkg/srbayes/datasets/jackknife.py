# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import logging
from typing import Tuple

import numpy as np

__all__ = ['InsufficientClustersError', 'jackknife_pseudo_values', 'jackknife_log_se', 'delta_log_se']

# Added to both sexes of a leave-one-out total whose log ratio is undefined
CONTINUITY_CORRECTION = 0.5


class InsufficientClustersError(ValueError):
    """Raised when an observation does not have enough clusters to be resampled"""


def jackknife_pseudo_values(cluster_totals: np.ndarray) -> Tuple[np.ndarray, int]:
    """Compute the delete-one-cluster pseudo-values of the log sex ratio

    Args:
        cluster_totals: array of shape (K, 2) with the weighted (male, female) births of each cluster

    Returns:
        a tuple with the K pseudo-values and the number of continuity corrections applied
    """

    totals = np.asarray(cluster_totals, dtype=np.float64)
    if totals.ndim != 2 or totals.shape[1] != 2:
        raise AssertionError("cluster totals are expected to be of shape (K, 2)")
    if np.count_nonzero(totals[:, 1] > 0) < 2:
        raise InsufficientClustersError(
            f"jackknife requires at least 2 clusters with female births, got {np.count_nonzero(totals[:, 1] > 0)}: "
            "merge this period with an adjacent one"
        )
    k = totals.shape[0]
    male, female = totals.sum(axis=0)
    full_log_ratio = np.log(male / female)

    # Leave-one-out totals
    reduced = totals.sum(axis=0)[None, :] - totals
    # Guard against floating residue when a single cluster holds all births of one sex
    reduced[np.isclose(reduced, 0, atol=1e-12)] = 0.
    undefined = np.any(reduced <= 0, axis=1)
    reduced[undefined] += CONTINUITY_CORRECTION
    loo_log_ratio = np.log(reduced[:, 0] / reduced[:, 1])

    pseudo = k * full_log_ratio - (k - 1) * loo_log_ratio
    return pseudo, int(undefined.sum())


def jackknife_log_se(cluster_totals: np.ndarray) -> float:
    """Delete-one-cluster jackknife standard error of the log sex ratio

    Example::
        >>> import numpy as np
        >>> from srbayes.datasets import jackknife_log_se
        >>> se = jackknife_log_se(np.array([[10., 10.], [20., 10.], [12., 11.]]))

    Args:
        cluster_totals: array of shape (K, 2) with the weighted (male, female) births of each cluster

    Returns:
        the standard error of log(male / female)
    """

    pseudo, num_corrections = jackknife_pseudo_values(cluster_totals)
    if num_corrections > 0:
        logging.warning(f"continuity correction applied to {num_corrections} leave-one-out ratio(s)")
    k = pseudo.shape[0]
    return float(np.sqrt(np.sum((pseudo - pseudo.mean()) ** 2) / (k * (k - 1))))


def delta_log_se(ratio: float, n_births: float) -> float:
    """Delta-method standard error of the log sex ratio for a simple random sample of `n_births`"""

    return float(np.sqrt((1 + ratio) ** 2 / (n_births * ratio)))
