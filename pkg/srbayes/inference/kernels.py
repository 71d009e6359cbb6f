# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from typing import Union

import numpy as np
from scipy.special import expit, logit

from srbayes.utils.repr import NestedObject

__all__ = ['AdaptiveScale', 'metropolis_accept', 'delta_conditional_prob', 'gibbs_delta', 'gibbs_pi']

# Robbins-Monro gain of the first adaptation window
ADAPT_GAIN = 2.
# Bounds on the log of the scale multipliers
_LOG_SCALE_BOUNDS = (-12., 6.)


class AdaptiveScale(NestedObject):
    """Random-walk proposal scales adapted towards a target acceptance rate

    The scales are updated at the end of every adaptation window by a Robbins-Monro step on their logarithm,
    with a gain decreasing as the inverse square root of the number of windows. Once frozen, the scales are constant.

    Example::
        >>> import numpy as np
        >>> from srbayes.inference.kernels import AdaptiveScale
        >>> scale = AdaptiveScale(np.full(3, 0.1), target=0.44)
        >>> scale.record(np.array([True, False, True]))
        >>> scale.adapt()

    Args:
        init: initial scales, one per independently accepted component
        target: target acceptance rate
    """

    def __init__(self, init: Union[float, np.ndarray], target: float) -> None:
        if not 0 < target < 1:
            raise ValueError(f"target acceptance rate must be in (0, 1), got {target}")
        self.log_scale = np.log(np.asarray(init, dtype=np.float64))
        self.target = target
        self.frozen = False
        self.num_windows = 0
        self._window_accepted = np.zeros_like(self.log_scale)
        self._window_steps = 0
        self.accepted = np.zeros_like(self.log_scale)
        self.steps = 0

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    def record(self, accepted: np.ndarray) -> None:
        """Account for the acceptance of one update of every component"""
        self._window_accepted += accepted
        self._window_steps += 1
        self.accepted += accepted
        self.steps += 1

    def adapt(self) -> None:
        """Close the current window, moving the scales unless they are frozen"""
        if self._window_steps > 0 and not self.frozen:
            self.num_windows += 1
            rate = self._window_accepted / self._window_steps
            self.log_scale = np.clip(
                self.log_scale + ADAPT_GAIN / np.sqrt(self.num_windows) * (rate - self.target),
                *_LOG_SCALE_BOUNDS,
            )
        self._window_accepted[...] = 0
        self._window_steps = 0

    def freeze(self) -> None:
        """Stop adaptation and reset acceptance bookkeeping"""
        self.frozen = True
        self.accepted[...] = 0
        self.steps = 0
        self._window_accepted[...] = 0
        self._window_steps = 0

    @property
    def acceptance_rate(self) -> np.ndarray:
        return self.accepted / max(self.steps, 1)

    def extra_repr(self) -> str:
        return f"size={self.log_scale.size}, target={self.target}, frozen={self.frozen}"


def metropolis_accept(log_ratio: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Metropolis decisions for componentwise log acceptance ratios (NaN ratios are rejected)"""

    log_ratio = np.asarray(log_ratio, dtype=np.float64)
    with np.errstate(invalid='ignore'):
        return np.log(rng.random(log_ratio.shape)) < np.nan_to_num(log_ratio, nan=-np.inf)


def delta_conditional_prob(loglik_inflated: np.ndarray, loglik_natural: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Full conditional probability of the inflation indicator being on

    Args:
        loglik_inflated: log-likelihood of each region with the inflation switched on
        loglik_natural: log-likelihood of each region without inflation
        pi: inflation probability of each region

    Returns:
        P(delta = 1 | everything else), with odds pi / (1 - pi) * exp(loglik_inflated - loglik_natural)
    """

    return expit(logit(pi) + loglik_inflated - loglik_natural)


def gibbs_delta(
    loglik_inflated: np.ndarray,
    loglik_natural: np.ndarray,
    pi: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact draw of the inflation indicators from their full conditional"""

    prob = delta_conditional_prob(loglik_inflated, loglik_natural, pi)
    return (rng.random(prob.shape) < prob).astype(np.int64)


def gibbs_pi(delta: np.ndarray, a: float, b: float, rng: np.random.Generator) -> np.ndarray:
    """Conjugate Beta draw of the inflation probabilities given the indicators"""

    draws = rng.beta(a + delta, b + 1 - delta)
    # Keep away from the boundaries where the Bernoulli log-mass is infinite
    eps = np.finfo(np.float64).eps
    return np.clip(draws, eps, 1 - eps)
