# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from typing import Any, Dict, List, Union

import numpy as np

from srbayes.io.records import TfrSeries
from srbayes.utils.repr import NestedObject

__all__ = ['TransitionParams', 'trapezoid_ramp', 'trapezoid_alpha', 'onset_prior_mean']

ArrayLike = Union[float, np.ndarray]


class TransitionParams(NestedObject):
    """Shape of a sex ratio transition: increase, stagnation and convergence back to the baseline

    Args:
        gamma: start year of the transition
        lambda1: length of the increase, in years
        lambda2: length of the stagnation, in years
        lambda3: length of the convergence, in years
        xi: maximum inflation level, in SRB units
    """

    _exported_keys: List[str] = ["gamma", "lambda1", "lambda2", "lambda3", "xi"]

    def __init__(self, gamma: float, lambda1: float, lambda2: float, lambda3: float, xi: float) -> None:
        for name, val in zip(self._exported_keys[1:], (lambda1, lambda2, lambda3, xi)):
            if not val > 0:
                raise ValueError(f"{name} must be positive, got {val}")
        self.gamma = float(gamma)
        self.lambda1 = float(lambda1)
        self.lambda2 = float(lambda2)
        self.lambda3 = float(lambda3)
        self.xi = float(xi)

    @property
    def end_year(self) -> float:
        """Year at which the transition is over"""
        return self.gamma + self.lambda1 + self.lambda2 + self.lambda3

    def to_unconstrained(self) -> np.ndarray:
        """Map to (gamma, log lambda1, log lambda2, log lambda3, log xi)"""
        return np.array([self.gamma, np.log(self.lambda1), np.log(self.lambda2), np.log(self.lambda3), np.log(self.xi)])

    @classmethod
    def from_unconstrained(cls, vec: np.ndarray) -> 'TransitionParams':
        return cls(float(vec[0]), *(float(v) for v in np.exp(np.asarray(vec[1:], dtype=np.float64))))

    def export(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in self._exported_keys}

    @classmethod
    def from_dict(cls, save_dict: Dict[str, Any]) -> 'TransitionParams':
        return cls(**{k: save_dict[k] for k in cls._exported_keys})

    def extra_repr(self) -> str:
        return ", ".join(f"{k}={getattr(self, k):.4g}" for k in self._exported_keys)


def trapezoid_ramp(
    t: ArrayLike,
    gamma: ArrayLike,
    lambda1: ArrayLike,
    lambda2: ArrayLike,
    lambda3: ArrayLike,
) -> np.ndarray:
    """Unit-height trapezoid, broadcast over years and parameters

    Args:
        t: calendar years
        gamma: start years
        lambda1: increase lengths
        lambda2: stagnation lengths
        lambda3: convergence lengths

    Returns:
        values in [0, 1]: 0 before the start, linear increase, plateau at 1, linear decrease, 0 afterwards
    """

    elapsed = np.asarray(t, dtype=np.float64) - gamma
    increase = elapsed / lambda1
    convergence = 1 - (elapsed - lambda1 - lambda2) / lambda3
    return np.clip(np.minimum(increase, convergence), 0., 1.)


def trapezoid_alpha(t: ArrayLike, tp: TransitionParams) -> Any:
    """Inflation of the sex ratio at year `t` for a given transition

    Example::
        >>> from srbayes.models import TransitionParams, trapezoid_alpha
        >>> trapezoid_alpha(2006, TransitionParams(2001, 10, 5, 10, 0.06))
        0.03

    Args:
        t: calendar year(s)
        tp: transition shape

    Returns:
        the nonnegative inflation, as a float for scalar inputs
    """

    alpha = tp.xi * trapezoid_ramp(t, tp.gamma, tp.lambda1, tp.lambda2, tp.lambda3)
    return float(alpha) if np.ndim(alpha) == 0 else alpha


def onset_prior_mean(tfr: TfrSeries, onset_reference_tfr: float) -> float:
    """Prior mean of the transition start year: first (interpolated) year the TFR reaches the reference level

    Args:
        tfr: TFR series of the region
        onset_reference_tfr: TFR level at which transitions are expected to start

    Returns:
        the calendar year, the last year of the series if the TFR never falls to the reference level
    """

    values = tfr.values
    below = np.nonzero(values <= onset_reference_tfr)[0]
    if below.size == 0:
        return float(tfr.end_year)
    idx = int(below[0])
    if idx == 0:
        return float(tfr.start_year)
    # Linear interpolation between the bracketing years
    prev_val, next_val = values[idx - 1], values[idx]
    return float(tfr.start_year + idx - 1 + (prev_val - onset_reference_tfr) / (prev_val - next_val))
