# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from srbayes.io.records import SrbObservation, TfrSeries
from srbayes.utils.repr import NestedObject

from .config import SHAPE_NAMES, ModelConfig
from .transition import TransitionParams, onset_prior_mean, trapezoid_ramp

__all__ = [
    'norm_logpdf', 'theta', 'obs_loglik', 'ar1_logprior', 'transition_logprior', 'delta_logprior', 'pi_logprior',
    'HierarchyParams', 'LatentState', 'SrbModel',
]

# Degrees of freedom of the Student-t prior on the transition start year
START_YEAR_DF = 3.
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


def norm_logpdf(x: np.ndarray, loc: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Normal log-density, without the overhead of scipy distribution objects"""
    z = (x - loc) / scale
    return -0.5 * z ** 2 - np.log(scale) - _LOG_SQRT_2PI


def theta(b: float, log_phi, delta, alpha):
    """Sex ratio at birth: baseline times natural fluctuation, plus the inflation when it is switched on

    Example::
        >>> from srbayes.models import theta
        >>> srb = theta(1.049, 0., 1, 0.05)

    Args:
        b: national baseline
        log_phi: log-scale natural fluctuation
        delta: inflation indicator (0 or 1)
        alpha: nonnegative inflation

    Returns:
        the sex ratio, broadcast over array inputs
    """

    if np.any(np.asarray(alpha) < 0):
        raise ValueError("the inflation must be nonnegative")
    val = b * np.exp(log_phi) + delta * np.asarray(alpha)
    return float(val) if np.ndim(val) == 0 else val


def obs_loglik(obs: SrbObservation, theta_val: float) -> float:
    """Log-likelihood of an observed ratio given the model sex ratio of its period

    The model value of a multi-year observation is the mean of the yearly sex ratios over the period.

    Args:
        obs: the observation
        theta_val: model sex ratio matched to the observation

    Returns:
        the normal log-density of log(ratio) centered on log(theta_val) with the observation sampling error
    """

    return float(stats.norm.logpdf(np.log(obs.ratio), loc=np.log(theta_val), scale=obs.log_se))


def ar1_logprior(log_phi, rho: float, sd: float):
    """Stationary AR(1) log-density of log-scale fluctuations, along the last axis

    Args:
        log_phi: sequence(s) of log-scale fluctuations, of shape (..., T) with T >= 1
        rho: autocorrelation
        sd: innovation standard deviation

    Returns:
        the log-density (one per leading index)
    """

    x = np.asarray(log_phi, dtype=np.float64)
    if x.shape[-1] < 1:
        raise ValueError("the AR(1) sequence needs at least one element")
    stationary_sd = sd / np.sqrt(1 - rho ** 2)
    out = norm_logpdf(x[..., 0], 0., stationary_sd)
    if x.shape[-1] > 1:
        out = out + norm_logpdf(x[..., 1:], rho * x[..., :-1], sd).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


class HierarchyParams(NestedObject):
    """Population-level means and standard deviations of the log transition shape parameters

    Args:
        mu: means of log(lambda1), log(lambda2), log(lambda3), log(xi)
        tau: standard deviations of the same
    """

    def __init__(self, mu: Sequence[float], tau: Sequence[float]) -> None:
        self.mu = np.asarray(mu, dtype=np.float64)
        self.tau = np.asarray(tau, dtype=np.float64)
        if self.mu.shape != (len(SHAPE_NAMES),) or self.tau.shape != (len(SHAPE_NAMES),):
            raise AssertionError(f"expected {len(SHAPE_NAMES)} hierarchy means and standard deviations")
        if np.any(self.tau <= 0):
            raise ValueError("hierarchy standard deviations must be positive")

    @classmethod
    def from_config(cls, config: ModelConfig) -> 'HierarchyParams':
        """Hierarchy set at its hyperprior centers"""
        priors = [config.shape_hyperpriors[name] for name in SHAPE_NAMES]
        return cls([np.log(p.mean) for p in priors], [p.sd for p in priors])

    def extra_repr(self) -> str:
        return f"mu={np.round(self.mu, 4).tolist()}, tau={np.round(self.tau, 4).tolist()}"


def transition_logprior(
    tp: TransitionParams,
    hyper: HierarchyParams,
    onset_mean: float,
    start_year_scale: float,
) -> float:
    """Prior log-density of a transition shape, on the (gamma, log lambdas, log xi) scale

    Args:
        tp: transition shape
        hyper: hierarchy of the log shape parameters
        onset_mean: location of the Student-t(3) prior on the start year
        start_year_scale: scale of the Student-t(3) prior on the start year

    Returns:
        the log-density
    """

    logp = stats.t.logpdf(tp.gamma, df=START_YEAR_DF, loc=onset_mean, scale=start_year_scale)
    logs = np.log([tp.lambda1, tp.lambda2, tp.lambda3, tp.xi])
    logp += stats.norm.logpdf(logs, loc=hyper.mu, scale=hyper.tau).sum()
    return float(logp)


def delta_logprior(delta: int, pi: float) -> float:
    """Bernoulli log-probability of the inflation indicator"""

    if not 0 < pi < 1:
        raise ValueError(f"pi must be in (0, 1), got {pi}")
    return float(stats.bernoulli.logpmf(delta, pi))


def pi_logprior(pi: float, a: float, b: float) -> float:
    """Beta log-density of the inflation probability"""

    return float(stats.beta.logpdf(pi, a, b))


class LatentState(NestedObject):
    """Latent quantities of the model for a set of regions

    Args:
        log_phi: log-scale natural fluctuations, of shape (R, T)
        delta: inflation indicators, of shape (R,)
        pi: inflation probabilities, of shape (R,)
        transition: transition shapes on the unconstrained scale (gamma, log lambdas, log xi), of shape (R, 5)
        hyper: hierarchy of the log shape parameters
    """

    def __init__(
        self,
        log_phi: np.ndarray,
        delta: np.ndarray,
        pi: np.ndarray,
        transition: np.ndarray,
        hyper: HierarchyParams,
    ) -> None:
        self.log_phi = np.asarray(log_phi, dtype=np.float64)
        self.delta = np.asarray(delta, dtype=np.int64)
        self.pi = np.asarray(pi, dtype=np.float64)
        self.transition = np.asarray(transition, dtype=np.float64)
        self.hyper = hyper
        if np.any((self.delta != 0) & (self.delta != 1)):
            raise ValueError("inflation indicators must be 0 or 1")
        if np.any((self.pi <= 0) | (self.pi >= 1)):
            raise ValueError("inflation probabilities must be in (0, 1)")

    def transition_params(self, idx: int) -> TransitionParams:
        return TransitionParams.from_unconstrained(self.transition[idx])

    def copy(self) -> 'LatentState':
        return LatentState(
            self.log_phi.copy(), self.delta.copy(), self.pi.copy(), self.transition.copy(),
            HierarchyParams(self.hyper.mu.copy(), self.hyper.tau.copy()),
        )

    def extra_repr(self) -> str:
        return f"regions={self.log_phi.shape[0]}, years={self.log_phi.shape[1]}, delta={self.delta.tolist()}"


class SrbModel(NestedObject):
    """Binds observations, TFR series and constants into the arrays evaluated by the sampler

    Example::
        >>> from srbayes.models import ModelConfig, SrbModel
        >>> model = SrbModel(observations, tfr_series, ModelConfig())
        >>> state = model.initial_state(delta=1)
        >>> model.log_posterior_terms(state)

    Args:
        observations: sex ratio observations
        tfr_series: TFR series, at least one per modelled region
        config: model constants and priors
        regions: regions to model in addition to the ones with observations
    """

    def __init__(
        self,
        observations: Sequence[SrbObservation],
        tfr_series: Sequence[TfrSeries],
        config: ModelConfig,
        regions: Optional[Sequence[str]] = None,
    ) -> None:
        self.config = config
        self.years = np.asarray(config.years, dtype=np.float64)
        self.regions: List[str] = sorted(set(obs.region_id for obs in observations).union(regions or []))
        if len(self.regions) == 0:
            raise ValueError("no region to model")
        tfr_map: Dict[str, TfrSeries] = {tfr.region_id: tfr for tfr in tfr_series}
        for region in self.regions:
            if region not in tfr_map:
                raise ValueError(f"no TFR series for region '{region}'")
            if not tfr_map[region].covers(*config.year_range):
                raise ValueError(f"TFR series of region '{region}' does not cover the estimation years "
                                 f"{config.year_range[0]}-{config.year_range[1]}")
        self.tfr = {region: tfr_map[region] for region in self.regions}
        self.onset_means = np.asarray(
            [onset_prior_mean(self.tfr[region], config.onset_reference_tfr) for region in self.regions]
        )
        self.num_regions, self.num_years = len(self.regions), len(self.years)
        self._set_observations(observations)

    def _set_observations(self, observations: Sequence[SrbObservation]) -> None:
        start, end = self.config.year_range
        kept: List[SrbObservation] = []
        for obs in observations:
            if obs.period_end < start or obs.period_start > end:
                logging.warning(f"observation {obs.region_id} {obs.period_start}-{obs.period_end} ({obs.source_id}) "
                                f"lies outside the estimation years {start}-{end}: ignored")
                continue
            kept.append(obs)
        self.observations = kept
        region_idx = {region: idx for idx, region in enumerate(self.regions)}

        # Period averaging matrix, from the flattened (R, T) lattice to observations
        averaging = np.zeros((len(kept), self.num_regions, self.num_years))
        for idx, obs in enumerate(kept):
            first, last = max(obs.period_start, start) - start, min(obs.period_end, end) - start
            averaging[idx, region_idx[obs.region_id], first: last + 1] = 1 / (last - first + 1)
        self.averaging = averaging.reshape(len(kept), -1)
        # Per-year slices, of shape (num_obs, R)
        self.year_columns = [np.ascontiguousarray(averaging[:, :, t]) for t in range(self.num_years)]
        self.obs_region = np.asarray([region_idx[obs.region_id] for obs in kept], dtype=np.int64)
        self.obs_log_ratio = np.log(np.asarray([obs.ratio for obs in kept], dtype=np.float64))
        self.obs_log_se = np.asarray([obs.log_se for obs in kept], dtype=np.float64)

        counts = np.bincount(self.obs_region, minlength=self.num_regions)
        for region, count in zip(self.regions, counts):
            if count == 0:
                logging.warning(f"region '{region}' has no observation: its estimates are driven by the priors")

    @property
    def num_obs(self) -> int:
        return len(self.observations)

    # Lattice evaluation

    def alpha_lattice(self, transition: np.ndarray) -> np.ndarray:
        """Inflation of every region-year, of shape (R, T)"""
        shapes = np.exp(transition[:, 1:])
        ramp = trapezoid_ramp(self.years[None, :], transition[:, :1], shapes[:, :1], shapes[:, 1:2], shapes[:, 2:3])
        return shapes[:, 3:4] * ramp

    def theta_lattice(self, log_phi: np.ndarray, delta: np.ndarray, transition: np.ndarray) -> np.ndarray:
        return self.config.baseline_b * np.exp(log_phi) + delta[:, None] * self.alpha_lattice(transition)

    def period_means(self, theta_lattice: np.ndarray) -> np.ndarray:
        """Mean sex ratio over the period of every observation"""
        return self.averaging @ theta_lattice.ravel()

    def obs_logliks(self, period_means: np.ndarray) -> np.ndarray:
        return norm_logpdf(self.obs_log_ratio, np.log(period_means), self.obs_log_se)

    def region_logliks(self, obs_logliks: np.ndarray) -> np.ndarray:
        return np.bincount(self.obs_region, weights=obs_logliks, minlength=self.num_regions)

    def loglik(self, theta_lattice: np.ndarray) -> np.ndarray:
        """Log-likelihood of every region, of shape (R,)"""
        return self.region_logliks(self.obs_logliks(self.period_means(theta_lattice)))

    # Priors

    def transition_logprior(self, transition: np.ndarray, hyper: HierarchyParams) -> np.ndarray:
        """Prior log-density of the transition shapes of every region, of shape (R,)"""
        logp = stats.t.logpdf(transition[:, 0], df=START_YEAR_DF, loc=self.onset_means,
                              scale=self.config.start_year_scale)
        return logp + norm_logpdf(transition[:, 1:], hyper.mu[None, :], hyper.tau[None, :]).sum(axis=1)

    def hyper_logprior(self, mu: np.ndarray, log_tau: np.ndarray) -> np.ndarray:
        """Hyperprior log-density of each shape parameter hierarchy, on the (mu, log tau) scale, of shape (4,)"""
        priors = [self.config.shape_hyperpriors[name] for name in SHAPE_NAMES]
        centers = np.log([p.mean for p in priors])
        mean_sds = np.asarray([p.mean_sd for p in priors])
        log_sd_centers = np.log([p.sd for p in priors])
        sd_log_sds = np.asarray([p.sd_log_sd for p in priors])
        return norm_logpdf(mu, centers, mean_sds) + norm_logpdf(log_tau, log_sd_centers, sd_log_sds)

    def initial_state(self, delta: int = 0) -> LatentState:
        """Chain starting point: no fluctuation, shapes at their prior centers, a common inflation indicator"""
        hyper = HierarchyParams.from_config(self.config)
        transition = np.empty((self.num_regions, 1 + len(SHAPE_NAMES)))
        transition[:, 0] = self.onset_means
        transition[:, 1:] = hyper.mu[None, :]
        return LatentState(
            log_phi=np.zeros((self.num_regions, self.num_years)),
            delta=np.full(self.num_regions, delta, dtype=np.int64),
            pi=np.full(self.num_regions, 0.5),
            transition=transition,
            hyper=hyper,
        )

    def log_posterior_terms(self, state: LatentState) -> Dict[str, float]:
        """Unnormalized log-posterior, term by term"""
        cfg = self.config
        terms: Dict[str, float] = {}
        lik = self.loglik(self.theta_lattice(state.log_phi, state.delta, state.transition))
        ar1 = ar1_logprior(state.log_phi, cfg.ar1_rho, cfg.ar1_sd)
        trans = self.transition_logprior(state.transition, state.hyper)
        for idx, region in enumerate(self.regions):
            terms[f"likelihood[{region}]"] = float(lik[idx])
            terms[f"fluctuation[{region}]"] = float(np.atleast_1d(ar1)[idx])
            terms[f"transition[{region}]"] = float(trans[idx])
            terms[f"delta[{region}]"] = delta_logprior(int(state.delta[idx]), float(state.pi[idx]))
            terms[f"pi[{region}]"] = pi_logprior(float(state.pi[idx]), cfg.inflation_prior_a, cfg.inflation_prior_b)
        hyper = self.hyper_logprior(state.hyper.mu, np.log(state.hyper.tau))
        for name, val in zip(SHAPE_NAMES, hyper):
            terms[f"hierarchy[{name}]"] = float(val)
        return terms

    def log_posterior(self, state: LatentState) -> float:
        return float(sum(self.log_posterior_terms(state).values()))

    def extra_repr(self) -> str:
        return (f"regions={self.regions}, years=({self.config.year_range[0]}, {self.config.year_range[1]}), "
                f"num_obs={self.num_obs}")
