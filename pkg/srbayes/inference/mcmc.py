# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from srbayes.io.records import SrbObservation, TfrSeries
from srbayes.models.config import SHAPE_NAMES, McmcSettings, ModelConfig
from srbayes.models.core import SrbModel, norm_logpdf
from srbayes.utils.multithreading import multithread_exec
from srbayes.utils.repr import NestedObject

from .draws import PosteriorDraws
from .kernels import AdaptiveScale, gibbs_delta, gibbs_pi, metropolis_accept

__all__ = ['TRANSITION_BASE_SD', 'McmcChain', 'run_mcmc']

# Proposal standard deviations of (gamma, log lambda1, log lambda2, log lambda3, log xi), before scaling
TRANSITION_BASE_SD = np.array([2., 0.25, 0.25, 0.25, 0.25])
_HYPER_INIT_SCALE = (0.1, 0.2)


class McmcChain(NestedObject):
    """A single Metropolis-within-Gibbs chain over the latent state of a model

    Each iteration updates, in order: the log-scale fluctuations (one scalar random-walk per region-year, swept by
    year), the transition shape of each region (joint random-walk), the inflation indicators (exact Gibbs),
    the inflation probabilities (conjugate Gibbs) and the hierarchy of the shape parameters (scalar random-walks).

    Args:
        model: the bound model
        settings: sampler settings
        chain_idx: index of the chain, which sets its seed and its initial inflation indicators
    """

    def __init__(self, model: SrbModel, settings: McmcSettings, chain_idx: int) -> None:
        self.model = model
        self.settings = settings
        self.chain_idx = chain_idx
        self.rng = np.random.default_rng(settings.seed + chain_idx)
        # Overdispersion: half of the chains start inflated
        self.state = model.initial_state(delta=chain_idx % 2)
        for name, val in model.log_posterior_terms(self.state).items():
            if not np.isfinite(val):
                raise ValueError(f"non-finite log-posterior term at initialization: {name} = {val}")

        cfg = model.config
        num_regions, num_years = model.num_regions, model.num_years
        conditional_sd = cfg.ar1_sd / np.sqrt(1 + cfg.ar1_rho ** 2)
        self.scales: Dict[str, AdaptiveScale] = dict(
            log_phi=AdaptiveScale(np.full((num_regions, num_years), 2.38 * conditional_sd), settings.target_accept),
            transition=AdaptiveScale(np.ones(num_regions), settings.block_target_accept),
            mu=AdaptiveScale(np.full(len(SHAPE_NAMES), _HYPER_INIT_SCALE[0]), settings.target_accept),
            log_tau=AdaptiveScale(np.full(len(SHAPE_NAMES), _HYPER_INIT_SCALE[1]), settings.target_accept),
        )
        self._refresh()

    def _refresh(self) -> None:
        """Recompute the cached lattice and likelihood terms from the state"""
        state, model = self.state, self.model
        self.alpha = model.alpha_lattice(state.transition)
        self.theta = model.config.baseline_b * np.exp(state.log_phi) + state.delta[:, None] * self.alpha
        self.means = model.period_means(self.theta)
        self.obs_ll = model.obs_logliks(self.means)

    def _ar1_terms(self, t: int, val: np.ndarray) -> np.ndarray:
        """AR(1) log-density terms involving the fluctuation of year index t, set to `val`"""
        cfg, log_phi = self.model.config, self.state.log_phi
        if t == 0:
            logp = norm_logpdf(val, 0., cfg.stationary_sd)
        else:
            logp = norm_logpdf(val, cfg.ar1_rho * log_phi[:, t - 1], cfg.ar1_sd)
        if t < log_phi.shape[1] - 1:
            logp = logp + norm_logpdf(log_phi[:, t + 1], cfg.ar1_rho * val, cfg.ar1_sd)
        return logp

    def update_log_phi(self) -> None:
        model, state, rng = self.model, self.state, self.rng
        scale = self.scales["log_phi"].scale
        accepted = np.zeros(state.log_phi.shape, dtype=bool)
        b = model.config.baseline_b
        for t in range(model.num_years):
            current = state.log_phi[:, t].copy()
            proposal = current + scale[:, t] * rng.standard_normal(model.num_regions)
            theta_col = b * np.exp(proposal) + state.delta * self.alpha[:, t]
            # Only the observations covering year t move
            means = self.means + model.year_columns[t] @ (theta_col - self.theta[:, t])
            obs_ll = model.obs_logliks(means)
            log_ratio = (self._ar1_terms(t, proposal) - self._ar1_terms(t, current)
                         + model.region_logliks(obs_ll - self.obs_ll))
            acc = metropolis_accept(log_ratio, rng)
            state.log_phi[acc, t] = proposal[acc]
            self.theta[acc, t] = theta_col[acc]
            moved = acc[model.obs_region]
            self.means = np.where(moved, means, self.means)
            self.obs_ll = np.where(moved, obs_ll, self.obs_ll)
            accepted[:, t] = acc
        self.scales["log_phi"].record(accepted)

    def update_transition(self) -> None:
        model, state, rng = self.model, self.state, self.rng
        step = self.scales["transition"].scale[:, None] * TRANSITION_BASE_SD
        proposal = state.transition + step * rng.standard_normal(state.transition.shape)
        alpha = model.alpha_lattice(proposal)
        theta = model.config.baseline_b * np.exp(state.log_phi) + state.delta[:, None] * alpha
        obs_ll = model.obs_logliks(model.period_means(theta))
        # Without inflation, the transition does not enter the likelihood and the update targets its prior
        log_ratio = (model.transition_logprior(proposal, state.hyper)
                     - model.transition_logprior(state.transition, state.hyper)
                     + model.region_logliks(obs_ll - self.obs_ll))
        acc = metropolis_accept(log_ratio, rng)
        state.transition[acc] = proposal[acc]
        self.alpha[acc] = alpha[acc]
        self.theta[acc] = theta[acc]
        moved = acc[model.obs_region]
        self.obs_ll = np.where(moved, obs_ll, self.obs_ll)
        self.means = model.period_means(self.theta)
        self.scales["transition"].record(acc)

    def update_delta(self) -> None:
        model, state = self.model, self.state
        natural = model.config.baseline_b * np.exp(state.log_phi)
        loglik_inflated = model.loglik(natural + self.alpha)
        loglik_natural = model.loglik(natural)
        state.delta = gibbs_delta(loglik_inflated, loglik_natural, state.pi, self.rng)
        self.theta = natural + state.delta[:, None] * self.alpha
        self.means = model.period_means(self.theta)
        self.obs_ll = model.obs_logliks(self.means)

    def update_pi(self) -> None:
        cfg = self.model.config
        self.state.pi = gibbs_pi(self.state.delta, cfg.inflation_prior_a, cfg.inflation_prior_b, self.rng)

    def _hyper_target(self, mu: np.ndarray, log_tau: np.ndarray) -> np.ndarray:
        log_shapes = self.state.transition[:, 1:]
        return (self.model.hyper_logprior(mu, log_tau)
                + norm_logpdf(log_shapes, mu[None, :], np.exp(log_tau)[None, :]).sum(axis=0))

    def update_hyper(self) -> None:
        hyper, rng = self.state.hyper, self.rng
        mu, log_tau = hyper.mu, np.log(hyper.tau)
        # The hierarchies of the shape parameters are conditionally independent
        proposal = mu + self.scales["mu"].scale * rng.standard_normal(mu.shape)
        acc = metropolis_accept(self._hyper_target(proposal, log_tau) - self._hyper_target(mu, log_tau), rng)
        mu = np.where(acc, proposal, mu)
        self.scales["mu"].record(acc)

        proposal = log_tau + self.scales["log_tau"].scale * rng.standard_normal(log_tau.shape)
        acc = metropolis_accept(self._hyper_target(mu, proposal) - self._hyper_target(mu, log_tau), rng)
        log_tau = np.where(acc, proposal, log_tau)
        self.scales["log_tau"].record(acc)
        hyper.mu, hyper.tau = mu, np.exp(log_tau)

    def step(self) -> None:
        """Run one full sweep"""
        self.update_log_phi()
        self.update_transition()
        self.update_delta()
        self.update_pi()
        self.update_hyper()

    def _scale_snapshot(self) -> Dict[str, List[Any]]:
        return {name: scale.scale.tolist() for name, scale in self.scales.items()}

    def run(self, progress: bool = False) -> Dict[str, Any]:
        """Run the chain

        Args:
            progress: whether to display a progress bar

        Returns:
            the retained draws, acceptance rates and proposal scale snapshots
        """

        settings, state = self.settings, self.state
        num_keep = settings.n_retained
        num_regions, num_years = self.model.num_regions, self.model.num_years
        out: Dict[str, Any] = dict(
            log_phi=np.empty((num_keep, num_regions, num_years)),
            delta=np.empty((num_keep, num_regions), dtype=np.int64),
            pi=np.empty((num_keep, num_regions)),
            transition=np.empty((num_keep, num_regions, 1 + len(SHAPE_NAMES))),
            mu=np.empty((num_keep, len(SHAPE_NAMES))),
            tau=np.empty((num_keep, len(SHAPE_NAMES))),
            iterations=np.empty(num_keep, dtype=np.int64),
        )
        scales: Dict[str, Any] = {}
        if settings.n_burnin == 0:
            scales["burnin"] = self._scale_snapshot()
            for scale in self.scales.values():
                scale.freeze()

        kept = 0
        pbar = tqdm(range(settings.n_iterations), desc=f"chain {self.chain_idx}", disable=not progress, leave=False)
        for it in pbar:
            self.step()
            if it < settings.n_burnin:
                if (it + 1) % settings.adapt_window == 0:
                    for scale in self.scales.values():
                        scale.adapt()
                if it == settings.n_burnin - 1:
                    # Adaptation stops with the burn-in
                    for scale in self.scales.values():
                        scale.freeze()
                    scales["burnin"] = self._scale_snapshot()
                    self._refresh()
            elif (it - settings.n_burnin + 1) % settings.thin == 0:
                out["log_phi"][kept] = state.log_phi
                out["delta"][kept] = state.delta
                out["pi"][kept] = state.pi
                out["transition"][kept, :, 0] = state.transition[:, 0]
                out["transition"][kept, :, 1:] = np.exp(state.transition[:, 1:])
                out["mu"][kept] = state.hyper.mu
                out["tau"][kept] = state.hyper.tau
                out["iterations"][kept] = it
                kept += 1
        scales["final"] = self._scale_snapshot()
        out["scales"] = scales
        out["acceptance"] = {name: float(scale.acceptance_rate.mean()) for name, scale in self.scales.items()}
        logging.info(f"chain {self.chain_idx}: acceptance rates " +
                     ", ".join(f"{k}={v:.3f}" for k, v in out["acceptance"].items()))
        return out

    def extra_repr(self) -> str:
        return f"chain_idx={self.chain_idx}, seed={self.settings.seed + self.chain_idx}"


def run_mcmc(
    observations: Sequence[SrbObservation],
    tfr_series: Sequence[TfrSeries],
    config: ModelConfig,
    settings: McmcSettings,
    regions: Optional[Sequence[str]] = None,
    threads: Optional[int] = None,
    progress: bool = False,
) -> PosteriorDraws:
    """Sample the posterior of the latent state with independent adaptive Metropolis-within-Gibbs chains

    Chain c draws its random numbers from a generator seeded with `settings.seed + c`, so results do not depend
    on the number of threads.

    Example::
        >>> from srbayes.inference import run_mcmc
        >>> from srbayes.models import McmcSettings, ModelConfig
        >>> draws = run_mcmc(observations, tfr_series, ModelConfig(), McmcSettings(seed=7))

    Args:
        observations: sex ratio observations
        tfr_series: TFR series of the modelled regions
        config: model constants and priors
        settings: sampler settings
        regions: regions to model in addition to the ones with observations
        threads: number of chains run in parallel
        progress: whether to display progress bars

    Returns:
        the retained draws of every chain
    """

    if config.ar1_sd <= 0:
        raise ValueError("the fluctuation innovation standard deviation must be positive for sampling")
    model = SrbModel(observations, tfr_series, config, regions)
    logging.info(f"sampling {settings.n_chains} chain(s) of {settings.n_iterations} iterations for "
                 f"{model.num_regions} region(s) and {model.num_obs} observation(s)")
    # Initialization errors surface before any thread is started
    chains = [McmcChain(model, settings, idx) for idx in range(settings.n_chains)]
    results = multithread_exec(lambda chain: chain.run(progress), chains, threads)

    return PosteriorDraws(
        model.regions,
        model.config.years,
        np.stack([res["log_phi"] for res in results]),
        np.stack([res["delta"] for res in results]),
        np.stack([res["pi"] for res in results]),
        np.stack([res["transition"] for res in results]),
        np.stack([res["mu"] for res in results]),
        np.stack([res["tau"] for res in results]),
        config,
        settings,
        iterations=results[0]["iterations"],
        acceptance=[res["acceptance"] for res in results],
        scales=[res["scales"] for res in results],
    )
