# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from srbayes.inference.draws import PosteriorDraws
from srbayes.inference.mcmc import run_mcmc
from srbayes.inference.summaries import QUANTILES
from srbayes.io.records import SrbObservation, TfrSeries
from srbayes.models.config import McmcSettings, ModelConfig
from srbayes.utils.metrics import CoverageMetric
from srbayes.utils.multithreading import multithread_exec

from .simulation import SimulationDesign, SimulationTruth, simulate_dataset, synthetic_tfr
from .splits import split_out_of_sample

__all__ = ['period_mean_draws', 'predictive_quantiles', 'coverage_report', 'run_validation', 'run_simulation_study']


def period_mean_draws(draws: PosteriorDraws, obs: SrbObservation) -> np.ndarray:
    """Draws of the mean sex ratio over the period of an observation, clipped to the estimation years"""

    r_idx = draws.region_index(obs.region_id)
    start, end = int(draws.years[0]), int(draws.years[-1])
    first, last = max(obs.period_start, start), min(obs.period_end, end)
    if first > last:
        raise ValueError(f"observation {obs.region_id} {obs.period_start}-{obs.period_end} does not overlap the "
                         f"estimation years {start}-{end}")
    theta = draws.theta()[:, :, r_idx, first - start: last - start + 1]
    return theta.mean(axis=-1).ravel()


def predictive_quantiles(period_means: np.ndarray, log_se: float, quantiles: Sequence[float] = QUANTILES) -> np.ndarray:
    """Quantiles of the posterior predictive distribution of an observed ratio

    The predictive distribution is the mixture, over the draws, of log-normal distributions centered on the period
    mean sex ratio with the sampling error of the observation.

    Args:
        period_means: draws of the period mean sex ratio
        log_se: sampling error of the observation, on the log scale
        quantiles: probabilities

    Returns:
        the quantiles, on the ratio scale
    """

    centers = np.log(period_means)

    def _cdf(val: float, prob: float) -> float:
        return float(ndtr((val - centers) / log_se).mean()) - prob

    lo, hi = centers.min() - 10 * log_se, centers.max() + 10 * log_se
    return np.exp([brentq(_cdf, lo, hi, args=(prob,), xtol=1e-12) for prob in quantiles])


def coverage_report(draws: PosteriorDraws, held_out: Sequence[SrbObservation]) -> Dict[str, Any]:
    """Calibration of 95% intervals against held-out observations

    An observation is covered when its ratio lies within the 95% posterior predictive interval of its period mean
    sex ratio (sampling error included). The coverage of the sex ratio interval alone is reported as well.

    Example::
        >>> from srbayes.validation import coverage_report
        >>> report = coverage_report(draws, split.held_out)
        >>> report["coverage_pct"]

    Args:
        draws: posterior draws of a fit without the held-out observations
        held_out: held-out observations

    Returns:
        a JSON-serializable dictionary with the aggregated metrics and one row per observation
    """

    if len(held_out) == 0:
        raise ValueError("no held-out observation to score")
    predictive, model_only = CoverageMetric(), CoverageMetric()
    rows: List[Dict[str, Any]] = []
    for obs in held_out:
        means = period_mean_draws(draws, obs)
        lower, median, upper = predictive_quantiles(means, obs.log_se)
        theta_lower, theta_median, theta_upper = np.quantile(means, QUANTILES)
        predictive.update(obs.ratio, lower, upper, median)
        model_only.update(obs.ratio, theta_lower, theta_upper, theta_median)
        rows.append(dict(
            obs.export(),
            median=float(median), lower95=float(lower), upper95=float(upper),
            covered=bool(lower <= obs.ratio <= upper),
            theta_median=float(theta_median), theta_lower95=float(theta_lower), theta_upper95=float(theta_upper),
            theta_covered=bool(theta_lower <= obs.ratio <= theta_upper),
        ))
    summary = predictive.summary()
    summary["theta_coverage_pct"] = model_only.summary()["coverage_pct"]
    return dict(summary, observations=rows)


def run_validation(
    observations: Sequence[SrbObservation],
    tfr_series: Sequence[TfrSeries],
    config: ModelConfig,
    settings: McmcSettings,
    holdout_fraction: float = 0.2,
    source_years: Optional[Mapping[str, int]] = None,
    threads: Optional[int] = None,
    progress: bool = False,
) -> Dict[str, Any]:
    """Out-of-sample validation: hold out the most recent observations, fit on the rest, score the held-out set

    Regions whose observations are all held out are still modelled.

    Args:
        observations: sex ratio observations
        tfr_series: TFR series of the regions
        config: model constants and priors
        settings: sampler settings
        holdout_fraction: share of the observations to hold out
        source_years: collection year of each source
        threads: number of chains run in parallel
        progress: whether to display progress bars

    Returns:
        a JSON-serializable report with the split manifest and the coverage table
    """

    split = split_out_of_sample(observations, holdout_fraction, source_years)
    logging.info(f"validation split: {len(split.training)} training, {len(split.held_out)} held-out observation(s)")
    regions = sorted({obs.region_id for obs in observations})
    draws = run_mcmc(split.training, tfr_series, config, settings, regions=regions, threads=threads,
                     progress=progress)
    return dict(
        holdout_fraction=holdout_fraction,
        seed=settings.seed,
        split=split.export(),
        coverage=coverage_report(draws, split.held_out),
    )


def run_simulation_study(
    truth: SimulationTruth,
    design: SimulationDesign,
    config: ModelConfig,
    settings: McmcSettings,
    num_replicates: int,
    holdout_fraction: float = 0.2,
    threads: Optional[int] = None,
) -> Dict[str, Any]:
    """Out-of-sample validation repeated over synthetic replicates

    Replicate k is simulated with seed `settings.seed + k` and fitted with the same seed.

    Args:
        truth: true inflation indicators and transitions
        design: sampling design
        config: model constants and priors
        settings: sampler settings
        num_replicates: number of synthetic datasets
        holdout_fraction: share of the observations to hold out
        threads: number of replicates processed in parallel

    Returns:
        the pooled coverage of the held-out observations, and the report of each replicate
    """

    if num_replicates <= 0:
        raise ValueError(f"the number of replicates must be positive, got {num_replicates}")

    def _replicate(idx: int) -> Dict[str, Any]:
        seed = settings.seed + idx
        dataset = simulate_dataset(truth, design, config, seed)
        tfr = synthetic_tfr(truth, config)
        return run_validation(dataset.observations or [], tfr, config, settings.model_copy(update=dict(seed=seed)),
                              holdout_fraction, threads=1)

    reports = multithread_exec(_replicate, range(num_replicates), threads)
    metric = CoverageMetric()
    for report in reports:
        rows = report["coverage"]["observations"]
        metric.update(*(np.asarray([row[key] for row in rows]) for key in ("ratio", "lower95", "upper95", "median")))
    return dict(num_replicates=num_replicates, coverage=metric.summary(), replicates=reports)

