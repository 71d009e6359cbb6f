# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from scipy.signal import lfilter

from srbayes.inference.draws import PosteriorDraws
from srbayes.inference.summaries import QUANTILES
from srbayes.io.reader import write_table
from srbayes.models.config import ModelConfig
from srbayes.models.transition import trapezoid_ramp
from srbayes.utils.repr import NestedObject

__all__ = ['PROJECTION_COLUMNS', 'Trajectories', 'ProjectionSummary', 'project', 'summarize_projection']

PROJECTION_COLUMNS = ["region_id", "year", "median", "lower95", "upper95", "phase"]
# Random stream of the projections, distinct from the ones of the chains
PROJECTION_STREAM = 1


class Trajectories(NestedObject):
    """Sex ratio trajectories of every draw over the estimation and projection years

    Args:
        regions: regions
        estimation_years: years covered by the posterior draws
        projection_years: projected years
        estimated: sex ratio draws over the estimation years, of shape (C, S, R, T)
        projected: sex ratio draws over the projection years, of shape (C, S, R, P)
        log_phi: projected log-scale fluctuations, of shape (C, S, R, P)
    """

    def __init__(
        self,
        regions: List[str],
        estimation_years: np.ndarray,
        projection_years: np.ndarray,
        estimated: np.ndarray,
        projected: np.ndarray,
        log_phi: np.ndarray,
    ) -> None:
        self.regions = regions
        self.estimation_years = estimation_years
        self.projection_years = projection_years
        self.estimated = estimated
        self.projected = projected
        self.log_phi = log_phi

    @property
    def years(self) -> np.ndarray:
        return np.concatenate([self.estimation_years, self.projection_years])

    def combined(self) -> np.ndarray:
        """Sex ratio draws over all years, of shape (C * S, R, T + P)"""
        full = np.concatenate([self.estimated, self.projected], axis=-1)
        return full.reshape(-1, *full.shape[2:])

    def extra_repr(self) -> str:
        return (f"regions={self.regions}, projection_years=({self.projection_years[0]}, "
                f"{self.projection_years[-1]}), num_draws={self.projected.shape[0] * self.projected.shape[1]}")


def project(
    draws: PosteriorDraws,
    config: Optional[ModelConfig] = None,
    seed: Optional[int] = None,
) -> Trajectories:
    """Extend every posterior draw to the projection horizon

    The fluctuation follows the AR(1) recursion from its last estimated value, and the inflation follows the
    transition of the draw. Draw (chain c, iteration i) consumes a random stream seeded with (seed, stream, c, i),
    so its projection does not depend on the other draws.

    Example::
        >>> from srbayes.projection import project
        >>> trajectories = project(draws)

    Args:
        draws: posterior draws
        config: model constants, defaults to the ones of the draws (only the AR(1) constants, the baseline and
            the projection horizon are used)
        seed: base seed, defaults to the seed of the sampler

    Returns:
        the trajectories
    """

    config = draws.config if config is None else config
    seed = draws.seed if seed is None else seed
    last_year = int(draws.years[-1])
    if config.projection_end <= last_year:
        raise ValueError(f"projection end ({config.projection_end}) must be after the last estimation year "
                         f"({last_year})")
    proj_years = np.arange(last_year + 1, config.projection_end + 1)
    num_chains, num_draws, num_regions = draws.delta.shape
    rho, sd = config.ar1_rho, config.ar1_sd
    logging.info(f"projecting {num_chains * num_draws} draw(s) over {proj_years[0]}-{proj_years[-1]}")

    log_phi = np.empty((num_chains, num_draws, num_regions, proj_years.size))
    for c in range(num_chains):
        for s in range(num_draws):
            rng = np.random.default_rng([seed, PROJECTION_STREAM, int(draws.chain_ids[c]), int(draws.iterations[s])])
            innovations = sd * rng.standard_normal((num_regions, proj_years.size))
            # x[t] = rho * x[t - 1] + eps[t], started from the last estimated fluctuation
            log_phi[c, s], _ = lfilter([1.], [1., -rho], innovations, axis=-1,
                                       zi=rho * draws.log_phi[c, s, :, -1:])

    tr = draws.transition[..., None]
    alpha = tr[..., 4, :] * trapezoid_ramp(proj_years, tr[..., 0, :], tr[..., 1, :], tr[..., 2, :], tr[..., 3, :])
    projected = config.baseline_b * np.exp(log_phi) + draws.delta[..., None] * alpha
    estimated = config.baseline_b * np.exp(draws.log_phi) + draws.delta[..., None] * draws.alpha()
    return Trajectories(draws.regions, draws.years.copy(), proj_years, estimated, projected, log_phi)


class ProjectionSummary(NestedObject):
    """Quantiles of the trajectories over the estimation and projection years, and the peak of each region

    Args:
        regions: regions
        years: estimation and projection years
        num_estimated: number of estimation years, at the start of `years`
        median: medians, of shape (R, Y)
        lower: 2.5% quantiles, of shape (R, Y)
        upper: 97.5% quantiles, of shape (R, Y)
        peaks: peak of the median trajectory of each region, searched from the last estimation year to the horizon
    """

    def __init__(
        self,
        regions: List[str],
        years: np.ndarray,
        num_estimated: int,
        median: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        peaks: Dict[str, Dict[str, Any]],
    ) -> None:
        self.regions = regions
        self.years = years
        self.num_estimated = num_estimated
        self.median = median
        self.lower = lower
        self.upper = upper
        self.peaks = peaks

    @property
    def phases(self) -> List[str]:
        return ["estimate" if idx < self.num_estimated else "projection" for idx in range(len(self.years))]

    def rows(self) -> List[List[Any]]:
        phases = self.phases
        return [
            [region, int(year), float(self.median[r, t]), float(self.lower[r, t]), float(self.upper[r, t]), phases[t]]
            for r, region in enumerate(self.regions) for t, year in enumerate(self.years)
        ]

    def save(self, out_dir: Union[str, Path]) -> None:
        """Write projections.csv and peaks.json to a folder"""
        out_dir = Path(out_dir)
        write_table(out_dir.joinpath("projections.csv"), PROJECTION_COLUMNS, self.rows())
        with open(out_dir.joinpath("peaks.json"), 'w', encoding='utf-8') as f:
            json.dump(self.peaks, f, indent=2, sort_keys=True)

    def extra_repr(self) -> str:
        return f"regions={self.regions}, years=({self.years[0]}, {self.years[-1]})"


def summarize_projection(trajectories: Trajectories) -> ProjectionSummary:
    """Quantiles of the trajectories and peak year of each region

    The peak year is the year in which the median trajectory reaches its maximum, from the last estimation year to
    the projection horizon, with ties broken to the earliest year.

    Args:
        trajectories: projected trajectories

    Returns:
        the summary
    """

    samples = trajectories.combined()
    if samples.shape[0] == 0:
        raise ValueError("no trajectory to summarize")
    lower, median, upper = np.quantile(samples, QUANTILES, axis=0)
    years = trajectories.years
    first = trajectories.estimation_years.size - 1
    peaks: Dict[str, Dict[str, Any]] = {}
    for r, region in enumerate(trajectories.regions):
        # np.argmax returns the first maximum
        idx = first + int(np.argmax(median[r, first:]))
        peaks[region] = dict(
            peak_year=int(years[idx]),
            median=float(median[r, idx]),
            lower95=float(lower[r, idx]),
            upper95=float(upper[r, idx]),
        )
    return ProjectionSummary(trajectories.regions, years, trajectories.estimation_years.size, median, lower, upper,
                             peaks)
