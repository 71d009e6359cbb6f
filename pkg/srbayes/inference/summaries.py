# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from srbayes.io.reader import write_table
from srbayes.io.records import TfrSeries
from srbayes.models.config import SHAPE_NAMES, ModelConfig
from srbayes.utils.metrics import effective_sample_size, is_degenerate, split_rhat
from srbayes.utils.repr import NestedObject

from .draws import TRANSITION_NAMES, PosteriorDraws

__all__ = [
    'ESTIMATE_COLUMNS', 'RHAT_THRESHOLD', 'ConvergenceError', 'Estimates', 'inflation_probability', 'srb_estimates',
    'onset_summary', 'imbalance_table', 'compare_to_baseline', 'rhat', 'ess', 'diagnostics', 'check_convergence',
]

ESTIMATE_COLUMNS = ["region_id", "year", "median", "lower95", "upper95"]
QUANTILES = (0.025, 0.5, 0.975)
RHAT_THRESHOLD = 1.05


class ConvergenceError(RuntimeError):
    """Raised when monitored parameters exceed the R-hat threshold"""


class Estimates(NestedObject):
    """Posterior medians and 95% credible intervals on a region-year lattice

    Args:
        regions: regions, in row order
        years: years, in column order
        median: medians, of shape (R, T)
        lower: 2.5% quantiles, of shape (R, T)
        upper: 97.5% quantiles, of shape (R, T)
    """

    def __init__(
        self,
        regions: Sequence[str],
        years: Sequence[int],
        median: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
    ) -> None:
        self.regions = list(regions)
        self.years = np.asarray(years, dtype=np.int64)
        self.median, self.lower, self.upper = (np.asarray(arr, dtype=np.float64) for arr in (median, lower, upper))
        if not self.median.shape == self.lower.shape == self.upper.shape == (len(self.regions), len(self.years)):
            raise AssertionError("quantile arrays are expected to be of shape (num_regions, num_years)")

    @classmethod
    def from_draws(cls, regions: Sequence[str], years: Sequence[int], samples: np.ndarray) -> 'Estimates':
        """Quantiles of samples of shape (N, R, T)"""
        lower, median, upper = np.quantile(samples, QUANTILES, axis=0)
        return cls(regions, years, median, lower, upper)

    def at(self, region: str, year: int) -> Tuple[float, float, float]:
        """Median, lower and upper bound of a region-year"""
        r_idx = self.regions.index(region)
        idx = np.flatnonzero(self.years == year)
        if idx.size == 0:
            raise KeyError(f"year {year} is not estimated")
        y_idx = int(idx[0])
        return float(self.median[r_idx, y_idx]), float(self.lower[r_idx, y_idx]), float(self.upper[r_idx, y_idx])

    def rows(self) -> List[Tuple[str, int, float, float, float]]:
        return [
            (region, int(year), float(self.median[r, t]), float(self.lower[r, t]), float(self.upper[r, t]))
            for r, region in enumerate(self.regions) for t, year in enumerate(self.years)
        ]

    def save(self, path: Union[str, Path]) -> None:
        write_table(path, ESTIMATE_COLUMNS, self.rows())

    def extra_repr(self) -> str:
        return f"regions={self.regions}, years=({self.years[0]}, {self.years[-1]})"


def inflation_probability(draws: PosteriorDraws, region: str) -> float:
    """Share of the draws, pooled across chains, in which the sex ratio of a region is inflated"""

    return float(draws.delta[:, :, draws.region_index(region)].mean())


def srb_estimates(draws: PosteriorDraws, config: Optional[ModelConfig] = None) -> Estimates:
    """Posterior medians and 95% intervals of the sex ratio of every region-year

    Example::
        >>> from srbayes.inference import srb_estimates
        >>> estimates = srb_estimates(draws)
        >>> estimates.at("P2", 2016)

    Args:
        draws: posterior draws
        config: model constants, defaults to the ones the draws were obtained with

    Returns:
        the estimates
    """

    if config is not None and config.baseline_b != draws.config.baseline_b:
        draws = PosteriorDraws(draws.regions, draws.years, draws.log_phi, draws.delta, draws.pi, draws.transition,
                               draws.mu, draws.tau, config, draws.settings, draws.iterations,
                               chain_ids=draws.chain_ids)
    theta = draws.theta()
    return Estimates.from_draws(draws.regions, draws.years, theta.reshape(-1, *theta.shape[2:]))


def onset_summary(draws: PosteriorDraws, region: str, tfr: Optional[TfrSeries] = None) -> Dict[str, Any]:
    """Start year of the sex ratio transition among the inflated draws of a region

    Quantiles are lower order statistics (ties go to the earlier year), rounded to integer years.

    Args:
        draws: posterior draws
        region: region identifier
        tfr: TFR series of the region, to look up the TFR at the median start year

    Returns:
        a dictionary with `available`, and when available `median`, `lower95`, `upper95`, `tfr_at_median_onset`
    """

    r_idx = draws.region_index(region)
    inflated = draws.delta[:, :, r_idx] == 1
    if not np.any(inflated):
        return dict(available=False, median=None, lower95=None, upper95=None, tfr_at_median_onset=None)
    gamma = draws.transition[:, :, r_idx, 0][inflated]
    lower, median, upper = (int(np.round(val)) for val in np.quantile(gamma, QUANTILES, method='lower'))
    tfr_val = None
    if tfr is not None:
        try:
            tfr_val = tfr.tfr_at(median)
        except KeyError:
            logging.warning(f"median transition start year {median} of region '{region}' is outside its TFR series")
    return dict(available=True, median=median, lower95=lower, upper95=upper, tfr_at_median_onset=tfr_val)


def imbalance_table(draws: PosteriorDraws, tfr_series: Iterable[TfrSeries] = ()) -> Dict[str, Any]:
    """Inflation probability and transition start year of every region

    Args:
        draws: posterior draws
        tfr_series: TFR series of the regions

    Returns:
        a JSON-serializable dictionary with one entry per region and the mean inflation probability across regions
    """

    tfr_map = {tfr.region_id: tfr for tfr in tfr_series}
    regions = [
        dict(
            region_id=region,
            inflation_probability=inflation_probability(draws, region),
            onset=onset_summary(draws, region, tfr_map.get(region)),
        )
        for region in draws.regions
    ]
    return dict(
        regions=regions,
        mean_inflation_probability=float(np.mean([entry["inflation_probability"] for entry in regions])),
    )


def compare_to_baseline(
    estimates: Estimates,
    baseline: float,
    years: Optional[Sequence[int]] = None,
) -> List[Dict[str, Any]]:
    """Flag the region-years whose 95% interval excludes the baseline

    Args:
        estimates: sex ratio estimates
        baseline: national baseline
        years: snapshot years, all estimated years by default

    Returns:
        one row per region and snapshot year
    """

    years = estimates.years.tolist() if years is None else list(years)
    rows = []
    for region in estimates.regions:
        for year in years:
            median, lower, upper = estimates.at(region, year)
            rows.append(dict(
                region_id=region, year=int(year), median=median, lower95=lower, upper95=upper,
                differs=bool(lower > baseline or upper < baseline),
            ))
    return rows


def rhat(draws: PosteriorDraws, selector: str) -> float:
    """Split R-hat of a scalar parameter, e.g. "theta[P5,2010]" or "xi[P5]" """
    return split_rhat(draws.select(selector))


def ess(draws: PosteriorDraws, selector: str) -> float:
    """Bulk effective sample size of a scalar parameter"""
    return effective_sample_size(draws.select(selector))


def _monitored(draws: PosteriorDraws) -> List[Tuple[str, str]]:
    """(block, selector) pairs of the monitored parameters"""
    pairs = []
    for region in draws.regions:
        pairs.extend((f"theta[{region}]", f"theta[{region},{year}]") for year in draws.years)
        pairs.extend((f"log_phi[{region}]", f"log_phi[{region},{year}]") for year in draws.years)
        pairs.append((f"delta[{region}]", f"delta[{region}]"))
        pairs.append((f"pi[{region}]", f"pi[{region}]"))
        pairs.extend((f"transition[{region}]", f"{name}[{region}]") for name in TRANSITION_NAMES)
    pairs.extend(("hierarchy", f"{prefix}{name}") for prefix in ("mu_", "tau_") for name in SHAPE_NAMES)
    return pairs


def diagnostics(draws: PosteriorDraws, threshold: float = RHAT_THRESHOLD) -> Dict[str, Any]:
    """Convergence diagnostics of every monitored parameter, aggregated by block

    Args:
        draws: posterior draws with at least 2 chains of 4 draws
        threshold: R-hat above which a parameter has not converged

    Returns:
        a JSON-serializable dictionary with per-parameter and per-block R-hat and ESS, and the convergence status
    """

    parameters: List[Dict[str, Any]] = []
    blocks: Dict[str, Dict[str, Any]] = {}
    for block, selector in _monitored(draws):
        samples = draws.select(selector)
        entry = dict(
            parameter=selector, block=block, rhat=split_rhat(samples), ess=effective_sample_size(samples),
            degenerate=is_degenerate(samples),
        )
        parameters.append(entry)
        agg = blocks.setdefault(block, dict(block=block, n_parameters=0, max_rhat=1., min_ess=float('inf'),
                                            n_degenerate=0))
        agg["n_parameters"] += 1
        agg["max_rhat"] = max(agg["max_rhat"], entry["rhat"])
        agg["min_ess"] = min(agg["min_ess"], entry["ess"])
        agg["n_degenerate"] += int(entry["degenerate"])

    failing = [entry["parameter"] for entry in parameters if entry["rhat"] > threshold]
    return dict(
        threshold=threshold,
        converged=len(failing) == 0,
        nonconverged=failing,
        max_rhat=max(entry["rhat"] for entry in parameters),
        blocks=list(blocks.values()),
        parameters=parameters,
        acceptance=draws.acceptance,
    )


def check_convergence(report: Mapping[str, Any]) -> None:
    """Raise a ConvergenceError if a diagnostics report lists nonconverged parameters"""

    if not report["converged"]:
        failing = report["nonconverged"]
        raise ConvergenceError(f"{len(failing)} parameter(s) with R-hat above {report['threshold']}: "
                               f"{', '.join(failing[:10])}{', ...' if len(failing) > 10 else ''}")
