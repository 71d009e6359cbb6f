# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import logging
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.signal import lfilter

from srbayes.datasets.jackknife import InsufficientClustersError, delta_log_se, jackknife_log_se
from srbayes.io.records import BirthRecord, Sex, SrbObservation, TfrSeries
from srbayes.models.config import ModelConfig
from srbayes.models.transition import TransitionParams, trapezoid_alpha
from srbayes.utils.repr import NestedObject

__all__ = [
    'RegionTruth', 'SimulationTruth', 'SimulationDesign', 'SimulatedDataset', 'simulate_male_counts',
    'simulate_log_phi', 'simulate_dataset', 'synthetic_tfr',
]


class RegionTruth(BaseModel):
    """True inflation indicator and transition shape of a region"""

    model_config = ConfigDict(extra='forbid', frozen=True)

    delta: int = Field(ge=0, le=1)
    gamma: float = 2000.
    lambda1: float = Field(12., gt=0)
    lambda2: float = Field(6., gt=0)
    lambda3: float = Field(12., gt=0)
    xi: float = Field(0.06, gt=0)

    @property
    def transition(self) -> TransitionParams:
        return TransitionParams(self.gamma, self.lambda1, self.lambda2, self.lambda3, self.xi)


class SimulationTruth(BaseModel):
    """Ground truth of a synthetic dataset, by region"""

    model_config = ConfigDict(extra='forbid', frozen=True)

    regions: Dict[str, RegionTruth] = Field(min_length=1)


class SimulationDesign(BaseModel):
    """Sampling design of a synthetic dataset

    Args:
        observations_per_region: number of observations of each region, spread evenly over the estimation years
        births_per_observation: number of sampled births behind each observation
        clusters_per_observation: number of sampling clusters the births of an observation are spread over
        period_length: number of years covered by each observation
        source_id: prefix of the source identifiers, each observation being its own source
    """

    model_config = ConfigDict(extra='forbid', frozen=True)

    observations_per_region: int = Field(gt=0)
    births_per_observation: int = Field(gt=0)
    clusters_per_observation: int = Field(25, gt=0)
    period_length: int = Field(1, gt=0)
    source_id: str = "SIM"


class SimulatedDataset(NestedObject):
    """Synthetic observations (or birth records) with their ground truth

    Args:
        observations: sex ratio observations, in observation mode
        records: birth records, in record mode
        truth: JSON-serializable ground truth (fluctuations, sex ratios, transitions)
    """

    def __init__(
        self,
        observations: Optional[List[SrbObservation]],
        records: Optional[List[BirthRecord]],
        truth: Dict[str, Any],
    ) -> None:
        self.observations = observations
        self.records = records
        self.truth = truth

    def true_theta(self, region: str) -> np.ndarray:
        return np.asarray(self.truth["regions"][region]["theta"])

    def extra_repr(self) -> str:
        mode = "records" if self.records is not None else "observations"
        size = len(self.records if self.records is not None else self.observations or [])
        return f"mode={mode}, size={size}, regions={list(self.truth['regions'])}"


def simulate_male_counts(
    theta: Union[float, np.ndarray],
    n_births: Union[int, np.ndarray],
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> np.ndarray:
    """Binomial male birth counts for a sex ratio theta, i.e. with male probability theta / (1 + theta)"""

    theta = np.asarray(theta, dtype=np.float64)
    return rng.binomial(n_births, theta / (1 + theta), size=size)


def simulate_log_phi(num_years: int, config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) path of log-scale fluctuations over `num_years` years"""
    start = config.stationary_sd * rng.standard_normal()
    if num_years == 1:
        return np.array([start])
    innovations = config.ar1_sd * rng.standard_normal(num_years - 1)
    rest, _ = lfilter([1.], [1., -config.ar1_rho], innovations, zi=[config.ar1_rho * start])
    return np.concatenate([[start], rest])


def _split_clusters(count: int, num_clusters: int, rng: np.random.Generator) -> np.ndarray:
    return rng.multinomial(count, np.full(num_clusters, 1 / num_clusters))


def simulate_dataset(
    truth: SimulationTruth,
    design: SimulationDesign,
    config: ModelConfig,
    seed: int,
    level: str = 'observation',
) -> SimulatedDataset:
    """Generate a synthetic dataset with known ground truth

    For each region, the fluctuation is drawn from the stationary AR(1) over the estimation years and combined with
    the true transition into yearly sex ratios. In observation mode, male births of each observation are binomial
    on the mean sex ratio of its period, births of each sex are spread multinomially over clusters, and the
    sampling error is the jackknife one. In record mode, yearly male births are binomial on the yearly sex ratio
    and one birth record is emitted per birth, to be fed to the preprocessing pipeline.

    Example::
        >>> from srbayes.models import ModelConfig
        >>> from srbayes.validation import RegionTruth, SimulationDesign, SimulationTruth, simulate_dataset
        >>> truth = SimulationTruth(regions={"P1": RegionTruth(delta=1, gamma=1995)})
        >>> design = SimulationDesign(observations_per_region=10, births_per_observation=10000)
        >>> dataset = simulate_dataset(truth, design, ModelConfig(), seed=0)

    Args:
        truth: true inflation indicators and transitions
        design: sampling design
        config: model constants (baseline, AR(1) constants and estimation years)
        seed: seed of the generator
        level: 'observation' or 'record'

    Returns:
        the synthetic dataset
    """

    if level not in ('observation', 'record'):
        raise ValueError(f"unknown simulation level '{level}', expected 'observation' or 'record'")
    rng = np.random.default_rng(seed)
    years = np.asarray(config.years)
    length = min(design.period_length, years.size)
    starts = np.linspace(0, years.size - length, design.observations_per_region).round().astype(int)

    observations: List[SrbObservation] = []
    records: List[BirthRecord] = []
    truth_record: Dict[str, Any] = dict(
        seed=seed, level=level, years=years.tolist(), baseline_b=config.baseline_b, regions={},
    )
    for region in sorted(truth.regions):
        region_truth = truth.regions[region]
        log_phi = simulate_log_phi(years.size, config, rng)
        alpha = trapezoid_alpha(years, region_truth.transition)
        theta = config.baseline_b * np.exp(log_phi) + region_truth.delta * alpha
        truth_record["regions"][region] = dict(
            delta=region_truth.delta, transition=region_truth.transition.export(), log_phi=log_phi.tolist(),
            theta=theta.tolist(),
        )
        for k, first in enumerate(starts):
            span = slice(first, first + length)
            source_id = f"{design.source_id}-{k + 1}"
            period = (int(years[span][0]), int(years[span][-1]))
            if level == 'observation':
                obs = _simulate_observation(region, source_id, period, float(theta[span].mean()), design, rng)
                if obs is not None:
                    observations.append(obs)
            else:
                records.extend(_simulate_records(region, source_id, years[span], theta[span], design, rng))

    logging.info(f"simulated {len(observations) if level == 'observation' else len(records)} {level}(s) "
                 f"for {len(truth.regions)} region(s)")
    if level == 'observation':
        return SimulatedDataset(observations, None, truth_record)
    return SimulatedDataset(None, records, truth_record)


def _simulate_observation(
    region: str,
    source_id: str,
    period: tuple,
    theta_bar: float,
    design: SimulationDesign,
    rng: np.random.Generator,
) -> Optional[SrbObservation]:
    n_births = design.births_per_observation
    male = int(simulate_male_counts(theta_bar, n_births, rng))
    female = n_births - male
    totals = np.stack([
        _split_clusters(male, design.clusters_per_observation, rng),
        _split_clusters(female, design.clusters_per_observation, rng),
    ], axis=1).astype(np.float64)
    if male == 0 or female == 0:
        logging.warning(f"simulated observation {region} {period[0]}-{period[1]} has no birth of one sex: dropped")
        return None
    ratio = male / female
    try:
        log_se = jackknife_log_se(totals)
    except InsufficientClustersError:
        log_se = delta_log_se(ratio, n_births)
    if log_se == 0:
        log_se = delta_log_se(ratio, n_births)
    return SrbObservation(region, period[0], period[1], ratio, log_se, n_births, source_id)


def _simulate_records(
    region: str,
    source_id: str,
    years: np.ndarray,
    theta: np.ndarray,
    design: SimulationDesign,
    rng: np.random.Generator,
) -> List[BirthRecord]:
    # Births spread evenly over the years of the period
    per_year = np.full(years.size, design.births_per_observation // years.size)
    per_year[:design.births_per_observation % years.size] += 1
    survey_year = int(years[-1])
    records = []
    for year, val, n_births in zip(years, theta, per_year):
        male = int(simulate_male_counts(val, n_births, rng))
        for sex, count in ((Sex.MALE, male), (Sex.FEMALE, n_births - male)):
            for cluster, num in enumerate(_split_clusters(count, design.clusters_per_observation, rng)):
                records.extend(
                    BirthRecord(region, int(year), f"C{cluster + 1}", "S1", 1., sex, source_id, survey_year)
                    for _ in range(num)
                )
    return records


def synthetic_tfr(truth: SimulationTruth, config: ModelConfig, slope: float = 0.1) -> List[TfrSeries]:
    """Linearly declining TFR series crossing the onset reference level at the true start year of each region

    Args:
        truth: true transitions
        config: model constants (estimation years and onset reference level)
        slope: yearly TFR decline

    Returns:
        one TFR series per region, covering the estimation years
    """

    series = []
    for region in sorted(truth.regions):
        gamma = truth.regions[region].gamma
        series.append(TfrSeries(region, {
            year: max(config.onset_reference_tfr - slope * (year - gamma), 0.5) for year in config.years
        }))
    return series
