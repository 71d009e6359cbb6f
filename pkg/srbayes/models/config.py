# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from pathlib import Path
from typing import Dict, Optional, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

__all__ = ['SHAPE_NAMES', 'ShapeHyperprior', 'ModelConfig', 'McmcSettings', 'load_json_config']

# Positive transition shape parameters, modelled on the log scale
SHAPE_NAMES = ("lambda1", "lambda2", "lambda3", "xi")

T = TypeVar("T", bound=BaseModel)


class ShapeHyperprior(BaseModel):
    """Hierarchical prior of a positive transition shape parameter

    The region-specific value follows log(value) ~ N(mu, tau^2), with mu ~ N(log(mean), mean_sd^2)
    and log(tau) ~ N(log(sd), sd_log_sd^2).
    """

    model_config = ConfigDict(extra='forbid', frozen=True)

    mean: float = Field(gt=0)
    sd: float = Field(0.3, gt=0)
    mean_sd: float = Field(0.1, gt=0)
    sd_log_sd: float = Field(0.2, gt=0)


def _default_hyperpriors() -> Dict[str, ShapeHyperprior]:
    return {
        "lambda1": ShapeHyperprior(mean=12.),
        "lambda2": ShapeHyperprior(mean=6.),
        "lambda3": ShapeHyperprior(mean=12.),
        "xi": ShapeHyperprior(mean=0.06),
    }


class ModelConfig(BaseModel):
    """Fixed constants and prior hyperparameters of the sex ratio model

    Example::
        >>> from srbayes.models import ModelConfig
        >>> config = ModelConfig(year_range=(1980, 2016), projection_end=2050)
        >>> config.stationary_sd

    Args:
        baseline_b: national SRB baseline
        ar1_rho: autocorrelation of the log-scale natural fluctuation
        ar1_sd: innovation standard deviation of the log-scale natural fluctuation
        inflation_prior_a: first shape of the Beta prior on the inflation probability
        inflation_prior_b: second shape of the Beta prior on the inflation probability
        start_year_scale: scale of the Student-t(3) prior on the transition start year
        onset_reference_tfr: TFR level anchoring the prior mean of the start year
        shape_hyperpriors: hierarchical priors of lambda1, lambda2, lambda3 and xi
        year_range: first and last estimation years
        projection_end: last projection year
        cv_threshold: coefficient of variation below which a period of births stops being pooled with the next year
        max_recall_years: largest gap between the survey year and the birth year of a kept record
    """

    model_config = ConfigDict(extra='forbid', frozen=True)

    baseline_b: float = Field(1.049, gt=0)
    ar1_rho: float = Field(0.9, gt=0, lt=1)
    ar1_sd: float = Field(0.0041, ge=0)
    inflation_prior_a: float = Field(1., gt=0)
    inflation_prior_b: float = Field(1., gt=0)
    start_year_scale: float = Field(8., gt=0)
    onset_reference_tfr: float = Field(3.5, gt=0)
    shape_hyperpriors: Dict[str, ShapeHyperprior] = Field(default_factory=_default_hyperpriors)
    year_range: Tuple[int, int] = (1980, 2016)
    projection_end: int = 2050
    cv_threshold: float = Field(0.05, gt=0)
    max_recall_years: int = Field(25, gt=0)

    @field_validator("shape_hyperpriors")
    @classmethod
    def _check_shapes(cls, value: Dict[str, ShapeHyperprior]) -> Dict[str, ShapeHyperprior]:
        defaults = _default_hyperpriors()
        unknown = sorted(set(value).difference(SHAPE_NAMES))
        if unknown:
            raise ValueError(f"unknown transition shape parameter(s): {', '.join(unknown)}")
        # Partial overrides keep the remaining defaults
        return {name: value.get(name, defaults[name]) for name in SHAPE_NAMES}

    @model_validator(mode='after')
    def _check_years(self) -> 'ModelConfig':
        start, end = self.year_range
        if not start < end < self.projection_end:
            raise ValueError(
                f"expected year_range.start < year_range.end < projection_end, got {start}, {end}, {self.projection_end}"
            )
        return self

    @property
    def years(self) -> Tuple[int, ...]:
        return tuple(range(self.year_range[0], self.year_range[1] + 1))

    @property
    def stationary_sd(self) -> float:
        """Stationary standard deviation of the log-scale natural fluctuation"""
        return self.ar1_sd / (1 - self.ar1_rho ** 2) ** 0.5


class McmcSettings(BaseModel):
    """Settings of the Metropolis-within-Gibbs sampler

    Args:
        n_chains: number of independent chains
        n_iterations: number of iterations per chain, burn-in included
        n_burnin: number of initial iterations discarded, during which proposal scales adapt
        thin: thinning interval of the retained iterations
        seed: base seed, chain c uses `seed + c`
        adapt_window: number of iterations between two proposal scale updates
        target_accept: target acceptance rate of scalar updates
        block_target_accept: target acceptance rate of block updates
    """

    model_config = ConfigDict(extra='forbid', frozen=True)

    n_chains: int = Field(4, gt=0)
    n_iterations: int = Field(20000, gt=0)
    n_burnin: int = Field(10000, ge=0)
    thin: int = Field(5, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 63)
    adapt_window: int = Field(50, gt=0)
    target_accept: float = Field(0.44, gt=0, lt=1)
    block_target_accept: float = Field(0.234, gt=0, lt=1)

    @model_validator(mode='after')
    def _check_burnin(self) -> 'McmcSettings':
        if self.n_burnin >= self.n_iterations:
            raise ValueError(f"n_burnin ({self.n_burnin}) must be lower than n_iterations ({self.n_iterations})")
        return self

    @property
    def n_retained(self) -> int:
        """Number of retained iterations per chain"""
        return (self.n_iterations - self.n_burnin) // self.thin


def load_json_config(cls: Type[T], path: Optional[Union[str, Path]] = None, **overrides) -> T:
    """Build a configuration object from an optional JSON file, with keyword overrides on top"""

    payload = {}
    if path is not None:
        if not Path(path).is_file():
            raise FileNotFoundError(f"unable to locate {path}")
        payload = cls.model_validate_json(Path(path).read_text(encoding='utf-8')).model_dump()
    payload.update({k: v for k, v in overrides.items() if v is not None})
    return cls.model_validate(payload)
