# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from enum import Enum
from typing import Any, Dict, List, Mapping, Union

import numpy as np

from srbayes.utils.repr import NestedObject

__all__ = ['Sex', 'Record', 'BirthRecord', 'SrbObservation', 'TfrSeries']


class Sex(str, Enum):
    """Sex of a sampled birth, coded as in the births CSV"""

    MALE = 'M'
    FEMALE = 'F'


class Record(NestedObject):
    """Implements an abstract flat record with exporting capabilities"""

    _exported_keys: List[str] = []

    def export(self) -> Dict[str, Any]:
        """Exports the object into a flat dict format"""

        return {k: getattr(self, k) for k in self._exported_keys}

    @classmethod
    def from_dict(cls, save_dict: Dict[str, Any], **kwargs):
        kwargs = {k: save_dict[k] for k in cls._exported_keys}
        return cls(**kwargs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, self.__class__):
            return NotImplemented
        return self.export() == other.export()


class BirthRecord(Record):
    """Implements a single sampled birth

    Args:
        region_id: identifier of the subnational region
        year: calendar year of the birth
        cluster_id: primary sampling unit
        stratum_id: sampling stratum
        weight: design weight of the birth
        sex: sex of the newborn
        source_id: survey or census the record was collected in
        survey_year: calendar year of collection
    """

    _exported_keys: List[str] = [
        "region_id", "year", "cluster_id", "stratum_id", "weight", "sex", "source_id", "survey_year"
    ]

    def __init__(
        self,
        region_id: str,
        year: int,
        cluster_id: str,
        stratum_id: str,
        weight: float,
        sex: Union[Sex, str],
        source_id: str,
        survey_year: int,
    ) -> None:
        if weight < 0:
            raise ValueError(f"weight must be nonnegative, got {weight}")
        if year > survey_year:
            raise ValueError(f"birth year {year} is posterior to the survey year {survey_year}")
        self.region_id = region_id
        self.year = int(year)
        self.cluster_id = cluster_id
        self.stratum_id = stratum_id
        self.weight = float(weight)
        self.sex = Sex(sex)
        self.source_id = source_id
        self.survey_year = int(survey_year)

    @property
    def is_male(self) -> bool:
        return self.sex is Sex.MALE

    def extra_repr(self) -> str:
        return f"region_id='{self.region_id}', year={self.year}, sex='{self.sex.value}', weight={self.weight}"


class SrbObservation(Record):
    """Implements an observed sex ratio at birth for a region-period

    Args:
        region_id: identifier of the subnational region
        period_start: first calendar year of the period
        period_end: last calendar year of the period (inclusive)
        ratio: male births over female births
        log_se: standard error of the log ratio
        n_births: unweighted number of births behind the ratio
        source_id: survey or census the observation comes from
    """

    _exported_keys: List[str] = [
        "region_id", "period_start", "period_end", "ratio", "log_se", "n_births", "source_id", "reference_year"
    ]

    def __init__(
        self,
        region_id: str,
        period_start: int,
        period_end: int,
        ratio: float,
        log_se: float,
        n_births: int,
        source_id: str,
        reference_year: Union[float, None] = None,
    ) -> None:
        if period_start > period_end:
            raise ValueError(f"period_start ({period_start}) is posterior to period_end ({period_end})")
        if not ratio > 0:
            raise ValueError(f"ratio must be positive, got {ratio}")
        if not log_se > 0:
            raise ValueError(f"log_se must be positive, got {log_se}")
        if n_births < 1:
            raise ValueError(f"n_births must be positive, got {n_births}")
        self.region_id = region_id
        self.period_start = int(period_start)
        self.period_end = int(period_end)
        self.ratio = float(ratio)
        self.log_se = float(log_se)
        self.n_births = int(n_births)
        self.source_id = source_id
        midpoint = (self.period_start + self.period_end) / 2
        if reference_year is not None and abs(float(reference_year) - midpoint) > 1e-9:
            raise ValueError(f"reference_year {reference_year} differs from the period midpoint {midpoint}")
        self.reference_year = midpoint

    @property
    def years(self) -> List[int]:
        return list(range(self.period_start, self.period_end + 1))

    def extra_repr(self) -> str:
        return (f"region_id='{self.region_id}', period=({self.period_start}, {self.period_end}), "
                f"ratio={self.ratio:.4f}, log_se={self.log_se:.4f}")


class TfrSeries(NestedObject):
    """Total fertility rate of a region over a contiguous range of calendar years

    Example::
        >>> from srbayes.io import TfrSeries
        >>> tfr = TfrSeries("P5", {2000: 4.5, 2001: 4.4, 2002: 4.2})
        >>> tfr.tfr_at(2001)

    Args:
        region_id: identifier of the subnational region
        values: mapping from calendar year to TFR (children per woman)
    """

    def __init__(self, region_id: str, values: Mapping[int, float]) -> None:
        if len(values) == 0:
            raise ValueError(f"empty TFR series for region '{region_id}'")
        years = sorted(int(year) for year in values)
        expected = set(range(years[0], years[-1] + 1))
        missing = sorted(expected.difference(years))
        if missing:
            raise ValueError(f"TFR series for region '{region_id}' has a gap: missing year {missing[0]}")
        vals = np.asarray([values[year] for year in years], dtype=np.float64)
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            bad = years[int(np.argmax((vals <= 0) | ~np.isfinite(vals)))]
            raise ValueError(f"TFR for region '{region_id}' must be positive, got {values[bad]} in {bad}")
        self.region_id = region_id
        self.start_year = years[0]
        self.values = vals

    @property
    def end_year(self) -> int:
        return self.start_year + len(self.values) - 1

    @property
    def years(self) -> np.ndarray:
        return np.arange(self.start_year, self.end_year + 1)

    def covers(self, start: int, end: int) -> bool:
        return self.start_year <= start and end <= self.end_year

    def tfr_at(self, year: float) -> float:
        """Look up the TFR of a (possibly fractional) calendar year, interpolating linearly"""

        if year < self.start_year or year > self.end_year:
            raise KeyError(f"year {year} is outside the TFR range {self.start_year}-{self.end_year} "
                           f"of region '{self.region_id}'")
        return float(np.interp(year, self.years, self.values))

    def export(self) -> Dict[str, Any]:
        return {"region_id": self.region_id, "values": {int(y): float(v) for y, v in zip(self.years, self.values)}}

    def extra_repr(self) -> str:
        return f"region_id='{self.region_id}', years=({self.start_year}, {self.end_year})"
