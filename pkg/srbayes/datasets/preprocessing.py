# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import logging
from collections import defaultdict
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from srbayes.io.records import BirthRecord, SrbObservation
from srbayes.utils.repr import NestedObject

from .jackknife import delta_log_se, jackknife_pseudo_values

__all__ = [
    'YearlyTotals', 'PooledPeriod', 'PreprocessingReport', 'apply_recall_cutoff', 'aggregate_yearly',
    'pool_periods', 'merge_by_cv', 'build_observations', 'summarize_database',
]

ClusterKey = Tuple[str, str]


class YearlyTotals(NestedObject):
    """Weighted and unweighted birth totals of a region-source-year, decomposed by cluster

    Args:
        region_id: identifier of the subnational region
        source_id: survey or census identifier
        year: calendar year of the births
    """

    def __init__(self, region_id: str, source_id: str, year: int) -> None:
        self.region_id = region_id
        self.source_id = source_id
        self.year = year
        self.weighted_male = 0.
        self.weighted_female = 0.
        self.n_male = 0
        self.n_female = 0
        # (stratum_id, cluster_id) -> [weighted male, weighted female]
        self.clusters: Dict[ClusterKey, List[float]] = defaultdict(lambda: [0., 0.])

    def add(self, record: BirthRecord) -> None:
        cell = self.clusters[(record.stratum_id, record.cluster_id)]
        if record.is_male:
            self.weighted_male += record.weight
            self.n_male += 1
            cell[0] += record.weight
        else:
            self.weighted_female += record.weight
            self.n_female += 1
            cell[1] += record.weight

    @property
    def n_births(self) -> int:
        return self.n_male + self.n_female

    @property
    def is_defined(self) -> bool:
        """Whether the sex ratio of the year can be computed on its own"""
        return self.weighted_female > 0

    @property
    def ratio(self) -> float:
        return self.weighted_male / self.weighted_female if self.is_defined else float('nan')

    def extra_repr(self) -> str:
        return (f"region_id='{self.region_id}', source_id='{self.source_id}', year={self.year}, "
                f"weighted=({self.weighted_male:.1f}, {self.weighted_female:.1f})")


class PooledPeriod(NestedObject):
    """A run of adjacent years pooled into a single observation"""

    def __init__(self, years: Sequence[YearlyTotals]) -> None:
        if len(years) == 0:
            raise AssertionError("a pooled period needs at least one year")
        self.years = list(years)

    @property
    def region_id(self) -> str:
        return self.years[0].region_id

    @property
    def source_id(self) -> str:
        return self.years[0].source_id

    @property
    def period_start(self) -> int:
        return self.years[0].year

    @property
    def period_end(self) -> int:
        return self.years[-1].year

    @property
    def weighted_male(self) -> float:
        return sum(y.weighted_male for y in self.years)

    @property
    def weighted_female(self) -> float:
        return sum(y.weighted_female for y in self.years)

    @property
    def n_births(self) -> int:
        return sum(y.n_births for y in self.years)

    @property
    def ratio(self) -> float:
        female = self.weighted_female
        return self.weighted_male / female if female > 0 else float('nan')

    @property
    def cv(self) -> float:
        """Approximate coefficient of variation of the pooled ratio"""
        ratio = self.ratio
        if not ratio > 0:
            return float('inf')
        return delta_log_se(ratio, self.n_births)

    def cluster_totals(self) -> np.ndarray:
        pooled: Dict[ClusterKey, List[float]] = defaultdict(lambda: [0., 0.])
        for totals in self.years:
            for key, (male, female) in totals.clusters.items():
                pooled[key][0] += male
                pooled[key][1] += female
        return np.asarray([pooled[key] for key in sorted(pooled)], dtype=np.float64).reshape(-1, 2)

    def extend(self, other: 'PooledPeriod') -> 'PooledPeriod':
        return PooledPeriod(self.years + other.years)

    def extra_repr(self) -> str:
        return (f"region_id='{self.region_id}', source_id='{self.source_id}', "
                f"period=({self.period_start}, {self.period_end}), cv={self.cv:.4f}")


class PreprocessingReport(NestedObject):
    """Bookkeeping of what the preprocessing pipeline did to the birth records"""

    def __init__(self) -> None:
        self.n_records = 0
        self.n_excluded = 0
        self.merges: List[Dict[str, Any]] = []
        self.continuity_corrections: List[Dict[str, Any]] = []
        self.skipped: List[Dict[str, Any]] = []

    def export(self) -> Dict[str, Any]:
        return {
            "n_records": self.n_records,
            "n_excluded": self.n_excluded,
            "merges": self.merges,
            "continuity_corrections": self.continuity_corrections,
            "skipped": self.skipped,
        }

    def extra_repr(self) -> str:
        return (f"n_records={self.n_records}, n_excluded={self.n_excluded}, merges={len(self.merges)}, "
                f"skipped={len(self.skipped)}")


def apply_recall_cutoff(records: Iterable[BirthRecord], max_recall_years: int = 25) -> List[BirthRecord]:
    """Drop births that happened more than `max_recall_years` years before the collection year"""

    if max_recall_years <= 0:
        raise ValueError(f"max_recall_years must be positive, got {max_recall_years}")
    return [record for record in records if record.survey_year - record.year <= max_recall_years]


def aggregate_yearly(records: Iterable[BirthRecord]) -> Dict[Tuple[str, str, int], YearlyTotals]:
    """Aggregate birth records into weighted totals per region, source and calendar year

    Args:
        records: birth records, typically after the recall cutoff

    Returns:
        a dictionary mapping (region_id, source_id, year) to its totals, in sorted key order
    """

    totals: Dict[Tuple[str, str, int], YearlyTotals] = {}
    for record in records:
        key = (record.region_id, record.source_id, record.year)
        if key not in totals:
            totals[key] = YearlyTotals(*key)
        totals[key].add(record)
    if len(totals) == 0:
        raise ValueError("no birth records left to aggregate")

    for key, year_totals in totals.items():
        if not year_totals.is_defined:
            logging.info(f"no female births in {key}: the year will only be used pooled with its neighbours")
    return dict(sorted(totals.items()))


def pool_periods(yearly: Sequence[YearlyTotals], cv_threshold: float) -> List[PooledPeriod]:
    """Greedily pool adjacent years, oldest first, until the pooled CV meets the threshold

    Args:
        yearly: totals of a single region-source
        cv_threshold: maximum coefficient of variation of a period

    Returns:
        the pooled periods, the last one possibly above the threshold
    """

    if not cv_threshold > 0:
        raise ValueError(f"cv_threshold must be positive, got {cv_threshold}")
    yearly = sorted(yearly, key=lambda t: t.year)
    if len({(t.region_id, t.source_id) for t in yearly}) > 1:
        raise AssertionError("pooling expects the totals of a single region-source")
    periods: List[PooledPeriod] = []
    current: List[YearlyTotals] = []
    for totals in yearly:
        current.append(totals)
        if PooledPeriod(current).cv <= cv_threshold:
            periods.append(PooledPeriod(current))
            current = []
    if current:
        periods.append(PooledPeriod(current))
    return periods


def _num_usable_clusters(period: PooledPeriod) -> int:
    return int(np.count_nonzero(period.cluster_totals()[:, 1] > 0))


def _is_resamplable(period: PooledPeriod) -> bool:
    return period.ratio > 0 and _num_usable_clusters(period) >= 2


def _resample(period: PooledPeriod) -> Tuple[float, int]:
    pseudo, num_corrections = jackknife_pseudo_values(period.cluster_totals())
    k = pseudo.shape[0]
    return float(np.sqrt(np.sum((pseudo - pseudo.mean()) ** 2) / (k * (k - 1)))), num_corrections


def merge_by_cv(
    yearly: Sequence[YearlyTotals],
    cv_threshold: float = 0.05,
    report: Optional[PreprocessingReport] = None,
) -> List[SrbObservation]:
    """Turn the yearly totals of a region-source into observations with jackknife sampling errors

    Example::
        >>> from srbayes.datasets import aggregate_yearly, merge_by_cv
        >>> totals = aggregate_yearly(records)
        >>> observations = merge_by_cv([t for k, t in totals.items() if k[:2] == ("P5", "NDHS2011")])

    Args:
        yearly: totals of a single region-source
        cv_threshold: maximum coefficient of variation of a period
        report: if specified, merges, continuity corrections and skipped periods are recorded in it

    Returns:
        the observations, in chronological order
    """

    report = report if isinstance(report, PreprocessingReport) else PreprocessingReport()
    periods = pool_periods(yearly, cv_threshold)
    if len(periods) == 0:
        return []
    if not sum(p.weighted_female for p in periods) > 0:
        logging.warning(f"no female births for region '{periods[0].region_id}' in source '{periods[0].source_id}': "
                        "no observation emitted")
        report.skipped.append({
            "region_id": periods[0].region_id, "source_id": periods[0].source_id,
            "period": [periods[0].period_start, periods[-1].period_end], "reason": "no female births",
        })
        return []

    # Periods without male births or without 2 usable clusters are merged: forward, then backward for the trailing one
    resamplable: List[PooledPeriod] = []
    carry: Optional[PooledPeriod] = None
    for period in periods:
        period = carry.extend(period) if carry is not None else period
        if not _is_resamplable(period):
            carry = period
            continue
        resamplable.append(period)
        carry = None
    if carry is not None:
        if resamplable:
            resamplable[-1] = resamplable[-1].extend(carry)
        else:
            reason = "no male births" if not carry.weighted_male > 0 else "fewer than 2 usable clusters"
            logging.warning(f"region '{carry.region_id}' ({carry.source_id}), period {carry.period_start}-"
                            f"{carry.period_end}: {reason}, no observation emitted")
            report.skipped.append({
                "region_id": carry.region_id, "source_id": carry.source_id,
                "period": [carry.period_start, carry.period_end], "reason": reason,
            })

    observations: List[SrbObservation] = []
    for period in resamplable:
        ratio = period.ratio
        log_se, num_corrections = _resample(period)
        if num_corrections > 0:
            logging.warning(f"continuity correction applied to {num_corrections} leave-one-out ratio(s) for "
                            f"region '{period.region_id}' ({period.source_id}), "
                            f"period {period.period_start}-{period.period_end}")
            report.continuity_corrections.append({
                "region_id": period.region_id, "source_id": period.source_id,
                "period": [period.period_start, period.period_end], "count": num_corrections,
            })
        if not log_se > 0:
            # Clusters with identical ratios carry no dispersion
            log_se = delta_log_se(ratio, period.n_births)
            logging.warning(f"zero jackknife dispersion for region '{period.region_id}' ({period.source_id}), "
                            f"period {period.period_start}-{period.period_end}: using the delta-method error")
        if len(period.years) > 1:
            report.merges.append({
                "region_id": period.region_id, "source_id": period.source_id,
                "period": [period.period_start, period.period_end],
                "years": [t.year for t in period.years], "cv": period.cv,
            })
        observations.append(SrbObservation(
            region_id=period.region_id,
            period_start=period.period_start,
            period_end=period.period_end,
            ratio=ratio,
            log_se=log_se,
            n_births=period.n_births,
            source_id=period.source_id,
        ))

    return observations


def build_observations(
    records: Sequence[BirthRecord],
    cv_threshold: float = 0.05,
    max_recall_years: int = 25,
) -> Tuple[List[SrbObservation], PreprocessingReport]:
    """Run the full preprocessing pipeline: recall cutoff, yearly aggregation, pooling and jackknife

    Args:
        records: birth records, as parsed from the births CSV
        cv_threshold: maximum coefficient of variation of a period
        max_recall_years: maximum gap between the birth year and the collection year

    Returns:
        a tuple with the observations (sorted by region, source and period) and the preprocessing report
    """

    report = PreprocessingReport()
    report.n_records = len(records)
    kept = apply_recall_cutoff(records, max_recall_years)
    report.n_excluded = len(records) - len(kept)
    if report.n_excluded > 0:
        logging.info(f"{report.n_excluded} record(s) excluded by the {max_recall_years}-year recall cutoff")

    groups: Dict[Tuple[str, str], List[YearlyTotals]] = defaultdict(list)
    for (region, source, _), totals in aggregate_yearly(kept).items():
        groups[(region, source)].append(totals)

    observations: List[SrbObservation] = []
    for key in sorted(groups):
        observations.extend(merge_by_cv(groups[key], cv_threshold, report))
    return observations, report


def summarize_database(observations: Iterable[SrbObservation]) -> List[Dict[str, Any]]:
    """Summarize an observation database by source, with a trailing total row"""

    by_source: Dict[str, List[SrbObservation]] = defaultdict(list)
    for obs in observations:
        by_source[obs.source_id].append(obs)

    def _row(source: str, group: List[SrbObservation]) -> Dict[str, Any]:
        return {
            "source_id": source,
            "n_observations": len(group),
            "n_births": sum(obs.n_births for obs in group),
            "first_reference_year": min(obs.reference_year for obs in group),
            "last_reference_year": max(obs.reference_year for obs in group),
        }

    rows = [_row(source, group) for source, group in sorted(by_source.items())]
    if rows:
        rows.append(_row("total", [obs for group in by_source.values() for obs in group]))
    return rows
