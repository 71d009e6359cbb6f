import logging

import numpy as np
import pytest

from srbayes import datasets
from srbayes.io import BirthRecord, parse_birth_records


def _records(region, source, year, male, female, weight=1., survey_year=2011, clusters=("C1", "C2")):
    records = []
    for idx in range(male):
        records.append(BirthRecord(region, year, clusters[idx % len(clusters)], "S1", weight, "M", source,
                                   survey_year))
    for idx in range(female):
        records.append(BirthRecord(region, year, clusters[idx % len(clusters)], "S1", weight, "F", source,
                                   survey_year))
    return records


@pytest.mark.parametrize(
    "year, survey_year, kept",
    [
        [1985, 2011, False],  # 26 years
        [1986, 2011, True],  # 25 years
        [2011, 2011, True],  # zero gap
    ],
)
def test_apply_recall_cutoff(year, survey_year, kept):
    record = BirthRecord("P1", year, "C1", "S1", 1., "M", "NDHS", survey_year)
    out = datasets.apply_recall_cutoff([record], 25)
    assert (len(out) == 1) == kept
    # Idempotence
    assert datasets.apply_recall_cutoff(out, 25) == out


def test_apply_recall_cutoff_edge_cases():
    assert datasets.apply_recall_cutoff([]) == []
    with pytest.raises(ValueError):
        datasets.apply_recall_cutoff([], 0)


@pytest.mark.parametrize(
    "records, weighted, ratio",
    [
        [_records("P1", "S", 2000, 2, 2), (2., 2.), 1.],
        [[BirthRecord("P1", 2000, "C1", "S1", 2., "M", "S", 2011),
          BirthRecord("P1", 2000, "C2", "S1", 1., "F", "S", 2011)], (2., 1.), 2.],
        [_records("P1", "S", 2000, 105, 100), (105., 100.), 1.05],
    ],
)
def test_aggregate_yearly(records, weighted, ratio):
    totals = datasets.aggregate_yearly(records)
    assert list(totals) == [("P1", "S", 2000)]
    year = totals[("P1", "S", 2000)]
    assert (year.weighted_male, year.weighted_female) == weighted
    assert year.ratio == pytest.approx(ratio, abs=1e-12)
    assert year.n_births == len(records)
    # Cluster decomposition adds up
    assert np.allclose(np.sum(list(year.clusters.values()), axis=0), weighted)


def test_aggregate_yearly_errors(caplog):
    with pytest.raises(ValueError):
        datasets.aggregate_yearly([])
    with caplog.at_level(logging.INFO):
        totals = datasets.aggregate_yearly(_records("P1", "S", 2000, 3, 0))
    assert not totals[("P1", "S", 2000)].is_defined
    assert np.isnan(totals[("P1", "S", 2000)].ratio)


def _yearly(counts, year0=2000):
    records = []
    for offset, (male, female) in enumerate(counts):
        records.extend(_records("P1", "S", year0 + offset, male, female, clusters=("C1", "C2", "C3", "C4")))
    return list(datasets.aggregate_yearly(records).values())


def test_pool_periods():
    # n=40,000 with r=1.05 stands alone: CV ~ 0.0100
    yearly = _yearly([(20488, 19512)])
    periods = datasets.pool_periods(yearly, 0.05)
    assert len(periods) == 1 and periods[0].cv == pytest.approx(0.0100, abs=1e-4)
    # Two years of n=200 with r=1: single-year CV ~ 0.141, pooled CV ~ 0.100
    yearly = _yearly([(100, 100), (100, 100)])
    periods = datasets.pool_periods(yearly, 0.05)
    assert len(periods) == 1 and (periods[0].period_start, periods[0].period_end) == (2000, 2001)
    assert periods[0].cv == pytest.approx(0.1, abs=1e-12)
    # Threshold that never binds
    periods = datasets.pool_periods(_yearly([(100, 100), (90, 100), (110, 100)]), 1e9)
    assert [(p.period_start, p.period_end) for p in periods] == [(2000, 2000), (2001, 2001), (2002, 2002)]
    with pytest.raises(ValueError):
        datasets.pool_periods(yearly, 0.)


def test_merge_by_cv():
    yearly = _yearly([(700, 650), (720, 700), (650, 640), (800, 760), (30, 25)])
    report = datasets.PreprocessingReport()
    observations = datasets.merge_by_cv(yearly, 0.05, report)
    # Births are conserved
    assert sum(obs.n_births for obs in observations) == sum(t.n_births for t in yearly)
    # Periods are contiguous and chronological
    assert observations[0].period_start == 2000 and observations[-1].period_end == 2004
    for prev, nxt in zip(observations[:-1], observations[1:]):
        assert nxt.period_start == prev.period_end + 1
    # The pooled ratio is the ratio of summed weighted totals
    for obs in observations:
        years = [t for t in yearly if obs.period_start <= t.year <= obs.period_end]
        assert obs.ratio == sum(t.weighted_male for t in years) / sum(t.weighted_female for t in years)
        assert obs.log_se > 0
    assert len(report.merges) == sum(obs.period_end > obs.period_start for obs in observations)


def test_merge_by_cv_no_female(caplog):
    report = datasets.PreprocessingReport()
    with caplog.at_level(logging.WARNING):
        observations = datasets.merge_by_cv(_yearly([(10, 0), (12, 0)]), 0.05, report)
    assert observations == []
    assert "no female births" in caplog.text
    assert len(report.skipped) == 1


def test_merge_by_cv_no_male_trailing_year():
    # A trailing year with female births only is folded into the previous period
    yearly = _yearly([(2100, 2000), (0, 3)], year0=2009)
    report = datasets.PreprocessingReport()
    observations = datasets.merge_by_cv(yearly, 0.05, report)
    assert sum(obs.n_births for obs in observations) == 4103
    assert [(obs.period_start, obs.period_end) for obs in observations] == [(2009, 2010)]
    assert observations[0].ratio == 2100 / 2003
    assert report.skipped == []
    # Leading year: folded into the next one
    observations = datasets.merge_by_cv(_yearly([(0, 3), (2100, 2000)], year0=2009), 0.05)
    assert [(obs.period_start, obs.period_end, obs.n_births) for obs in observations] == [(2009, 2010, 4103)]


def test_merge_by_cv_no_male(caplog):
    report = datasets.PreprocessingReport()
    with caplog.at_level(logging.WARNING):
        observations = datasets.merge_by_cv(_yearly([(0, 10), (0, 12)]), 0.05, report)
    assert observations == []
    assert "no male births" in caplog.text
    assert [entry["reason"] for entry in report.skipped] == ["no male births"]


def test_merge_by_cv_single_cluster():
    # A period whose female births all sit in one cluster is merged with the next one
    records = _records("P1", "S", 2000, 2000, 2000, clusters=("C1",))
    records += _records("P1", "S", 2001, 2000, 2000, clusters=("C1", "C2", "C3"))
    yearly = list(datasets.aggregate_yearly(records).values())
    observations = datasets.merge_by_cv(yearly, 0.05)
    assert len(observations) == 1
    assert (observations[0].period_start, observations[0].period_end) == (2000, 2001)


def test_build_observations(mock_births):
    records = parse_birth_records(mock_births)
    observations, report = datasets.build_observations(records, 0.05, 25)
    assert report.n_records == len(records)
    assert report.n_excluded == 1
    assert {obs.region_id for obs in observations} == {"P1", "P2"}
    assert sum(obs.n_births for obs in observations) == len(records) - 1
    assert all(1995 <= obs.period_start <= obs.period_end <= 2009 for obs in observations)
    assert len(report.merges) > 0
    exported = report.export()
    assert set(exported) == {"n_records", "n_excluded", "merges", "continuity_corrections", "skipped"}

    rows = datasets.summarize_database(observations)
    assert rows[-1]["source_id"] == "total"
    assert rows[-1]["n_observations"] == len(observations)
    assert rows[-1]["n_births"] == len(records) - 1
