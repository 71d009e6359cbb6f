# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import csv
import logging
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from .records import BirthRecord, Sex, SrbObservation, TfrSeries

__all__ = [
    'SchemaError', 'RowError', 'BIRTHS_COLUMNS', 'TFR_COLUMNS', 'OBSERVATION_COLUMNS',
    'parse_birth_records', 'load_tfr', 'read_observations', 'write_observations', 'write_table',
    'write_birth_records', 'write_tfr',
]

BIRTHS_COLUMNS = ["region_id", "year", "cluster_id", "stratum_id", "weight", "sex", "source_id", "survey_year"]
TFR_COLUMNS = ["region_id", "year", "tfr"]
OBSERVATION_COLUMNS = SrbObservation._exported_keys

PathLike = Union[str, Path]


class SchemaError(ValueError):
    """Raised when a CSV file does not expose the expected columns"""


class RowError(ValueError):
    """Raised when a CSV row cannot be converted, with its 1-based line number"""

    def __init__(self, path: PathLike, line: int, msg: str) -> None:
        super().__init__(f"{path}, line {line}: {msg}")
        self.path = str(path)
        self.line = line


def _open_table(path: PathLike, columns: Sequence[str], delimiter: str = ','):
    if not Path(path).is_file():
        raise FileNotFoundError(f"unable to locate {path}")
    f = open(path, newline='', encoding='utf-8')
    reader = csv.DictReader(f, delimiter=delimiter)
    header = reader.fieldnames or []
    missing = [col for col in columns if col not in header]
    if missing:
        f.close()
        raise SchemaError(f"{path}: missing required column(s) {', '.join(missing)}")
    return f, reader


def _cast(path: PathLike, line: int, row: Dict[str, str], key: str, fn: Any) -> Any:
    raw = (row.get(key) or '').strip()
    if raw == '':
        raise RowError(path, line, f"empty value for column '{key}'")
    try:
        return fn(raw)
    except ValueError:
        raise RowError(path, line, f"invalid value '{raw}' for column '{key}'")


def parse_birth_records(path: PathLike, delimiter: str = ',') -> List[BirthRecord]:
    """Read a births CSV file into records

    Example::
        >>> from srbayes.io import parse_birth_records
        >>> records = parse_birth_records("path/to/births.csv")

    Args:
        path: path to the CSV file, with header `region_id,year,cluster_id,stratum_id,weight,sex,source_id,survey_year`
        delimiter: field separator

    Returns:
        one record per data row
    """

    f, reader = _open_table(path, BIRTHS_COLUMNS, delimiter)
    records: List[BirthRecord] = []
    with f:
        for row in reader:
            line = reader.line_num
            weight = _cast(path, line, row, "weight", float)
            if not weight > 0:
                raise RowError(path, line, f"weight must be positive, got {weight}")
            sex = (row.get("sex") or '').strip().upper()
            if sex not in {s.value for s in Sex}:
                raise RowError(path, line, f"unknown sex code '{row.get('sex')}' (expected M or F)")
            try:
                records.append(BirthRecord(
                    region_id=_cast(path, line, row, "region_id", str),
                    year=_cast(path, line, row, "year", int),
                    cluster_id=_cast(path, line, row, "cluster_id", str),
                    stratum_id=_cast(path, line, row, "stratum_id", str),
                    weight=weight,
                    sex=sex,
                    source_id=_cast(path, line, row, "source_id", str),
                    survey_year=_cast(path, line, row, "survey_year", int),
                ))
            except RowError:
                raise
            except ValueError as e:
                raise RowError(path, line, str(e))

    logging.info(f"Parsed {len(records)} birth records from {path}")
    return records


def load_tfr(
    path: PathLike,
    start_year: Optional[int] = None,
    end_year: Optional[int] = None,
) -> List[TfrSeries]:
    """Read a TFR CSV file into one series per region

    Args:
        path: path to the CSV file, with header `region_id,year,tfr`
        start_year: if specified, every series must start on or before this year
        end_year: if specified, every series must end on or after this year

    Returns:
        the series, sorted by region identifier
    """

    f, reader = _open_table(path, TFR_COLUMNS)
    values: Dict[str, Dict[int, float]] = defaultdict(dict)
    with f:
        for row in reader:
            line = reader.line_num
            region = _cast(path, line, row, "region_id", str)
            year = _cast(path, line, row, "year", int)
            tfr = _cast(path, line, row, "tfr", float)
            if not tfr > 0:
                raise RowError(path, line, f"tfr must be positive, got {tfr}")
            if year in values[region]:
                raise RowError(path, line, f"duplicate year {year} for region '{region}'")
            values[region][year] = tfr

    series = [TfrSeries(region, vals) for region, vals in sorted(values.items())]
    for tfr in series:
        if start_year is not None and tfr.start_year > start_year:
            raise ValueError(f"TFR series for region '{tfr.region_id}' has a gap: missing year {start_year}")
        if end_year is not None and tfr.end_year < end_year:
            raise ValueError(f"TFR series for region '{tfr.region_id}' has a gap: missing year {end_year}")
    return series


def read_observations(path: PathLike) -> List[SrbObservation]:
    """Read an observations CSV file, as written by `write_observations`"""

    f, reader = _open_table(path, OBSERVATION_COLUMNS)
    observations: List[SrbObservation] = []
    with f:
        for row in reader:
            line = reader.line_num
            try:
                observations.append(SrbObservation(
                    region_id=_cast(path, line, row, "region_id", str),
                    period_start=_cast(path, line, row, "period_start", int),
                    period_end=_cast(path, line, row, "period_end", int),
                    ratio=_cast(path, line, row, "ratio", float),
                    log_se=_cast(path, line, row, "log_se", float),
                    n_births=_cast(path, line, row, "n_births", int),
                    source_id=_cast(path, line, row, "source_id", str),
                    reference_year=_cast(path, line, row, "reference_year", float),
                ))
            except RowError:
                raise
            except ValueError as e:
                raise RowError(path, line, str(e))
    return observations


def write_table(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write rows to a comma-separated file with a header line"""

    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(val)) if isinstance(val, float) else val for val in row])


def write_observations(observations: Iterable[SrbObservation], path: PathLike) -> None:
    """Write observations to a re-ingestible CSV file"""

    write_table(path, OBSERVATION_COLUMNS, ([obs.export()[k] for k in OBSERVATION_COLUMNS] for obs in observations))


def write_birth_records(records: Iterable[BirthRecord], path: PathLike) -> None:
    """Write birth records to a CSV file readable by `parse_birth_records`"""

    write_table(path, BIRTHS_COLUMNS, (
        [rec.sex.value if k == "sex" else getattr(rec, k) for k in BIRTHS_COLUMNS] for rec in records
    ))


def write_tfr(series: Iterable[TfrSeries], path: PathLike) -> None:
    """Write TFR series to a CSV file readable by `load_tfr`"""

    exported = (tfr.export() for tfr in series)
    write_table(path, TFR_COLUMNS, (
        [item["region_id"], year, val] for item in exported for year, val in item["values"].items()
    ))
