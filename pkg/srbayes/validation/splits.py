# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from collections import defaultdict
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence

from srbayes.io.records import SrbObservation

__all__ = ['MIN_SPLIT_OBSERVATIONS', 'OutOfSampleSplit', 'collection_years', 'split_out_of_sample']

MIN_SPLIT_OBSERVATIONS = 5


class OutOfSampleSplit(NamedTuple):
    training: List[SrbObservation]
    held_out: List[SrbObservation]

    def export(self) -> Dict[str, Any]:
        """Split manifest: counts and the held-out observations"""
        return dict(
            n_training=len(self.training),
            n_held_out=len(self.held_out),
            held_out=[obs.export() for obs in self.held_out],
        )


def collection_years(observations: Sequence[SrbObservation]) -> Dict[str, int]:
    """Collection year of each source, approximated by the last year its observations cover"""

    years: Dict[str, int] = defaultdict(lambda: -10 ** 9)
    for obs in observations:
        years[obs.source_id] = max(years[obs.source_id], obs.period_end)
    return dict(years)


def split_out_of_sample(
    observations: Sequence[SrbObservation],
    holdout_fraction: float = 0.2,
    source_years: Optional[Mapping[str, int]] = None,
) -> OutOfSampleSplit:
    """Hold out the most recently collected observations

    Observations are ordered by collection year of their source, then by reference year; the last
    round(n * holdout_fraction) are held out (halves round up). Ties keep the observations listed first in training.

    Example::
        >>> from srbayes.validation import split_out_of_sample
        >>> split = split_out_of_sample(observations, 0.2)
        >>> len(split.held_out)

    Args:
        observations: sex ratio observations
        holdout_fraction: share of the observations to hold out, in (0, 1)
        source_years: collection year of each source, see `collection_years` for the default

    Returns:
        the training and held-out observations
    """

    if not 0 < holdout_fraction < 1:
        raise ValueError(f"holdout fraction must be in (0, 1), got {holdout_fraction}")
    if len(observations) < MIN_SPLIT_OBSERVATIONS:
        raise ValueError(f"at least {MIN_SPLIT_OBSERVATIONS} observations are needed for an out-of-sample split, "
                         f"got {len(observations)}")
    years = dict(collection_years(observations))
    if source_years is not None:
        years.update(source_years)
    num_held = int(len(observations) * holdout_fraction + 0.5)
    if num_held == 0 or num_held == len(observations):
        raise ValueError(f"holdout fraction {holdout_fraction} leaves an empty training or held-out set "
                         f"out of {len(observations)} observations")
    # Stable sort: among ties, the observations listed last are held out
    ordered = sorted(observations, key=lambda obs: (years[obs.source_id], obs.reference_year))
    return OutOfSampleSplit(ordered[:-num_held], ordered[-num_held:])
