# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Sequence, Union

import matplotlib.pyplot as plt

from srbayes.io.records import SrbObservation

if TYPE_CHECKING:
    from srbayes.projection.projection import ProjectionSummary

__all__ = ['plot_trajectories']


def plot_trajectories(
    summary: 'ProjectionSummary',
    baseline: float,
    out_dir: Union[str, Path],
    observations: Optional[Sequence[SrbObservation]] = None,
    dpi: int = 100,
) -> List[Path]:
    """Fan chart of the sex ratio of each region: median, 95% band, baseline and optional observations

    Example::
        >>> from srbayes.utils.visualization import plot_trajectories
        >>> paths = plot_trajectories(summary, 1.049, "plots")

    Args:
        summary: projection summary (regions, years, median, lower, upper, num_estimated, peaks)
        baseline: national baseline, drawn as a horizontal line
        out_dir: folder where to write one PNG per region
        observations: sex ratio observations to overlay at their reference year
        dpi: resolution of the figures

    Returns:
        the paths of the written figures
    """

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for r, region in enumerate(summary.regions):
        fig, ax = plt.subplots(figsize=(8, 5))
        ax.fill_between(summary.years, summary.lower[r], summary.upper[r], alpha=0.25, label="95% credible interval")
        ax.plot(summary.years, summary.median[r], label="Median")
        ax.axhline(baseline, color='0.4', linestyle='--', linewidth=1, label="Baseline")
        if summary.num_estimated < len(summary.years):
            # Estimation / projection boundary
            ax.axvline(summary.years[summary.num_estimated - 1], color='0.7', linestyle=':', linewidth=1)
        if observations is not None:
            pts = [(obs.reference_year, obs.ratio) for obs in observations if obs.region_id == region]
            if pts:
                ax.scatter(*zip(*pts), s=12, color='k', label="Observations")
        peak = summary.peaks.get(region)
        if peak is not None:
            ax.annotate(str(peak["peak_year"]), (peak["peak_year"], peak["median"]), textcoords="offset points",
                        xytext=(0, 8), ha='center')
        ax.set_title(f"Sex ratio at birth - {region}")
        ax.set_xlabel("Year")
        ax.set_ylabel("SRB")
        ax.grid(True, linestyle='--', alpha=0.5)
        ax.legend(loc="upper left")
        fig.tight_layout()
        path = out_dir.joinpath(f"srb_{region}.png")
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        paths.append(path)
    return paths
