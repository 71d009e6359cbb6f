# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import csv
import json
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from srbayes.io.reader import write_table
from srbayes.models.config import SHAPE_NAMES, McmcSettings, ModelConfig
from srbayes.models.transition import trapezoid_ramp
from srbayes.utils.repr import NestedObject

__all__ = ['TRANSITION_NAMES', 'PosteriorDraws']

TRANSITION_NAMES = ("gamma",) + SHAPE_NAMES
_REGION_PARAMS = ("delta", "pi") + TRANSITION_NAMES
_SELECTOR = re.compile(r"^(?P<name>\w+)(?:\[(?P<args>[^\]]*)\])?$")


class PosteriorDraws(NestedObject):
    """Retained posterior draws of every chain

    Arrays share two leading dimensions: chain and retained draw.

    Example::
        >>> from srbayes.inference import PosteriorDraws
        >>> draws = PosteriorDraws.load("path/to/run")
        >>> draws.select("xi[P5]").shape

    Args:
        regions: modelled regions
        years: estimation years
        log_phi: log-scale fluctuations, of shape (C, S, R, T)
        delta: inflation indicators, of shape (C, S, R)
        pi: inflation probabilities, of shape (C, S, R)
        transition: transition shapes (gamma, lambda1, lambda2, lambda3, xi), of shape (C, S, R, 5)
        mu: hierarchy means of the log shape parameters, of shape (C, S, 4)
        tau: hierarchy standard deviations of the log shape parameters, of shape (C, S, 4)
        config: model constants the draws were obtained with
        settings: sampler settings
        iterations: iteration index of each retained draw, of shape (S,)
        acceptance: post burn-in acceptance rates per chain and block
        scales: proposal scales per chain, snapshotted at the end of the burn-in and of the run
        chain_ids: index of each chain in the run it comes from, of shape (C,)
    """

    def __init__(
        self,
        regions: Sequence[str],
        years: Sequence[int],
        log_phi: np.ndarray,
        delta: np.ndarray,
        pi: np.ndarray,
        transition: np.ndarray,
        mu: np.ndarray,
        tau: np.ndarray,
        config: ModelConfig,
        settings: McmcSettings,
        iterations: Optional[np.ndarray] = None,
        acceptance: Optional[List[Dict[str, Any]]] = None,
        scales: Optional[List[Dict[str, Any]]] = None,
        chain_ids: Optional[np.ndarray] = None,
    ) -> None:
        self.regions = list(regions)
        self.years = np.asarray(years, dtype=np.int64)
        self.log_phi = np.asarray(log_phi, dtype=np.float64)
        self.delta = np.asarray(delta, dtype=np.int64)
        self.pi = np.asarray(pi, dtype=np.float64)
        self.transition = np.asarray(transition, dtype=np.float64)
        self.mu = np.asarray(mu, dtype=np.float64)
        self.tau = np.asarray(tau, dtype=np.float64)
        self.config = config
        self.settings = settings
        num_chains, num_draws = self.delta.shape[:2]
        self.iterations = np.arange(num_draws) if iterations is None else np.asarray(iterations, dtype=np.int64)
        self.acceptance = acceptance or []
        self.scales = scales or []
        self.chain_ids = np.arange(num_chains) if chain_ids is None else np.asarray(chain_ids, dtype=np.int64)
        if self.log_phi.shape != (num_chains, num_draws, len(self.regions), len(self.years)):
            raise AssertionError(f"unexpected fluctuation draws shape {self.log_phi.shape}")
        if self.transition.shape != (num_chains, num_draws, len(self.regions), len(TRANSITION_NAMES)):
            raise AssertionError(f"unexpected transition draws shape {self.transition.shape}")
        if num_draws == 0:
            raise ValueError("no retained draw")

    @property
    def num_chains(self) -> int:
        return self.delta.shape[0]

    @property
    def num_draws(self) -> int:
        """Retained draws per chain"""
        return self.delta.shape[1]

    @property
    def seed(self) -> int:
        return self.settings.seed

    def region_index(self, region: str) -> int:
        if region not in self.regions:
            raise KeyError(f"unknown region '{region}'")
        return self.regions.index(region)

    def year_index(self, year: int) -> int:
        idx = np.flatnonzero(self.years == int(year))
        if idx.size == 0:
            raise KeyError(f"year {year} is outside the estimation years")
        return int(idx[0])

    def alpha(self) -> np.ndarray:
        """Inflation of every draw and region-year, of shape (C, S, R, T)"""
        tr = self.transition[..., None]
        return tr[..., 4, :] * trapezoid_ramp(self.years, tr[..., 0, :], tr[..., 1, :], tr[..., 2, :], tr[..., 3, :])

    def theta(self) -> np.ndarray:
        """Sex ratio of every draw and region-year, of shape (C, S, R, T)"""
        return self.config.baseline_b * np.exp(self.log_phi) + self.delta[..., None] * self.alpha()

    def select(self, selector: str) -> np.ndarray:
        """Draws of a scalar parameter, of shape (C, S)

        Args:
            selector: one of theta[region,year], log_phi[region,year], delta[region], pi[region], gamma[region],
                lambda1[region], lambda2[region], lambda3[region], xi[region], mu_<shape>, tau_<shape>

        Returns:
            the draws of each chain
        """

        match = _SELECTOR.match(selector.replace(" ", ""))
        if match is None:
            raise KeyError(f"invalid parameter selector '{selector}'")
        name, args = match.group("name"), match.group("args")
        if name in ("theta", "log_phi"):
            if args is None or args.count(",") != 1:
                raise KeyError(f"'{name}' expects a [region,year] selector")
            region, year = args.rsplit(",", 1)
            r_idx, y_idx = self.region_index(region), self.year_index(int(year))
            if name == "theta":
                tr = self.transition[:, :, r_idx]
                alpha = tr[..., 4] * trapezoid_ramp(self.years[y_idx], tr[..., 0], tr[..., 1], tr[..., 2], tr[..., 3])
                return (self.config.baseline_b * np.exp(self.log_phi[:, :, r_idx, y_idx])
                        + self.delta[:, :, r_idx] * alpha)
            return self.log_phi[:, :, r_idx, y_idx]
        if name in _REGION_PARAMS:
            if args is None:
                raise KeyError(f"'{name}' expects a [region] selector")
            r_idx = self.region_index(args)
            if name == "delta":
                return self.delta[:, :, r_idx].astype(np.float64)
            if name == "pi":
                return self.pi[:, :, r_idx]
            return self.transition[:, :, r_idx, TRANSITION_NAMES.index(name)]
        for prefix, arr in (("mu_", self.mu), ("tau_", self.tau)):
            if name.startswith(prefix) and name[len(prefix):] in SHAPE_NAMES and args is None:
                return arr[:, :, SHAPE_NAMES.index(name[len(prefix):])]
        raise KeyError(f"unknown parameter '{selector}'")

    def subset(self, chains: Optional[Sequence[int]] = None, draws: Optional[Sequence[int]] = None) -> 'PosteriorDraws':
        """Restrict the draws to some chains and retained draw indices"""
        c_idx = np.arange(self.num_chains) if chains is None else np.asarray(chains)
        s_idx = np.arange(self.num_draws) if draws is None else np.asarray(draws)
        pick = np.ix_(c_idx, s_idx)
        return PosteriorDraws(
            self.regions, self.years, self.log_phi[pick], self.delta[pick], self.pi[pick], self.transition[pick],
            self.mu[pick], self.tau[pick], self.config, self.settings, self.iterations[s_idx],
            [self.acceptance[c] for c in c_idx] if self.acceptance else None,
            [self.scales[c] for c in c_idx] if self.scales else None,
            self.chain_ids[c_idx],
        )

    # Persistence

    def _columns(self) -> List[str]:
        cols = ["chain", "iteration"]
        cols.extend(f"log_phi[{region},{year}]" for region in self.regions for year in self.years)
        cols.extend(f"{name}[{region}]" for name in _REGION_PARAMS for region in self.regions)
        cols.extend(f"{prefix}{name}" for prefix in ("mu_", "tau_") for name in SHAPE_NAMES)
        return cols

    def _flat(self) -> np.ndarray:
        num_chains, num_draws = self.num_chains, self.num_draws
        blocks = [
            np.broadcast_to(self.chain_ids[:, None, None], (num_chains, num_draws, 1)),
            np.broadcast_to(self.iterations[None, :, None], (num_chains, num_draws, 1)),
            self.log_phi.reshape(num_chains, num_draws, -1),
            self.delta,
            self.pi,
            np.moveaxis(self.transition, -1, 2).reshape(num_chains, num_draws, -1),
            self.mu,
            self.tau,
        ]
        return np.concatenate([b.astype(np.float64) for b in blocks], axis=-1).reshape(num_chains * num_draws, -1)

    def save(self, out_dir: Union[str, Path]) -> None:
        """Write draws.csv (one row per retained draw) and draws.json (metadata) to a folder"""

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_table(out_dir.joinpath("draws.csv"), self._columns(), self._flat().tolist())
        meta = dict(
            regions=self.regions,
            years=self.years.tolist(),
            seed=self.seed,
            num_chains=self.num_chains,
            num_draws=self.num_draws,
            settings=self.settings.model_dump(mode='json'),
            config=self.config.model_dump(mode='json'),
            acceptance=self.acceptance,
            scales=self.scales,
        )
        with open(out_dir.joinpath("draws.json"), 'w', encoding='utf-8') as f:
            json.dump(meta, f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, out_dir: Union[str, Path]) -> 'PosteriorDraws':
        """Read draws saved by `save`"""

        out_dir = Path(out_dir)
        for name in ("draws.csv", "draws.json"):
            if not out_dir.joinpath(name).is_file():
                raise FileNotFoundError(f"unable to locate {out_dir.joinpath(name)}")
        with open(out_dir.joinpath("draws.json"), encoding='utf-8') as f:
            meta = json.load(f)
        draws = cls.__new__(cls)
        draws.regions, draws.years = meta["regions"], np.asarray(meta["years"], dtype=np.int64)
        with open(out_dir.joinpath("draws.csv"), newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            header = next(reader)
            if header != draws._columns():
                raise ValueError(f"{out_dir.joinpath('draws.csv')}: columns do not match the regions and years "
                                 "of draws.json")
            flat = np.asarray([[float(val) for val in row] for row in reader], dtype=np.float64)

        num_chains, num_draws = meta["num_chains"], meta["num_draws"]
        num_regions, num_years = len(draws.regions), len(draws.years)
        if flat.shape[0] != num_chains * num_draws:
            raise ValueError(f"expected {num_chains * num_draws} draws, found {flat.shape[0]}")
        flat = flat.reshape(num_chains, num_draws, -1)
        splits = np.cumsum([2, num_regions * num_years, num_regions, num_regions,
                            num_regions * len(TRANSITION_NAMES), len(SHAPE_NAMES)])
        index, log_phi, delta, pi, transition, mu, tau = np.split(flat, splits, axis=-1)
        return cls(
            draws.regions, draws.years,
            log_phi.reshape(num_chains, num_draws, num_regions, num_years),
            delta.round().astype(np.int64), pi,
            np.moveaxis(transition.reshape(num_chains, num_draws, len(TRANSITION_NAMES), num_regions), 2, -1),
            mu, tau,
            ModelConfig.model_validate(meta["config"]),
            McmcSettings.model_validate(meta["settings"]),
            iterations=index[0, :, 1].round().astype(np.int64),
            acceptance=meta.get("acceptance"),
            scales=meta.get("scales"),
            chain_ids=index[:, 0, 0].round().astype(np.int64),
        )

    def extra_repr(self) -> str:
        return (f"regions={self.regions}, years=({self.years[0]}, {self.years[-1]}), "
                f"num_chains={self.num_chains}, num_draws={self.num_draws}")
