# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from srbayes.datasets import build_observations, summarize_database
from srbayes.inference import (ConvergenceError, PosteriorDraws, check_convergence, compare_to_baseline, diagnostics,
                               imbalance_table, run_mcmc, srb_estimates)
from srbayes.io import (load_tfr, parse_birth_records, read_observations, write_birth_records, write_observations,
                        write_table, write_tfr)
from srbayes.models import McmcSettings, ModelConfig, load_json_config
from srbayes.projection import project, summarize_projection
from srbayes.utils.manifest import build_manifest, write_manifest
from srbayes.validation import SimulationDesign, SimulationTruth, run_validation, simulate_dataset, synthetic_tfr
from srbayes.version import __version__

__all__ = ['EXIT_OK', 'EXIT_INPUT_ERROR', 'EXIT_NOT_CONVERGED', 'EXIT_INTERNAL_ERROR', 'parse_args', 'main']

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_INTERNAL_ERROR = 3


def _write_json(path: Path, payload: Any) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_config(args: argparse.Namespace) -> ModelConfig:
    return load_json_config(ModelConfig, args.config, projection_end=getattr(args, "projection_end", None))


def _settings(args: argparse.Namespace) -> McmcSettings:
    return load_json_config(McmcSettings, args.settings, seed=args.seed)


def cmd_preprocess(args: argparse.Namespace) -> int:
    config = _model_config(args)
    records = parse_birth_records(args.births)
    if len(records) == 0:
        raise ValueError(f"{args.births}: no birth record")
    tfr = load_tfr(args.tfr)
    observations, report = build_observations(records, config.cv_threshold, config.max_recall_years)
    if len(observations) == 0:
        raise ValueError(f"{args.births}: no observation could be built from the birth records")
    known = {series.region_id for series in tfr}
    for region in sorted({obs.region_id for obs in observations}):
        if region not in known:
            raise ValueError(f"no TFR series for region '{region}'")

    out = _out_dir(args.out)
    write_observations(observations, out.joinpath("observations.csv"))
    _write_json(out.joinpath("preprocessing_report.json"),
                dict(report.export(), database=summarize_database(observations)))
    write_manifest(out, build_manifest("preprocess", dict(births=args.births, tfr=args.tfr), config=config))
    logging.info(f"{len(observations)} observation(s) written to {out}")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    config, settings = _model_config(args), _settings(args)
    observations = read_observations(args.observations)
    tfr = load_tfr(args.tfr)
    draws = run_mcmc(observations, tfr, config, settings, threads=args.threads, progress=args.verbose)
    estimates = srb_estimates(draws)
    report = diagnostics(draws)
    rows = compare_to_baseline(estimates, config.baseline_b, args.snapshot_years)

    out = _out_dir(args.out)
    estimates.save(out.joinpath("estimates.csv"))
    draws.save(out)
    _write_json(out.joinpath("diagnostics.json"), report)
    _write_json(out.joinpath("imbalance.json"), imbalance_table(draws, tfr))
    write_table(out.joinpath("baseline_comparison.csv"), list(rows[0].keys()), [list(row.values()) for row in rows])
    write_manifest(out, build_manifest("estimate", dict(observations=args.observations, tfr=args.tfr),
                                       seed=settings.seed, config=config, settings=settings))
    if not args.allow_nonconverged:
        check_convergence(report)
    elif not report["converged"]:
        logging.warning(f"{len(report['nonconverged'])} parameter(s) did not converge (max R-hat "
                        f"{report['max_rhat']:.3f})")
    return EXIT_OK


def cmd_project(args: argparse.Namespace) -> int:
    draws = PosteriorDraws.load(args.draws)
    if args.config is None:
        payload = draws.config.model_dump()
        if args.projection_end is not None:
            payload["projection_end"] = args.projection_end
        config = ModelConfig.model_validate(payload)
    else:
        config = _model_config(args)
    summary = summarize_projection(project(draws, config, seed=args.seed))

    out = _out_dir(args.out)
    summary.save(out)
    if args.plot:
        from srbayes.utils.visualization import plot_trajectories
        plot_trajectories(summary, config.baseline_b, out.joinpath("plots"))
    draws_dir = Path(args.draws)
    write_manifest(out, build_manifest(
        "project", dict(draws_csv=draws_dir.joinpath("draws.csv"), draws_json=draws_dir.joinpath("draws.json")),
        seed=draws.seed if args.seed is None else args.seed, config=config,
    ))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config, settings = _model_config(args), _settings(args)
    observations = read_observations(args.observations)
    tfr = load_tfr(args.tfr)
    report = run_validation(observations, tfr, config, settings, args.holdout_fraction, threads=args.threads,
                            progress=args.verbose)

    out = _out_dir(args.out)
    _write_json(out.joinpath("validation_report.json"), report)
    write_manifest(out, build_manifest("validate", dict(observations=args.observations, tfr=args.tfr),
                                       seed=settings.seed, config=config, settings=settings))
    logging.info(f"held-out coverage: {report['coverage']['coverage_pct']:.1f}%")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _model_config(args)
    truth = load_json_config(SimulationTruth, args.truth)
    design = load_json_config(SimulationDesign, args.design)
    dataset = simulate_dataset(truth, design, config, args.seed, level=args.level)

    out = _out_dir(args.out)
    if dataset.observations is not None:
        write_observations(dataset.observations, out.joinpath("observations.csv"))
    else:
        write_birth_records(dataset.records or [], out.joinpath("births.csv"))
    write_tfr(synthetic_tfr(truth, config), out.joinpath("tfr.csv"))
    _write_json(out.joinpath("truth.json"), dataset.truth)
    write_manifest(out, build_manifest("simulate", dict(truth=args.truth, design=args.design), seed=args.seed,
                                       config=config, design=design))
    return EXIT_OK


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog='srbayes', description='Subnational sex ratio at birth estimation',
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest='command', required=True)

    def _add(name: str, func: Any, help: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sub.set_defaults(func=func)
        sub.add_argument('--out', type=str, required=True, help='output folder')
        sub.add_argument('--config', type=str, default=None, help='path to the model config (JSON)')
        sub.add_argument('-v', '--verbose', action='store_true', help='log progress')
        return sub

    sub = _add('preprocess', cmd_preprocess, 'build observations from birth records')
    sub.add_argument('births', type=str, help='path to the births CSV')
    sub.add_argument('tfr', type=str, help='path to the TFR CSV')

    sub = _add('estimate', cmd_estimate, 'sample the posterior and summarize it')
    sub.add_argument('observations', type=str, help='path to the observations CSV')
    sub.add_argument('tfr', type=str, help='path to the TFR CSV')
    sub.add_argument('--settings', type=str, default=None, help='path to the sampler settings (JSON)')
    sub.add_argument('--seed', type=int, required=True, help='seed of the sampler')
    sub.add_argument('--threads', type=int, default=None, help='number of chains run in parallel')
    sub.add_argument('--allow-nonconverged', action='store_true', help='succeed even if an R-hat exceeds 1.05')
    sub.add_argument('--snapshot-years', type=int, nargs='+', default=None,
                     help='years of the baseline comparison (all estimation years by default)')

    sub = _add('project', cmd_project, 'project posterior draws to the horizon')
    sub.add_argument('draws', type=str, help='folder holding draws.csv and draws.json')
    sub.add_argument('--projection-end', type=int, default=None, help='last projection year')
    sub.add_argument('--seed', type=int, default=None, help='seed of the projections (seed of the draws by default)')
    sub.add_argument('--plot', action='store_true', help='write a fan chart per region')

    sub = _add('validate', cmd_validate, 'out-of-sample validation')
    sub.add_argument('observations', type=str, help='path to the observations CSV')
    sub.add_argument('tfr', type=str, help='path to the TFR CSV')
    sub.add_argument('--settings', type=str, default=None, help='path to the sampler settings (JSON)')
    sub.add_argument('--seed', type=int, required=True, help='seed of the sampler')
    sub.add_argument('--threads', type=int, default=None, help='number of chains run in parallel')
    sub.add_argument('--holdout-fraction', type=float, default=0.2, help='share of the observations held out')

    sub = _add('simulate', cmd_simulate, 'generate a synthetic dataset with known truth')
    sub.add_argument('truth', type=str, help='path to the truth (JSON)')
    sub.add_argument('design', type=str, help='path to the design (JSON)')
    sub.add_argument('--seed', type=int, required=True, help='seed of the generator')
    sub.add_argument('--level', type=str, default='observation', choices=['observation', 'record'],
                     help='generate observations or birth records')

    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s - %(message)s')
    try:
        return args.func(args)
    except ConvergenceError as e:
        logging.error(str(e))
        return EXIT_NOT_CONVERGED
    except (ValueError, KeyError, FileNotFoundError) as e:
        logging.error(str(e))
        return EXIT_INPUT_ERROR
    except Exception:
        logging.exception("internal error")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
