import numpy as np
import pytest
from scipy.stats import norm

from srbayes.datasets import build_observations
from srbayes.inference import PosteriorDraws, diagnostics, inflation_probability, run_mcmc
from srbayes.io import SrbObservation
from srbayes.models import McmcSettings, ModelConfig
from srbayes.validation import (MIN_SPLIT_OBSERVATIONS, RegionTruth, SimulationDesign, SimulationTruth,
                                collection_years, coverage_report, period_mean_draws, predictive_quantiles,
                                run_simulation_study, run_validation, simulate_dataset, simulate_male_counts,
                                split_out_of_sample, synthetic_tfr)


def _observations(num, source_id=None):
    return [
        SrbObservation("P1", 1980 + idx, 1980 + idx, 1.05, 0.02, 1000, source_id or f"S{idx}") for idx in range(num)
    ]


def _constant_draws(theta=1.049, num_draws=50):
    config = ModelConfig(year_range=(2000, 2009), projection_end=2020, baseline_b=theta)
    shape = (1, num_draws, 1)
    return PosteriorDraws(["P1"], config.years, np.zeros(shape + (10,)), np.zeros(shape, dtype=int),
                          np.full(shape, 0.5), np.tile([2000., 12., 6., 12., 0.06], shape + (1,)),
                          np.zeros((1, num_draws, 4)), np.ones((1, num_draws, 4)), config, McmcSettings())


@pytest.mark.parametrize(
    "num_obs, fraction, num_held",
    [
        [10, 0.2, 2],
        [91, 0.2, 18],
        [5, 0.2, 1],
        [12, 0.125, 2],  # 1.5 rounds up
        [10, 0.5, 5],
    ],
)
def test_split_out_of_sample_size(num_obs, fraction, num_held):
    split = split_out_of_sample(_observations(num_obs), fraction)
    assert len(split.held_out) == num_held
    assert len(split.training) == num_obs - num_held
    # Each observation is its own source: the most recent ones are held out
    assert [obs.period_start for obs in split.held_out] == list(range(1980 + num_obs - num_held, 1980 + num_obs))


def test_split_out_of_sample_ordering(mock_observations):
    assert collection_years(mock_observations) == {"S1": 2004, "S2": 2009}
    split = split_out_of_sample(mock_observations, 0.2)
    # Ties in (collection year, reference year) keep the input order
    assert [(obs.region_id, obs.period_start) for obs in split.held_out] == [
        ("P1", 2008), ("P2", 2008), ("P1", 2009), ("P2", 2009)
    ]
    # Collection years given explicitly take precedence
    split = split_out_of_sample(mock_observations, 0.2, source_years={"S1": 2015})
    assert all(obs.source_id == "S1" for obs in split.held_out)
    assert sorted(obs.period_start for obs in split.held_out) == [2003, 2003, 2004, 2004]
    # A single source: the latest reference years are held out
    split = split_out_of_sample(_observations(10, "S"), 0.3)
    assert [obs.period_start for obs in split.held_out] == [1987, 1988, 1989]
    exported = split.export()
    assert exported["n_training"] == 7 and exported["n_held_out"] == 3
    assert exported["held_out"][0]["reference_year"] == 1987


def test_split_out_of_sample_errors():
    with pytest.raises(ValueError):
        split_out_of_sample(_observations(MIN_SPLIT_OBSERVATIONS - 1), 0.2)
    for fraction in (0., 1., -0.1, 1.5):
        with pytest.raises(ValueError):
            split_out_of_sample(_observations(10), fraction)
    # No observation held out
    with pytest.raises(ValueError):
        split_out_of_sample(_observations(10), 0.01)
    # No observation left for training
    with pytest.raises(ValueError):
        split_out_of_sample(_observations(10), 0.99)


def test_simulate_male_counts():
    rng = np.random.default_rng(0)
    prob = 1.05 / 2.05
    assert 10000 * prob == pytest.approx(5122, abs=0.1)
    counts = simulate_male_counts(1.05, 10000, rng, size=10000)
    assert counts.shape == (10000,)
    variance = 10000 * prob * (1 - prob)
    assert abs(counts.mean() - 10000 * prob) < 3 * np.sqrt(variance / counts.size)
    assert counts.var() == pytest.approx(variance, rel=0.05)
    # Broadcasting over sex ratios
    counts = simulate_male_counts(np.array([1., 1.1]), 1000, rng)
    assert counts.shape == (2,)


def test_simulate_dataset():
    config = ModelConfig(year_range=(2000, 2009), projection_end=2020)
    truth = SimulationTruth(regions={"P1": RegionTruth(delta=1, gamma=2002), "P2": RegionTruth(delta=0)})
    design = SimulationDesign(observations_per_region=4, births_per_observation=20000, period_length=2)
    dataset = simulate_dataset(truth, design, config, seed=5)
    assert len(dataset.observations) == 8 and dataset.records is None
    assert [obs.period_start for obs in dataset.observations[:4]] == [2000, 2003, 2005, 2008]
    assert all(obs.period_end == obs.period_start + 1 for obs in dataset.observations)
    # Each observation is its own source
    assert len({obs.source_id for obs in dataset.observations}) == 4
    assert dataset.truth["seed"] == 5 and dataset.truth["years"] == list(range(2000, 2010))
    theta = dataset.true_theta("P1")
    log_phi = np.asarray(dataset.truth["regions"]["P1"]["log_phi"])
    ramp = np.clip(np.minimum((np.arange(2000, 2010) - 2002) / 12, 1.), 0., 1.)
    assert np.allclose(theta, 1.049 * np.exp(log_phi) + 0.06 * ramp)
    assert dataset.truth["regions"]["P2"]["delta"] == 0
    # Same seed, same dataset
    again = simulate_dataset(truth, design, config, seed=5)
    assert [(obs.ratio, obs.log_se) for obs in again.observations] == [
        (obs.ratio, obs.log_se) for obs in dataset.observations
    ]
    other = simulate_dataset(truth, design, config, seed=6)
    assert [obs.ratio for obs in other.observations] != [obs.ratio for obs in dataset.observations]
    with pytest.raises(ValueError):
        simulate_dataset(truth, design, config, seed=5, level="cluster")


def test_simulate_dataset_baseline():
    config = ModelConfig(year_range=(2000, 2009), projection_end=2020, ar1_sd=0.)
    truth = SimulationTruth(regions={"P1": RegionTruth(delta=0)})
    design = SimulationDesign(observations_per_region=10, births_per_observation=4_000_000)
    dataset = simulate_dataset(truth, design, config, seed=0)
    assert np.allclose(dataset.true_theta("P1"), 1.049)
    ratios = np.asarray([obs.ratio for obs in dataset.observations])
    assert np.all(np.abs(np.log(ratios / 1.049)) < 0.005)
    # Jackknife errors close to the binomial ones
    log_se = np.asarray([obs.log_se for obs in dataset.observations])
    assert log_se.mean() == pytest.approx(2.049 / np.sqrt(1.049 * 4_000_000), rel=0.2)


def test_simulate_dataset_records():
    config = ModelConfig(year_range=(2000, 2009), projection_end=2020)
    truth = SimulationTruth(regions={"P1": RegionTruth(delta=0)})
    design = SimulationDesign(observations_per_region=2, births_per_observation=4000, clusters_per_observation=10,
                              period_length=5)
    dataset = simulate_dataset(truth, design, config, seed=1, level="record")
    assert dataset.observations is None and len(dataset.records) == 8000
    assert {record.year for record in dataset.records} == set(range(2000, 2010))
    observations, report = build_observations(dataset.records)
    assert report.n_records == 8000 and report.n_excluded == 0
    assert {obs.source_id for obs in observations} == {"SIM-1", "SIM-2"}
    assert sum(obs.n_births for obs in observations) == 8000
    assert all(abs(np.log(obs.ratio / 1.049)) < 0.2 for obs in observations)


def test_synthetic_tfr():
    config = ModelConfig(year_range=(2000, 2009), projection_end=2020)
    truth = SimulationTruth(regions={"P2": RegionTruth(delta=0, gamma=2004), "P1": RegionTruth(delta=1)})
    series = synthetic_tfr(truth, config)
    assert [tfr.region_id for tfr in series] == ["P1", "P2"]
    assert series[1].tfr_at(2004) == pytest.approx(config.onset_reference_tfr)
    assert series[1].tfr_at(2000) == pytest.approx(config.onset_reference_tfr + 0.4)


def test_predictive_quantiles():
    z = norm.ppf(0.975)
    lower, median, upper = predictive_quantiles(np.full(50, 1.05), 0.02)
    assert lower == pytest.approx(1.05 * np.exp(-z * 0.02), rel=1e-8)
    assert median == pytest.approx(1.05, rel=1e-8)
    assert upper == pytest.approx(1.05 * np.exp(z * 0.02), rel=1e-8)
    # Symmetric mixture on the log scale
    lower, median, upper = predictive_quantiles(1.05 * np.exp([-0.03, 0.03]), 0.02)
    assert median == pytest.approx(1.05, rel=1e-8)
    # Wider than a single component
    assert lower < 1.05 * np.exp(-z * 0.02) and upper > 1.05 * np.exp(z * 0.02)
    assert np.log(upper / 1.05) == pytest.approx(-np.log(lower / 1.05), rel=1e-6)


def test_period_mean_draws():
    draws = _constant_draws(num_draws=7)
    means = period_mean_draws(draws, SrbObservation("P1", 1998, 2001, 1.05, 0.02, 100, "S"))
    assert means.shape == (7,) and np.allclose(means, 1.049)
    with pytest.raises(ValueError):
        period_mean_draws(draws, SrbObservation("P1", 1990, 1995, 1.05, 0.02, 100, "S"))
    with pytest.raises(KeyError):
        period_mean_draws(draws, SrbObservation("P9", 2001, 2001, 1.05, 0.02, 100, "S"))


def test_coverage_report():
    draws = _constant_draws()
    held_out = [
        SrbObservation("P1", 2003, 2003, 1.049, 0.02, 10000, "S"),
        SrbObservation("P1", 2004, 2004, 1.049 * np.exp(3 * 0.02), 0.02, 10000, "S"),
        SrbObservation("P1", 2005, 2006, 1.049 * np.exp(-1.5 * 0.02), 0.02, 10000, "S"),
        SrbObservation("P1", 2007, 2007, 1.049 * np.exp(-2.5 * 0.02), 0.02, 10000, "S"),
    ]
    report = coverage_report(draws, held_out)
    assert report["count"] == 4
    assert report["coverage_pct"] == pytest.approx(50.)
    assert report["share_below"] == pytest.approx(0.25) and report["share_above"] == pytest.approx(0.25)
    assert [row["covered"] for row in report["observations"]] == [True, False, True, False]
    assert report["observations"][1]["region_id"] == "P1"
    assert report["observations"][0]["median"] == pytest.approx(1.049)
    assert report["median_abs_error"] >= 0
    with pytest.raises(ValueError):
        coverage_report(draws, [])


def test_run_validation(mock_observations, mock_tfr_series, mock_config, mock_settings):
    report = run_validation(mock_observations, mock_tfr_series, mock_config, mock_settings, 0.2)
    assert report["holdout_fraction"] == 0.2 and report["seed"] == mock_settings.seed
    assert report["split"]["n_training"] == 16 and report["split"]["n_held_out"] == 4
    coverage = report["coverage"]
    assert coverage["count"] == 4 and 0 <= coverage["coverage_pct"] <= 100
    assert len(coverage["observations"]) == 4


def test_run_simulation_study():
    config = ModelConfig(year_range=(2000, 2009), projection_end=2020)
    truth = SimulationTruth(regions={"P1": RegionTruth(delta=1, gamma=2001), "P2": RegionTruth(delta=0)})
    design = SimulationDesign(observations_per_region=6, births_per_observation=10000)
    settings = McmcSettings(n_chains=2, n_iterations=100, n_burnin=50, thin=2, seed=3, adapt_window=25)
    study = run_simulation_study(truth, design, config, settings, num_replicates=2, threads=2)
    assert study["num_replicates"] == 2
    assert [report["seed"] for report in study["replicates"]] == [3, 4]
    assert study["coverage"]["count"] == 2 * 2
    with pytest.raises(ValueError):
        run_simulation_study(truth, design, config, settings, num_replicates=0)


@pytest.mark.slow
def test_simulation_recovery():
    config = ModelConfig(year_range=(1980, 2016), projection_end=2050)
    inflated = {"R1": 1985., "R2": 1990., "R3": 1995.}
    truth = SimulationTruth(regions={
        f"R{idx}": RegionTruth(delta=1, gamma=inflated[f"R{idx}"], xi=0.06) if f"R{idx}" in inflated
        else RegionTruth(delta=0)
        for idx in range(1, 8)
    })
    # 10000 births per observation gives a sampling error close to 0.02 on the log scale
    design = SimulationDesign(observations_per_region=37, births_per_observation=10000)
    settings = McmcSettings(n_chains=4, n_iterations=12000, n_burnin=6000, thin=6, seed=2024)
    dataset = simulate_dataset(truth, design, config, seed=2024)
    log_se = np.asarray([obs.log_se for obs in dataset.observations])
    assert 0.015 < np.median(log_se) < 0.025
    tfr = synthetic_tfr(truth, config)

    draws = run_mcmc(dataset.observations, tfr, config, settings, threads=4)
    for region, region_truth in truth.regions.items():
        prob = inflation_probability(draws, region)
        assert prob > 0.7 if region_truth.delta == 1 else prob < 0.4, (region, prob)
    theta = draws.theta()
    lower, upper = np.quantile(theta.reshape(-1, *theta.shape[2:]), [0.025, 0.975], axis=0)
    true_theta = np.stack([dataset.true_theta(region) for region in draws.regions])
    assert np.mean((lower <= true_theta) & (true_theta <= upper)) >= 0.9
    assert diagnostics(draws)["max_rhat"] < 1.05

    report = run_validation(dataset.observations, tfr, config, settings, 0.2, threads=4)
    assert report["split"]["n_held_out"] == 52
    assert 90 <= report["coverage"]["coverage_pct"] <= 100
