import json
import os

import pytest

from srbayes import cli
from srbayes.inference import ConvergenceError
from srbayes.io import BIRTHS_COLUMNS, OBSERVATION_COLUMNS, TfrSeries, read_observations, write_birth_records, write_tfr


def _read(path):
    with open(path) as f:
        return f.read()


@pytest.fixture(scope="module")
def estimate_dir(tmpdir_factory, mock_observations_file, mock_tfr, mock_config_file, mock_settings_file):
    out = str(tmpdir_factory.mktemp("estimate"))
    code = cli.main(["estimate", mock_observations_file, mock_tfr, "--out", out, "--config", mock_config_file,
                     "--settings", mock_settings_file, "--seed", "7", "--threads", "1", "--allow-nonconverged"])
    assert code == cli.EXIT_OK
    return out


def test_preprocess(tmpdir_factory, mock_births, mock_tfr):
    out = str(tmpdir_factory.mktemp("preprocess"))
    assert cli.main(["preprocess", mock_births, mock_tfr, "--out", out]) == cli.EXIT_OK
    lines = _read(os.path.join(out, "observations.csv")).splitlines()
    assert lines[0] == ",".join(OBSERVATION_COLUMNS)
    assert lines[0] == "region_id,period_start,period_end,ratio,log_se,n_births,source_id,reference_year"
    observations = read_observations(os.path.join(out, "observations.csv"))
    assert {obs.region_id for obs in observations} == {"P1", "P2"}
    assert sum(obs.n_births for obs in observations) == 2 * 15 * 8 * 30
    with open(os.path.join(out, "preprocessing_report.json")) as f:
        report = json.load(f)
    assert report["n_excluded"] == 1 and report["n_records"] == 2 * 15 * 8 * 30 + 1
    assert report["database"][-1]["source_id"] == "total"
    assert report["database"][-1]["n_births"] == 2 * 15 * 8 * 30
    with open(os.path.join(out, "manifest.json")) as f:
        manifest = json.load(f)
    assert manifest["command"] == "preprocess" and set(manifest["inputs"]) == {"births", "tfr"}


def test_preprocess_errors(tmpdir_factory, mock_births, mock_tfr):
    folder = tmpdir_factory.mktemp("preprocess_errors")
    empty = str(folder.join("empty_births.csv"))
    write_birth_records([], empty)
    assert _read(empty).strip() == ",".join(BIRTHS_COLUMNS)
    out = str(folder.join("out_empty"))
    assert cli.main(["preprocess", empty, mock_tfr, "--out", out]) == cli.EXIT_INPUT_ERROR
    assert not os.path.exists(os.path.join(out, "observations.csv"))
    # Missing input
    assert cli.main(["preprocess", str(folder.join("missing.csv")), mock_tfr, "--out", out]) == cli.EXIT_INPUT_ERROR
    # Truncated row
    truncated = str(folder.join("truncated_births.csv"))
    with open(truncated, 'w') as f:
        f.write(",".join(BIRTHS_COLUMNS) + "\nP5,2010,c01,s1,1.0,M\n")
    assert cli.main(["preprocess", truncated, mock_tfr, "--out", out]) == cli.EXIT_INPUT_ERROR


def test_preprocess_missing_region(tmpdir_factory, mock_births, caplog):
    folder = tmpdir_factory.mktemp("preprocess_region")
    tfr = str(folder.join("tfr.csv"))
    write_tfr([TfrSeries("P1", {year: 3. for year in range(1980, 2011)})], tfr)
    assert cli.main(["preprocess", mock_births, tfr, "--out", str(folder.join("out"))]) == cli.EXIT_INPUT_ERROR
    assert "P2" in caplog.text


def test_estimate(estimate_dir, tmpdir_factory, mock_observations_file, mock_tfr, mock_config_file,
                  mock_settings_file):
    for name in ("estimates.csv", "draws.csv", "draws.json", "diagnostics.json", "imbalance.json",
                 "baseline_comparison.csv", "manifest.json"):
        assert os.path.isfile(os.path.join(estimate_dir, name)), name
    lines = _read(os.path.join(estimate_dir, "estimates.csv")).splitlines()
    assert lines[0] == "region_id,year,median,lower95,upper95"
    assert len(lines) == 1 + 2 * 10
    with open(os.path.join(estimate_dir, "diagnostics.json")) as f:
        report = json.load(f)
    # One block per region and transition parameter group, plus the hierarchy
    assert len(report["blocks"]) == 5 * 2 + 1
    with open(os.path.join(estimate_dir, "manifest.json")) as f:
        manifest = json.load(f)
    assert manifest["seed"] == 7 and manifest["settings"]["n_iterations"] == 200

    # Same seed, same estimates, whatever the number of threads
    out = str(tmpdir_factory.mktemp("estimate_again"))
    code = cli.main(["estimate", mock_observations_file, mock_tfr, "--out", out, "--config", mock_config_file,
                     "--settings", mock_settings_file, "--seed", "7", "--threads", "2", "--allow-nonconverged"])
    assert code == cli.EXIT_OK
    for name in ("estimates.csv", "draws.csv"):
        assert _read(os.path.join(out, name)) == _read(os.path.join(estimate_dir, name))


def test_estimate_not_converged(tmpdir_factory, monkeypatch, mock_observations_file, mock_tfr, mock_config_file,
                                mock_settings_file):
    def _raise(report):
        raise ConvergenceError("1 parameter(s) with R-hat above 1.05: xi[P1]")

    monkeypatch.setattr(cli, "check_convergence", _raise)
    out = str(tmpdir_factory.mktemp("estimate_nonconverged"))
    code = cli.main(["estimate", mock_observations_file, mock_tfr, "--out", out, "--config", mock_config_file,
                     "--settings", mock_settings_file, "--seed", "7"])
    assert code == cli.EXIT_NOT_CONVERGED
    # Outputs are kept for inspection
    assert os.path.isfile(os.path.join(out, "diagnostics.json"))


def test_estimate_errors(tmpdir_factory, mock_observations_file, mock_tfr, mock_settings_file):
    folder = tmpdir_factory.mktemp("estimate_errors")
    config = str(folder.join("config.json"))
    with open(config, 'w') as f:
        json.dump(dict(year_range=[2000, 2009], projection_end=2020, unknown_key=1), f)
    code = cli.main(["estimate", mock_observations_file, mock_tfr, "--out", str(folder.join("out")), "--config",
                     config, "--settings", mock_settings_file, "--seed", "7"])
    assert code == cli.EXIT_INPUT_ERROR
    # The seed is mandatory
    with pytest.raises(SystemExit):
        cli.parse_args(["estimate", mock_observations_file, mock_tfr, "--out", str(folder.join("out"))])


def test_project(estimate_dir, tmpdir_factory):
    out = str(tmpdir_factory.mktemp("project"))
    assert cli.main(["project", estimate_dir, "--out", out, "--projection-end", "2010", "--plot"]) == cli.EXIT_OK
    lines = _read(os.path.join(out, "projections.csv")).splitlines()
    assert lines[0] == "region_id,year,median,lower95,upper95,phase"
    projected = [line.split(",") for line in lines[1:] if line.endswith(",projection")]
    assert sorted((row[0], row[1]) for row in projected) == [("P1", "2010"), ("P2", "2010")]
    with open(os.path.join(out, "peaks.json")) as f:
        assert set(json.load(f)) == {"P1", "P2"}
    for region in ("P1", "P2"):
        assert os.path.isfile(os.path.join(out, "plots", f"srb_{region}.png"))
    with open(os.path.join(out, "manifest.json")) as f:
        assert json.load(f)["seed"] == 7

    # Default horizon of the draws, and reproducible projections
    outs = [str(tmpdir_factory.mktemp("project_default")) for _ in range(2)]
    for folder in outs:
        assert cli.main(["project", estimate_dir, "--out", folder]) == cli.EXIT_OK
    first, second = (_read(os.path.join(folder, "projections.csv")) for folder in outs)
    assert first == second
    assert first.splitlines()[-1].startswith("P2,2020,")
    assert not os.path.exists(os.path.join(outs[0], "plots"))


def test_project_errors(estimate_dir, tmpdir_factory):
    out = str(tmpdir_factory.mktemp("project_errors"))
    assert cli.main(["project", estimate_dir, "--out", out, "--projection-end", "2005"]) == cli.EXIT_INPUT_ERROR
    assert cli.main(["project", out, "--out", out]) == cli.EXIT_INPUT_ERROR


def test_validate(tmpdir_factory, mock_observations_file, mock_tfr, mock_config_file, mock_settings_file):
    out = str(tmpdir_factory.mktemp("validate"))
    code = cli.main(["validate", mock_observations_file, mock_tfr, "--out", out, "--config", mock_config_file,
                     "--settings", mock_settings_file, "--seed", "3", "--holdout-fraction", "0.25"])
    assert code == cli.EXIT_OK
    with open(os.path.join(out, "validation_report.json")) as f:
        report = json.load(f)
    assert report["holdout_fraction"] == 0.25 and report["seed"] == 3
    assert report["split"]["n_held_out"] == 5
    assert 0 <= report["coverage"]["coverage_pct"] <= 100
    assert len(report["coverage"]["observations"]) == 5


def test_simulate(tmpdir_factory, mock_config_file):
    folder = tmpdir_factory.mktemp("simulate")
    truth, design = str(folder.join("truth.json")), str(folder.join("design.json"))
    with open(truth, 'w') as f:
        json.dump(dict(regions=dict(P1=dict(delta=0), P2=dict(delta=1, gamma=2003))), f)
    with open(design, 'w') as f:
        json.dump(dict(observations_per_region=5, births_per_observation=10000), f)

    out = str(folder.join("observations"))
    assert cli.main(["simulate", truth, design, "--out", out, "--config", mock_config_file, "--seed", "1"]) == 0
    observations = read_observations(os.path.join(out, "observations.csv"))
    assert len(observations) == 10
    with open(os.path.join(out, "truth.json")) as f:
        echoed = json.load(f)
    assert echoed["seed"] == 1 and echoed["regions"]["P1"]["delta"] == 0
    assert echoed["regions"]["P2"]["transition"]["gamma"] == 2003
    assert os.path.isfile(os.path.join(out, "tfr.csv"))

    # Fewer births for the record level
    with open(design, 'w') as f:
        json.dump(dict(observations_per_region=2, births_per_observation=2000, period_length=5), f)
    out = str(folder.join("records"))
    code = cli.main(["simulate", truth, design, "--out", out, "--config", mock_config_file, "--seed", "1",
                     "--level", "record"])
    assert code == cli.EXIT_OK
    assert _read(os.path.join(out, "births.csv")).splitlines()[0] == ",".join(BIRTHS_COLUMNS)
    # The synthetic records go through the preprocessing pipeline
    assert cli.main(["preprocess", os.path.join(out, "births.csv"), os.path.join(out, "tfr.csv"), "--out",
                     str(folder.join("preprocessed"))]) == cli.EXIT_OK
