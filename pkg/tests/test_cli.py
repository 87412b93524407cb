import csv
import io
import json

import pytest

from krb.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from krb.experiments import preset
from krb.persistence import MANIFEST_FILE
from krb.problems.io import import_bundle


@pytest.fixture
def config_file(tmp_path):
    """Fixture writing a small stiffness/mass configuration to disk."""
    config = preset("stiffmass-rcgbm", n_cells=4, m=[3], output_dir=str(tmp_path / "results"))
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config.to_dict()), encoding="utf-8")
    return path


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_presets_lists_every_preset(capsys):
    """Test that presets prints one line per preset with its tiers."""
    assert main(["presets"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "stiffmass-rcgbm (s=16, m=32, l=64 cells per side)" in out
    assert "pwcoeff-mrcgbm" in out
    assert len(out.strip().splitlines()) == 5


def test_gen_writes_importable_bundle(tmp_path, capsys):
    """Test that gen exports a bundle that import_bundle reads back."""
    out = tmp_path / "bundle"
    assert main(["gen", "convdiff", "--n", "4", "--out", str(out)]) == EXIT_OK
    assert "problem=convdiff n=9 J=2" in capsys.readouterr().out
    bundle = import_bundle(out)
    assert bundle.op.J == 2


def test_offline_then_online(tmp_path, config_file, capsys):
    """Test building a model from a configuration and sweeping it over a grid."""
    model_dir = tmp_path / "model"
    assert main(["offline", "--config", str(config_file), "--out", str(model_dir)]) == EXIT_OK
    assert "variant=galerkin" in capsys.readouterr().out
    assert (model_dir / MANIFEST_FILE).exists()

    argv = ["online", "--model", str(model_dir), "--grid", "(1:1:2)^2", "--theta-map", "stiffmass"]
    assert main(argv) == EXIT_OK
    rows = _csv_rows(capsys.readouterr().out)
    assert len(rows) == 4
    assert list(rows[0]) == ["mu_1", "mu_2", "residual_norm", "online_us", "status"]
    points = [(r["mu_1"], r["mu_2"]) for r in rows]
    assert points == [("1", "1"), ("1", "2"), ("2", "1"), ("2", "2")]
    assert all(r["status"] == "ok" for r in rows)
    assert all(float(r["residual_norm"]) < 1.0 for r in rows)


def test_online_reports_singular_points(tmp_path, config_file, capsys):
    """Test that a singular reduced system is reported per point and the sweep goes on."""
    model_dir = tmp_path / "model"
    main(["offline", "--config", str(config_file), "--out", str(model_dir)])
    capsys.readouterr()
    assert main(["online", "--model", str(model_dir), "--grid", "(0,1)x(0,1)"]) == EXIT_OK
    rows = _csv_rows(capsys.readouterr().out)
    assert rows[0]["status"] == "SingularReducedSystemError"
    assert rows[0]["residual_norm"] == "nan"
    assert rows[-1]["status"] == "ok"


def test_online_outside_parameter_domain(tmp_path, config_file, capsys):
    """Test that a parameter outside the coefficient map's domain fails with exit code 1."""
    model_dir = tmp_path / "model"
    main(["offline", "--config", str(config_file), "--out", str(model_dir)])
    capsys.readouterr()
    argv = ["online", "--model", str(model_dir), "--grid", "(0,1)x(1)", "--theta-map", "stiffmass"]
    assert main(argv) == EXIT_FAILURE
    assert "error=ParameterDomainError" in capsys.readouterr().err


def test_experiment_prints_summary(tmp_path, capsys):
    """Test a small preset run from the command line."""
    out = tmp_path / "run"
    argv = ["experiment", "stiffmass-rcgbm", "--m", "2", "4", "--out", str(out), "--deterministic"]
    assert main(argv) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split()[:2] for line in lines] == [["L=1", "m=2"], ["L=1", "m=4"]]
    assert (out / "summary.csv").exists()
    assert (out / "errors_L1.svg").exists()


@pytest.mark.parametrize(
    "argv, kind",
    [
        (["experiment", "stokes-rkbm2"], "UnknownPresetError"),
        (["experiment", "stiffmass-rcgbm", "--workers", "0"], "ConfigError"),
    ],
)
def test_configuration_errors_exit_with_code_2(argv, kind, capsys):
    """Test that configuration errors print one error line and exit with code 2."""
    assert main(argv) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.startswith(f"error={kind} message=")
    assert len(err.strip().splitlines()) == 1


def test_offline_with_missing_config(tmp_path, capsys):
    """Test that a missing configuration file is a configuration error."""
    assert main(["offline", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG
    assert "error=ConfigError" in capsys.readouterr().err


def test_online_with_missing_model(tmp_path, capsys):
    """Test that a missing model directory fails with exit code 1."""
    assert main(["online", "--model", str(tmp_path / "absent"), "--grid", "(1)x(1)"]) == 1
    assert "error=PersistenceError" in capsys.readouterr().err


def test_report_on_empty_directory(tmp_path, capsys):
    """Test that report fails on a directory without results."""
    assert main(["report", str(tmp_path)]) == EXIT_FAILURE
    assert "error=PersistenceError" in capsys.readouterr().err


def test_missing_subcommand():
    """Test that argparse rejects a call without a subcommand."""
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2
