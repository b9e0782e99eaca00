"""End-to-end tests of the command-line interface."""

import json

import numpy as np
import pytest

from src.cli import build_parser, main
from src.data.csv_io import load_csv


def _synth(fixture_csv, out, seed=1, extra=()):
    argv = ["-q", "synth", "--input", str(fixture_csv), "--out", str(out), "--m", "2", "--seed", str(seed),
            "--workers", "1", *extra]
    return main(argv)


def test_synth_writes_release_and_manifest(tmp_path, fixture_csv):
    out = tmp_path / "release"
    assert _synth(fixture_csv, out) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "coords.json",
        "manifest.json",
        "metadata.json",
        "synth_1.csv",
        "synth_1.schema.json",
        "synth_2.csv",
        "synth_2.schema.json",
    ]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "synth"
    assert manifest["seed"] == 1
    assert "synth_1.csv" in manifest["files"]
    assert len(manifest["config_hash"]) == 64

    synth = load_csv(out / "synth_1.csv")
    assert synth.n == 200
    coords = synth.coords()
    assert coords.min() >= 1.0 and coords.max() <= 100.0
    transform = json.loads((out / "coords.json").read_text())
    assert transform["target_range"] == [1.0, 100.0]
    assert not list(tmp_path.glob(".release-*"))


def test_synth_is_reproducible(tmp_path, fixture_csv):
    assert _synth(fixture_csv, tmp_path / "a", seed=5) == 0
    assert _synth(fixture_csv, tmp_path / "b", seed=5) == 0
    assert _synth(fixture_csv, tmp_path / "c", seed=6) == 0
    first = (tmp_path / "a" / "synth_1.csv").read_bytes()
    assert first == (tmp_path / "b" / "synth_1.csv").read_bytes()
    assert first != (tmp_path / "c" / "synth_1.csv").read_bytes()


def test_infer_combines_replicates(tmp_path, fixture_csv):
    release = tmp_path / "release"
    assert _synth(fixture_csv, release) == 0
    out = tmp_path / "inference"
    code = main(["-q", "infer", "--release", str(release), "--estimand", "mean:age",
                 "--estimand", "proportion:race=black", "--out", str(out)])
    assert code == 0
    table = load_csv(out / "inference.csv")
    assert table.n == 2
    assert list(table.column("region")) == ["all", "all"]
    # age is not synthesized: no between-replicate variance, so the degrees of freedom are unbounded
    assert table.column("se")[0] > 0
    assert np.isnan(table.column("nu_m")[0])
    assert table.column("ci_lower")[0] < table.column("q_bar")[0] < table.column("ci_upper")[0]


def test_risk_commands(tmp_path, fixture_csv):
    release = tmp_path / "release"
    assert _synth(fixture_csv, release) == 0
    config = tmp_path / "run.json"
    config.write_text(
        json.dumps(
            {
                "data": {"input": str(fixture_csv)},
                "scenario": {"grid": 5, "quasi_identifiers": ["lon", "lat", "sex", "race", "age"]},
                "experiment": {"mc_draws": 3},
            }
        ),
        encoding="utf-8",
    )

    geo = tmp_path / "geo"
    assert main(["-q", "risk", "geo", "--config", str(config), "--release", str(release),
                 "--knowledge", "both", "--targets", "6", "--out", str(geo)]) == 0
    records = load_csv(geo / "geo_risk.csv")
    assert records.n == 12
    summary = load_csv(geo / "geo_risk_summary.csv")
    assert sorted(summary.column("scenario")) == ["high/RULES_ONLY", "low/RULES_ONLY"]

    ident = tmp_path / "id"
    assert main(["-q", "risk", "id", "--config", str(config), "--release", str(release),
                 "--targets", "20", "--out", str(ident)]) == 0
    assert load_csv(ident / "id_risk.csv").n == 20
    row = load_csv(ident / "id_risk_summary.csv")
    assert 0.0 <= row.column("expected")[0] <= 1.0


def test_scenario_cannot_exceed_disclosed_metadata(tmp_path, fixture_csv):
    release = tmp_path / "release"
    assert _synth(fixture_csv, release, extra=["--metadata-level", "EMPTY"]) == 0
    code = main(["-q", "risk", "geo", "--input", str(fixture_csv), "--release", str(release),
                 "--metadata-level", "FULL", "--targets", "2", "--out", str(tmp_path / "geo")])
    assert code == 1
    assert not (tmp_path / "geo").exists()


def test_identification_on_empty_metadata_release(tmp_path, fixture_csv):
    release = tmp_path / "release"
    assert _synth(fixture_csv, release, extra=["--metadata-level", "EMPTY"]) == 0
    out = tmp_path / "id"
    code = main(["-q", "risk", "id", "--input", str(fixture_csv), "--release", str(release),
                 "--metadata-level", "EMPTY", "--mc-draws", "2", "--targets", "10", "--out", str(out)])
    assert code == 0
    assert list(load_csv(out / "id_risk_summary.csv").column("scenario")) == ["low/EMPTY"]


def test_simulate(tmp_path):
    out = tmp_path / "sim"
    assert main(["-q", "simulate", "--n", "50", "--seed", "2", "--out", str(out)]) == 0
    population = load_csv(out / "population.csv")
    assert population.n == 50
    assert "outcome" in population.schema


def test_failed_run_leaves_no_output(tmp_path, fixture_csv, capsys):
    release = tmp_path / "release"
    assert _synth(fixture_csv, release) == 0
    out = tmp_path / "inference"
    assert main(["-q", "infer", "--release", str(release), "--out", str(out)]) == 1
    assert not out.exists()
    assert "error:" in capsys.readouterr().err


def test_bad_config_reports_file_and_line(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text('{\n  "plan": {\n    "m": 1\n  }\n}\n', encoding="utf-8")
    assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "x")]) == 1
    assert f"{config}:3:" in capsys.readouterr().err


def test_missing_input_is_an_error(tmp_path):
    assert main(["-q", "synth", "--out", str(tmp_path / "x")]) == 1


def test_missing_input_file_is_reported(tmp_path, capsys):
    out = tmp_path / "x"
    assert main(["-q", "synth", "--input", str(tmp_path / "nope.csv"), "--out", str(out)]) == 1
    assert "nope.schema.json" in capsys.readouterr().err
    assert not out.exists()


def test_corrupt_release_metadata_is_reported(tmp_path, fixture_csv, capsys):
    release = tmp_path / "release"
    assert _synth(fixture_csv, release) == 0
    metadata = json.loads((release / "metadata.json").read_text())
    metadata["metadata_level"] = "EVERYTHING"
    (release / "metadata.json").write_text(json.dumps(metadata), encoding="utf-8")
    code = main(["-q", "risk", "geo", "--input", str(fixture_csv), "--release", str(release),
                 "--targets", "2", "--out", str(tmp_path / "geo")])
    assert code == 1
    assert "EVERYTHING" in capsys.readouterr().err


def test_usage_errors_exit_with_two():
    with pytest.raises(SystemExit) as info:
        main(["publish"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        build_parser().parse_args(["risk", "geo"])


@pytest.mark.slow
def test_utility_and_noise_baseline(tmp_path):
    out = tmp_path / "utility"
    argv = ["-q", "utility", "--n", "300", "--reps", "2", "--m", "2", "--seed", "3", "--out", str(out)]
    assert main(argv) == 0
    for name in ("descriptive.csv", "coefficients.csv", "misclassification.csv", "scatter.csv"):
        assert (out / name).exists()

    noise = tmp_path / "noise"
    argv = ["-q", "noise-baseline", "--n", "150", "--reps", "2", "--m", "2", "--seed", "3", "--out", str(noise)]
    assert main(argv) == 0
    r1 = load_csv(noise / "noise_r1.csv")
    assert r1.n == 150
    assert (r1.column("r1") >= 0).all()
