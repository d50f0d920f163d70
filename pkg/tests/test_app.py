import pandas as pd
import pytest
import yaml

from app import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from benchmarks import example_document


def write_scenario(path, **changes):
    raw = example_document(1)
    raw.update(changes)
    path.write_text(yaml.safe_dump(raw, sort_keys=False), encoding="utf-8")
    return path


def test_demo_writes_the_example_outputs(tmp_path, capsys):
    assert main(["-q", "demo", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "similarity.csv").exists()
    printed = capsys.readouterr().out
    assert "sigma2_r1" in printed
    assert "wrote" in printed


def test_similarity_verb_writes_only_indexes(tmp_path):
    assert main(["-q", "similarity", "--example", "2", "--out", str(tmp_path)]) == EXIT_OK
    assert sorted(path.name for path in tmp_path.iterdir()) == ["similarity.csv"]
    frame = pd.read_csv(tmp_path / "similarity.csv")
    assert sorted(set(frame["guest"])) == ["sigma2", "sigma3"]


def test_ilc_verb_stops_before_transfer(tmp_path):
    assert main(["-q", "ilc", "--example", "1", "--max-iters", "5", "--out", str(tmp_path)]) == EXIT_OK
    names = sorted(path.name for path in tmp_path.iterdir())
    assert names == ["ilc_sigma2_r1.csv", "ilc_sigma2_r2.csv", "similarity.csv"]
    assert len(pd.read_csv(tmp_path / "ilc_sigma2_r1.csv")) == 6


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["transfer"],
        ["transfer", "--example", "9"],
        ["-v", "-q", "demo"],
        ["demo", "--gamma", "fast"],
        ["demo", "--seed", "3"],
    ],
)
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_version_exits_cleanly(capsys):
    assert main(["--version"]) == EXIT_OK
    assert "1.0.0" in capsys.readouterr().out


def test_unknown_system_is_a_validation_error(tmp_path, caplog):
    path = write_scenario(tmp_path / "bad.yaml", tasks=[{"guest": "sigma9", "host": "sigma1", "reference": "r1"}])
    assert main(["transfer", "--scenario", str(path), "--out", str(tmp_path / "out")]) == EXIT_VALIDATION
    assert "unknown system: sigma9" in caplog.text
    assert not (tmp_path / "out").exists()


def test_bad_tolerance_override_is_a_validation_error(tmp_path):
    assert main(["demo", "--tol", "0", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["demo", "--max-iters", "-1", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_divergent_gain_is_a_numerical_error(tmp_path):
    assert main(["-q", "demo", "--gamma", "1e6", "--out", str(tmp_path)]) == EXIT_NUMERICAL


def test_dissimilar_transfer_needs_the_flag(tmp_path):
    path = write_scenario(tmp_path / "strict.yaml", allow_dissimilar=False)
    out = tmp_path / "out"
    argv = ["-q", "transfer", "--scenario", str(path), "--max-iters", "3", "--out", str(out)]
    assert main(argv) == EXIT_NUMERICAL
    assert main(argv + ["--allow-dissimilar"]) == EXIT_OK
    assert (out / "summary.csv").exists()


def test_blocked_output_directory_is_an_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    assert main(["-q", "similarity", "--example", "1", "--out", str(blocker)]) == EXIT_IO


def test_scenario_output_dir_is_used_without_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_scenario(tmp_path / "scenario.yaml", output_dir="from_file")
    assert main(["-q", "similarity", "--scenario", str(path)]) == EXIT_OK
    assert (tmp_path / "from_file" / "similarity.csv").exists()


def test_sweep_writes_a_passing_table(tmp_path, capsys):
    assert main(["-q", "sweep", "--seed", "3", "--pairs", "4", "--out", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "sweep.csv")
    assert len(frame) == 4
    assert frame["passed"].all()
    assert "4 of 4 pairs passed" in capsys.readouterr().out
