import re
from pathlib import Path

import numpy as np
import pytest
import yaml

from benchmarks import example_scenario
from experiments import run_scenario
from scenario import (
    ScenarioError,
    Tolerances,
    dump_scenario,
    load_scenario,
    parse_scenario,
    pulse_reference,
    save_scenario,
    sine_reference,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

SCALAR = {"A": [[1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "x0": [0.0]}


def document(**changes):
    raw = {
        "horizon": 4,
        "systems": {"plant": dict(SCALAR), "model": dict(SCALAR, A=[[0.5]])},
        "references": {"step": {"samples": [0.0, 1.0, 1.0, 1.0]}},
        "tasks": [{"guest": "model", "host": "plant", "reference": "step"}],
    }
    raw.update(changes)
    return raw


def test_minimal_scenario_loads_with_empty_similarity_section():
    scenario = parse_scenario({"horizon": 2, "systems": {"only": SCALAR}})
    assert list(scenario.systems) == ["only"]
    assert scenario.tasks == [] and scenario.references == {}
    assert scenario.tolerances == Tolerances()
    assert run_scenario(scenario).reports == {}


def test_sine_generator_samples_the_horizon():
    scenario = parse_scenario(
        document(references={"wave": {"type": "sine", "amplitude": 1, "period": 8}}, tasks=[], horizon=25)
    )
    t = np.arange(25)
    assert np.allclose(scenario.references["wave"], np.sin(np.pi * t / 4.0), atol=1e-15)


def test_pulse_generator_is_on_for_four_of_eight_steps():
    signal = pulse_reference(16)
    assert signal[:8].tolist() == [0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]
    assert np.array_equal(signal[8:], signal[:8])
    assert sine_reference(3, amplitude=2.0, period=4.0).tolist() == pytest.approx([0.0, 2.0, 0.0], abs=1e-15)


def test_unknown_system_is_named():
    raw = document(tasks=[{"guest": "sigma9", "host": "plant", "reference": "step"}])
    with pytest.raises(ScenarioError, match="unknown system: sigma9"):
        parse_scenario(raw)


def test_schema_violations_carry_field_paths():
    with pytest.raises(ScenarioError, match=r"tolerances\.similarity"):
        parse_scenario(document(tolerances={"similarity": -1.0}))
    with pytest.raises(ScenarioError, match=r"references\.step\.samples"):
        parse_scenario(document(references={"step": {"samples": [1.0, 2.0]}}))
    with pytest.raises(ScenarioError, match=r"systems\.model.*dimension mismatch at B\(0\)"):
        parse_scenario(document(systems={"plant": SCALAR, "model": dict(SCALAR, B=[[1.0], [2.0]])}))
    with pytest.raises(ScenarioError, match=r"ilc\.max_iters"):
        parse_scenario(document(ilc={"max_iters": "many"}))
    with pytest.raises(ScenarioError, match="unknown top-level keys"):
        parse_scenario(document(plots=True))


@pytest.mark.parametrize("flag", ["false", "yes", 1, 0])
def test_allow_dissimilar_must_be_a_boolean(flag):
    with pytest.raises(ScenarioError, match=r"allow_dissimilar: expected true or false"):
        parse_scenario(document(allow_dissimilar=flag))
    assert parse_scenario(document(allow_dissimilar=False)).allow_dissimilar is False


def test_misspelled_slope_is_reported_with_the_system_path(tmp_path):
    path = tmp_path / "typo.yaml"
    path.write_text(
        "horizon: 3\nsystems:\n  plant:\n    A: {base: [[1.0]], slop: [[0.5]]}\n    B: [[1.0]]\n    C: [[1.0]]\n",
        encoding="utf-8",
    )
    with pytest.raises(ScenarioError, match=r"systems\.plant: A: unknown keys \['slop'\]"):
        load_scenario(path)


def test_inconsistent_channel_counts_are_rejected():
    wide = dict(SCALAR, B=[[1.0, 0.0]], D=[[0.0, 0.0]])
    with pytest.raises(ScenarioError, match="dimension inconsistency"):
        parse_scenario(document(systems={"plant": SCALAR, "model": wide}))


def test_task_names():
    scenario = parse_scenario(document())
    assert scenario.tasks[0].name == "model_step"
    with pytest.raises(ScenarioError, match="must match"):
        parse_scenario(document(tasks=[{"guest": "model", "host": "plant", "reference": "step", "name": "a/b"}]))
    twice = [{"guest": "model", "host": "plant", "reference": "step"}] * 2
    with pytest.raises(ScenarioError, match="duplicate"):
        parse_scenario(document(tasks=twice))


def test_references_repeat_across_output_channels():
    two_out = {"A": [[1.0]], "B": [[1.0]], "C": [[1.0], [2.0]], "D": [[0.0], [0.0]], "x0": [0.0]}
    raw = {
        "horizon": 3,
        "systems": {"plant": two_out},
        "references": {
            "pulse": {"type": "pulse", "period": 2, "on": [1]},
            "rows": {"samples": [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]},
        },
    }
    scenario = parse_scenario(raw)
    assert scenario.references["pulse"].tolist() == [0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
    assert scenario.references["rows"].tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]


def test_yaml_errors_report_the_position(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("horizon: 4\nsystems:\n  plant: [1, 2\n", encoding="utf-8")
    with pytest.raises(ScenarioError) as caught:
        load_scenario(path)
    assert re.match(rf"{re.escape(str(path))}:\d+:\d+: ", str(caught.value))


def test_missing_file_is_a_scenario_error(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "absent.yaml")


def test_dump_and_reload_round_trip(tmp_path):
    original = example_scenario(2).with_overrides(seed=7, output_dir="results")
    reloaded = load_scenario(save_scenario(original, tmp_path / "copy.yaml"))
    assert list(reloaded.systems) == list(original.systems)
    for name, system in original.systems.items():
        for field in ("A", "B", "C", "D", "x0"):
            assert np.array_equal(getattr(reloaded.systems[name], field), getattr(system, field))
    for name, signal in original.references.items():
        assert np.array_equal(reloaded.references[name], signal)
    assert reloaded.tasks == original.tasks
    assert reloaded.tolerances == original.tolerances
    assert reloaded.ilc == original.ilc
    assert (reloaded.seed, reloaded.output_dir, reloaded.allow_dissimilar) == (7, "results", True)
    assert yaml.safe_load(dump_scenario(reloaded)) == yaml.safe_load(dump_scenario(original))


@pytest.mark.parametrize("example_id", [1, 2])
def test_bundled_files_match_built_in_examples(example_id):
    from_file = load_scenario(SCENARIO_DIR / f"example{example_id}.yaml")
    built_in = example_scenario(example_id)
    assert list(from_file.systems) == list(built_in.systems)
    for name, system in built_in.systems.items():
        for field in ("A", "B", "C", "D", "x0"):
            assert np.array_equal(getattr(from_file.systems[name], field), getattr(system, field))
    for name, signal in built_in.references.items():
        assert np.array_equal(from_file.references[name], signal)
    assert from_file.tasks == built_in.tasks
    assert from_file.allow_dissimilar and built_in.allow_dissimilar


def test_overrides_keep_unset_fields():
    scenario = parse_scenario(document())
    tightened = scenario.with_overrides(tolerances=Tolerances.uniform(1e-6), seed=None)
    assert tightened.tolerances.similarity == 1e-6
    assert tightened.seed is None
    assert tightened.tasks == scenario.tasks
