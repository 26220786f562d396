import json

from src.config import loads
from src.harness import run_experiment
from src.utils.validate_experiment_data import validate_entries, validate_file


def test_experiment_run_leaves_a_valid_log(tmp_path):
    """
    A full pipeline run logs validation, simulation, aggregation and emission.
    """
    config = loads("study: automaton\nautomaton:\n  steps: 2\n").with_overrides(output_dir=str(tmp_path / "out"))
    run_experiment(config, quiet=True)
    assert validate_file() == []


def test_missing_log_is_reported(tmp_path):
    assert validate_file(str(tmp_path / "absent.json")) == [f"{tmp_path / 'absent.json'} does not exist."]


def test_invalid_json_is_reported(tmp_path):
    path = tmp_path / "log.json"
    path.write_text("[", encoding="utf-8")
    assert "not valid JSON" in validate_file(str(path))[0]


def test_entry_problems_are_listed():
    entry = {
        "id": "1", "timestamp": "now", "component": "Painter", "study": "nk-analysis",
        "action": "SIMULATION", "details": {"parameters": {}}, "status": "MAYBE",
    }
    problems = validate_entries([entry, {"id": "2"}])
    assert any("component 'Painter'" in p for p in problems)
    assert any("status 'MAYBE'" in p for p in problems)
    assert any("'outcome'" in p for p in problems)
    assert any("Missing field 'timestamp' in entry #1" in p for p in problems)
    assert validate_entries([]) == ["experiment log must be a non-empty list."]


def test_logged_entries_are_json_serializable(isolated_experiment_log, tmp_path):
    config = loads("study: automaton\nautomaton:\n  steps: 1\n").with_overrides(output_dir=str(tmp_path / "out"))
    run_experiment(config, quiet=True)
    data = json.loads(isolated_experiment_log.read_text(encoding="utf-8"))
    assert [e["action"] for e in data] == ["CONFIG_VALIDATION", "SIMULATION", "AGGREGATION", "EMISSION"]
