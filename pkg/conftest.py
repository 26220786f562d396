import pytest


@pytest.fixture(autouse=True)
def isolated_experiment_log(tmp_path, monkeypatch):
    """Every test writes its experiment log into its own temp dir."""
    log_file = tmp_path / "logs" / "experiment_data.json"
    monkeypatch.setenv("ACE_LOG_FILE", str(log_file))
    return log_file
