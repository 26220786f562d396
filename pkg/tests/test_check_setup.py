from types import SimpleNamespace

import check_setup
from check_setup import PYTHON_VERSION_MINOR, REQUIRED_PACKAGES, check_environment, missing_packages


def test_required_packages_are_importable():
    assert missing_packages() == []


def test_missing_packages_are_named():
    assert missing_packages(["numpy", "surely_not_a_real_package_xyz"]) == ["surely_not_a_real_package_xyz"]


def test_stack_is_listed():
    assert {"numpy", "pandas", "yaml", "langgraph"} <= set(REQUIRED_PACKAGES)


def test_environment_check_reports(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    check_environment()
    assert "Sanity Check" in capsys.readouterr().out
    assert (tmp_path / "logs").is_dir()


def test_supported_python_versions(tmp_path, monkeypatch, capsys):
    assert PYTHON_VERSION_MINOR == [10, 11]
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr(check_setup.sys, "version_info", SimpleNamespace(major=3, minor=12))
    assert check_environment() is False
    assert "Required: 3.10 or 3.11" in capsys.readouterr().out
