from pathlib import Path

from main import OUTPUT_DIR_ENV, build_parser, main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return str(path)


def test_successful_run_returns_zero(tmp_path):
    out = tmp_path / "out"
    code = main(["org", "--config", str(CONFIG_DIR / "org.yaml"), "--replications", "1", "--out", str(out),
                 "--quiet"])
    assert code == 0
    assert (out / "runs.csv").is_file()


def test_invalid_config_returns_two(tmp_path):
    path = _write(tmp_path, "study: nk-analysis\nlandscape:\n  n: 4\n  k: 7\n")
    assert main(["nk", "--config", path, "--quiet"]) == 2


def test_missing_config_file_returns_two(tmp_path):
    assert main(["nk", "--config", str(tmp_path / "nope.yaml"), "--quiet"]) == 2


def test_subcommand_must_match_study(tmp_path):
    assert main(["ha", "--config", str(CONFIG_DIR / "nk.yaml"), "--quiet"]) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    out = tmp_path / "from-env"
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(out))
    code = main(["ca", "--config", str(CONFIG_DIR / "ca.yaml"), "--quiet"])
    assert code == 0
    assert (out / "summary.csv").is_file()


def test_cli_flag_beats_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "from-env"))
    out = tmp_path / "from-flag"
    assert main(["ca", "--config", str(CONFIG_DIR / "ca.yaml"), "--out", str(out), "--quiet"]) == 0
    assert (out / "runs.csv").is_file()
    assert not (tmp_path / "from-env").exists()


def test_unwritable_output_returns_three(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    code = main(["ca", "--config", str(CONFIG_DIR / "ca.yaml"), "--out", str(blocker / "out"), "--quiet"])
    assert code == 3


def test_sweep_command(tmp_path):
    path = _write(tmp_path, "study: nk-analysis\nreplications: 2\nlandscape:\n  n: 6\n  k: 1\n")
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", path, "--axis", "landscape.k", "--values", "0", "2",
                 "--out", str(out), "--quiet"])
    assert code == 0
    assert (out / "combined.csv").is_file()
    assert (out / "landscape.k=2" / "summary.csv").is_file()


def test_bad_sweep_axis_returns_two(tmp_path):
    path = _write(tmp_path, "study: nk-analysis\nlandscape:\n  n: 6\n  k: 1\n")
    code = main(["sweep", "--config", path, "--axis", "landscape.depth", "--values", "1",
                 "--out", str(tmp_path / "sweep"), "--quiet"])
    assert code == 2


def test_parser_overrides():
    args = build_parser().parse_args(["grow", "--config", "c.yaml", "--seed", "9", "--replications", "4"])
    assert (args.command, args.seed, args.replications, args.out) == ("grow", 9, 4, None)
