import json

import pytest

from longitude_lab import cli


def write(tmp_path, text):
    p = tmp_path / "c.cfg"
    p.write_text(text)
    return str(p)


def test_passing_run_exits_zero(tmp_path, capsys):
    cfg = write(tmp_path, "kind = shrink-chain\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert "checks passed" in capsys.readouterr().out
    data = json.loads((out / "report.json").read_text())
    assert data["passed"] is True
    assert (out / "report.csv").exists()
    assert (out / "shrink-chain__R1_over_R0_vs_M.svg").exists()


def test_failing_run_exits_one(tmp_path, capsys):
    cfg = write(tmp_path, "kind = shrink-chain\nratio_reference = 0.5\n")
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--no-plots"]) == 1
    assert "FAIL shrink-chain: R1 / R0" in capsys.readouterr().out
    assert not list((tmp_path / "o").glob("*.svg"))


def test_tolerance_scale_flag(tmp_path):
    # a loosened tolerance lets the reference mismatch through
    cfg = write(tmp_path, "kind = shrink-chain\nratio_reference = 0.0632\n")
    args = ["run", "--config", cfg, "--out", str(tmp_path / "o"), "--no-plots"]
    assert cli.main(args) == 1
    assert cli.main(args + ["--tolerance-scale", "10"]) == 0


@pytest.mark.parametrize("text", ["kind = shrink-chain\nbogus = 1\n", "kind = nope\n"])
def test_config_errors_exit_two(tmp_path, capsys, text):
    cfg = write(tmp_path, text)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_exits_two(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 2


def test_seed_override_is_recorded(tmp_path):
    cfg = write(tmp_path, "kind = appendix-geodesics\nsamples = 100\nseed = 1\n")
    cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "42", "--no-plots"])
    assert json.loads((tmp_path / "o" / "report.json").read_text())["seed"] == 42


def test_plot_subcommand(tmp_path, capsys):
    cfg = write(tmp_path, "kind = shrink-chain\n")
    out = tmp_path / "o"
    cli.main(["run", "--config", cfg, "--out", str(out), "--no-plots"])
    capsys.readouterr()
    assert cli.main(["plot", "--report", str(out / "report.json"), "--out", str(tmp_path / "figs")]) == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == 1 and printed[0].endswith(".svg")
