from sqrbm_plots.cli import main


def test_cli_renders_sweep(sweep_dir, tmp_path, capsys):
    out = tmp_path / "fig.png"
    assert main(["sweep", str(sweep_dir), "--out", str(out)]) == 0
    assert out.is_file()
    assert str(out) in capsys.readouterr().out


def test_cli_renders_budget_svg(budget_dir, tmp_path):
    out = tmp_path / "fig.svg"
    assert main(["budget", str(budget_dir), "--out", str(out)]) == 0
    assert out.is_file()


def test_cli_reports_data_errors(tmp_path, capsys):
    empty = tmp_path / "nothing"
    empty.mkdir()
    assert main(["sweep", str(empty), "--out", str(tmp_path / "x.png")]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_linear_axis_flags(budget_dir, tmp_path):
    out = tmp_path / "lin.png"
    assert main(["budget", str(budget_dir), "--out", str(out), "--linear-x"]) == 0
    assert out.is_file()
