import subprocess
import sys

import numpy as np
import pytest

from regretfig.cli import main, parse_input

HEADER = "round,mean_cum_regret,stderr_cum_regret,mean_cum_spend,mean_normalized_regret"


def sample_csv(tmp_path, name="run.csv"):
    t = np.arange(1, 101)
    lines = [HEADER]
    for ti in t:
        lines.append(f"{ti},{ti**0.8:.12g},{0.1 * ti**0.8:.12g},0,{ti**0.05:.12g}")
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def test_parse_input_labels():
    assert parse_input("a/b.csv:fancy").label == "fancy"
    assert parse_input("a/b.csv").label == "b"
    assert str(parse_input("a/b.csv:fancy").path) == "a/b.csv"


def test_plot_token_is_optional(tmp_path):
    src = sample_csv(tmp_path)
    out1 = tmp_path / "one.png"
    out2 = tmp_path / "two.png"
    assert main(["plot", "--mode", "cumulative", "--in", f"{src}:x",
                 "--out", str(out1)]) == 0
    assert main(["--mode", "cumulative", "--in", f"{src}:x",
                 "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_default_output_lands_beside_input(tmp_path):
    src = sample_csv(tmp_path)
    assert main(["--mode", "normalized", "--in", str(src)]) == 0
    assert (tmp_path / "normalized.png").exists()


def test_missing_file_exits_one(tmp_path, capsys):
    code = main(["--mode", "cumulative", "--in", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "x.png")])
    assert code == 1
    assert "nope.csv" in capsys.readouterr().err


def test_schema_error_exits_one_naming_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("round,mean_cum_spend\n1,0\n")
    code = main(["--mode", "cumulative", "--in", str(bad),
                 "--out", str(tmp_path / "x.png")])
    assert code == 1
    assert "mean_cum_regret" in capsys.readouterr().err


def test_bad_flags_exit_two(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--mode", "sideways", "--in", "a.csv"])
    assert exc.value.code == 2


def test_round_trip_with_simulator(tmp_path):
    """End to end: simulate, then render both figure modes from the CSVs."""
    pytest.importorskip("pacesim")
    outdir = tmp_path / "results"
    sim = subprocess.run(
        [sys.executable, "-m", "pacesim", "simulate",
         "--setting", "gfp,gfp", "--n", "2", "--discounts", "1,0.5",
         "--T", "40", "--runs", "2", "--rho", "0.5", "--seed", "3",
         "--mc-values", "2000", "--out", str(outdir)],
        capture_output=True, text=True,
    )
    assert sim.returncode == 0, sim.stderr
    avp = outdir / "avp.csv"
    base = outdir / "baseline.csv"
    assert avp.exists() and base.exists()

    assert main(["plot", "--mode", "cumulative",
                 "--in", f"{avp}:adaptive", "--in", f"{base}:fixed",
                 "--out", str(outdir / "regret.png")]) == 0
    assert main(["plot", "--mode", "normalized",
                 "--in", f"{avp}:adaptive", "--in", f"{base}:fixed",
                 "--out", str(outdir / "normalized.png")]) == 0
    assert (outdir / "regret.png").stat().st_size > 0
    assert (outdir / "normalized.png").stat().st_size > 0
