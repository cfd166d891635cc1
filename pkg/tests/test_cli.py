import numpy as np
import pytest

from sparsebench import __version__
from sparsebench.cli import main
from sparsebench.fs import matrix_dump
from sparsebench.harness import KSTAR_CSV_HEADER, PHASE_CSV_HEADER, PhaseTable
from sparsebench.lp import read_lp


def run(capsys, *argv):
    code = main(["--log-level", "ERROR", *argv])
    return code, capsys.readouterr().out.splitlines()


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["recover", "--n", "8"])
    assert e.value.code == 1


def test_recover(capsys, tmp_path):
    lp_path = tmp_path / "bp.lp"
    code, lines = run(
        capsys, "recover", "--n", "40", "--r", "2", "--k", "20", "--seed", "1", "--dump-lp", str(lp_path)
    )
    assert code == 0
    assert lines[0] == "support,planted_support,l2_error,l1_objective,verdict,status"
    support, planted, error, objective, verdict, status = lines[1].split(",")
    assert status == "optimal"
    assert verdict == "exact"
    assert support == planted
    assert float(objective) == pytest.approx(2.0, abs=1e-6)
    assert read_lp(lp_path).A.shape == (20, 80)


def test_recover_invalid_sparsity(capsys):
    code, lines = run(capsys, "recover", "--n", "8", "--r", "9", "--k", "4")
    assert code == 1
    assert lines == []


def test_ric_matrix_file(capsys, tmp_path):
    path = tmp_path / "phi.csv"
    matrix_dump(np.diag([1.0, 2.0]), path)
    code, lines = run(capsys, "ric", "--matrix-file", str(path), "--r", "1")
    assert code == 0
    assert lines == ["r,mode,lambda_min,lambda_max,C_opt,delta,verdict-inputs", "1,exact,1.0,4.0,2.5,0.6,usable"]


def test_ric_sampled(capsys):
    code, lines = run(capsys, "ric", "--n", "12", "--k", "6", "--r", "2", "--sampled", "30")
    assert code == 0
    assert lines[1].startswith("2,sampled(30),")
    assert lines[1].endswith(",lower-bound")


def test_ric_condition(capsys, tmp_path):
    path = tmp_path / "eye.csv"
    matrix_dump(np.eye(8), path)
    code, lines = run(capsys, "ric", "--matrix-file", str(path), "--r", "2", "--condition")
    assert code == 0
    assert lines[0] == "r,delta_3r,delta_4r,C_shared,verdict,verdict_per_r"
    assert lines[1].split(",")[4] == "True"


def test_ric_needs_matrix(capsys):
    code, _ = run(capsys, "ric", "--r", "1")
    assert code == 1


def test_width(capsys):
    code, lines = run(capsys, "width", "--n", "64", "--r", "2", "--samples", "1000", "--seed", "3")
    assert code == 0
    n, r, samples, mean, stderr, bound = lines[1].split(",")
    assert (n, r, samples) == ("64", "2", "1000")
    assert float(mean) <= float(bound) + 3 * float(stderr)


def test_width_too_few_samples(capsys):
    code, _ = run(capsys, "width", "--n", "64", "--r", "2", "--samples", "10")
    assert code == 1


def test_escape_gordon(capsys):
    code, lines = run(capsys, "escape", "--k", "100", "--w", "5")
    assert code == 0
    k, w, probability, vacuous = lines[1].split(",")
    assert float(probability) == pytest.approx(0.10295, abs=1e-5)
    assert vacuous == "False"


def test_escape_recovery(capsys):
    code, lines = run(capsys, "escape", "--k", "800", "--r", "2", "--n", "1024")
    assert code == 0
    fields = lines[1].split(",")
    assert float(fields[3]) == pytest.approx(180.41, abs=0.01)
    assert float(fields[4]) == pytest.approx(0.999983, abs=1e-6)


def test_escape_needs_arguments(capsys):
    code, _ = run(capsys, "escape", "--k", "10")
    assert code == 1


def test_maurey(capsys):
    code, lines = run(capsys, "maurey", "--n", "16", "--m", "4", "--trials", "20")
    assert code == 0
    assert lines[0].startswith("n,m,trials,mean_error_m,mean_error_4m,ratio")
    assert lines[1].startswith("16,4,20,")


def test_lln(capsys):
    code, lines = run(capsys, "lln", "--n", "8", "--r", "2", "--k", "2", "6", "--trials", "5")
    assert code == 0
    assert len(lines) == 3
    assert lines[1].startswith("8,2,2,5,")


def test_cone_check(capsys):
    code, lines = run(
        capsys,
        "cone-check",
        *("--n", "12", "--r", "1", "--k", "6", "10"),
        *("--trials", "5", "--width-samples", "1000"),
    )
    assert code == 0
    assert lines[0].startswith("n,r,k,trials,misses")
    assert [line.split(",")[2] for line in lines[1:]] == ["6", "10"]


class TestPhase:
    def test_flags(self, capsys, tmp_path):
        out = tmp_path / "phase.csv"
        svg = tmp_path / "phase.svg"
        code, lines = run(
            capsys,
            "phase",
            "--n", "16",
            "--r", "1", "2",
            "--k-min", "8",
            "--k-max", "16",
            "--k-step", "8",
            "--trials", "3",
            "--out", str(out),
            "--svg", str(svg),
        )
        assert code == 0
        assert lines == []
        table = PhaseTable.read(out)
        assert len(table) == 4
        assert out.read_text().splitlines()[0] == PHASE_CSV_HEADER
        assert "<svg" in svg.read_text()

    def test_config(self, capsys, tmp_path):
        config = tmp_path / "grid.yaml"
        config.write_text("ensemble: fourier\nn: 16\nr: 1\nk_min: 8\nk_max: 8\ntrials: 2\n")
        code, lines = run(capsys, "phase", "--config", str(config), "--seed", "4")
        assert code == 0
        assert lines[0] == PHASE_CSV_HEADER
        assert lines[1].startswith("partial-fourier,16,1,8,2,")
        assert lines[1].endswith(",4")

    def test_missing_grid(self, capsys):
        code, _ = run(capsys, "phase", "--n", "16")
        assert code == 1

    def test_kstar(self, capsys, tmp_path):
        table = tmp_path / "phase.csv"
        table.write_text(
            PHASE_CSV_HEADER
            + "\n"
            + "gaussian,64,2,10,20,2,18,0,0.1,0.5,0\n"
            + "gaussian,64,2,20,20,19,1,0,0.95,0.0,0\n"
            + "gaussian,64,2,30,20,20,0,0,1.0,0.0,0\n"
        )
        code, lines = run(capsys, "kstar", "--table", str(table))
        assert code == 0
        assert lines[0] == KSTAR_CSV_HEADER
        assert lines[1].split(",")[4] == "20"

    def test_kstar_missing_table(self, capsys, tmp_path):
        code, _ = run(capsys, "kstar", "--table", str(tmp_path / "nope.csv"))
        assert code == 1


def test_settings_file(capsys, tmp_path):
    settings = tmp_path / "settings.toml"
    settings.write_text("[sparsebench]\nworkers = 0\n")
    with pytest.raises(SystemExit) as e:
        main(["--settings", str(settings), "width", "--n", "8", "--r", "1", "--samples", "1000"])
    assert e.value.code == 1
