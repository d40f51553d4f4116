import csv
import io
import math

import pytest

from keylength.cli import config_tokens, main
from keylength.core import EstimateResult, InvalidParameterError, Method
from keylength.harness import (COLUMNS, ExperimentSpec, clamp_to_seed_bits, figure_points, run,
                               to_csv)

HEADER = "scheme,n_v,dwr_db,epsilon,n_o,gamma,wnr_db,method,p_hat,bits,std_error,trials,seed,wall_time_ms"


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_header_is_exact():
    assert ",".join(COLUMNS) == HEADER
    assert to_csv([]).splitlines() == [HEADER]


def test_theory_kma_row(capsys):
    code, out, _ = _run(capsys, "theory", "--nv", "300", "--dwr", "10", "--eps", "0.01", "--no", "1")
    assert code == 0
    assert out.splitlines()[0] == HEADER
    rows = _rows(out)
    assert len(rows) == 1
    assert float(rows[0]["bits"]) == pytest.approx(8.0, abs=1.0)
    assert rows[0]["method"] == "closed_form"


def test_empty_region_renders_inf(capsys):
    code, out, _ = _run(capsys, "theory", "--nv", "4", "--dwr", "20", "--eps", "0.01")
    assert code == 0
    assert _rows(out)[0]["bits"] == "inf"


def test_asymptote_rows(capsys):
    code, out, _ = _run(capsys, "theory", "--asym", "--dwr", "8", "10", "12", "--eps", "0.01")
    rows = _rows(out)
    assert code == 0 and len(rows) == 3
    assert {r["n_v"] for r in rows} == {"inf"}


@pytest.mark.parametrize("argv", [["theory", "--nv", "1"], ["theory", "--bogus"], ["sweep"],
                                  ["sweep", "--fig", "2"], ["mc", "--scheme", "qim"],
                                  ["ser", "--scheme", "iss", "--gamma", "50"],
                                  ["theory", "--scheme", "iss"], ["theory", "--eps", "1.5"],
                                  ["theory", "--threads", "0"], []])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert err


def test_numerical_failure_exit_3(capsys):
    code, _, err = _run(capsys, "rare-event", "--nv", "60", "--eps", "0.01", "--max-levels", "20")
    assert code == 3
    assert "n_v=60" in err and "rare_event_geometric" in err


@pytest.mark.parametrize("cmd", [["angle", "--nt", "1000"], ["rare-event"],
                                 ["rare-event", "--score", "blackbox", "--nt", "1000"]])
def test_empty_region_rows(capsys, cmd):
    code, out, _ = _run(capsys, *cmd, "--nv", "4", "--dwr", "20", "--eps", "0.01")
    assert code == 0
    assert _rows(out)[0]["bits"] == "inf"


def test_unwritable_output_is_usage_error(capsys, tmp_path):
    code, _, _ = _run(capsys, "theory", "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 2


def test_out_file_and_summary(capsys, tmp_path):
    path = tmp_path / "o.csv"
    code, out, _ = _run(capsys, "theory", "--nv", "300", "--eps", "0.01", "--out", str(path))
    assert code == 0
    assert path.read_text(encoding="utf-8").splitlines()[0] == HEADER
    assert "closed_form" in out and "wrote 1 rows" in out


def test_seed_bits_clamp_flag(capsys):
    _, out, _ = _run(capsys, "theory", "--nv", "300", "--eps", "0.01", "--seed-bits", "32")
    assert float(_rows(out)[0]["bits"]) == 32.0


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# point\nnv = 300\ndwr=10\neps = 0.01\nno = 1, 10\n", encoding="utf-8")
    assert config_tokens(str(cfg)) == ["--nv", "300", "--dwr", "10", "--eps", "0.01",
                                       "--no", "1", "10"]
    _, out, _ = _run(capsys, "theory", "--config", str(cfg))
    assert [r["n_o"] for r in _rows(out)] == ["1", "10"]
    _, out, _ = _run(capsys, "theory", "--config", str(cfg), "--no", "0")
    rows = _rows(out)
    assert [r["n_o"] for r in rows] == ["0"] and float(rows[0]["bits"]) > 40


def test_bad_config_line(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nv 300\n", encoding="utf-8")
    code, _, _ = _run(capsys, "theory", "--config", str(cfg))
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["mc", "--nv", "30", "--dwr", "5", "--eps", "0.05", "--no", "0", "1", "--trials", "30000"],
    ["mc", "--nv", "3", "--dwr", "2", "--eps", "0.3", "--trials", "3000", "--nt", "400",
     "--indicator", "counting"],
    ["ser", "--scheme", "iss", "--nv", "80", "--gamma", "0", "0.8", "--wnr", "-10",
     "--trials", "45000"],
    ["angle", "--nv", "60", "80", "--eps", "0.01", "--nt", "20000"],
    ["rare-event", "--nv", "40", "--eps", "0.01", "--particles", "30"],
    ["rare-event", "--nv", "12", "--dwr", "0", "--eps", "0.05", "--score", "blackbox",
     "--nt", "500", "--particles", "20"],
])
def test_byte_identical_across_threads(capsys, argv):
    outs = []
    for threads in ("1", "3", "1"):
        code, out, _ = _run(capsys, *argv, "--seed", "9", "--threads", threads)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1] == outs[2]


def test_timing_column(capsys):
    _, out, _ = _run(capsys, "theory", "--nv", "50", "--timing")
    assert float(_rows(out)[0]["wall_time_ms"]) >= 0
    _, out, _ = _run(capsys, "theory", "--nv", "50")
    assert _rows(out)[0]["wall_time_ms"] == ""


def test_fig4_sweep(capsys):
    code, out, _ = _run(capsys, "sweep", "--fig", "4")
    rows = _rows(out)
    assert code == 0 and len(rows) == 63
    assert {r["method"] for r in rows} == {"asymptotic"}


def test_figure_presets():
    fig3 = figure_points(ExperimentSpec("sweep", fig=3))
    assert {p.dwr_db for p in fig3} == {8.0, 10.0, 12.0}
    assert {p.epsilon for p in fig3} == {0.01}
    assert {"closed_form", "angle_approx", "rare_event_geometric",
            "rare_event_blackbox"} <= {p.method for p in fig3}
    fig9 = figure_points(ExperimentSpec("sweep", fig=9, wnr_db=[-10.0]))
    assert {p.scheme for p in fig9} == {"iss"}
    assert {(p.n_v, p.dwr_db) for p in fig9} == {(80, 10.0)}
    assert len({p.gamma for p in fig9}) >= 5
    assert {p.wnr_db for p in fig9 if p.method == "ser_monte_carlo"} == {-10.0}
    for fig, n_o in ((5, 1), (6, 10)):
        pts = figure_points(ExperimentSpec("sweep", fig=fig))
        assert {p.n_o for p in pts} == {n_o}
        assert {p.method for p in pts} == {"closed_form", "monte_carlo"}


def test_full_restores_large_counts():
    spec = ExperimentSpec("angle", full=True)
    assert spec.resolved("nt") == 10**6 and spec.resolved("trials") == 10**6
    assert spec.resolved("nt_blackbox") == 50000
    small = ExperimentSpec("angle")
    assert small.resolved("nt") == 10**5 and small.resolved("trials") == 10**5


def test_run_rows_in_grid_order():
    spec = ExperimentSpec("theory", n_v=[300, 60, 1000], epsilon=[0.01, 0.1], threads=4)
    points, rows = run(spec)
    assert [(p.n_v, p.epsilon) for p in points] == [(n, e) for n in (300, 60, 1000)
                                                    for e in (0.01, 0.1)]
    assert [r[1] for r in rows] == ["300", "300", "60", "60", "1000", "1000"]


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("theory", n_v=[])
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("plot")


@pytest.mark.parametrize("bits, cap, expected", [(120.0, 64, 64.0), (8.0, 64, 8.0),
                                                 (math.inf, 128, 128.0)])
def test_clamp_to_seed_bits(bits, cap, expected):
    p = 0.0 if bits == math.inf else 2.0**-bits
    r = EstimateResult(p_hat=p, bits=bits, std_error=0.0, method=Method.CLOSED_FORM)
    out = clamp_to_seed_bits(r, cap)
    assert out.bits == expected
    assert out.p_hat == pytest.approx(2.0**-expected)


def test_clamp_rejects_nonpositive():
    r = EstimateResult(p_hat=0.5, bits=1.0, std_error=0.0, method=Method.CLOSED_FORM)
    with pytest.raises(InvalidParameterError):
        clamp_to_seed_bits(r, 0)
