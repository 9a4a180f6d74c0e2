import json

import numpy as np
import pytest

from climarket.cli import main, read_config_file
from climarket.climate import ForcingKind
from climarket.sensitivity import RowOutcome, append_sweep_row, lhs_sample, read_prcc_csv, write_sweep_header
from climarket.sim import ParamSet, read_run_csv

FAST = ["--n-traders", "20", "--n-edge", "30", "--n-draws", "500", "--burn-in", "100"]
SWEEP_FAST = ["--n-draws", "500", "--burn-in", "100", "--n-sequences", "1"]


def run(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["run", "--out-dir", str(out), *FAST, *extra])
    return code, out


def test_run_twice_identical(tmp_path):
    c1, a = run(tmp_path, "a", "--seed", "42", "--n-sequences", "2")
    c2, b = run(tmp_path, "b", "--seed", "42", "--n-sequences", "2")
    assert c1 == c2 == 0
    assert (a / "run.csv").read_bytes() == (b / "run.csv").read_bytes()


def test_run_echoes_sequence_count(tmp_path):
    code, out = run(tmp_path, "o", "--seg", "0.05", "--n-sequences", "8")
    assert code == 0
    rows = read_run_csv(out / "run.csv")
    assert len(rows) == 8 and rows[-1]["end_year"] == 2062


def test_manifest_reproduces_run(tmp_path):
    _, a = run(tmp_path, "a", "--seed", "5", "--n-sequences", "2", "--true-model", "TSI")
    code = main(["run", "--config", str(a / "run_manifest.json"), "--out-dir", str(tmp_path / "b")])
    assert code == 0
    assert (a / "run.csv").read_bytes() == (tmp_path / "b" / "run.csv").read_bytes()
    m = json.loads((a / "run_manifest.json").read_text())
    assert m["seed"] == 5 and m["config"]["true_model"] == "TSI"


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# small run\nn_traders = 20\nn-edge = 30\nn_draws = 500\nburn_in = 100\nn_sequences = 3\n")
    assert read_config_file(cfg)["n_edge"] == "30"
    code = main(["run", "--config", str(cfg), "--n-sequences", "1", "--out-dir", str(tmp_path / "o")])
    assert code == 0 and len(read_run_csv(tmp_path / "o" / "run.csv")) == 1


def test_missing_temperature_csv(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code, _ = run(tmp_path, "o", "--temperature-csv", str(missing))
    assert code == 2
    assert str(missing) in capsys.readouterr().err


@pytest.mark.parametrize("text", ["bogus = 1\n", "n_traders 20\n", "n_traders = twenty\n"])
def test_bad_config_file(tmp_path, text):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(text)
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2


def test_bad_parameter_value(tmp_path):
    code, _ = run(tmp_path, "o", "--seg", "1.5")
    assert code == 2


def test_historical_default(tmp_path):
    out = tmp_path / "h"
    assert main(["historical", "--out-dir", str(out), *FAST]) == 0
    rows = read_run_csv(out / "historical.csv")
    assert len(rows) == 14 and rows[-1]["end_year"] == 2014


def test_historical_bad_coverage(tmp_path):
    short = tmp_path / "t.csv"
    short.write_text("year,anomaly_c\n" + "".join(f"{y},0.0\n" for y in range(1880, 2000)))
    assert main(["historical", "--out-dir", str(tmp_path / "h"), "--temperature-csv", str(short)]) == 2


def test_runtime_failure_exit_3(tmp_path, monkeypatch):
    import climarket.cli as cli

    def boom(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(cli, "run_simulation", boom)
    code, _ = run(tmp_path, "o")
    assert code == 3


def test_sweep_rows(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--n-points", "20", "--replicates", "2", "--out-dir", str(out), *SWEEP_FAST]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 21
    assert len((out / "design.csv").read_text().splitlines()) == 21


def sweep(out, *extra):
    return main(["sweep", "--n-points", "6", "--replicates", "2", "--out-dir", str(out), "--seed", "3",
                 *SWEEP_FAST, *extra])


def test_sweep_resume_matches_uninterrupted(tmp_path):
    full, part = tmp_path / "full", tmp_path / "part"
    assert sweep(full) == 0
    assert sweep(part) == 0
    lines = (part / "sweep.csv").read_text().splitlines(keepends=True)
    # keep three finished rows and half of the fourth
    (part / "sweep.csv").write_text("".join(lines[:4]) + lines[4][: len(lines[4]) // 2])
    assert sweep(part) == 0
    assert (part / "sweep.csv").read_bytes() == (full / "sweep.csv").read_bytes()
    assert (part / "design.csv").read_bytes() == (full / "design.csv").read_bytes()


def test_sweep_refuses_other_manifest(tmp_path):
    out = tmp_path / "s"
    assert sweep(out) == 0
    assert sweep(out, "--bins-k", "8") == 2


def synthetic_sweep(path, score, n=40, same_model=False):
    design = lhs_sample(n, np.random.default_rng(0))
    write_sweep_header(path)
    for i, p in enumerate(design.rows):
        if same_model:
            p = ParamSet(p.ideo, p.n_edge, p.n_traders, p.risk_tak, p.seg, ForcingKind.TSI)
        append_sweep_row(path, RowOutcome(i, p, score(p), 5, 5, "ok"))


def test_prcc_recovers_signs(tmp_path):
    path = tmp_path / "sweep.csv"
    synthetic_sweep(path, lambda p: 2 * p.ideo - p.risk_tak)
    assert main(["prcc", str(path), "--n-boot", "200"]) == 0
    rep = read_prcc_csv(tmp_path / "prcc.csv")
    assert rep["ideo"].estimate > 0.9 and rep["risk_tak"].estimate < -0.9


def test_prcc_constant_column(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    synthetic_sweep(path, lambda p: p.ideo, same_model=True)
    assert main(["prcc", str(path), "--n-boot", "200"]) == 2
    assert "true_model" in capsys.readouterr().err


def test_prcc_malformed(tmp_path):
    bad = tmp_path / "sweep.csv"
    bad.write_text("row,score\n1,2\n")
    assert main(["prcc", str(bad)]) == 2
    assert main(["prcc", str(tmp_path / "missing.csv")]) == 2
