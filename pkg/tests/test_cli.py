import os
import subprocess
import sys

import numpy as np
import pytest

from dagmc.cli import build_parser, chain_path, main
from dagmc.io import read_trace_binary, read_trace_csv

from conftest import MODELS

BASEBALL = os.path.join(MODELS, "baseball.model")
SHORT = ["--niter", "200", "--nburn", "20"]


def test_single_file_report(capsys):
    assert main([BASEBALL, *SHORT]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("Functional average = [ ")
    assert out[1] == "Acceptance rates:"
    assert len(out) == 2 + 20
    assert out[2].startswith(" ( mu ): ")


def test_override_file_adds_breakdown(capsys):
    assert main([BASEBALL, os.path.join(MODELS, "amcmc_dr.model"), *SHORT]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 + 2 * 20
    assert out[3].startswith("  (") and " + " in out[3]


def test_eval_fragment_outfile(tmp_path, capsys):
    out = tmp_path / "bb.bin"
    assert main([BASEBALL, "-e", f"para.outfile = '{out}'", *SHORT]) == 0
    t = read_trace_binary(out)
    assert t.rows.shape == (200, 20 + 3)
    assert t.headers[-3:] == ["functional[1]", "functional[2]", "functional[3]"]


def test_out_flag_and_thin(tmp_path, capsys):
    out = tmp_path / "bb.csv"
    assert main([BASEBALL, "--out", str(out), "--thin", "10", *SHORT]) == 0
    assert read_trace_csv(out).nrows == 20


def test_seed_flag_changes_chain(capsys):
    main([BASEBALL, *SHORT, "--seed", "1"])
    a = capsys.readouterr().out
    main([BASEBALL, *SHORT, "--seed", "1"])
    b = capsys.readouterr().out
    main([BASEBALL, *SHORT, "--seed", "2"])
    c = capsys.readouterr().out
    assert a == b != c


def test_missing_file(capsys):
    assert main(["nope.model"]) == 1
    assert "file not found: nope.model" in capsys.readouterr().err


def test_syntax_error_reported(capsys):
    assert main([BASEBALL, "-e", "para.bogus = 1"]) == 1
    assert capsys.readouterr().err.startswith("error: <-e>:1:")


def test_chains(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main([BASEBALL, *SHORT, "--chains", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "Chain 1 (seed 0):" in text and "Chain 2 (seed 1):" in text
    assert "Pooled functional average = [ " in text
    a = read_trace_csv(tmp_path / "c.1.csv").rows
    b = read_trace_csv(tmp_path / "c.2.csv").rows
    assert a.shape == b.shape == (200, 23) and not np.array_equal(a, b)
    assert main([BASEBALL, "--chains", "0"]) == 2


def test_chain_path():
    assert chain_path("x/bb.bin", 0, 1) == "x/bb.bin"
    assert chain_path("x/bb.bin", 2, 3) == "x/bb.3.bin"
    assert chain_path(None, 0, 4) is None


def test_parser_requires_model():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dagmc", BASEBALL, *SHORT],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("Functional average")
