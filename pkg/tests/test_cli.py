from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from viability.cli import dispatch

DATA = Path(__file__).resolve().parent.parent / "data"


def run(tmp_path, *argv):
    return dispatch(list(argv) + ["--out", str(tmp_path)])


def manifest(tmp_path):
    return json.loads((tmp_path / "manifest.json").read_text())


class TestTreeCommands:
    def test_binomial_round_trip(self, tmp_path):
        assert run(tmp_path, "tree", "binomial", "--u", "6/5", "--d", "9/10",
                   "--periods", "2", "--file", "b.tree") == 0
        assert run(tmp_path, "cps", "--tree", str(tmp_path / "b.tree"), "--lambda", "0") == 0

    def test_random_needs_seed(self, tmp_path):
        assert run(tmp_path, "tree", "random") == 2


class TestSolvers:
    def test_cps(self, tmp_path, capsys):
        assert run(tmp_path, "cps", "--tree", str(DATA / "kelly.tree"), "--lambda", "0.05") == 0
        out = capsys.readouterr().out
        assert "SCPS: yes, delta=" in out
        header = (tmp_path / "certificate.csv").read_text().splitlines()[0]
        assert header == "node_id,w,S_tilde,Z,slack"
        m = manifest(tmp_path)
        assert m["status"] == "pass" and m["topic"]

    def test_cps_strict_without_scps(self, tmp_path):
        assert run(tmp_path, "cps", "--tree", str(DATA / "arb1.tree"), "--lambda", "0.01") == 0
        assert run(tmp_path, "cps", "--tree", str(DATA / "arb1.tree"), "--lambda", "0.01",
                   "--strict") == 1

    @pytest.mark.parametrize("exact", [False, True])
    def test_arb(self, tmp_path, exact):
        extra = ["--exact"] if exact else []
        assert run(tmp_path, "arb", "--tree", str(DATA / "arb1.tree"), "--lambda", "0",
                   *extra) == 0
        assert (tmp_path / "witness.csv").is_file()

    def test_shadow(self, tmp_path):
        assert run(tmp_path, "shadow", "--tree", str(DATA / "kelly.tree"), "--lambda", "0.3") == 0
        header = (tmp_path / "shadow.csv").read_text().splitlines()[0]
        assert header == "node_id,S,S_tilde,ratio,segment"
        assert (tmp_path / "spread.csv").is_file()

    def test_oa(self, tmp_path):
        assert run(tmp_path, "oa", "--model", str(DATA / "martingale.tree"),
                   "--alpha", "0.1,0.5") == 0
        rows = (tmp_path / "oa.csv").read_text().splitlines()
        assert len(rows) == 3

    def test_upbr(self, tmp_path):
        assert run(tmp_path, "upbr", "--model", str(DATA / "arb1.tree"), "--lambda", "0") == 0
        assert (tmp_path / "tail_leverage_ladder.csv").is_file()
        assert (tmp_path / "tail.dat").read_text().startswith("# m zero buy_and_hold")

    def test_optimize(self, tmp_path, capsys):
        assert run(tmp_path, "optimize", "--tree", str(DATA / "kelly1.tree"), "--lambda", "0",
                   "--wealth", "1", "--trials", "200", "--seed", "1") == 0
        out = capsys.readouterr().out
        assert "u(x) = 0.36299" in out
        assert (tmp_path / "strategy.csv").read_text().startswith(
            "node_id,dphi_up,dphi_down,V_liq")
        m = manifest(tmp_path)
        assert abs(m["results"]["u"] - 0.3629900) < 1e-6

    def test_optimize_refuses_arbitrage(self, tmp_path):
        assert run(tmp_path, "optimize", "--tree", str(DATA / "arb1.tree"),
                   "--lambda", "0", "--wealth", "1") == 1


class TestExamples:
    def test_poisson_nominal_fails_pathwise(self, tmp_path):
        code = run(tmp_path, "example", "poisson", "--lambda", "0.1", "--paths", "20000",
                   "--seed", "7")
        assert code == 1
        checks = manifest(tmp_path)["checks"]
        failed = {k for k, v in checks.items() if not v["passed"]}
        assert failed and all("inv_Y" not in k for k in failed)

    def test_poisson_corrected(self, tmp_path):
        assert run(tmp_path, "example", "poisson", "--lambda", "0.1", "--paths", "20000",
                   "--seed", "7", "--wealth", "corrected") == 0

    def test_grs(self, tmp_path):
        assert run(tmp_path, "example", "grs", "--paths", "20000", "--nmax", "8",
                   "--seed", "2") == 0
        assert (tmp_path / "grs_tau.csv").is_file()

    def test_seed_required(self, tmp_path):
        assert run(tmp_path, "example", "poisson", "--lambda", "0.1", "--paths", "100") == 2

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d, threads in ((a, "1"), (b, "3")):
            assert dispatch(["example", "poisson", "--lambda", "0.1", "--paths", "70000",
                             "--seed", "5", "--wealth", "corrected", "--threads", threads,
                             "--out", str(d)]) == 0
        for name in ("poisson_summary.csv", "poisson_paths.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestUsage:
    @pytest.mark.parametrize("argv", [
        ["cps", "--lambda", "0.1"],
        ["cps", "--tree", "missing.tree", "--lambda", "0.1"],
        ["cps", "--tree", str(DATA / "kelly.tree"), "--lambda", "1.5"],
        ["cps", "--tree", str(DATA / "kelly.tree"), "--bogus"],
        ["nonsense"],
    ])
    def test_usage_errors(self, tmp_path, argv):
        assert run(tmp_path, *argv) == 2

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "viability", "cps", "--tree", str(DATA / "kelly.tree"),
             "--lambda", "0.05", "--out", str(tmp_path)],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0
        assert "SCPS: yes" in proc.stdout
