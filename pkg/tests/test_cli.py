# SPDX-License-Identifier: Apache-2.0
"""The `rgpssm` command line."""

import json

import pytest

from rgpssm.bench.cli import build_parser
from rgpssm.bench.cli import main


class TestParser:
    def test_run_options(self):
        args = build_parser().parse_args(["wingrock", "--no-hypopt", "--seed", "4", "--out", "results"])
        assert (args.command, args.no_hypopt, args.seed, args.out) == ("wingrock", True, 4, "results")

    def test_command_is_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestMain:
    def test_config_help(self, capsys):
        assert main(["config-help"]) == 0
        assert "RGPSSM_FILTER_BUDGET" in capsys.readouterr().out

    def test_missing_config_file_is_a_configuration_error(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.yaml")]) == 2

    def test_invalid_configuration(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("task = pendulum\n")
        assert main(["run", str(path)]) == 2

    def test_run_writes_the_report(self, tmp_path, capsys):
        path = tmp_path / "gpr.conf"
        path.write_text("task = gprcheck\ntrainSteps = 10\nforecastSteps = 0\n")
        out = tmp_path / "out"
        assert main(["run", str(path), "--runs", "2", "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert '"task": "gprcheck"' in printed
        assert "max_mean_error:" in printed
        assert json.loads((out / "report.json").read_text())["summary"]["steps"] == 10

    def test_sysid_with_a_missing_file_fails(self, tmp_path):
        assert main(["sysid", "--data", str(tmp_path / "absent.dat")]) == 1

    @pytest.mark.slow
    def test_quick_verify(self, tmp_path):
        out = tmp_path / "verify.json"
        assert main(["verify", "--quick", "--out", str(out)]) == 0
        results = json.loads(out.read_text())["results"]
        assert {r["status"] for r in results if r["blocking"]} == {"pass"}
