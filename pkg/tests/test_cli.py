import json

import pytest

from openbook.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main

FAST = ["--set", "grid.profile_grid=1000", "--set", "foliation.n_pages=2"]


class TestMain:
    def test_verify_json(self, tmp_path, capsys):
        """Inputs: verify on tight-s3-disk with JSON output.
        Expected: Exit 0; a JSON report with timings and workers.
        Checks: The verify verb and --format json.
        """
        rc = main(["verify", "--output-dir", str(tmp_path), "--format", "json", "--workers", "2", *FAST])
        out = capsys.readouterr().out
        assert rc == EXIT_OK
        data = json.loads(out)
        assert data["passed"] is True
        assert data["workers"] == 2
        assert sorted(data["shs"]) == ["eps=0", "eps=0.01"]
        assert (tmp_path / "report.json").is_file()

    def test_index_tree(self, tmp_path, capsys):
        """Inputs: index on tight-s3-disk with the default tree output and k_max = 2.
        Expected: Exit 0 and a tree showing ind = 2.
        Checks: The index verb and the summary tree.
        """
        rc = main(["index", "--output-dir", str(tmp_path), "--set", "index.k_max=2", *FAST])
        out = capsys.readouterr().out
        assert rc == EXIT_OK
        assert out.startswith("Run tight-s3-disk [index]: PASS")
        assert "ind = 2" in out
        assert "binding 0 cover 2: mu_CZ = 1 (oracle 1)" in out

    def test_plot(self, tmp_path, capsys):
        """Inputs: plot with two pages.
        Expected: Exit 0 and both SVG paths printed.
        Checks: The plot verb.
        """
        rc = main(["plot", "--output-dir", str(tmp_path), *FAST])
        printed = capsys.readouterr().out.split()
        assert rc == EXIT_OK
        assert printed == [str(tmp_path / "profile.svg"), str(tmp_path / "foliation.svg")]
        assert (tmp_path / "foliation.svg").is_file()

    @pytest.mark.parametrize(
        "argv, fragment",
        [
            (["verify", "--set", "profile.delta_prime=0.01"], "delta_prime > delta"),
            (["verify", "--set", "epsilon"], "--set expects KEY=VALUE"),
            (["verify", "--set", "grid.colour=1"], "unknown config key"),
            (["verify", "--tol", "speed=1"], "unknown tolerance"),
            (["verify", "--grid", "20"], "grid.shs_resolution"),
            (["verify", "--config", "no-such-config"], "no config file"),
        ],
    )
    def test_config_errors(self, argv, fragment, capsys):
        """Inputs: Invalid overrides, tolerances, grids and config names.
        Expected: Exit 2 with the offending constraint on stderr.
        Checks: Config errors never reach the pipeline.
        """
        assert main(argv) == EXIT_CONFIG
        assert fragment in capsys.readouterr().err

    def test_config_file(self, tmp_path, capsys):
        """Inputs: --config pointing at a JSON file with an infeasible epsilon.
        Expected: Exit 1 with the failing stage on stderr.
        Checks: Perturbation feasibility from a user config.
        """
        path = tmp_path / "big-eps.json"
        path.write_text(json.dumps({"name": "big-eps", "epsilon": 0.5}), encoding="utf-8")
        rc = main(["verify", "--config", str(path), "--output-dir", str(tmp_path / "out"), *FAST])
        captured = capsys.readouterr()
        assert rc == EXIT_FAILED
        assert "error: profiles:" in captured.err

    def test_unknown_verb(self):
        """Inputs: An unknown verb.
        Expected: argparse exits with status 2.
        Checks: Verb choices.
        """
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2
