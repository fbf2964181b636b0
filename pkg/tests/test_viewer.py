from openbook.viewer import render_summary


def _check(name, passed=True, margin=0.5):
    return {"name": name, "passed": passed, "margin": margin, "witness": None}


class TestRenderSummary:
    def test_header_and_sections(self):
        """Inputs: A report with a profile, two SHS sections and artifacts.
        Expected: Header line, one branch per section in order, the last drawn with "└─".
        Checks: Tree layout.
        """
        report = {
            "name": "tight-s3-disk",
            "stage": "verify",
            "passed": True,
            "profile": {"passed": True, "checks": [_check("D > 0 on (0, 1 - delta)")]},
            "shs": {
                "eps=0.01": {"passed": True, "checks": [_check("lambda(X) = 1")]},
                "eps=0": {"passed": True, "checks": [_check("d omega_0 = 0")]},
            },
            "artifacts": {"profile.svg": "ab" * 32},
        }
        lines = render_summary(report).splitlines()
        assert lines[0] == "Run tight-s3-disk [verify]: PASS"
        assert lines[1] == "├─ profile: PASS"
        assert lines[2] == "│  └─ [PASS] D > 0 on (0, 1 - delta) (margin 0.5)"
        assert lines[3] == "├─ shs eps=0: PASS"
        assert lines[5] == "├─ shs eps=0.01: PASS"
        assert lines[-2] == "└─ artifacts"
        assert lines[-1] == "   └─ profile.svg sha256:" + "ab" * 6

    def test_failed_check_is_marked(self):
        """Inputs: A failing run check.
        Expected: FAIL in the header and in the check line.
        Checks: Pass/fail marks.
        """
        report = {"name": "x", "stage": "solve", "passed": False, "checks": [_check("Richardson ratio in [3.5, 4.5]", False, -0.2)]}
        out = render_summary(report)
        assert out.splitlines()[0] == "Run x [solve]: FAIL"
        assert "[FAIL] Richardson ratio in [3.5, 4.5] (margin -0.2)" in out

    def test_indices_and_topology(self):
        """Inputs: Index rows with and without an oracle value and a page-curve topology.
        Expected: One line per row; the oracle is shown when present; ind is listed.
        Checks: Index rendering.
        """
        report = {
            "name": "x",
            "stage": "index",
            "passed": True,
            "indices": [
                {"binding": 0, "cover": 1, "rotation": 0.014, "mu_cz": 1, "oracle": 1},
                {"binding": 0, "cover": 4, "rotation": 0.056, "mu_cz": 1, "oracle": None},
            ],
            "topology": {"genus": 0, "punctures": [1], "c1": 0},
            "fredholm_index": 2,
        }
        out = render_summary(report)
        assert "binding 0 cover 1: mu_CZ = 1 (oracle 1)" in out
        assert "binding 0 cover 4: mu_CZ = 1\n" in out
        assert "genus 0, punctures [1], c1 0" in out
        assert out.endswith("└─ ind = 2")

    def test_scalar_sections(self):
        """Inputs: An asymptotics section without checks.
        Expected: Scalar entries sorted by key; nested values skipped.
        Checks: Sections without checks.
        """
        report = {
            "name": "x",
            "stage": "solve",
            "passed": True,
            "asymptotics": {"exponent": -0.0888, "a_slope": 0.1, "window": [1.0, 2.0]},
        }
        lines = render_summary(report).splitlines()
        assert lines[1] == "└─ asymptotics"
        assert lines[2:] == ["   ├─ a_slope: 0.1", "   └─ exponent: -0.0888"]
