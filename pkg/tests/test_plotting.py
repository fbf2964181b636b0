import pytest

from openbook.errors import DomainError
from openbook.geometry import Monodromy, OpenBookSpec, PageModel, build_manifold
from openbook.holomorphic import assemble_page_curve
from openbook.plotting import plot_foliation, plot_profile
from openbook.profiles import ProfileParams, build_profile, kappa_catalogue

PARAMS = ProfileParams(c=0.1, kappa=kappa_catalogue()["sqrt2_e2"], delta=0.05, delta_prime=0.1, rho1=0.25, rho2=0.5)


@pytest.fixture(scope="module")
def profile():
    return build_profile(PARAMS)


@pytest.fixture(scope="module")
def leaves(profile):
    m = build_manifold(OpenBookSpec(PageModel.disk(0.05), Monodromy(), PARAMS))
    return [assemble_page_curve(m, profile, j / 4, 0.0, s_max=200.0) for j in range(4)]


class TestPlotProfile:
    def test_writes_svg(self, profile, tmp_path):
        """Inputs: The tight profile with its eps = 0.01 overlay.
        Expected: An SVG document at the requested path.
        Checks: plot_profile output.
        """
        path = plot_profile(profile, tmp_path / "profile.svg", eps=0.01)
        assert path == tmp_path / "profile.svg"
        text = path.read_text(encoding="utf-8")
        assert text.lstrip().startswith("<?xml")
        assert "<svg" in text

    def test_byte_reproducible(self, profile, tmp_path):
        """Inputs: The same plot written twice.
        Expected: Identical bytes.
        Checks: Fixed hash salt and no date metadata.
        """
        first = plot_profile(profile, tmp_path / "a.svg", eps=0.01).read_bytes()
        second = plot_profile(profile, tmp_path / "b.svg", eps=0.01).read_bytes()
        assert first == second


class TestPlotFoliation:
    def test_writes_svg(self, leaves, tmp_path):
        """Inputs: Four page curves.
        Expected: A reproducible SVG.
        Checks: plot_foliation output.
        """
        first = plot_foliation(leaves, tmp_path / "a.svg").read_bytes()
        second = plot_foliation(leaves, tmp_path / "b.svg").read_bytes()
        assert b"<svg" in first
        assert first == second

    def test_needs_two_leaves(self, leaves, tmp_path):
        """Inputs: A single leaf.
        Expected: DomainError.
        Checks: A family has at least two leaves.
        """
        with pytest.raises(DomainError):
            plot_foliation(leaves[:1], tmp_path / "one.svg")
