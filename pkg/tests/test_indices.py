import math

import numpy as np
import pytest

from openbook.errors import ConstructionError, DegenerateOrbitError, DomainError, ParityError
from openbook.geometry import Monodromy, OpenBookSpec, PageModel, build_manifold
from openbook import indices
from openbook.holomorphic import assemble_page_curve
from openbook.indices import (
    CurveTopology,
    SymplecticPath,
    conley_zehnder,
    crossing_form_index,
    fredholm_index,
    index_table,
    linearized_return_path,
    normal_chern,
    page_curve_topology,
    rotation,
    variational_return_path,
)
from openbook.profiles import ProfileParams, build_profile, kappa_catalogue

KAPPA = kappa_catalogue()["sqrt2_e2"]
PARAMS = ProfileParams(c=0.1, kappa=KAPPA, delta=0.05, delta_prime=0.1, rho1=0.25, rho2=0.5)


@pytest.fixture(scope="module")
def profile():
    return build_profile(PARAMS)


def rotation_path(turns: float, n: int = 2001) -> SymplecticPath:
    t = np.linspace(0.0, 1.0, n)
    return SymplecticPath(t, np.stack([rotation(2.0 * math.pi * turns * s) for s in t]))


class TestSymplecticPath:
    def test_must_start_at_identity(self):
        """Inputs: A path starting at a quarter rotation.
        Expected: ConstructionError.
        Checks: Psi(0) = Id exactly.
        """
        t = np.linspace(0.0, 1.0, 3)
        with pytest.raises(ConstructionError, match="identity"):
            SymplecticPath(t, np.stack([rotation(0.5 + s) for s in t]))

    def test_determinant_one(self):
        """Inputs: A path through 2 Id.
        Expected: ConstructionError naming the determinant defect.
        Checks: |det Psi - 1| <= 1e-9.
        """
        with pytest.raises(ConstructionError, match="det Psi"):
            SymplecticPath([0.0, 1.0], np.stack([np.eye(2), 2.0 * np.eye(2)]))


class TestReturnPath:
    def test_simple_orbit(self, profile):
        """Inputs: k = 1, kappa = -sqrt(2)/100.
        Expected: Total rotation sqrt(2)/100 of a turn and a nondegenerate endpoint.
        Checks: Closed-form linearized flow.
        """
        path = linearized_return_path(profile, 1)
        assert path.total_rotation() == pytest.approx(math.sqrt(2.0) / 100.0, rel=1e-12)
        assert abs(np.linalg.det(path.endpoint - np.eye(2))) > 1e-6

    def test_cover_crossing_one_turn(self, profile):
        """Inputs: k = 71.
        Expected: Total rotation 1.00409... turns and index 3.
        Checks: Covers beyond 1/|kappa| pick up a full turn.
        """
        path = linearized_return_path(profile, 71)
        assert path.total_rotation() == pytest.approx(71.0 * math.sqrt(2.0) / 100.0, rel=1e-12)
        assert path.total_rotation() == pytest.approx(1.00409, abs=1e-5)
        assert conley_zehnder(path) == 3

    @pytest.mark.parametrize("k", [1, 7, 71])
    def test_variational_equation_agrees(self, profile, k):
        """Inputs: Numerically integrated variational flow for k in {1, 7, 71}.
        Expected: Agreement with the closed-form rotation to 1e-8.
        Checks: The transverse linearization of the Reeb field.
        """
        closed = linearized_return_path(profile, k)
        numeric = variational_return_path(profile, k)
        np.testing.assert_allclose(numeric.t, closed.t, rtol=1e-14)
        assert np.abs(numeric.matrices - closed.matrices).max() <= 1e-8

    def test_invalid_cover(self, profile):
        """Inputs: k = 0.
        Expected: DomainError.
        Checks: k >= 1.
        """
        with pytest.raises(DomainError):
            linearized_return_path(profile, 0)


class TestConleyZehnder:
    def test_small_rotation(self):
        """Inputs: Rotation by sqrt(2)/100 of a turn.
        Expected: 1.
        Checks: Index of the simple binding orbit.
        """
        assert conley_zehnder(rotation_path(math.sqrt(2.0) / 100.0)) == 1

    def test_rotation_beyond_one_turn(self):
        """Inputs: Rotation by 1.004 turns.
        Expected: 3, confirmed by the crossing-form oracle.
        Checks: 2 floor(theta) + 1.
        """
        path = rotation_path(1.004)
        assert conley_zehnder(path) == 3
        assert crossing_form_index(path) == 3

    def test_constant_path_is_degenerate(self):
        """Inputs: Psi(t) = Id.
        Expected: DegenerateOrbitError with "degenerate orbit".
        Checks: Eigenvalue 1 at the endpoint.
        """
        path = SymplecticPath(np.linspace(0.0, 1.0, 5), np.stack([np.eye(2)] * 5))
        with pytest.raises(DegenerateOrbitError, match="degenerate orbit"):
            conley_zehnder(path)
        with pytest.raises(DegenerateOrbitError):
            crossing_form_index(path)

    def test_negative_rotation(self):
        """Inputs: Rotation by -0.3 turns.
        Expected: -1.
        Checks: Clockwise rotations.
        """
        assert conley_zehnder(rotation_path(-0.3)) == -1
        assert crossing_form_index(rotation_path(-0.3)) == -1

    def test_random_rotations_match_oracle(self):
        """Inputs: 40 rotation angles in (0, 5) at least 0.01 away from the integers, 10^4-point grids.
        Expected: 2 floor(theta) + 1 from both the winding-interval and the crossing-form method.
        Checks: The two algorithms agree.
        """
        rng = np.random.default_rng(11)
        turns = rng.uniform(0.0, 5.0, 200)
        turns = turns[np.abs(turns - np.round(turns)) > 1e-2][:40]
        for theta in turns:
            path = rotation_path(float(theta), n=10_001)
            expected = 2 * math.floor(theta) + 1
            assert conley_zehnder(path) == expected
            assert crossing_form_index(path) == expected

    def test_hyperbolic_path(self):
        """Inputs: diag(e^t, e^-t) on [0, 1].
        Expected: 0 from both methods.
        Checks: Even index of a positive hyperbolic endpoint.
        """
        t = np.linspace(0.0, 1.0, 401)
        path = SymplecticPath(t, np.stack([np.diag([math.exp(s), math.exp(-s)]) for s in t]))
        assert conley_zehnder(path) == 0
        assert crossing_form_index(path) == 0


class TestIndexArithmetic:
    @pytest.mark.parametrize(
        "genus, punctures, expected",
        [(0, [1], 2), (0, [1, 1, 1], 2), (2, [1], -2)],
    )
    def test_fredholm_index(self, genus, punctures, expected):
        """Inputs: Planes, pairs of pants and a genus-2 curve with odd punctures, c1 = 0.
        Expected: 2, 2, -2.
        Checks: ind = chi + 2 c1 + sum mu.
        """
        assert fredholm_index(CurveTopology(genus=genus, punctures=punctures, c1=0)) == expected

    def test_no_punctures(self):
        """Inputs: A closed curve.
        Expected: DomainError.
        Checks: At least one puncture.
        """
        with pytest.raises(DomainError):
            fredholm_index(CurveTopology(genus=0, punctures=[], c1=0))

    @pytest.mark.parametrize("args, expected", [((2, 0, 0), 0), ((2, 1, 0), 1), ((1, 0, 1), 0)])
    def test_normal_chern(self, args, expected):
        """Inputs: (ind, g, #Gamma0) triples.
        Expected: (ind - 2 + 2g + #Gamma0) / 2.
        Checks: normal_chern arithmetic.
        """
        assert normal_chern(*args) == expected

    def test_odd_numerator(self):
        """Inputs: (2, 0, 1).
        Expected: ParityError.
        Checks: Inconsistent topology data.
        """
        with pytest.raises(ParityError):
            normal_chern(2, 0, 1)
        with pytest.raises(DomainError):
            normal_chern(2, 0, -1)

    @pytest.mark.parametrize("genus, punctures, c1", [(0, [1], 0), (0, [1, 1], 1), (1, [3, 1], 2), (0, [2, 1], 0)])
    def test_normal_chern_inverts_fredholm(self, genus, punctures, c1):
        """Inputs: Consistent topology data with odd and even punctures.
        Expected: normal_chern(fredholm_index(top), g, #Gamma0) = c1 + #Gamma0.
        Checks: The two formulas compose; #Gamma0 counts even punctures.
        """
        top = CurveTopology(genus=genus, punctures=punctures, c1=c1)
        assert top.parity == ["even" if mu % 2 == 0 else "odd" for mu in punctures]
        result = normal_chern(fredholm_index(top), genus, top.gamma0)
        odd_shift = sum(mu - 1 for mu in punctures if mu % 2) // 2
        even_shift = sum(mu for mu in punctures if mu % 2 == 0) // 2
        assert result == c1 + odd_shift + even_shift


class TestPageCurveIndices:
    @pytest.mark.parametrize("page, n_punctures", [(PageModel.disk(0.05), 1), (PageModel.annulus(0.05, 0.5, 1.5), 2)])
    def test_page_curves_have_index_two(self, profile, page, n_punctures):
        """Inputs: Page curves of the disk and the annulus.
        Expected: Genus 0, mu_CZ = 1 at every puncture, c1 = 0 in the Cartesian frame, ind = 2, c1(N_u) = 0.
        Checks: Index arithmetic of the constructed curves.
        """
        m = build_manifold(OpenBookSpec(page, Monodromy(), PARAMS))
        top = page_curve_topology(assemble_page_curve(m, profile, 0.0, s_max=200.0), profile)
        assert top.genus == 0
        assert top.punctures == [1] * n_punctures
        assert top.c1 == 0
        assert top.gamma0 == 0
        assert fredholm_index(top) == 2
        assert normal_chern(fredholm_index(top), top.genus, top.gamma0) == 0

    def test_index_table(self, profile):
        """Inputs: Two bindings, k <= 3.
        Expected: Six rows with mu_CZ = 1 and oracle 1, rotations k sqrt(2)/100.
        Checks: Per-binding, per-cover table.
        """
        rows = index_table(profile, 2, k_max=3)
        assert [(r.binding, r.cover) for r in rows] == [(0, 1), (1, 1), (0, 2), (1, 2), (0, 3), (1, 3)]
        assert all(r.mu_cz == 1 and r.oracle == 1 for r in rows)
        assert rows[-1].rotation == pytest.approx(3.0 * math.sqrt(2.0) / 100.0, rel=1e-12)

    def test_oracle_uses_variational_path(self, profile, monkeypatch):
        """Inputs: A variational path replaced by a rotation through 1.004 turns.
        Expected: Oracle 3 against the closed-form index 1 for the covers it reaches.
        Checks: The oracle column is computed from the variational flow, not the closed form.
        """
        calls = []

        def fake(p, k):
            calls.append(k)
            return rotation_path(1.004)

        monkeypatch.setattr(indices, "variational_return_path", fake)
        rows = index_table(profile, 1, k_max=3, oracle_up_to=2)
        assert calls == [1, 2]
        assert [(r.mu_cz, r.oracle) for r in rows] == [(1, 3), (1, 3), (1, None)]

    def test_default_cover_bound(self, profile):
        """Inputs: k_max unset, oracle up to k = 1.
        Expected: Covers up to floor(1 / |kappa|) = 70, all with index 1.
        Checks: Default table extent.
        """
        rows = index_table(profile, 1, oracle_up_to=1)
        assert rows[-1].cover == 70
        assert {r.mu_cz for r in rows} == {1}
        assert rows[1].oracle is None
