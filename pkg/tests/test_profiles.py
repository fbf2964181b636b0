import math

import numpy as np
import pytest

from openbook.errors import ConstructionError, DomainError, FeasibilityError
from openbook.profiles import (
    Profile,
    ProfileParams,
    build_profile,
    eval_profile,
    kappa_catalogue,
    kappa_name,
    nondegeneracy_audit,
    perturb_profile,
    profile_from_text,
    taming_interface_jump,
    verify_profile,
)

KAPPA = kappa_catalogue()["sqrt2_e2"]


@pytest.fixture(scope="module")
def params() -> ProfileParams:
    return ProfileParams(c=0.1, kappa=KAPPA, delta=0.05, delta_prime=0.1, rho1=0.25, rho2=0.5)


@pytest.fixture(scope="module")
def profile(params) -> Profile:
    return build_profile(params)


class TestKappaCatalogue:
    def test_catalogue_is_negative_and_named(self):
        """Inputs: The bundled catalogue.
        Expected: Nine negative entries; sqrt2_e2 equals -sqrt(2)/100 and round-trips through kappa_name.
        Checks: Catalogue content and reverse lookup.
        """
        catalogue = kappa_catalogue()
        assert len(catalogue) == 9
        assert all(v < 0 for v in catalogue.values())
        assert catalogue["sqrt2_e2"] == pytest.approx(-math.sqrt(2.0) / 100.0, rel=1e-15)
        assert kappa_name(KAPPA) == "sqrt2_e2"
        assert kappa_name(-0.5) is None

    def test_nondegeneracy_audit_of_catalogue(self):
        """Inputs: Every catalogued kappa with k <= 10^4.
        Expected: No k |kappa| within 1e-6 of an integer.
        Checks: The catalogue audit.
        """
        for kappa in kappa_catalogue().values():
            distance, worst = nondegeneracy_audit(kappa)
            assert distance > 1e-6
            assert 1 <= worst <= 10_000

    def test_rational_kappa_is_degenerate(self):
        """Inputs: kappa = -1/4, k <= 10.
        Expected: Distance 0 at k = 4.
        Checks: The audit detects resonant slopes.
        """
        assert nondegeneracy_audit(-0.25, 10) == (0.0, 4)


class TestBuildProfile:
    def test_origin_values(self, profile):
        """Inputs: Tight S^3 parameters, rho = 0.
        Expected: f(0) = 0.1, g(0) = 0.
        Checks: (f(0), g(0)) = (c, 0).
        """
        s = eval_profile(profile, 0.0)
        assert (s.f, s.g) == (0.1, 0.0)

    def test_flat_collar(self, profile):
        """Inputs: rho = 1.0.
        Expected: f = 0, g = 1 exactly.
        Checks: (f, g) constant on [1 - delta, 1 + delta).
        """
        s = eval_profile(profile, 1.0)
        assert (s.f, s.g) == (0.0, 1.0)

    def test_closed_form_D(self, profile):
        """Inputs: rho = 0.1.
        Expected: D = 2 c rho = 0.02.
        Checks: D = f g' - f' g on the closed-form core.
        """
        assert eval_profile(profile, 0.1).D == pytest.approx(0.02, abs=1e-15)

    def test_infeasible_parameters_name_the_constraint(self, params):
        """Inputs: delta_prime < delta.
        Expected: ConstructionError whose message names "delta_prime > delta".
        Checks: Construction preconditions.
        """
        bad = ProfileParams(c=0.1, kappa=KAPPA, delta=0.05, delta_prime=0.01, rho1=0.25, rho2=0.5)
        with pytest.raises(ConstructionError, match="delta_prime > delta"):
            build_profile(bad)

    def test_collar_slope_below_half_of_f(self, profile, params):
        """Inputs: ell0 of the tight parameters.
        Expected: ell0 = (c + kappa (1 - delta_prime)^2) / 4.
        Checks: The collar line used by the blend.
        """
        assert profile.ell0 == pytest.approx((0.1 + KAPPA * 0.81) / 4.0)


class TestEvalProfile:
    def test_core_sample(self, profile):
        """Inputs: rho = 0.1.
        Expected: f = 0.1 + kappa * 0.01 ~ 0.099859, g = 0.01.
        Checks: Closed form of the core.
        """
        s = eval_profile(profile, 0.1)
        assert s.f == pytest.approx(0.1 + KAPPA * 0.01, abs=1e-16)
        assert s.f == pytest.approx(0.099859, abs=1e-6)
        assert s.g == pytest.approx(0.01, abs=1e-16)

    def test_collar_sample(self, profile):
        """Inputs: rho = 0.92.
        Expected: g = 1, g' = 0 and D = -f' > 0.
        Checks: The taming band of the collar.
        """
        s = eval_profile(profile, 0.92)
        assert s.g == 1.0 and s.gp == 0.0
        assert s.D == pytest.approx(-s.fp)
        assert s.D > 0.0

    def test_flat_sample(self, profile):
        """Inputs: rho = 0.97.
        Expected: (f, g) = (0, 1).
        Checks: Flat end of the profile.
        """
        s = eval_profile(profile, 0.97)
        assert (s.f, s.g) == (0.0, 1.0)

    @pytest.mark.parametrize("rho", [-0.01, 1.05, 2.0])
    def test_out_of_domain(self, profile, rho):
        """Inputs: rho outside [0, 1 + delta).
        Expected: DomainError.
        Checks: Domain of eval_profile.
        """
        with pytest.raises(DomainError):
            eval_profile(profile, rho)

    def test_vectorized_matches_scalar(self, profile):
        """Inputs: An array of radii and the same radii one by one.
        Expected: Identical f values.
        Checks: Vectorized evaluation.
        """
        rho = np.array([0.0, 0.2, 0.6, 0.93, 1.0])
        batch = eval_profile(profile, rho)
        np.testing.assert_allclose([eval_profile(profile, r).f for r in rho], batch.f, rtol=1e-14, atol=0.0)


class TestVerifyProfile:
    def test_valid_profile_passes(self, profile):
        """Inputs: The tight profile on a 10^4 grid.
        Expected: Every check passes; min D margin is positive.
        Checks: The full condition audit.
        """
        report = verify_profile(profile, grid_n=10_000)
        assert report.passed, report.failures()
        assert report.check("D > 0 on (0, 1 - delta)").margin > 0.0

    def test_quartic_g_fails_second_derivative(self, params):
        """Inputs: A profile whose core has g = rho^4.
        Expected: The check "g''(0) > 0" fails.
        Checks: Nondegeneracy of g at the binding.
        """

        class QuarticProfile(Profile):
            def core(self, rho):
                f, fp, fpp, _, _, _ = super().core(rho)
                return f, fp, fpp, rho**4, 4.0 * rho**3, 12.0 * rho**2

        base = build_profile(params)
        quartic = QuarticProfile(params=params, ell0=base.ell0)
        assert "g''(0) > 0" in verify_profile(quartic, grid_n=1000).failures()

    def test_zero_kappa_fails_monotonicity(self):
        """Inputs: kappa = 0.
        Expected: The check "f' < 0 on (0, 1 - delta)" fails.
        Checks: f' = 2 kappa rho = 0 near the binding.
        """
        p = build_profile(ProfileParams(c=0.1, kappa=0.0, delta=0.05, delta_prime=0.1, rho1=0.25, rho2=0.5))
        failures = verify_profile(p, grid_n=1000).failures()
        assert "f' < 0 on (0, 1 - delta)" in failures
        assert "kappa in irrational catalogue" in failures

    def test_coarse_grid_rejected(self, profile):
        """Inputs: grid_n = 99.
        Expected: DomainError.
        Checks: Precondition grid_n >= 100.
        """
        with pytest.raises(DomainError):
            verify_profile(profile, grid_n=99)

    def test_taming_branches_agree(self, profile):
        """Inputs: Both closed-form branches of omega_0 at 1 - delta_prime and 1 - delta.
        Expected: Jumps below 1e-10.
        Checks: h = -f' near 1 - delta_prime and h = 1 near 1 - delta.
        """
        jumps = taming_interface_jump(profile)
        assert jumps["collar_start"] <= 1e-10
        assert jumps["collar_flat"] <= 1e-10


class TestPerturbProfile:
    def test_collar_line(self, profile):
        """Inputs: eps = 0.01, rho = 1.0.
        Expected: f_eps = 0.01, g_eps = 1.
        Checks: (f_eps, g_eps) = (eps (2 - rho), 1) on the flat collar.
        """
        s = eval_profile(perturb_profile(profile, 0.01), 1.0)
        assert s.f == pytest.approx(0.01, abs=1e-15)
        assert s.g == 1.0

    def test_unchanged_inside(self, profile):
        """Inputs: eps = 0.01, rho = 0.5.
        Expected: The sample equals the unperturbed one.
        Checks: The perturbation is supported on [1 - delta_prime, 1 + delta).
        """
        a = eval_profile(profile, 0.5).to_dict()
        b = eval_profile(perturb_profile(profile, 0.01), 0.5).to_dict()
        assert a == b

    def test_strictly_decreasing_on_collar(self, profile):
        """Inputs: eps = 0.01, grid of [1 - delta_prime, 1 + delta).
        Expected: max f_eps' < 0 and the perturbed profile passes its own audit.
        Checks: Strict monotonicity of the perturbed collar.
        """
        pert = perturb_profile(profile, 0.01)
        rho = np.linspace(0.9, 1.05, 2000, endpoint=False)
        assert np.max(pert.sample(rho).fp) < 0.0
        assert verify_profile(pert, grid_n=2000).passed

    @pytest.mark.parametrize("eps", [0.0, -0.01, 0.5])
    def test_infeasible_eps(self, profile, eps):
        """Inputs: eps outside (0, f(1 - delta_prime) / (1 + delta)).
        Expected: FeasibilityError, which is also a ConstructionError.
        Checks: Feasibility of the perturbation.
        """
        with pytest.raises(FeasibilityError):
            perturb_profile(profile, eps)
        with pytest.raises(ConstructionError):
            perturb_profile(profile, eps)

    def test_bound(self, profile):
        """Inputs: The tight profile.
        Expected: eps_bound = f(1 - delta_prime) / (1 + delta) ~ 0.02319, above ell0; the bound itself is rejected.
        Checks: The feasibility interval is open at f(1 - delta_prime) / (1 + delta).
        """
        f_knot = eval_profile(profile, 0.9).f
        assert profile.eps_bound == pytest.approx(f_knot / 1.05, rel=1e-12)
        assert profile.eps_bound == pytest.approx(0.02319, abs=1e-5)
        assert profile.eps_bound > profile.ell0
        with pytest.raises(FeasibilityError, match=r"f\(1 - delta_prime\)/\(1 \+ delta\)"):
            perturb_profile(profile, profile.eps_bound)

    @pytest.mark.parametrize("eps", [0.0225, 0.023, 0.02318])
    def test_eps_above_ell0(self, profile, eps):
        """Inputs: eps between ell0 ~ 0.02214 and the bound ~ 0.02319.
        Expected: A profile with f_eps(1) = eps, f_eps' < 0 on the collar, continuous at both knots,
            f_eps' matching a centered difference of f_eps, and a passing audit.
        Checks: The steep collar blend for perturbations larger than ell0.
        """
        pert = perturb_profile(profile, eps)
        assert eval_profile(pert, 1.0).f == pytest.approx(eps, rel=1e-14)
        rho = np.linspace(0.9, 1.05, 6000, endpoint=False)
        s = pert.sample(rho)
        assert np.max(s.fp) < 0.0
        for knot in (0.9, 0.95):
            below, above = pert.sample(np.nextafter(knot, 0.0)), pert.sample(knot)
            assert above.f == pytest.approx(below.f, abs=1e-12)
            assert above.fp == pytest.approx(below.fp, abs=1e-9)
        h = 1e-7
        interior = rho[(rho > 0.9 + 1e-5) & (rho < 0.95 - 1e-5)]
        fd = (pert.sample(interior + h).f - pert.sample(interior - h).f) / (2.0 * h)
        assert np.max(np.abs(fd - pert.sample(interior).fp)) <= 1e-6
        assert verify_profile(pert, grid_n=2000).passed


class TestProfileText:
    def test_text_round_trip(self, profile):
        """Inputs: The tight profile and its 0.01 perturbation.
        Expected: profile_from_text(p.to_text()) == p.
        Checks: The structured text format keeps parameters bit-exact.
        """
        for p in (profile, perturb_profile(profile, 0.01)):
            assert profile_from_text(p.to_text()) == p

    def test_text_names_catalogue_entry(self, profile):
        """Inputs: The tight profile.
        Expected: The text contains "kappa_name = sqrt2_e2" and a knot table.
        Checks: Text layout.
        """
        text = profile.to_text()
        assert "kappa_name = sqrt2_e2" in text
        assert "[knots]" in text

    def test_missing_key(self, profile):
        """Inputs: Text without the "c" line.
        Expected: ConstructionError naming the key.
        Checks: Validation of the text format.
        """
        text = "\n".join(line for line in profile.to_text().splitlines() if not line.startswith("c ="))
        with pytest.raises(ConstructionError, match="'c'"):
            profile_from_text(text)
