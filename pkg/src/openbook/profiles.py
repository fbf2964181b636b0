import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from openbook.data_models import ConditionCheck, ProfileReport
from openbook.errors import ConstructionError, DomainError, FeasibilityError
from openbook.utils import ArrayLike, scaled_step, step_integral

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def kappa_catalogue() -> Dict[str, float]:
    """Named irrational slope constants admitted for ``kappa``.

    Returns:
        Dict[str, float]: ``{-sqrt2 10^-k, -sqrt3 10^-k, -pi 10^-(k+1) : k = 1, 2, 3}``
        keyed by the name of the constant and the decimal exponent.

    Examples:
    - Catalogue names
        ```python

        >>> sorted(kappa_catalogue())[:3]
        ['pi_e2', 'pi_e3', 'pi_e4']
        >>> kappa_catalogue()['sqrt2_e2'] == -math.sqrt(2.0) * 10.0 ** -2
        True

        ```
    """
    catalogue: Dict[str, float] = {}
    for k in (1, 2, 3):
        catalogue[f"sqrt2_e{k}"] = -math.sqrt(2.0) * 10.0**-k
        catalogue[f"sqrt3_e{k}"] = -math.sqrt(3.0) * 10.0**-k
        catalogue[f"pi_e{k + 1}"] = -math.pi * 10.0 ** -(k + 1)
    return catalogue


def kappa_name(kappa: float) -> Optional[str]:
    """Catalogue name of ``kappa`` or ``None`` if the value is not catalogued."""
    for name, value in kappa_catalogue().items():
        if value == kappa:
            return name
    return None


def nondegeneracy_audit(kappa: float, k_max: int = 10_000) -> Tuple[float, int]:
    """Smallest distance of ``k |kappa|`` to the integers over ``1 <= k <= k_max``.

    The ``k``-fold binding orbit is degenerate exactly when ``k kappa`` is an integer.

    Returns:
        Tuple[float, int]: the minimal distance and the multiplicity attaining it.
    """
    k = np.arange(1, k_max + 1, dtype=float)
    turns = k * abs(kappa)
    distance = np.abs(turns - np.rint(turns))
    worst = int(np.argmin(distance))
    return float(distance[worst]), worst + 1


@dataclass(frozen=True)
class ProfileParams:
    """Parameters of a profile.

    Attributes:
        c: Binding period, ``f(0)``.
        kappa: Slope ``f'/g'`` near the binding; catalogued and negative for valid profiles.
        delta: Collar half-width.
        delta_prime: Start of the collar blend, ``delta_prime > delta``.
        rho1: End of the closed-form core.
        rho2: End of the ``beta`` blend.
    """

    c: float
    kappa: float
    delta: float
    delta_prime: float
    rho1: float
    rho2: float

    def violations(self) -> List[str]:
        """Names of violated construction constraints (empty when feasible)."""
        found = []
        if not self.c > 0.0:
            found.append("c > 0")
        if not self.kappa <= 0.0:
            found.append("kappa <= 0")
        if not 0.0 < self.delta < 0.2:
            found.append("0 < delta < 0.2")
        if not self.delta_prime > self.delta:
            found.append("delta_prime > delta")
        if not self.delta_prime < 1.0:
            found.append("delta_prime < 1")
        if not 0.0 < self.rho1 < self.rho2:
            found.append("0 < rho1 < rho2")
        if not self.rho2 < 1.0 - self.delta_prime:
            found.append("rho2 < 1 - delta_prime")
        if not self.c + self.kappa * (1.0 - self.delta_prime) ** 2 > 0.0:
            found.append("c + kappa * (1 - delta_prime)**2 > 0")
        return found

    def knots(self) -> Dict[str, float]:
        return {
            "origin": 0.0,
            "rho1": self.rho1,
            "rho2": self.rho2,
            "collar_start": 1.0 - self.delta_prime,
            "collar_flat": 1.0 - self.delta,
            "solid_torus_edge": 1.0,
        }


@dataclass
class ProfileSample:
    """Profile values at ``rho`` (scalars or equally shaped arrays).

    ``D`` is recomputed from the stored values as ``f gp - fp g``.
    """

    rho: ArrayLike
    f: ArrayLike
    g: ArrayLike
    fp: ArrayLike
    gp: ArrayLike
    fpp: ArrayLike
    gpp: ArrayLike
    beta: ArrayLike
    h: ArrayLike

    @property
    def D(self) -> ArrayLike:
        return self.f * self.gp - self.fp * self.g

    def to_dict(self) -> Dict[str, ArrayLike]:
        out = asdict(self)
        out["D"] = self.D
        return out


@dataclass(frozen=True)
class Profile:
    """Evaluable profile built by :func:`build_profile`.

    Knots ``rho1 < rho2 < 1 - delta_prime < 1 - delta``: ``f = c + kappa rho^2`` and ``g = rho^2``
    up to ``rho1``; ``f`` then blends to the line ``ell0 (2 - rho)`` and ``g`` to 1; on
    ``[1 - delta_prime, 1 - delta]`` ``f`` blends down to 0 (``eps (2 - rho)`` when perturbed).

    Attributes:
        params: Construction parameters.
        ell0: Slope of the collar line ``ell0 (2 - rho)`` that ``f`` passes through at ``1 - delta_prime``.
        eps: Contact perturbation size (0 for the confoliation profile).
    """

    params: ProfileParams
    ell0: float
    eps: float = 0.0

    @property
    def rho_max(self) -> float:
        return 1.0 + self.params.delta

    def core(self, rho: np.ndarray) -> Tuple[np.ndarray, ...]:
        """Closed forms on ``[0, rho1]``: ``(f, fp, fpp, g, gp, gpp)``."""
        c, kappa = self.params.c, self.params.kappa
        return (
            c + kappa * rho**2,
            2.0 * kappa * rho,
            np.full_like(rho, 2.0 * kappa),
            rho**2,
            2.0 * rho,
            np.full_like(rho, 2.0),
        )

    def _inner(self, rho: np.ndarray) -> Tuple[np.ndarray, ...]:
        """``(f, fp, fpp, g, gp, gpp)`` on ``[0, 1 - delta_prime]``."""
        pr = self.params
        fa, fpa, fppa, ga, gpa, gppa = self.core(rho)
        line, line_p = self.ell0 * (2.0 - rho), -self.ell0
        w, wp, wpp = scaled_step(rho, pr.rho1, 1.0 - pr.delta_prime)
        f = (1.0 - w) * fa + w * line
        fp = (1.0 - w) * fpa + w * line_p + wp * (line - fa)
        fpp = (1.0 - w) * fppa + 2.0 * wp * (line_p - fpa) + wpp * (line - fa)
        g = (1.0 - w) * ga + w
        gp = (1.0 - w) * gpa + wp * (1.0 - ga)
        gpp = (1.0 - w) * gppa - 2.0 * wp * gpa + wpp * (1.0 - ga)
        return f, fp, fpp, g, gp, gpp

    @property
    def eps_bound(self) -> float:
        """Exclusive upper bound ``f(1 - delta_prime) / (1 + delta)`` on the perturbation size."""
        return self.ell0 * (1.0 + self.params.delta_prime) / (1.0 + self.params.delta)

    def _collar(self, rho: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(f, fp, fpp)`` for ``rho >= 1 - delta_prime``; ``g = 1`` there."""
        if eps > self.ell0:
            return self._steep_collar(rho, eps)
        pr = self.params
        v, vp, vpp = scaled_step(rho, 1.0 - pr.delta_prime, 1.0 - pr.delta)
        drop = self.ell0 - eps
        slope = self.ell0 - v * drop
        f = (2.0 - rho) * slope
        fp = -slope - (2.0 - rho) * vp * drop
        fpp = 2.0 * vp * drop - (2.0 - rho) * vpp * drop
        return f, fp, fpp

    def _steep_collar(self, rho: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Collar for ``ell0 < eps < eps_bound``.

        ``-f'`` steps from ``ell0`` down to a plateau, stays there and steps up to ``eps``; the
        plateau is fixed so that ``f`` lands on ``eps (2 - rho)`` at ``1 - delta``. The steps get
        shorter as ``eps`` approaches the bound, which keeps the plateau positive.
        """
        pr = self.params
        lo, hi = 1.0 - pr.delta_prime, 1.0 - pr.delta
        width = hi - lo
        drop = self.ell0 * (2.0 - lo) - eps * (2.0 - hi)
        tau = min(width / 4.0, drop / (self.ell0 + eps))
        plateau = (drop - 0.5 * tau * (self.ell0 + eps)) / (width - tau)
        v1, v1p, _ = scaled_step(rho, lo, lo + tau)
        v2, v2p, _ = scaled_step(rho, hi - tau, hi)
        f = (
            self.ell0 * (2.0 - rho)
            + (self.ell0 - plateau) * step_integral(rho, lo, lo + tau)
            + (plateau - eps) * step_integral(rho, hi - tau, hi)
        )
        fp = -(self.ell0 * (1.0 - v1) + plateau * (v1 - v2) + eps * v2)
        fpp = (self.ell0 - plateau) * v1p + (plateau - eps) * v2p
        return np.where(rho >= hi, eps * (2.0 - rho), f), fp, fpp

    def _fields(self, rho: np.ndarray, eps: float) -> Tuple[np.ndarray, ...]:
        inner = rho < 1.0 - self.params.delta_prime
        f, fp, fpp, g, gp, gpp = self._inner(np.where(inner, rho, 0.0))
        fc, fpc, fppc = self._collar(np.where(inner, 1.0, rho), eps)
        return (
            np.where(inner, f, fc),
            np.where(inner, fp, fpc),
            np.where(inner, fpp, fppc),
            np.where(inner, g, 1.0),
            np.where(inner, gp, 0.0),
            np.where(inner, gpp, 0.0),
        )

    def beta(self, rho: np.ndarray, f: np.ndarray) -> np.ndarray:
        pr = self.params
        b, _, _ = scaled_step(rho, pr.rho1, pr.rho2)
        with np.errstate(divide="ignore"):
            core = 1.0 / (TWO_PI * rho * f)
        return np.where(rho >= pr.rho2, 1.0, np.where(b > 0.0, (1.0 - b) * core + b, core))

    def h(self, rho: np.ndarray) -> np.ndarray:
        """Collar coefficient of the taming form, ``-f'`` of the unperturbed profile blended to 1."""
        pr = self.params
        fp_base = self._fields(rho, 0.0)[1]
        u, _, _ = scaled_step(rho, 1.0 - pr.delta_prime, 1.0 - pr.delta)
        return np.where(u >= 1.0, 1.0, (1.0 - u) * (-fp_base) + u)

    def sample(self, rho: ArrayLike) -> ProfileSample:
        """Vectorized evaluation without a domain check."""
        rho_arr = np.asarray(rho, dtype=float)
        f, fp, fpp, g, gp, gpp = self._fields(rho_arr, self.eps)
        f_base = f if self.eps == 0.0 else self._fields(rho_arr, 0.0)[0]
        sample = ProfileSample(
            rho=rho_arr, f=f, g=g, fp=fp, gp=gp, fpp=fpp, gpp=gpp,
            beta=self.beta(rho_arr, f_base), h=self.h(rho_arr),
        )
        if rho_arr.ndim == 0:
            for field in fields(sample):
                setattr(sample, field.name, float(getattr(sample, field.name)))
        return sample

    def to_text(self) -> str:
        """Serialize to the key/value + knot table text format.

        Floats are written with ``repr`` so parameters round-trip bit-exactly.
        """
        pr = self.params
        lines = ["# openbook profile"]
        for field in fields(pr):
            lines.append(f"{field.name} = {getattr(pr, field.name)!r}")
        lines.append(f"kappa_name = {kappa_name(pr.kappa) or 'uncatalogued'}")
        lines.append(f"eps = {self.eps!r}")
        lines.append(f"ell0 = {self.ell0!r}")
        lines.append("")
        lines.append("[knots]")
        lines.append("# name rho")
        for name, rho in pr.knots().items():
            lines.append(f"{name} {rho!r}")
        return "\n".join(lines) + "\n"


def build_profile(params: ProfileParams) -> Profile:
    """Construct the profile for ``params``.

    Args:
        params: Profile parameters. ``kappa = 0`` is accepted so that the
            resulting profile can be audited by :func:`verify_profile`.

    Returns:
        Profile: The unperturbed (confoliation) profile.

    Raises:
        ConstructionError: Naming every violated constraint.

    Examples:
    - The tight S^3 parameters
        ```python

        >>> params = ProfileParams(0.1, kappa_catalogue()['sqrt2_e2'], 0.05, 0.1, 0.25, 0.5)
        >>> s = eval_profile(build_profile(params), 0.0)
        >>> (s.f, s.g)
        (0.1, 0.0)

        ```
    """
    broken = params.violations()
    if broken:
        raise ConstructionError("infeasible profile parameters: " + ", ".join(broken))
    # ell0 (2 - rho) <= 2 ell0 stays below half of min f on the blend interval
    collar_value = params.c + params.kappa * (1.0 - params.delta_prime) ** 2
    profile = Profile(params=params, ell0=collar_value / 4.0)
    logger.debug("built profile %s with ell0=%s", params, profile.ell0)
    return profile


def eval_profile(p: Profile, rho: ArrayLike) -> ProfileSample:
    """Evaluate ``p`` at ``rho`` in ``[0, 1 + delta)``.

    Raises:
        DomainError: If any ``rho`` is outside ``[0, 1 + delta)``.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho_arr)) or np.any((rho_arr < 0.0) | (rho_arr >= p.rho_max)):
        raise DomainError(f"rho must lie in [0, {p.rho_max}), got {rho!r}")
    return p.sample(rho)


def perturb_profile(p: Profile, eps: float) -> Profile:
    """Contact perturbation: ``f_eps = eps (2 - rho)`` on the collar.

    The result agrees with ``p`` on ``[0, 1 - delta_prime]``; on the rest ``g = 1``
    and ``f_eps`` decreases strictly.

    Raises:
        FeasibilityError: If ``eps`` is not in ``(0, f(1 - delta_prime) / (1 + delta))``.
    """
    bound = p.eps_bound
    if not 0.0 < eps < bound:
        raise FeasibilityError(f"eps={eps!r} violates 0 < eps < f(1 - delta_prime)/(1 + delta) = {bound!r}")
    return replace(p, eps=float(eps))


def profile_from_text(text: str) -> Profile:
    """Rebuild a profile serialized with :meth:`Profile.to_text`.

    Raises:
        ConstructionError: If required keys are missing or stored derived values disagree.
    """
    values: Dict[str, str] = {}
    knots: Dict[str, float] = {}
    in_knots = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[knots]":
            in_knots = True
            continue
        if in_knots:
            name, rho = line.split()
            knots[name] = float(rho)
        else:
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    try:
        params = ProfileParams(**{f.name: float(values[f.name]) for f in fields(ProfileParams)})
        eps = float(values.get("eps", "0.0"))
    except KeyError as exc:
        raise ConstructionError(f"profile text is missing key {exc.args[0]!r}") from exc
    profile = build_profile(params)
    if eps > 0.0:
        profile = perturb_profile(profile, eps)
    if "ell0" in values and float(values["ell0"]) != profile.ell0:
        raise ConstructionError("stored ell0 does not match the parameters")
    if knots and knots != params.knots():
        raise ConstructionError("knot table does not match the parameters")
    return profile


def _check(name: str, margin: float, witness: Optional[float] = None, passed: Optional[bool] = None) -> ConditionCheck:
    ok = bool(margin > 0.0) if passed is None else bool(passed)
    return ConditionCheck(name=name, passed=ok, margin=float(margin), witness=witness)


def _argmin(values: np.ndarray, rho: np.ndarray) -> Tuple[float, float]:
    i = int(np.argmin(values))
    return float(values[i]), float(rho[i])


def taming_interface_jump(p: Profile) -> Dict[str, float]:
    """Jumps of the taming-form closed forms at ``1 - delta_prime`` and ``1 - delta``.

    At ``1 - delta_prime`` the ``d lambda_0`` branch ``(f' drho^dtheta + g' drho^dphi)`` is
    compared with ``h dtheta^drho``; at ``1 - delta`` the ``h`` branch with ``dtheta^drho``.
    """
    pr = p.params
    base = replace(p, eps=0.0)
    inner = base.sample(1.0 - pr.delta_prime)
    outer = base.sample(1.0 - pr.delta)
    jump_inner = max(abs(-inner.fp - inner.h), abs(inner.gp))
    jump_outer = abs(outer.h - 1.0)
    return {"collar_start": float(jump_inner), "collar_flat": float(jump_outer)}


def verify_profile(p: Profile, grid_n: int = 10_000, tol: float = 1e-12) -> ProfileReport:
    """Audit every profile condition on a grid plus the knots.

    Args:
        p: Profile to audit.
        grid_n: Number of grid points on ``[0, 1 + delta)``; at least 100.
        tol: Tolerance for conditions that hold exactly in closed form.

    Returns:
        ProfileReport: One entry per condition with its margin and witness.

    Raises:
        DomainError: If ``grid_n < 100``.
    """
    if grid_n < 100:
        raise DomainError(f"grid_n must be at least 100, got {grid_n}")
    pr = p.params
    knots = np.array(list(pr.knots().values()))
    grid = np.union1d(np.linspace(0.0, p.rho_max, grid_n, endpoint=False), knots)
    s = p.sample(grid)
    checks: List[ConditionCheck] = []

    origin = p.sample(0.0)
    checks.append(_check("f(0) = c", tol - abs(origin.f - pr.c), 0.0))
    checks.append(_check("g(0) = 0", tol - abs(origin.g), 0.0))
    checks.append(_check("f'(0) = g'(0) = 0", tol - max(abs(origin.fp), abs(origin.gp)), 0.0))
    checks.append(_check("g''(0) > 0", origin.gpp, 0.0))

    flat = grid >= 1.0 - pr.delta
    target_f = p.eps * (2.0 - grid[flat])
    deviation = np.max(np.abs(s.f[flat] - target_f)) if p.eps else np.max(np.abs(s.f[flat]))
    deviation = max(deviation, float(np.max(np.abs(s.g[flat] - 1.0))))
    label = "(f, g) = (eps (2 - rho), 1) on [1 - delta, 1 + delta)" if p.eps else "(f, g) = (0, 1) on [1 - delta, 1 + delta)"
    checks.append(_check(label, tol - deviation, passed=deviation <= tol))
    collar = grid >= 1.0 - pr.delta_prime
    g_dev = float(np.max(np.abs(s.g[collar] - 1.0)))
    checks.append(_check("g = 1 on [1 - delta_prime, 1 + delta)", tol - g_dev, passed=g_dev <= tol))

    open_range = (grid >= 1e-3) & (grid <= 1.0 - pr.delta - 1e-3)
    checks.append(_check("D > 0 on (0, 1 - delta)", *_argmin(s.D[open_range], grid[open_range])))
    checks.append(_check("f' < 0 on (0, 1 - delta)", *_argmin(-s.fp[open_range], grid[open_range])))
    if p.eps:
        perturbed = grid >= 1.0 - pr.delta_prime
        checks.append(_check("f_eps' < 0 on [1 - delta_prime, 1 + delta)", *_argmin(-s.fp[perturbed], grid[perturbed])))
    g_up = (grid > 0.0) & (grid < 1.0 - pr.delta_prime)
    checks.append(_check("g' >= 0", *_argmin(s.gp[g_up], grid[g_up]), passed=bool(np.all(s.gp[g_up] >= 0.0))))

    core = (grid > 0.0) & (grid <= pr.rho1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_dev = np.abs(s.fp[core] / s.gp[core] - pr.kappa)
        beta_dev = np.abs(TWO_PI * grid[core] * s.f[core] * s.beta[core] - 1.0)
    checks.append(_check("f'/g' = kappa on (0, rho1]", 1e-9 - np.max(ratio_dev), passed=np.max(ratio_dev) <= 1e-9))
    checks.append(_check("2 pi rho f beta = 1 on (0, rho1]", 1e-12 - np.max(beta_dev), passed=np.max(beta_dev) <= 1e-12))

    positive = grid > 0.0
    checks.append(_check("beta > 0 on (0, 1 + delta)", *_argmin(s.beta[positive], grid[positive])))
    outer = grid >= pr.rho2
    beta_dev = float(np.max(np.abs(s.beta[outer] - 1.0)))
    checks.append(_check("beta = 1 on [rho2, 1 + delta)", tol - beta_dev, passed=beta_dev <= tol))

    taming = (grid >= 1.0 - pr.delta_prime) & (grid <= 1.0 - pr.delta)
    checks.append(_check("h > 0 on [1 - delta_prime, 1 - delta]", *_argmin(s.h[taming], grid[taming])))
    jumps = taming_interface_jump(p)
    checks.append(_check("h = -f' near 1 - delta_prime", 1e-10 - jumps["collar_start"], 1.0 - pr.delta_prime))
    checks.append(_check("h = 1 near 1 - delta", 1e-10 - jumps["collar_flat"], 1.0 - pr.delta))

    radii = 10.0 ** -np.arange(2, 7, dtype=float)
    near = p.sample(radii)
    limits = np.stack([near.fp / radii, near.g / radii**2])
    spread = float(np.max(np.abs(np.diff(limits, axis=1))))
    smooth = bool(np.all(np.isfinite(limits))) and spread <= 1e-6
    checks.append(_check("smooth at origin (f'/rho, g/rho^2 converge)", 1e-6 - spread, float(radii[-1]), passed=smooth))

    name = kappa_name(pr.kappa)
    checks.append(_check("kappa in irrational catalogue", 1.0 if name else -1.0, passed=name is not None))
    distance, worst = nondegeneracy_audit(pr.kappa) if pr.kappa else (0.0, 1)
    checks.append(_check("k kappa not within 1e-6 of an integer for k <= 10^4", distance - 1e-6, float(worst)))

    report = ProfileReport(checks=checks, grid_n=int(grid.size))
    for check in report.checks:
        if not check.passed:
            logger.warning("profile condition failed: %s (margin %s)", check.name, check.margin)
    return report
