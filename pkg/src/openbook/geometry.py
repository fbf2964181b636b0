import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from openbook.data_models import ConditionCheck, SHSReport, SmallPeriodReport
from openbook.errors import ConstructionError, DomainError
from openbook.integrator import cash_karp
from openbook.profiles import Profile, ProfileParams, perturb_profile
from openbook.utils import (
    cell_centers,
    exterior_derivative_density,
    gradient,
    interior,
    ordered_map,
    pair,
    scaled_step,
    two_form,
    wedge_density,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MAPPING_TORUS = "mt"

DEFAULT_TOLERANCES: Dict[str, float] = {
    "iota": 1e-9,
    "d_omega": 1e-6,
    "lambda_x": 1e-12,
    "confoliation_rel": 1e-9,
    "f_eps": 1e-6,
    "seam": 1e-10,
    "pullback": 1e-9,
}


@dataclass(frozen=True)
class PageModel:
    """Planar page: a disk of radius ``radius`` or an annulus ``inner_radius <= r <= outer_radius``.

    Attributes:
        kind (str): ``"disk"`` or ``"annulus"``.
        delta (float): Collar half-width; each collar is ``2 delta`` wide in ``r``.
        radius (float): Disk radius.
        inner_radius (float): Annulus inner radius.
        outer_radius (float): Annulus outer radius.

    Examples:
    - Boundary components
        ```python

        >>> PageModel.disk(0.05).n_boundary, PageModel.annulus(0.05, 0.5, 1.5).n_boundary
        (1, 2)

        ```
    """

    kind: str
    delta: float
    radius: float = 1.0
    inner_radius: float = 0.5
    outer_radius: float = 1.5

    @classmethod
    def disk(cls, delta: float, radius: float = 1.0) -> "PageModel":
        return cls(kind="disk", delta=delta, radius=radius)

    @classmethod
    def annulus(cls, delta: float, inner_radius: float, outer_radius: float) -> "PageModel":
        return cls(kind="annulus", delta=delta, inner_radius=inner_radius, outer_radius=outer_radius)

    @property
    def r_min(self) -> float:
        return 0.0 if self.kind == "disk" else self.inner_radius

    @property
    def r_max(self) -> float:
        return self.radius if self.kind == "disk" else self.outer_radius

    @property
    def n_boundary(self) -> int:
        return 1 if self.kind == "disk" else 2

    def violations(self) -> List[str]:
        d = self.delta
        if self.kind == "disk":
            return [] if 4.0 * d < self.radius <= 1.0 + d else ["4 * delta < radius <= 1 + delta"]
        if self.kind == "annulus":
            width = self.outer_radius - self.inner_radius
            found = [] if self.inner_radius > 0.0 else ["inner_radius > 0"]
            if not 4.0 * d < width < 2.0 + 2.0 * d:
                found.append("4 * delta < outer_radius - inner_radius < 2 + 2 * delta")
            return found
        return [f"page kind must be 'disk' or 'annulus', got {self.kind!r}"]

    def blend_band(self) -> Tuple[float, float]:
        """Radii over which ``eta`` (and the page complex structure) leave the collar form."""
        if self.kind == "disk":
            edge = self.radius - 2.0 * self.delta
            return edge / 2.0, edge
        return self.inner_radius + 2.0 * self.delta, self.outer_radius - 2.0 * self.delta

    def collar_radius(self, boundary: int, rho: np.ndarray) -> np.ndarray:
        """Page radius of collar coordinate ``rho`` on boundary component ``boundary``."""
        rho = np.asarray(rho, dtype=float)
        if boundary == 0:
            return self.r_max + (1.0 - self.delta) - rho
        return self.r_min + rho - (1.0 - self.delta)

    def collar_coordinates(self, boundary: int, r: np.ndarray, theta_c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """``(rho, theta)`` of page points on the collar of ``boundary``."""
        r = np.asarray(r, dtype=float)
        theta_c = np.asarray(theta_c, dtype=float)
        if boundary == 0:
            return 1.0 - self.delta + (self.r_max - r), np.mod(theta_c / TWO_PI, 1.0)
        return 1.0 - self.delta + (r - self.r_min), np.mod(-theta_c / TWO_PI, 1.0)

    def eta_profile(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """``(G, G')`` with ``eta = G(r) dtheta_c``."""
        r = np.asarray(r, dtype=float)
        d = self.delta
        lo, hi = self.blend_band()
        w, wp, _ = scaled_step(r, lo, hi)
        if self.kind == "disk":
            line = (1.0 + d - self.radius + r) / TWO_PI
            # (1 + d - R + r) / r^2 decreases, so its minimum over the band is at hi
            q = 0.5 * (1.0 + d - self.radius + hi) / TWO_PI / hi**2
            g = np.where(w >= 1.0, line, (1.0 - w) * q * r**2 + w * line)
            gp = (1.0 - w) * 2.0 * q * r + w / TWO_PI + wp * (line - q * r**2)
            return g, gp
        inner = -(1.0 + d + self.inner_radius - r) / TWO_PI
        gap = (2.0 + 2.0 * d - (self.outer_radius - self.inner_radius)) / TWO_PI
        outer = (1.0 + d - self.outer_radius + r) / TWO_PI
        g = np.where(w >= 1.0, outer, inner + w * gap)
        return g, 1.0 / TWO_PI + wp * gap

    def complex_scale(self, r: np.ndarray) -> np.ndarray:
        """``m(r)`` of the page complex structure ``J d/dr = m d/dtheta_c`` (``2 pi`` on collars)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "annulus":
            return np.full_like(r, TWO_PI)
        w, _, _ = scaled_step(r, *self.blend_band())
        with np.errstate(divide="ignore"):
            return np.where(w >= 1.0, TWO_PI, (1.0 - w) / r + w * TWO_PI)


@dataclass(frozen=True)
class PageForm:
    """The page 1-form ``eta = G(r) dtheta_c`` returned by :func:`eta_on_page`."""

    page: PageModel

    def __call__(self, r: np.ndarray, theta_c: np.ndarray) -> np.ndarray:
        """Components ``(eta_r, eta_theta_c)`` at page points, shape ``(..., 2)``."""
        g, _ = self.page.eta_profile(r)
        g = np.broadcast_to(g, np.broadcast(np.asarray(r), np.asarray(theta_c)).shape)
        return np.stack([np.zeros_like(g), g], axis=-1)

    def density(self, r: np.ndarray) -> np.ndarray:
        """``d eta`` against the area form ``dx ^ dy`` (``G'(r) / r``; ``2 q`` at the disk center)."""
        r = np.asarray(r, dtype=float)
        _, gp = self.page.eta_profile(r)
        if self.page.kind == "disk":
            lo, hi = self.page.blend_band()
            center = (1.0 + self.page.delta - self.page.radius + hi) / TWO_PI / hi**2
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(r > 0.0, gp / r, center)
        return gp / r

    def collar_coefficient(self, boundary: int, rho: np.ndarray) -> np.ndarray:
        """Coefficient of ``dtheta`` at collar coordinate ``rho`` (``2 - rho`` by construction)."""
        g, _ = self.page.eta_profile(self.page.collar_radius(boundary, rho))
        return g * (TWO_PI if boundary == 0 else -TWO_PI)


def eta_on_page(page: PageModel) -> PageForm:
    """The 1-form ``eta`` on ``page`` with ``eta = (2 - rho) dtheta`` on the collars and ``d eta > 0``.

    Examples:
    - Collar coefficient on a disk page
        ```python

        >>> eta = eta_on_page(PageModel.disk(0.05))
        >>> round(float(eta.collar_coefficient(0, 1.02)), 12)
        0.98

        ```
    """
    return PageForm(page)


@dataclass(frozen=True)
class DehnTwist:
    """``count`` full twists supported on the band ``r_start <= r <= r_end``."""

    r_start: float
    r_end: float
    count: int


@dataclass(frozen=True)
class Monodromy:
    """Composition of boundary-parallel Dehn twists (identity when empty)."""

    twists: Tuple[DehnTwist, ...] = ()

    @property
    def kind(self) -> str:
        return "identity" if not self.twists else "dehn_twists"

    def twist_angle(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """``(Theta, Theta')`` with ``psi(r, theta_c) = (r, theta_c + Theta(r))``."""
        r = np.asarray(r, dtype=float)
        angle = np.zeros_like(r)
        slope = np.zeros_like(r)
        for twist in self.twists:
            w, wp, _ = scaled_step(r, twist.r_start, twist.r_end)
            angle = angle + TWO_PI * twist.count * w
            slope = slope + TWO_PI * twist.count * wp
        return angle, slope

    def violations(self, page: PageModel) -> List[str]:
        found = []
        lo = page.r_min + 2.0 * page.delta if page.kind == "annulus" else 0.0
        hi = page.r_max - 2.0 * page.delta
        for twist in self.twists:
            if not lo < twist.r_start < twist.r_end <= hi:
                found.append(f"twist band [{twist.r_start}, {twist.r_end}] inside ({lo}, {hi}]")
        return found


def monodromy_map(psi: Monodromy, r: np.ndarray, theta_c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Apply ``psi`` to page points; ``theta_c`` is reduced to ``[0, 2 pi)``."""
    angle, _ = psi.twist_angle(r)
    return np.asarray(r, dtype=float), np.mod(np.asarray(theta_c, dtype=float) + angle, TWO_PI)


@dataclass(frozen=True)
class OpenBookSpec:
    """Abstract open book data with the profile and perturbation parameters.

    Attributes:
        page (PageModel): The page.
        monodromy (Monodromy): Return map of the page.
        profile (ProfileParams): Profile parameters; ``profile.delta`` is the collar half-width.
        epsilon (float): Contact perturbation size.
        tau_margin (float): Width of the flat ends of ``tau`` in ``alpha``.
    """

    page: PageModel
    monodromy: Monodromy
    profile: ProfileParams
    epsilon: float = 0.0
    tau_margin: float = 0.1

    @property
    def n_bindings(self) -> int:
        return self.page.n_boundary


@dataclass
class PointTM:
    """Point(s) of ``M`` in one chart: ``coords`` is ``(3,)`` or stacked ``(N, 3)``."""

    chart: str
    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)

    @property
    def single(self) -> bool:
        return self.coords.ndim == 1

    def batch(self) -> np.ndarray:
        return self.coords.reshape(-1, 3)


@dataclass
class FormSample:
    """Forms and fields at a :class:`PointTM`; fields not requested stay ``None``."""

    point: PointTM
    lam: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    reeb: Optional[np.ndarray] = None
    dlam: Optional[np.ndarray] = None
    contact_density: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ManifoldModel:
    """Chart atlas of ``M``, the mapping torus of the monodromy with one solid torus glued to
    each boundary component of the page.

    - ``"mt"``: mapping torus, ``(phi, r, theta_c)`` with ``phi`` in ``R/Z`` and ``(r, theta_c)``
      polar on the page (``theta_c`` in radians). Orientation ``dphi ^ dr ^ dtheta_c``.
    - ``"st0"``, ``"st1"``: solid tori, ``(theta, rho, phi)`` in ``R/Z x [0, 1] x R/Z`` with the
      binding at ``rho = 0``. Orientation ``dtheta ^ drho ^ dphi``.

    Solid torus ``stj`` is glued on ``rho in [1 - delta, 1]`` by the identity in the collar
    coordinates of boundary component ``j``: ``rho = 1 - delta + (r_max - r)``,
    ``theta = theta_c / 2 pi`` on the outer boundary and ``rho = 1 - delta + (r - r_min)``,
    ``theta = -theta_c / 2 pi`` on the inner one. Forms act on stacked ``(N, 3)`` points; 2-forms
    are antisymmetric ``(N, 3, 3)`` arrays.
    """

    spec: OpenBookSpec
    charts: Tuple[str, ...] = field(default=())

    @property
    def page(self) -> PageModel:
        return self.spec.page

    @property
    def monodromy(self) -> Monodromy:
        return self.spec.monodromy

    @property
    def delta(self) -> float:
        return self.spec.profile.delta

    @property
    def solid_tori(self) -> Tuple[str, ...]:
        return tuple(c for c in self.charts if c != MAPPING_TORUS)

    def binding_index(self, chart: str) -> int:
        if chart not in self.solid_tori:
            raise DomainError(f"{chart!r} is not a solid-torus chart of this manifold")
        return int(chart[2:])

    def validate(self, pt: PointTM) -> np.ndarray:
        """Stacked coordinates of ``pt`` after the chart-domain check."""
        if pt.chart not in self.charts:
            raise DomainError(f"unknown chart {pt.chart!r}; charts are {self.charts}")
        coords = pt.batch()
        radial = coords[:, 1]
        lo, hi = (self.page.r_min, self.page.r_max) if pt.chart == MAPPING_TORUS else (0.0, 1.0)
        if not np.all(np.isfinite(coords)) or np.any((radial < lo) | (radial > hi)):
            raise DomainError(f"point outside chart {pt.chart!r}: radial coordinate must lie in [{lo}, {hi}]")
        return coords

    def solid_to_mapping(self, binding: int, coords: np.ndarray) -> np.ndarray:
        """``(theta, rho, phi)`` on the overlap to ``(phi, r, theta_c)``."""
        coords = np.asarray(coords, dtype=float).reshape(-1, 3)
        theta, rho, phi = coords.T
        sign = 1.0 if binding == 0 else -1.0
        r = self.page.collar_radius(binding, rho)
        return np.stack([phi, r, np.mod(sign * TWO_PI * theta, TWO_PI)], axis=-1)

    def mapping_to_solid(self, binding: int, coords: np.ndarray) -> np.ndarray:
        """``(phi, r, theta_c)`` on the collar of ``binding`` to ``(theta, rho, phi)``."""
        coords = np.asarray(coords, dtype=float).reshape(-1, 3)
        phi, r, theta_c = coords.T
        rho, theta = self.page.collar_coordinates(binding, r, theta_c)
        return np.stack([theta, rho, phi], axis=-1)

    def transition_jacobian(self, binding: int) -> np.ndarray:
        """``d(phi, r, theta_c) / d(theta, rho, phi)`` on the overlap (constant)."""
        sign = 1.0 if binding == 0 else -1.0
        return np.array([[0.0, 0.0, 1.0], [0.0, -sign, 0.0], [sign * TWO_PI, 0.0, 0.0]])


def build_manifold(spec: OpenBookSpec) -> ManifoldModel:
    """Assemble the chart atlas of the open book ``spec``.

    Raises:
        ConstructionError: For inconsistent page, collar, monodromy or profile data.

    Examples:
    - The tight three-sphere: disk page, identity monodromy
        ```python

        >>> from openbook.profiles import ProfileParams
        >>> params = ProfileParams(0.1, -0.01, 0.05, 0.1, 0.25, 0.5)
        >>> m = build_manifold(OpenBookSpec(PageModel.disk(0.05), Monodromy(), params))
        >>> m.charts
        ('mt', 'st0')

        ```
    """
    broken = spec.page.violations() + spec.monodromy.violations(spec.page) + spec.profile.violations()
    if spec.page.delta != spec.profile.delta:
        broken.append("page delta == profile delta")
    if not 0.0 < spec.tau_margin < 0.5:
        broken.append("0 < tau_margin < 0.5")
    if not spec.epsilon >= 0.0:
        broken.append("epsilon >= 0")
    if broken:
        raise ConstructionError("inconsistent open book data: " + ", ".join(broken))
    charts = (MAPPING_TORUS,) + tuple(f"st{j}" for j in range(spec.n_bindings))
    logger.debug("built manifold with charts %s", charts)
    return ManifoldModel(spec=spec, charts=charts)


def profile_for(p: Profile, eps: float) -> Profile:
    """Unperturbed profile for ``eps = 0``, else the ``eps`` perturbation of the base of ``p``."""
    base = replace(p, eps=0.0) if p.eps else p
    return base if eps == 0.0 else perturb_profile(base, eps)


# ---------------------------------------------------------------------------
# mapping torus


def _tau(m: ManifoldModel, phi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    margin = m.spec.tau_margin
    tau, taup, _ = scaled_step(np.mod(phi, 1.0), margin, 1.0 - margin)
    return tau, taup


def _alpha_parts(page: PageModel, psi: Monodromy, tau: np.ndarray, r: np.ndarray) -> np.ndarray:
    g, _ = page.eta_profile(r)
    _, slope = psi.twist_angle(r)
    return np.stack([np.zeros_like(g), tau * slope * g, g], axis=-1)


def _mt_alpha(m: ManifoldModel, coords: np.ndarray) -> np.ndarray:
    tau, _ = _tau(m, coords[:, 0])
    return _alpha_parts(m.page, m.monodromy, tau, coords[:, 1])


def _mt_dalpha(m: ManifoldModel, coords: np.ndarray) -> np.ndarray:
    _, taup = _tau(m, coords[:, 0])
    g, gp = m.page.eta_profile(coords[:, 1])
    _, slope = m.monodromy.twist_angle(coords[:, 1])
    return two_form(taup * slope * g, 0.0, gp)


def _mt_reeb0(m: ManifoldModel, coords: np.ndarray) -> np.ndarray:
    """``X_0 = d/dphi + X^r d/dr + X^theta d/dtheta_c`` from ``i_X d alpha = 0``."""
    w = _mt_dalpha(m, coords)
    twist, gp = w[:, 0, 1], w[:, 1, 2]
    usable = np.abs(gp) > 1e-300
    system = np.zeros((coords.shape[0], 2, 2))
    system[:, 0, 1] = np.where(usable, -gp, 1.0)
    system[:, 1, 0] = np.where(usable, gp, 1.0)
    rhs = np.stack([np.where(usable, -twist, 0.0), np.zeros_like(gp)], axis=-1)
    solved = np.linalg.solve(system, rhs[..., None])[..., 0]
    return np.concatenate([np.ones((coords.shape[0], 1)), solved], axis=-1)


def _mt_lambda(m: ManifoldModel, coords: np.ndarray, eps: float) -> np.ndarray:
    lam = np.zeros((coords.shape[0], 3))
    lam[:, 0] = 1.0
    return lam + eps * _mt_alpha(m, coords) if eps else lam


def _mt_reeb(m: ManifoldModel, coords: np.ndarray, eps: float) -> np.ndarray:
    x0 = _mt_reeb0(m, coords)
    if not eps:
        return x0
    return x0 / (1.0 + eps * pair(_mt_alpha(m, coords), x0))[:, None]


# ---------------------------------------------------------------------------
# solid tori


def _st_lambda(p: Profile, coords: np.ndarray) -> np.ndarray:
    s = p.sample(coords[:, 1])
    return np.stack([s.f, np.zeros_like(s.f), s.g], axis=-1)


def _st_dlambda(p: Profile, coords: np.ndarray) -> np.ndarray:
    s = p.sample(coords[:, 1])
    return two_form(-s.fp, 0.0, s.gp)


def _st_reeb(p: Profile, coords: np.ndarray) -> np.ndarray:
    rho = coords[:, 1]
    s = p.sample(rho)
    d = s.D
    with np.errstate(divide="ignore", invalid="ignore"):
        x_theta = np.where(rho == 0.0, 1.0 / s.f, np.where(d > 0.0, s.gp / d, 0.0))
        x_phi = np.where(rho == 0.0, 0.0, np.where(d > 0.0, -s.fp / d, 1.0))
    return np.stack([x_theta, np.zeros_like(rho), x_phi], axis=-1)


def _st_taming(p: Profile, coords: np.ndarray) -> np.ndarray:
    # h = -f' below 1 - delta_prime, so this is d lambda_0 there and h dtheta^drho above
    s = profile_for(p, 0.0).sample(coords[:, 1])
    return two_form(s.h, 0.0, s.gp)


# ---------------------------------------------------------------------------
# public evaluation


def _chart_fields(m: ManifoldModel, p: Profile, chart: str, eps: float):
    """Closures ``(lambda, d lambda, X, omega_0)`` over stacked chart coordinates."""
    if chart == MAPPING_TORUS:
        return (
            lambda c: _mt_lambda(m, c, eps),
            lambda c: eps * _mt_dalpha(m, c),
            lambda c: _mt_reeb(m, c, eps),
            lambda c: _mt_dalpha(m, c),
        )
    prof = profile_for(p, eps)
    return (
        lambda c: _st_lambda(prof, c),
        lambda c: _st_dlambda(prof, c),
        lambda c: _st_reeb(prof, c),
        lambda c: _st_taming(p, c),
    )


def _shape(pt: PointTM, values: np.ndarray) -> np.ndarray:
    return values[0] if pt.single else values


def lambda_at(m: ManifoldModel, p: Profile, pt: PointTM, eps: float = 0.0) -> FormSample:
    """``lambda_0`` (``eps = 0``) or ``lambda_eps`` at ``pt`` in chart components.

    Raises:
        DomainError: If ``pt`` is not in a chart of ``m`` or ``eps < 0``.
    """
    if eps < 0.0:
        raise DomainError(f"eps must be non-negative, got {eps!r}")
    coords = m.validate(pt)
    lam, _, _, _ = _chart_fields(m, p, pt.chart, eps)
    return FormSample(point=pt, lam=_shape(pt, lam(coords)))


def reeb_at(m: ManifoldModel, p: Profile, pt: PointTM, eps: float = 0.0) -> np.ndarray:
    """Reeb field ``X_0`` / ``X_eps`` at ``pt`` (``(1/f(0)) d/dtheta`` on the binding)."""
    if eps < 0.0:
        raise DomainError(f"eps must be non-negative, got {eps!r}")
    coords = m.validate(pt)
    _, _, reeb, _ = _chart_fields(m, p, pt.chart, eps)
    return _shape(pt, reeb(coords))


def taming_at(m: ManifoldModel, p: Profile, pt: PointTM) -> np.ndarray:
    """Taming form ``omega_0`` at ``pt``: ``d alpha`` on the mapping torus, ``h dtheta ^ drho`` on
    ``[1 - delta_prime, 1]`` and ``d lambda_0`` below."""
    coords = m.validate(pt)
    _, _, _, omega = _chart_fields(m, p, pt.chart, 0.0)
    return _shape(pt, omega(coords))


def form_sample(m: ManifoldModel, p: Profile, pt: PointTM, eps: float = 0.0) -> FormSample:
    """All forms at ``pt``: ``lambda``, ``d lambda``, ``X``, ``omega_0`` and the contact density."""
    coords = m.validate(pt)
    lam_fn, dlam_fn, reeb_fn, omega_fn = _chart_fields(m, p, pt.chart, eps)
    lam, dlam = lam_fn(coords), dlam_fn(coords)
    return FormSample(
        point=pt,
        lam=_shape(pt, lam),
        omega=_shape(pt, omega_fn(coords)),
        reeb=_shape(pt, reeb_fn(coords)),
        dlam=_shape(pt, dlam),
        contact_density=_shape(pt, wedge_density(lam, dlam)),
    )


def contact_form_ratio(m: ManifoldModel, p: Profile, pt: PointTM, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """``F_eps`` with ``omega_0 = F_eps d lambda_eps`` and the residual ``sup |omega_0 - F_eps d lambda_eps|``.

    ``F_eps`` is the ratio of ``lambda_eps ^ omega_0`` to ``lambda_eps ^ d lambda_eps``.

    Raises:
        DomainError: For ``eps <= 0``, where ``d lambda_0`` vanishes on the mapping torus.
    """
    if not eps > 0.0:
        raise DomainError(f"F_eps needs eps > 0, got {eps!r}")
    sample = form_sample(m, p, PointTM(pt.chart, m.validate(pt)), eps)
    ratio = wedge_density(sample.lam, sample.omega) / sample.contact_density
    residual = np.abs(sample.omega - ratio[:, None, None] * sample.dlam).max(axis=(1, 2))
    return _shape(pt, ratio), _shape(pt, residual)


def alpha_on_mapping_torus(
    page: PageModel, psi: Monodromy, phi: float, point: np.ndarray, tau_margin: float = 0.1
) -> np.ndarray:
    """``alpha = tau(phi) psi^* eta + (1 - tau(phi)) eta`` at page point(s) ``(r, theta_c)``.

    Returns:
        np.ndarray: components ``(alpha_phi, alpha_r, alpha_theta_c)``; ``alpha_phi = 0``.
    """
    point = np.asarray(point, dtype=float)
    r = point[..., 0]
    tau, _, _ = scaled_step(np.mod(phi, 1.0), tau_margin, 1.0 - tau_margin)
    return _alpha_parts(page, psi, np.broadcast_to(tau, np.shape(r)), r)


def pullback_defect(m: ManifoldModel, r: np.ndarray, theta_c: np.ndarray) -> float:
    """``sup |alpha(1^-, p) - psi^* alpha(0, psi(p))|`` over the given page points."""
    r = np.asarray(r, dtype=float).ravel()
    theta_c = np.asarray(theta_c, dtype=float).ravel()
    late = alpha_on_mapping_torus(m.page, m.monodromy, np.nextafter(1.0, 0.0), np.stack([r, theta_c], -1), m.spec.tau_margin)
    r_img, theta_img = monodromy_map(m.monodromy, r, theta_c)
    early = alpha_on_mapping_torus(m.page, m.monodromy, 0.0, np.stack([r_img, theta_img], -1), m.spec.tau_margin)
    _, slope = m.monodromy.twist_angle(r)
    # psi^*: (beta_r, beta_theta) -> (beta_r + Theta' beta_theta, beta_theta)
    pulled = early.copy()
    pulled[:, 1] = early[:, 1] + slope * early[:, 2]
    return float(np.max(np.abs(late - pulled)))


# ---------------------------------------------------------------------------
# verification


def chart_grid(m: ManifoldModel, chart: str, n: int, rho_range: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Cell-centered ``n^3`` grid of a chart as stacked ``(n^3, 3)`` coordinates."""
    if chart == MAPPING_TORUS:
        axes = (cell_centers(0.0, 1.0, n), cell_centers(m.page.r_min, m.page.r_max, n), cell_centers(0.0, TWO_PI, n))
    else:
        lo, hi = rho_range or (0.0, 1.0)
        axes = (cell_centers(0.0, 1.0, n), cell_centers(lo, hi, n), cell_centers(0.0, 1.0, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=-1)


def seam_residual(m: ManifoldModel, p: Profile, eps: float, binding: int, n: int = 10) -> float:
    """Largest disagreement of ``lambda``, ``X`` and ``omega_0`` between ``st<binding>`` and the
    mapping torus on the gluing overlap ``rho in [1 - delta, 1]``."""
    st = chart_grid(m, f"st{binding}", n, rho_range=(1.0 - m.delta, 1.0))
    mt = m.solid_to_mapping(binding, st)
    jac = m.transition_jacobian(binding)
    st_fields = _chart_fields(m, p, f"st{binding}", eps)
    mt_fields = _chart_fields(m, p, MAPPING_TORUS, eps)
    lam_gap = np.abs(st_fields[0](st) - mt_fields[0](mt) @ jac)
    reeb_gap = np.abs(st_fields[2](st) @ jac.T - mt_fields[2](mt))
    omega_gap = np.abs(st_fields[3](st) - jac.T @ mt_fields[3](mt) @ jac)
    return float(max(lam_gap.max(), reeb_gap.max(), omega_gap.max()))


def _audit_chart(m: ManifoldModel, p: Profile, eps: float, chart: str, n: int, step: float) -> Dict[str, float]:
    coords = chart_grid(m, chart, n)
    lam_fn, dlam_fn, reeb_fn, omega_fn = _chart_fields(m, p, chart, eps)
    lam0_fn, _, reeb0_fn, _ = _chart_fields(m, p, chart, 0.0)
    lam, dlam, reeb, omega = lam_fn(coords), dlam_fn(coords), reeb_fn(coords), omega_fn(coords)
    lam0, reeb0 = lam0_fn(coords), reeb0_fn(coords)
    density = wedge_density(lam, dlam)
    out: Dict[str, float] = {
        "min_omega_xi": float(min(wedge_density(lam, omega).min(), wedge_density(lam0, omega).min())),
        "sup_iota": float(max(np.abs(interior(reeb0, omega)).max(), np.abs(interior(reeb, omega)).max())),
        "sup_d_omega": float(np.abs(exterior_derivative_density(omega_fn, coords, step)).max()),
        "contact_min": float(density.min()),
        "contact_max": float(density.max()),
        "lambda_x": float(max(np.abs(pair(lam, reeb) - 1.0).max(), np.abs(pair(lam0, reeb0) - 1.0).max())),
    }
    if chart == MAPPING_TORUS:
        out["mt_density_abs"] = float(np.abs(density).max())
    else:
        rho = coords[:, 1]
        pr = p.params
        core = rho < 1.0 - pr.delta
        out["reeb_agreement"] = float(np.abs(reeb[core] - reeb0[core]).max())
        out["reeb_bitwise"] = float(np.array_equal(reeb[core], reeb0[core]))
        band = (rho >= 1.0 - pr.delta_prime) & core
        out["reeb_collar_exact"] = float(np.array_equal(reeb0[band], np.tile([0.0, 0.0, 1.0], (int(band.sum()), 1))))
        if eps == 0.0:
            d = profile_for(p, 0.0).sample(rho).D
            out["confoliation_rel"] = float((np.abs(density[core] - d[core]) / d[core]).max())
            out["flat_density_abs"] = float(np.abs(density[~core]).max()) if np.any(~core) else 0.0
    if eps > 0.0:
        def ratio(c: np.ndarray) -> np.ndarray:
            return wedge_density(lam_fn(c), omega_fn(c)) / wedge_density(lam_fn(c), dlam_fn(c))

        f_eps = ratio(coords)
        out["f_eps_residual"] = float(np.abs(wedge_density(gradient(ratio, coords, step), dlam)).max())
        out["f_eps_proportionality"] = float(np.abs(omega - f_eps[:, None, None] * dlam).max())
        if chart == MAPPING_TORUS:
            out["f_eps_mapping_torus"] = float(np.median(f_eps))
            out["f_eps_mapping_torus_spread"] = float(np.abs(f_eps * eps - 1.0).max())
    logger.debug("audited chart %s on %s points", chart, coords.shape[0])
    return out


def verify_shs(
    m: ManifoldModel,
    p: Profile,
    eps: float,
    resolution: int = 50,
    step: float = 1e-3,
    tolerances: Optional[Dict[str, float]] = None,
    workers: int = 1,
) -> SHSReport:
    """Audit the stable Hamiltonian structure ``(ker lambda_eps, X_eps, omega_0)`` on chart grids.

    Args:
        m: Manifold.
        p: Unperturbed profile (``eps`` selects the perturbation).
        eps: Contact perturbation size, 0 for the confoliation.
        resolution: Grid points per dimension per chart (at least 50).
        step: Finite-difference step for ``d omega_0`` and ``d F_eps``.
        tolerances: Overrides of :data:`DEFAULT_TOLERANCES`.
        workers: Charts audited concurrently.

    Returns:
        SHSReport: Margins and checks; failures are entries, not exceptions.

    Raises:
        DomainError: If ``resolution < 50``.
    """
    if resolution < 50:
        raise DomainError(f"resolution must be at least 50, got {resolution}")
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    audits = dict(zip(m.charts, ordered_map(lambda c: _audit_chart(m, p, eps, c, resolution, step), m.charts, workers)))
    solid = [audits[c] for c in m.solid_tori]
    mt = audits[MAPPING_TORUS]

    def worst(key: str, fn=max) -> float:
        return fn(a[key] for a in audits.values())

    seam = max(seam_residual(m, p, eps, j, max(10, resolution // 5)) for j in range(m.spec.n_bindings))
    page_r = cell_centers(m.page.r_min, m.page.r_max, resolution)
    page_theta = cell_centers(0.0, TWO_PI, resolution)
    rr, tt = np.meshgrid(page_r, page_theta, indexing="ij")
    pullback = pullback_defect(m, rr, tt)

    checks = [
        ConditionCheck("omega_0 > 0 on xi", worst("min_omega_xi", min) > 0.0, worst("min_omega_xi", min)),
        ConditionCheck("i_X omega_0 = 0", worst("sup_iota") <= tol["iota"], tol["iota"] - worst("sup_iota")),
        ConditionCheck("d omega_0 = 0", worst("sup_d_omega") <= tol["d_omega"], tol["d_omega"] - worst("sup_d_omega")),
        ConditionCheck("lambda(X) = 1", worst("lambda_x") <= tol["lambda_x"], tol["lambda_x"] - worst("lambda_x")),
        ConditionCheck("X = d/dphi on [1 - delta_prime, 1 - delta)", all(a["reeb_collar_exact"] == 1.0 for a in solid), 0.0),
        ConditionCheck("alpha descends to the mapping torus", pullback <= tol["pullback"], tol["pullback"] - pullback),
        ConditionCheck("forms agree across the gluing", seam <= tol["seam"], tol["seam"] - seam),
    ]
    agreement = max(a["reeb_agreement"] for a in solid)
    if eps > 0.0:
        checks.append(ConditionCheck("contact: lambda_eps ^ d lambda_eps > 0", worst("contact_min", min) > 0.0, worst("contact_min", min)))
        checks.append(ConditionCheck("X_eps = X_0 bitwise on rho < 1 - delta", all(a["reeb_bitwise"] == 1.0 for a in solid), -agreement))
        f_residual = worst("f_eps_residual")
        checks.append(ConditionCheck("dF_eps ^ d lambda_eps = 0", f_residual <= tol["f_eps"], tol["f_eps"] - f_residual))
        spread = mt["f_eps_mapping_torus_spread"]
        checks.append(ConditionCheck("F_eps = 1/eps on the mapping torus", spread <= 1e-9, 1e-9 - spread))
        zero_region = "none" if worst("contact_min", min) > 0.0 else "contact density vanishes somewhere"
    else:
        conf = max(a["confoliation_rel"] for a in solid)
        flat = max([a["flat_density_abs"] for a in solid] + [mt["mt_density_abs"]])
        checks.append(ConditionCheck("confoliation: lambda_0 ^ d lambda_0 = D", conf <= tol["confoliation_rel"], tol["confoliation_rel"] - conf))
        checks.append(ConditionCheck("lambda_0 ^ d lambda_0 = 0 on mapping torus and rho >= 1 - delta", flat == 0.0, -flat))
        zero_region = "mapping torus and rho >= 1 - delta"

    report = SHSReport(
        eps=float(eps),
        resolution=int(resolution),
        min_omega_xi=worst("min_omega_xi", min),
        sup_iota=worst("sup_iota"),
        sup_d_omega=worst("sup_d_omega"),
        contact_min=worst("contact_min", min),
        contact_max=worst("contact_max"),
        contact_zero_region=zero_region,
        reeb_agreement=agreement if eps > 0.0 else None,
        f_eps_residual=worst("f_eps_residual") if eps > 0.0 else None,
        f_eps_mapping_torus=mt["f_eps_mapping_torus"] if eps > 0.0 else None,
        lambda_x_defect=worst("lambda_x"),
        seam_residual=seam,
        structural={"mapping_torus_exact": True, "solid_torus_exact": True},
        checks=checks,
        tolerances=dict(tol, fd_step=step),
    )
    for check in checks:
        if not check.passed:
            logger.warning("SHS condition failed (eps=%s): %s", eps, check.name)
    return report


# ---------------------------------------------------------------------------
# Reeb dynamics near the binding


def reeb_cartesian(p: Profile, state: np.ndarray) -> np.ndarray:
    """Reeb field of ``lambda`` in ``(theta, x, y)`` with ``x + i y = rho exp(2 pi i phi)``.

    Returns the time derivative of ``state`` (shape ``(3,)`` or ``(N, 3)``).
    """
    state = np.asarray(state, dtype=float)
    theta_x_y = state.reshape(-1, 3)
    x, y = theta_x_y[:, 1], theta_x_y[:, 2]
    rho = np.hypot(x, y)
    s = p.sample(rho)
    d = s.D
    with np.errstate(divide="ignore", invalid="ignore"):
        # on the binding: gp / D -> 1 / f and -fp / D -> -f'' / (f g'')
        x_theta = np.where(rho == 0.0, 1.0 / s.f, np.where(d > 0.0, s.gp / d, 0.0))
        x_phi = np.where(rho == 0.0, -s.fpp / (s.f * s.gpp), np.where(d > 0.0, -s.fp / d, 1.0))
    out = np.stack([x_theta, -TWO_PI * y * x_phi, TWO_PI * x * x_phi], axis=-1)
    return out.reshape(state.shape)


def binding_period(p: Profile, tol: float = 1e-12) -> float:
    """Period of the binding orbit by integrating the Reeb flow once around ``theta``."""
    result = cash_karp(
        lambda t, y: reeb_cartesian(p, y),
        0.0,
        [0.0, 0.0, 0.0],
        10.0 * p.params.c + 10.0,
        atol=tol,
        rtol=tol,
        h0=p.params.c / 10.0,
        event=lambda t, y: 1.0 - y[0],
    )
    if result.event_time is None:
        raise ConstructionError("binding orbit did not close")
    return float(result.event_time)


def small_period_report(m: ManifoldModel, p: Profile, resolution: int = 50, ratio_bound: float = 1e-2) -> SmallPeriodReport:
    """Binding period against lower bounds for every other closed Reeb orbit of ``X_0``.

    A closed orbit through the mapping torus winds at least once in ``phi``, so its period
    is at least ``1 / sup dphi(X_0)``. Closed orbits on the invariant tori ``rho = const`` of
    a solid torus also wind at least once in ``phi``, giving ``1 / sup X^phi`` there.
    """
    base = profile_for(p, 0.0)
    period = binding_period(base)
    mt = chart_grid(m, MAPPING_TORUS, resolution)
    mt_bound = 1.0 / float(_mt_reeb0(m, mt)[:, 0].max())
    rho = cell_centers(0.0, 1.0, 20 * resolution)
    x_phi = _st_reeb(base, np.stack([np.zeros_like(rho), rho, np.zeros_like(rho)], -1))[:, 2]
    st_bound = 1.0 / float(x_phi.max())
    report = SmallPeriodReport(binding_period=period, mapping_torus_bound=mt_bound, solid_torus_bound=st_bound)
    c = base.params.c
    report.checks = [
        ConditionCheck("binding period = c", abs(period - c) <= 1e-9 * max(c, 1.0), 1e-9 - abs(period - c)),
        ConditionCheck("mapping-torus periods >= 1 - 1e-6", mt_bound >= 1.0 - 1e-6, mt_bound - (1.0 - 1e-6)),
        ConditionCheck(f"binding period / other periods < {ratio_bound}", report.ratio < ratio_bound, ratio_bound - report.ratio),
    ]
    return report
