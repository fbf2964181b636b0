import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.spatial import cKDTree

from openbook.data_models import (
    AsymptoticSummary,
    ConditionCheck,
    EnergySummary,
    FoliationReport,
    ResidualSummary,
)
from openbook.errors import ConstructionError, DomainError
from openbook.geometry import MAPPING_TORUS, ManifoldModel, PointTM, profile_for, reeb_at
from openbook.integrator import IntegrationResult, cash_karp
from openbook.profiles import Profile
from openbook.utils import ordered_map, scaled_step

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
FIRST_BRANCH = "first"
SECOND_BRANCH = "second"
RESIDUAL_NAMES = ("a_s", "a_t", "rho_s", "rho_t")

_STANDARD = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# almost complex structure


@dataclass
class AcsSample:
    """``J0`` at a point of ``R x M`` (``J0`` does not depend on ``a``).

    Attributes:
        point (PointTM): Chart point of ``M``.
        frame (np.ndarray): ``J0`` in the frame ``(d/da, X0, v1, v2)``; on the mapping torus
            ``(d/da, X0, d/dr, d/dtheta_c)``; on the binding ``(d/da, X0, d/dx, d/dy)``.
        basis (np.ndarray): Frame vectors as columns, in ``(a, chart coordinates)``.
        chart (Optional[np.ndarray]): ``J0`` in ``(a, chart coordinates)``; ``None`` on the binding.
        cartesian (Optional[np.ndarray]): ``J0`` in ``(a, theta, x, y)`` with ``x + i y = rho e^{2 pi i phi}``
            near a binding (``rho < rho1``), or ``(a, phi, x, y)`` near a disk center.
        beta (Optional[float]): ``beta(rho)`` on a solid torus.
    """

    point: PointTM
    frame: np.ndarray
    basis: np.ndarray
    chart: Optional[np.ndarray] = None
    cartesian: Optional[np.ndarray] = None
    beta: Optional[float] = None

    def square_defect(self) -> float:
        """``max |J0^2 + Id|`` of the frame matrix."""
        return float(np.abs(self.frame @ self.frame + np.eye(4)).max())


def _frame_matrix(page_block: np.ndarray) -> np.ndarray:
    out = np.zeros((4, 4))
    out[:2, :2] = _STANDARD
    out[2:, 2:] = page_block
    return out


def page_complex_structure(m: ManifoldModel, phi: float, r: float) -> np.ndarray:
    """Page complex structure on ``(d/dr, d/dtheta_c)`` at fiber ``phi``.

    ``J`` is the rotation by a quarter turn of the metric
    ``(1 - tau) g0 + tau psi^* g0`` with ``g0 = dr^2 + m(r)^-2 dtheta_c^2``, so that
    ``J`` at ``phi -> 1`` is the pullback of ``J`` at ``phi = 0`` under the monodromy.
    """
    page, margin = m.page, m.spec.tau_margin

    tau = float(scaled_step(phi % 1.0, margin, 1.0 - margin)[0])
    scale = float(page.complex_scale(r))
    _, slope = m.monodromy.twist_angle(r)
    slope = float(slope)
    inv2 = 1.0 / scale**2
    g11 = 1.0 + tau * slope**2 * inv2
    g12 = tau * slope * inv2
    g22 = inv2
    root = math.sqrt(g11 * g22 - g12**2)
    return np.array([[-g12, -g22], [g11, g12]]) / root


def _polar_jacobian(radius: float, angle: float, angular_scale: float) -> np.ndarray:
    """``d(a, u, x, y) / d(a, u, radius, angle)`` for ``x + i y = radius e^{i angular_scale angle}``."""
    cos, sin = math.cos(angular_scale * angle), math.sin(angular_scale * angle)
    jac = np.eye(4)
    jac[2:, 2:] = [
        [cos, -angular_scale * radius * sin],
        [sin, angular_scale * radius * cos],
    ]
    return jac


def J0_at(m: ManifoldModel, p: Profile, pt: PointTM) -> AcsSample:
    """``J0`` at a single point ``pt`` of ``M``.

    Raises:
        DomainError: If ``pt`` is not a single point of a chart of ``m``.

    Examples:
    - ``J0`` squares to ``-Id`` on a solid torus
        ```python

        >>> from openbook.geometry import Monodromy, OpenBookSpec, PageModel, build_manifold
        >>> from openbook.profiles import ProfileParams, build_profile
        >>> params = ProfileParams(0.1, -0.01, 0.05, 0.1, 0.25, 0.5)
        >>> m = build_manifold(OpenBookSpec(PageModel.disk(0.05), Monodromy(), params))
        >>> acs = J0_at(m, build_profile(params), PointTM("st0", [0.3, 0.4, 0.2]))
        >>> acs.square_defect() < 1e-12
        True

        ```
    """
    coords = m.validate(pt)
    if coords.shape[0] != 1:
        raise DomainError("J0_at evaluates a single point")
    base = profile_for(p, 0.0)
    reeb = reeb_at(m, base, PointTM(pt.chart, coords[0]))

    if pt.chart == MAPPING_TORUS:
        phi, r, theta_c = coords[0]
        basis = np.eye(4)
        basis[1:, 1] = reeb
        frame = _frame_matrix(page_complex_structure(m, phi, r))
        chart = basis @ frame @ np.linalg.inv(basis)
        cartesian = None
        if m.page.kind == "disk" and r < m.page.blend_band()[0]:
            to_cart = _polar_jacobian(r, theta_c, 1.0)
            cartesian = to_cart @ chart @ np.linalg.inv(to_cart) if r > 0.0 else _binding_cartesian(1.0)
        return AcsSample(point=pt, frame=frame, basis=basis, chart=chart, cartesian=cartesian)

    theta, rho, phi = coords[0]
    s = base.sample(rho)
    if rho == 0.0:
        cart = _binding_cartesian(1.0 / s.f)
        basis = np.eye(4)
        basis[1, 1] = 1.0 / s.f
        return AcsSample(point=pt, frame=_frame_matrix(_STANDARD), basis=basis, cartesian=cart)
    beta = float(s.beta)
    basis = np.zeros((4, 4))
    basis[0, 0] = 1.0
    basis[1:, 1] = reeb
    basis[2, 2] = 1.0
    basis[1:, 3] = (-s.g, 0.0, s.f)
    frame = _frame_matrix(np.array([[0.0, -1.0 / beta], [beta, 0.0]]))
    chart = basis @ frame @ np.linalg.inv(basis)
    cartesian = None
    if rho < base.params.rho1:
        to_cart = _polar_jacobian(rho, phi, TWO_PI)
        cartesian = to_cart @ chart @ np.linalg.inv(to_cart)
    return AcsSample(point=pt, frame=frame, basis=basis, chart=chart, cartesian=cartesian, beta=beta)


def _binding_cartesian(reeb_rate: float) -> np.ndarray:
    """Limit of ``J0`` on the binding: ``J d/da = reeb_rate d/du``, ``J d/dx = d/dy``."""
    out = np.zeros((4, 4))
    out[1, 0] = reeb_rate
    out[0, 1] = -1.0 / reeb_rate
    out[3, 2] = 1.0
    out[2, 3] = -1.0
    return out


def cartesian_smoothness(
    m: ManifoldModel, p: Profile, radii: Sequence[float] = (1e-2, 1e-3), binding: int = 0, angle: float = 0.125
) -> Dict[str, float]:
    """Second differences of the Cartesian ``J0`` entries near the binding.

    At each radius ``r`` the second difference in ``x`` with step ``r / 2`` is taken at
    ``x + i y = r e^{2 pi i angle}``. A smooth ``J0`` gives values bounded independently of ``r``.

    Returns:
        Dict[str, float]: ``"second_difference@<r>"`` per radius and ``"ratio"`` of the
        smallest-radius value to the largest-radius value.
    """
    chart = f"st{binding}"

    def cart(x: float, y: float) -> np.ndarray:
        rho = math.hypot(x, y)
        phi = (math.atan2(y, x) / TWO_PI) % 1.0
        return J0_at(m, p, PointTM(chart, [0.0, rho, phi])).cartesian

    out: Dict[str, float] = {}
    values = []
    for r in radii:
        x, y = r * math.cos(TWO_PI * angle), r * math.sin(TWO_PI * angle)
        h = r / 2.0
        second = (cart(x + h, y) - 2.0 * cart(x, y) + cart(x - h, y)) / h**2
        value = float(np.abs(second).max())
        out[f"second_difference@{r:g}"] = value
        values.append(value)
    out["ratio"] = values[-1] / max(values[0], np.finfo(float).tiny)
    return out


# ---------------------------------------------------------------------------
# half-cylinders


@dataclass
class HalfCylinderSolution:
    """The half-cylinder ``(s, t) -> (a(s), t, rho(s), phi0)``.

    Attributes:
        s, a, rho (np.ndarray): Accepted integrator states.
        drho, da (np.ndarray): Right-hand side at the accepted states.
        phi0, a0 (float): Page and ``R``-level constants.
        branch (List[str]): Branch of each sample (``"second"`` for ``rho >= 1 - delta_prime``).
        local_error (np.ndarray): Local error estimate of the step ending at each sample (0 at ``s = 0``).
        asymptotic (AsymptoticSummary): Tail fit.
        stopped (str): ``"rho_min"`` or ``"s_max"``.
        binding (int): Binding component the half-cylinder ends at.
    """

    s: np.ndarray
    a: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    da: np.ndarray
    phi0: float
    a0: float
    branch: List[str]
    local_error: np.ndarray
    asymptotic: AsymptoticSummary
    stopped: str
    binding: int = 0

    @property
    def s_end(self) -> float:
        return float(self.s[-1])

    @property
    def rho_end(self) -> float:
        return float(self.rho[-1])

    def dense(self) -> CubicHermiteSpline:
        """Hermite interpolant of ``(rho, a - a0)``."""
        return CubicHermiteSpline(
            self.s, np.stack([self.rho, self.a - self.a0], axis=-1), np.stack([self.drho, self.da], axis=-1), axis=0
        )

    def rho_at(self, s: np.ndarray) -> np.ndarray:
        """``rho(s)``, extended past ``s_end`` by the fitted exponential tail."""
        s = np.asarray(s, dtype=float)
        inside = self.dense()(np.clip(s, 0.0, self.s_end))[..., 0]
        tail = self.rho_end * np.exp(self.asymptotic.exponent * (s - self.s_end))
        return np.where(s <= self.s_end, inside, tail)

    def a_at(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        inside = self.a0 + self.dense()(np.clip(s, 0.0, self.s_end))[..., 1]
        tail = self.a[-1] + self.asymptotic.a_slope * (s - self.s_end)
        return np.where(s <= self.s_end, inside, tail)

    def shifted(self, sigma: float) -> "HalfCylinderSolution":
        """The ``R``-translate by ``sigma``."""
        return replace(self, a=self.a + sigma, a0=self.a0 + sigma)

    def rows(self) -> List[Dict[str, Union[float, str]]]:
        return [
            {"s": s, "a": a, "rho": rho, "branch": b, "local_error": e}
            for s, a, rho, b, e in zip(
                self.s.tolist(), self.a.tolist(), self.rho.tolist(), self.branch, self.local_error.tolist()
            )
        ]


def _ode(base: Profile):
    collar = 1.0 - base.params.delta_prime

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        rho = y[0]
        sample = base.sample(rho)
        if rho >= collar:
            return np.array([-1.0, sample.f])
        return np.array([sample.fp / (sample.beta * sample.D), sample.f])

    def label(s: float, y: np.ndarray) -> str:
        return SECOND_BRANCH if y[0] >= collar else FIRST_BRANCH

    def guard(s: float, y: np.ndarray) -> Optional[str]:
        if not 0.0 <= y[0] <= 1.0:
            return f"rho={y[0]!r} left [0, 1]"
        return None

    return rhs, label, guard


def branch_gap(p: Profile, rho: np.ndarray) -> float:
    """``sup |f'/(beta D) + 1|`` over the samples of ``rho`` in ``[1 - delta_prime, 1 - delta)``."""
    base = profile_for(p, 0.0)
    pr = base.params
    rho = np.asarray(rho, dtype=float)
    rho = rho[(rho >= 1.0 - pr.delta_prime) & (rho < 1.0 - pr.delta)]
    if rho.size == 0:
        return 0.0
    s = base.sample(rho)
    return float(np.abs(s.fp / (s.beta * s.D) + 1.0).max())


def _integrate(base: Profile, t_end: float, tol: float, nodes=None, rho_stop: Optional[float] = None) -> IntegrationResult:
    rhs, label, guard = _ode(base)
    event = (lambda s, y: y[0] - rho_stop) if rho_stop else None
    return cash_karp(
        rhs, 0.0, [1.0, 0.0], t_end, atol=tol * 1e-4, rtol=tol, h0=1e-3, h_max=1.0,
        nodes=nodes, event=event, label=label, guard=guard,
    )


def _fit_tail(base: Profile, s: np.ndarray, rho: np.ndarray, a: np.ndarray, rho_fit: float) -> AsymptoticSummary:
    window = rho <= rho_fit
    if window.sum() < 8:
        window = np.arange(s.size) >= (3 * s.size) // 4
    exponent = float(np.polyfit(s[window], np.log(rho[window]), 1)[0])
    a_slope = float(np.polyfit(s[window], a[window], 1)[0])
    return AsymptoticSummary(
        exponent=exponent,
        expected_exponent=TWO_PI * base.params.kappa,
        a_slope=a_slope,
        expected_a_slope=base.params.c,
        window=[float(s[window][0]), float(s[window][-1])],
        s_end=float(s[-1]),
        rho_end=float(rho[-1]),
    )


def solve_half_cylinder(
    p: Profile,
    a0: float = 0.0,
    phi0: float = 0.0,
    s_max: float = 400.0,
    tol: float = 1e-10,
    rho_stop: float = 1e-6,
    rho_fit: float = 1e-3,
) -> HalfCylinderSolution:
    """Integrate the half-cylinder ODE from ``rho(0) = 1`` until ``rho < rho_stop`` or ``s = s_max``.

    The half-cylinder is ``u(s, t) = (a(s), t, rho(s), phi0)`` with ``a' = f(rho)`` and
    ``rho' = f'(rho) / (beta D)`` below ``1 - delta_prime``, ``rho' = -1`` above; both branches
    agree on the overlap.

    ``rho`` does not depend on ``a0``: the integrated state is ``(rho, a - a0)``.

    Args:
        p: Profile (its unperturbed version is used).
        a0: ``R``-level of the flat part.
        phi0: Page.
        s_max: Largest ``s``.
        tol: Relative local error tolerance.
        rho_stop: ``rho`` at which integration stops.
        rho_fit: Upper bound of ``rho`` on the tail-fit window.

    Raises:
        DomainError: For non-positive ``s_max`` or ``tol``.
        IntegrationError: On step underflow or ``rho`` leaving ``[0, 1]``.
    """
    if not s_max > 0.0 or not tol > 0.0:
        raise DomainError(f"s_max and tol must be positive, got s_max={s_max!r}, tol={tol!r}")
    base = profile_for(p, 0.0)
    result = _integrate(base, s_max, tol, rho_stop=rho_stop)
    rho, shift = result.y[:, 0], result.y[:, 1]
    labels = [step.label for step in result.steps]
    branch = labels + labels[-1:] if labels else [SECOND_BRANCH]
    local_error = np.concatenate([[0.0], [step.error for step in result.steps]])
    a = a0 + shift
    solution = HalfCylinderSolution(
        s=result.t,
        a=a,
        rho=rho,
        drho=result.dydt[:, 0],
        da=result.dydt[:, 1],
        phi0=float(phi0),
        a0=float(a0),
        branch=branch[: result.t.size],
        local_error=local_error[: result.t.size],
        asymptotic=_fit_tail(base, result.t, rho, shift, rho_fit),
        stopped="rho_min" if result.event_time is not None else "s_max",
    )
    logger.debug(
        "half-cylinder phi0=%s: %s steps, stopped at s=%s (%s)", phi0, len(result.steps), solution.s_end, solution.stopped
    )
    return solution


@dataclass
class MapSample:
    """A map ``u`` sampled on a rectangular ``(s, t)`` grid, solid-torus chart values ``(ns, nt)``."""

    s: np.ndarray
    t: np.ndarray
    a: np.ndarray
    theta: np.ndarray
    rho: np.ndarray
    phi: np.ndarray


def sample_half_cylinder(
    p: Profile, a0: float, phi0: float, s_grid: Sequence[float], t_grid: Sequence[float], tol: float = 1e-12
) -> MapSample:
    """The half-cylinder on the grid ``s_grid x t_grid``, integrated to land on every ``s`` node.

    Raises:
        DomainError: If ``s_grid`` is not increasing from ``0``.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if s_grid.size < 2 or s_grid[0] != 0.0 or np.any(np.diff(s_grid) <= 0.0):
        raise DomainError("s_grid must be increasing and start at 0")
    result = _integrate(profile_for(p, 0.0), float(s_grid[-1]), tol, nodes=s_grid[1:])
    index = np.searchsorted(result.t, s_grid)
    if not np.array_equal(result.t[index], s_grid):
        raise DomainError("integrator did not land on every s node")
    rho = result.y[index, 0]
    a = a0 + result.y[index, 1]
    shape = (s_grid.size, t_grid.size)
    return MapSample(
        s=s_grid,
        t=t_grid,
        a=np.broadcast_to(a[:, None], shape).copy(),
        theta=np.broadcast_to(t_grid[None, :], shape).copy(),
        rho=np.broadcast_to(rho[:, None], shape).copy(),
        phi=np.full(shape, float(phi0)),
    )


@dataclass
class ResidualField:
    """Cauchy-Riemann residuals on the interior of a sampled grid.

    Attributes:
        step (Tuple[float, float]): Grid steps ``(h_s, h_t)``.
        residuals (Dict[str, np.ndarray]): Per equation (``"a_s"``, ``"a_t"``, ``"rho_s"``, ``"rho_t"``).
    """

    step: Tuple[float, float]
    residuals: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def sup(self) -> Dict[str, float]:
        return {name: float(np.abs(values).max()) for name, values in self.residuals.items()}

    @property
    def sup_norm(self) -> float:
        return max(self.sup.values())


def _centered(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    upper = [slice(1, -1), slice(1, -1)]
    lower = [slice(1, -1), slice(1, -1)]
    upper[axis], lower[axis] = slice(2, None), slice(None, -2)
    return (values[tuple(upper)] - values[tuple(lower)]) / (2.0 * h)


def cr_residual(sample: MapSample, p: Profile) -> ResidualField:
    """Residuals of ``du(d/dt) = J0 du(d/ds)`` by centered differences on a uniform grid.

    On ``rho >= 1 - delta_prime`` the reduced equations ``rho_s + theta_t = 0`` and
    ``rho_t - theta_s = 0`` are used.

    Raises:
        DomainError: With fewer than 3 points per axis or a non-uniform grid.
    """
    ns, nt = sample.s.size, sample.t.size
    if ns < 3 or nt < 3:
        raise DomainError(f"grid too coarse: need at least 3 points per axis, got {ns} x {nt}")
    hs = float(sample.s[1] - sample.s[0])
    ht = float(sample.t[1] - sample.t[0])
    if not (np.allclose(np.diff(sample.s), hs, rtol=1e-9, atol=0.0) and np.allclose(np.diff(sample.t), ht, rtol=1e-9, atol=0.0)):
        raise DomainError("cr_residual needs a uniform (s, t) grid")
    d = {}
    for name, values in (("a", sample.a), ("theta", sample.theta), ("rho", sample.rho), ("phi", sample.phi)):
        d[name + "_s"] = _centered(values, 0, hs)
        d[name + "_t"] = _centered(values, 1, ht)
    rho = sample.rho[1:-1, 1:-1]
    base = profile_for(p, 0.0)
    prof = base.sample(rho)
    reduced = rho >= 1.0 - base.params.delta_prime
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(reduced, 1.0, 1.0 / (prof.beta * prof.D))
        rho_s = np.where(reduced, d["rho_s"] + d["theta_t"], d["rho_s"] - (prof.fp * d["theta_t"] + prof.gp * d["phi_t"]) * scale)
        rho_t = np.where(reduced, d["rho_t"] - d["theta_s"], d["rho_t"] + (prof.fp * d["theta_s"] + prof.gp * d["phi_s"]) * scale)
    residuals = {
        "a_s": d["a_s"] - prof.f * d["theta_t"] - prof.g * d["phi_t"],
        "a_t": d["a_t"] + prof.f * d["theta_s"] + prof.g * d["phi_s"],
        "rho_s": rho_s,
        "rho_t": rho_t,
    }
    return ResidualField(step=(hs, ht), residuals=residuals)


def richardson_ratio(
    p: Profile, s_end: float = 10.0, step: float = 1e-2, nt: int = 5, tol: float = 1e-12
) -> ResidualSummary:
    """Sup CR residual of the half-cylinder at grid steps ``step`` and ``step / 2`` and their ratio."""

    def run(h: float) -> ResidualField:
        n = int(round(s_end / h))
        return cr_residual(
            sample_half_cylinder(p, 0.0, 0.0, np.arange(n + 1) * h, np.arange(nt) * h, tol=tol), p
        )

    coarse, fine = run(step), run(step / 2.0)
    solution = sample_half_cylinder(p, 0.0, 0.0, np.linspace(0.0, s_end, 2001), [0.0, 1.0], tol=tol)
    return ResidualSummary(
        step=step,
        sup_coarse=coarse.sup,
        sup_fine=fine.sup,
        ratio=coarse.sup_norm / fine.sup_norm if fine.sup_norm > 0.0 else float("inf"),
        branch_gap=branch_gap(p, solution.rho[:, 0]),
    )


# ---------------------------------------------------------------------------
# page curves


@dataclass
class PageCurve:
    """The lift of the page ``phi0`` at level ``a0``: flat part plus one half-cylinder per binding."""

    phi0: float
    a0: float
    half_cylinders: List[HalfCylinderSolution]

    @classmethod
    def from_parts(cls, half_cylinders: List[HalfCylinderSolution]) -> "PageCurve":
        """Join half-cylinders sharing ``phi0`` and ``a0``.

        Raises:
            ConstructionError: If the half-cylinders disagree on ``phi0`` or ``a0``.
        """
        if not half_cylinders:
            raise ConstructionError("a page curve needs at least one half-cylinder")
        phi0, a0 = half_cylinders[0].phi0, half_cylinders[0].a0
        for hc in half_cylinders[1:]:
            if hc.phi0 != phi0:
                raise ConstructionError(f"mismatched phi0 across bindings: {phi0!r} != {hc.phi0!r}")
            if hc.a0 != a0:
                raise ConstructionError(f"mismatched a0 across bindings: {a0!r} != {hc.a0!r}")
        return cls(phi0=phi0, a0=a0, half_cylinders=list(half_cylinders))

    def junction(self) -> List[Dict[str, float]]:
        """Values of ``a`` and ``phi`` on both sides of ``rho = 1`` per binding."""
        return [
            {"binding": hc.binding, "a_flat": self.a0, "a_cylinder": float(hc.a[0]), "phi_flat": self.phi0, "phi_cylinder": hc.phi0}
            for hc in self.half_cylinders
        ]

    def flat_points(self, m: ManifoldModel, n_r: int = 40, n_theta: int = 64) -> np.ndarray:
        """Mapping-torus points ``(phi0, r, theta_c)`` of the flat part."""
        r = np.linspace(m.page.r_min, m.page.r_max, n_r)
        theta = np.arange(n_theta) * TWO_PI / n_theta
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        return np.stack([np.full(rr.size, self.phi0), rr.ravel(), tt.ravel()], axis=-1)

    def cylinder_points(self, binding: int, n_t: int = 16) -> np.ndarray:
        """Solid-torus points ``(t, rho(s_i), phi0)`` of a half-cylinder."""
        hc = self.half_cylinders[binding]
        t = np.arange(n_t) / n_t
        ss, tt = np.meshgrid(hc.rho, t, indexing="ij")
        return np.stack([tt.ravel(), ss.ravel(), np.full(ss.size, self.phi0)], axis=-1)


def assemble_page_curve(
    m: ManifoldModel,
    p: Profile,
    phi0: float,
    a0: float = 0.0,
    s_max: float = 400.0,
    tol: float = 1e-10,
    rho_stop: float = 1e-6,
) -> PageCurve:
    """Lift the page ``phi0`` to a ``J0``-curve with one positive end per binding."""
    solution = solve_half_cylinder(p, a0=a0, phi0=phi0, s_max=s_max, tol=tol, rho_stop=rho_stop)
    parts = [replace(solution, binding=j) for j in range(m.spec.n_bindings)]
    return PageCurve.from_parts(parts)


def is_embedded(curve: PageCurve, m: ManifoldModel) -> bool:
    """Whether the sampled curve is embedded: ``rho`` strictly decreasing on every half-cylinder,
    one half-cylinder per solid torus and ``a, phi`` constant across every junction."""
    if len(curve.half_cylinders) != m.spec.n_bindings:
        return False
    if sorted(hc.binding for hc in curve.half_cylinders) != list(range(m.spec.n_bindings)):
        return False
    for hc in curve.half_cylinders:
        if not np.all(np.diff(hc.rho) < 0.0) or hc.a[0] != curve.a0 or hc.phi0 != curve.phi0:
            return False
    return True


def omega_energy(curve: PageCurve, m: ManifoldModel, p: Profile, n: int = 4001) -> EnergySummary:
    """``omega_0`` energy of a page curve.

    The flat part carries the page minus the solid tori and contributes the ``d eta`` area
    (``1`` per boundary component). Each half-cylinder contributes ``delta`` on the collar
    ``rho in [1 - delta, 1]``, ``int h drho`` over ``[1 - delta_prime, 1 - delta]`` and
    ``f(0) - f(1 - delta_prime)`` over the core. The core is also integrated along each
    sampled half-cylinder; ``tail`` is the part ``f(0) - f(rho_end)`` beyond the integrated range.
    """
    base = profile_for(p, 0.0)
    pr = base.params
    page = m.page
    r_lo = page.r_min + (page.delta if page.kind == "annulus" else 0.0)
    r_hi = page.r_max - page.delta
    g_hi, _ = page.eta_profile(r_hi)
    g_lo, _ = page.eta_profile(r_lo)
    flat = float(TWO_PI * (g_hi - (g_lo if page.kind == "annulus" else 0.0)))
    r = np.linspace(r_lo, r_hi, n)
    theta = np.linspace(0.0, TWO_PI, 65)
    _, gp = page.eta_profile(r)
    density = np.broadcast_to(gp[:, None], (n, theta.size))
    flat_quadrature = float(simpson(simpson(density, x=theta, axis=1), x=r))

    band = quad(lambda x: float(base.sample(x).h), 1.0 - pr.delta_prime, 1.0 - pr.delta, limit=200, epsabs=1e-13)[0]
    core = float(base.sample(0.0).f - base.sample(1.0 - pr.delta_prime).f)
    n_cyl = len(curve.half_cylinders)
    tail = sum(_tail_energy(hc, base) for hc in curve.half_cylinders)
    core_quadrature = sum(core_energy_quadrature(hc, p) for hc in curve.half_cylinders)
    collar = n_cyl * pr.delta
    total = flat + collar + n_cyl * (band + core)
    summary = EnergySummary(
        total=total,
        flat=flat,
        flat_quadrature=flat_quadrature,
        collar=collar,
        taming_band=n_cyl * band,
        core=n_cyl * core,
        core_quadrature=core_quadrature,
        tail=tail,
    )
    logger.debug("core energy %s, integrated %s (relative gap %.3e)", summary.core, core_quadrature, summary.core_error)
    return summary


def _tail_energy(hc: HalfCylinderSolution, base: Profile) -> float:
    return float(base.sample(0.0).f - base.sample(hc.rho_end).f)


def core_energy_quadrature(hc: HalfCylinderSolution, p: Profile, refine: int = 4) -> float:
    """Core energy of one half-cylinder from its samples.

    Integrates the pullback density ``f'(rho)^2 / (beta D)`` along the sampled ``rho(s)``
    (Hermite dense output, every accepted step split into ``refine`` pieces) from
    ``rho = 1 - delta_prime`` to ``s_end``, then adds ``f(0) - f(rho_end)`` for the part of the
    end beyond ``s_end``. Equals ``f(0) - f(1 - delta_prime)`` up to the integration error
    only when ``hc`` solves the half-cylinder ODE.
    """
    base = profile_for(p, 0.0)
    s_knot = float(_invert_rho(hc, np.array([1.0 - base.params.delta_prime]))[0])
    nodes = np.concatenate([[s_knot], hc.s[hc.s > s_knot]])
    width = np.diff(nodes)
    s = np.append((nodes[:-1, None] + width[:, None] * np.arange(refine) / refine).ravel(), nodes[-1])
    sample = base.sample(hc.dense()(s)[:, 0])
    density = sample.fp**2 / (sample.beta * sample.D)
    return float(simpson(density, x=s)) + _tail_energy(hc, base)


# ---------------------------------------------------------------------------
# foliation


def _invert_rho(hc: HalfCylinderSolution, targets: np.ndarray, iterations: int = 30) -> np.ndarray:
    """``s`` with ``rho(s) = target``: Newton on the dense output, closed-form tail below ``rho_end``."""
    targets = np.asarray(targets, dtype=float)
    spline = hc.dense()
    slope = spline.derivative()
    inside = targets >= hc.rho_end
    s = np.interp(targets, hc.rho[::-1], hc.s[::-1])
    for _ in range(iterations):
        values = spline(s)[:, 0] - targets
        step = values / slope(s)[:, 0]
        s = np.clip(s - step, 0.0, hc.s_end)
        if np.all(np.abs(values[inside]) <= 1e-14):
            break
    with np.errstate(divide="ignore"):
        tail = hc.s_end + np.log(targets / hc.rho_end) / hc.asymptotic.exponent
    return np.where(inside, s, tail)


def _ambiguous(hc: HalfCylinderSolution, targets: np.ndarray) -> int:
    """Targets admitting more than one ``s`` (only possible where ``rho`` fails to decrease)."""
    bad = np.flatnonzero(np.diff(hc.rho) >= 0.0)
    if bad.size == 0:
        return 0
    lo = np.minimum(hc.rho[bad], hc.rho[bad + 1])
    hi = np.maximum(hc.rho[bad], hc.rho[bad + 1])
    hits = np.zeros(targets.shape, dtype=bool)
    for a, b in zip(lo, hi):
        hits |= (targets >= a) & (targets <= b)
    return int(hits.sum())


def _min_cross_distance(clouds: List[np.ndarray]) -> float:
    best = np.inf
    for i, cloud in enumerate(clouds):
        tree = cKDTree(cloud)
        for j, other in enumerate(clouds):
            if j != i:
                best = min(best, float(tree.query(other, k=1)[0].min()))
    return best


def _mt_embedding(points: np.ndarray) -> np.ndarray:
    phi, r, theta = points.T
    return np.stack([np.cos(TWO_PI * phi), np.sin(TWO_PI * phi), r * np.cos(theta), r * np.sin(theta)], axis=-1)


def _st_embedding(points: np.ndarray) -> np.ndarray:
    theta, rho, phi = points.T
    return np.stack([theta, rho * np.cos(TWO_PI * phi), rho * np.sin(TWO_PI * phi)], axis=-1)


def _chord(dphi: np.ndarray) -> np.ndarray:
    return 2.0 * np.abs(np.sin(math.pi * dphi))


def _phase_neighbours(phases: np.ndarray, phi: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` leaves closest to each ``phi`` on the page circle."""
    tree = cKDTree(np.stack([np.cos(TWO_PI * phases), np.sin(TWO_PI * phases)], axis=-1))
    _, idx = tree.query(np.stack([np.cos(TWO_PI * phi), np.sin(TWO_PI * phi)], axis=-1), k=k)
    return np.asarray(idx).reshape(phi.size, k)


def _page_points(m: ManifoldModel, n_pages: int, n_points: int, seed: int) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Random points of ``M - B`` on the pages ``phi = j / n_pages``.

    Half are drawn on the mapping torus and half on the solid tori; mapping-torus points with
    ``rho <= 1`` in a solid-torus chart are moved to that chart.
    """
    rng = np.random.default_rng(seed)
    n_mt = n_points // 2
    n_st = n_points - n_mt
    page = m.page
    mt = np.stack(
        [
            rng.integers(n_pages, size=n_mt) / n_pages,
            page.r_min + rng.random(n_mt) * (page.r_max - page.r_min),
            rng.random(n_mt) * TWO_PI,
        ],
        axis=-1,
    )
    owner = rng.integers(m.spec.n_bindings, size=n_st)
    st = np.stack([rng.random(n_st), 1.0 - rng.random(n_st), rng.integers(n_pages, size=n_st) / n_pages], axis=-1)
    flat = np.ones(n_mt, dtype=bool)
    solid = []
    for j in range(m.spec.n_bindings):
        converted = m.mapping_to_solid(j, mt)
        overlap = flat & (converted[:, 1] <= 1.0)
        solid.append(np.concatenate([st[owner == j], converted[overlap]]))
        flat &= ~overlap
    return mt[flat], solid


def foliation_audit(
    m: ManifoldModel,
    p: Profile,
    leaves: Sequence[PageCurve],
    n_pages: int,
    n_points: int = 100_000,
    seed: int = 0,
    match_tol: float = 1e-6,
) -> FoliationReport:
    """Disjointness, coverage and transversality of a family of page curves.

    Coverage draws ``n_points`` random points of ``M - B`` on the pages ``phi = j / n_pages``
    and measures their distance to the two nearest leaves. Distances use the chart
    coordinates of ``M - B``: the chord of ``phi - phi0`` on the flat part, and
    ``hypot(rho_leaf - rho, chord(phi - phi0))`` on a solid torus, with ``rho_leaf`` the point
    of the leaf's own half-cylinder at the ``s`` solving ``rho(s) = rho``. A point is covered
    when the nearest leaf is within ``match_tol`` and the second nearest is not.
    Transversality is ``dphi(X0) > 0`` along the sampled leaves.

    Raises:
        DomainError: If there are no leaves or ``n_points < 1``.

    Examples:
        ```python
        >>> from openbook.geometry import Monodromy, OpenBookSpec, PageModel, build_manifold
        >>> from openbook.profiles import ProfileParams, build_profile, kappa_catalogue
        >>> params = ProfileParams(0.1, kappa_catalogue()["sqrt2_e2"], 0.05, 0.1, 0.25, 0.5)
        >>> m = build_manifold(OpenBookSpec(PageModel.disk(0.05), Monodromy(), params))
        >>> p = build_profile(params)
        >>> leaves = [assemble_page_curve(m, p, j / 4) for j in range(4)]
        >>> foliation_audit(m, p, leaves, 4, n_points=200).passed
        True
        >>> foliation_audit(m, p, leaves[:3], 4, n_points=200).passed
        False

        ```
    """
    if not leaves:
        raise DomainError("the leaf family is empty")
    if n_points < 1:
        raise DomainError(f"n_points must be positive, got {n_points}")
    base = profile_for(p, 0.0)

    mt_clouds = [leaf.flat_points(m) for leaf in leaves]
    min_distance = _min_cross_distance([_mt_embedding(c) for c in mt_clouds]) if len(leaves) > 1 else np.inf
    for j in range(m.spec.n_bindings):
        if len(leaves) > 1:
            clouds = [_st_embedding(leaf.cylinder_points(j)) for leaf in leaves]
            min_distance = min(min_distance, _min_cross_distance(clouds))

    transversality = np.inf
    for leaf, mt_cloud in zip(leaves, mt_clouds):
        transversality = min(transversality, float(reeb_at(m, base, PointTM(MAPPING_TORUS, mt_cloud))[:, 0].min()))
        for j in range(m.spec.n_bindings):
            cloud = leaf.cylinder_points(j)
            transversality = min(transversality, float(reeb_at(m, base, PointTM(f"st{j}", cloud))[:, 2].min()))

    phases = np.array([leaf.phi0 for leaf in leaves])
    k = min(2, len(leaves))
    flat, solid = _page_points(m, n_pages, n_points, seed)
    distances = []
    if flat.size:
        distances.append(_chord(flat[:, 0, None] - phases[_phase_neighbours(phases, flat[:, 0], k)]))
    ambiguous = 0
    for j, points in enumerate(solid):
        if not points.size:
            continue
        idx = _phase_neighbours(phases, points[:, 2], k)
        dist = np.empty(idx.shape)
        for leaf_id in np.unique(idx):
            hc = leaves[leaf_id].half_cylinders[j]
            hit = idx == leaf_id
            rows = np.flatnonzero(hit.any(axis=1))
            targets = points[rows, 1]
            rho_leaf = hc.rho_at(_invert_rho(hc, targets))
            ambiguous += _ambiguous(hc, targets)
            d = np.hypot(rho_leaf - targets, _chord(points[rows, 2] - hc.phi0))
            for col in range(k):
                sel = hit[rows, col]
                dist[rows[sel], col] = d[sel]
        distances.append(dist)
    dist = np.concatenate(distances)
    nearest = dist.min(axis=1)
    matched = int((nearest <= match_tol).sum())
    if k > 1:
        ambiguous += int((dist.max(axis=1) <= match_tol).sum())

    report = FoliationReport(
        n_pages=n_pages,
        n_points=int(n_points),
        matched=matched,
        ambiguous=ambiguous,
        max_match_error=float(nearest.max()),
        min_leaf_distance=float(min_distance),
        min_transversality=float(transversality),
    )
    report.checks = [
        ConditionCheck("distinct leaves are disjoint", min_distance > 0.0, float(min_distance)),
        ConditionCheck(
            f"every sampled point lies on exactly one leaf within {match_tol:g}",
            matched == n_points and ambiguous == 0,
            match_tol - report.max_match_error,
        ),
        ConditionCheck("leaves transverse to X0", transversality > 0.0, float(transversality)),
        ConditionCheck("leaves embedded", all(is_embedded(leaf, m) for leaf in leaves), 0.0),
    ]
    for check in report.checks:
        if not check.passed:
            logger.warning("foliation condition failed: %s", check.name)
    return report


def foliation_sample(
    m: ManifoldModel,
    p: Profile,
    n_pages: int = 16,
    n_points: int = 100_000,
    seed: int = 0,
    s_max: float = 400.0,
    tol: float = 1e-10,
    match_tol: float = 1e-6,
    workers: int = 1,
    rho_stop: float = 1e-6,
) -> Tuple[List[PageCurve], FoliationReport]:
    """Page curves for ``phi0 = j / n_pages`` and their :func:`foliation_audit`.

    Raises:
        DomainError: If ``n_pages < 2``.
    """
    if n_pages < 2:
        raise DomainError(f"n_pages must be at least 2, got {n_pages}")
    phis = [j / n_pages for j in range(n_pages)]
    leaves = ordered_map(
        lambda phi0: assemble_page_curve(m, p, phi0, 0.0, s_max, tol, rho_stop=rho_stop), phis, workers
    )
    return leaves, foliation_audit(m, p, leaves, n_pages, n_points, seed, match_tol)


def export_csv(solution: HalfCylinderSolution, path: Union[str, Path]) -> Path:
    """Write ``s, a, rho, branch, local_error`` rows of a half-cylinder."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=["s", "a", "rho", "branch", "local_error"], lineterminator="\n")
        writer.writeheader()
        for row in solution.rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return path
