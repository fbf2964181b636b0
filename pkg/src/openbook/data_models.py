import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


def json_number(value: Optional[float]) -> Optional[float]:
    """Map non-finite floats to ``None`` so reports stay valid JSON."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass
class ConditionCheck:
    """Outcome of a single verified condition.

    Args:
        name (str): Condition in words, e.g. ``"D > 0 on (0, 1 - delta)"``.
        passed (bool): Whether the condition holds.
        margin (float): Signed margin; positive means satisfied with room to spare.
        witness (Optional[float]): Sample location attaining the margin, if meaningful.

    Examples:
    - A passing check
        ```python

        >>> check = ConditionCheck(name="D > 0", passed=True, margin=0.002, witness=0.001)
        >>> check.to_dict()["passed"]
        True

        ```
    """

    name: str
    passed: bool
    margin: float
    witness: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "margin": json_number(self.margin),
            "witness": json_number(self.witness),
        }


def _all_passed(checks: List[ConditionCheck]) -> bool:
    return all(c.passed for c in checks)


@dataclass
class ProfileReport:
    """Per-condition audit of a profile."""

    checks: List[ConditionCheck] = field(default_factory=list)
    grid_n: int = 0

    @property
    def passed(self) -> bool:
        return _all_passed(self.checks)

    def failures(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def check(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "grid_n": self.grid_n,
            "checks": [c.to_dict() for c in self.checks],
        }


@dataclass
class SHSReport:
    """Margins of the stable Hamiltonian structure audit.

    Attributes:
        eps (float): Contact perturbation size used for ``lambda`` and ``X``.
        resolution (int): Grid points per dimension per chart.
        min_omega_xi (float): Minimum of the density of ``lambda ^ omega_0`` (``omega_0`` on ``xi``).
        sup_iota (float): Supremum of ``|i_X omega_0|`` for ``X_0`` and ``X_eps``.
        sup_d_omega (float): Supremum of the centered-difference ``d omega_0``.
        contact_min (float): Minimum contact density of ``lambda ^ d lambda``.
        contact_max (float): Maximum contact density.
        contact_zero_region (str): Where the density vanishes (``"none"`` when contact).
        reeb_agreement (Optional[float]): ``sup |X_eps - X_0|`` on ``rho < 1 - delta``.
        f_eps_residual (Optional[float]): ``sup |dF_eps ^ d lambda_eps|``; ``None`` for ``eps = 0``.
        f_eps_mapping_torus (Optional[float]): ``F_eps`` on the mapping torus (``1/eps`` expected).
        lambda_x_defect (float): ``sup |lambda(X) - 1|``.
        seam_residual (float): Largest disagreement of ``lambda``, ``X``, ``omega_0`` across the gluing.
        structural (Dict[str, bool]): Exact closedness flags of the closed-form regions.
        checks (List[ConditionCheck]): Pass/fail per axiom with tolerances applied.
        tolerances (Dict[str, float]): Tolerances echoed into the report.
    """

    eps: float
    resolution: int
    min_omega_xi: float
    sup_iota: float
    sup_d_omega: float
    contact_min: float
    contact_max: float
    contact_zero_region: str
    reeb_agreement: Optional[float]
    f_eps_residual: Optional[float]
    f_eps_mapping_torus: Optional[float]
    lambda_x_defect: float
    seam_residual: float
    structural: Dict[str, bool] = field(default_factory=dict)
    checks: List[ConditionCheck] = field(default_factory=list)
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return _all_passed(self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "eps": self.eps,
            "resolution": self.resolution,
            "min_omega_xi": json_number(self.min_omega_xi),
            "sup_iota": json_number(self.sup_iota),
            "sup_d_omega": json_number(self.sup_d_omega),
            "contact_min": json_number(self.contact_min),
            "contact_max": json_number(self.contact_max),
            "contact_zero_region": self.contact_zero_region,
            "reeb_agreement": json_number(self.reeb_agreement),
            "f_eps_residual": json_number(self.f_eps_residual),
            "f_eps_mapping_torus": json_number(self.f_eps_mapping_torus),
            "lambda_x_defect": json_number(self.lambda_x_defect),
            "seam_residual": json_number(self.seam_residual),
            "structural": dict(sorted(self.structural.items())),
            "checks": [c.to_dict() for c in self.checks],
            "tolerances": dict(sorted(self.tolerances.items())),
        }


@dataclass
class SmallPeriodReport:
    """Binding period against the lower bound for every other closed orbit."""

    binding_period: float
    mapping_torus_bound: float
    solid_torus_bound: float
    checks: List[ConditionCheck] = field(default_factory=list)

    @property
    def other_period_bound(self) -> float:
        return min(self.mapping_torus_bound, self.solid_torus_bound)

    @property
    def ratio(self) -> float:
        return self.binding_period / self.other_period_bound

    @property
    def passed(self) -> bool:
        return _all_passed(self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "binding_period": self.binding_period,
            "mapping_torus_bound": self.mapping_torus_bound,
            "solid_torus_bound": self.solid_torus_bound,
            "ratio": self.ratio,
            "checks": [c.to_dict() for c in self.checks],
        }


@dataclass
class AsymptoticSummary:
    """Tail fit of a half-cylinder: ``log rho`` slope and ``a`` slope."""

    exponent: float
    expected_exponent: float
    a_slope: float
    expected_a_slope: float
    window: List[float]
    s_end: float
    rho_end: float

    @property
    def exponent_error(self) -> float:
        return abs(self.exponent - self.expected_exponent)

    @property
    def a_slope_relative_error(self) -> float:
        return abs(self.a_slope - self.expected_a_slope) / abs(self.expected_a_slope)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "exponent": self.exponent,
            "expected_exponent": self.expected_exponent,
            "exponent_error": self.exponent_error,
            "a_slope": self.a_slope,
            "expected_a_slope": self.expected_a_slope,
            "a_slope_relative_error": self.a_slope_relative_error,
            "window": list(self.window),
            "s_end": self.s_end,
            "rho_end": self.rho_end,
        }


@dataclass
class ResidualSummary:
    """Cauchy-Riemann residuals at two grid steps and their Richardson ratio."""

    step: float
    sup_coarse: Dict[str, float]
    sup_fine: Dict[str, float]
    ratio: float
    branch_gap: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "sup_coarse": dict(sorted(self.sup_coarse.items())),
            "sup_fine": dict(sorted(self.sup_fine.items())),
            "ratio": json_number(self.ratio),
            "branch_gap": self.branch_gap,
        }


@dataclass
class EnergySummary:
    """Pieces of the omega_0 energy of a page curve."""

    total: float
    flat: float
    flat_quadrature: float
    collar: float
    taming_band: float
    core: float
    core_quadrature: float
    tail: float

    @property
    def core_error(self) -> float:
        """Relative gap between the integrated and the closed-form core energy."""
        return abs(self.core_quadrature - self.core) / abs(self.core)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "total": self.total,
            "flat": self.flat,
            "flat_quadrature": self.flat_quadrature,
            "collar": self.collar,
            "taming_band": self.taming_band,
            "core": self.core,
            "core_quadrature": self.core_quadrature,
            "core_error": self.core_error,
            "tail": self.tail,
        }


@dataclass
class IndexRow:
    """Conley-Zehnder index of the k-fold cover of a binding orbit."""

    binding: int
    cover: int
    rotation: float
    mu_cz: int
    oracle: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "binding": self.binding,
            "cover": self.cover,
            "rotation": self.rotation,
            "mu_cz": self.mu_cz,
            "oracle": self.oracle,
        }


@dataclass
class FoliationReport:
    """Disjointness, coverage and transversality of a sampled leaf family."""

    n_pages: int
    n_points: int
    matched: int
    ambiguous: int
    max_match_error: float
    min_leaf_distance: float
    min_transversality: float
    checks: List[ConditionCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return _all_passed(self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "n_pages": self.n_pages,
            "n_points": self.n_points,
            "matched": self.matched,
            "ambiguous": self.ambiguous,
            "max_match_error": self.max_match_error,
            "min_leaf_distance": self.min_leaf_distance,
            "min_transversality": self.min_transversality,
            "checks": [c.to_dict() for c in self.checks],
        }
