import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from openbook.data_models import IndexRow
from openbook.errors import ConstructionError, DegenerateOrbitError, DomainError, ParityError
from openbook.geometry import reeb_cartesian
from openbook.holomorphic import PageCurve
from openbook.integrator import cash_karp
from openbook.profiles import Profile

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
J_STANDARD = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation(angle: float) -> np.ndarray:
    cos, sin = math.cos(angle), math.sin(angle)
    return np.array([[cos, -sin], [sin, cos]])


@dataclass
class SymplecticPath:
    """Path of ``2 x 2`` symplectic matrices sampled at times ``t``, starting at the identity.

    Raises:
        ConstructionError: If ``Psi(0)`` is not exactly the identity or some ``|det - 1| > 1e-9``.
    """

    t: np.ndarray
    matrices: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1:] != (2, 2) or self.matrices.shape[0] != self.t.size:
            raise ConstructionError("a symplectic path needs one 2 x 2 matrix per sample time")
        if not np.array_equal(self.matrices[0], np.eye(2)):
            raise ConstructionError("a symplectic path must start at the identity")
        det = np.linalg.det(self.matrices)
        if np.abs(det - 1.0).max() > 1e-9:
            raise ConstructionError(f"det Psi deviates from 1 by {np.abs(det - 1.0).max():.3e}")

    @property
    def endpoint(self) -> np.ndarray:
        return self.matrices[-1]

    def winding(self, vector: np.ndarray) -> float:
        """Total angle swept by ``Psi(t) v``."""
        images = self.matrices @ np.asarray(vector, dtype=float)
        angles = np.unwrap(np.arctan2(images[:, 1], images[:, 0]))
        return float(angles[-1] - angles[0])

    def total_rotation(self) -> float:
        """Swept angle of ``Psi(t) e1`` in units of full turns."""
        return self.winding(np.array([1.0, 0.0])) / TWO_PI


def _samples(k: int, kappa: float) -> int:
    # keeps the rotation per sample well below a quarter turn
    return 64 * max(1, math.ceil(k * abs(kappa))) + 1


def linearized_return_path(p: Profile, k: int = 1, n: Optional[int] = None) -> SymplecticPath:
    """Transverse linearized Reeb flow along the ``k``-fold binding orbit.

    In the constant frame ``(d/dx, d/dy)`` of the solid-torus disk factor the core profile
    gives the rigid rotation ``Psi(t) = exp(-2 pi kappa t / c J)`` on ``[0, k c]``.

    Raises:
        DomainError: If ``k < 1``.

    Examples:
    - A simple orbit turns by less than one full turn
        ```python

        >>> from openbook.profiles import ProfileParams, build_profile
        >>> p = build_profile(ProfileParams(0.1, -0.01, 0.05, 0.1, 0.25, 0.5))
        >>> round(linearized_return_path(p, 1).total_rotation(), 12)
        0.01

        ```
    """
    if k < 1:
        raise DomainError(f"cover multiplicity must be at least 1, got {k}")
    c, kappa = p.params.c, p.params.kappa
    n = n or _samples(k, kappa)
    t = np.linspace(0.0, k * c, n)
    rate = -TWO_PI * kappa / c
    matrices = np.stack([rotation(rate * ti) for ti in t])
    matrices[0] = np.eye(2)
    return SymplecticPath(t=t, matrices=matrices)


def transverse_generator(p: Profile, step: float = 1e-6) -> np.ndarray:
    """``(x, y)`` block of the Jacobian of the Cartesian Reeb field on the binding, by centered differences."""
    gen = np.zeros((2, 2))
    for col in range(2):
        shift = np.zeros(3)
        shift[col + 1] = step
        upper = reeb_cartesian(p, shift)
        lower = reeb_cartesian(p, -shift)
        gen[:, col] = (upper[1:] - lower[1:]) / (2.0 * step)
    return gen


def variational_return_path(p: Profile, k: int = 1, tol: float = 1e-13) -> SymplecticPath:
    """``Psi' = A Psi`` integrated numerically with ``A`` from :func:`transverse_generator`."""
    if k < 1:
        raise DomainError(f"cover multiplicity must be at least 1, got {k}")
    gen = transverse_generator(p)
    period = k * p.params.c
    n = _samples(k, p.params.kappa)
    nodes = np.linspace(0.0, period, n)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return (gen @ y.reshape(2, 2)).ravel()

    result = cash_karp(rhs, 0.0, np.eye(2).ravel(), period, atol=tol, rtol=tol, h0=period / n, nodes=nodes[1:])
    index = np.searchsorted(result.t, nodes)
    matrices = result.y[index].reshape(-1, 2, 2)
    return SymplecticPath(t=nodes, matrices=matrices)


def _check_nondegenerate(path: SymplecticPath) -> None:
    gap = abs(np.linalg.det(path.endpoint - np.eye(2)))
    if gap <= 1e-12:
        raise DegenerateOrbitError(f"degenerate orbit: endpoint has eigenvalue 1 (det(Psi - Id) = {gap:.3e})")


def conley_zehnder(path: SymplecticPath, n_directions: int = 64) -> int:
    """Conley-Zehnder index of a path from the identity with nondegenerate endpoint.

    The windings of ``Psi(t) v`` over unit vectors ``v`` fill an interval of width below a
    half turn; its integer part decides the index: ``2 k`` if it contains the integer
    ``k`` and ``2 k + 1`` if it lies in ``(k, k + 1)``.

    Raises:
        DegenerateOrbitError: If ``Psi(T)`` has eigenvalue 1.

    Examples:
    - Rotation paths
        ```python

        >>> t = np.linspace(0.0, 1.0, 401)
        >>> conley_zehnder(SymplecticPath(t, np.stack([rotation(2 * np.pi * 1.004 * s) for s in t])))
        3

        ```
    """
    _check_nondegenerate(path)
    angles = np.arange(n_directions) * math.pi / n_directions
    turns = np.array([path.winding(np.array([math.cos(a), math.sin(a)])) for a in angles]) / TWO_PI
    lo, hi = float(turns.min()), float(turns.max())
    if math.floor(hi) >= math.ceil(lo):
        return 2 * math.floor(hi)
    return 2 * math.floor(lo) + 1


def _signature(form: np.ndarray) -> int:
    eig = np.linalg.eigvalsh(0.5 * (form + form.T))
    return int((eig > 0.0).sum() - (eig < 0.0).sum())


def _crossing_form(velocity: np.ndarray, inverse: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    generator = -J_STANDARD @ velocity @ inverse
    sym = 0.5 * (generator + generator.T)
    return kernel.T @ sym @ kernel


def crossing_form_index(path: SymplecticPath) -> int:
    """Conley-Zehnder index by brute-force crossing forms on the sample grid.

    Counts ``sign Gamma(0) / 2`` plus ``sign Gamma`` at every interior local minimum of the
    smallest singular value of ``Psi - Id`` that falls below the per-sample motion of ``Psi``.
    ``Gamma = -J Psi' Psi^-1`` restricted to ``ker(Psi - Id)``.

    Raises:
        DegenerateOrbitError: If ``Psi(T)`` has eigenvalue 1.
    """
    _check_nondegenerate(path)
    mats, t = path.matrices, path.t
    velocity = np.gradient(mats, t, axis=0)
    total = 0.5 * _signature(_crossing_form(velocity[0], np.eye(2), np.eye(2)))
    motion = np.linalg.norm(np.diff(mats, axis=0), axis=(1, 2))
    threshold = 4.0 * float(motion.max())
    _, sigma, vt = np.linalg.svd(mats - np.eye(2))
    smallest = sigma[:, -1]
    for i in range(1, t.size - 1):
        if smallest[i] < threshold and smallest[i] <= smallest[i - 1] and smallest[i] <= smallest[i + 1]:
            kernel = vt[i][sigma[i] < threshold].T
            total += _signature(_crossing_form(velocity[i], np.linalg.inv(mats[i]), kernel))
    return int(round(total))


@dataclass
class CurveTopology:
    """Genus, per-puncture Conley-Zehnder indices and relative normal Chern number of a curve."""

    genus: int
    punctures: List[int]
    c1: int
    parity: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.parity = ["even" if mu % 2 == 0 else "odd" for mu in self.punctures]

    @property
    def gamma0(self) -> int:
        """Number of punctures with even Conley-Zehnder index."""
        return sum(1 for mu in self.punctures if mu % 2 == 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "genus": self.genus,
            "punctures": list(self.punctures),
            "parity": list(self.parity),
            "gamma0": self.gamma0,
            "c1": self.c1,
        }


def fredholm_index(top: CurveTopology) -> int:
    """``ind = chi + 2 c1 + sum mu`` with ``chi = 2 - 2 g - #punctures``.

    Raises:
        DomainError: If there are no punctures.

    Examples:
    - A plane asymptotic to an orbit of index 1
        ```python

        >>> fredholm_index(CurveTopology(genus=0, punctures=[1], c1=0))
        2

        ```
    """
    if not top.punctures:
        raise DomainError("fredholm_index needs at least one puncture")
    euler = 2 - 2 * top.genus - len(top.punctures)
    return euler + 2 * top.c1 + sum(top.punctures)


def normal_chern(ind: int, g: int, gamma0: int) -> int:
    """``c1(N_u) = (ind - 2 + 2 g + #Gamma0) / 2``.

    Raises:
        DomainError: If ``gamma0 < 0``.
        ParityError: If the numerator is odd.
    """
    if gamma0 < 0:
        raise DomainError(f"gamma0 must be non-negative, got {gamma0}")
    numerator = ind - 2 + 2 * g + gamma0
    if numerator % 2:
        raise ParityError(f"inconsistent topology data: ind - 2 + 2g + #Gamma0 = {numerator} is odd")
    return numerator // 2


def page_curve_topology(curve: PageCurve, p: Profile, cover: int = 1) -> CurveTopology:
    """Topology of an assembled page curve: genus 0, one puncture per half-cylinder.

    ``c1`` is 0 by construction: the frame ``(d/dx, d/dy)`` that the indices are taken in
    extends over every solid-torus disk factor, so it trivializes ``xi0`` along each end.
    """
    mu = conley_zehnder(linearized_return_path(p, cover))
    return CurveTopology(genus=0, punctures=[mu] * len(curve.half_cylinders), c1=0)


def index_table(p: Profile, n_bindings: int, k_max: Optional[int] = None, oracle_up_to: int = 3) -> List[IndexRow]:
    """Conley-Zehnder indices of the covers ``k <= k_max`` (default ``floor(1 / |kappa|)``) per binding.

    ``mu_cz`` comes from the closed-form return path. For ``k <= oracle_up_to`` the ``oracle``
    column is the crossing-form index of the numerically integrated variational path.
    """
    kappa = p.params.kappa
    k_max = k_max or max(1, int(math.floor(1.0 / abs(kappa))))
    rows = []
    for k in range(1, k_max + 1):
        path = linearized_return_path(p, k)
        mu = conley_zehnder(path)
        oracle = crossing_form_index(variational_return_path(p, k)) if k <= oracle_up_to else None
        for binding in range(n_bindings):
            rows.append(IndexRow(binding=binding, cover=k, rotation=path.total_rotation(), mu_cz=mu, oracle=oracle))
    logger.debug("index table with %s covers for %s bindings", k_max, n_bindings)
    return rows
