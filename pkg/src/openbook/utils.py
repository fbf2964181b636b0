import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Iterable, List, Tuple, TypeVar, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PPoly
from scipy.special import expit

from openbook.errors import DomainError

ArrayLike = Union[float, np.ndarray]
T = TypeVar("T")
R = TypeVar("R")


def smooth_step(t: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat-ended C-infinity step and its first two derivatives.

    The step is ``sigma(t) / (sigma(t) + sigma(1 - t))`` with
    ``sigma(t) = exp(-1/t)``, written as ``expit(1/(1-t) - 1/t)`` for stability.
    Inputs outside ``[0, 1]`` are clamped: the step is exactly 0 for ``t <= 0``
    and exactly 1 for ``t >= 1``, with vanishing derivatives there.

    Args:
        t: Scalar or array of parameters.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: value, first and second derivative.

    Examples:
    - The midpoint is fixed by symmetry
        ```python

        >>> value, first, second = smooth_step(0.5)
        >>> float(value), float(first), float(second)
        (0.5, 2.0, 0.0)

        ```
    """
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    ti = np.where(inside, t, 0.5)
    q = 1.0 / (1.0 - ti) - 1.0 / ti
    up = expit(q)
    down = expit(-q)
    bump = up * down
    with np.errstate(over="ignore", invalid="ignore"):
        q1 = 1.0 / (1.0 - ti) ** 2 + 1.0 / ti**2
        q2 = 2.0 / (1.0 - ti) ** 3 - 2.0 / ti**3
        first = np.where(bump > 0.0, bump * q1, 0.0)
        second = np.where(bump > 0.0, bump * ((down - up) * q1**2 + q2), 0.0)
    value = np.where(inside, up, np.where(t >= 1.0, 1.0, 0.0))
    first = np.where(inside, first, 0.0)
    second = np.where(inside, second, 0.0)
    return value, first, second


def scaled_step(x: ArrayLike, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``smooth_step`` stretched onto ``[lo, hi]``, derivatives taken in ``x``."""
    width = hi - lo
    value, first, second = smooth_step((np.asarray(x, dtype=float) - lo) / width)
    return value, first / width, second / width**2


@lru_cache(maxsize=1)
def _half_step_integral() -> PPoly:
    t = np.linspace(0.0, 0.5, 4097)
    value, first, _ = smooth_step(t)
    return CubicHermiteSpline(t, value, first).antiderivative()


def step_integral(x: ArrayLike, lo: float, hi: float) -> np.ndarray:
    """``int_lo^x scaled_step(y, lo, hi) dy``, zero below ``lo`` and linear above ``hi``.

    The second half of the step is folded onto the first with ``s(t) = 1 - s(1 - t)``,
    so the integral over the whole step is exactly ``(hi - lo) / 2``.

    Examples:
    - Full step and overshoot
        ```python

        >>> float(step_integral(1.0, 0.0, 1.0)), float(step_integral(3.0, 1.0, 2.0))
        (0.5, 1.5)

        ```
    """
    x = np.asarray(x, dtype=float)
    width = hi - lo
    t = np.clip((x - lo) / width, 0.0, 1.0)
    half = _half_step_integral()
    folded = np.where(t <= 0.5, half(np.minimum(t, 0.5)), t - 0.5 + half(np.clip(1.0 - t, 0.0, 0.5)))
    return width * folded + np.maximum(x - hi, 0.0)


def blend(t: ArrayLike, a: float, b: float) -> ArrayLike:
    """Interpolate from ``a`` to ``b`` with the flat-ended blend.

    Args:
        t: Parameter (scalar or array) in ``[0, 1]``.
        a: Value on a neighborhood of ``t = 0``.
        b: Value on a neighborhood of ``t = 1``.

    Returns:
        float or np.ndarray: ``a`` for ``t`` near 0, ``b`` for ``t`` near 1, strictly
        monotone in between when ``a != b``.

    Raises:
        DomainError: If any ``t`` is outside ``[0, 1]`` or not finite.

    Examples:
    - Flat ends and the symmetric midpoint
        ```python

        >>> blend(0, 3, 7), blend(1, 3, 7), blend(0.5, 0, 1)
        (3.0, 7.0, 0.5)

        ```
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)) or np.any((t_arr < 0.0) | (t_arr > 1.0)):
        raise DomainError(f"blend parameter must lie in [0, 1], got {t!r}")
    step, _, _ = smooth_step(t_arr)
    out = np.where(step >= 1.0, float(b), a + step * (b - a))
    return float(out) if out.ndim == 0 else out


def interior(vector: np.ndarray, form: np.ndarray) -> np.ndarray:
    """Components ``(i_X w)_j = X^i w_ij`` for stacked vectors ``(..., 3)`` and forms ``(..., 3, 3)``."""
    return np.einsum("...i,...ij->...j", vector, form)


def pair(one_form: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", one_form, vector)


def wedge_density(one_form: np.ndarray, form: np.ndarray) -> np.ndarray:
    """Coefficient of ``dx0^dx1^dx2`` in ``l ^ w`` for a 1-form and a 2-form."""
    return (
        one_form[..., 0] * form[..., 1, 2]
        - one_form[..., 1] * form[..., 0, 2]
        + one_form[..., 2] * form[..., 0, 1]
    )


def two_form(c01: ArrayLike, c02: ArrayLike, c12: ArrayLike) -> np.ndarray:
    """Antisymmetric ``(..., 3, 3)`` array from the three upper coefficients."""
    c01, c02, c12 = np.broadcast_arrays(
        np.asarray(c01, dtype=float), np.asarray(c02, dtype=float), np.asarray(c12, dtype=float)
    )
    out = np.zeros(c01.shape + (3, 3))
    out[..., 0, 1], out[..., 1, 0] = c01, -c01
    out[..., 0, 2], out[..., 2, 0] = c02, -c02
    out[..., 1, 2], out[..., 2, 1] = c12, -c12
    return out


def exterior_derivative_density(
    form_fn: Callable[[np.ndarray], np.ndarray], coords: np.ndarray, step: float
) -> np.ndarray:
    """Centered-difference ``d w`` of a 2-form field, as the ``dx0^dx1^dx2`` coefficient.

    Args:
        form_fn: Maps points ``(N, 3)`` to 2-form arrays ``(N, 3, 3)``.
        coords: Evaluation points ``(N, 3)``.
        step: Difference step in every coordinate.

    Returns:
        np.ndarray: ``d0 w12 - d1 w02 + d2 w01`` at every point.
    """
    pairs = ((1, 2), (0, 2), (0, 1))
    signs = (1.0, -1.0, 1.0)
    total = np.zeros(coords.shape[0])
    for axis, (i, j), sign in zip(range(3), pairs, signs):
        shift = np.zeros(3)
        shift[axis] = step
        upper = form_fn(coords + shift)[:, i, j]
        lower = form_fn(coords - shift)[:, i, j]
        total += sign * (upper - lower) / (2.0 * step)
    return total


def gradient(fn: Callable[[np.ndarray], np.ndarray], coords: np.ndarray, step: float) -> np.ndarray:
    """Centered-difference gradient ``(N, 3)`` of a scalar field on a chart."""
    out = np.zeros(coords.shape)
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        out[:, axis] = (fn(coords + shift) - fn(coords - shift)) / (2.0 * step)
    return out


def cell_centers(lo: float, hi: float, n: int) -> np.ndarray:
    """``n`` cell-centered samples of ``[lo, hi]``."""
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def worker_count(default: int = 1) -> int:
    """Worker count from ``OPENBOOK_WORKERS`` (at least 1)."""
    raw = os.environ.get("OPENBOOK_WORKERS", "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        return default


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """Apply ``fn`` to ``items`` on a thread pool, returning results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
