import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from openbook.errors import IntegrationError

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]

_A = (0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0)
_B = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0),
    (-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0),
    (1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0),
)
_C_HIGH = (37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0)
_C_LOW = (2825.0 / 27648.0, 0.0, 18575.0 / 48384.0, 13525.0 / 55296.0, 277.0 / 14336.0, 1.0 / 4.0)
_SAFETY = 0.9


@dataclass
class StepRecord:
    """One accepted step: start time, size, local error estimate and branch label."""

    t: float
    h: float
    error: float
    label: str = ""


@dataclass
class IntegrationResult:
    """Accepted states with derivatives, step records and the event time if one fired."""

    t: np.ndarray
    y: np.ndarray
    dydt: np.ndarray
    steps: List[StepRecord] = field(default_factory=list)
    event_time: Optional[float] = None
    rejected: int = 0

    def dense(self) -> CubicHermiteSpline:
        """Cubic Hermite dense output through the accepted states."""
        return CubicHermiteSpline(self.t, self.y, self.dydt, axis=0)


def _stages(rhs: RHS, t: float, y: np.ndarray, h: float, k1: np.ndarray):
    ks = [k1]
    for i in range(1, 6):
        incr = sum(b * k for b, k in zip(_B[i], ks))
        ks.append(np.asarray(rhs(t + _A[i] * h, y + h * incr), dtype=float))
    high = y + h * sum(c * k for c, k in zip(_C_HIGH, ks))
    low = y + h * sum(c * k for c, k in zip(_C_LOW, ks))
    return high, low


def _locate_event(event, t0, y0, d0, t1, y1, d1) -> float:
    spline = CubicHermiteSpline([t0, t1], np.stack([y0, y1]), np.stack([d0, d1]), axis=0)
    return brentq(lambda t: event(t, spline(t)), t0, t1, xtol=1e-15, rtol=4.0 * np.finfo(float).eps)


def cash_karp(
    rhs: RHS,
    t0: float,
    y0: Sequence[float],
    t_end: float,
    atol: float = 1e-10,
    rtol: float = 1e-10,
    h0: float = 1e-3,
    h_min: float = 1e-12,
    h_max: float = np.inf,
    max_steps: int = 1_000_000,
    nodes: Optional[Sequence[float]] = None,
    event: Optional[Callable[[float, np.ndarray], float]] = None,
    label: Optional[Callable[[float, np.ndarray], str]] = None,
    guard: Optional[Callable[[float, np.ndarray], Optional[str]]] = None,
) -> IntegrationResult:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end`` adaptively.

    Args:
        rhs: Right-hand side returning an array shaped like ``y``.
        t0: Start time.
        y0: Initial state.
        t_end: Final time (``> t0``).
        atol: Absolute tolerance of the local error per component.
        rtol: Relative tolerance of the local error per component.
        h0: First trial step.
        h_min: Smallest admissible step; smaller required steps raise.
        h_max: Largest admissible step.
        max_steps: Bound on attempted steps.
        nodes: Times the integrator must land on exactly (sorted, within ``(t0, t_end]``).
        event: Terminal event; integration stops where it changes sign from positive to non-positive.
        label: Branch label attached to each accepted step (evaluated at the step start).
        guard: Returns an error message when an accepted state is inadmissible.

    Returns:
        IntegrationResult: accepted states including ``t0`` and the final (or event) state.

    Raises:
        IntegrationError: On step underflow, non-finite states, guard violations or step exhaustion.

    Examples:
    - Exponential decay lands on the requested node
        ```python

        >>> res = cash_karp(lambda t, y: -y, 0.0, [1.0], 1.0, nodes=[0.5])
        >>> bool(abs(res.y[-1, 0] - np.exp(-1.0)) < 1e-9), 0.5 in res.t
        (True, True)

        ```
    """
    if not t_end > t0:
        raise IntegrationError(f"t_end={t_end} must exceed t0={t0}")
    pending = sorted({float(n) for n in (() if nodes is None else nodes) if t0 < n <= t_end})
    t = float(t0)
    y = np.array(y0, dtype=float)
    k1 = np.asarray(rhs(t, y), dtype=float)
    h = min(float(h0), h_max)
    ts, ys, ds = [t], [y.copy()], [k1.copy()]
    steps: List[StepRecord] = []
    rejected = 0
    prev_event = event(t, y) if event is not None else None

    for _ in range(max_steps):
        if t >= t_end:
            break
        target = pending[0] if pending else t_end
        landing = t + h >= target
        step = target - t if landing else h
        high, low = _stages(rhs, t, y, step, k1)
        err = np.abs(high - low)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(high))
        ratio = float(np.max(err / scale)) if np.all(np.isfinite(high)) else np.inf

        if not ratio <= 1.0:
            rejected += 1
            factor = 0.2 if not np.isfinite(ratio) else max(0.2, _SAFETY * ratio**-0.25)
            h = step * factor
            if h < h_min:
                raise IntegrationError(
                    f"step underflow at t={t!r}: required h={h!r} < h_min={h_min!r} (error ratio {ratio!r})"
                )
            continue

        t_new = target if landing else t + step
        k_new = np.asarray(rhs(t_new, high), dtype=float)
        if guard is not None:
            message = guard(t_new, high)
            if message:
                raise IntegrationError(f"{message} at t={t_new!r}")
        steps.append(StepRecord(t=t, h=step, error=float(np.max(err)), label=label(t, y) if label else ""))

        if event is not None:
            value = event(t_new, high)
            if prev_event > 0.0 >= value:
                t_evt = _locate_event(event, t, y, k1, t_new, high, k_new)
                spline = CubicHermiteSpline([t, t_new], np.stack([y, high]), np.stack([k1, k_new]), axis=0)
                y_evt = spline(t_evt)
                ts.append(t_evt)
                ys.append(y_evt)
                ds.append(np.asarray(rhs(t_evt, y_evt), dtype=float))
                logger.debug("event at t=%s after %s steps", t_evt, len(steps))
                return IntegrationResult(np.array(ts), np.array(ys), np.array(ds), steps, t_evt, rejected)
            prev_event = value

        if landing and pending:
            pending.pop(0)
        t, y, k1 = t_new, high, k_new
        ts.append(t)
        ys.append(y.copy())
        ds.append(k1.copy())
        grow = _SAFETY * max(ratio, 1e-10) ** -0.2
        h = min(h_max, max(h_min, max(step, h) * min(grow, 5.0)))
    else:
        raise IntegrationError(f"max_steps={max_steps} exhausted at t={t!r}")

    logger.debug("integrated to t=%s with %s accepted and %s rejected steps", t, len(steps), rejected)
    return IntegrationResult(np.array(ts), np.array(ys), np.array(ds), steps, None, rejected)
