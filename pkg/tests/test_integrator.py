import numpy as np
import pytest

from openbook.errors import IntegrationError
from openbook.integrator import cash_karp


class TestCashKarp:
    def test_exponential_decay(self):
        """Inputs: y' = -y, y(0) = 1, integrated to t = 5 with rtol = atol = 1e-12.
        Expected: y(5) = exp(-5) to 1e-10.
        Checks: Accuracy of the 5th-order solution under tight tolerances.
        """
        res = cash_karp(lambda t, y: -y, 0.0, [1.0], 5.0, atol=1e-12, rtol=1e-12)
        assert res.t[-1] == 5.0
        assert res.y[-1, 0] == pytest.approx(np.exp(-5.0), abs=1e-10)
        assert res.event_time is None

    def test_lands_on_nodes(self):
        """Inputs: Harmonic oscillator with nodes at 0.1, 0.2, ..., 1.0.
        Expected: Every node appears in res.t bit-exactly and the state matches (cos t, -sin t).
        Checks: Node landing.
        """
        nodes = [0.1 * k for k in range(1, 11)]
        res = cash_karp(lambda t, y: np.array([y[1], -y[0]]), 0.0, [1.0, 0.0], 1.0, nodes=nodes, atol=1e-12, rtol=1e-12)
        for node in nodes:
            i = int(np.flatnonzero(res.t == node)[0])
            np.testing.assert_allclose(res.y[i], [np.cos(node), -np.sin(node)], atol=1e-10)

    def test_terminal_event(self):
        """Inputs: y' = -1, y(0) = 1, event y = 0.
        Expected: Integration stops at t = 1 with y = 0.
        Checks: Event location on the Hermite interpolant.
        """
        res = cash_karp(lambda t, y: np.array([-1.0]), 0.0, [1.0], 10.0, event=lambda t, y: y[0], h0=0.3)
        assert res.event_time == pytest.approx(1.0, abs=1e-12)
        assert res.t[-1] == res.event_time
        assert res.y[-1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_labels_are_recorded(self):
        """Inputs: y' = -1 from y = 1 with label "upper" while y > 0.5.
        Expected: Both labels occur and each step's label matches its start state.
        Checks: Step records.
        """
        res = cash_karp(
            lambda t, y: np.array([-1.0]), 0.0, [1.0], 0.9, h0=0.15, h_max=0.15,
            label=lambda t, y: "upper" if y[0] > 0.5 else "lower",
        )
        labels = {step.label for step in res.steps}
        assert labels == {"upper", "lower"}
        for step in res.steps:
            assert step.label == ("upper" if 1.0 - step.t > 0.5 else "lower")

    def test_dense_output(self):
        """Inputs: y' = cos t with dense output.
        Expected: The interpolant matches sin t between steps to 1e-6.
        Checks: Cubic Hermite dense output.
        """
        res = cash_karp(lambda t, y: np.array([np.cos(t)]), 0.0, [0.0], 3.0, h_max=0.05)
        t = np.linspace(0.0, 3.0, 301)
        np.testing.assert_allclose(res.dense()(t)[:, 0], np.sin(t), atol=1e-6)

    def test_guard_violation(self):
        """Inputs: y' = 1 from y = 0 with a guard rejecting y > 0.5.
        Expected: IntegrationError naming the guard message.
        Checks: Guards on accepted states.
        """
        with pytest.raises(IntegrationError, match="state left"):
            cash_karp(
                lambda t, y: np.array([1.0]), 0.0, [0.0], 1.0, h_max=0.1,
                guard=lambda t, y: "state left [0, 0.5]" if y[0] > 0.5 else None,
            )

    def test_step_underflow(self):
        """Inputs: A right-hand side returning NaN.
        Expected: IntegrationError reporting the step underflow with t and h.
        Checks: Diagnostics on failure.
        """
        with pytest.raises(IntegrationError, match="step underflow at t=0.0"):
            cash_karp(lambda t, y: np.array([np.nan]), 0.0, [1.0], 1.0)

    def test_empty_interval(self):
        """Inputs: t_end == t0.
        Expected: IntegrationError.
        Checks: Precondition t_end > t0.
        """
        with pytest.raises(IntegrationError):
            cash_karp(lambda t, y: y, 1.0, [1.0], 1.0)
