import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqzsense.errors import ValidationError
from sqzsense.schedule import MeasurementSchedule, interval_integrals


class TestMeasurementSchedule:
    def test_uniform(self):
        s = MeasurementSchedule.uniform(4, 0.25, t0=1.0)
        assert s.n == 4
        np.testing.assert_allclose(s.times, [1.0, 1.25, 1.5, 1.75, 2.0])
        assert s.window == (1.0, 2.0) and s.duration == pytest.approx(1.0)

    @pytest.mark.parametrize("times", [[0.0], [0.0, 0.0], [0.0, 1.0, 0.5], [0.0, np.inf]])
    def test_invalid(self, times):
        with pytest.raises(ValidationError):
            MeasurementSchedule(np.array(times))

    def test_immutable(self):
        s = MeasurementSchedule.uniform(2, 1.0)
        with pytest.raises(ValueError):
            s.times[0] = 5.0

    def test_steps_per_interval(self):
        s = MeasurementSchedule(np.array([0.0, 0.5, 1.5]))
        np.testing.assert_array_equal(s.steps_per_interval(0.05), [10, 20])
        with pytest.raises(ValidationError):
            s.steps_per_interval(0.3)

    def test_choose_dt(self):
        s = MeasurementSchedule(np.array([0.0, 0.3, 0.75]))
        dt = s.choose_dt(0.04)
        assert dt <= 0.04
        assert dt == pytest.approx(0.0375)
        s.steps_per_interval(dt)

    def test_choose_dt_incommensurate(self):
        s = MeasurementSchedule(np.array([0.0, 1.0, 1.0 + np.sqrt(2)]))
        with pytest.raises(ValidationError):
            s.choose_dt(0.1, max_refine=50)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 50), tau=st.floats(0.01, 5.0), frac=st.floats(0.001, 1.0))
    def test_choose_dt_divides_uniform(self, n, tau, frac):
        s = MeasurementSchedule.uniform(n, tau)
        dt = s.choose_dt(frac * tau)
        assert dt <= frac * tau * (1 + 1e-12)
        assert np.all(s.steps_per_interval(dt) >= 1)


def test_interval_integrals_trapezoid():
    steps = np.array([2, 1])
    samples = np.array([0.0, 1.0, 2.0, 4.0])
    np.testing.assert_allclose(interval_integrals(samples, 0.5, steps), [1.0, 1.5])
    with pytest.raises(ValidationError):
        interval_integrals(samples[:-1], 0.5, steps)
