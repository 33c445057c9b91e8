import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqzsense.control import (ControlPulse, FilterFunction, PiecewiseAveragedControl,
                              control_fourier, cross_term, design_filter_bank, filter_function,
                              frequency_grid, piecewise_average, resolvable_band)
from sqzsense.errors import DomainError, ValidationError
from sqzsense.schedule import MeasurementSchedule, interval_integrals

pulses = st.one_of(
    st.builds(ControlPulse.constant, st.floats(-3, 3)),
    st.builds(ControlPulse.cosine, st.floats(-3, 3), st.floats(0, 10), st.floats(-math.pi, math.pi)),
)


@st.composite
def schedules(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    gaps = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    t0 = draw(st.floats(-2, 2))
    return MeasurementSchedule(t0 + np.concatenate(([0.0], np.cumsum(gaps))))


class TestPiecewiseAverage:
    def test_constant(self):
        avg = piecewise_average(ControlPulse.constant(1.5), MeasurementSchedule.uniform(6, 0.4))
        np.testing.assert_allclose(avg.areas, 1.5 * 0.4, rtol=1e-15)

    def test_whole_periods_vanish(self):
        w = 2 * np.pi / 0.5
        avg = piecewise_average(ControlPulse.cosine(2.0, w), MeasurementSchedule.uniform(5, 1.0))
        np.testing.assert_allclose(avg.areas, 0.0, atol=1e-14)

    def test_cosine_antiderivative(self):
        A, w, tau = 1.7, 2.3, 0.9
        avg = piecewise_average(ControlPulse.cosine(A, w), MeasurementSchedule.uniform(1, tau))
        assert avg.areas[0] == pytest.approx(A / w * math.sin(w * tau), rel=1e-14)

    def test_table_pulse(self):
        pulse = ControlPulse.table([0.0, 0.5, 2.0], [2.0, -1.0])
        avg = piecewise_average(pulse, MeasurementSchedule(np.array([0.0, 1.0, 2.0])))
        np.testing.assert_allclose(avg.areas, [2 * 0.5 - 0.5, -1.0])

    def test_table_must_cover_window(self):
        pulse = ControlPulse.table([0.0, 1.0], [1.0])
        with pytest.raises(ValidationError):
            piecewise_average(pulse, MeasurementSchedule.uniform(3, 0.5))

    def test_held_constant_on_each_interval(self):
        sched = MeasurementSchedule.uniform(3, 1.0)
        avg = piecewise_average(ControlPulse.cosine(1.0, 0.7), sched)
        for j in range(3):
            t = np.linspace(j, j + 1, 7, endpoint=False)
            assert np.all(avg(t) == avg.areas[j])
        assert avg(-0.1) == 0 and avg(3.0) == 0

    @settings(max_examples=40, deadline=None)
    @given(pulse=pulses, sched=schedules())
    def test_exact_integral_matches_quadrature(self, pulse, sched):
        from scipy.integrate import quad
        avg = piecewise_average(pulse, sched)
        for j in range(min(sched.n, 3)):
            ref = quad(pulse, sched.times[j], sched.times[j + 1], epsabs=1e-13)[0]
            assert avg.areas[j] == pytest.approx(ref, abs=1e-11)


class TestControlFourier:
    def test_zero_control(self):
        avg = PiecewiseAveragedControl(np.array([0.0, 1.0, 3.0]), np.zeros(2))
        assert np.all(control_fourier(avg, np.linspace(0, 10, 50)) == 0)

    def test_zero_frequency_limit(self):
        avg = PiecewiseAveragedControl(np.array([0.0, 2.5]), np.array([0.8]))
        assert control_fourier(avg, 0.0) == pytest.approx(0.8 * 2.5)

    def test_single_interval_modulus(self):
        v, T = 0.8, 2.5
        avg = PiecewiseAveragedControl(np.array([0.0, T]), np.array([v]))
        w = np.linspace(0.01, 20, 400)
        np.testing.assert_allclose(np.abs(control_fourier(avg, w)) ** 2,
                                   v ** 2 * (2 - 2 * np.cos(w * T)) / w ** 2, rtol=1e-10)

    def test_negative_frequency(self):
        avg = PiecewiseAveragedControl(np.array([0.0, 1.0]), np.array([1.0]))
        with pytest.raises(DomainError):
            control_fourier(avg, -1.0)

    def test_matches_direct_sum(self):
        times = np.array([0.0, 0.3, 1.0, 1.2])
        areas = np.array([0.5, -0.2, 0.9])
        avg = PiecewiseAveragedControl(times, areas)
        w = 1.7
        direct = sum(a * (np.exp(1j * w * b) - np.exp(1j * w * s)) / (1j * w)
                     for a, s, b in zip(areas, times[:-1], times[1:]))
        assert control_fourier(avg, w) == pytest.approx(direct, rel=1e-13)


class TestFilterFunction:
    def test_zero_control(self):
        avg = PiecewiseAveragedControl(np.array([0.0, 1.0]), np.array([0.0]))
        assert np.all(filter_function(avg, frequency_grid(10, 100)).values == 0)

    def test_single_interval_at_half_period(self):
        v, T = 0.6, 1.3
        w = np.pi / T
        avg = PiecewiseAveragedControl(np.array([0.0, T]), np.array([v]))
        f = filter_function(avg, np.array([0.0, w]))
        assert f.values[1] == pytest.approx(4 * v ** 2 * T ** 2 / (2 * np.pi * np.pi ** 2), rel=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(pulse=pulses, sched=schedules(), seed=st.integers(0, 2 ** 31))
    def test_nonnegative(self, pulse, sched, seed):
        grid = np.sort(np.random.default_rng(seed).uniform(0, 50, 1000))
        grid = np.unique(grid)
        assert np.all(filter_function(piecewise_average(pulse, sched), grid).values >= 0)

    @settings(max_examples=30, deadline=None)
    @given(pulse=pulses, sched=schedules())
    def test_doubling_amplitude_quadruples(self, pulse, sched):
        grid = frequency_grid(20, 300)
        f1 = filter_function(piecewise_average(pulse, sched), grid).values
        f2 = filter_function(piecewise_average(pulse.scaled(2.0), sched), grid).values
        np.testing.assert_allclose(f2, 4 * f1, rtol=1e-12, atol=1e-14 * max(f1.max(), 1e-300))

    @settings(max_examples=30, deadline=None)
    @given(sched=schedules(), shift=st.floats(-5, 5), seed=st.integers(0, 2 ** 31))
    def test_time_shift_invariant(self, sched, shift, seed):
        areas = np.random.default_rng(seed).standard_normal(sched.n)
        avg = PiecewiseAveragedControl(sched.times, areas)
        grid = frequency_grid(20, 300)
        a = filter_function(avg, grid).values
        b = filter_function(avg.shifted(shift), grid).values
        np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-12 * a.max())

    def test_bad_grid(self):
        avg = PiecewiseAveragedControl(np.array([0.0, 1.0]), np.array([1.0]))
        with pytest.raises(ValidationError):
            filter_function(avg, np.array([0.0, 2.0, 1.0]))

    def test_csv_round_trip(self, tmp_path):
        avg = PiecewiseAveragedControl(np.array([0.0, 1.0, 2.0]), np.array([0.3, -0.1]))
        f = filter_function(avg, frequency_grid(10, 50))
        f.to_csv(tmp_path / "f.csv")
        assert (tmp_path / "f.csv").read_text().startswith("omega,F\n")
        back = FilterFunction.from_csv(tmp_path / "f.csv")
        np.testing.assert_array_equal(back.values, f.values)


class TestCrossTerm:
    @settings(max_examples=60, deadline=None)
    @given(pulse=pulses, n=st.integers(1, 10), steps=st.integers(1, 12), tau=st.floats(0.05, 1.0),
           seed=st.integers(0, 2 ** 31))
    def test_compact_form(self, pulse, n, steps, tau, seed):
        sched = MeasurementSchedule.uniform(n, tau, t0=0.3)
        dt = tau / steps
        noise = np.random.default_rng(seed).standard_normal(n * steps + 1)
        avg = piecewise_average(pulse, sched)
        per_interval = interval_integrals(noise, dt, sched.steps_per_interval(dt))
        lhs = np.sum(avg.areas * per_interval)
        assert cross_term(avg, noise, 0.3, dt) == pytest.approx(lhs, abs=1e-10)


class TestDesignFilterBank:
    def test_single_point_band(self):
        bank = design_filter_bank((1.2, 1.2), 1, MeasurementSchedule.uniform(20, 0.5), 0.3)
        assert len(bank) == 1
        assert bank.pulses[0].kind == "cosine" and bank.pulses[0].frequency == 1.2

    def test_frequencies_increasing(self):
        bank = design_filter_bank((0.5, 4.0), 8, MeasurementSchedule.uniform(40, 0.5), 0.3)
        assert np.all(np.diff(bank.frequencies) > 0)
        assert len(set(bank.frequencies)) == 8

    def test_peaks_within_one_grid_step(self):
        # the mirror lobe at -w_k pulls the peak by O(1/(w_k T^2)); a 30 s
        # window keeps that below one grid step at the low end of the band
        bank = design_filter_bank((0.5, 4.0), 8, MeasurementSchedule.uniform(60, 0.5), 0.3)
        step = bank.filters[0].omega[1] - bank.filters[0].omega[0]
        for f, w in zip(bank.filters, bank.frequencies):
            assert abs(f.peak() - w) <= step * (1 + 1e-9)

    def test_beyond_resolution(self):
        sched = MeasurementSchedule.uniform(40, 1.0)
        assert resolvable_band(sched)[1] == pytest.approx(np.pi)
        with pytest.raises(ValidationError, match="resolvable band"):
            design_filter_bank((0.5, 4.0), 4, sched, 0.3)

    def test_write(self, tmp_path):
        bank = design_filter_bank((0.5, 2.0), 3, MeasurementSchedule.uniform(10, 0.5), 0.3)
        manifest = bank.write(tmp_path)
        assert json.loads((tmp_path / "bank.json").read_text()) == manifest
        for entry in manifest["filters"]:
            assert (tmp_path / entry["path"]).exists()
            assert ControlPulse.from_dict(entry["pulse"]).frequency == entry["design_frequency"]
