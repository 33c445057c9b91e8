"""Zeno measurement schedules and helpers for the fine simulation grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# relative tolerance used when checking that dt divides an interval
_GRID_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class MeasurementSchedule:
    """Measurement times ``t_0 < t_1 < ... < t_N``.

    The probe is projected back onto ``|0>`` at every ``t_j`` with
    ``j >= 1``; ``t_0`` only marks the start of the sensing window.
    """

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValidationError("a schedule needs at least t_0 and t_1 (N >= 1)")
        if not np.all(np.isfinite(times)):
            raise ValidationError("schedule times must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("schedule times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, n: int, tau: float, t0: float = 0.0) -> "MeasurementSchedule":
        if n < 1:
            raise ValidationError("N must be >= 1")
        if not tau > 0:
            raise ValidationError("interval length tau must be positive")
        return cls(t0 + tau * np.arange(n + 1))

    @property
    def n(self) -> int:
        return self.times.size - 1

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def window(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def shifted(self, t_shift: float) -> "MeasurementSchedule":
        return MeasurementSchedule(self.times + t_shift)

    def steps_per_interval(self, dt: float) -> np.ndarray:
        """Integer number of ``dt`` steps in each interval.

        Raises ValidationError if ``dt`` does not divide every interval.
        """
        if not dt > 0:
            raise ValidationError("dt must be positive")
        ratio = self.intervals / dt
        steps = np.rint(ratio).astype(int)
        if np.any(steps < 1) or np.any(np.abs(ratio - steps) > _GRID_RTOL * np.maximum(ratio, 1.0)):
            raise ValidationError(
                f"dt={dt!r} does not divide every inter-measurement interval "
                f"(interval/dt = {ratio.tolist()[:5]}...)"
            )
        return steps

    def choose_dt(self, dt_max: float, max_refine: int = 10_000) -> float:
        """Largest dt <= dt_max that divides every interval exactly."""
        if not dt_max > 0:
            raise ValidationError("dt_max must be positive")
        tau_min = float(self.intervals.min())
        n0 = max(1, int(np.ceil(tau_min / dt_max - _GRID_RTOL)))
        for n in range(n0, n0 + max_refine):
            dt = tau_min / n
            try:
                self.steps_per_interval(dt)
            except ValidationError:
                continue
            return dt
        raise ValidationError(
            "no common step divides all schedule intervals; use commensurate intervals"
        )

    def to_dict(self) -> dict:
        return {"times": [float(t) for t in self.times]}


def interval_integrals(samples: np.ndarray, dt: float, steps: np.ndarray) -> np.ndarray:
    """Trapezoid integral of ``samples`` over each schedule interval.

    ``samples`` has shape ``(..., 1 + steps.sum())`` on a uniform grid that
    starts at ``t_0``. Returns shape ``(..., len(steps))``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != int(steps.sum()) + 1:
        raise ValidationError(
            f"sample grid has {samples.shape[-1]} points, schedule needs {int(steps.sum()) + 1}"
        )
    # per-step trapezoid areas, then sum the steps belonging to each interval
    step_areas = 0.5 * dt * (samples[..., 1:] + samples[..., :-1])
    starts = np.concatenate(([0], np.cumsum(steps)[:-1]))
    return np.add.reduceat(step_areas, starts, axis=-1)
