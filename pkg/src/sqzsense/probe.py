"""Two-level probe under ``H(t) = delta*sz + (Omega_c(t) + Omega_n(t))*sx``
interrupted by projective measurements onto ``|0>``.

Every measurement keeps only the ``|0>`` outcome, which resets the state, so
the survival probability after ``N`` measurements is ``P = prod_j q_j`` with
``q_j = |<0|U_j|0>|^2``, evaluated as ``1 - |<1|U_j|0>|^2`` so that the small
transition probability keeps full relative precision.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .control import ControlPulse
from .errors import DomainError, ValidationError
from .noise import NoiseTrajectory
from .schedule import MeasurementSchedule

MODES = ("exact", "second-order")


@dataclass(frozen=True)
class ProbeConfig:
    delta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta):
            raise ValidationError("delta must be finite")


@dataclass(frozen=True, eq=False)
class SurvivalResult:
    q: np.ndarray
    mode: str
    valid: bool = True
    seed: int | None = None
    schedule: MeasurementSchedule | None = None

    @property
    def P(self) -> float:
        return float(np.prod(self.q))

    def to_json(self) -> str:
        record = {
            "schedule": None if self.schedule is None else self.schedule.to_dict(),
            "mode": self.mode,
            "q": [float(x) for x in self.q],
            "P": self.P,
            "valid": bool(self.valid),
            "seed": self.seed,
        }
        return json.dumps(record, indent=2)


# ---------------------------------------------------------------------------
# exact propagation
# ---------------------------------------------------------------------------

_GAUSS = np.sqrt(3.0) / 6.0  # Gauss-Legendre nodes sit at 1/2 -+ _GAUSS of a step


def step_propagators(delta: float, field, dt: float, skew=None) -> np.ndarray:
    """``exp(-i dt (field*sx + skew*sy + delta*sz))`` for every entry of ``field``.

    Axis-angle form: rotation angle ``dt*|h|`` with ``h = (field, skew, delta)``,
    ``U = cos(th) I - i sin(th) (n . sigma)``. ``skew`` defaults to zero.
    Returns shape ``field.shape + (2, 2)``.
    """
    field = np.asarray(field, float)
    skew = np.zeros_like(field) if skew is None else np.broadcast_to(np.asarray(skew, float), field.shape)
    norm = np.sqrt(field ** 2 + skew ** 2 + delta ** 2)
    theta = norm * dt
    cos = np.cos(theta)
    # sin(th)/|h| * dt, finite at |h| = 0
    sinc = dt * np.sinc(theta / np.pi)
    nx = sinc * field
    ny = sinc * skew
    nz = sinc * delta
    U = np.empty(field.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = cos - 1j * nz
    U[..., 0, 1] = -ny - 1j * nx
    U[..., 1, 0] = ny - 1j * nx
    U[..., 1, 1] = cos + 1j * nz
    return U


def ordered_product(U: np.ndarray) -> np.ndarray:
    """Time-ordered product ``U[..., n-1, :, :] @ ... @ U[..., 0, :, :]``.

    Pairwise tree reduction along the step axis (axis -3), vectorized over
    all leading axes.
    """
    U = np.asarray(U)
    while U.shape[-3] > 1:
        if U.shape[-3] % 2:
            eye = np.broadcast_to(np.eye(2, dtype=U.dtype), U.shape[:-3] + (1, 2, 2))
            U = np.concatenate((U, eye), axis=-3)
        U = U[..., 1::2, :, :] @ U[..., 0::2, :, :]
    return U[..., 0, :, :]


def sample_step_fields(samples) -> tuple[np.ndarray, np.ndarray]:
    """Step mean and Gauss-node difference of the linear interpolant of ``samples``.

    The mean is the endpoint average, so ``sum(mean * dt)`` is the trapezoid
    integral of the samples.
    """
    samples = np.asarray(samples, float)
    return (0.5 * (samples[..., 1:] + samples[..., :-1]),
            (samples[..., 1:] - samples[..., :-1]) * (2 * _GAUSS))


def pulse_step_fields(pulse: ControlPulse, t0: float, dt: float, n_steps: int):
    """Exact step mean and Gauss-node difference of a control pulse."""
    left = t0 + dt * np.arange(n_steps)
    mean = pulse.integral(left, left + dt) / dt
    diff = pulse(left + (0.5 + _GAUSS) * dt) - pulse(left + (0.5 - _GAUSS) * dt)
    return mean, diff


def _magnus_propagators(delta: float, mean, diff, dt: float) -> np.ndarray:
    # fourth-order Magnus step: the commutator of the two Gauss-node
    # Hamiltonians adds a sy component proportional to delta * field change
    return step_propagators(delta, mean, dt, -_GAUSS * dt * delta * diff)


def _check_interval(n_samples: int, interval, dt: float) -> None:
    t_a, t_b = interval
    if not dt > 0:
        raise ValidationError("dt must be positive")
    expected = (t_b - t_a) / dt
    if n_samples < 2 or abs(expected - (n_samples - 1)) > 1e-9 * max(expected, 1.0):
        raise ValidationError(
            f"{n_samples} samples with dt={dt!r} do not span interval {tuple(interval)!r}"
        )


def _interval_fields(control, noise, interval, dt: float):
    noise = np.asarray(noise, float)
    if noise.ndim != 1:
        raise ValidationError("noise samples must be 1-D")
    _check_interval(noise.size, interval, dt)
    mean, diff = sample_step_fields(noise)
    if isinstance(control, ControlPulse):
        c_mean, c_diff = pulse_step_fields(control, float(interval[0]), dt, noise.size - 1)
    else:
        control = np.asarray(control, float)
        if control.shape != noise.shape:
            raise ValidationError("control and noise samples must be 1-D and equal length")
        c_mean, c_diff = sample_step_fields(control)
    return mean + c_mean, diff + c_diff


def propagate_exact(config: ProbeConfig, control, noise, interval, dt: float) -> np.ndarray:
    """Propagator over one interval.

    ``noise`` holds samples on the interval grid (endpoints included) and is
    taken as their linear interpolant; ``control`` is either samples on the
    same grid or a :class:`ControlPulse`, integrated exactly per step.
    """
    mean, diff = _interval_fields(control, noise, interval, dt)
    return ordered_product(_magnus_propagators(config.delta, mean, diff, dt))


def survival_factor_second_order(control, noise, interval, dt: float) -> float:
    """``q_j = 1 - (int (Omega_c + Omega_n) dt)^2``.

    Sampled fields are integrated with the trapezoid rule, pulses exactly.
    May be negative for strong fields; callers decide how to flag it.
    """
    mean, _ = _interval_fields(control, noise, interval, dt)
    area = float(np.sum(mean) * dt)
    return 1.0 - area * area


def survival_factors(config: ProbeConfig, schedule: MeasurementSchedule, fields, dt: float,
                     mode: str = "exact", control: ControlPulse | None = None) -> np.ndarray:
    """Per-interval ``q_j`` for field samples of shape ``(..., n_grid)``.

    ``fields`` are samples on the uniform grid starting at ``t_0``; an
    optional ``control`` pulse is added with exact step integrals. Batched
    core used by :func:`run_zeno_sequence` and the campaign runner.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    fields = np.asarray(fields, float)
    steps = schedule.steps_per_interval(dt)
    n_total = int(steps.sum())
    if fields.shape[-1] != n_total + 1:
        raise ValidationError(f"field grid has {fields.shape[-1]} points, schedule needs {n_total + 1}")
    mean, diff = sample_step_fields(fields)
    if control is not None:
        c_mean, c_diff = pulse_step_fields(control, float(schedule.times[0]), dt, n_total)
        mean, diff = mean + c_mean, diff + c_diff
    starts = np.concatenate(([0], np.cumsum(steps)))
    if mode == "second-order":
        areas = np.add.reduceat(mean, starts[:-1], axis=-1) * dt
        return 1.0 - areas ** 2
    lead = mean.shape[:-1]
    if np.all(steps == steps[0]):
        shape = lead + (schedule.n, int(steps[0]))
        U = ordered_product(_magnus_propagators(config.delta, mean.reshape(shape),
                                                diff.reshape(shape), dt))
        return 1.0 - np.abs(U[..., 1, 0]) ** 2
    q = np.empty(lead + (schedule.n,))
    for j in range(schedule.n):
        seg = slice(starts[j], starts[j + 1])
        U = ordered_product(_magnus_propagators(config.delta, mean[..., seg], diff[..., seg], dt))
        q[..., j] = 1.0 - np.abs(U[..., 1, 0]) ** 2
    return q


def run_zeno_sequence(config: ProbeConfig, schedule: MeasurementSchedule,
                      trajectory: NoiseTrajectory | None, control=None,
                      mode: str = "exact", dt: float | None = None) -> SurvivalResult:
    """Survival through the full measurement sequence.

    ``trajectory`` may be None for a noise-free run, in which case ``dt``
    must be given. ``control`` is a :class:`ControlPulse`, samples on the
    trajectory grid, or None.
    """
    if trajectory is None:
        if dt is None:
            raise ValidationError("a noise-free run needs an explicit dt")
        n = int(schedule.steps_per_interval(dt).sum()) + 1
        noise = np.zeros(n)
        seed = None
    else:
        dt = trajectory.dt
        t0 = trajectory.t0
        seed = trajectory.seed
        if abs(t0 - schedule.times[0]) > 1e-9 * max(1.0, abs(t0)) or \
                trajectory.t_end < schedule.times[-1] - 1e-9 * max(1.0, abs(schedule.times[-1])):
            raise ValidationError("trajectory does not cover the schedule window")
        n = int(schedule.steps_per_interval(dt).sum()) + 1
        noise = trajectory.values[:n]
    pulse = control if isinstance(control, ControlPulse) else None
    if control is not None and pulse is None:
        samples = np.asarray(control, float)
        if samples.shape != noise.shape:
            raise ValidationError("control samples must live on the trajectory grid")
        noise = noise + samples
    q = survival_factors(config, schedule, noise, dt, mode, pulse)
    valid = bool(np.all(q >= 0)) if mode == "second-order" else True
    return SurvivalResult(q, mode, valid, seed, schedule)


# ---------------------------------------------------------------------------
# readout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalogReadout:
    """Final measurement returning ``P`` plus Gaussian noise, clamped to [0, 1]."""

    sigma: float = 0.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValidationError("sigma_meas must be >= 0")

    def to_dict(self):
        return {"model": "analog", "sigma": self.sigma}


@dataclass(frozen=True)
class BinaryReadout:
    """Final measurement with 0/1 outcomes; returns the success fraction."""

    n_shots: int = 1

    def __post_init__(self):
        if int(self.n_shots) != self.n_shots or self.n_shots < 1:
            raise ValidationError("n_shots must be an integer >= 1")

    def to_dict(self):
        return {"model": "binary", "n_shots": int(self.n_shots)}


def readout_from_dict(data) -> AnalogReadout | BinaryReadout:
    data = dict(data)
    model = data.pop("model", "analog")
    if model == "analog":
        return AnalogReadout(float(data.get("sigma", 0.0)))
    if model == "binary":
        return BinaryReadout(int(data.get("n_shots", 1)))
    raise ValidationError(f"unknown readout model {model!r}")


def readout(P, model, seed=None):
    """Measured value of the survival probability ``P``.

    ``seed`` may be an int or a ``numpy.random.Generator``; readout never
    touches global random state.
    """
    P_arr = np.asarray(P, float)
    if np.any(~np.isfinite(P_arr)) or np.any(P_arr < 0) or np.any(P_arr > 1):
        raise DomainError("P must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(model, AnalogReadout):
        if model.sigma == 0:
            out = P_arr.copy()
        else:
            out = np.clip(P_arr + rng.normal(0.0, model.sigma, size=P_arr.shape), 0.0, 1.0)
    elif isinstance(model, BinaryReadout):
        out = np.asarray(rng.binomial(int(model.n_shots), P_arr) / model.n_shots)
    else:
        raise ValidationError(f"unknown readout model {model!r}")
    return out if out.ndim else float(out)
