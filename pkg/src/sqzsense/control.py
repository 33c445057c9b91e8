"""Control pulses, their piecewise average between Zeno measurements, and
the filter functions they induce.

The piecewise-averaged control holds, on each interval ``[t_{j-1}, t_j)``, the
pulse area ``a_j = int_{t_{j-1}}^{t_j} Omega_c dt`` (units rad). With that
reading the cross term of the survival probability is exactly

    sum_j a_j * int_j Omega_n dt  =  int Omega~_c(t) Omega_n(t) dt,

and the filter function is ``F(w) = |Y(w)|^2 / (2 pi)`` with
``Y(w) = int Omega~_c(t) exp(i w t) dt``.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .schedule import MeasurementSchedule

DEFAULT_GRID_POINTS = 2000


@dataclass(frozen=True, eq=False)
class ControlPulse:
    """Control field ``Omega_c(t)`` in rad/s.

    kinds: ``constant`` (amplitude), ``cosine`` (amplitude * cos(frequency*t +
    phase)) and ``table`` (piecewise-constant ``values`` on ``edges``).
    """

    kind: str
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    edges: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "cosine", "table"):
            raise ValidationError(f"unknown pulse kind {self.kind!r}")
        if self.kind == "table":
            edges = np.asarray(self.edges, float)
            values = np.asarray(self.values, float)
            if edges.ndim != 1 or values.shape != (edges.size - 1,) or values.size == 0:
                raise ValidationError("table pulse needs len(edges) == len(values) + 1")
            if np.any(np.diff(edges) <= 0):
                raise ValidationError("table edges must be strictly increasing")
            object.__setattr__(self, "edges", edges)
            object.__setattr__(self, "values", values)
        elif self.kind == "cosine" and self.frequency < 0:
            raise ValidationError("cosine frequency must be >= 0")

    @classmethod
    def constant(cls, amplitude: float) -> "ControlPulse":
        return cls("constant", amplitude=float(amplitude))

    @classmethod
    def cosine(cls, amplitude: float, frequency: float, phase: float = 0.0) -> "ControlPulse":
        return cls("cosine", amplitude=float(amplitude), frequency=float(frequency), phase=float(phase))

    @classmethod
    def table(cls, edges: Sequence[float], values: Sequence[float]) -> "ControlPulse":
        return cls("table", edges=np.asarray(edges, float), values=np.asarray(values, float))

    def scaled(self, factor: float) -> "ControlPulse":
        if self.kind == "table":
            return ControlPulse.table(self.edges, factor * self.values)
        return ControlPulse(self.kind, factor * self.amplitude, self.frequency, self.phase)

    def covers(self, window) -> bool:
        if self.kind != "table":
            return True
        return self.edges[0] <= window[0] and window[1] <= self.edges[-1]

    def __call__(self, t):
        t = np.asarray(t, float)
        if self.kind == "constant":
            return np.full_like(t, self.amplitude)
        if self.kind == "cosine":
            return self.amplitude * np.cos(self.frequency * t + self.phase)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.values.size - 1)
        return self.values[idx]

    def integral(self, a, b):
        """Exact ``int_a^b Omega_c dt`` (vectorized over ``a``, ``b``)."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        if self.kind == "constant":
            return self.amplitude * (b - a)
        if self.kind == "cosine":
            # sin(w b + phi) - sin(w a + phi) in product form, finite as w -> 0
            w, phi = self.frequency, self.phase
            length = b - a
            return (self.amplitude * length * np.cos(0.5 * w * (a + b) + phi)
                    * np.sinc(w * length / (2 * np.pi)))
        # cumulative area at each edge, then linear inside the segment
        cum = np.concatenate(([0.0], np.cumsum(self.values * np.diff(self.edges))))

        def area_to(t):
            t = np.clip(t, self.edges[0], self.edges[-1])
            i = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, self.values.size - 1)
            return cum[i] + self.values[i] * (t - self.edges[i])

        return area_to(b) - area_to(a)

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "edges": self.edges.tolist(), "values": self.values.tolist()}
        out = {"kind": self.kind, "amplitude": self.amplitude}
        if self.kind == "cosine":
            out.update(frequency=self.frequency, phase=self.phase)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ControlPulse":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind == "table":
            return cls.table(data["edges"], data["values"])
        if kind == "constant":
            return cls.constant(data.get("amplitude", 0.0))
        if kind == "cosine":
            return cls.cosine(data["amplitude"], data["frequency"], data.get("phase", 0.0))
        raise ValidationError(f"unknown pulse kind {kind!r}")


@dataclass(frozen=True, eq=False)
class PiecewiseAveragedControl:
    """Pulse area per measurement interval, held constant over that interval."""

    times: np.ndarray
    areas: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, float)
        areas = np.asarray(self.areas, float)
        if areas.shape != (times.size - 1,):
            raise ValidationError("need one area per schedule interval")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "areas", areas)

    @property
    def schedule(self) -> MeasurementSchedule:
        return MeasurementSchedule(self.times)

    def __call__(self, t):
        """``Omega~_c(t)``; zero outside ``[t_0, t_N)``."""
        t = np.asarray(t, float)
        j = np.searchsorted(self.times, t, side="right") - 1
        inside = (j >= 0) & (j < self.areas.size)
        return np.where(inside, self.areas[np.clip(j, 0, self.areas.size - 1)], 0.0)

    def shifted(self, t_shift: float) -> "PiecewiseAveragedControl":
        return PiecewiseAveragedControl(self.times + t_shift, self.areas)

    def control_decay(self) -> float:
        """``sum_j a_j^2``, so that ``P_c ~ exp(-control_decay)`` at second order."""
        return float(np.sum(self.areas ** 2))


def piecewise_average(pulse: ControlPulse, schedule: MeasurementSchedule) -> PiecewiseAveragedControl:
    if not pulse.covers(schedule.window):
        raise ValidationError(
            f"pulse table {pulse.edges[0]}..{pulse.edges[-1]} does not cover window {schedule.window}"
        )
    t = schedule.times
    return PiecewiseAveragedControl(t, pulse.integral(t[:-1], t[1:]))


def control_fourier(avg: PiecewiseAveragedControl, omega):
    """``Y(w) = int Omega~_c(t) exp(i w t) dt`` in closed form.

    Each interval contributes ``a_j (e^{i w t_j} - e^{i w t_{j-1}})/(i w)``,
    written as ``a_j L_j e^{i w m_j} sinc(w L_j / 2)`` (midpoint ``m_j``,
    length ``L_j``) so the ``w -> 0`` limit needs no special case.
    """
    w = np.asarray(omega, float)
    if np.any(w < 0):
        raise DomainError("omega must be >= 0")
    t = avg.times
    mid = 0.5 * (t[1:] + t[:-1])
    length = np.diff(t)
    wf = w.reshape(-1, 1)
    terms = avg.areas * length * np.exp(1j * wf * mid) * np.sinc(wf * length / (2 * np.pi))
    y = terms.sum(axis=1).reshape(w.shape)
    return y if y.ndim else complex(y)


@dataclass(frozen=True, eq=False)
class FilterFunction:
    """Tabulated ``F(w) >= 0`` on a sorted frequency grid."""

    omega: np.ndarray
    values: np.ndarray
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        omega = np.asarray(self.omega, float)
        values = np.asarray(self.values, float)
        if omega.shape != values.shape or omega.ndim != 1:
            raise ValidationError("filter grid and values must be 1-D and equal length")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.omega))

    def peak(self) -> float:
        return float(self.omega[np.argmax(self.values)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["omega", "F"])
            for w, f in zip(self.omega, self.values):
                writer.writerow([f"{w:.17g}", f"{f:.17g}"])

    @classmethod
    def from_csv(cls, path, provenance=None) -> "FilterFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], provenance or {})


def frequency_grid(omega_max: float, n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if not omega_max > 0 or n < 2:
        raise ValidationError("grid needs omega_max > 0 and at least 2 points")
    return np.linspace(0.0, omega_max, n)


def filter_function(avg: PiecewiseAveragedControl, grid, provenance=None) -> FilterFunction:
    grid = np.asarray(grid, float)
    if np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValidationError("frequency grid must be sorted, strictly increasing and >= 0")
    y = control_fourier(avg, grid)
    return FilterFunction(grid, np.abs(y) ** 2 / (2 * np.pi), dict(provenance or {}))


def cross_term(avg: PiecewiseAveragedControl, noise_values, t0: float, dt: float) -> float:
    """``int Omega~_c(t) Omega_n(t) dt`` on the fine grid ``t0 + i*dt``.

    ``Omega~_c`` is constant on every fine step (steps never straddle a
    measurement time), so each step contributes its held area times the
    trapezoid integral of the noise.
    """
    x = np.asarray(noise_values, float)
    n_steps = x.shape[-1] - 1
    step_mid = t0 + dt * (np.arange(n_steps) + 0.5)
    held = avg(step_mid)
    return np.sum(held * 0.5 * dt * (x[..., 1:] + x[..., :-1]), axis=-1)


def resolvable_band(schedule: MeasurementSchedule) -> tuple[float, float]:
    """Frequencies a sample-and-hold control can place a filter peak at."""
    return 0.0, float(np.pi / schedule.intervals.max())


@dataclass(frozen=True, eq=False)
class FilterBank:
    pulses: tuple
    frequencies: np.ndarray
    averages: tuple
    filters: tuple

    def __len__(self):
        return len(self.pulses)

    def write(self, directory, prefix: str = "filter") -> dict:
        """Write ``<prefix>_<k>.csv`` files and a ``bank.json`` manifest."""
        entries = []
        for k, (pulse, filt) in enumerate(zip(self.pulses, self.filters)):
            name = f"{prefix}_{k}.csv"
            filt.to_csv(os.path.join(directory, name))
            entries.append({"k": k, "pulse": pulse.to_dict(),
                            "design_frequency": float(self.frequencies[k]), "path": name})
        manifest = {"filters": entries}
        with open(os.path.join(directory, "bank.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest


def design_filter_bank(
    band: Sequence[float],
    K: int,
    schedule: MeasurementSchedule,
    amplitude: float,
    grid=None,
) -> FilterBank:
    """``K`` cosine pulses with modulation frequencies spread uniformly over ``band``.

    Pulses are phased relative to ``t_0``. Each induced filter peaks near its
    modulation frequency as long as the band stays below ``pi / tau_max``.
    """
    lo, hi = (float(x) for x in band)
    if K < 1:
        raise ValidationError("K must be >= 1")
    if not 0 <= lo <= hi:
        raise ValidationError("band must satisfy 0 <= lo <= hi")
    r_lo, r_hi = resolvable_band(schedule)
    if hi >= r_hi:
        raise ValidationError(
            f"band [{lo}, {hi}] exceeds the schedule resolution; resolvable band is [{r_lo}, {r_hi})"
        )
    freqs = np.array([0.5 * (lo + hi)]) if K == 1 else np.linspace(lo, hi, K)
    t0 = schedule.times[0]
    pulses = tuple(ControlPulse.cosine(amplitude, w, -w * t0) for w in freqs)
    averages = tuple(piecewise_average(p, schedule) for p in pulses)
    if grid is None:
        grid = frequency_grid(max(10 * hi, r_hi))
    filters = tuple(
        filter_function(avg, grid, {"pulse": p.to_dict(), "design_frequency": float(w)})
        for p, avg, w in zip(pulses, averages, freqs)
    )
    return FilterBank(pulses, freqs, averages, filters)
