"""Stationary noise processes with analytically known spectra.

Conventions
-----------
The power spectral density ``S(w)`` is one-sided (``w >= 0``, angular
frequency in rad/s) and is paired with the autocorrelation through the
cosine transform::

    g(tau) = 1/(2 pi) * integral_0^inf S(w) cos(w tau) dw

so that ``g`` is real and even, and ``g(0)`` is the process variance. For an
Ornstein-Uhlenbeck process ``g(tau) = var * exp(-|tau|/tau_c)`` this gives the
Lorentzian ``S(w) = 4 var tau_c / (1 + (w tau_c)^2)``.

All processes are zero mean.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, ValidationError

KINDS = (
    "ornstein-uhlenbeck",
    "random-phase-harmonics",
    "random-telegraph",
    "flat-band",
    "tabulated",
)

# cutoff rule: w_max = max(CUTOFF_TAU_C / tau_c, CUTOFF_FILTER * highest filter frequency)
CUTOFF_TAU_C = 50.0
CUTOFF_FILTER = 10.0


@dataclass(frozen=True)
class SpectralDensitySpec:
    """Parametric description of a one-sided noise PSD.

    Use the named constructors rather than building ``params`` by hand;
    they validate the kind-specific parameters.
    """

    kind: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        _validate(self.kind, self.params)

    # named constructors ---------------------------------------------------

    @classmethod
    def ornstein_uhlenbeck(cls, variance: float, tau_c: float) -> "SpectralDensitySpec":
        return cls("ornstein-uhlenbeck", {"variance": float(variance), "tau_c": float(tau_c)})

    @classmethod
    def random_telegraph(cls, variance: float, tau_c: float) -> "SpectralDensitySpec":
        """Symmetric two-state noise ``+-sqrt(variance)``, switching rate ``1/(2 tau_c)``."""
        return cls("random-telegraph", {"variance": float(variance), "tau_c": float(tau_c)})

    @classmethod
    def harmonics(cls, frequencies: Sequence[float], variances: Sequence[float]) -> "SpectralDensitySpec":
        return cls(
            "random-phase-harmonics",
            {"frequencies": tuple(float(w) for w in frequencies),
             "variances": tuple(float(v) for v in variances)},
        )

    @classmethod
    def flat_band(cls, level: float, band: Sequence[float]) -> "SpectralDensitySpec":
        lo, hi = band
        return cls("flat-band", {"level": float(level), "band": (float(lo), float(hi))})

    @classmethod
    def tabulated(cls, omega: Sequence[float], density: Sequence[float]) -> "SpectralDensitySpec":
        return cls(
            "tabulated",
            {"omega": tuple(float(w) for w in omega), "density": tuple(float(s) for s in density)},
        )

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key, value in self.params.items():
            out[key] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "SpectralDensitySpec":
        data = dict(data)
        try:
            kind = data.pop("kind")
        except KeyError:
            raise ValidationError("noise spec needs a 'kind' key") from None
        params = {}
        for key, value in data.items():
            if isinstance(value, (list, tuple)):
                params[key] = tuple(float(v) for v in value)
            else:
                params[key] = float(value)
        return cls(str(kind), params)

    # derived quantities ---------------------------------------------------

    @property
    def variance(self) -> float:
        """Process variance ``g(0)``."""
        return float(autocorrelation_from_psd(self, 0.0))

    @property
    def tau_c(self) -> float | None:
        return self.params.get("tau_c")

    @property
    def lines(self) -> tuple[np.ndarray, np.ndarray]:
        """Discrete spectral lines ``(w_i, var_i)``; empty for continuous spectra.

        A line of variance ``var_i`` at ``w_i`` contributes
        ``2 pi var_i delta(w - w_i)`` to ``S``.
        """
        if self.kind == "random-phase-harmonics":
            return (np.asarray(self.params["frequencies"], float),
                    np.asarray(self.params["variances"], float))
        return np.empty(0), np.empty(0)

    def highest_frequency(self) -> float:
        """Highest frequency where the spectrum has weight (inf for Lorentzians)."""
        if self.kind in ("ornstein-uhlenbeck", "random-telegraph"):
            return math.inf
        if self.kind == "random-phase-harmonics":
            return float(max(self.params["frequencies"]))
        if self.kind == "flat-band":
            return float(self.params["band"][1])
        return float(self.params["omega"][-1])


def _validate(kind: str, p: Mapping[str, object]) -> None:
    def need(*keys):
        missing = [k for k in keys if k not in p]
        if missing:
            raise ValidationError(f"{kind} spec is missing {missing}")

    if kind in ("ornstein-uhlenbeck", "random-telegraph"):
        need("variance", "tau_c")
        if not (np.isfinite(p["variance"]) and p["variance"] >= 0):
            raise ValidationError("variance must be finite and >= 0")
        if not (np.isfinite(p["tau_c"]) and p["tau_c"] > 0):
            raise ValidationError("tau_c must be finite and > 0")
    elif kind == "random-phase-harmonics":
        need("frequencies", "variances")
        w = np.asarray(p["frequencies"], float)
        v = np.asarray(p["variances"], float)
        if w.shape != v.shape or w.ndim != 1 or w.size == 0:
            raise ValidationError("frequencies and variances must be equal-length, non-empty")
        if np.any(w <= 0) or np.any(v < 0) or not np.all(np.isfinite(w * v)):
            raise ValidationError("line frequencies must be > 0 and variances >= 0")
    elif kind == "flat-band":
        need("level", "band")
        lo, hi = p["band"]
        if not (0 <= lo < hi < math.inf):
            raise ValidationError("flat band needs 0 <= lo < hi < inf")
        if not (np.isfinite(p["level"]) and p["level"] >= 0):
            raise ValidationError("flat-band level must be finite and >= 0")
    elif kind == "tabulated":
        need("omega", "density")
        w = np.asarray(p["omega"], float)
        s = np.asarray(p["density"], float)
        if w.shape != s.shape or w.ndim != 1 or w.size < 2:
            raise ValidationError("tabulated spec needs >= 2 matching (omega, density) pairs")
        if np.any(np.diff(w) <= 0) or w[0] < 0:
            raise ValidationError("tabulated omega must be >= 0 and strictly increasing")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValidationError("tabulated density must be finite and >= 0")


# ---------------------------------------------------------------------------
# spectrum and autocorrelation
# ---------------------------------------------------------------------------

def psd_eval(spec: SpectralDensitySpec, omega):
    """Continuous part of the one-sided PSD ``S(w)``.

    Discrete lines of ``random-phase-harmonics`` are not densities; they are
    exposed through ``spec.lines`` and this function returns 0 for them.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(np.isnan(w)) or np.any(w < 0):
        raise DomainError("S(w) is one-sided: omega must be >= 0")
    p = spec.params
    if spec.kind in ("ornstein-uhlenbeck", "random-telegraph"):
        var, tc = p["variance"], p["tau_c"]
        out = 4.0 * var * tc / (1.0 + (w * tc) ** 2)
    elif spec.kind == "flat-band":
        lo, hi = p["band"]
        out = np.where((w >= lo) & (w <= hi), p["level"], 0.0)
    elif spec.kind == "tabulated":
        out = np.interp(w, p["omega"], p["density"], left=0.0, right=0.0)
    else:
        out = np.zeros_like(w)
    return out if out.ndim else float(out)


def _closed_form_g(spec: SpectralDensitySpec, tau: np.ndarray):
    p = spec.params
    if spec.kind in ("ornstein-uhlenbeck", "random-telegraph"):
        return p["variance"] * np.exp(-np.abs(tau) / p["tau_c"])
    if spec.kind == "random-phase-harmonics":
        w, v = spec.lines
        return np.cos(np.multiply.outer(tau, w)) @ v
    if spec.kind == "flat-band":
        lo, hi = p["band"]
        t = np.abs(tau)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = (np.sin(hi * t) - np.sin(lo * t)) / t
        return p["level"] / (2 * np.pi) * np.where(t == 0, hi - lo, g)
    if spec.kind == "tabulated":
        return _piecewise_linear_cosine(np.asarray(p["omega"]), np.asarray(p["density"]), tau)
    return None


def _piecewise_linear_cosine(w, s, tau):
    """Exact cosine transform of the linear interpolant of ``(w, s)``.

    Integration by parts on each segment, written with ``sinc`` so that
    nothing is divided by ``tau``.
    """
    t = np.abs(np.asarray(tau, float))[..., None]

    def sinc(x):
        return np.sinc(x / np.pi)

    h = np.diff(w)
    mid = 0.5 * (w[1:] + w[:-1])
    slope = np.diff(s) / h
    ends = s[-1] * w[-1] * sinc(w[-1] * t[..., 0]) - s[0] * w[0] * sinc(w[0] * t[..., 0])
    inner = np.sum(slope * h * mid * sinc(mid * t) * sinc(0.5 * h * t), axis=-1)
    return (ends - inner) / (2 * np.pi)


def autocorrelation_from_psd(spec: SpectralDensitySpec, tau):
    """``g(tau)``: closed form where one exists, adaptive quadrature otherwise."""
    t = np.asarray(tau, dtype=float)
    g = _closed_form_g(spec, t)
    if g is None:
        g = autocorrelation_quadrature(spec, t)
    g = np.asarray(g, dtype=float)
    return g if g.ndim else float(g)


def autocorrelation_quadrature(spec: SpectralDensitySpec, tau, epsrel: float = 1e-10):
    """``g(tau)`` by numerical quadrature of the cosine transform of ``S``.

    Independent of the closed forms; used for tabulated spectra and as a
    round-trip check for the others.
    """
    t = np.abs(np.asarray(tau, dtype=float))
    flat = np.array([_quad_g(spec, float(x), epsrel) for x in t.ravel()])
    out = flat.reshape(t.shape)
    return out if out.ndim else float(out)


def _quad_g(spec: SpectralDensitySpec, tau: float, epsrel: float) -> float:
    if spec.kind == "random-phase-harmonics":
        # a sum of delta lines integrates exactly
        w, v = spec.lines
        return float(np.sum(v * np.cos(w * tau)))

    def S(w):
        return psd_eval(spec, w)

    if spec.kind == "flat-band":
        segments = [tuple(spec.params["band"])]
    elif spec.kind == "tabulated":
        w = spec.params["omega"]
        segments = list(zip(w[:-1], w[1:]))
    elif tau == 0.0:
        segments = [(0.0, math.inf)]
    else:
        # finite oscillatory rule over the bulk (whole cosine periods), QAWF on the tail only
        period = 2 * np.pi / tau
        bulk = 100.0 / spec.tau_c
        split = period * math.ceil(bulk / period)
        edges = [0.0, *bulk * 100.0 ** np.arange(math.ceil(math.log(split / bulk, 100)) + 1)]
        edges = [e for e in edges if e < split] + [split]
        segments = list(zip(edges[:-1], edges[1:])) + [(split, math.inf)]

    # absolute floor relative to g(0) so near-empty segments cannot stall the rule
    epsabs = 0.5 * epsrel * 2 * np.pi * spec.variance
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for a, b in segments:
            try:
                if tau == 0.0:
                    val, err = integrate.quad(S, a, b, epsabs=0.0, epsrel=epsrel, limit=500)
                elif math.isinf(b):
                    # Fourier integral on a semi-infinite range (QUADPACK QAWF)
                    val, err = integrate.quad(S, a, b, weight="cos", wvar=tau,
                                              epsabs=epsabs, limlst=200)
                else:
                    val, err = integrate.quad(S, a, b, weight="cos", wvar=tau,
                                              epsabs=epsabs, epsrel=epsrel, limit=500)
            except integrate.IntegrationWarning as exc:
                raise NumericalError(
                    f"quadrature of g(tau={tau!r}) for {spec.kind} did not converge "
                    f"on [{a}, {b}]: {exc}"
                ) from exc
            total += val
    return total / (2 * np.pi)


def cutoff_frequency(spec: SpectralDensitySpec, highest_filter_frequency: float = 0.0) -> float:
    """Frequency cutoff used for synthesis and spectral quadrature."""
    if spec.tau_c is not None:
        base = CUTOFF_TAU_C / spec.tau_c
    else:
        base = 1.5 * spec.highest_frequency()
    return max(base, CUTOFF_FILTER * highest_filter_frequency)


def max_dt(spec: SpectralDensitySpec) -> float:
    """Largest time step accepted by ``sample_trajectory`` for this spectrum."""
    if spec.tau_c is not None:
        return spec.tau_c / 10.0
    return 2 * np.pi / spec.highest_frequency() / 20.0


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NoiseTrajectory:
    """One realization of the noise field on a uniform grid ``t0 + i*dt``."""

    t0: float
    dt: float
    values: np.ndarray
    seed: int | None = None
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.values.size - 1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "omega_n"])
            for t, v in zip(self.times, self.values):
                writer.writerow([f"{t:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path, seed: int | None = None) -> "NoiseTrajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, v = data[:, 0], data[:, 1]
        dt = float(t[1] - t[0]) if t.size > 1 else 1.0
        return cls(float(t[0]), dt, v, seed)


def _n_samples(window, dt: float) -> int:
    t0, t1 = window
    if not t1 > t0:
        raise ValidationError("window must satisfy t_0 < t_N")
    n_steps = (t1 - t0) / dt
    steps = int(round(n_steps))
    if abs(n_steps - steps) > 1e-9 * max(n_steps, 1.0):
        raise ValidationError(f"dt={dt!r} does not divide the window length {t1 - t0!r}")
    return steps + 1


def sample_trajectory(
    spec: SpectralDensitySpec,
    window: Sequence[float],
    dt: float,
    seed: int,
    method: str = "auto",
    omega_max: float | None = None,
    comb_factor: int = 4,
) -> NoiseTrajectory:
    """Draw one zero-mean stationary realization of ``spec`` over ``window``.

    Parameters
    ----------
    window : (t0, tN)
        Sensing window; ``dt`` must divide its length.
    dt : float
        Grid step. Must resolve the spectrum (``tau_c/10`` for Lorentzians,
        ``period/20`` for the highest frequency otherwise).
    seed : int
        The trajectory is a pure function of ``(spec, window, dt, seed,
        method, omega_max)``.
    method : {"auto", "spectral", "ou-exact", "telegraph", "harmonic"}
        ``auto`` picks ``telegraph`` for random-telegraph specs, ``harmonic``
        for line spectra and the Gaussian spectral comb otherwise.
    omega_max : float, optional
        Synthesis cutoff for the spectral method; defaults to
        :func:`cutoff_frequency`. Frequencies above Nyquist are dropped.
    comb_factor : int
        The spectral comb repeats after ``comb_factor`` times the window
        length (at least), which keeps the synthetic covariance stationary
        across the whole window.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    limit = max_dt(spec)
    if dt > limit * (1 + 1e-12):
        raise ValidationError(f"dt={dt!r} is too coarse for this spectrum (max {limit!r})")
    n = _n_samples(window, dt)
    t0 = float(window[0])

    if method == "auto":
        method = {"random-telegraph": "telegraph",
                  "random-phase-harmonics": "harmonic"}.get(spec.kind, "spectral")

    rng = np.random.default_rng(seed)
    meta: dict = {"method": method}
    if method == "spectral":
        if spec.kind == "random-phase-harmonics":
            raise ValidationError("line spectra need method='harmonic'")
        w_cut = cutoff_frequency(spec) if omega_max is None else float(omega_max)
        w_cut = min(w_cut, np.pi / dt)
        values, d_omega = _spectral_synthesis(spec, n, dt, w_cut, comb_factor, rng)
        meta.update(omega_max=w_cut, d_omega=d_omega)
    elif method == "ou-exact":
        if spec.kind != "ornstein-uhlenbeck":
            raise ValidationError("ou-exact only applies to Ornstein-Uhlenbeck specs")
        values = _ou_exact(spec.params["variance"], spec.params["tau_c"], n, dt, rng)
    elif method == "telegraph":
        if spec.kind != "random-telegraph":
            raise ValidationError("telegraph method only applies to random-telegraph specs")
        values = _telegraph(spec.params["variance"], spec.params["tau_c"], n, dt, rng)
    elif method == "harmonic":
        if spec.kind != "random-phase-harmonics":
            raise ValidationError("harmonic method only applies to line spectra")
        w, v = spec.lines
        phases = rng.uniform(0.0, 2 * np.pi, size=w.size)
        t = t0 + dt * np.arange(n)
        values = np.cos(np.outer(t, w) + phases) @ np.sqrt(2 * v)
    else:
        raise ValidationError(f"unknown synthesis method {method!r}")
    return NoiseTrajectory(t0, dt, values, seed, meta)


def _spectral_synthesis(spec, n, dt, w_cut, comb_factor, rng):
    """Sum of random-phase cosines on the comb ``w_i = (i + 1/2) dw``.

    Each component has amplitude ``sqrt(S(w_i) dw / pi)`` so its variance is
    ``S(w_i) dw / (2 pi)``, matching the cosine-transform convention. The sum
    is evaluated with one inverse FFT of length ``L`` (``dw = 2 pi/(L dt)``).
    """
    length = 1 << int(np.ceil(np.log2(max(comb_factor * n, 16))))
    d_omega = 2 * np.pi / (length * dt)
    n_comp = min(int(np.floor(w_cut / d_omega - 0.5)) + 1, length // 2)
    omega = (np.arange(n_comp) + 0.5) * d_omega
    amp = np.sqrt(psd_eval(spec, omega) * d_omega / np.pi)
    phases = rng.uniform(0.0, 2 * np.pi, size=n_comp)
    coeff = np.zeros(length, dtype=complex)
    coeff[:n_comp] = amp * np.exp(1j * phases)
    # sum_i c_i exp(i w_i n dt) = exp(i pi n / L) * L * ifft(c)[n]
    idx = np.arange(n)
    series = length * np.fft.ifft(coeff)[:n] * np.exp(1j * np.pi * idx / length)
    return series.real.copy(), d_omega


def _ou_exact(var, tau_c, n, dt, rng):
    # exact Gaussian update x' = x e^{-dt/tau_c} + sqrt(var (1 - e^{-2 dt/tau_c})) xi
    decay = math.exp(-dt / tau_c)
    kick = math.sqrt(var * (1.0 - decay * decay))
    xi = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = math.sqrt(var) * xi[0]
    for i in range(1, n):
        out[i] = out[i - 1] * decay + kick * xi[i]
    return out


def _telegraph(var, tau_c, n, dt, rng):
    # symmetric two-state process; correlation exp(-2 rate |tau|) = exp(-|tau|/tau_c)
    rate = 1.0 / (2.0 * tau_c)
    t_end = (n - 1) * dt
    level = math.sqrt(var) * (1.0 if rng.random() < 0.5 else -1.0)
    switches = []
    t = rng.exponential(1.0 / rate)
    while t <= t_end:
        switches.append(t)
        t += rng.exponential(1.0 / rate)
    grid = dt * np.arange(n)
    flips = np.searchsorted(np.asarray(switches), grid, side="right")
    return level * np.where(flips % 2 == 0, 1.0, -1.0)


def empirical_autocorrelation(trajectories: np.ndarray, max_lag: int) -> np.ndarray:
    """Ensemble autocorrelation ``<x(0) x(lag dt)>`` averaged over start times."""
    x = np.asarray(trajectories, float)
    n = x.shape[-1]
    return np.array([np.mean(x[..., : n - lag] * x[..., lag:]) for lag in range(max_lag + 1)])
