"""Decoherence-function estimates from repeated survival measurements.

Two readout pathways are supported:

* analog: every repetition yields the real value of ``P``, so
  ``chi = 1/4 <ln^2(P/P_c)>`` per filter;
* binary: only the shot-averaged ``<P>`` is available, so
  ``chi = 1/2 ln <P/P_c>``.

The spectral prediction is ``chi = int_0^inf S(w) F(w) dw``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .control import FilterFunction
from .errors import EstimationError, ValidationError
from .noise import SpectralDensitySpec, psd_eval

DEFAULT_MAX_REJECT = 0.10
DEFAULT_BOOTSTRAP = 1000


@dataclass(frozen=True)
class CampaignRecord:
    """One repetition ``m`` of the Zeno sequence with filter ``k``."""

    k: int
    m: int
    P: float
    Pc: float
    seed: int | None = None
    valid: bool = True

    @property
    def ratio(self) -> float:
        if self.Pc <= 0:
            return float("nan")
        return self.P / self.Pc


@dataclass(frozen=True)
class ChiEstimate:
    mean: float
    std: float
    M: int
    estimator: str
    order: int = 2
    k: int | None = None
    n_rejected: int = 0

    @property
    def stderr(self) -> float:
        return self.std / np.sqrt(self.M)

    def to_dict(self) -> dict:
        return {"k": self.k, "chi_mean": self.mean, "chi_std": self.std,
                "estimator": self.estimator, "M": self.M}


def _ratios(records) -> tuple[np.ndarray, int | None]:
    records = list(records) if not isinstance(records, np.ndarray) else records
    if isinstance(records, np.ndarray):
        return np.asarray(records, float), None
    if records and not isinstance(records[0], CampaignRecord):
        return np.asarray(records, float), None
    ratios = np.array([r.ratio if r.valid else np.nan for r in records], float)
    ks = {r.k for r in records}
    return ratios, (ks.pop() if len(ks) == 1 else None)


def _accepted(ratios: np.ndarray, max_reject: float) -> tuple[np.ndarray, int]:
    ok = np.isfinite(ratios) & (ratios > 0)
    n_bad = int(np.count_nonzero(~ok))
    if ratios.size == 0:
        raise EstimationError("no records to estimate from")
    if n_bad > max_reject * ratios.size:
        raise EstimationError(
            f"{n_bad} of {ratios.size} records have a non-positive or invalid ratio "
            f"(limit {max_reject:.0%}); the weak-noise or second-order regime is violated"
        )
    return ratios[ok], n_bad


def chik_analog(k_order: int, records, prefactor: float = 0.25,
                max_reject: float = DEFAULT_MAX_REJECT) -> ChiEstimate:
    """``chi_{k,m} = prefactor * ln^k_order(P/P_c)``, mean and sample std.

    ``records`` is a sequence of :class:`CampaignRecord` or a plain array of
    ratios ``P/P_c``. Non-positive ratios are rejected and counted.
    """
    if int(k_order) != k_order or k_order < 1:
        raise ValidationError("k_order must be a positive integer")
    ratios, k = _ratios(records)
    good, n_bad = _accepted(ratios, max_reject)
    chi = prefactor * np.log(good) ** int(k_order)
    M = chi.size
    std = float(np.std(chi, ddof=1)) if M >= 2 else float("nan")
    return ChiEstimate(float(np.mean(chi)), std, M, "analog-log", int(k_order), k, n_bad)


def chi2_analog(records, max_reject: float = DEFAULT_MAX_REJECT) -> ChiEstimate:
    return chik_analog(2, records, 0.25, max_reject)


def chi2_binary(shot_fractions, P_c: float, n_boot: int = DEFAULT_BOOTSTRAP,
                seed: int | None = 0, k: int | None = None) -> ChiEstimate:
    """``chi = 1/2 ln(mean(P_m / P_c))`` with a bootstrap spread.

    The reported ``std`` is scaled so that ``std/sqrt(M)`` equals the
    bootstrap standard error of ``chi``, matching the analog convention.
    """
    f = np.asarray(shot_fractions, float)
    if f.size == 0:
        raise EstimationError("no shot fractions")
    if np.any(f < 0) or np.any(f > 1):
        raise ValidationError("shot fractions must lie in [0, 1]")
    if not P_c > 0:
        raise ValidationError("P_c must be > 0")
    mean_ratio = f.mean() / P_c
    with np.errstate(divide="ignore"):
        chi = 0.5 * np.log(mean_ratio)
    if not np.isfinite(chi):
        raise EstimationError(f"mean ratio {mean_ratio!r} has no finite logarithm")
    M = f.size
    if M < 2:
        return ChiEstimate(float(chi), float("nan"), M, "binary-average", 2, k)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, M, size=(n_boot, M))
    with np.errstate(divide="ignore"):
        boot = 0.5 * np.log(f[idx].mean(axis=1) / P_c)
    boot = boot[np.isfinite(boot)]
    std = float(np.std(boot, ddof=1) * np.sqrt(M))
    return ChiEstimate(float(chi), std, M, "binary-average", 2, k)


class CoarseGridWarning(UserWarning):
    pass


def predicted_chi2(spec: SpectralDensitySpec, filt: FilterFunction,
                   max_jump: float = 0.2, tail_fraction: float = 1e-3) -> float:
    """``int S(w) F(w) dw`` by the trapezoid rule on the filter grid.

    Discrete lines (``random-phase-harmonics``) add ``2 pi var_i F(w_i)``.
    Raises ValidationError if the integrand jumps by more than ``max_jump``
    (relative) between neighbouring points near its peak; warns if the top
    tenth of the grid range carries more than ``tail_fraction`` of the result.
    """
    w = filt.omega
    integrand = psd_eval(spec, w) * filt.values
    chi = float(np.trapezoid(integrand, w))
    line_w, line_v = spec.lines
    if line_w.size:
        if np.any(line_w > w[-1]):
            raise ValidationError("a spectral line lies beyond the filter grid")
        chi += float(np.sum(2 * np.pi * line_v * np.interp(line_w, w, filt.values)))
    peak = integrand.max() if integrand.size else 0.0
    if peak > 0:
        near = integrand >= 0.5 * peak
        hot = near[1:] | near[:-1]
        jumps = np.abs(np.diff(integrand))[hot] / peak
        if jumps.size and jumps.max() > max_jump:
            raise ValidationError(
                f"frequency grid too coarse: integrand changes by {jumps.max():.0%} "
                "between adjacent points near its peak"
            )
        # top tenth of the grid range
        tail = w >= w[0] + 0.9 * (w[-1] - w[0])
        tail_val = float(np.trapezoid(integrand[tail], w[tail]))
        if chi > 0 and tail_val > tail_fraction * chi:
            warnings.warn(
                f"top tenth of the grid carries {tail_val / chi:.2%} of chi; raise omega_max",
                CoarseGridWarning, stacklevel=2,
            )
    return chi


@dataclass(frozen=True, eq=False)
class ErgodicityStats:
    mean: float
    variance: float
    chi: float
    predicted_variance: float
    predicted_offset: float
    variance_deviation: float
    offset_deviation: float
    ergodic_limit: bool
    hist_edges: np.ndarray = field(repr=False)
    hist_counts: np.ndarray = field(repr=False)
    M: int = 0

    def to_dict(self) -> dict:
        return {
            "mean": self.mean, "variance": self.variance, "chi": self.chi,
            "predicted_variance": self.predicted_variance,
            "predicted_offset": self.predicted_offset,
            "variance_deviation": self.variance_deviation,
            "offset_deviation": self.offset_deviation,
            "ergodic_limit": self.ergodic_limit, "M": self.M,
        }


def ergodicity_stats(records, bins: int = 40, ergodic_tol: float = 1e-4,
                     chi: float | None = None) -> ErgodicityStats:
    """Moments and histogram of ``P_cn`` against the first-order relations.

    ``Var(P_cn) ~ 4 chi`` and ``<P_cn> - 1 ~ 2 chi``, with ``chi`` from
    :func:`chi2_analog` on the same values unless given. ``records`` is a
    sequence of :class:`CampaignRecord` (``P_cn`` taken as ``P/P_c``) or an
    array of ``P_cn`` values. The ergodic limit is flagged when the variance
    is below ``ergodic_tol``.
    """
    pcn, _ = _ratios(records)
    pcn = pcn[np.isfinite(pcn) & (pcn > 0)]
    if pcn.size == 0:
        raise EstimationError("no usable P_cn values")
    mean = float(np.mean(pcn))
    var = float(np.var(pcn, ddof=1)) if pcn.size > 1 else 0.0
    if chi is None:
        chi = float(np.mean(0.25 * np.log(pcn) ** 2))
    pv, po = 4 * chi, 2 * chi
    with np.errstate(divide="ignore", invalid="ignore"):
        dv = var / pv - 1 if pv > 0 else (0.0 if var == 0 else np.inf)
        do = (mean - 1) / po - 1 if po > 0 else (0.0 if mean == 1 else np.inf)
    lo, hi = pcn.min(), pcn.max()
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5e-6, hi + 0.5e-6
    counts, edges = np.histogram(pcn, bins=bins, range=(lo, hi))
    return ErgodicityStats(mean, var, float(chi), pv, po, float(dv), float(do),
                           bool(var <= ergodic_tol), edges, counts, int(pcn.size))


def records_by_filter(records: Iterable[CampaignRecord]) -> dict[int, list[CampaignRecord]]:
    out: dict[int, list[CampaignRecord]] = {}
    for r in records:
        out.setdefault(r.k, []).append(r)
    return {k: sorted(v, key=lambda r: r.m) for k, v in sorted(out.items())}


def estimates_table(estimates: Sequence[ChiEstimate]) -> list[dict]:
    return [e.to_dict() for e in estimates]
