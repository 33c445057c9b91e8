"""Filter-bank inversion: Gramian, transformed filters, reconstructed PSD.

With ``A_kl = int F_k F_l dw = (V^T diag(lam) V)_kl`` the transformed filters

    Ft_k(w) = sum_{i,l} V_lk V_li F_i(w) / lam_l

are biorthogonal to the ``F_k`` on the retained eigen-directions, so
``S_rec = sum_k chi_k Ft_k`` is the L2 projection of ``S`` onto the span of
the filters. Eigenvalues below ``eps * lam_max`` are dropped.
"""
from __future__ import annotations

import csv
import json
import numbers
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .control import FilterFunction
from .errors import NumericalError, ValidationError

DEFAULT_EPS = 1e-10
DEFAULT_MAX_CONDITION = 1e8


@dataclass(frozen=True, eq=False)
class Gramian:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # rows are eigenvectors: A = V.T @ diag(lam) @ V
    eps: float = DEFAULT_EPS
    # largest share of any diagonal entry contributed by the top tenth of the grid
    tail_fraction: float = 0.0

    @property
    def retained(self) -> np.ndarray:
        lam_max = self.eigenvalues.max()
        return self.eigenvalues >= self.eps * lam_max if lam_max > 0 else np.zeros_like(self.eigenvalues, bool)

    @property
    def n_retained(self) -> int:
        return int(np.count_nonzero(self.retained))

    @property
    def n_truncated(self) -> int:
        return self.eigenvalues.size - self.n_retained

    @property
    def condition(self) -> float:
        """Condition number on the retained subspace."""
        kept = self.eigenvalues[self.retained]
        return float(kept.max() / kept.min()) if kept.size else float("inf")

    @property
    def full_condition(self) -> float:
        lam = self.eigenvalues
        return float(lam.max() / lam.min()) if lam.min() > 0 else float("inf")

    def diagnostics(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "condition_number": self.full_condition,
            "retained_condition_number": self.condition,
            "retained": self.n_retained,
            "truncated": self.n_truncated,
            "eps": self.eps,
            "tail_fraction": self.tail_fraction,
        }


def _shared_grid(filters: Sequence[FilterFunction]) -> np.ndarray:
    if not filters:
        raise ValidationError("need at least one filter")
    grid = filters[0].omega
    for f in filters[1:]:
        if f.omega.shape != grid.shape or not np.array_equal(f.omega, grid):
            raise ValidationError("all filters must share one frequency grid")
    return grid


def gramian(filters: Sequence[FilterFunction], eps: float = DEFAULT_EPS) -> Gramian:
    grid = _shared_grid(filters)
    F = np.stack([f.values for f in filters])
    # trapezoid weights so A = F W F^T is exactly the trapezoid rule
    w = np.zeros_like(grid)
    h = np.diff(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    A = (F * w) @ F.T
    A = 0.5 * (A + A.T)
    lam, vecs = np.linalg.eigh(A)
    tail = grid >= grid[0] + 0.9 * (grid[-1] - grid[0])
    diag = np.diag(A)
    with np.errstate(invalid="ignore", divide="ignore"):
        share = np.where(diag > 0, ((F[:, tail] ** 2) * w[tail]).sum(axis=1) / diag, 0.0)
    return Gramian(A, lam, vecs.T.copy(), eps, float(share.max()))


@dataclass(frozen=True, eq=False)
class TransformedFilters:
    omega: np.ndarray
    values: np.ndarray  # shape (K, n_grid)
    gramian: Gramian

    def __len__(self):
        return self.values.shape[0]


def transformed_filters(gram: Gramian, filters: Sequence[FilterFunction]) -> TransformedFilters:
    grid = _shared_grid(filters)
    if len(filters) != gram.matrix.shape[0]:
        raise ValidationError("Gramian size does not match the number of filters")
    keep = gram.retained
    if not np.any(keep):
        raise NumericalError(f"every Gramian eigenvalue was truncated: {gram.diagnostics()}")
    V = gram.eigenvectors[keep]
    lam = gram.eigenvalues[keep]
    # pseudo-inverse of A on the retained subspace: (A^+)_{ki} = sum_l V_lk V_li / lam_l
    pinv = (V.T / lam) @ V
    F = np.stack([f.values for f in filters])
    return TransformedFilters(grid, pinv @ F, gram)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    omega: np.ndarray
    s_rec: np.ndarray
    ds_rec: np.ndarray
    ds_rss: np.ndarray
    transformed: TransformedFilters = field(repr=False)
    s_orig: np.ndarray | None = None
    relative_l2_error: float | None = None
    band: tuple | None = None

    def diagnostics(self) -> dict:
        out = self.transformed.gramian.diagnostics()
        err = self.relative_l2_error
        # JSON has no infinity; a zero reference spectrum gives no relative error
        out["relative_l2_error"] = err if err is None or np.isfinite(err) else None
        out["band"] = None if self.band is None else [float(b) for b in self.band]
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["omega", "S_rec", "dS_rec"]
            if self.s_orig is not None:
                header.append("S_orig")
            writer.writerow(header)
            for i, w in enumerate(self.omega):
                row = [w, self.s_rec[i], self.ds_rec[i]]
                if self.s_orig is not None:
                    row.append(self.s_orig[i])
                writer.writerow([f"{x:.17g}" for x in row])

    def write_diagnostics(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.diagnostics(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _means_and_spreads(estimates, K):
    if len(estimates) != K:
        raise ValidationError(f"{len(estimates)} estimates for {K} filters")
    raw = [isinstance(e, numbers.Real) for e in estimates]
    means = np.array([e if r else e.mean for e, r in zip(estimates, raw)], float)
    spreads = np.array([np.nan if r else e.std for e, r in zip(estimates, raw)], float)
    return means, spreads


def relative_l2(a, b, omega, band=None) -> float:
    """``||a - b|| / ||b||`` under the trapezoid L2 norm, optionally on a band."""
    omega = np.asarray(omega, float)
    mask = np.ones_like(omega, bool) if band is None else (omega >= band[0]) & (omega <= band[1])
    if np.count_nonzero(mask) < 2:
        raise ValidationError("band contains fewer than two grid points")
    w = omega[mask]
    num = np.trapezoid((np.asarray(a)[mask] - np.asarray(b)[mask]) ** 2, w)
    den = np.trapezoid(np.asarray(b)[mask] ** 2, w)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(np.sqrt(num / den))


def reconstruction_error(estimates, transformed: TransformedFilters):
    """``dS(w) = sum_k |Ft_k(w)| dchi_k`` and the root-sum-square variant."""
    _, spreads = _means_and_spreads(estimates, len(transformed))
    if np.any(~np.isfinite(spreads)):
        raise ValidationError("every estimate needs a finite spread (M >= 2)")
    Ft = transformed.values
    ds_abs = np.abs(Ft).T @ spreads
    ds_rss = np.sqrt((Ft ** 2).T @ spreads ** 2)
    return ds_abs, ds_rss


def reconstruct(estimates, transformed: TransformedFilters, reference=None, band=None,
                max_condition: float = DEFAULT_MAX_CONDITION) -> ReconstructionResult:
    """``S_rec = sum_k chi_k Ft_k`` with error bars.

    ``estimates`` holds :class:`~sqzsense.estimators.ChiEstimate` objects (or
    bare chi values, in which case no error bars are formed). ``reference``
    is the original spectrum on the filter grid; ``band`` restricts the
    relative L2 error to ``[lo, hi]``.
    """
    K = len(transformed)
    means, spreads = _means_and_spreads(estimates, K)
    gram = transformed.gramian
    if gram.condition > max_condition:
        raise NumericalError(
            f"retained Gramian condition number {gram.condition:.3g} exceeds {max_condition:.3g}; "
            f"refusing to amplify noise. diagnostics: {gram.diagnostics()}"
        )
    s_rec = means @ transformed.values
    if np.all(np.isfinite(spreads)):
        ds_abs, ds_rss = reconstruction_error(estimates, transformed)
    else:
        ds_abs = ds_rss = np.full_like(s_rec, np.nan)
    err = None
    s_orig = None
    if reference is not None:
        s_orig = np.asarray(reference, float)
        if s_orig.shape != s_rec.shape:
            raise ValidationError("reference spectrum must live on the filter grid")
        err = relative_l2(s_rec, s_orig, transformed.omega, band)
    return ReconstructionResult(transformed.omega, s_rec, ds_abs, ds_rss, transformed,
                                s_orig, err, None if band is None else tuple(band))
