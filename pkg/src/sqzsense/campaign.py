"""End-to-end sensing campaigns: K filters x M repetitions, estimation,
reconstruction and a reproducible artifact directory.

Seed derivation
---------------
Every random stream is derived from the master seed with
``numpy.random.SeedSequence([master, stream, k, m])``:

* stream 0: noise trajectory of run ``(k, m)`` (this is the recorded seed),
* stream 1: readout of run ``(k, m)``,
* stream 2: bootstrap of filter ``k`` (``m = 0``).

Runs are therefore independent and can be executed in any order.
"""
from __future__ import annotations

import copy
import csv
import json
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .control import (ControlPulse, FilterFunction, cross_term, design_filter_bank,
                      filter_function, frequency_grid, piecewise_average)
from .errors import ValidationError
from .estimators import (CampaignRecord, ChiEstimate, chi2_analog, chi2_binary,
                         ergodicity_stats, predicted_chi2, records_by_filter)
from .noise import SpectralDensitySpec, cutoff_frequency, max_dt, psd_eval, sample_trajectory
from .probe import (AnalogReadout, BinaryReadout, ProbeConfig, readout, readout_from_dict,
                    survival_factors)
from .reconstruction import gramian, reconstruct, transformed_filters
from .schedule import MeasurementSchedule, interval_integrals

WORKERS_ENV = "SQZSENSE_WORKERS"

DEFAULT_CONFIG = {
    "noise": {"kind": "ornstein-uhlenbeck", "variance": 0.01, "tau_c": 1.0},
    "probe": {"delta": 0.0},
    "schedule": {"n": 40, "tau": 0.3, "t0": 0.0, "times": None},
    "bank": {"k": 8, "band": [0.0, 3.0], "amplitude": 0.2 / 0.3, "pulses": None},
    "campaign": {"m": 200, "mode": "exact", "seed": 20191105},
    "readout": {"model": "analog", "sigma": 0.01},
    "grid": {"n_points": 2000, "omega_max": None},
    "simulation": {"dt": None, "oversampling": 20, "weak_threshold": 1e-2},
    "reconstruction": {"eps": 1e-10, "max_condition": 1e8, "band": None},
    "report": {"bins": 40, "ergodic_tol": 1e-4},
}


class ConfigError(ValidationError):
    """Validation error tied to a configuration key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


def derive_seed(master: int, stream: int, k: int, m: int) -> int:
    return int(np.random.SeedSequence([int(master), stream, k, m]).generate_state(1, np.uint64)[0])


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown key")
        # noise and readout tables are replaced wholesale: their keys depend on the kind
        if isinstance(base[key], dict) and key not in ("noise", "readout"):
            if not isinstance(value, dict):
                raise ConfigError(where, "expected a table")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def set_override(config: dict, assignment: str) -> dict:
    """Apply ``section.key=value``; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like section.key=value")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = path.strip().split(".")
    node = config
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(path, "unknown section")
        node = node[key]
    node[keys[-1]] = value
    return config


@dataclass(eq=False)
class Campaign:
    """Validated, fully resolved campaign configuration."""

    raw: dict
    spec: SpectralDensitySpec
    probe: ProbeConfig
    schedule: MeasurementSchedule
    pulses: tuple
    design_frequencies: np.ndarray
    filters: tuple
    grid: np.ndarray
    dt: float
    omega_max: float
    M: int
    mode: str
    seed: int
    readout: AnalogReadout | BinaryReadout
    band: tuple

    @property
    def K(self) -> int:
        return len(self.pulses)


def load_config(source=None, overrides=()) -> dict:
    """Defaults merged with a JSON file (path or dict) and ``key=value`` overrides."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if source is not None:
        if isinstance(source, dict):
            user = source
        else:
            try:
                with open(source) as fh:
                    user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
            except OSError as exc:
                raise ConfigError("<file>", str(exc)) from exc
        config = _merge(config, user)
    for assignment in overrides:
        set_override(config, assignment)
    return config


def _field(config, section, key):
    try:
        return config[section][key]
    except (KeyError, TypeError):
        raise ConfigError(f"{section}.{key}", "missing") from None


def build_campaign(config: dict) -> Campaign:
    """Validate every section and resolve derived quantities (dt, grid, bank)."""
    try:
        spec = SpectralDensitySpec.from_dict(config["noise"])
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError("noise", str(exc)) from exc
    try:
        probe = ProbeConfig(float(_field(config, "probe", "delta")))
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError("probe.delta", str(exc)) from exc

    sched = config["schedule"]
    try:
        if sched.get("times") is not None:
            schedule = MeasurementSchedule(np.asarray(sched["times"], float))
        else:
            schedule = MeasurementSchedule.uniform(int(sched["n"]), float(sched["tau"]),
                                                   float(sched.get("t0", 0.0)))
    except (ValidationError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError("schedule", str(exc)) from exc

    camp = config["campaign"]
    M = camp.get("m")
    if not isinstance(M, int) or M < 2:
        raise ConfigError("campaign.m", "must be an integer >= 2")
    mode = camp.get("mode")
    if mode not in ("exact", "second-order"):
        raise ConfigError("campaign.mode", "must be 'exact' or 'second-order'")
    seed = camp.get("seed")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("campaign.seed", "must be a non-negative integer")
    try:
        model = readout_from_dict(config["readout"])
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError("readout", str(exc)) from exc

    bank_cfg = config["bank"]
    custom = bank_cfg.get("pulses")
    if custom:
        try:
            pulses = tuple(ControlPulse.from_dict(p) for p in custom)
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError("bank.pulses", str(exc)) from exc
        design = np.array([p.frequency if p.kind == "cosine" else np.nan for p in pulses])
        band_hi = float(np.nanmax(design)) if np.any(np.isfinite(design)) else 0.0
    else:
        try:
            lo, hi = (float(x) for x in bank_cfg["band"])
            K = int(bank_cfg["k"])
            amplitude = float(bank_cfg["amplitude"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("bank", f"needs k, band=[lo, hi] and amplitude ({exc})") from exc
        band_hi = hi

    grid_cfg = config["grid"]
    omega_max = grid_cfg.get("omega_max") or cutoff_frequency(spec, band_hi)
    # at least 20 points per filter main lobe (width ~ 2 pi / T)
    needed = int(np.ceil(20 * float(omega_max) * schedule.duration / (2 * np.pi))) + 1
    try:
        grid = frequency_grid(float(omega_max), max(int(grid_cfg.get("n_points", 2000)), needed))
    except (ValidationError, TypeError, ValueError) as exc:
        raise ConfigError("grid", str(exc)) from exc

    if custom:
        averages = [piecewise_average(p, schedule) for p in pulses]
        filters = tuple(filter_function(a, grid, {"pulse": p.to_dict()}) for p, a in zip(pulses, averages))
        peaks = np.array([f.peak() for f in filters])
        design = np.where(np.isfinite(design), design, peaks)
        default_band = (float(peaks.min()), float(peaks.max()))
    else:
        try:
            bank = design_filter_bank((lo, hi), K, schedule, amplitude, grid)
        except ValidationError as exc:
            raise ConfigError("bank.band", str(exc)) from exc
        pulses, filters, design = bank.pulses, bank.filters, bank.frequencies
        default_band = (lo, hi)

    sim = config["simulation"]
    oversampling = sim.get("oversampling", 20)
    if not isinstance(oversampling, (int, float)) or oversampling < 1:
        raise ConfigError("simulation.oversampling", "must be >= 1")
    try:
        if sim.get("dt") is not None:
            dt = float(sim["dt"])
            schedule.steps_per_interval(dt)
        else:
            dt_max = min(schedule.intervals.min() / oversampling, 1.0 / omega_max,
                         max_dt(spec) * 10.0 / oversampling)
            dt = schedule.choose_dt(dt_max)
        if dt > max_dt(spec) * (1 + 1e-12):
            raise ValidationError(f"dt={dt!r} too coarse for the noise spectrum")
    except ValidationError as exc:
        raise ConfigError("simulation.dt", str(exc)) from exc

    rec = config["reconstruction"]
    band = tuple(float(b) for b in rec["band"]) if rec.get("band") else default_band
    if len(band) != 2 or band[0] > band[1]:
        raise ConfigError("reconstruction.band", "must be [lo, hi] with lo <= hi")
    return Campaign(config, spec, probe, schedule, tuple(pulses), np.asarray(design, float),
                    tuple(filters), grid, dt, float(omega_max), M, mode, seed, model, band)


def validate_config(config: dict) -> Campaign:
    return build_campaign(config)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def simulate_filter(camp: Campaign, k: int, chunk: int = 500) -> dict:
    """All ``M`` repetitions for filter ``k``. Pure function of ``(camp, k)``."""
    schedule, dt = camp.schedule, camp.dt
    steps = schedule.steps_per_interval(dt)
    pulse = camp.pulses[k]
    n_grid = int(steps.sum()) + 1
    avg = piecewise_average(pulse, schedule)
    q_c = survival_factors(camp.probe, schedule, np.zeros(n_grid), dt, camp.mode, pulse)
    Pc = float(np.prod(q_c))

    seeds = [derive_seed(camp.seed, 0, k, m) for m in range(camp.M)]
    P = np.empty(camp.M)
    valid = np.empty(camp.M, bool)
    noise_decay = np.empty(camp.M)
    cross = np.empty(camp.M)
    for start in range(0, camp.M, chunk):
        block = seeds[start:start + chunk]
        noise = np.stack([
            sample_trajectory(camp.spec, schedule.window, dt, s, omega_max=camp.omega_max).values
            for s in block
        ])
        q = survival_factors(camp.probe, schedule, noise, dt, camp.mode, pulse)
        sl = slice(start, start + len(block))
        P[sl] = np.prod(q, axis=-1)
        valid[sl] = np.all(q >= 0, axis=-1)
        noise_decay[sl] = np.sum(interval_integrals(noise, dt, steps) ** 2, axis=-1)
        cross[sl] = cross_term(avg, noise, schedule.times[0], dt)

    measured = np.empty(camp.M)
    for m in range(camp.M):
        rng = np.random.default_rng(derive_seed(camp.seed, 1, k, m))
        measured[m] = readout(min(max(P[m], 0.0), 1.0), camp.readout, rng) if valid[m] else np.nan
    return {"k": k, "Pc": Pc, "P_true": P, "P": measured, "valid": valid, "seeds": seeds,
            "noise_decay": noise_decay, "cross": cross}


def _worker_count(workers) -> int:
    if workers is None:
        workers = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(workers)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"not an integer: {workers!r}") from None
    return max(1, workers)


def simulate(camp: Campaign, workers=None) -> list[dict]:
    n = _worker_count(workers)
    if n == 1 or camp.K == 1:
        results = [simulate_filter(camp, k) for k in range(camp.K)]
    else:
        with ProcessPoolExecutor(max_workers=min(n, camp.K)) as pool:
            results = list(pool.map(simulate_filter, [camp] * camp.K, range(camp.K)))
    return sorted(results, key=lambda r: r["k"])


def records_from_results(results: list[dict]) -> list[CampaignRecord]:
    out = []
    for r in results:
        for m in range(len(r["P"])):
            out.append(CampaignRecord(r["k"], m, float(r["P"][m]), r["Pc"], r["seeds"][m],
                                      bool(r["valid"][m])))
    return out


# ---------------------------------------------------------------------------
# estimation and reconstruction
# ---------------------------------------------------------------------------

def estimate(camp: Campaign, records: list[CampaignRecord]) -> list[ChiEstimate]:
    by_k = records_by_filter(records)
    if sorted(by_k) != list(range(camp.K)):
        raise ValidationError(f"records cover filters {sorted(by_k)}, expected 0..{camp.K - 1}")
    estimates = []
    for k, recs in by_k.items():
        if isinstance(camp.readout, BinaryReadout):
            fractions = np.array([r.P for r in recs if r.valid and np.isfinite(r.P)])
            est = chi2_binary(fractions, recs[0].Pc, seed=derive_seed(camp.seed, 2, k, 0), k=k)
        else:
            est = chi2_analog(recs)
        estimates.append(est)
    return estimates


def invert(camp: Campaign, estimates, eps=None, max_condition=None):
    rec = camp.raw["reconstruction"]
    eps = rec.get("eps", 1e-10) if eps is None else eps
    max_condition = rec.get("max_condition", 1e8) if max_condition is None else max_condition
    gram = gramian(camp.filters, eps)
    tf = transformed_filters(gram, camp.filters)
    reference = psd_eval(camp.spec, camp.grid)
    return reconstruct(estimates, tf, reference, camp.band, max_condition)


# ---------------------------------------------------------------------------
# artifact directory
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_records(path, records: list[CampaignRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "m", "P", "Pc", "ratio", "seed", "valid"])
        for r in records:
            writer.writerow([r.k, r.m, _fmt(r.P), _fmt(r.Pc), _fmt(r.ratio), r.seed, int(r.valid)])


def read_records(path) -> list[CampaignRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["k", "m", "P", "Pc", "ratio", "seed", "valid"]
        if reader.fieldnames != expected:
            raise ValidationError(f"{path}: header {reader.fieldnames} != {expected}")
        for row in reader:
            out.append(CampaignRecord(int(row["k"]), int(row["m"]), float(row["P"]),
                                      float(row["Pc"]), int(row["seed"]), row["valid"] == "1"))
    return out


def _write_realizations(path, results, threshold) -> int:
    flagged = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "m", "P_true", "noise_decay", "cross_term", "weak"])
        for r in results:
            for m in range(len(r["P"])):
                weak = r["noise_decay"][m] <= threshold
                flagged += not weak
                writer.writerow([r["k"], m, _fmt(r["P_true"][m]), _fmt(r["noise_decay"][m]),
                                 _fmt(r["cross"][m]), int(weak)])
    return flagged


def _ergodicity(camp: Campaign, results, estimates) -> list[dict]:
    tol = camp.raw["report"].get("ergodic_tol", 1e-4)
    bins = camp.raw["report"].get("bins", 40)
    out = []
    for r, est in zip(results, estimates):
        ratio = r["P"] / r["Pc"]
        entry = {"k": r["k"]}
        # measured: P_cn ~ P/P_c; factorized: P/(P_c P_n) with the simulated noise-only decay
        for name, values, chi in (("measured", ratio, est.mean),
                                  ("factorized", r["P_true"] / r["Pc"] * np.exp(r["noise_decay"]), None)):
            try:
                stats = ergodicity_stats(values, bins=bins, ergodic_tol=tol, chi=chi)
            except Exception as exc:  # noqa: BLE001 - diagnostics only
                entry[name] = {"error": str(exc)}
                continue
            entry[name] = stats.to_dict()
            entry[name]["hist_edges"] = [float(x) for x in stats.hist_edges]
            entry[name]["hist_counts"] = [int(x) for x in stats.hist_counts]
        out.append(entry)
    return out


def _atomic_dir(outdir, overwrite: bool):
    outdir = os.path.abspath(outdir)
    if os.path.exists(outdir) and os.listdir(outdir) and not overwrite:
        raise ValidationError(f"output directory {outdir} exists and is not empty (use overwrite)")
    parent = os.path.dirname(outdir)
    os.makedirs(parent, exist_ok=True)
    return outdir, tempfile.mkdtemp(prefix=f".{os.path.basename(outdir)}.tmp-", dir=parent)


def _commit(tmp, outdir) -> None:
    if os.path.exists(outdir):
        shutil.rmtree(outdir)
    os.replace(tmp, outdir)


def _write_analysis(directory, camp: Campaign, estimates, result) -> None:
    _write_json(os.path.join(directory, "estimates.json"), [e.to_dict() for e in estimates])
    result.to_csv(os.path.join(directory, "reconstruction.csv"))
    diag = result.diagnostics()
    diag["estimates"] = [
        {"k": e.k, "n_rejected": e.n_rejected, "predicted_chi": float(predicted_chi2(camp.spec, f))}
        for e, f in zip(estimates, camp.filters)
    ]
    _write_json(os.path.join(directory, "diagnostics.json"), diag)


def run_campaign(config: dict, outdir, workers=None, overwrite: bool = False) -> dict:
    """Run the full campaign and write the artifact directory.

    Everything is first written to a temporary sibling directory which is
    renamed into place only after the last file is complete.
    """
    camp = build_campaign(config)
    outdir, tmp = _atomic_dir(outdir, overwrite)
    try:
        results = simulate(camp, workers)
        records = records_from_results(results)
        estimates = estimate(camp, records)
        result = invert(camp, estimates)

        os.makedirs(os.path.join(tmp, "filters"))
        bank_entries = []
        for k, (pulse, filt) in enumerate(zip(camp.pulses, camp.filters)):
            name = f"filter_{k}.csv"
            filt.to_csv(os.path.join(tmp, "filters", name))
            bank_entries.append({"k": k, "pulse": pulse.to_dict(), "path": f"filters/{name}",
                                 "design_frequency": float(camp.design_frequencies[k])})
        _write_json(os.path.join(tmp, "filters", "bank.json"), {"filters": bank_entries})

        write_records(os.path.join(tmp, "records.csv"), records)
        threshold = camp.raw["simulation"].get("weak_threshold", 1e-2)
        flagged = _write_realizations(os.path.join(tmp, "realizations.csv"), results, threshold)
        _write_analysis(tmp, camp, estimates, result)
        _write_json(os.path.join(tmp, "ergodicity.json"), _ergodicity(camp, results, estimates))

        manifest = {
            "tool": "sqzsense",
            "version": __version__,
            "config": camp.raw,
            "resolved": {"dt": camp.dt, "omega_max": camp.omega_max, "K": camp.K, "M": camp.M,
                         "band": list(camp.band), "grid_points": int(camp.grid.size),
                         "schedule": camp.schedule.to_dict()},
            "seed_derivation": "SeedSequence([master, stream, k, m]); stream 0 noise, 1 readout, 2 bootstrap",
            "weak_noise_violations": flagged,
            "files": ["records.csv", "realizations.csv", "estimates.json", "reconstruction.csv",
                      "diagnostics.json", "ergodicity.json", "filters/bank.json"],
        }
        _write_json(os.path.join(tmp, "manifest.json"), manifest)
        _commit(tmp, outdir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return manifest


def load_manifest(directory) -> dict:
    path = os.path.join(directory, "manifest.json")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"no manifest.json in {directory}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"corrupt manifest {path}: {exc}") from exc
    if not isinstance(manifest, dict) or "config" not in manifest or manifest.get("tool") != "sqzsense":
        raise ValidationError(f"{path} is not a campaign manifest")
    return manifest


def load_filters(directory) -> list[FilterFunction]:
    with open(os.path.join(directory, "filters", "bank.json")) as fh:
        bank = json.load(fh)
    return [FilterFunction.from_csv(os.path.join(directory, e["path"]), {"pulse": e["pulse"]})
            for e in sorted(bank["filters"], key=lambda e: e["k"])]


def reconstruct_directory(directory, eps=None, max_condition=None, band=None) -> dict:
    """Redo estimation and inversion from stored records and filters."""
    manifest = load_manifest(directory)
    config = manifest["config"]
    if band is not None:
        config = copy.deepcopy(config)
        config["reconstruction"]["band"] = list(band)
    camp = build_campaign(config)
    stored = load_filters(directory)
    if len(stored) != camp.K:
        raise ValidationError("stored filter bank does not match the manifest")
    camp.filters = tuple(stored)
    records = read_records(os.path.join(directory, "records.csv"))
    estimates = estimate(camp, records)
    result = invert(camp, estimates, eps, max_condition)
    tmp = tempfile.mkdtemp(prefix=".reconstruct.tmp-", dir=directory)
    try:
        _write_analysis(tmp, camp, estimates, result)
        for name in ("estimates.json", "reconstruction.csv", "diagnostics.json"):
            os.replace(os.path.join(tmp, name), os.path.join(directory, name))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return result.diagnostics()


def report(directory, outdir=None) -> dict:
    """Summary tables and plot-ready CSV series for a finished campaign."""
    manifest = load_manifest(directory)
    try:
        with open(os.path.join(directory, "estimates.json")) as fh:
            estimates = json.load(fh)
        with open(os.path.join(directory, "diagnostics.json")) as fh:
            diag = json.load(fh)
        with open(os.path.join(directory, "ergodicity.json")) as fh:
            ergo = json.load(fh)
        spectrum = np.loadtxt(os.path.join(directory, "reconstruction.csv"), delimiter=",",
                              skiprows=1, ndmin=2)
        filters = load_filters(directory)
    except (OSError, ValueError, KeyError) as exc:
        raise ValidationError(f"incomplete campaign directory {directory}: {exc}") from exc

    outdir = outdir or os.path.join(directory, "report")
    os.makedirs(outdir, exist_ok=True)
    omega, s_rec, ds = spectrum[:, 0], spectrum[:, 1], spectrum[:, 2]
    s_orig = spectrum[:, 3] if spectrum.shape[1] > 3 else np.full_like(omega, np.nan)
    with open(os.path.join(outdir, "spectrum.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["omega", "S_orig", "S_rec", "S_rec_lo", "S_rec_hi"])
        for row in zip(omega, s_orig, s_rec, s_rec - ds, s_rec + ds):
            writer.writerow([_fmt(x) for x in row])
    with open(os.path.join(outdir, "filters.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["omega"] + [f"F_{k}" for k in range(len(filters))])
        for i, w in enumerate(filters[0].omega):
            writer.writerow([_fmt(w)] + [_fmt(f.values[i]) for f in filters])
    ergodic = True
    with open(os.path.join(outdir, "pcn_histogram.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "bin_lo", "bin_hi", "count"])
        for entry in ergo:
            stats = entry.get("measured", {})
            if "hist_edges" not in stats:
                ergodic = False
                continue
            ergodic &= bool(stats["ergodic_limit"])
            edges = stats["hist_edges"]
            for lo, hi, c in zip(edges[:-1], edges[1:], stats["hist_counts"]):
                writer.writerow([entry["k"], _fmt(lo), _fmt(hi), c])

    lines = ["k   chi_mean        chi_std         predicted       estimator"]
    pred = {e["k"]: e["predicted_chi"] for e in diag.get("estimates", [])}
    for e in estimates:
        lines.append(f"{e['k']:<3d} {e['chi_mean']:<15.6g} {e['chi_std']:<15.6g} "
                     f"{pred.get(e['k'], float('nan')):<15.6g} {e['estimator']}")
    lines.append(f"Gramian condition number: {diag['condition_number']:.4g} "
                 f"(retained {diag['retained']}, truncated {diag['truncated']})")
    if diag.get("relative_l2_error") is not None:
        lines.append(f"relative L2 error on band {diag['band']}: {diag['relative_l2_error']:.4g}")
    lines.append(f"weak-noise violations: {manifest.get('weak_noise_violations', 'n/a')}")
    lines.append(f"ergodic-limit: {'true' if ergodic else 'false'}")
    summary = "\n".join(lines) + "\n"
    with open(os.path.join(outdir, "summary.txt"), "w") as fh:
        fh.write(summary)
    return {"summary": summary, "ergodic_limit": ergodic, "outdir": outdir,
            "files": ["spectrum.csv", "filters.csv", "pcn_histogram.csv", "summary.txt"]}
