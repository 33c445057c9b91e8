"""
When does a single run look like the ensemble?
==============================================

The cross term between control and noise is a time average over the whole
sequence. If the noise decorrelates quickly compared with the sequence
length, every run sees nearly the same average and ``P_cn`` stops
fluctuating. Compare a slow and a fast OU process with the same variance.
"""
import numpy as np

from sqzsense import ControlPulse, MeasurementSchedule, ProbeConfig, SpectralDensitySpec
from sqzsense import ergodicity_stats, sample_trajectory
from sqzsense.probe import survival_factors
from sqzsense.schedule import interval_integrals

sched = MeasurementSchedule.uniform(40, 0.1)
pulse = ControlPulse.constant(0.1 / 0.1)
cfg = ProbeConfig(0.0)
M = 1000


def pcn_samples(tau_c):
    spec = SpectralDensitySpec.ornstein_uhlenbeck(0.05, tau_c)
    dt = sched.choose_dt(min(tau_c / 10, 0.1 / 20))
    X = np.stack([sample_trajectory(spec, sched.window, dt, m, method="ou-exact").values
                  for m in range(M)])
    P = survival_factors(cfg, sched, X, dt, control=pulse).prod(axis=1)
    Pc = survival_factors(cfg, sched, np.zeros(X.shape[1]), dt, control=pulse).prod()
    # divide out the noise-only decay to isolate the cross term
    Pn = np.exp(-np.sum(interval_integrals(X, dt, sched.steps_per_interval(dt)) ** 2, axis=1))
    return P / (Pc * Pn)


# %%
# Var(P_cn) tracks 4 chi and shrinks with the correlation time. The flag
# is raised once the spread falls below the tolerance.
for tau_c in (1.0, 0.1, 0.01):
    stats = ergodicity_stats(pcn_samples(tau_c), ergodic_tol=5e-4)
    print(f"tau_c={tau_c:6.3f}  <P_cn>={stats.mean:.5f}  std={np.sqrt(stats.variance):.1e}"
          f"  Var/4chi={stats.variance / stats.predicted_variance:.3f}"
          f"  ergodic-limit: {str(stats.ergodic_limit).lower()}")
