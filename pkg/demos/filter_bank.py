"""
Filter banks and the Gramian
============================

Design a bank of cosine controls, look at where each filter function puts
its weight, and check that the transformed filters undo the overlaps.
"""
import numpy as np

from sqzsense import (MeasurementSchedule, design_filter_bank, gramian, piecewise_average,
                      transformed_filters)
from sqzsense.control import filter_function, frequency_grid, resolvable_band

# %%
# Forty measurements spaced 0.3 apart. Frequencies above the Nyquist-like
# limit of the schedule cannot be told apart.
sched = MeasurementSchedule.uniform(40, 0.3)
print("resolvable band:", resolvable_band(sched))

# %%
# Eight cosine controls, frequencies spread uniformly over (0, 3).
bank = design_filter_bank((0.0, 3.0), 8, sched, amplitude=0.2 / 0.3)
grid = frequency_grid(50.0, 4000)
filters = [filter_function(piecewise_average(p, sched), grid) for p in bank.pulses]
for k, f in enumerate(filters):
    print(f"k={k}  design w={bank.frequencies[k]:.3f}  peak at w={f.peak():.3f}"
          f"  area={f.integral():.4f}")

# %%
# Overlaps between neighbours make the Gramian non-diagonal. Its spectrum
# sets how much estimation noise the inversion amplifies.
gram = gramian(filters)
print("Gramian eigenvalues:", np.array2string(gram.eigenvalues, precision=3))
print("condition number:", round(gram.condition, 2))

# %%
# Transformed filters are biorthogonal to the originals: the overlap matrix
# between the two sets is the identity.
tf = transformed_filters(gram, filters)
F = np.stack([f.values for f in filters])
overlap = np.trapezoid(tf.values[:, None, :] * F[None, :, :], grid, axis=-1)
print("max |overlap - I| =", float(np.abs(overlap - np.eye(len(filters))).max()))
