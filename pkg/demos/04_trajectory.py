"""A simulated photon record and the period statistics read off from it.

Slow rates are compressed by 1e4 so a few hundred periods fit in half a
second of simulated time.  The intensity class after each jump is
known exactly from the jump labels; the window classifier recovers it from
photon counts alone, as one would with measured data.
"""

import numpy as np

from dipole_jumps.appendix import single_light_rate
from dipole_jumps.model import SystemSpec
from dipole_jumps.rates import perturbative_rates
from dipole_jumps.trajectory import classify_periods, empirical_statistics, periods_from_labels, run_trajectory

spec = SystemSpec.two_d().scaled(1e4)
spec = spec.with_distance(spec.wavelengths[3])
rec = run_trajectory(spec, duration=0.5, seed=7)
print(f"{len(rec)} recorded photons")

exact = periods_from_labels(rec)
# windows holding about 100 photons at unit intensity
window = classify_periods(rec, 100 / single_light_rate(spec))
print(f"{len(exact)} periods from jump labels, {len(window)} from the window classifier")
for name, ps in (("labels", exact), ("classifier", window)):
    frac = [(ps.ends - ps.starts)[ps.classes == c].sum() / ps.duration for c in range(3)]
    print(f"  {name:>10}: time fractions per class {np.round(frac, 3)}")

E = empirical_statistics(exact)
ref = perturbative_rates(spec)
for i, j in ((0, 1), (1, 0), (1, 2), (2, 1)):
    print(f"  p{i}{j}: estimate {E.p.p[i, j]:9.1f} +- {E.se[i, j]:7.1f}   theory {ref.p[i, j]:9.1f}")
