"""Rates from photon fluxes and next-photon probabilities.

The same rates follow from asking which line the next photon is emitted on.
The time integrals over the no-emission evolution come from Sylvester
solves; the residual against the closed forms is a second-order effect of
size (A1 + A2)/I_L that does not depend on the distance.
"""

import numpy as np

from dipole_jumps.appendix import appendix_rates, next_photon_density_single, single_light_rate, single_system_p10
from dipole_jumps.model import SystemSpec
from dipole_jumps.rates import closed_form_rates

spec = SystemSpec.two_d()
t = np.array([0.0, 1e-9, 1e-8, 1e-7])
print("single-ion density of a next photon on the slow line:", next_photon_density_single(t, spec))
print(f"single-ion shelving rate {single_system_p10(spec):.6e}/s, light-period rate {single_light_rate(spec):.4e}/s")

for x in (1, 2, 5, 10):
    s = spec.with_distance(x * spec.wavelengths[3])
    a, cf = appendix_rates(s).p, closed_form_rates(s).p
    off = ~np.eye(3, dtype=bool) & (cf != 0)
    print(f"r = {x:>2} lambda_3: max relative difference to closed forms {np.abs(a[off] / cf[off] - 1).max():.2e}")
