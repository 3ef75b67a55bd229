"""Light/dark period rates of two Hg+ ions and their double-jump rate.

Prints the rate matrix at one wavelength separation, compares it with the
uncoupled ions, then scans the distance to show how the relative change of
the double-jump rate dies away as the ions separate.
"""

import numpy as np

from dipole_jumps.model import SystemSpec, coupling_constants
from dipole_jumps.rates import closed_form_rates, double_jump_rate, perturbative_rates, rate_sweep

spec = SystemSpec.two_d()  # A1 = A2 = 1/s, A3 = 4e8/s, Omega3 = 5e7/s
lam = spec.wavelengths[3]
near = spec.with_distance(lam)

C = coupling_constants(near)
print("coupling constants at r = lambda_3:")
for j, c in C.items():
    print(f"  C_{j} = {c.real:+.4e} {c.imag:+.4e}i  s^-1")

p = perturbative_rates(near)
cf = closed_form_rates(near)
zero = perturbative_rates(near, {j: 0j for j in C})
np.set_printoptions(precision=5)
print("\nrate matrix from the generator (s^-1):\n", p.p)
nz = cf.p != 0
print("largest relative difference to the closed forms:", np.abs(p.p[nz] / cf.p[nz] - 1).max())
print(f"\np21 coupled {p.p21:.5e}, uncoupled {zero.p21:.5e}")
print(f"n_DJ coupled {double_jump_rate(p):.4e}/s, uncoupled {double_jump_rate(zero):.4e}/s")

print("\nenvelope of |relative change of n_DJ|:")
for start in (1, 2, 5, 10, 20, 50, 100):
    s = rate_sweep(spec, np.linspace(start, start + 1, 41))
    print(f"  r in [{start:>3}, {start + 1:>3}] lambda_3: {np.abs(s['rel_dev_nDJ']).max():.4f}")
