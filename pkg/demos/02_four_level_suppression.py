"""Why four-level ions hide the cooperative effect.

With a lamp pumping the metastable level back and a separate 4 -> 2 decay,
the dark periods no longer need the coupled 3 -> 2 emission, and the
distance dependence nearly drops out of n_DJ.  The comparison uses the same
Rabi frequency for both level schemes.
"""

from dipole_jumps.model import SystemSpec
from dipole_jumps.rates import double_jump_rate, optimal_rabi, perturbative_rates


def deviations(spec):
    zero = {j: 0j for j in spec.transitions}
    p, p0 = perturbative_rates(spec), perturbative_rates(spec, zero)
    return p.p21 / p0.p21 - 1, double_jump_rate(p) / double_jump_rate(p0) - 1


om = optimal_rabi(4e8)
print(f"optimal Rabi frequency for A3 = 4e8/s: {om:.5e}/s")
for x in (0.5, 1.0, 2.0, 5.0):
    four = SystemSpec.four_level()
    four = four.with_distance(x * four.wavelengths[3])
    two = SystemSpec.two_d(omega3=om)
    two = two.with_distance(x * two.wavelengths[3])
    f21, fn = deviations(four)
    t21, tn = deviations(two)
    print(f"r = {x:3.1f} lambda_3   two D: p21 {t21:+.4f} nDJ {tn:+.4f}   four-level: p21 {f21:+.4f} nDJ {fn:+.2e}")
