import numpy as np
import pytest
from dataclasses import replace
from scipy.integrate import quad, quad_vec

from dipole_jumps.appendix import (
    SingularEmissionError,
    appendix_rates,
    average_reset_state,
    emission_integrals,
    emission_probability,
    next_photon_density_single,
    single_channels,
    single_hcond,
    single_light_rate,
    single_system_p10,
    strong_line_flux,
    time_integrated_state,
    unit_intensity_rate,
)
from dipole_jumps.liouville import build_hcond, build_reset_channels
from dipole_jumps.model import Scheme, SystemSpec, build_basis, coupling_constants, zero_couplings
from dipole_jumps.rates import closed_form_rates, closed_form_rho_ss

from conftest import HG_REF, random_rho

B2 = build_basis(Scheme.TWO_D)
ONE = np.diag([1.0, 0.0, 0.0]).astype(complex)


def integrated_by_quadrature(rho, H):
    """int_0^T S rho S^dag dt on a logarithmic time grid, T from the slowest decay."""
    ev, V = np.linalg.eig(H)
    Vi = np.linalg.inv(V)
    T = 60.0 / -ev.imag.max()

    def f(u):
        t = np.exp(u)
        S = (V * np.exp(-1j * ev * t)) @ Vi
        return S @ rho @ S.conj().T * t

    val, _ = quad_vec(f, np.log(1e-16), np.log(T), epsabs=0, epsrel=1e-10, limit=2000)
    return val


# single emitter


def test_density_vanishes_at_zero():
    assert next_photon_density_single(0.0, SystemSpec.two_d()) == 0


def test_density_integrates_to_emission_probability():
    spec = SystemSpec.two_d()
    P = emission_probability(ONE, {2}, single_hcond(spec), single_channels(spec))
    val, _ = quad(lambda t: next_photon_density_single(t, spec), 0, 1e3 / 4e8, limit=500, epsabs=0, epsrel=1e-12)
    assert 0 < P < 1
    assert val == pytest.approx(P, rel=1e-6)


def test_density_rejects_negative_time():
    with pytest.raises(ValueError):
        next_photon_density_single(-1.0, SystemSpec.two_d())


def test_total_density_without_slow_decay_integrates_to_one():
    spec = SystemSpec.two_d(A1=0.0, A2=0.0)
    H = single_hcond(spec)
    ev, V = np.linalg.eig(H)
    Vi = np.linalg.inv(V)

    def total(t):
        amp = V[2] @ (np.exp(-1j * ev * t) * Vi[:, 0])
        return spec.einstein_A[3] * abs(amp) ** 2

    # level 2 does not decay here; it is not populated from level 1
    gamma = min(-ev.imag[ev.imag < 0])
    val, _ = quad(total, 0, 60 / gamma, limit=500, epsabs=0, epsrel=1e-12)
    assert val == pytest.approx(1.0, abs=1e-10)
    assert emission_probability(ONE, {1, 2, 3}, H, single_channels(spec)) == pytest.approx(1.0, abs=1e-10)


def test_single_system_p10_matches_closed_form():
    spec = SystemSpec.two_d(**HG_REF)
    p10 = single_system_p10(spec)
    ref = closed_form_rates(spec, zero_couplings(spec)).p10
    assert p10 == pytest.approx(1.515e-2, rel=1e-3)
    assert abs(p10 / ref - 1) <= HG_REF["A1"] / HG_REF["A3"] * 1.01


def test_single_light_rate():
    spec = SystemSpec.two_d()
    assert single_light_rate(spec) == pytest.approx(4e8 * 2.5e15 / (1.6e17 + 5e15), rel=1e-15)


# two emitters


@pytest.mark.parametrize("label", ["g", "s12", "e3", "s23"])
def test_complete_partition_sums_to_one(hg, label):
    H = build_hcond(hg).matrix
    ch = build_reset_channels(hg)
    rho = np.outer(B2.ket(label), B2.ket(label))
    parts = [emission_probability(rho, {j}, H, ch) for j in (1, 2, 3)]
    assert sum(parts) == pytest.approx(1.0, abs=1e-10)
    assert emission_probability(rho, {"R+1", "R-1", "photon_w2", 3}, H, ch) == pytest.approx(1.0, abs=1e-10)


def test_complete_partition_random_states(hg, rng):
    H = build_hcond(hg).matrix
    ch = build_reset_channels(hg)
    for _ in range(10):
        rho = random_rho(rng, 9)
        assert sum(emission_probability(rho, {j}, H, ch) for j in (1, 2, 3)) == pytest.approx(1, abs=1e-10)


def test_sylvester_agrees_with_quadrature(hg, rng):
    H = build_hcond(hg).matrix
    for _ in range(20):
        rho = random_rho(rng, 9)
        X = time_integrated_state(rho, H)
        Q = integrated_by_quadrature(rho, H)
        assert np.abs(X - Q).max() <= 1e-8 * np.abs(X).max()


def test_non_decaying_state_is_reported():
    spec = SystemSpec.two_d(A1=0.0, A2=0.0)
    H = build_hcond(spec).matrix
    with pytest.raises(SingularEmissionError, match="non-decaying"):
        time_integrated_state(B2.proj("e2"), H)
    # an unpopulated stationary mode is harmless
    X = time_integrated_state(B2.proj("g"), H)
    assert np.isfinite(X).all()


def test_unit_trace_required(hg):
    H = build_hcond(hg).matrix
    with pytest.raises(ValueError):
        emission_probability(2 * B2.proj("g"), {3}, H, build_reset_channels(hg))


def test_average_reset_state_properties(hg):
    rho = average_reset_state(hg)
    assert np.trace(rho).real == pytest.approx(1, abs=1e-14)
    assert np.abs(rho - rho.conj().T).max() < 1e-15
    assert np.linalg.eigvalsh(rho).min() > -1e-14


def test_average_reset_state_support_without_coupling():
    spec = SystemSpec.two_d()
    rho = average_reset_state(spec, zero_couplings(spec))
    keep = [B2.index_of(x) for x in ("s12", "a12")]
    mask = np.ones((9, 9), dtype=bool)
    mask[np.ix_(keep, keep)] = False
    assert np.abs(rho[mask]).max() == 0


def test_unit_intensity_rate_without_coupling():
    spec = SystemSpec.two_d(**HG_REF)
    A3, Om = HG_REF["A3"], HG_REF["omega3"]
    assert unit_intensity_rate(spec) == pytest.approx(2 * Om**2 * A3 / (A3**2 + 2 * Om**2), rel=1e-15)
    assert unit_intensity_rate(spec) == pytest.approx(1.2121e7, rel=5e-5)
    assert unit_intensity_rate(spec) == pytest.approx(2 * single_light_rate(spec), rel=1e-15)


@pytest.mark.parametrize("delta", [0.0, 4e7])
@pytest.mark.parametrize("x", [1.0, 2.3, 10.0])
def test_unit_intensity_rate_is_double_state_flux(hg, x, delta):
    spec = replace(hg, distance_r=x, detuning_delta3=delta)
    C = coupling_constants(spec)
    flux = strong_line_flux(spec, closed_form_rho_ss(spec, C)[2], C)
    assert unit_intensity_rate(spec, C[3]) == pytest.approx(flux, rel=1e-12)


def test_emission_integrals_keys(hg):
    E = emission_integrals(hg)
    assert set(E.P) == {"single_w2", "unit_w1", "unit_w2", "double_w2"}
    assert all(0 < v < 1 for v in E.P.values())


def test_four_level_not_supported(four):
    with pytest.raises(ValueError):
        appendix_rates(four)


# rates


@pytest.mark.parametrize("x", [1.0, 2.0, 5.0, 10.0])
def test_p01_exact(hg, x):
    assert appendix_rates(hg.with_distance(x)).p01 == 2 * HG_REF["A1"]


@pytest.mark.parametrize("x", [1.0, 2.0, 5.0, 10.0])
def test_rates_agree_with_closed_forms_to_first_order(hg, x):
    """The residual is second order: slow rates over the light-period photon rate."""
    spec = hg.with_distance(x)
    C = coupling_constants(spec)
    cf = closed_form_rates(spec, C).p
    a = appendix_rates(spec, C).p
    off = ~np.eye(3, dtype=bool) & (cf != 0)
    rel = np.abs(a[off] / cf[off] - 1).max()
    A = spec.einstein_A
    assert rel <= (A[1] + A[2] + abs(C[1]) + abs(C[2])) / single_light_rate(spec)


def test_residual_scales_with_slow_rates(hg):
    """Halving A1 and A2 halves the deviation from the closed forms."""
    res = []
    for s in (1.0, 0.5, 0.25):
        spec = replace(hg, einstein_A={1: s, 2: s, 3: 4e8}, distance_r=10.0)
        C = coupling_constants(spec)
        cf = closed_form_rates(spec, C).p
        res.append(abs(appendix_rates(spec, C).p10 / cf[1, 0] - 1))
    assert res[0] / res[1] == pytest.approx(2, rel=1e-2)
    assert res[1] / res[2] == pytest.approx(2, rel=1e-2)


def a8_spec(hg, C2):
    C = coupling_constants(hg)
    C[1] = C[3] = 0j
    C[2] = C2
    return C


def test_a8_special_case(hg):
    C = a8_spec(hg, coupling_constants(hg)[2])
    b = HG_REF["A3"] ** 2 + 2 * HG_REF["omega3"] ** 2
    ref = HG_REF["A1"] * (1 + C[2].imag ** 2 / b)
    assert appendix_rates(hg, C).p12 == pytest.approx(ref, rel=1e-6)


def test_a8_shift_is_quadratic(hg):
    b = HG_REF["A3"] ** 2 + 2 * HG_REF["omega3"] ** 2
    base = appendix_rates(hg, a8_spec(hg, 0j)).p12
    g = np.geomspace(1e6, 1e7, 6)
    shift = np.array([appendix_rates(hg, a8_spec(hg, 1j * x)).p12 - base for x in g])
    slope = np.polyfit(np.log(g), np.log(shift), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)
    # the coefficient is the one of the second-order formula
    assert shift[-1] / (HG_REF["A1"] * g[-1] ** 2 / b) == pytest.approx(1.0, rel=1e-3)
