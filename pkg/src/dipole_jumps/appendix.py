"""Transition rates for D systems from the next-photon (quantum jump) route.

Every rate is a photon flux times the probability that the next photon
belongs to a given transition.  The probabilities are time integrals of the
no-emission evolution ``S(t) = exp(-i H_cond t)``; the integral
``X = int_0^inf S(t) rho S(t)^dag dt`` solves the Sylvester equation
``-i(H X - X H^dag) = -rho``, so no quadrature is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester

from .liouville import JumpChannel, build_hcond, build_reset_channels
from .model import Scheme, SystemSpec, build_basis, coupling_constants
from .rates import RateMatrix, closed_form_rho_ss

SINGULAR_TOL = 1e-12


class SingularEmissionError(np.linalg.LinAlgError):
    """A non-decaying state of H_cond is reachable, so the integral diverges."""


@dataclass(frozen=True)
class EmissionIntegrals:
    P: dict
    I_L: float
    I_ss2: float
    rho_bar_1: np.ndarray


def single_hcond(spec: SystemSpec) -> np.ndarray:
    """3x3 conditional Hamiltonian of one D system, levels 1, 2, 3."""
    A1, A2, A3 = (spec.einstein_A[j] for j in (1, 2, 3))
    Om, Dl = spec.rabi_omega3, spec.detuning_delta3
    H = np.zeros((3, 3), dtype=complex)
    H[2, 2] = Dl
    H[0, 2] = H[2, 0] = Om / 2
    H -= 0.5j * np.diag([0.0, A1, A2 + A3])
    return H


def single_channels(spec: SystemSpec) -> list[JumpChannel]:
    ops = []
    for j, (upper, lower) in spec.transitions.items():
        R = np.zeros((3, 3), dtype=complex)
        R[lower - 1, upper - 1] = 1
        ops.append(JumpChannel(R, spec.einstein_A[j], f"photon_w{j}", f"sigma{j}", j))
    return ops


def next_photon_density_single(t, spec: SystemSpec) -> np.ndarray:
    """Density ``A_2 |<3| S(t) |1>|^2`` of a next photon on the 3 -> 2 line.

    ``t`` may be a scalar or an array of times >= 0.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be >= 0")
    ev, V = np.linalg.eig(single_hcond(spec))
    Vi = np.linalg.inv(V)
    # <3| V exp(-i ev t) V^-1 |1>
    amp = np.einsum("k,k,...k->...", V[2, :], Vi[:, 0], np.exp(-1j * np.multiply.outer(t, ev)))
    return spec.einstein_A[2] * np.abs(amp) ** 2


def time_integrated_state(rho0: np.ndarray, H: np.ndarray) -> np.ndarray:
    """``int_0^inf S(t) rho0 S(t)^dag dt`` via a Sylvester solve."""
    H = np.asarray(H)
    ev, V = np.linalg.eig(H)
    scale = max(np.abs(ev).max(), 1.0)
    stuck = np.abs(ev.imag) <= SINGULAR_TOL * scale
    if np.any(stuck):
        Vi = np.linalg.inv(V)
        for k in np.flatnonzero(stuck):
            # the mode is populated iff rho0 has weight on it
            if np.abs(Vi[k] @ rho0 @ Vi[k].conj()) > SINGULAR_TOL:
                raise SingularEmissionError(
                    f"non-decaying eigenvector {np.round(V[:, k], 6)} of H_cond "
                    f"(eigenvalue {ev[k]:.6g}) is populated by the initial state"
                )
        # unpopulated stationary modes: project them out
        keep = ~stuck
        P = V[:, keep] @ Vi[keep]
        rho0 = P @ rho0 @ P.conj().T
        H = H - 1j * scale * (np.eye(len(H)) - P)
    return solve_sylvester(-1j * H, 1j * H.conj().T, -rho0)


def emission_probability(
    initial: np.ndarray,
    subset,
    H: np.ndarray,
    channels: list[JumpChannel],
) -> float:
    """Probability that the next photon comes from a channel in ``subset``.

    ``subset`` holds channel names, emission labels or transition indices.
    """
    initial = np.asarray(initial)
    if abs(np.trace(initial) - 1) > 1e-9:
        raise ValueError("initial state must have unit trace")
    X = time_integrated_state(initial, H)
    subset = set(subset)
    total = 0.0
    for ch in channels:
        if ch.name in subset or ch.emission_label in subset or ch.transition in subset:
            total += ch.rate * np.trace(ch.operator @ X @ ch.operator.conj().T).real
    return float(total)


def reset_average(rho: np.ndarray, channels: list[JumpChannel]) -> np.ndarray:
    """State right after a photon from ``channels``, averaged over channels."""
    out = sum(ch.rate * ch.operator @ rho @ ch.operator.conj().T for ch in channels)
    tr = np.trace(out).real
    if not tr > 0:
        raise ValueError("no emission possible from this state (zero trace after reset)")
    return out / tr


def _strong_channels(spec, C):
    return [ch for ch in build_reset_channels(spec, C) if ch.transition == 3]


def average_reset_state(spec: SystemSpec, C: dict | None = None, intensity: int = 1) -> np.ndarray:
    """Average state after a strong-line photon in an intensity-1 (or 2) period."""
    if spec.scheme is not Scheme.TWO_D:
        raise ValueError("the next-photon route is implemented for two D systems")
    C = coupling_constants(spec) if C is None else C
    rho = closed_form_rho_ss(spec, C)[intensity]
    return reset_average(rho, _strong_channels(spec, C))


def unit_intensity_rate(spec: SystemSpec, C3: complex = 0j) -> float:
    """Strong-line photon rate of two coupled emitters that both cycle.

    At C_3 = 0 this is twice the single-emitter rate.
    """
    A3, Om, Dl = spec.einstein_A[3], spec.rabi_omega3, spec.detuning_delta3
    if not A3 > 0:
        raise ValueError("A3 must be > 0")
    C3 = complex(C3)
    b = A3**2 + 2 * Om**2 + 4 * Dl**2
    c = A3**2 + 4 * Dl**2
    X = abs(C3) ** 2 + 2 * A3 * C3.real + 4 * Dl * C3.imag
    return 2 * Om**2 * (A3 * b + C3.real * c) / (b**2 + c * X)


def single_light_rate(spec: SystemSpec) -> float:
    """Strong-line photon rate of one cycling emitter."""
    A3, Om, Dl = spec.einstein_A[3], spec.rabi_omega3, spec.detuning_delta3
    return A3 * Om**2 / (A3**2 + 2 * Om**2 + 4 * Dl**2)


def strong_line_flux(spec: SystemSpec, rho: np.ndarray, C: dict | None = None) -> float:
    """``sum rate Tr(R rho R^dag)`` over the strong-line channels."""
    C = coupling_constants(spec) if C is None else C
    return float(sum(ch.rate * np.trace(ch.operator @ rho @ ch.operator.conj().T).real
                     for ch in _strong_channels(spec, C)))


def emission_integrals(spec: SystemSpec, C: dict | None = None) -> EmissionIntegrals:
    """All probabilities and fluxes entering ``appendix_rates``."""
    if spec.scheme is not Scheme.TWO_D:
        raise ValueError("the next-photon route is implemented for two D systems")
    C = coupling_constants(spec) if C is None else C
    H = build_hcond(spec, C).matrix
    channels = build_reset_channels(spec, C)
    rho_bar_1 = average_reset_state(spec, C, 1)
    rho_bar_2 = average_reset_state(spec, C, 2)

    Hs, chs = single_hcond(spec), single_channels(spec)
    one = np.diag([1.0, 0.0, 0.0]).astype(complex)
    P = {
        "single_w2": emission_probability(one, {2}, Hs, chs),
        "unit_w1": emission_probability(rho_bar_1, {1}, H, channels),
        "unit_w2": emission_probability(rho_bar_1, {2}, H, channels),
        "double_w2": emission_probability(rho_bar_2, {2}, H, channels),
    }
    return EmissionIntegrals(P, single_light_rate(spec), unit_intensity_rate(spec, C[3]), rho_bar_1)


def appendix_rates(spec: SystemSpec, C: dict | None = None) -> RateMatrix:
    """Rate matrix from photon fluxes times next-photon probabilities.

    Unit-intensity periods emit at the single-emitter rate ``I_L``; double
    intensity periods at ``unit_intensity_rate``.  Dark periods end with
    survival probability ``exp(-2 A_1 t)``.
    """
    C = coupling_constants(spec) if C is None else C
    E = emission_integrals(spec, C)
    p01 = 2 * spec.einstein_A[1]
    p10 = E.I_L * E.P["unit_w2"]
    p12 = E.I_L * E.P["unit_w1"]
    p21 = E.I_ss2 * E.P["double_w2"]
    return RateMatrix.from_offdiagonal(p01, p10, p12, p21)


def single_system_p10(spec: SystemSpec) -> float:
    """Shelving rate of one emitter: light-period rate times ``P_w2`` from |1>."""
    one = np.diag([1.0, 0.0, 0.0]).astype(complex)
    return single_light_rate(spec) * emission_probability(one, {2}, single_hcond(spec), single_channels(spec))
