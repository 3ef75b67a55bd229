"""Conditional Hamiltonian, jump channels and the dense Bloch generator.

Superoperators act on column-stacked density matrices,
``vec(rho) = rho.reshape(-1, order="F")``, so that ``A rho B^dagger``
becomes ``kron(B.conj(), A) @ vec(rho)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import Scheme, SystemSpec, build_basis, coupling_constants, DickeBasis

VECTORIZATION = "column-stacking"

PHOTON_LABELS = {1: "photon_w1", 2: "photon_w2", 3: "photon_w3", 4: "photon_w4"}


@dataclass(frozen=True)
class ConditionalHamiltonian:
    matrix: np.ndarray
    scheme: Scheme

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class JumpChannel:
    """Reset operator with its rate; ``transition`` is 0 for lamp channels."""

    operator: np.ndarray
    rate: float
    emission_label: str
    name: str
    transition: int = 0


@dataclass(frozen=True)
class Superoperator:
    """Dense generator split as ``full = l0 + l1``.

    ``l0_coupling`` is the part of ``l0`` carrying C_2 and C_4 in the
    four-level scheme (zero for two D systems); the dual states are
    computed perturbatively in it.
    """

    full: np.ndarray
    l0: np.ndarray
    l1: np.ndarray
    l0_coupling: np.ndarray
    scheme: Scheme
    dim: int
    convention: str = VECTORIZATION


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    dim = int(round(np.sqrt(v.size))) if dim is None else dim
    return np.asarray(v).reshape(dim, dim, order="F")


def sandwich(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> A rho B^dagger``."""
    return np.kron(B.conj(), A)


def trace_functional(dim: int) -> np.ndarray:
    return vec(np.eye(dim))


def apply(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return unvec(L @ vec(rho), d)


def _collective_ops(basis: DickeBasis, upper: int, lower: int):
    n = basis.n_levels
    s = np.zeros((n, n))
    s[lower - 1, upper - 1] = 1
    eye = np.eye(n)
    sA = basis.from_product(np.kron(s, eye))
    sB = basis.from_product(np.kron(eye, s))
    # the -1j makes R_- agree with the tabulated phase convention
    R_plus = (sA + sB) / np.sqrt(2)
    R_minus = -1j * (sA - sB) / np.sqrt(2)
    exchange = sA.conj().T @ sB + sB.conj().T @ sA
    return sA, sB, R_plus, R_minus, exchange


def reset_operators(scheme: Scheme | str, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and antisymmetric reset operators R_+^(j), R_-^(j)."""
    from .model import TRANSITIONS

    scheme = Scheme(scheme)
    upper, lower = TRANSITIONS[scheme][j]
    _, _, Rp, Rm, _ = _collective_ops(build_basis(scheme), upper, lower)
    return Rp, Rm


def build_reset_channels(
    spec: SystemSpec, C: dict[int, complex] | None = None, *, clamp: bool = True
) -> list[JumpChannel]:
    """Jump channels ``(A_j +- Re C_j, R_+-^(j))`` plus the lamp channels.

    Negative rates ``A_j - Re C_j`` (unphysically small distances) are
    clamped to zero with a warning unless ``clamp`` is False.
    """
    C = coupling_constants(spec) if C is None else C
    basis = build_basis(spec.scheme)
    channels = []
    for j, (upper, lower) in spec.transitions.items():
        _, _, Rp, Rm, _ = _collective_ops(basis, upper, lower)
        A, re = spec.einstein_A[j], float(np.real(C[j]))
        for sign, R in (("+", Rp), ("-", Rm)):
            rate = A + re if sign == "+" else A - re
            if rate < 0 and clamp:
                warnings.warn(
                    f"rate A_{j} {sign} Re C_{j} = {rate:.3g} < 0 clamped to 0", RuntimeWarning
                )
                rate = 0.0
            channels.append(JumpChannel(R, rate, PHOTON_LABELS[j], f"R{sign}{j}", j))
    if spec.scheme is Scheme.FOUR_LEVEL:
        _, _, Rp, Rm, _ = _collective_ops(basis, 4, 1)
        W = spec.lamp_W
        channels += [
            JumpChannel(Rp, W, "lamp_down", "W4+", 0),
            JumpChannel(Rm, W, "lamp_down", "W4-", 0),
            JumpChannel(Rp.conj().T, W, "lamp_up", "W4+dag", 0),
            JumpChannel(Rm.conj().T, W, "lamp_up", "W4-dag", 0),
        ]
    return channels


def build_hcond(
    spec: SystemSpec,
    C: dict[int, complex] | None = None,
    channels: list[JumpChannel] | None = None,
) -> ConditionalHamiltonian:
    """Conditional (no-emission) Hamiltonian in the Dicke basis.

    The anti-Hermitian part is ``-(i/2) sum_k rate_k R_k^dag R_k`` over
    ``channels``; the Hermitian part holds the laser coupling, the detuning
    on level 3 and the Im C_j level shifts.
    """
    C = coupling_constants(spec) if C is None else C
    if set(C) != set(spec.transitions):
        raise ValueError(f"couplings {sorted(C)} do not match scheme {spec.scheme.value}")
    channels = build_reset_channels(spec, C) if channels is None else channels
    basis = build_basis(spec.scheme)
    d = basis.dim

    H = spec.detuning_delta3 * basis.level_count(3)
    for j, (upper, lower) in spec.transitions.items():
        _, _, _, _, X = _collective_ops(basis, upper, lower)
        if spec.scheme is Scheme.FOUR_LEVEL and j == 2 and spec.c2_shift_placement == "paper":
            X = basis.proj("s23") - basis.proj("a23")
        H = H + 0.5 * np.imag(C[j]) * X
    sA, sB, _, _, _ = _collective_ops(basis, 3, 1)
    drive = sA + sB
    H = H + 0.5 * spec.rabi_omega3 * (drive + drive.conj().T)

    decay = np.zeros((d, d), dtype=complex)
    for ch in channels:
        decay += ch.rate * (ch.operator.conj().T @ ch.operator)
    M = H.astype(complex) - 0.5j * decay
    M.setflags(write=False)
    return ConditionalHamiltonian(M, spec.scheme)


def assemble_liouvillian(H: ConditionalHamiltonian | np.ndarray, channels: list[JumpChannel]) -> np.ndarray:
    """Generator of ``rho -> -i(H rho - rho H^dag) + sum_k rate_k R_k rho R_k^dag``."""
    Hm = H.matrix if isinstance(H, ConditionalHamiltonian) else np.asarray(H)
    d = Hm.shape[0]
    eye = np.eye(d)
    L = -1j * (np.kron(eye, Hm) - np.kron(Hm.conj(), eye))
    for ch in channels:
        if ch.operator.shape != (d, d):
            raise ValueError(f"channel {ch.name} has shape {ch.operator.shape}, expected {(d, d)}")
        if ch.rate:
            L = L + ch.rate * sandwich(ch.operator, ch.operator)
    return L


# Parameters treated as perturbation (L1) and, for four levels, the
# couplings treated perturbatively inside L0.
_PERT = {
    Scheme.TWO_D: dict(A=(1, 2), C=(1, 2), W=False),
    Scheme.FOUR_LEVEL: dict(A=(1,), C=(1,), W=True),
}


def _restrict(spec: SystemSpec, C: dict, A_keep, C_keep, keep_W: bool, keep_drive: bool):
    A = {j: (a if j in A_keep else 0.0) for j, a in spec.einstein_A.items()}
    sub = replace(
        spec,
        einstein_A=A,
        rabi_omega3=spec.rabi_omega3 if keep_drive else 0.0,
        detuning_delta3=spec.detuning_delta3 if keep_drive else 0.0,
        lamp_W=spec.lamp_W if keep_W else 0.0,
    )
    return sub, {j: (c if j in C_keep else 0j) for j, c in C.items()}


def _generator(spec, C):
    channels = build_reset_channels(spec, C, clamp=False)
    return assemble_liouvillian(build_hcond(spec, C, channels), channels)


def build_superoperator(spec: SystemSpec, C: dict[int, complex] | None = None) -> Superoperator:
    """Dense generator with the perturbative split ``full = l0 + l1``.

    Two D systems: l1 carries A_1, A_2, C_1, C_2.  Four levels: l1 carries
    A_1, C_1 and the lamp W; ``l0_coupling`` isolates C_2, C_4 within l0.
    The generator is linear in the split parameters, so each part is built
    by switching the others off.
    """
    C = coupling_constants(spec) if C is None else dict(C)
    pert = _PERT[spec.scheme]
    all_j = tuple(spec.transitions)
    rest_A = tuple(j for j in all_j if j not in pert["A"])
    rest_C = tuple(j for j in all_j if j not in pert["C"])

    l1 = _generator(*_restrict(spec, C, pert["A"], pert["C"], pert["W"], keep_drive=False))
    l0 = _generator(*_restrict(spec, C, rest_A, rest_C, False, keep_drive=True))
    if spec.scheme is Scheme.FOUR_LEVEL:
        l0_coupling = _generator(*_restrict(spec, C, (), (2, 4), False, keep_drive=False))
    else:
        l0_coupling = np.zeros_like(l0)

    raw = build_reset_channels(spec, C, clamp=False)
    if any(ch.rate < 0 for ch in raw):
        # clamped rates break linearity; the split then holds only approximately
        channels = build_reset_channels(spec, C)
        full = assemble_liouvillian(build_hcond(spec, C, channels), channels)
    else:
        full = l0 + l1
    for m in (full, l0, l1, l0_coupling):
        m.setflags(write=False)
    return Superoperator(full, l0, l1, l0_coupling, spec.scheme, build_basis(spec.scheme).dim)


def dump_liouvillian(sup: Superoperator, path, *, tol: float = 0.0) -> None:
    """Write nonzero entries of ``sup.full`` as ``i j re im`` rows."""
    L = sup.full
    with open(path, "w") as fh:
        fh.write(f"# scheme {sup.scheme.value}\n# dim {sup.dim}\n# convention {sup.convention}\n")
        rows, cols = np.nonzero(np.abs(L) > tol)
        for i, j in zip(rows, cols):
            z = L[i, j]
            fh.write(f"{i} {j} {z.real:.17g} {z.imag:.17g}\n")


def load_liouvillian(path) -> np.ndarray:
    header = {}
    entries = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(" ")
                header[key] = val
            elif line.strip():
                i, j, re, im = line.split()
                entries.append((int(i), int(j), float(re) + 1j * float(im)))
    n = int(header["dim"]) ** 2
    L = np.zeros((n, n), dtype=complex)
    for i, j, z in entries:
        L[i, j] = z
    return L
