"""Quasi-stationary states, dual states and transition rates between periods.

The slow rates follow from first-order perturbation theory around the
fast generator ``L0``: with right null states ``rho_ss,i`` and dual (left)
null states ``rho^j``, ``alpha_ij = Tr(rho^j^dag L1 rho_ss,i)`` is the rate
from intensity class ``i`` to ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .liouville import Superoperator, build_superoperator, unvec, vec
from .model import DickeBasis, Scheme, SystemSpec, build_basis, coupling_constants

NULL_TOL = 1e-8


class DegeneracyError(RuntimeError):
    """The fast generator does not have exactly three zero modes."""


@dataclass(frozen=True)
class QuasiStationarySet:
    rho_ss: tuple[np.ndarray, np.ndarray, np.ndarray]
    duals: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    first_order: bool = False
    closed_form: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def biorthonormality(self) -> np.ndarray:
        """Matrix ``Tr(rho^i^dag rho_ss,j)``; the identity for a valid set."""
        return np.array([[np.vdot(vec(d), vec(r)) for r in self.rho_ss] for d in self.duals])


@dataclass(frozen=True)
class RateMatrix:
    """Rates ``p[i, j]`` from intensity class i to j, diagonal = -outflow.

    ``alpha`` keeps the raw perturbative coefficients (None for closed
    forms); ``imag_residue`` is max |Im alpha_ij| relative to max |alpha|.
    """

    p: np.ndarray
    alpha: np.ndarray | None = None
    imag_residue: float = 0.0

    @classmethod
    def from_offdiagonal(cls, p01, p10, p12, p21, p02=0.0, p20=0.0, **kw) -> "RateMatrix":
        p = np.array([[0.0, p01, p02], [p10, 0.0, p12], [p20, p21, 0.0]])
        np.fill_diagonal(p, -p.sum(axis=1))
        return cls(p, **kw)

    def __getitem__(self, ij):
        return self.p[ij]

    p01 = property(lambda self: self.p[0, 1])
    p10 = property(lambda self: self.p[1, 0])
    p12 = property(lambda self: self.p[1, 2])
    p21 = property(lambda self: self.p[2, 1])

    def alpha_row_sums(self) -> np.ndarray:
        if self.alpha is None:
            return self.p.sum(axis=1)
        return self.alpha.sum(axis=1)

    def stationary(self) -> np.ndarray:
        """Stationary occupation of the three-state chain."""
        A = np.vstack([self.p.T, np.ones(3)])
        b = np.array([0, 0, 0, 1.0])
        return np.linalg.lstsq(A, b, rcond=None)[0]


def _sector_vec_indices(sector, d):
    return np.array([a + b * d for b in sector for a in sector])


def exchange_projector(basis: DickeBasis) -> np.ndarray:
    """Superoperator projecting onto exchange-symmetric operators.

    The swap of the two emitters is diagonal in the Dicke basis (-1 on the
    antisymmetric states).  The generator commutes with it.
    """
    sign = np.array([-1.0 if lab.startswith("a") else 1.0 for lab in basis.labels])
    return np.diag(0.5 * (1 + np.kron(sign, sign))).astype(complex)


def symmetric_part(L: np.ndarray, basis: DickeBasis) -> np.ndarray:
    """``L`` with the exchange-antisymmetric operator sector shifted away from 0.

    In the unit-intensity sector the difference "emitter A shelved minus
    emitter B shelved" is an exact, antisymmetric zero mode; shifting that
    sector by ``-max|L|`` leaves only the three physical zero modes.
    """
    Pi = exchange_projector(basis)
    return L - np.abs(L).max() * (np.eye(L.shape[0]) - Pi)


def zero_modes(L0: np.ndarray, tol: float = NULL_TOL) -> np.ndarray:
    ev = np.linalg.eigvals(L0)
    scale = np.abs(L0).max()
    return ev[np.abs(ev) < tol * scale]


def _null_vector(M: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(M)
    return vh[-1].conj()


def quasi_stationary_states(
    L0: Superoperator | np.ndarray,
    basis: DickeBasis,
    spec: SystemSpec | None = None,
    *,
    check_degeneracy: bool = True,
) -> QuasiStationarySet:
    """Null states of ``L0``, one per invariant sector, unit trace.

    Each state is found by restricting ``L0`` to operators supported on the
    sector.  If ``spec`` is given the closed forms are attached for
    comparison.
    """
    L = L0.l0 if isinstance(L0, Superoperator) else np.asarray(L0)
    L = symmetric_part(L, basis)
    d = basis.dim
    if check_degeneracy:
        zeros = zero_modes(L)
        if len(zeros) != 3:
            ev = np.sort(np.abs(np.linalg.eigvals(L)))
            raise DegeneracyError(
                f"expected 3 zero modes, found {len(zeros)}; smallest |eigenvalues|: {ev[:6]}"
            )
    states = []
    for sector in basis.subspaces:
        idx = _sector_vec_indices(sector, d)
        block = L[np.ix_(idx, idx)]
        v = np.zeros(d * d, dtype=complex)
        v[idx] = _null_vector(block)
        rho = unvec(v, d)
        rho = rho / np.trace(rho)
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        states.append(rho)
    closed = closed_form_rho_ss(spec) if spec is not None else None
    return QuasiStationarySet(tuple(states), closed_form=closed)


def _biorthonormalize(D: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Recombine the columns of D (spanning the dual space) so D^H R = 1."""
    M = np.linalg.inv(D.conj().T @ R).conj().T
    return D @ M


def left_null_space(L: np.ndarray, k: int = 3) -> np.ndarray:
    u, _, _ = np.linalg.svd(L)
    return u[:, -k:]


def dual_states(
    qss: QuasiStationarySet,
    sup: Superoperator,
    basis: DickeBasis,
    mode: str = "auto",
) -> QuasiStationarySet:
    """Attach the dual states ``rho^i`` with ``L0^dag rho^i = 0``.

    Modes: ``closed`` (sector projector sums; two D systems only),
    ``numeric`` (left null space of the complete L0), ``first_order``
    (zeroth-order duals of L0 without C_2, C_4 plus the first-order
    correction from one linear solve per state).  ``auto`` picks
    ``closed`` for two D systems and ``first_order`` for four levels.
    """
    d = basis.dim
    R = np.array([vec(r) for r in qss.rho_ss]).T
    if mode == "auto":
        mode = "closed" if sup.scheme is Scheme.TWO_D else "first_order"

    if mode == "closed":
        if sup.scheme is not Scheme.TWO_D:
            raise ValueError("closed-form duals exist only for two D systems")
        duals = []
        for sector in basis.subspaces:
            P = np.zeros((d, d), dtype=complex)
            P[sector, sector] = 1
            duals.append(P)
        return QuasiStationarySet(qss.rho_ss, tuple(duals), False, qss.closed_form)

    if mode == "numeric":
        D = _biorthonormalize(left_null_space(symmetric_part(sup.l0, basis)), R)
        duals = tuple(unvec(D[:, i], d) for i in range(3))
        return QuasiStationarySet(qss.rho_ss, duals, False, qss.closed_form)

    if mode != "first_order":
        raise ValueError(f"unknown dual mode {mode!r}")

    L00 = symmetric_part(sup.l0 - sup.l0_coupling, basis)
    A = L00.conj().T
    D0 = _biorthonormalize(left_null_space(L00), R)
    rhs = -sup.l0_coupling.conj().T @ D0
    if np.abs(rhs).max() == 0:
        D = D0
    else:
        delta, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        resid = np.abs(A @ delta - rhs).max()
        if resid > 1e-8 * max(np.abs(rhs).max(), 1e-300):
            # the perturbative system is inconsistent; use the exact left null space
            D = _biorthonormalize(left_null_space(symmetric_part(sup.l0, basis)), R)
            duals = tuple(unvec(D[:, i], d) for i in range(3))
            return QuasiStationarySet(qss.rho_ss, duals, False, qss.closed_form)
        D1 = D0 + delta
        B = D0.conj().T @ R
        Mh = (np.eye(3) - D1.conj().T @ R) @ np.linalg.inv(B)
        D = D1 + D0 @ Mh.conj().T
    duals = tuple(unvec(D[:, i], d) for i in range(3))
    return QuasiStationarySet(qss.rho_ss, duals, True, qss.closed_form)


def transition_rates_perturbative(qss: QuasiStationarySet, L1: Superoperator | np.ndarray) -> RateMatrix:
    """``p_ij = Re Tr(rho^j^dag L1 rho_ss,i)`` for i != j."""
    L = L1.l1 if isinstance(L1, Superoperator) else np.asarray(L1)
    if qss.duals is None:
        raise ValueError("dual states missing; call dual_states first")
    alpha = np.array(
        [[np.vdot(vec(dj), L @ vec(ri)) for dj in qss.duals] for ri in qss.rho_ss]
    )
    off = ~np.eye(3, dtype=bool)
    scale = np.abs(alpha).max() or 1.0
    residue = float(np.abs(alpha.imag[off]).max() / scale)
    p = np.where(off, alpha.real, 0.0)
    np.fill_diagonal(p, -p.sum(axis=1))
    return RateMatrix(p, alpha, residue)


def perturbative_rates(
    spec: SystemSpec, C: dict[int, complex] | None = None, dual_mode: str = "auto"
) -> RateMatrix:
    """Rate matrix from the perturbative route for one parameter point."""
    basis = build_basis(spec.scheme)
    sup = build_superoperator(spec, C)
    qss = quasi_stationary_states(sup, basis)
    qss = dual_states(qss, sup, basis, dual_mode)
    return transition_rates_perturbative(qss, sup)


def _aux(spec: SystemSpec, C3: complex):
    A3, Om, Dl = spec.einstein_A[3], spec.rabi_omega3, spec.detuning_delta3
    a = A3**2 + Om**2 + 4 * Dl**2
    b = A3**2 + 2 * Om**2 + 4 * Dl**2
    c = A3**2 + 4 * Dl**2
    X = abs(C3) ** 2 + 2 * A3 * C3.real + 4 * Dl * C3.imag
    X1 = 2 * A3 * C3.real + 4 * Dl * C3.imag
    return a, b, c, X, X1


def closed_form_rates(
    spec: SystemSpec, C: dict[int, complex] | None = None, *, expanded: bool = False
) -> RateMatrix:
    """Closed-form transition rates; ``expanded`` keeps C_3 to first order."""
    C = coupling_constants(spec) if C is None else C
    A1, A2 = spec.einstein_A[1], spec.einstein_A[2]
    Om = spec.rabi_omega3
    a, b, c, X, X1 = _aux(spec, complex(C[3]))
    if spec.scheme is Scheme.TWO_D:
        p10 = A2 * Om**2 / b
        if expanded:
            p21 = 2 * A2 * Om**2 / b * (1 - X1 * c / b**2)
        else:
            p21 = 2 * A2 * Om**2 * b / (b**2 + c * X)
    else:
        A4, W = spec.einstein_A[4], spec.lamp_W
        branch = A2 * W / (A2 + A4)
        p10 = branch * a / b
        if expanded:
            p21 = 2 * branch * (a / b + X1 * c * Om**2 / b**3)
        else:
            p21 = 2 * branch * (a * b + c * X) / (b**2 + c * X)
    return RateMatrix.from_offdiagonal(2 * A1, p10, A1, p21)


def closed_form_rho_ss(spec: SystemSpec, C: dict[int, complex] | None = None):
    """Quasi-stationary states of the dark, unit and double intensity class."""
    C = coupling_constants(spec) if C is None else C
    C3 = complex(C[3])
    basis = build_basis(spec.scheme)
    A3, Om, Dl = spec.einstein_A[3], spec.rabi_omega3, spec.detuning_delta3
    a, b, c, X, _ = _aux(spec, C3)
    P, K = basis.proj, basis.ketbra

    rho0 = P("e2")

    coh = 0.5 * (1j * A3 - 2 * Dl) * Om / b * (K("s12", "s23") - K("a12", "a23"))
    rho1 = 0.5 * a / b * P("s12", "a12") + 0.5 * Om**2 / b * P("s23", "a23") + coh + coh.conj().T

    N = b**2 + c * X
    pref = Om * (1j * A3 - 2 * Dl)
    coh2 = pref * (
        np.sqrt(2) * (a + (A3 - 2j * Dl) * C3) * K("g", "s13")
        + Om * (1j * A3 - 2 * Dl + 1j * C3) * K("g", "e3")
        + np.sqrt(2) * Om**2 * K("s13", "e3")
    )
    rho2 = (
        (N - Om**2 * (2 * A3**2 + 3 * Om**2 + 8 * Dl**2)) * P("g")
        + Om**2 * (2 * A3**2 + Om**2 + 8 * Dl**2) * P("s13")
        + Om**4 * P("e3", "a13")
        + coh2
        + coh2.conj().T
    ) / N
    return rho0, rho1, rho2


def double_jump_rate(p: RateMatrix | np.ndarray, delta_T: float = 1e-3) -> float:
    """Rate of jumps by two intensity steps within ``delta_T``."""
    P = p.p if isinstance(p, RateMatrix) else np.asarray(p)
    if not delta_T > 0:
        raise ValueError("delta_T must be > 0")
    p01, p10, p12, p21 = P[0, 1], P[1, 0], P[1, 2], P[2, 1]
    den = p01 * p21 + p21 * p10 + p01 * p12
    if den == 0:
        raise ZeroDivisionError("all transition rates vanish")
    return 2 * p10 * p01 * p12 * p21 / den * delta_T


def optimal_rabi(A3: float, delta3: float = 0.0) -> float:
    """Rabi frequency maximising the relative first-order C_3 effect on p_21."""
    if not A3 > 0:
        raise ValueError("A3 must be > 0")
    return 0.5 * np.sqrt(np.sqrt(5) - 1) * np.sqrt(A3**2 + 4 * delta3**2)


SWEEP_COLUMNS = (
    "r_over_lambda3", "p01", "p10", "p12", "p21", "p21_closed", "nDJ",
    "p21_indep", "nDJ_indep", "rel_dev_p21", "rel_dev_nDJ",
)


def rate_sweep(
    spec: SystemSpec,
    r_over_lambda3,
    *,
    delta_T: float = 1e-3,
    zero_coupling: bool = False,
    dual_mode: str = "auto",
) -> dict[str, np.ndarray]:
    """Perturbative rates and n_DJ against distance, with the C = 0 baseline.

    Distances are given in units of the strong-line wavelength.  The
    baseline uses the same perturbative route with all couplings off, so
    ``zero_coupling=True`` gives relative deviations that vanish exactly.
    """
    r = np.atleast_1d(np.asarray(r_over_lambda3, dtype=float))
    if np.any(r <= 0):
        raise ValueError("distances must be > 0")
    zero = {j: 0j for j in spec.transitions}
    base = perturbative_rates(spec, zero, dual_mode)
    p21_0, n_0 = base.p21, double_jump_rate(base, delta_T)
    out = {k: np.empty(len(r)) for k in SWEEP_COLUMNS}
    out["r_over_lambda3"][:] = r
    for i, x in enumerate(r):
        s = spec.with_distance(x * spec.wavelengths[3])
        C = zero if zero_coupling else coupling_constants(s)
        p = perturbative_rates(s, C, dual_mode)
        n = double_jump_rate(p, delta_T)
        out["p01"][i], out["p10"][i], out["p12"][i], out["p21"][i] = p.p01, p.p10, p.p12, p.p21
        out["p21_closed"][i] = closed_form_rates(s, C).p21
        out["nDJ"][i] = n
        out["p21_indep"][i] = p21_0
        out["nDJ_indep"][i] = n_0
        out["rel_dev_p21"][i] = p.p21 / p21_0 - 1
        out["rel_dev_nDJ"][i] = n / n_0 - 1
    return out
