"""Level schemes, physical parameters, the Dicke basis and dipole couplings.

Units: rates in 1/s with hbar = 1.  Distances and wavelengths share one
(arbitrary) length unit; only ``k_j r`` enters.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping

import numpy as np


class Scheme(str, enum.Enum):
    TWO_D = "two_d"
    FOUR_LEVEL = "four_level"


# (upper, lower) level of every dipole transition, keyed by transition index.
TRANSITIONS: dict[Scheme, dict[int, tuple[int, int]]] = {
    Scheme.TWO_D: {1: (2, 1), 2: (3, 2), 3: (3, 1)},
    Scheme.FOUR_LEVEL: {1: (2, 1), 2: (4, 2), 3: (3, 1), 4: (4, 1)},
}

N_LEVELS = {Scheme.TWO_D: 3, Scheme.FOUR_LEVEL: 4}

# Approximate line wavelengths in units of the strong-transition wavelength.
# Hg+: 194 nm (strong), 282 nm (clock), ~10.7 um (3 -> 2).
HG_WAVELENGTHS = {1: 282.0 / 194.2, 2: 10700.0 / 194.2, 3: 1.0}
# Ba+: 493 nm (strong), 455 nm (4 -> 1), 614 nm (4 -> 2), 1762 nm (2 -> 1).
BA_WAVELENGTHS = {1: 1762.0 / 493.4, 2: 614.2 / 493.4, 3: 1.0, 4: 455.4 / 493.4}

C2_PLACEMENTS = ("paper", "transition_42")


@dataclass(frozen=True)
class SystemSpec:
    """All physical parameters of a two-emitter configuration.

    ``einstein_A``, ``wavelengths`` and ``angles_theta`` are keyed by
    transition index (see ``TRANSITIONS``).  ``c2_shift_placement`` only
    matters for the four-level scheme: it selects where the Im C_2 level
    shift sits in the conditional Hamiltonian.
    """

    scheme: Scheme
    einstein_A: Mapping[int, float]
    rabi_omega3: float
    detuning_delta3: float = 0.0
    lamp_W: float = 0.0
    distance_r: float = 1.0
    wavelengths: Mapping[int, float] = field(default_factory=dict)
    angles_theta: Mapping[int, float] = field(default_factory=dict)
    c2_shift_placement: str = "paper"

    def __post_init__(self):
        scheme = Scheme(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        keys = set(TRANSITIONS[scheme])
        A = {int(k): float(v) for k, v in self.einstein_A.items()}
        if set(A) != keys:
            raise ValueError(f"einstein_A must define transitions {sorted(keys)}, got {sorted(A)}")
        lam = {int(k): float(v) for k, v in self.wavelengths.items()}
        if not lam:
            lam = dict(HG_WAVELENGTHS if scheme is Scheme.TWO_D else BA_WAVELENGTHS)
        if set(lam) != keys:
            raise ValueError(f"wavelengths must define transitions {sorted(keys)}")
        theta = {k: np.pi / 2 for k in keys}
        theta.update({int(k): float(v) for k, v in self.angles_theta.items()})
        object.__setattr__(self, "einstein_A", A)
        object.__setattr__(self, "wavelengths", lam)
        object.__setattr__(self, "angles_theta", theta)

        for j, a in A.items():
            if not a >= 0:
                raise ValueError(f"A_{j} must be >= 0 (got {a})")
        if not self.rabi_omega3 >= 0:
            raise ValueError(f"rabi_omega3 must be >= 0 (got {self.rabi_omega3})")
        if not self.lamp_W >= 0:
            raise ValueError(f"lamp_W must be >= 0 (got {self.lamp_W})")
        if scheme is Scheme.TWO_D and self.lamp_W != 0:
            raise ValueError("lamp_W is only defined for the four-level scheme")
        if not self.distance_r > 0:
            raise ValueError(f"distance_r must be > 0 (got {self.distance_r})")
        for j, v in lam.items():
            if not v > 0:
                raise ValueError(f"lambda_{j} must be > 0 (got {v})")
        if self.c2_shift_placement not in C2_PLACEMENTS:
            raise ValueError(f"c2_shift_placement must be one of {C2_PLACEMENTS}")

    @property
    def n_levels(self) -> int:
        return N_LEVELS[self.scheme]

    @property
    def transitions(self) -> dict[int, tuple[int, int]]:
        return TRANSITIONS[self.scheme]

    @property
    def A(self) -> Mapping[int, float]:
        return self.einstein_A

    def wavenumber(self, j: int) -> float:
        return 2 * np.pi / self.wavelengths[j]

    def with_distance(self, r: float) -> "SystemSpec":
        return replace(self, distance_r=r)

    def scaled(self, kappa: float) -> "SystemSpec":
        """Compress timescales: multiply A_1, A_2 (and W) by ``kappa``."""
        if kappa < 1:
            raise ValueError("kappa must be >= 1")
        A = dict(self.einstein_A)
        A[1] *= kappa
        A[2] *= kappa
        return replace(self, einstein_A=A, lamp_W=self.lamp_W * kappa)

    def regime_ok(self, factor: float = 10.0) -> bool:
        """Whether A_3 and Omega_3 exceed the slow rates by ``factor``."""
        A = self.einstein_A
        slow = max(A[1], A[2]) if self.scheme is Scheme.TWO_D else max(A[1], self.lamp_W)
        return min(A[3], self.rabi_omega3) >= factor * slow

    @classmethod
    def two_d(cls, A1=1.0, A2=1.0, A3=4e8, omega3=5e7, delta3=0.0, r=1.0, **kw) -> "SystemSpec":
        """Two D systems; defaults are the Hg+ reference parameters."""
        return cls(Scheme.TWO_D, {1: A1, 2: A2, 3: A3}, omega3, delta3, 0.0, r, **kw)

    @classmethod
    def four_level(
        cls, A1=0.03, A2=3e7, A3=4e8, A4=1e8, omega3=None, delta3=0.0, W=1.0, r=1.0, **kw
    ) -> "SystemSpec":
        """Two four-level systems.

        The experimental constants are not available, so the defaults are
        placeholders: a metastable level living about 30 s, a 4 -> 2
        branching ratio near 0.23 and the strong-line rate of the D-system
        defaults.  When ``omega3`` is None the optimal Rabi frequency is
        used.
        """
        if omega3 is None:
            omega3 = 0.5 * np.sqrt(np.sqrt(5) - 1) * np.sqrt(A3**2 + 4 * delta3**2)
        return cls(Scheme.FOUR_LEVEL, {1: A1, 2: A2, 3: A3, 4: A4}, omega3, delta3, W, r, **kw)


def dipole_coupling(A_j: float, lambda_j: float, r: float, theta_j: float = np.pi / 2) -> complex:
    """Complex dipole-dipole coupling constant C_j at distance ``r``.

    Re C_j modifies the collective decay rates, Im C_j shifts the
    symmetric and antisymmetric Dicke levels in opposite directions.
    """
    if not r > 0:
        raise ValueError(f"distance must be > 0 (got {r})")
    if not lambda_j > 0:
        raise ValueError(f"wavelength must be > 0 (got {lambda_j})")
    if A_j < 0:
        raise ValueError(f"Einstein coefficient must be >= 0 (got {A_j})")
    x = 2 * np.pi / lambda_j * r
    c2 = np.cos(theta_j) ** 2
    bracket = (1 - c2) / (1j * x) + (1 / x**2 - 1 / (1j * x**3)) * (1 - 3 * c2)
    return complex(1.5 * A_j * np.exp(1j * x) * bracket)


def coupling_constants(spec: SystemSpec, r: float | None = None) -> dict[int, complex]:
    r = spec.distance_r if r is None else r
    return {
        j: dipole_coupling(spec.einstein_A[j], spec.wavelengths[j], r, spec.angles_theta[j])
        for j in spec.transitions
    }


def zero_couplings(spec: SystemSpec) -> dict[int, complex]:
    return {j: 0j for j in spec.transitions}


@dataclass(frozen=True)
class DickeBasis:
    """Two-emitter basis ``g, e_j, (s_ij, a_ij)`` with subspace partition.

    ``subspaces[i]`` lists the indices of the invariant sector that carries
    the intensity-``i`` quasi-stationary state.  For the four-level scheme
    the states holding level 4 are transient and listed in ``transient``.
    """

    scheme: Scheme
    labels: tuple[str, ...]
    to_product: np.ndarray  # columns are Dicke states in the product basis
    subspaces: tuple[tuple[int, ...], ...]
    transient: tuple[int, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def n_levels(self) -> int:
        return N_LEVELS[self.scheme]

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def ket(self, label: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index_of(label)] = 1
        return v

    def proj(self, *labels: str) -> np.ndarray:
        P = np.zeros((self.dim, self.dim), dtype=complex)
        for lab in labels:
            k = self.index_of(lab)
            P[k, k] = 1
        return P

    def ketbra(self, a: str, b: str) -> np.ndarray:
        M = np.zeros((self.dim, self.dim), dtype=complex)
        M[self.index_of(a), self.index_of(b)] = 1
        return M

    def from_product(self, op: np.ndarray) -> np.ndarray:
        U = self.to_product
        return U.conj().T @ op @ U

    def level_count(self, level: int) -> np.ndarray:
        """Operator counting emitters in ``level`` (1-based), Dicke basis."""
        n = self.n_levels
        p = np.zeros((n, n))
        p[level - 1, level - 1] = 1
        eye = np.eye(n)
        return self.from_product(np.kron(p, eye) + np.kron(eye, p))

    def sector_of(self, index: int) -> int | None:
        for i, s in enumerate(self.subspaces):
            if index in s:
                return i
        return None


@lru_cache(maxsize=None)
def _basis(scheme: Scheme) -> DickeBasis:
    n = N_LEVELS[scheme]
    labels = ["g"] + [f"e{j}" for j in range(2, n + 1)]
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    for i, j in pairs:
        labels += [f"s{i}{j}", f"a{i}{j}"]

    def prod(i, j):
        v = np.zeros(n * n, dtype=complex)
        v[(i - 1) * n + (j - 1)] = 1
        return v

    cols = [prod(1, 1)] + [prod(j, j) for j in range(2, n + 1)]
    for i, j in pairs:
        cols.append((prod(i, j) + prod(j, i)) / np.sqrt(2))
        cols.append((prod(i, j) - prod(j, i)) / (np.sqrt(2) * 1j))
    U = np.array(cols).T
    U.setflags(write=False)

    idx = {lab: k for k, lab in enumerate(labels)}
    s0 = ("e2",)
    s1 = ("s12", "a12", "s23", "a23")
    s2 = ("g", "s13", "a13", "e3")
    subspaces = tuple(tuple(sorted(idx[x] for x in s)) for s in (s0, s1, s2))
    covered = set().union(*subspaces)
    transient = tuple(k for k in range(len(labels)) if k not in covered)
    return DickeBasis(scheme, tuple(labels), U, subspaces, transient)


def build_basis(scheme: Scheme | str) -> DickeBasis:
    """Dicke basis ordered as g, e_j ascending, then (s_ij, a_ij) pairs."""
    return _basis(Scheme(scheme))
