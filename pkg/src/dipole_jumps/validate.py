"""Invariant suite behind ``--mode validate``.

Residuals are relative to the natural scale of each object (the largest
generator entry, the largest rate), because absolute residuals of a
generator with entries near 1e9 s^-1 sit at ~1e-7 in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .liouville import assemble_liouvillian, build_hcond, build_reset_channels, build_superoperator, unvec, vec
from .model import Scheme, SystemSpec, build_basis, coupling_constants
from .rates import closed_form_rates, dual_states, perturbative_rates, quasi_stationary_states


@dataclass
class Check:
    name: str
    residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)


@dataclass
class Report:
    checks: list = field(default_factory=list)

    def add(self, name, residual, tol):
        self.checks.append(Check(name, float(residual), float(tol)))

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def text(self) -> str:
        lines = [f"{'PASS' if c.ok else 'FAIL'} {c.name}: residual {c.residual:.3e} (tol {c.tol:.1e})"
                 for c in self.checks]
        lines.append(f"{'ALL PASS' if self.ok else 'FAILED'} ({sum(c.ok for c in self.checks)}/{len(self.checks)})")
        return "\n".join(lines) + "\n"


def random_density_matrices(d, n, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = X @ X.conj().T
        yield rho / np.trace(rho).real


def generator_checks(spec: SystemSpec, report: Report, *, fault: str | None = None, n_random: int = 100):
    """Trace and Hermiticity preservation, decay identity, split, sectors."""
    C = coupling_constants(spec)
    channels = build_reset_channels(spec, C)
    H = build_hcond(spec, C, channels)
    jumps = channels
    if fault == "reset_sign":
        # test hook: flip the sign of one jump term
        jumps = [replace(channels[0], rate=-channels[0].rate)] + channels[1:]
    L = assemble_liouvillian(H, jumps)
    scale = np.abs(L).max()
    d = H.dim
    tr = her = 0.0
    for rho in random_density_matrices(d, n_random):
        out = unvec(L @ vec(rho), d)
        tr = max(tr, abs(np.trace(out)))
        her = max(her, np.abs(out - out.conj().T).max())
    report.add("trace preservation", tr / scale, 1e-12)
    report.add("hermiticity preservation", her / scale, 1e-13)

    decay = sum(ch.rate * ch.operator.conj().T @ ch.operator for ch in channels)
    Hm = H.matrix
    report.add("decay identity sum rate R^dag R = i(H - H^dag)",
               np.abs(decay - 1j * (Hm - Hm.conj().T)).max() / np.abs(Hm).max(), 1e-12)

    sup = build_superoperator(spec, C)
    report.add("split full = l0 + l1", np.abs(sup.full - sup.l0 - sup.l1).max() / scale, 1e-15)
    if spec.scheme is Scheme.TWO_D:
        basis = build_basis(spec.scheme)
        sector = np.full(d, -1)
        for i, s in enumerate(basis.subspaces):
            sector[list(s)] = i
        # an operator |a><b| lives in sector pair (sector[a], sector[b])
        tag = np.array([sector[a] * 3 + sector[b] for b in range(d) for a in range(d)])
        cross = tag[:, None] != tag[None, :]
        report.add("L0 sector invariance", np.abs(sup.l0[cross]).max() / scale, 1e-14)
    return sup


def rate_checks(spec: SystemSpec, report: Report, sup=None):
    C = coupling_constants(spec)
    sup = build_superoperator(spec, C) if sup is None else sup
    basis = build_basis(spec.scheme)
    qss = dual_states(quasi_stationary_states(sup, basis), sup, basis)
    norm0 = np.abs(sup.l0).max()
    report.add("L0 rho_ss null residual",
               max(np.abs(sup.l0 @ vec(r)).max() for r in qss.rho_ss) / norm0, 1e-10)
    report.add("biorthonormality", np.abs(qss.biorthonormality() - np.eye(3)).max(), 1e-10)
    p = perturbative_rates(spec, C)
    cf = closed_form_rates(spec, C)
    off = ~np.eye(3, dtype=bool)
    rel = np.abs(p.p - cf.p)[off] / np.maximum(np.abs(cf.p[off]), 1e-300)
    rel = rel[np.abs(cf.p[off]) > 0]
    if spec.scheme is Scheme.TWO_D:
        report.add("dual completeness sum rho^i = 1", np.abs(sum(qss.duals) - np.eye(basis.dim)).max(), 1e-15)
        report.add("rate row sums", np.abs(p.alpha_row_sums()).max() / np.abs(p.p).max(), 1e-12)
        report.add("perturbative vs closed form", rel.max(), 1e-8)
    else:
        A = spec.einstein_A
        eps = ((abs(C[2]) + abs(C[4])) / (A[2] + A[4])) ** 2
        report.add("perturbative vs closed form (second order in C2, C4)", rel.max(), max(eps, 1e-8))
    report.add("imaginary residue of alpha", p.imag_residue, 1e-12)
    return p


def appendix_check(spec: SystemSpec, report: Report):
    from .appendix import appendix_rates

    C = coupling_constants(spec)
    a = appendix_rates(spec, C).p
    cf = closed_form_rates(spec, C).p
    off = ~np.eye(3, dtype=bool)
    rel = np.abs(a - cf)[off & (cf != 0)] / np.abs(cf[off & (cf != 0)])
    A = spec.einstein_A
    tol = 10 * (A[1] + A[2] + abs(C[1]) + abs(C[2])) / A[3]
    report.add("appendix route vs closed form", rel.max(), tol)


def monte_carlo_check(spec: SystemSpec, report: Report, n_sojourns: int, seed: int):
    from .trajectory import sojourn_statistics

    E = sojourn_statistics(spec, n_sojourns, seed)
    ref = perturbative_rates(spec)
    z = np.abs(E.zscore(ref))
    report.add("Monte Carlo rates within 3 sigma", z.max() / 3, 1.0)


def run_validate(cfg) -> Report:
    spec = cfg.spec.scaled(cfg.scale_kappa) if cfg.scale_kappa != 1 else cfg.spec
    report = Report()
    sup = generator_checks(spec, report, fault=cfg.fault)
    rate_checks(spec, report, sup)
    if spec.scheme is Scheme.TWO_D:
        appendix_check(spec, report)
    if cfg.monte_carlo:
        monte_carlo_check(spec, report, cfg.n_sojourns, cfg.seed)
    return report
