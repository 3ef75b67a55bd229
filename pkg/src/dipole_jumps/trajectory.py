"""Quantum-jump trajectories, intensity periods and their statistics.

A trajectory is a sequence of jumps of the conditional (no-emission)
evolution.  Each jump is a photon on one transition or a lamp event.  The
intensity class (number of emitters outside the shelving level 2) drops by
one on every 3 -> 2 or 4 -> 2 photon and rises by one on every 2 -> 1
photon, which gives an exact period sequence.  ``classify_periods`` is the
detector-side alternative that only looks at strong-line photon counts.
"""

from __future__ import annotations

import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from . import _mcwf_kernel as K
from .liouville import ConditionalHamiltonian, JumpChannel, build_hcond, build_reset_channels
from .model import SystemSpec, build_basis, coupling_constants
from .rates import RateMatrix

BATCH = 1 << 16
# eigenvector condition number above which the eigen-kernel loses too many
# digits (near exceptional points such as Omega_3 = A_3 / 2 without slow decay)
DEFECTIVE_COND = 1e6

# class change caused by a photon on each transition (1: 2->1, 2: shelving)
CLASS_SHIFT = {"photon_w1": 1, "photon_w2": -1}


class ClassifierConfigError(ValueError):
    """Windows too short to tell the intensity classes apart."""


@dataclass(frozen=True)
class JumpOutcome:
    time: float
    channel_id: int  # -1: no jump before the horizon
    state: np.ndarray


@dataclass(frozen=True)
class Unraveling:
    """Precomputed eigen-data of H_cond plus the channel tables."""

    H: np.ndarray
    channels: tuple
    V: np.ndarray
    Vinv: np.ndarray
    lam: np.ndarray
    G: np.ndarray
    Gd: np.ndarray
    ops: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    rates: np.ndarray
    class_shift: np.ndarray
    defective: bool

    @classmethod
    def from_parts(cls, H, channels) -> "Unraveling":
        Hm = np.ascontiguousarray(H.matrix if isinstance(H, ConditionalHamiltonian) else H, dtype=complex)
        lam, V = np.linalg.eig(Hm)
        defective = bool(np.linalg.cond(V) > DEFECTIVE_COND)
        Vinv = np.linalg.inv(V)
        gamma = 1j * (Hm - Hm.conj().T)
        ops = np.ascontiguousarray(np.array([ch.operator for ch in channels], dtype=complex))
        rates = np.array([ch.rate for ch in channels], dtype=float)
        shift = np.array([CLASS_SHIFT.get(ch.emission_label, 0) for ch in channels], dtype=np.int64)
        Vh = V.conj().T
        M = np.ascontiguousarray(Vinv @ ops @ V)
        Q = np.ascontiguousarray(Vh @ np.transpose(ops.conj(), (0, 2, 1)) @ ops @ V)
        return cls(Hm, tuple(channels), V, Vinv, lam, Vh @ V, Vh @ gamma @ V,
                   ops, M, Q, rates, shift, defective)

    @classmethod
    def from_spec(cls, spec: SystemSpec, C: dict | None = None) -> "Unraveling":
        C = coupling_constants(spec) if C is None else C
        channels = build_reset_channels(spec, C)
        return cls.from_parts(build_hcond(spec, C, channels), channels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(ch.emission_label for ch in self.channels)


def _uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    # (0, 1]: the survival target must be positive
    return 1.0 - rng.random(n)


def _jump_slow(U: Unraveling, psi, u1, u2, horizon):
    """expm-based jump for defective H_cond (no eigenbasis)."""
    H = U.H

    def surv(t):
        return np.linalg.norm(expm(-1j * H * t) @ psi) ** 2

    if np.isfinite(horizon):
        if surv(horizon) > u1:
            phi = expm(-1j * H * horizon) @ psi
            return -1.0, -1, phi / np.linalg.norm(phi)
        hi = horizon
    else:
        hi = 1.0 / max(-U.lam.imag.min(), 1e-300)
        while surv(hi) > u1:
            hi *= 2
    tau = brentq(lambda t: surv(t) - u1, 0.0, hi, xtol=1e-15 * hi, rtol=1e-14)
    phi = expm(-1j * H * tau) @ psi
    w = U.rates * np.array([np.linalg.norm(R @ phi) ** 2 for R in U.ops])
    k = min(int(np.searchsorted(np.cumsum(w), u2 * w.sum())), len(w) - 1)
    new = U.ops[k] @ phi
    return tau, k, new / np.linalg.norm(new)


def _plateau(U: Unraveling, psi) -> float:
    """Long-time limit of the survival probability."""
    c = U.Vinv @ psi
    stuck = np.abs(U.lam.imag) <= 1e-12 * max(np.abs(U.lam).max(), 1.0)
    x = np.where(stuck, c, 0)
    return float(np.real(x.conj() @ U.G @ x))


def evolve_and_jump(state, H, channels, rng: np.random.Generator, horizon: float = np.inf) -> JumpOutcome:
    """Draw the next jump from a normalized state.

    Returns ``channel_id = -1`` (and the state at the horizon, or the input
    state for an infinite horizon) when no jump happens in time, e.g. for a
    state inside a non-decaying manifold.
    """
    U = H if isinstance(H, Unraveling) else Unraveling.from_parts(H, channels)
    psi = np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > 1e-9:
        raise ValueError("state must be normalized")
    u1, u2 = _uniforms(rng, 2)
    if not np.isfinite(horizon) and _plateau(U, psi) >= u1:
        return JumpOutcome(np.inf, -1, psi)
    if U.defective:
        tau, k, new = _jump_slow(U, psi, u1, u2, horizon)
        return JumpOutcome(tau if k >= 0 else horizon, k, new)
    times = np.empty(1)
    chans = np.empty(1, dtype=np.int64)
    record = np.ones(len(U.rates), dtype=np.bool_)
    n, t, new, _, _, status, _ = K.run_jumps(
        U.V, U.Vinv, U.lam, U.G, U.Gd, U.M, U.Q, U.rates, U.class_shift, record, psi, 0.0,
        float(horizon), 0, False, np.array([u1, u2]), times, chans,
    )
    if n == 0:
        return JumpOutcome(float(horizon), -1, new)
    return JumpOutcome(float(times[0]), int(chans[0]), new)


@dataclass(frozen=True)
class PhotonRecord:
    """Jump times with the channel that fired; ``labels[channel_id]`` names it."""

    times: np.ndarray
    channel_ids: np.ndarray
    labels: tuple[str, ...]
    duration: float
    seed: int | None = None
    spec: SystemSpec | None = None
    initial_class: int = 2

    def __len__(self):
        return len(self.times)

    @property
    def events(self):
        return [(float(t), int(k), self.labels[k]) for t, k in zip(self.times, self.channel_ids)]

    def select(self, label: str) -> np.ndarray:
        """Times of all events carrying ``label``."""
        ids = [k for k, lab in enumerate(self.labels) if lab == label]
        return self.times[np.isin(self.channel_ids, ids)]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("time_s,channel_id,label\n")
        for t, k in zip(self.times, self.channel_ids):
            buf.write(f"{float(t)!r},{k},{self.labels[k]}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class PeriodSequence:
    classes: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.classes)

    @property
    def duration(self) -> float:
        return float(self.ends[-1] - self.starts[0]) if len(self) else 0.0

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("class,start_s,end_s\n")
        for c, s, e in zip(self.classes, self.starts, self.ends):
            buf.write(f"{int(c)},{float(s)!r},{float(e)!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _periods_from_changes(change_times, classes_after, initial_class, duration, params):
    starts = np.concatenate([[0.0], change_times])
    ends = np.concatenate([change_times, [duration]])
    classes = np.concatenate([[initial_class], classes_after]).astype(int)
    return PeriodSequence(classes, starts, ends, params)


def initial_state(spec: SystemSpec, label: str = "g") -> tuple[np.ndarray, int]:
    """Dicke basis ket and its intensity class (emitters not in level 2)."""
    basis = build_basis(spec.scheme)
    if label.startswith(("s", "a")):
        shelved = label[1:].count("2")
    elif label == "g":
        shelved = 0
    else:
        shelved = 2 if label == "e2" else 0
    return basis.ket(label), 2 - shelved


def run_trajectory(
    spec: SystemSpec,
    duration: float,
    seed: int | np.random.SeedSequence | None = None,
    *,
    initial: str = "g",
    C: dict | None = None,
    unraveling: Unraveling | None = None,
) -> PhotonRecord:
    """Simulate all jumps in ``[0, duration]`` starting from a basis state.

    Identical ``(spec, duration, seed)`` give identical records.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    U = Unraveling.from_spec(spec, C) if unraveling is None else unraveling
    psi, cls = initial_state(spec, initial)
    rng = np.random.default_rng(seed)
    seed_out = seed if isinstance(seed, (int, np.integer)) else None
    times, chans = [], []
    t = 0.0
    if duration == 0:
        return PhotonRecord(np.empty(0), np.empty(0, dtype=np.int64), U.labels, 0.0, seed_out, spec, cls)
    record = np.ones(len(U.rates), dtype=np.bool_)
    while t < duration:
        if U.defective:
            u1, u2 = _uniforms(rng, 2)
            tau, k, psi = _jump_slow(U, psi, u1, u2, duration - t)
            if k < 0:
                break
            t += tau
            times.append(np.array([t]))
            chans.append(np.array([k]))
            continue
        tb = np.empty(BATCH)
        cb = np.empty(BATCH, dtype=np.int64)
        n, t, psi, cls, _, status, _ = K.run_jumps(
            U.V, U.Vinv, U.lam, U.G, U.Gd, U.M, U.Q, U.rates, U.class_shift, record, psi, t,
            float(duration), cls, False, _uniforms(rng, 2 * BATCH), tb, cb,
        )
        times.append(tb[:n])
        chans.append(cb[:n])
        if status in (K.STATUS_TIME, K.STATUS_STUCK):
            break
    times = np.concatenate(times) if times else np.empty(0)
    chans = np.concatenate(chans) if chans else np.empty(0, dtype=np.int64)
    return PhotonRecord(times, chans, U.labels, float(duration), seed_out, spec,
                        initial_state(spec, initial)[1])


def run_ensemble(spec, duration, n_trajectories, seed=None, *, workers=1, **kw) -> list[PhotonRecord]:
    """Independent trajectories with spawned seed streams; order is fixed."""
    U = Unraveling.from_spec(spec, kw.pop("C", None))
    seqs = np.random.SeedSequence(seed).spawn(n_trajectories)
    job = lambda s: run_trajectory(spec, duration, s, unraveling=U, **kw)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(job, seqs))
    return [job(s) for s in seqs]


def periods_from_labels(rec: PhotonRecord) -> PeriodSequence:
    """Exact periods from the shelving and de-shelving photons."""
    shift = np.array([CLASS_SHIFT.get(lab, 0) for lab in rec.labels], dtype=int)
    steps = shift[rec.channel_ids] if len(rec) else np.empty(0, dtype=int)
    mask = steps != 0
    classes_after = rec.initial_class + np.cumsum(steps[mask])
    return _periods_from_changes(rec.times[mask], classes_after, rec.initial_class,
                                 rec.duration, {"method": "labels"})


def classify_periods(
    rec: PhotonRecord,
    window: float,
    thresholds: tuple[float, float] | None = None,
    *,
    strong_label: str = "photon_w3",
) -> PeriodSequence:
    """Threshold the strong-line count rate in consecutive windows.

    Default thresholds are ``0.5 I1`` and ``1.5 I1`` with ``I1`` the
    single-emitter photon rate of ``rec.spec``.
    """
    if not window > 0:
        raise ClassifierConfigError("window must be > 0")
    if thresholds is None:
        if rec.spec is None:
            raise ClassifierConfigError("thresholds required for a record without a spec")
        from .appendix import single_light_rate

        I1 = single_light_rate(rec.spec)
        thresholds = (0.5 * I1, 1.5 * I1)
    else:
        I1 = 0.5 * (thresholds[0] + thresholds[1])
    t1, t2 = thresholds
    if not 0 <= t1 < t2:
        raise ClassifierConfigError("thresholds must satisfy 0 <= t1 < t2")
    if I1 * window < 10:
        raise ClassifierConfigError(
            f"window {window:g} s holds {I1 * window:.3g} expected photons at unit intensity; need >= 10"
        )
    n_bins = max(int(np.ceil(rec.duration / window - 1e-12)), 1)
    edges = np.minimum(np.arange(n_bins + 1) * window, rec.duration)
    edges[-1] = rec.duration
    counts, _ = np.histogram(rec.select(strong_label), bins=edges)
    widths = np.diff(edges)
    rate = counts / np.where(widths > 0, widths, window)
    cls = np.where(rate < t1, 0, np.where(rate <= t2, 1, 2))
    change = np.flatnonzero(np.diff(cls)) + 1
    params = {"method": "window", "window": window, "thresholds": (t1, t2)}
    return _periods_from_changes(edges[change], cls[change], cls[0], rec.duration, params)


@dataclass(frozen=True)
class EmpiricalRates:
    """Estimated rates with Poisson standard errors.

    ``rel_err`` is infinite where no transition was observed.
    """

    p: RateMatrix
    se: np.ndarray
    counts: np.ndarray
    dwell: np.ndarray
    n_DJ: float = np.nan
    n_DJ_se: float = np.nan
    n_DJ_count: int = 0
    duration: float = np.nan

    @property
    def rel_err(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.p.p != 0, self.se / np.abs(self.p.p), np.inf)

    def zscore(self, ref: RateMatrix | np.ndarray) -> np.ndarray:
        ref = ref.p if isinstance(ref, RateMatrix) else np.asarray(ref)
        off = ~np.eye(3, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(off & (self.se > 0), (self.p.p - ref) / self.se, 0.0)
        return z


def rates_from_counts(counts, dwell, **kw) -> EmpiricalRates:
    counts = np.asarray(counts, dtype=float)
    dwell = np.asarray(dwell, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(dwell[:, None] > 0, counts / dwell[:, None], 0.0)
        se = np.where(dwell[:, None] > 0, np.sqrt(counts) / dwell[:, None], np.inf)
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(se, 0.0)
    np.fill_diagonal(p, -p.sum(axis=1))
    return EmpiricalRates(RateMatrix(p), se, counts.astype(int), dwell, **kw)


def empirical_statistics(ps: PeriodSequence, delta_T_DJ: float = 1e-3) -> EmpiricalRates:
    """Transition counts over dwell times, and the double-jump rate.

    A double jump is a direct change by two classes, or two successive
    changes with net change two whose middle period lasts at most
    ``delta_T_DJ``.
    """
    if len(ps) == 0:
        raise ValueError("empty period sequence")
    if len(ps) < 100:
        warnings.warn(f"only {len(ps)} periods; error estimates are unreliable", RuntimeWarning)
    cls, starts, ends = ps.classes, ps.starts, ps.ends
    dwell = np.array([np.sum((ends - starts)[cls == i]) for i in range(3)])
    counts = np.zeros((3, 3))
    np.add.at(counts, (cls[:-1], cls[1:]), 1)
    direct = np.abs(np.diff(cls)) == 2
    middle = ends[1:-1] - starts[1:-1]
    paired = (np.abs(cls[2:] - cls[:-2]) == 2) & (middle <= delta_T_DJ)
    n = int(direct.sum() + paired.sum())
    T = ps.duration
    return rates_from_counts(counts, dwell, n_DJ=n / T, n_DJ_se=np.sqrt(n) / T, n_DJ_count=n, duration=T)


def sample_markov_chain(p: RateMatrix | np.ndarray, duration: float, seed=None, initial: int = 0) -> PeriodSequence:
    """Classical three-state jump process with rate matrix ``p``."""
    P = p.p if isinstance(p, RateMatrix) else np.asarray(p)
    rng = np.random.default_rng(seed)
    out_rate = -np.diag(P)
    off = np.where(np.eye(3, dtype=bool), 0.0, P)
    with np.errstate(invalid="ignore", divide="ignore"):
        cum = np.cumsum(off / off.sum(axis=1, keepdims=True), axis=1)
    t, c = 0.0, initial
    starts, classes = [0.0], [initial]
    n = 4096
    expo, unif, k = rng.standard_exponential(n), rng.random(n), 0
    while out_rate[c] > 0:
        if k == n:
            expo, unif, k = rng.standard_exponential(n), rng.random(n), 0
        t += expo[k] / out_rate[c]
        if t >= duration:
            break
        c = min(int(np.searchsorted(cum[c], unif[k], side="right")), 2)
        k += 1
        starts.append(t)
        classes.append(c)
    starts = np.array(starts)
    ends = np.append(starts[1:], duration)
    return PeriodSequence(np.array(classes), starts, ends, {"method": "markov"})


# entry state of each intensity class for sojourn sampling
SOJOURN_START = {0: "e2", 1: "s12", 2: "g"}


def sojourn_statistics(
    spec: SystemSpec,
    n_sojourns: int | dict[int, int],
    seed=None,
    *,
    C: dict | None = None,
) -> EmpiricalRates:
    """Rates from independent sojourns started in each intensity class.

    Each sojourn runs until the first class change; its length is added to
    the dwell time of the class and the change to the transition counts.
    This samples rare transitions far faster than one long trajectory in
    which the double-intensity class dominates the time budget.
    """
    U = Unraveling.from_spec(spec, C)
    if U.defective:
        raise NotImplementedError("sojourn sampling needs a diagonalizable H_cond")
    if isinstance(n_sojourns, int):
        n_sojourns = {i: n_sojourns for i in range(3)}
    counts = np.zeros((3, 3))
    dwell = np.zeros(3)
    record = np.zeros(len(U.rates), dtype=np.bool_)
    tb = np.empty(1)
    cb = np.empty(1, dtype=np.int64)
    streams = np.random.SeedSequence(seed).spawn(3)
    for i in range(3):
        rng = np.random.default_rng(streams[i])
        start, _ = initial_state(spec, SOJOURN_START[i])
        u = _uniforms(rng, 2 * BATCH)
        pos = 0
        for _ in range(n_sojourns.get(i, 0)):
            psi, t, cls = start, 0.0, i
            while True:
                _, t, psi, cls, used, status, _ = K.run_jumps(
                    U.V, U.Vinv, U.lam, U.G, U.Gd, U.M, U.Q, U.rates, U.class_shift, record, psi, t,
                    np.inf, cls, True, u[pos:], tb, cb,
                )
                pos += used
                if status == K.STATUS_BUFFER:
                    u = _uniforms(rng, 2 * BATCH)
                    pos = 0
                    continue
                break
            if status != K.STATUS_CLASS:
                raise RuntimeError(f"sojourn in class {i} ended without a class change")
            dwell[i] += t
            counts[i, cls] += 1
    return rates_from_counts(counts, dwell, duration=float(dwell.sum()))
