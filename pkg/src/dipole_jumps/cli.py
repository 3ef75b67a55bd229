"""Command line front end: rates, distance sweeps, trajectories, checks.

Configuration files hold one ``key = value`` per line; ``#`` starts a
comment.  Distances ``r``, ``r_min`` and ``r_max`` are in units of the
strong-line wavelength ``lambda_3``.

Exit codes: 0 success, 1 a validation check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .model import BA_WAVELENGTHS, C2_PLACEMENTS, HG_WAVELENGTHS, Scheme, SystemSpec, build_basis

log = logging.getLogger("dipole_jumps")

MODES = ("rates", "sweep", "trajectory", "validate", "describe")
DEFAULT_DELTA_T = 1e-3


class ConfigError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass
class RunConfig:
    mode: str = "rates"
    spec: SystemSpec | None = None
    r_min: float = 0.5
    r_max: float = 20.0
    n_points: int = 100
    spacing: str = "linear"
    delta_T_DJ: float = DEFAULT_DELTA_T
    window: float | None = None
    thresholds: tuple[float, float] | None = None
    seed: int = 0
    n_trajectories: int = 1
    duration: float = 1.0
    scale_kappa: float = 1.0
    out: str | None = None
    zero_coupling: bool = False
    initial_state: str = "g"
    monte_carlo: bool = False
    n_sojourns: int = 2000
    fault: str | None = None
    echo: dict = field(default_factory=dict)


def _float(v):
    return float(v)


def _bool(v):
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_SPEC_KEYS = {
    "scheme": str, "omega_3": _float, "delta_3": _float, "W": _float, "r": _float,
    "c2_placement": str,
    **{f"A_{j}": _float for j in range(1, 5)},
    **{f"lambda_{j}": _float for j in range(1, 5)},
    **{f"theta_{j}": _float for j in range(1, 5)},
}
_RUN_KEYS = {
    "mode": str, "r_min": _float, "r_max": _float, "n_points": int, "spacing": str,
    "delta_T_DJ": _float, "window": _float, "threshold_low": _float, "threshold_high": _float,
    "seed": int, "n_trajectories": int, "duration": _float, "scale_kappa": _float, "out": str,
    "zero_coupling": _bool, "initial_state": str, "monte_carlo": _bool, "n_sojourns": int,
    "fault": str,
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    raw, lines = {}, {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, val = body.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key or not val:
            raise ConfigError(f"expected 'key = value', got {line.strip()!r}", n)
        conv = _SPEC_KEYS.get(key) or _RUN_KEYS.get(key)
        if conv is None:
            raise ConfigError(f"unknown key {key!r}", n)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", n)
        try:
            raw[key] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key}: {exc}", n) from None
        lines[key] = n

    def where(key):
        return lines.get(key)

    if "scheme" not in raw:
        raise ConfigError("missing required key 'scheme'")
    try:
        scheme = Scheme(raw["scheme"])
    except ValueError:
        raise ConfigError(f"scheme must be one of {[s.value for s in Scheme]}", where("scheme")) from None
    js = (1, 2, 3) if scheme is Scheme.TWO_D else (1, 2, 3, 4)
    for key in raw:
        if key[-1:].isdigit() and "_" in key and int(key.rsplit("_", 1)[1]) not in js:
            raise ConfigError(f"{key} is not a transition of scheme {scheme.value}", where(key))
    if scheme is Scheme.TWO_D and "W" in raw:
        raise ConfigError("W is only defined for the four-level scheme", where("W"))

    base = SystemSpec.two_d() if scheme is Scheme.TWO_D else SystemSpec.four_level()
    default_lam = HG_WAVELENGTHS if scheme is Scheme.TWO_D else BA_WAVELENGTHS
    A = {j: raw.get(f"A_{j}", base.einstein_A[j]) for j in js}
    lam = {j: raw.get(f"lambda_{j}", default_lam[j]) for j in js}
    theta = {j: raw.get(f"theta_{j}", np.pi / 2) for j in js}
    omega = raw.get("omega_3")
    if omega is None:
        from .rates import optimal_rabi

        omega = base.rabi_omega3 if scheme is Scheme.TWO_D else optimal_rabi(A[3], raw.get("delta_3", 0.0))
    try:
        spec = SystemSpec(
            scheme, A, omega, raw.get("delta_3", 0.0), raw.get("W", base.lamp_W),
            raw.get("r", 1.0) * lam[3], lam, theta, raw.get("c2_placement", "paper"),
        )
    except ValueError as exc:
        bad = next((k for k in raw if k in str(exc).replace("rabi_omega3", "omega_3")), None)
        msg = str(exc)
        for j in js:
            if f"A_{j} " in msg:
                bad = f"A_{j}"
        raise ConfigError(f"invalid parameter: {msg}", where(bad) if bad else None) from None

    cfg = RunConfig(spec=spec, echo=dict(raw))
    for key in ("mode", "r_min", "r_max", "n_points", "spacing", "window", "seed", "n_trajectories",
                "duration", "scale_kappa", "out", "zero_coupling", "initial_state", "monte_carlo",
                "n_sojourns", "fault"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if "delta_T_DJ" in raw:
        cfg.delta_T_DJ = raw["delta_T_DJ"]
    else:
        log.info("delta_T_DJ not given; using the default %g s", DEFAULT_DELTA_T)
    if ("threshold_low" in raw) != ("threshold_high" in raw):
        raise ConfigError("threshold_low and threshold_high must be given together",
                          where("threshold_low") or where("threshold_high"))
    if "threshold_low" in raw:
        cfg.thresholds = (raw["threshold_low"], raw["threshold_high"])
    _check(cfg, where)
    return cfg


def _check(cfg: RunConfig, where=lambda k: None):
    checks = [
        ("mode", cfg.mode in MODES, f"mode must be one of {MODES}"),
        ("r_min", cfg.r_min > 0, "r_min must be > 0"),
        ("r_max", cfg.r_max >= cfg.r_min, "r_max must be >= r_min"),
        ("n_points", cfg.n_points >= 1, "n_points must be >= 1"),
        ("spacing", cfg.spacing in ("linear", "log"), "spacing must be linear or log"),
        ("delta_T_DJ", cfg.delta_T_DJ > 0, "delta_T_DJ must be > 0"),
        ("duration", cfg.duration > 0 or cfg.mode != "trajectory", "duration must be > 0"),
        ("scale_kappa", cfg.scale_kappa >= 1, "scale_kappa must be >= 1"),
        ("n_trajectories", cfg.n_trajectories >= 1, "n_trajectories must be >= 1"),
        ("window", cfg.window is None or cfg.window > 0, "window must be > 0"),
        ("c2_placement", cfg.spec.c2_shift_placement in C2_PLACEMENTS,
         f"c2_placement must be one of {C2_PLACEMENTS}"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(msg, where(key))


def _kr_warning(spec: SystemSpec, r: float):
    for j in spec.transitions:
        if spec.wavenumber(j) * r < 0.1:
            log.warning("k_%d r = %.3g < 0.1: the dipole model is questionable here", j, spec.wavenumber(j) * r)


def _header(cfg: RunConfig, columns) -> str:
    lines = [f"# {k} = {v}" for k, v in sorted(cfg.echo.items())]
    lines.append(f"# delta_T_DJ_used = {cfg.delta_T_DJ!r}")
    lines.append(f"# scale_kappa_used = {cfg.scale_kappa!r}")
    lines.append("# " + ",".join(columns))
    return "\n".join(lines) + "\n"


def _table(cfg: RunConfig, data: dict) -> str:
    from .rates import SWEEP_COLUMNS

    rows = [",".join(f"{data[c][i]:.12e}" for c in SWEEP_COLUMNS) for i in range(len(data[SWEEP_COLUMNS[0]]))]
    return _header(cfg, SWEEP_COLUMNS) + "\n".join(rows) + "\n"


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _spec(cfg: RunConfig) -> SystemSpec:
    return cfg.spec.scaled(cfg.scale_kappa) if cfg.scale_kappa != 1 else cfg.spec


def run_rates(cfg: RunConfig) -> str:
    from .rates import rate_sweep

    spec = _spec(cfg)
    r = spec.distance_r / spec.wavelengths[3]
    _kr_warning(spec, spec.distance_r)
    return _table(cfg, rate_sweep(spec, [r], delta_T=cfg.delta_T_DJ, zero_coupling=cfg.zero_coupling))


def run_sweep(cfg: RunConfig) -> str:
    """CSV of rates and n_DJ against r / lambda_3, with C = 0 baselines."""
    from .rates import rate_sweep

    spec = _spec(cfg)
    if cfg.spacing == "log":
        r = np.geomspace(cfg.r_min, cfg.r_max, cfg.n_points)
    else:
        r = np.linspace(cfg.r_min, cfg.r_max, cfg.n_points)
    _kr_warning(spec, r[0] * spec.wavelengths[3])
    return _table(cfg, rate_sweep(spec, r, delta_T=cfg.delta_T_DJ, zero_coupling=cfg.zero_coupling))


def run_trajectory_mode(cfg: RunConfig) -> str:
    from .model import zero_couplings
    from .rates import perturbative_rates
    from .trajectory import classify_periods, empirical_statistics, periods_from_labels, run_ensemble

    spec = _spec(cfg)
    C = zero_couplings(spec) if cfg.zero_coupling else None
    recs = run_ensemble(spec, cfg.duration, cfg.n_trajectories, cfg.seed, C=C, initial=cfg.initial_state)
    parts = []
    for k, rec in enumerate(recs):
        text = rec.to_csv()
        if cfg.out:
            path = cfg.out if len(recs) == 1 else f"{cfg.out}.{k}"
            with open(path, "w") as fh:
                fh.write(text)
            ps = periods_from_labels(rec) if cfg.window is None else classify_periods(rec, cfg.window, cfg.thresholds)
            ps.to_csv(path + ".periods.csv")
        parts.append(text)
    ref = perturbative_rates(spec, C)
    for k, rec in enumerate(recs):
        ps = periods_from_labels(rec)
        if len(ps) > 1:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                E = empirical_statistics(ps, cfg.delta_T_DJ)
            log.info("trajectory %d: %d events, %d periods, dwell %s, p_hat %s, p %s", k, len(rec), len(ps),
                     np.round(E.dwell, 6).tolist(), np.round(E.p.p, 6).tolist(), np.round(ref.p, 6).tolist())
    return "" if cfg.out else "".join(parts)


def run_describe(cfg: RunConfig) -> str:
    from .model import coupling_constants

    spec = cfg.spec
    basis = build_basis(spec.scheme)
    lines = [f"# scheme {spec.scheme.value}", f"# dim {basis.dim}", "label,index,sector"]
    for k, lab in enumerate(basis.labels):
        sec = basis.sector_of(k)
        lines.append(f"{lab},{k},{'transient' if sec is None else f'S{sec}'}")
    lines.append("")
    lines.append("transition,upper,lower,A,lambda,C_re,C_im")
    C = coupling_constants(spec)
    for j, (u, l) in spec.transitions.items():
        lines.append(f"{j},{u},{l},{spec.einstein_A[j]!r},{spec.wavelengths[j]!r},{C[j].real!r},{C[j].imag!r}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dipole-jumps", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="configuration file (key = value lines)")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--dump-liouvillian", nargs="?", const="liouvillian.txt", metavar="PATH",
                    help="also write the nonzero generator entries to PATH")
    ap.add_argument("--c2-placement", choices=C2_PLACEMENTS)
    ap.add_argument("--scale-kappa", type=float)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)

    try:
        text = open(args.config).read() if args.config else "scheme = two_d\n"
        cfg = parse_config(text)
        if args.mode:
            cfg.mode = args.mode
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.scale_kappa is not None:
            cfg.scale_kappa = args.scale_kappa
        if args.c2_placement:
            cfg.spec = replace(cfg.spec, c2_shift_placement=args.c2_placement)
        _check(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.dump_liouvillian:
        from .liouville import build_superoperator, dump_liouvillian

        dump_liouvillian(build_superoperator(_spec(cfg)), args.dump_liouvillian)

    if cfg.mode == "validate":
        from .validate import run_validate

        report = run_validate(cfg)
        _emit(report.text(), cfg.out)
        return 0 if report.ok else 1
    runner = {"rates": run_rates, "sweep": run_sweep, "trajectory": run_trajectory_mode,
              "describe": run_describe}[cfg.mode]
    from .rates import DegeneracyError

    try:
        out = runner(cfg)
    except DegeneracyError as exc:
        # e.g. subradiant states that stop decaying at very small distances
        print(f"parameters outside the perturbative regime: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if out:
        _emit(out, cfg.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
