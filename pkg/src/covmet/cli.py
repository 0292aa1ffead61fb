"""Command-line front end: ``covmet {validate,scan,crosscheck,rates}``."""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bounds, ghz, kraus_opt, lindblad, models, oracle
from .qubit_channel import PhaseCovariantMap, choi_min_eigenvalue, random_cptp_map, validate_cptp

MODELS = ("sl", "semigroup", "zeno", "noiseless", "random")
METHODS = ("bound-analytic", "bound-numeric", "ghz", "oracle")
CSV_HEADER = "N,t_opt,mse_T,rescaled_const,method,flag"
ORACLE_MAX_PROBES = oracle.MAX_QUBITS // 2
CROSSCHECK_MAX_N = 4
CROSSCHECK_INPUTS = 20
CROSSCHECK_TOL = 1e-9


class UsageError(Exception):
    """Raised for flag combinations argparse itself cannot reject."""


@dataclass(frozen=True)
class ModelConfig:
    name: str = "sl"
    gamma: float = 0.2
    gamma0: float = 0.1
    n_bath: float = 10.0
    g_plus: float = 0.0
    g_minus: float = 0.0
    g_z: float = 0.5
    a: float = 1.0
    seed: int = 0

    def trajectory(self) -> lindblad.MapTrajectory:
        if self.name == "sl":
            return models.sl_trajectory(self._sl())
        if self.name == "semigroup":
            return models.semigroup_trajectory(self.g_plus, self.g_minus, self.g_z)
        if self.name == "zeno":
            return models.zeno_dephasing_trajectory(self.a)
        if self.name == "noiseless":
            return models.noiseless_trajectory()
        raise UsageError(f"model {self.name!r} has no time dependence")

    def rates(self) -> lindblad.TlmeRates | None:
        if self.name == "sl":
            return models.sl_rates(self._sl())
        if self.name == "semigroup":
            return models.semigroup_rates(self.g_plus, self.g_minus, self.g_z)
        return None

    def beta_perp(self) -> float:
        if self.name == "sl":
            return models.sl_expansion(self._sl()).beta_perp
        if self.name == "semigroup":
            return models.semigroup_expansion(self.g_plus, self.g_minus, self.g_z).beta_perp
        if self.name == "zeno":
            return models.zeno_dephasing_expansion(self.a).beta_perp
        return math.inf

    def snapshot(self, t: float) -> PhaseCovariantMap:
        if self.name == "random":
            return random_cptp_map(np.random.default_rng(self.seed))
        return self.trajectory()(t)

    def _sl(self) -> models.SlParams:
        return models.SlParams(self.gamma, self.gamma0, self.n_bath)


@dataclass(frozen=True)
class ScanConfig:
    model: ModelConfig
    method: str = "bound-analytic"
    n_min: float = 10.0
    n_max: float = 1e6
    n_points: int = 40
    t_lo: float | None = None
    t_hi: float | None = None
    seed: int = 0
    restarts: int = 0

    def __post_init__(self):
        if self.n_min < 1 or self.n_max < self.n_min or self.n_points < 1:
            raise UsageError("need 1 <= n-min <= n-max and n-points >= 1")
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}")
        if self.method == "oracle" and self.n_max > ORACLE_MAX_PROBES:
            raise UsageError(f"oracle scans are limited to N <= {ORACLE_MAX_PROBES}")

    def grid(self) -> list[int]:
        """Log-spaced integer grid, ascending with duplicates removed."""
        raw = np.geomspace(self.n_min, self.n_max, self.n_points)
        return sorted({int(round(n)) for n in raw})

    def bracket(self, traj: lindblad.MapTrajectory) -> tuple[float, float]:
        lo, hi = bounds.default_bracket(traj)
        return (self.t_lo if self.t_lo is not None else lo,
                self.t_hi if self.t_hi is not None else hi)


def rescale_exponent(beta_perp: float) -> float:
    return 2.0 if math.isinf(beta_perp) else (2 * beta_perp - 1) / beta_perp


def _oracle_ghz_qfi(traj, N):
    state = oracle.ghz_state(N)

    def qfi(t):
        return np.array([oracle.output_qfi(state, traj(x), x, N) for x in np.atleast_1d(t)])
    return qfi


def _numeric_qfi(traj, N, restarts, rng):
    def qfi(t):
        return np.array([kraus_opt.f_numeric(traj(x), N, x, restarts=restarts, rng=rng)
                         for x in np.atleast_1d(t)])
    return qfi


def scan_point(cfg: ScanConfig, index: int, N: int) -> tuple[int, float, float, bool]:
    """Optimal time and time-normalized MSE for one grid point."""
    traj = cfg.model.trajectory()
    bracket = cfg.bracket(traj)
    if cfg.method == "ghz":
        rec = ghz.ghz_optimize_time(traj, N, bracket)
        return N, rec.t_opt, rec.mse_T, rec.converged
    if cfg.method == "bound-analytic":
        qfi = None
    elif cfg.method == "bound-numeric":
        qfi = _numeric_qfi(traj, N, cfg.restarts, np.random.default_rng([cfg.seed, index]))
    else:
        qfi = _oracle_ghz_qfi(traj, N)
    opt = bounds.optimize_time(traj, N, bracket, qfi=qfi)
    return N, opt.t_opt, opt.mse_T, opt.converged


def _scan_point_star(args):
    return scan_point(*args)


def run_scan(cfg: ScanConfig, threads: int = 1) -> list[str]:
    """CSV lines (header first) for a scan, ordered by N."""
    power = rescale_exponent(cfg.model.beta_perp())
    jobs = [(cfg, i, N) for i, N in enumerate(cfg.grid())]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            results = list(pool.map(_scan_point_star, jobs))
    else:
        results = [scan_point(*job) for job in jobs]
    lines = [CSV_HEADER]
    for N, t_opt, mse, converged in sorted(results):
        lines.append(f"{N},{t_opt:.12e},{mse:.12e},{mse * N ** power:.12e},"
                     f"{cfg.method},{'ok' if converged else 'edge'}")
    return lines


# ----------------------------------------------------------------- parser

def _threads_default() -> int:
    env = os.environ.get("COVMET_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_model_flags(p: argparse.ArgumentParser, default: str | None = "sl") -> None:
    p.add_argument("--model", choices=MODELS, default=default)
    p.add_argument("--gamma", type=float, default=0.2, help="SL memory rate")
    p.add_argument("--gamma0", type=float, default=0.1, help="SL dissipation rate")
    p.add_argument("--n-bath", type=float, default=10.0, help="SL bath occupation")
    p.add_argument("--g-plus", type=float, default=0.0, help="semigroup pumping rate")
    p.add_argument("--g-minus", type=float, default=0.0, help="semigroup decay rate")
    p.add_argument("--g-z", type=float, default=0.5, help="semigroup dephasing rate")
    p.add_argument("--a", type=float, default=1.0, help="Gaussian dephasing rate")
    p.add_argument("--seed", type=int, default=0)


def _model_config(args) -> ModelConfig:
    return ModelConfig(args.model, args.gamma, args.gamma0, args.n_bath, args.g_plus,
                       args.g_minus, args.g_z, args.a, args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covmet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check that a channel is CPTP")
    v.add_argument("--eta-perp", type=float)
    v.add_argument("--eta-par", type=float)
    v.add_argument("--kappa", type=float)
    v.add_argument("--phi", type=float, default=0.0)
    v.add_argument("--map-file", help="key=value file with eta_perp, eta_par, kappa, phi")
    v.add_argument("--t", type=float, default=1.0)
    _add_model_flags(v, default=None)

    s = sub.add_parser("scan", help="time-optimized precision over an N grid (CSV)")
    _add_model_flags(s)
    s.add_argument("--method", choices=METHODS, default="bound-analytic")
    s.add_argument("--n-min", type=float, default=10.0)
    s.add_argument("--n-max", type=float, default=1e6)
    s.add_argument("--n-points", type=int, default=40)
    s.add_argument("--t-lo", type=float)
    s.add_argument("--t-hi", type=float)
    s.add_argument("--restarts", type=int, default=0, help="simplex restarts for bound-numeric")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", help="output path (default: stdout)")

    c = sub.add_parser("crosscheck", help="oracle checks of the GHZ formula and both bounds")
    _add_model_flags(c)
    c.add_argument("--N", type=int, default=3)
    c.add_argument("--t", type=float, default=1.0)

    r = sub.add_parser("rates", help="dump master-equation rates of a model (CSV)")
    _add_model_flags(r)
    r.add_argument("--t-lo", type=float, default=0.0)
    r.add_argument("--t-hi", type=float, default=10.0)
    r.add_argument("--n-points", type=int, default=101)
    r.add_argument("--out")
    return parser


# --------------------------------------------------------------- commands

def _emit(lines: list[str], out: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    direct = (args.eta_perp, args.eta_par, args.kappa)
    if args.map_file:
        with open(args.map_file, encoding="utf-8") as fh:
            m = PhaseCovariantMap.from_text(fh.read())
    elif args.model is not None:
        m = _model_config(args).snapshot(args.t)
    elif None not in direct:
        m = PhaseCovariantMap(*direct, args.phi)
    else:
        raise UsageError("give --eta-perp/--eta-par/--kappa, --map-file or --model")
    report = validate_cptp(m)
    print(f"map: eta_perp={m.eta_perp:.12g} eta_par={m.eta_par:.12g} kappa={m.kappa:.12g} phi={m.phi:.12g}")
    for name, value in zip(("1-(eta_par+kappa)", "1-(eta_par-kappa)",
                            "1+eta_par-sqrt(4eta_perp^2+kappa^2)"), report.margins):
        print(f"margin {name}: {value:.3e}")
    print(f"choi min eigenvalue: {choi_min_eigenvalue(m):.3e}")
    print("CPTP" if report.is_cptp else "NOT CPTP")
    return 0 if report.is_cptp else 1


def cmd_scan(args) -> int:
    cfg = ScanConfig(_model_config(args), args.method, args.n_min, args.n_max, args.n_points,
                     args.t_lo, args.t_hi, args.seed, args.restarts)
    cfg.model.trajectory()  # reject models without a trajectory before spawning workers
    threads = args.threads if args.threads is not None else _threads_default()
    _emit(run_scan(cfg, max(threads, 1)), args.out)
    return 0


@dataclass(frozen=True)
class CrosscheckRow:
    name: str
    value: float
    passed: bool


def crosscheck(model: ModelConfig, N: int, t: float) -> list[CrosscheckRow]:
    """GHZ formula against the oracle and oracle QFI against both bounds.

    Inputs are the GHZ state and seeded random pure states on ``N`` probes
    plus ``N`` ancillas. Slacks are ``bound - QFI`` relative to the bound.
    """
    if not 1 <= N <= CROSSCHECK_MAX_N:
        raise UsageError(f"crosscheck needs 1 <= N <= {CROSSCHECK_MAX_N}")
    m = model.snapshot(t)
    exact = oracle.output_qfi(oracle.ghz_state(N), m, t, N)
    formula = ghz.ghz_qfi(m, N, t)
    ghz_err = abs(formula - exact) / max(exact, np.finfo(float).tiny)
    analytic = bounds.f_upper_general(m, N, t)
    numeric = kraus_opt.f_numeric(m, N, t)
    rng = np.random.default_rng([model.seed, N])
    qfis = [exact] + [oracle.output_qfi(oracle.random_pure_state(rng, 2 * N), m, t, N)
                      for _ in range(CROSSCHECK_INPUTS)]
    worst = max(qfis)
    slack_a = (analytic - worst) / max(analytic, 1.0)
    slack_n = (numeric - worst) / max(numeric, 1.0)
    return [
        CrosscheckRow("ghz formula vs oracle (rel err)", ghz_err, ghz_err < CROSSCHECK_TOL),
        CrosscheckRow("analytic bound - max oracle QFI", slack_a, slack_a >= -CROSSCHECK_TOL),
        CrosscheckRow("numeric bound - max oracle QFI", slack_n, slack_n >= -CROSSCHECK_TOL),
        CrosscheckRow("numeric bound <= analytic bound", (analytic - numeric) / max(analytic, 1.0),
                      numeric <= analytic * (1 + CROSSCHECK_TOL)),
    ]


def cmd_crosscheck(args) -> int:
    rows = crosscheck(_model_config(args), args.N, args.t)
    width = max(len(r.name) for r in rows)
    for r in rows:
        print(f"{r.name:<{width}}  {r.value: .3e}  {'PASS' if r.passed else 'FAIL'}")
    return 0 if all(r.passed for r in rows) else 1


def cmd_rates(args) -> int:
    cfg = _model_config(args)
    if args.n_points < 2 or not 0 <= args.t_lo < args.t_hi:
        raise UsageError("need 0 <= t-lo < t-hi and n-points >= 2")
    t = np.linspace(args.t_lo, args.t_hi, args.n_points)
    rates = cfg.rates()
    values = rates(t) if rates is not None else lindblad.rates_from_trajectory(cfg.trajectory(), t)
    lines = ["t,h,gamma_plus,gamma_minus,gamma_z"]
    for row in zip(t, *values):
        lines.append(",".join(f"{x:.12e}" for x in row))
    _emit(lines, args.out)
    floor = lindblad.CP_RATE_FLOOR
    bad = np.flatnonzero((values.gamma_plus < floor) | (values.gamma_minus < floor)
                         | (values.gamma_z < floor))
    status = "CP-divisible on grid" if bad.size == 0 else f"not CP-divisible from t={t[bad[0]]:.6g}"
    print(status, file=sys.stderr)
    return 0


COMMANDS = {"validate": cmd_validate, "scan": cmd_scan, "crosscheck": cmd_crosscheck,
            "rates": cmd_rates}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"covmet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
