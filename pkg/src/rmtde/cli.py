"""Command-line experiment runner.

    rmtde <solve|sweep-snr|variance-vs-cv|optimize-covariance|validate>
          [--config PATH] [--out DIR] [--seed U64] [--threads N] [--bits]

Exit status: 0 success, 1 malformed config or arguments, 2 solver
non-convergence, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import covariance_opt as co
from . import det_equiv as de
from . import monte_carlo as mc
from .channel_models import FadingSpec, ScenarioSpec, cv_of
from .errors import ConvergenceError, ScenarioError, TrialError, ValidationFailure
from .plotdata import Table, emit_plotdata
from .scenario_io import load_scenario, scenario_from_dict

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 1, 2, 3
NATS_PER_BIT = math.log(2.0)


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def snr_to_sigma2(snr_db) -> np.ndarray:
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def _read_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {p} must be a JSON object")
    return doc, p.parent


def _block(cfg: dict, key: str) -> dict:
    b = cfg.get(key, {})
    if not isinstance(b, dict):
        raise ConfigError(f"'{key}' must be an object")
    return b


def _scenario_doc(cfg: dict, base: Path):
    if "scenario" not in cfg:
        raise ConfigError("config needs a 'scenario'")
    src = cfg["scenario"]
    if isinstance(src, str):
        path = Path(src) if Path(src).is_absolute() else base / src
        try:
            return json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load scenario {path}: {exc}") from exc
    return src


def _scenario(cfg: dict, base: Path) -> ScenarioSpec:
    return load_scenario(_scenario_doc(cfg, base))


def _snr_grid(block: dict, where: str) -> list[float]:
    grid = block.get("snr_db")
    if isinstance(grid, (int, float)) and not isinstance(grid, bool):
        grid = [grid]
    if not isinstance(grid, list) or not grid or not all(isinstance(v, (int, float)) for v in grid):
        raise ConfigError(f"{where}.snr_db must be a nonempty list of numbers")
    return [float(v) for v in grid]


def _trials(block: dict, where: str, required: bool) -> int | None:
    t = block.get("trials")
    if t is None and not required:
        return None
    if not isinstance(t, int) or isinstance(t, bool) or t < 1:
        raise ConfigError(f"{where}.trials must be a positive integer")
    return t


def _fadings(block: dict, where: str) -> list[FadingSpec] | None:
    fl = block.get("fadings")
    if fl is None:
        return None
    if not isinstance(fl, list) or not fl:
        raise ConfigError(f"{where}.fadings must be a nonempty list")
    try:
        return [FadingSpec.from_dict(f) for f in fl]
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"{where}.fadings: {exc}") from exc


def _solver(cfg: dict) -> de.SolverOptions:
    b = _block(cfg, "solver")
    unknown = set(b) - {"tol", "max_iter", "damping"}
    if unknown:
        raise ConfigError(f"solver: unknown keys {sorted(unknown)}")
    try:
        opts = de.SolverOptions(**{k: type(getattr(de.DEFAULT_OPTIONS, k))(v) for k, v in b.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc
    if not (opts.tol > 0 and opts.max_iter >= 1 and 0 < opts.damping <= 1):
        raise ConfigError("solver: need tol > 0, max_iter >= 1, 0 < damping <= 1")
    return opts


def _seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    s = cfg.get("master_seed", 0)
    if not isinstance(s, int) or isinstance(s, bool) or s < 0:
        raise ConfigError("master_seed must be a nonnegative integer")
    return s


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_solve(args, cfg, base) -> list[Table]:
    spec = _scenario(cfg, base)
    block = _block(cfg, "solve")
    if "snr_db" in block:
        z = complex(-snr_to_sigma2(block["snr_db"]))
    else:
        zv = block.get("z", -1.0)
        if isinstance(zv, list) and len(zv) == 2:
            z = complex(zv[0], zv[1])
        elif isinstance(zv, (int, float)) and not isinstance(zv, bool):
            z = complex(zv)
        else:
            raise ConfigError("solve.z must be a number or a [re, im] pair")
    try:
        res = de.solve_fixed_point(spec, z, _solver(cfg))
    except ValueError as exc:
        raise ConfigError(f"solve at z={z}: {exc}") from exc
    st = res.state
    if not st.converged:
        raise ConvergenceError(f"fixed point not converged at z={z} (residual {st.residual:.3e})")
    try:
        diag = de.uniqueness_diagnostic(res)
    except ValueError as exc:
        raise ConvergenceError(f"invalid solution at z={z}: {exc}") from exc
    t = Table("solve", ["quantity", "user", "real", "imag"])
    for k in range(spec.K):
        t.add("e", k, st.e[k].real, complex(st.e[k]).imag)
    for k in range(spec.K):
        t.add("e_tilde", k, st.e_tilde[k].real, complex(st.e_tilde[k]).imag)
    t.add("stieltjes", None, res.stieltjes.real, res.stieltjes.imag)
    t.add("spectral_radius", None, diag.spectral_radius, 0.0)
    t.add("iterations", None, st.iterations, 0)
    return [t]


def cmd_sweep_snr(args, cfg, base) -> list[Table]:
    spec = _scenario(cfg, base)
    block = _block(cfg, "sweep")
    snr = _snr_grid(block, "sweep")
    trials = _trials(block, "sweep", required=False)
    fadings = _fadings(block, "sweep")
    seed = _seed(args, cfg)
    scale = 1.0 / NATS_PER_BIT if args.bits else 1.0
    sigma2 = snr_to_sigma2(snr)
    opts = _solver(cfg)

    de_vals = []
    for s_db, s2 in zip(snr, sigma2):
        try:
            de_vals.append(de.det_shannon(spec, float(s2), opts))
        except ConvergenceError as exc:
            raise ConvergenceError(f"snr_db={s_db}: {exc}") from exc
        except ScenarioError as exc:
            raise ConfigError(str(exc)) from exc

    curves = [spec] if fadings is None else [spec.with_fading(f) for f in fadings]
    unit = "bits" if args.bits else "nats"
    tables = []
    for i, sp in enumerate(curves):
        label = "_".join(dict.fromkeys(u.fading.label for u in sp.users))
        t = Table(f"sweep_{i:02d}_{label}", ["snr_db", f"de_{unit}", "mc_mean", "mc_std", "trials"])
        if trials is not None:
            ens = mc.run_ensemble(sp, "mutual_info", sigma2, trials, seed, threads=args.threads)
        for j, s_db in enumerate(snr):
            if trials is None:
                t.add(s_db, de_vals[j] * scale, None, None, None)
            else:
                t.add(s_db, de_vals[j] * scale, ens.mean[j] * scale, ens.std[j] * scale, trials)
        tables.append(t)
    return tables


def cmd_variance_vs_cv(args, cfg, base) -> list[Table]:
    doc = _scenario_doc(cfg, base)
    block = _block(cfg, "variance")
    snr = _snr_grid(block, "variance")
    if len(snr) != 1:
        raise ConfigError("variance.snr_db must be a single value")
    dims = block.get("N")
    if not isinstance(dims, list) or not dims or not all(isinstance(n, int) and n > 0 for n in dims):
        raise ConfigError("variance.N must be a nonempty list of positive integers")
    trials = _trials(block, "variance", required=True)
    fadings = _fadings(block, "variance") or [FadingSpec.gaussian()]
    seed = _seed(args, cfg)
    sigma2 = snr_to_sigma2(snr)
    scale = 1.0 / NATS_PER_BIT**2 if args.bits else 1.0

    t = Table("variance_vs_cv", ["cv", "fading_family", "N", "empirical_variance"])
    for f in fadings:
        for N in dims:
            sp = scenario_from_dict(doc, N=N).with_fading(f)
            ens = mc.run_ensemble(sp, "mutual_info", sigma2, trials, seed, threads=args.threads)
            t.add(_cv(f), f.label, N, ens.variance[0] * scale)
    return [t]


def _cv(f: FadingSpec):
    return None if f.family == "zero" else cv_of(f)


def cmd_optimize_covariance(args, cfg, base) -> list[Table]:
    spec = _scenario(cfg, base)
    block = _block(cfg, "optimize")
    snr = _snr_grid(block, "optimize")
    unit = "bits" if args.bits else "nats"
    scale = 1.0 / NATS_PER_BIT if args.bits else 1.0
    opts = _solver(cfg)
    t = Table(
        "covariance",
        ["snr_db", "user", "mode", "t_eigenvalue", "power", f"rate_{unit}", f"uniform_rate_{unit}", "iterations"],
    )
    for s_db, s2 in zip(snr, snr_to_sigma2(snr)):
        try:
            sol = co.optimize_covariance(spec, float(s2), opts=opts)
        except ScenarioError as exc:
            raise ConfigError(str(exc)) from exc
        except ConvergenceError as exc:
            raise ConvergenceError(f"snr_db={s_db}: {exc}") from exc
        for k, (lam, p) in enumerate(zip(sol.eigvals, sol.powers)):
            for j in range(lam.size):
                t.add(s_db, k, j, lam[j], p[j], sol.rate * scale, sol.uniform_rate * scale, sol.iterations)
    return [t]


def cmd_validate(args, cfg, base) -> list[Table]:
    from .validation import run_validation

    scenarios = None
    if "scenarios" in cfg:
        if not isinstance(cfg["scenarios"], dict):
            raise ConfigError("'scenarios' must map names to scenario documents")
        scenarios = {name: load_scenario(d, base=base) for name, d in cfg["scenarios"].items()}
    n = run_validation(scenarios, log=lambda s: print(s, flush=True))
    print(f"validation passed: {n} checks")
    return []


COMMANDS = {
    "solve": cmd_solve,
    "sweep-snr": cmd_sweep_snr,
    "variance-vs-cv": cmd_variance_vs_cv,
    "optimize-covariance": cmd_optimize_covariance,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rmtde", description="Deterministic equivalents and Monte-Carlo checks for MIMO MAC channels")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output directory (tables go to stdout when omitted)")
    p.add_argument("--seed", type=int, help="master seed, overrides the config")
    p.add_argument("--threads", type=int, default=1, help="worker threads for Monte-Carlo trials")
    p.add_argument("--bits", action="store_true", help="report mutual information in bits")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("rmtde: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("rmtde: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg, base = _read_config(args.config)
        if args.command != "validate" and args.config is None:
            raise ConfigError(f"{args.command} needs --config")
        tables = COMMANDS[args.command](args, cfg, base)
        if args.out is not None:
            emit_plotdata(tables, args.out)
        else:
            for t in tables:
                if len(tables) > 1:
                    sys.stdout.write(f"# {t.name}\n")
                sys.stdout.write(t.to_text())
    except (ConfigError, ScenarioError) as exc:
        print(f"rmtde {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"rmtde {args.command}: not converged: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValidationFailure as exc:
        print(f"rmtde {args.command}: validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrialError as exc:
        print(f"rmtde {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"rmtde {args.command}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
